#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "istar/tensor.hpp"

namespace istar {

/// Reads an 8-bit RGB PNG into a [3,H,W] tensor with values v/255.
Tensor load_png(const std::string& path);

/// Writes a [3,H,W] (or [1,3,H,W]) tensor as 8-bit RGB PNG after clipping to
/// [0,1] and rounding half away from zero.
void save_png(const Tensor& image, const std::string& path);

/// Clip to [0,1] and snap to the 8-bit grid, exactly as save_png would.
Tensor quantize_8bit(const Tensor& image);

/// Keys cubic kernel with a = -0.5.
double cubic_kernel(double x);

/**
 * Separable bicubic resize of a [C,H,W] tensor. When shrinking, the kernel
 * is stretched by 1/scale (antialiasing). Samples beyond the border repeat
 * the edge pixel. Input extents must be >= 4.
 */
Tensor bicubic_resize(const Tensor& image, std::size_t out_h, std::size_t out_w);

/// Rows [top, top+h) and columns [left, left+w) of a [C,H,W] tensor.
Tensor crop(const Tensor& image, std::size_t top, std::size_t left, std::size_t h, std::size_t w);

/// Side-by-side concatenation of [3,H,W] images; shorter ones are padded with black at the bottom.
Tensor hconcat(const std::vector<Tensor>& images);

} // namespace istar
