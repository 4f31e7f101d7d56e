#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "istar/tensor.hpp"

namespace istar {

enum class ColorMode { Y, RGB };

const char* color_mode_name(ColorMode mode) noexcept;
ColorMode parse_color_mode(const std::string& text);

/**
 * Planes in the 8-bit value domain after shaving `shave` pixels per side.
 * Y mode yields one BT.601 luma plane 65.481 R + 128.553 G + 24.966 B + 16
 * (RGB in [0,1]); RGB mode yields the three channels scaled by 255.
 */
std::vector<std::vector<double>> metric_planes(const Tensor& image, std::size_t shave, ColorMode mode,
                                               std::size_t& height, std::size_t& width);

/// 10 log10(255^2 / MSE); +infinity for identical inputs.
double psnr(const Tensor& a, const Tensor& b, std::size_t shave, ColorMode mode = ColorMode::Y);

/// Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, L = 255, averaged over valid window positions (and channels in RGB mode).
double ssim(const Tensor& a, const Tensor& b, std::size_t shave, ColorMode mode = ColorMode::Y);

} // namespace istar
