#pragma once

#include <cstddef>
#include <utility>

#include "istar/tensor.hpp"

/// Forward and backward numeric kernels over NCHW tensors. All functions are
/// pure: they read their arguments and return fresh tensors.
namespace istar::ops {

/// Output extent of a convolution along one axis; throws if not a positive integer.
std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad);

/// Cross-correlation with zero padding. weight is [Cout,Cin,kh,kw] with odd
/// kernel extents, bias is [Cout].
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias, std::size_t stride = 1, std::size_t pad = 0);

template <typename T>
struct Conv2dGrads {
    BasicTensor<T> input;
    BasicTensor<T> weight;
    BasicTensor<T> bias;
};

/// Gradients of conv2d given dL/d(output). The input gradient is skipped
/// (left as a 1-element zero tensor) when need_input is false.
template <typename T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                               const BasicTensor<T>& grad_out, std::size_t stride, std::size_t pad,
                               bool need_input = true);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x);
/// d relu / dx is taken as 0 at x == 0.
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& x, const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x);
/// Uses the forward output y = sigmoid(x).
template <typename T>
BasicTensor<T> sigmoid_backward(const BasicTensor<T>& y, const BasicTensor<T>& grad_out);

/// [B, C*r*r, H, W] -> [B, C, r*H, r*W]; channel c*r*r + dy*r + dx lands at (r*h+dy, r*w+dx).
template <typename T>
BasicTensor<T> pixel_shuffle(const BasicTensor<T>& x, std::size_t r);
/// Exact inverse of pixel_shuffle (and therefore its adjoint).
template <typename T>
BasicTensor<T> pixel_unshuffle(const BasicTensor<T>& y, std::size_t r);

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);
/// Multiplies every element by the single element of s.
template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, const BasicTensor<T>& s);

/// Concatenation along axis 1; all other extents must agree.
template <typename T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b);
/// Splits along axis 1 into the first `channels` and the rest.
template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> split_channels(const BasicTensor<T>& x, std::size_t channels);

/// sign(x) * max(|x| - theta, 0). theta is either x-shaped or a single element,
/// and must be non-negative.
template <typename T>
BasicTensor<T> soft_threshold(const BasicTensor<T>& x, const BasicTensor<T>& theta);

template <typename T>
struct SoftThresholdGrads {
    BasicTensor<T> x;
    BasicTensor<T> theta;
};

/// Inside the dead zone (|x| <= theta) both gradients are zero; outside,
/// d/dx = 1 and d/dtheta = -sign(x).
template <typename T>
SoftThresholdGrads<T> soft_threshold_backward(const BasicTensor<T>& x, const BasicTensor<T>& theta,
                                              const BasicTensor<T>& grad_out);

template <typename T>
T sum(const BasicTensor<T>& x);

} // namespace istar::ops
