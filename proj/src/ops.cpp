#include "istar/ops.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

namespace istar::ops {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

void require_rank4(const Shape& s, const char* what) {
    if (s.size() != 4) throw ShapeError(std::string(what) + " expects a rank-4 NCHW tensor, got " + shape_str(s));
}

void require_same(const Shape& a, const Shape& b, const char* what) {
    if (a != b) throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

struct ConvGeom {
    std::size_t batch, cin, h, w, cout, kh, kw, stride, pad, oh, ow;
    bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
    std::size_t patch() const { return cin * kh * kw; }
    std::size_t pixels() const { return oh * ow; }
};

template <typename T>
ConvGeom conv_geom(const BasicTensor<T>& input, const BasicTensor<T>& weight, std::size_t stride,
                   std::size_t pad) {
    require_rank4(input.shape(), "conv2d input");
    require_rank4(weight.shape(), "conv2d weight");
    ConvGeom g{};
    g.batch = input.dim(0);
    g.cin = input.dim(1);
    g.h = input.dim(2);
    g.w = input.dim(3);
    g.cout = weight.dim(0);
    g.kh = weight.dim(2);
    g.kw = weight.dim(3);
    g.stride = stride;
    g.pad = pad;
    if (weight.dim(1) != g.cin)
        throw ShapeError("conv2d: input has " + std::to_string(g.cin) + " channels but weight expects " +
                         std::to_string(weight.dim(1)));
    if (g.kh % 2 == 0 || g.kw % 2 == 0) throw ShapeError("conv2d: kernel extents must be odd");
    g.oh = conv_out_extent(g.h, g.kh, stride, pad);
    g.ow = conv_out_extent(g.w, g.kw, stride, pad);
    return g;
}

// cols is [cin*kh*kw, oh*ow], row index (c*kh + i)*kw + j.
template <typename T>
void im2col(const T* img, const ConvGeom& g, T* cols) {
    const auto P = g.pixels();
    for (std::size_t c = 0; c < g.cin; ++c) {
        const T* plane = img + c * g.h * g.w;
        for (std::size_t i = 0; i < g.kh; ++i) {
            for (std::size_t j = 0; j < g.kw; ++j) {
                T* row = cols + ((c * g.kh + i) * g.kw + j) * P;
                for (std::size_t oy = 0; oy < g.oh; ++oy) {
                    const long y = static_cast<long>(oy * g.stride + i) - static_cast<long>(g.pad);
                    T* dst = row + oy * g.ow;
                    if (y < 0 || y >= static_cast<long>(g.h)) {
                        std::fill(dst, dst + g.ow, T(0));
                        continue;
                    }
                    const T* src = plane + static_cast<std::size_t>(y) * g.w;
                    for (std::size_t ox = 0; ox < g.ow; ++ox) {
                        const long x = static_cast<long>(ox * g.stride + j) - static_cast<long>(g.pad);
                        dst[ox] = (x < 0 || x >= static_cast<long>(g.w)) ? T(0) : src[x];
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const T* cols, const ConvGeom& g, T* img) {
    const auto P = g.pixels();
    for (std::size_t c = 0; c < g.cin; ++c) {
        T* plane = img + c * g.h * g.w;
        for (std::size_t i = 0; i < g.kh; ++i) {
            for (std::size_t j = 0; j < g.kw; ++j) {
                const T* row = cols + ((c * g.kh + i) * g.kw + j) * P;
                for (std::size_t oy = 0; oy < g.oh; ++oy) {
                    const long y = static_cast<long>(oy * g.stride + i) - static_cast<long>(g.pad);
                    if (y < 0 || y >= static_cast<long>(g.h)) continue;
                    T* dst = plane + static_cast<std::size_t>(y) * g.w;
                    const T* src = row + oy * g.ow;
                    for (std::size_t ox = 0; ox < g.ow; ++ox) {
                        const long x = static_cast<long>(ox * g.stride + j) - static_cast<long>(g.pad);
                        if (x >= 0 && x < static_cast<long>(g.w)) dst[x] += src[ox];
                    }
                }
            }
        }
    }
}

template <typename T, typename F>
BasicTensor<T> map_unary(const BasicTensor<T>& x, F f) {
    BasicTensor<T> out(x.shape());
    const T* src = x.ptr();
    T* dst = out.ptr();
    for (std::size_t i = 0; i < x.numel(); ++i) dst[i] = f(src[i]);
    out.ensure_finite("elementwise result");
    return out;
}

template <typename T, typename F>
BasicTensor<T> map_binary(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* what, F f) {
    require_same(a.shape(), b.shape(), what);
    BasicTensor<T> out(a.shape());
    const T* pa = a.ptr();
    const T* pb = b.ptr();
    T* dst = out.ptr();
    for (std::size_t i = 0; i < a.numel(); ++i) dst[i] = f(pa[i], pb[i]);
    out.ensure_finite(what);
    return out;
}

template <typename T>
void check_theta(const BasicTensor<T>& x, const BasicTensor<T>& theta) {
    if (theta.numel() != 1 && theta.shape() != x.shape())
        throw ShapeError("soft_threshold: threshold shape " + shape_str(theta.shape()) +
                         " is neither scalar nor " + shape_str(x.shape()));
    for (T t : theta.data())
        if (!(t >= T(0))) throw InputError("soft_threshold: threshold must be non-negative");
}

} // namespace

std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
    if (stride == 0) throw ShapeError("conv2d: stride must be >= 1");
    const long span = static_cast<long>(in + 2 * pad) - static_cast<long>(kernel);
    if (span < 0 || span % static_cast<long>(stride) != 0)
        throw ShapeError("conv2d: extent " + std::to_string(in) + " with kernel " + std::to_string(kernel) +
                         ", stride " + std::to_string(stride) + ", pad " + std::to_string(pad) +
                         " gives a non-integer output extent");
    return static_cast<std::size_t>(span) / stride + 1;
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight, const BasicTensor<T>& bias,
                      std::size_t stride, std::size_t pad) {
    const ConvGeom g = conv_geom(input, weight, stride, pad);
    if (bias.numel() != g.cout) throw ShapeError("conv2d: bias length must equal output channels");

    BasicTensor<T> out(Shape{g.batch, g.cout, g.oh, g.ow});
    const auto K = g.patch();
    const auto P = g.pixels();
    ConstMapMat<T> wmat(weight.ptr(), g.cout, K);
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bvec(bias.ptr(), g.cout);
    std::vector<T> cols(g.pointwise() ? 0 : K * P);

    for (std::size_t n = 0; n < g.batch; ++n) {
        const T* img = input.ptr() + n * g.cin * g.h * g.w;
        const T* colptr = img;
        if (!g.pointwise()) {
            im2col(img, g, cols.data());
            colptr = cols.data();
        }
        MapMat<T> omat(out.ptr() + n * g.cout * P, g.cout, P);
        omat.noalias() = wmat * ConstMapMat<T>(colptr, K, P);
        omat.colwise() += bvec;
    }
    out.ensure_finite("conv2d output");
    return out;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                               const BasicTensor<T>& grad_out, std::size_t stride, std::size_t pad,
                               bool need_input) {
    const ConvGeom g = conv_geom(input, weight, stride, pad);
    require_same(grad_out.shape(), Shape{g.batch, g.cout, g.oh, g.ow}, "conv2d_backward");

    const auto K = g.patch();
    const auto P = g.pixels();
    Conv2dGrads<T> grads{need_input ? BasicTensor<T>(input.shape()) : BasicTensor<T>(),
                         BasicTensor<T>(weight.shape()), BasicTensor<T>(Shape{g.cout})};
    ConstMapMat<T> wmat(weight.ptr(), g.cout, K);
    MapMat<T> dw(grads.weight.ptr(), g.cout, K);
    std::vector<T> cols(g.pointwise() ? 0 : K * P);
    std::vector<T> dcols(g.pointwise() || !need_input ? 0 : K * P);

    for (std::size_t n = 0; n < g.batch; ++n) {
        const T* img = input.ptr() + n * g.cin * g.h * g.w;
        ConstMapMat<T> dy(grad_out.ptr() + n * g.cout * P, g.cout, P);

        for (std::size_t co = 0; co < g.cout; ++co) {
            const T* row = grad_out.ptr() + (n * g.cout + co) * P;
            T acc = 0;
            for (std::size_t p = 0; p < P; ++p) acc += row[p];
            grads.bias[co] += acc;
        }

        const T* colptr = img;
        if (!g.pointwise()) {
            im2col(img, g, cols.data());
            colptr = cols.data();
        }
        dw.noalias() += dy * ConstMapMat<T>(colptr, K, P).transpose();

        if (!need_input) continue;
        T* dimg = grads.input.ptr() + n * g.cin * g.h * g.w;
        if (g.pointwise()) {
            MapMat<T>(dimg, K, P).noalias() = wmat.transpose() * dy;
        } else {
            MapMat<T>(dcols.data(), K, P).noalias() = wmat.transpose() * dy;
            col2im_add(dcols.data(), g, dimg);
        }
    }
    grads.weight.ensure_finite("conv2d weight gradient");
    if (need_input) grads.input.ensure_finite("conv2d input gradient");
    return grads;
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
    return map_unary(x, [](T v) { return v > T(0) ? v : T(0); });
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& x, const BasicTensor<T>& grad_out) {
    return map_binary(x, grad_out, "relu_backward", [](T v, T g) { return v > T(0) ? g : T(0); });
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
    return map_unary(x, [](T v) {
        // Split by sign so exp never overflows.
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
    });
}

template <typename T>
BasicTensor<T> sigmoid_backward(const BasicTensor<T>& y, const BasicTensor<T>& grad_out) {
    return map_binary(y, grad_out, "sigmoid_backward", [](T s, T g) { return g * s * (T(1) - s); });
}

template <typename T>
BasicTensor<T> pixel_shuffle(const BasicTensor<T>& x, std::size_t r) {
    require_rank4(x.shape(), "pixel_shuffle");
    if (r == 0 || x.dim(1) % (r * r) != 0)
        throw ShapeError("pixel_shuffle: channels " + std::to_string(x.dim(1)) + " not divisible by r^2");
    const auto B = x.dim(0), C = x.dim(1) / (r * r), H = x.dim(2), W = x.dim(3);
    BasicTensor<T> out(Shape{B, C, H * r, W * r});
    for (std::size_t n = 0; n < B; ++n)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t dy = 0; dy < r; ++dy)
                for (std::size_t dx = 0; dx < r; ++dx) {
                    const std::size_t src_c = (c * r + dy) * r + dx;
                    for (std::size_t h = 0; h < H; ++h)
                        for (std::size_t w = 0; w < W; ++w)
                            out.at(n, c, h * r + dy, w * r + dx) = x.at(n, src_c, h, w);
                }
    return out;
}

template <typename T>
BasicTensor<T> pixel_unshuffle(const BasicTensor<T>& y, std::size_t r) {
    require_rank4(y.shape(), "pixel_unshuffle");
    if (r == 0 || y.dim(2) % r != 0 || y.dim(3) % r != 0)
        throw ShapeError("pixel_unshuffle: spatial extents not divisible by r");
    const auto B = y.dim(0), C = y.dim(1), H = y.dim(2) / r, W = y.dim(3) / r;
    BasicTensor<T> out(Shape{B, C * r * r, H, W});
    for (std::size_t n = 0; n < B; ++n)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t dy = 0; dy < r; ++dy)
                for (std::size_t dx = 0; dx < r; ++dx) {
                    const std::size_t dst_c = (c * r + dy) * r + dx;
                    for (std::size_t h = 0; h < H; ++h)
                        for (std::size_t w = 0; w < W; ++w)
                            out.at(n, dst_c, h, w) = y.at(n, c, h * r + dy, w * r + dx);
                }
    return out;
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return map_binary(a, b, "add", [](T u, T v) { return u + v; });
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return map_binary(a, b, "sub", [](T u, T v) { return u - v; });
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return map_binary(a, b, "mul", [](T u, T v) { return u * v; });
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, const BasicTensor<T>& s) {
    if (s.numel() != 1) throw ShapeError("scale: factor must have exactly one element");
    const T f = s[0];
    return map_unary(x, [f](T v) { return v * f; });
}

template <typename T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    require_rank4(a.shape(), "concat_channels");
    require_rank4(b.shape(), "concat_channels");
    if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
        throw ShapeError("concat_channels: non-channel extents differ: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    const auto B = a.dim(0), ca = a.dim(1), cb = b.dim(1), plane = a.dim(2) * a.dim(3);
    BasicTensor<T> out(Shape{B, ca + cb, a.dim(2), a.dim(3)});
    for (std::size_t n = 0; n < B; ++n) {
        T* dst = out.ptr() + n * (ca + cb) * plane;
        std::copy_n(a.ptr() + n * ca * plane, ca * plane, dst);
        std::copy_n(b.ptr() + n * cb * plane, cb * plane, dst + ca * plane);
    }
    return out;
}

template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> split_channels(const BasicTensor<T>& x, std::size_t channels) {
    require_rank4(x.shape(), "split_channels");
    if (channels == 0 || channels >= x.dim(1)) throw ShapeError("split_channels: split point out of range");
    const auto B = x.dim(0), C = x.dim(1), plane = x.dim(2) * x.dim(3);
    BasicTensor<T> a(Shape{B, channels, x.dim(2), x.dim(3)});
    BasicTensor<T> b(Shape{B, C - channels, x.dim(2), x.dim(3)});
    for (std::size_t n = 0; n < B; ++n) {
        const T* src = x.ptr() + n * C * plane;
        std::copy_n(src, channels * plane, a.ptr() + n * channels * plane);
        std::copy_n(src + channels * plane, (C - channels) * plane, b.ptr() + n * (C - channels) * plane);
    }
    return {std::move(a), std::move(b)};
}

template <typename T>
BasicTensor<T> soft_threshold(const BasicTensor<T>& x, const BasicTensor<T>& theta) {
    check_theta(x, theta);
    BasicTensor<T> out(x.shape());
    const bool uniform = theta.numel() == 1;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const T t = theta[uniform ? 0 : i];
        const T v = x[i];
        out[i] = v > t ? v - t : (v < -t ? v + t : T(0));
    }
    out.ensure_finite("soft_threshold");
    return out;
}

template <typename T>
SoftThresholdGrads<T> soft_threshold_backward(const BasicTensor<T>& x, const BasicTensor<T>& theta,
                                              const BasicTensor<T>& grad_out) {
    check_theta(x, theta);
    require_same(x.shape(), grad_out.shape(), "soft_threshold_backward");
    const bool uniform = theta.numel() == 1;
    SoftThresholdGrads<T> grads{BasicTensor<T>(x.shape()), BasicTensor<T>(theta.shape())};
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const T t = theta[uniform ? 0 : i];
        const T v = x[i];
        const T g = grad_out[i];
        T dtheta = 0;
        if (v > t) {
            grads.x[i] = g;
            dtheta = -g;
        } else if (v < -t) {
            grads.x[i] = g;
            dtheta = g;
        }
        grads.theta[uniform ? 0 : i] += dtheta;
    }
    return grads;
}

template <typename T>
T sum(const BasicTensor<T>& x) {
    double acc = 0;
    for (T v : x.data()) acc += static_cast<double>(v);
    return static_cast<T>(acc);
}

#define ISTAR_INSTANTIATE_OPS(T)                                                                        \
    template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,  \
                                   std::size_t, std::size_t);                                           \
    template Conv2dGrads<T> conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&,                 \
                                            const BasicTensor<T>&, std::size_t, std::size_t, bool);      \
    template BasicTensor<T> relu(const BasicTensor<T>&);                                                \
    template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);                \
    template BasicTensor<T> sigmoid(const BasicTensor<T>&);                                             \
    template BasicTensor<T> sigmoid_backward(const BasicTensor<T>&, const BasicTensor<T>&);             \
    template BasicTensor<T> pixel_shuffle(const BasicTensor<T>&, std::size_t);                          \
    template BasicTensor<T> pixel_unshuffle(const BasicTensor<T>&, std::size_t);                        \
    template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                          \
    template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);                          \
    template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);                          \
    template BasicTensor<T> scale(const BasicTensor<T>&, const BasicTensor<T>&);                        \
    template BasicTensor<T> concat_channels(const BasicTensor<T>&, const BasicTensor<T>&);              \
    template std::pair<BasicTensor<T>, BasicTensor<T>> split_channels(const BasicTensor<T>&, std::size_t); \
    template BasicTensor<T> soft_threshold(const BasicTensor<T>&, const BasicTensor<T>&);               \
    template SoftThresholdGrads<T> soft_threshold_backward(const BasicTensor<T>&, const BasicTensor<T>&, \
                                                           const BasicTensor<T>&);                      \
    template T sum(const BasicTensor<T>&);

ISTAR_INSTANTIATE_OPS(float)
ISTAR_INSTANTIATE_OPS(double)

#undef ISTAR_INSTANTIATE_OPS

} // namespace istar::ops
