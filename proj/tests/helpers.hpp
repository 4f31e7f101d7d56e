#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "istar/tensor.hpp"

namespace testutil {

template <typename T>
istar::BasicTensor<T> random_tensor(istar::Shape shape, std::uint64_t seed, double lo = -1, double hi = 1) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    istar::BasicTensor<T> t(std::move(shape));
    for (auto& v : t.data()) v = static_cast<T>(u(rng));
    return t;
}

template <typename T>
double max_abs_diff(const istar::BasicTensor<T>& a, const istar::BasicTensor<T>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
    return m;
}

// Direct six-loop cross-correlation, the reference for every conv path.
template <typename T>
istar::BasicTensor<T> naive_conv(const istar::BasicTensor<T>& x, const istar::BasicTensor<T>& w,
                                 const istar::BasicTensor<T>& b, std::size_t stride, std::size_t pad) {
    const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t O = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const std::size_t OH = (H + 2 * pad - kh) / stride + 1, OW = (W + 2 * pad - kw) / stride + 1;
    istar::BasicTensor<T> y({N, O, OH, OW});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t o = 0; o < O; ++o)
            for (std::size_t i = 0; i < OH; ++i)
                for (std::size_t j = 0; j < OW; ++j) {
                    double acc = double(b[o]);
                    for (std::size_t c = 0; c < C; ++c)
                        for (std::size_t u = 0; u < kh; ++u)
                            for (std::size_t v = 0; v < kw; ++v) {
                                const long r = long(i * stride + u) - long(pad), q = long(j * stride + v) - long(pad);
                                if (r < 0 || q < 0 || r >= long(H) || q >= long(W)) continue;
                                acc += double(x.at(n, c, r, q)) * double(w.at(o, c, u, v));
                            }
                    y.at(n, o, i, j) = static_cast<T>(acc);
                }
    return y;
}

} // namespace testutil
