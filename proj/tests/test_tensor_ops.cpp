#include <doctest.h>

#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "istar/errors.hpp"
#include "istar/ops.hpp"

using namespace istar;
using testutil::max_abs_diff;
using testutil::random_tensor;

TEST_SUITE("tensor") {

TEST_CASE("construction checks extents and data length") {
    TensorD t({2, 3, 4, 5});
    CHECK(t.numel() == 120);
    CHECK(t.rank() == 4);
    CHECK_THROWS_AS(TensorD({2, 0, 3}), ShapeError);
    CHECK_THROWS_AS(TensorD({2, 2}, std::vector<double>(3)), ShapeError);
    CHECK(shape_str({1, 3, 8, 8}) == "(1,3,8,8)");
}

TEST_CASE("nchw indexing is row major") {
    TensorD t({2, 3, 4, 5});
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = double(i);
    CHECK(t.at(1, 2, 3, 4) == 119);
    CHECK(t.at(0, 1, 0, 0) == 20);
    CHECK(t.at(1, 0, 2, 1) == 60 + 10 + 1);
}

TEST_CASE("non-finite values are reported") {
    TensorD t({2});
    CHECK(t.all_finite());
    t[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK_FALSE(t.all_finite());
    CHECK_THROWS_AS(t.ensure_finite("x"), NumericError);
}

}

TEST_SUITE("ops") {

TEST_CASE("conv of ones with a ones kernel counts the window") {
    TensorD x = TensorD::full({1, 1, 3, 3}, 1.0);
    TensorD w = TensorD::full({1, 1, 3, 3}, 1.0);
    auto y = ops::conv2d(x, w, TensorD({1}), 1, 1);
    CHECK(y.at(0, 0, 1, 1) == 9.0);
    CHECK(y.at(0, 0, 0, 0) == 4.0);
    CHECK(y.at(0, 0, 0, 1) == 6.0);
}

TEST_CASE("identity kernel reproduces the input") {
    auto x = random_tensor<double>({2, 3, 5, 7}, 1);
    TensorD w({3, 3, 3, 3});
    for (std::size_t c = 0; c < 3; ++c) w.at(c, c, 1, 1) = 1.0;
    CHECK(ops::conv2d(x, w, TensorD({3}), 1, 1) == x);
}

TEST_CASE("conv matches the direct loop") {
    struct Case { std::size_t n, c, h, w, o, k, s, p; };
    for (Case cs : {Case{1, 1, 5, 5, 1, 1, 1, 0}, Case{2, 3, 7, 6, 4, 3, 1, 1}, Case{1, 4, 9, 9, 2, 5, 1, 2},
                    Case{2, 2, 9, 7, 3, 3, 2, 1}, Case{1, 6, 4, 4, 5, 1, 1, 0}}) {
        auto x = random_tensor<double>({cs.n, cs.c, cs.h, cs.w}, cs.h * 31 + cs.k);
        auto w = random_tensor<double>({cs.o, cs.c, cs.k, cs.k}, cs.o * 7 + cs.s);
        auto b = random_tensor<double>({cs.o}, 5);
        auto got = ops::conv2d(x, w, b, cs.s, cs.p);
        auto want = testutil::naive_conv(x, w, b, cs.s, cs.p);
        REQUIRE(got.shape() == want.shape());
        CHECK(max_abs_diff(got, want) < 1e-12);
    }
}

TEST_CASE("conv backward is the adjoint of conv") {
    auto x = random_tensor<double>({2, 3, 6, 5}, 11);
    auto w = random_tensor<double>({4, 3, 3, 3}, 12);
    TensorD zero_b({4});
    auto y = ops::conv2d(x, w, zero_b, 1, 1);
    auto g = random_tensor<double>(y.shape(), 13);
    auto grads = ops::conv2d_backward(x, w, g, 1, 1);
    // <conv(x, w), g> is bilinear, so both gradients are exact adjoints.
    double lhs = 0, rhs_x = 0, rhs_w = 0;
    for (std::size_t i = 0; i < y.numel(); ++i) lhs += y[i] * g[i];
    for (std::size_t i = 0; i < x.numel(); ++i) rhs_x += x[i] * grads.input[i];
    for (std::size_t i = 0; i < w.numel(); ++i) rhs_w += w[i] * grads.weight[i];
    CHECK(std::abs(lhs - rhs_x) < 1e-10);
    CHECK(std::abs(lhs - rhs_w) < 1e-10);
    double gsum0 = 0;
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t i = 0; i < 6; ++i)
            for (std::size_t j = 0; j < 5; ++j) gsum0 += g.at(n, 0, i, j);
    CHECK(grads.bias[0] == doctest::Approx(gsum0).epsilon(1e-12));
}

TEST_CASE("conv rejects bad shapes and non-integer outputs") {
    TensorD x({1, 2, 5, 5});
    CHECK_THROWS_AS(ops::conv2d(x, TensorD({1, 3, 3, 3}), TensorD({1}), 1, 1), ShapeError);
    CHECK_THROWS_AS(ops::conv2d(x, TensorD({1, 2, 3, 3}), TensorD({2}), 1, 1), ShapeError);
    CHECK_THROWS(ops::conv_out_extent(6, 3, 2, 0));
    CHECK(ops::conv_out_extent(7, 3, 2, 0) == 3);
}

TEST_CASE("relu and sigmoid") {
    TensorD x({4}, std::vector<double>{-1.0, 0.0, 2.0, -0.0});
    auto r = ops::relu(x);
    CHECK(r[0] == 0.0);
    CHECK(r[2] == 2.0);
    auto s = ops::sigmoid(TensorD({3}, std::vector<double>{2.0, 0.0, -800.0}));
    CHECK(s[0] == doctest::Approx(0.8807970779778823).epsilon(1e-15));
    CHECK(s[1] == 0.5);
    CHECK(s[2] >= 0.0);
    CHECK(s.all_finite());
    // Subgradient at exactly zero is zero.
    auto g = ops::relu_backward(x, TensorD::full({4}, 1.0));
    CHECK(g[1] == 0.0);
    CHECK(g[2] == 1.0);
}

TEST_CASE("pixel shuffle places channels by the documented index map") {
    const std::size_t B = 2, C = 3, r = 3, H = 4, W = 5;
    auto x = random_tensor<double>({B, C * r * r, H, W}, 3);
    auto y = ops::pixel_shuffle(x, r);
    REQUIRE(y.shape() == Shape{B, C, r * H, r * W});
    bool ok = true;
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t i = 0; i < r * H; ++i)
                for (std::size_t j = 0; j < r * W; ++j)
                    ok &= y.at(b, c, i, j) == x.at(b, c * r * r + (i % r) * r + (j % r), i / r, j / r);
    CHECK(ok);
    CHECK(ops::pixel_unshuffle(y, r) == x);
    CHECK_THROWS_AS(ops::pixel_shuffle(TensorD({1, 5, 2, 2}), 2), ShapeError);
}

TEST_CASE("concat and split round trip") {
    auto a = random_tensor<double>({2, 3, 4, 4}, 1);
    auto b = random_tensor<double>({2, 5, 4, 4}, 2);
    auto c = ops::concat_channels(a, b);
    CHECK(c.shape() == Shape{2, 8, 4, 4});
    CHECK(c.at(1, 2, 3, 1) == a.at(1, 2, 3, 1));
    CHECK(c.at(1, 7, 0, 2) == b.at(1, 4, 0, 2));
    auto [p, q] = ops::split_channels(c, 3);
    CHECK(p == a);
    CHECK(q == b);
    CHECK_THROWS_AS(ops::concat_channels(a, TensorD({2, 1, 4, 3})), ShapeError);
}

TEST_CASE("soft threshold definition cases") {
    auto y = ops::soft_threshold(TensorD({3}, std::vector<double>{1.2, -0.3, -2.0}), TensorD::scalar(0.5));
    CHECK(y[0] == doctest::Approx(0.7));
    CHECK(y[1] == 0.0);
    CHECK(y[2] == doctest::Approx(-1.5));
    auto x = random_tensor<double>({3, 4}, 9);
    CHECK(ops::soft_threshold(x, TensorD::scalar(0.0)) == x);
    CHECK_THROWS_AS(ops::soft_threshold(x, TensorD::scalar(-0.1)), InputError);
}

TEST_CASE("soft threshold is the prox of the scaled l1 norm") {
    auto x = random_tensor<double>({64}, 21, -2, 2);
    auto th = random_tensor<double>({64}, 22, 0, 1);
    auto y = ops::soft_threshold(x, th);
    // Brute-force argmin of 0.5 (z - x)^2 + theta |z| on a 1e-4 grid.
    for (std::size_t i = 0; i < 64; ++i) {
        double best = 0, best_val = std::numeric_limits<double>::infinity();
        for (long k = -30000; k <= 30000; ++k) {
            const double z = k * 1e-4;
            const double f = 0.5 * (z - x[i]) * (z - x[i]) + th[i] * std::abs(z);
            if (f < best_val) best_val = f, best = z;
        }
        CHECK(std::abs(y[i] - best) <= 1e-4);
    }
}

TEST_CASE("soft threshold is a contraction") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-3, 3), t(0, 2);
    for (int k = 0; k < 2000; ++k) {
        const double a = u(rng), b = u(rng), th = t(rng);
        auto ya = ops::soft_threshold(TensorD::scalar(a), TensorD::scalar(th))[0];
        auto yb = ops::soft_threshold(TensorD::scalar(b), TensorD::scalar(th))[0];
        REQUIRE(std::abs(ya - yb) <= std::abs(a - b) + 1e-15);
    }
}

TEST_CASE("soft threshold backward") {
    TensorD x({4}, std::vector<double>{1.0, -2.0, 0.25, 0.5});
    TensorD th = TensorD::full({4}, 0.5);
    auto g = ops::soft_threshold_backward(x, th, TensorD::full({4}, 1.0));
    CHECK(g.x[0] == 1.0);
    CHECK(g.x[2] == 0.0);
    CHECK(g.x[3] == 0.0);  // boundary counts as dead zone
    CHECK(g.theta[0] == -1.0);
    CHECK(g.theta[1] == 1.0);
    CHECK(g.theta[2] == 0.0);
}

TEST_CASE("elementwise arithmetic") {
    auto a = random_tensor<double>({2, 3}, 1);
    auto b = random_tensor<double>({2, 3}, 2);
    auto s = ops::add(a, b), d = ops::sub(a, b), m = ops::mul(a, b);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(s[i] == a[i] + b[i]);
        CHECK(d[i] == a[i] - b[i]);
        CHECK(m[i] == a[i] * b[i]);
    }
    CHECK(ops::scale(a, TensorD::scalar(2.0))[4] == 2.0 * a[4]);
    CHECK_THROWS_AS(ops::add(a, TensorD({3, 2})), ShapeError);
    CHECK(ops::sum(TensorD::full({10}, 0.1)) == doctest::Approx(1.0));
}

TEST_CASE("ops reject non-finite results") {
    TensorD big = TensorD::full({2}, std::numeric_limits<double>::max());
    CHECK_THROWS_AS(ops::add(big, big), NumericError);
}

TEST_CASE("float path agrees with double") {
    auto x = random_tensor<double>({1, 3, 8, 8}, 4);
    auto w = random_tensor<double>({5, 3, 3, 3}, 5);
    auto b = random_tensor<double>({5}, 6);
    auto yd = ops::conv2d(x, w, b, 1, 1);
    auto yf = ops::conv2d(x.cast<float>(), w.cast<float>(), b.cast<float>(), 1, 1);
    CHECK(max_abs_diff(yd, yf.cast<double>()) < 1e-5);
}

}
