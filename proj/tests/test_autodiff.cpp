#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "istar/autodiff.hpp"
#include "istar/errors.hpp"
#include "istar/gradcheck.hpp"
#include "istar/ops.hpp"
#include "istar/param_store.hpp"

using namespace istar;
using testutil::random_tensor;

TEST_SUITE("autodiff") {

TEST_CASE("gradient of sum is ones") {
    Graph<double> g;
    auto x = g.variable(random_tensor<double>({2, 3}, 1));
    auto s = g.sum(x);
    g.backward(s);
    const auto gx = g.grad(x);
    for (double v : gx.data()) CHECK(v == 1.0);
}

TEST_CASE("relu gradient is the positive indicator") {
    Graph<double> g;
    TensorD xv({5}, std::vector<double>{-2, -0.5, 0, 0.5, 3});
    auto x = g.variable(xv);
    g.backward(g.sum(g.relu(x)));
    const std::vector<double> want{0, 0, 0, 1, 1};
    for (std::size_t i = 0; i < 5; ++i) CHECK(g.grad(x)[i] == want[i]);
}

TEST_CASE("linear ops give their coefficients") {
    Graph<double> g;
    auto a = g.variable(random_tensor<double>({4}, 2));
    auto b = g.variable(random_tensor<double>({4}, 3));
    auto s = g.constant(TensorD::scalar(3.0));
    // sum(3a - b + a*b)
    auto loss = g.sum(g.add(g.sub(g.scale(a, s), b), g.mul(a, b)));
    g.backward(loss);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(g.grad(a)[i] == doctest::Approx(3.0 + g.value(b)[i]));
        CHECK(g.grad(b)[i] == doctest::Approx(-1.0 + g.value(a)[i]));
    }
}

TEST_CASE("fan-out accumulates") {
    Graph<double> g;
    auto x = g.variable(TensorD::full({3}, 2.0));
    // x used three times: sum(x*x + x)
    auto loss = g.sum(g.add(g.mul(x, x), x));
    g.backward(loss);
    const auto gx = g.grad(x);
    for (double v : gx.data()) CHECK(v == 5.0);
}

TEST_CASE("unreached nodes have zero gradient") {
    Graph<double> g;
    auto x = g.variable(TensorD::full({2}, 1.0));
    auto y = g.variable(TensorD::full({2}, 1.0));
    g.backward(g.sum(x));
    CHECK(g.grad(y) == TensorD::zeros({2}));
}

TEST_CASE("backward needs a scalar loss") {
    Graph<double> g;
    auto x = g.variable(TensorD({3}));
    CHECK_THROWS(g.backward(x));
}

TEST_CASE("l1 loss and its sign convention") {
    Graph<double> g;
    auto p = g.variable(TensorD({4}, std::vector<double>{1, 2, 3, 4}));
    auto t = g.constant(TensorD({4}, std::vector<double>{0, 2, 5, 4.5}));
    auto l = g.l1_loss(p, t);
    CHECK(g.value(l)[0] == doctest::Approx((1 + 0 + 2 + 0.5) / 4.0));
    g.backward(l);
    CHECK(g.grad(p)[0] == 0.25);
    CHECK(g.grad(p)[1] == 0.0);
    CHECK(g.grad(p)[2] == -0.25);
}

TEST_CASE("parameters share a leaf and deposit gradients into the store") {
    ParamStore<double> ps;
    ps.add("w", TensorD::full({2}, 3.0));
    Graph<double> g;
    auto w1 = g.param(ps, "w");
    auto w2 = g.param(ps, "w");
    CHECK(w1.id == w2.id);
    g.backward(g.sum(g.mul(w1, w2)));
    CHECK(ps.grad("w")[0] == 6.0);
}

TEST_CASE("forward failures name the node") {
    Graph<double> g;
    auto big = g.variable(TensorD::full({1}, 1e308));
    try {
        g.add(big, big, "blocks.3.sum");
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("blocks.3.sum") != std::string::npos);
    }
}

TEST_CASE("gradcheck: linear conv model") {
    ParamStore<double> ps;
    ps.add("w", random_tensor<double>({3, 2, 3, 3}, 1));
    ps.add("b", random_tensor<double>({3}, 2));
    const auto x = random_tensor<double>({2, 2, 5, 5}, 3);
    const auto c = random_tensor<double>({2, 3, 5, 5}, 4);
    auto build = [&](Graph<double>& g, ParamStore<double>& p) {
        auto y = g.conv2d(g.constant(x), g.param(p, "w"), g.param(p, "b"), 1, 1);
        return g.sum(g.mul(y, g.constant(c)));
    };
    auto r = grad_check(build, ps);
    CHECK(r.checked == 57);
    CHECK(r.max_rel_error < 1e-7);
}

TEST_CASE("gradcheck: conv, relu, sigmoid, shuffle, threshold") {
    ParamStore<double> ps;
    ps.add("w1", random_tensor<double>({4, 2, 3, 3}, 5));
    ps.add("b1", random_tensor<double>({4}, 6, -0.1, 0.1));
    ps.add("w2", random_tensor<double>({4, 4, 1, 1}, 7));
    ps.add("b2", random_tensor<double>({4}, 8));
    ps.add("theta", TensorD::scalar(0.2));
    const auto x = random_tensor<double>({1, 2, 4, 4}, 9);
    const auto t = random_tensor<double>({1, 1, 8, 8}, 10);
    auto build = [&](Graph<double>& g, ParamStore<double>& p) {
        auto h = g.relu(g.conv2d(g.constant(x), g.param(p, "w1"), g.param(p, "b1"), 1, 1));
        auto a = g.sigmoid(g.conv2d(h, g.param(p, "w2"), g.param(p, "b2"), 1, 0));
        auto th = g.scale(a, g.param(p, "theta"));
        auto s = g.soft_threshold(g.mul(h, a), th);
        auto y = g.concat(s, h);
        auto up = g.pixel_shuffle(g.add(y, y), 2);
        auto first = g.conv2d(up, g.constant(TensorD::full({1, 2, 1, 1}, 0.5)), g.constant(TensorD({1})), 1, 0);
        return g.l1_loss(first, g.constant(t));
    };
    auto r = grad_check(build, ps);
    CHECK(r.checked > 80);
    CHECK(r.max_rel_error < 1e-5);
}

TEST_CASE("regime signature tracks branch decisions") {
    auto sig = [](double v) {
        Graph<double> g;
        g.relu(g.variable(TensorD({2}, std::vector<double>{v, 1.0})));
        return g.regime_signature();
    };
    CHECK(sig(0.5) == sig(0.7));
    CHECK(sig(0.5) != sig(-0.5));
}

}

TEST_SUITE("adam") {

TEST_CASE("zero gradient leaves parameters unchanged") {
    ParamStore<double> ps;
    ps.add("p", TensorD({3}, std::vector<double>{1, -2, 3}));
    adam_step(ps, 0.1);
    CHECK(ps.value("p") == TensorD({3}, std::vector<double>{1, -2, 3}));
    CHECK(ps.step() == 1);
}

TEST_CASE("first step moves by about lr against the gradient sign") {
    ParamStore<double> ps;
    ps.add("p", TensorD({2}, std::vector<double>{0.0, 0.0}));
    ps.grad("p") = TensorD({2}, std::vector<double>{0.3, -7.0});
    adam_step(ps, 1e-3);
    CHECK(ps.value("p")[0] == doctest::Approx(-1e-3).epsilon(1e-6));
    CHECK(ps.value("p")[1] == doctest::Approx(1e-3).epsilon(1e-6));
    CHECK(ps.grad("p") == TensorD::zeros({2}));
}

TEST_CASE("two scripted steps follow the bias-corrected recurrence") {
    const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double g1 = 0.5, g2 = -1.5;
    // Independent scalar replay.
    double p = 1.0, m = 0, v = 0;
    int t = 0;
    for (double gr : {g1, g2}) {
        ++t;
        m = b1 * m + (1 - b1) * gr;
        v = b2 * v + (1 - b2) * gr * gr;
        const double mh = m / (1 - std::pow(b1, t)), vh = v / (1 - std::pow(b2, t));
        p -= lr * mh / (std::sqrt(vh) + eps);
    }
    ParamStore<double> ps;
    ps.add("p", TensorD::scalar(1.0));
    ps.grad("p")[0] = g1;
    adam_step(ps, lr);
    ps.grad("p")[0] = g2;
    adam_step(ps, lr);
    CHECK(std::abs(ps.value("p")[0] - p) < 1e-12);
    CHECK(std::abs(ps.entry("p").m[0] - m) < 1e-12);
    CHECK(std::abs(ps.entry("p").v[0] - v) < 1e-12);
}

TEST_CASE("duplicate names are rejected") {
    ParamStore<float> ps;
    ps.add("a", Tensor({1}));
    CHECK_THROWS(ps.add("a", Tensor({1})));
    CHECK_THROWS(ps.entry("b"));
}

}
