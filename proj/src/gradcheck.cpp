#include "istar/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace istar {

namespace {

struct Probe {
    double loss;
    std::uint64_t regime;
};

Probe evaluate(const LossBuilder& build, ParamStore<double>& params) {
    Graph<double> g;
    Var loss = build(g, params);
    return {g.value(loss)[0], g.regime_signature()};
}

} // namespace

GradCheckResult grad_check(const LossBuilder& build, ParamStore<double>& params, const GradCheckOptions& opts) {
    params.zero_grad();
    std::uint64_t base_regime = 0;
    {
        Graph<double> g;
        Var loss = build(g, params);
        base_regime = g.regime_signature();
        g.backward(loss);
    }
    std::vector<TensorD> analytic;
    for (const auto& e : params.entries()) analytic.push_back(e.grad);
    params.zero_grad();

    GradCheckResult result;
    std::mt19937_64 rng(opts.seed);
    for (std::size_t p = 0; p < params.entries().size(); ++p) {
        auto& entry = params.entries()[p];
        std::vector<std::size_t> coords(entry.value.numel());
        std::iota(coords.begin(), coords.end(), 0);
        if (opts.max_coords_per_param != 0 && coords.size() > opts.max_coords_per_param) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(opts.max_coords_per_param);
            std::sort(coords.begin(), coords.end());
        }
        for (std::size_t i : coords) {
            const double original = entry.value[i];
            entry.value[i] = original + opts.eps;
            const Probe plus = evaluate(build, params);
            entry.value[i] = original - opts.eps;
            const Probe minus = evaluate(build, params);
            entry.value[i] = original;

            if (plus.regime != base_regime || minus.regime != base_regime) {
                ++result.skipped_kink;
                continue;
            }
            const double numeric = (plus.loss - minus.loss) / (2 * opts.eps);
            const double a = analytic[p][i];
            const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
            ++result.checked;
            if (err > result.max_rel_error) {
                result.max_rel_error = err;
                result.worst_param = entry.name;
                result.worst_index = i;
            }
        }
    }
    return result;
}

} // namespace istar
