#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

#include "istar/autodiff.hpp"

namespace istar {

/// Builds a scalar loss from the parameters. Called once per probe.
using LossBuilder = std::function<Var(Graph<double>&, ParamStore<double>&)>;

struct GradCheckOptions {
    double eps = 1e-4;
    /// 0 checks every coordinate; otherwise a seeded sample of this many per tensor.
    std::size_t max_coords_per_param = 0;
    std::uint64_t seed = 0;
};

struct GradCheckResult {
    double max_rel_error = 0;
    std::size_t checked = 0;
    /// Coordinates whose +-eps probes changed a relu/threshold/l1 branch decision.
    std::size_t skipped_kink = 0;
    std::string worst_param;
    std::size_t worst_index = 0;
};

/**
 * Compares backward() against central differences. The error of one
 * coordinate is |analytic - numeric| / max(1, |analytic|, |numeric|).
 *
 * Kink rule: a coordinate is excluded when the regime signature of the graph
 * at p - eps or p + eps differs from the one at p, i.e. the probe straddles a
 * non-differentiable point of some piecewise op.
 */
GradCheckResult grad_check(const LossBuilder& build, ParamStore<double>& params, const GradCheckOptions& opts = {});

} // namespace istar
