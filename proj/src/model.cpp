#include "istar/model.hpp"

#include <cmath>
#include <random>

#include "istar/gradcheck.hpp"

namespace istar {

namespace {

// Portable uniform in [-bound, bound): 53 random mantissa bits from mt19937_64.
double uniform_symmetric(std::mt19937_64& rng, double bound) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return (2.0 * u - 1.0) * bound;
}

} // namespace

template <typename T>
void validate_params(const ModelConfig& config, const ParamStore<T>& params) {
    const auto layout = istar_layout(config);
    std::size_t expected = 0;
    auto check = [&](const std::string& name, const Shape& shape) {
        ++expected;
        if (!params.contains(name)) throw ConfigMismatch("missing parameter '" + name + "'");
        const auto& got = params.value(name).shape();
        if (got != shape)
            throw ConfigMismatch("parameter '" + name + "' has shape " + shape_str(got) + ", expected " +
                                 shape_str(shape));
    };
    for (const auto& l : layout) {
        if (l.is_scalar()) {
            check(l.name, Shape{1});
        } else {
            check(l.name + ".weight", Shape{l.out, l.in, l.kernel, l.kernel});
            check(l.name + ".bias", Shape{l.out});
        }
    }
    if (params.size() != expected) {
        for (const auto& e : params.entries()) {
            bool known = false;
            for (const auto& n : istar_param_names(config)) known = known || n == e.name;
            if (!known) throw ConfigMismatch("unexpected parameter '" + e.name + "'");
        }
    }
}

template <typename T>
IstarModel<T>::IstarModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
    std::mt19937_64 rng(seed);
    for (const auto& l : istar_layout(config_)) {
        if (l.is_scalar()) {
            params_.add(l.name, BasicTensor<T>::scalar(static_cast<T>(l.init_gain)));
            continue;
        }
        BasicTensor<T> w(Shape{l.out, l.in, l.kernel, l.kernel});
        const double bound = l.init_gain * std::sqrt(6.0 / static_cast<double>(l.in * l.kernel * l.kernel));
        for (auto& v : w.data()) v = static_cast<T>(uniform_symmetric(rng, bound));
        params_.add(l.name + ".weight", std::move(w));
        params_.add(l.name + ".bias", BasicTensor<T>(Shape{l.out}));
    }
}

template <typename T>
IstarModel<T>::IstarModel(const ModelConfig& config, ParamStore<T> params)
    : config_(config), params_(std::move(params)) {
    config_.validate();
    validate_params(config_, params_);
}

template <typename T>
Var IstarModel<T>::forward(Graph<T>& graph, Var input) {
    GraphOps<T> o(graph, params_);
    return blocks::forward(o, config_, input);
}

template <typename T>
BasicTensor<T> IstarModel<T>::infer(const BasicTensor<T>& input) const {
    EagerOps<T> o(params_);
    return blocks::forward(o, config_, input);
}

template <typename T>
std::uint64_t IstarModel<T>::estimate_macs(std::size_t height, std::size_t width) const {
    return istar::estimate_macs(config_, height, width);
}

template <typename T>
void IstarModel<T>::project_constraints() {
    for (std::size_t k = 0; k < config_.iterations; ++k) {
        auto& t = params_.value(blocks::block_prefix(k) + "st.theta_max");
        if (t[0] < T(0)) t[0] = T(0);
    }
}

std::uint64_t estimate_macs(const ModelConfig& config, std::size_t height, std::size_t width) {
    std::uint64_t macs = 0;
    for (const auto& l : istar_layout(config)) macs += l.macs(height, width);
    return macs;
}

std::size_t count_params(const ModelConfig& config) {
    std::size_t n = 0;
    for (const auto& l : istar_layout(config)) n += l.param_count();
    return n;
}

GradCheckResult model_grad_check(const ModelConfig& config, std::size_t size, std::uint64_t seed, double eps) {
    IstarModel<double> model(config, seed);
    std::mt19937_64 rng(seed ^ 0x5eedULL);
    for (auto& e : model.params().entries()) {
        if (e.name.ends_with(".bias"))
            for (auto& v : e.value.data()) v = uniform_symmetric(rng, 0.1);
        if (e.name.ends_with("theta_max")) e.value[0] = 0.1;
    }
    TensorD input(Shape{1, config.colors, size, size});
    for (auto& v : input.data()) v = 0.5 + uniform_symmetric(rng, 0.5);
    TensorD target(Shape{1, config.colors, size * config.scale, size * config.scale});
    for (auto& v : target.data()) v = 0.5 + uniform_symmetric(rng, 0.5);

    LossBuilder build = [&](Graph<double>& g, ParamStore<double>&) {
        return g.l1_loss(model.forward(g, g.constant(input, "input")), g.constant(target, "target"), "loss");
    };
    GradCheckOptions opts;
    opts.eps = eps;
    return grad_check(build, model.params(), opts);
}

template class IstarModel<float>;
template class IstarModel<double>;
template void validate_params(const ModelConfig&, const ParamStore<float>&);
template void validate_params(const ModelConfig&, const ParamStore<double>&);

} // namespace istar
