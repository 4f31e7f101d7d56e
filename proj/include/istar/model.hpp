#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "istar/autodiff.hpp"
#include "istar/errors.hpp"
#include "istar/model_config.hpp"
#include "istar/ops.hpp"
#include "istar/param_store.hpp"

namespace istar {

/// Executes network ops directly on tensors. No gradients are recorded and
/// intermediates are released as soon as they go out of scope.
template <typename T>
class EagerOps {
public:
    using V = BasicTensor<T>;

    explicit EagerOps(const ParamStore<T>& params) : params_(params) {}

    const V& param(const std::string& name) { return params_.value(name); }
    /// Stride-1 convolution with "same" zero padding, weights <name>.weight/.bias.
    V conv(const V& x, const std::string& name) {
        const auto& w = params_.value(name + ".weight");
        return named(name, [&] { return ops::conv2d(x, w, params_.value(name + ".bias"), 1, w.dim(2) / 2); });
    }
    V relu(const V& x, const std::string& l = {}) { return named(l, [&] { return ops::relu(x); }); }
    V sigmoid(const V& x, const std::string& l = {}) { return named(l, [&] { return ops::sigmoid(x); }); }
    V add(const V& a, const V& b, const std::string& l = {}) { return named(l, [&] { return ops::add(a, b); }); }
    V mul(const V& a, const V& b, const std::string& l = {}) { return named(l, [&] { return ops::mul(a, b); }); }
    V scale(const V& x, const V& s, const std::string& l = {}) { return named(l, [&] { return ops::scale(x, s); }); }
    V concat(const V& a, const V& b, const std::string& l = {}) {
        return named(l, [&] { return ops::concat_channels(a, b); });
    }
    V soft_threshold(const V& x, const V& t, const std::string& l = {}) {
        return named(l, [&] { return ops::soft_threshold(x, t); });
    }
    V pixel_shuffle(const V& x, std::size_t r, const std::string& l = {}) {
        return named(l, [&] { return ops::pixel_shuffle(x, r); });
    }
    V offset(const V& x, T c, const std::string& l = {}) {
        return named(l, [&] { return ops::add(x, V::full(x.shape(), c)); });
    }

private:
    // Prefixes numeric failures with the layer that produced them.
    template <typename F>
    static V named(const std::string& label, F&& f) {
        try {
            return f();
        } catch (const NumericError& e) {
            throw NumericError(label.empty() ? std::string(e.what()) : label + ": " + e.what());
        }
    }

    const ParamStore<T>& params_;
};

/// Records network ops on a Graph so they can be differentiated.
template <typename T>
class GraphOps {
public:
    using V = Var;

    GraphOps(Graph<T>& graph, ParamStore<T>& params) : graph_(graph), params_(params) {}

    V param(const std::string& name) { return graph_.param(params_, name); }
    V conv(V x, const std::string& name) {
        const auto pad = params_.value(name + ".weight").dim(2) / 2;
        return graph_.conv2d(x, param(name + ".weight"), param(name + ".bias"), 1, pad, name);
    }
    V relu(V x, const std::string& label = "relu") { return graph_.relu(x, label); }
    V sigmoid(V x, const std::string& label = "sigmoid") { return graph_.sigmoid(x, label); }
    V add(V a, V b, const std::string& label = "add") { return graph_.add(a, b, label); }
    V mul(V a, V b, const std::string& label = "mul") { return graph_.mul(a, b, label); }
    V scale(V x, V s, const std::string& label = "scale") { return graph_.scale(x, s, label); }
    V concat(V a, V b, const std::string& label = "concat") { return graph_.concat(a, b, label); }
    V soft_threshold(V x, V t, const std::string& label = "soft_threshold") {
        return graph_.soft_threshold(x, t, label);
    }
    V pixel_shuffle(V x, std::size_t r, const std::string& label = "pixel_shuffle") {
        return graph_.pixel_shuffle(x, r, label);
    }
    V offset(V x, T c, const std::string& label = "offset") {
        return graph_.add(x, graph_.constant(BasicTensor<T>::full(graph_.value(x).shape(), c), label + ".const"), label);
    }

    Graph<T>& graph() { return graph_; }

private:
    Graph<T>& graph_;
    ParamStore<T>& params_;
};

/// Network pieces, written once for both EagerOps and GraphOps. `prefix`
/// is the parameter-name prefix of the block, e.g. "blocks.3.".
namespace blocks {

template <class Ops>
struct Lifted {
    typename Ops::V features;  ///< LR image lifted to feature space
    typename Ops::V dty;       ///< learned D^T applied to the lifted input, shared by all blocks
};

template <class Ops>
Lifted<Ops> lift(Ops& o, const typename Ops::V& lr) {
    auto features = o.conv(lr, "head");
    auto dty = o.conv(o.relu(o.conv(features, "dty.0"), "dty.relu"), "dty.1");
    return {std::move(features), std::move(dty)};
}

/// 1x1, 3x3 and two stacked 3x3 (5x5 receptive field) branches concatenated to 3C.
template <class Ops>
typename Ops::V multi_scale(Ops& o, const std::string& prefix, const typename Ops::V& x) {
    auto b1 = o.conv(x, prefix + "branch1");
    auto b3 = o.conv(x, prefix + "branch3");
    auto b5 = o.conv(o.relu(o.conv(x, prefix + "branch5.0"), prefix + "branch5.relu"), prefix + "branch5.1");
    return o.concat(o.concat(b1, b3, prefix + "concat13"), b5, prefix + "concat135");
}

template <class Ops>
typename Ops::V mse_block(Ops& o, const std::string& prefix, const typename Ops::V& x) {
    const std::string p = prefix + "mse.";
    return o.conv(o.relu(multi_scale(o, p, x), p + "relu"), p + "fuse");
}

/// Attention map in (0,1): multi-scale -> conv -> relu -> conv -> relu -> sigmoid.
template <class Ops>
typename Ops::V msa_attention(Ops& o, const std::string& prefix, const typename Ops::V& x) {
    const std::string p = prefix + "msa.";
    auto h = o.relu(o.conv(multi_scale(o, p, x), p + "fuse"), p + "fuse.relu");
    h = o.relu(o.conv(h, p + "gate"), p + "gate.relu");
    return o.sigmoid(h, p + "sigmoid");
}

template <class Ops>
typename Ops::V msa_block(Ops& o, const std::string& prefix, const typename Ops::V& x) {
    return o.mul(x, msa_attention(o, prefix, x), prefix + "msa.apply");
}

/// Per-element threshold map theta_max * sigmoid(1x1(relu(1x1(x)))).
template <class Ops>
typename Ops::V st_threshold(Ops& o, const std::string& prefix, const typename Ops::V& x) {
    const std::string p = prefix + "st.";
    auto h = o.conv(o.relu(o.conv(x, p + "reduce"), p + "relu"), p + "expand");
    return o.scale(o.sigmoid(h, p + "sigmoid"), o.param(p + "theta_max"), p + "theta");
}

template <class Ops>
typename Ops::V st_block(Ops& o, const std::string& prefix, const typename Ops::V& x) {
    return o.soft_threshold(x, st_threshold(o, prefix, x), prefix + "st.shrink");
}

/// conv -> relu -> conv.
template <class Ops>
typename Ops::V padding(Ops& o, const std::string& prefix, const typename Ops::V& x) {
    return o.conv(o.relu(o.conv(x, prefix + "pad.0"), prefix + "pad.relu"), prefix + "pad.1");
}

/**
 * One unfolded iteration. MSE followed by MSA plays the role of
 * (E - a D^T D) x, a 1x1 conv over [that, D^T y] adds the data term, the ST
 * block shrinks, and a padding structure is added back as a skip.
 */
template <class Ops>
typename Ops::V ista_block(Ops& o, const std::string& prefix, const typename Ops::V& prev,
                           const typename Ops::V& dty) {
    auto u = msa_block(o, prefix, mse_block(o, prefix, prev));
    auto v = o.conv(o.concat(u, dty, prefix + "concat_dty"), prefix + "combine");
    auto w = st_block(o, prefix, v);
    return o.add(w, padding(o, prefix, w), prefix + "skip");
}

inline std::string block_prefix(std::size_t k) { return "blocks." + std::to_string(k) + "."; }

/// Pixel values are centered on this before the head and restored after upscaling.
inline constexpr double kPixelMean = 0.5;

template <class Ops>
typename Ops::V forward(Ops& o, const ModelConfig& cfg, const typename Ops::V& lr) {
    auto lifted = lift(o, o.offset(lr, -kPixelMean, "center"));
    auto x = lifted.features;
    for (std::size_t k = 0; k < cfg.iterations; ++k) x = ista_block(o, block_prefix(k), x, lifted.dty);
    auto sr_features = o.add(lifted.features, padding(o, "tail.", x), "tail.skip");
    return o.offset(o.pixel_shuffle(o.conv(sr_features, "upscale"), cfg.scale, "upscale.shuffle"), kPixelMean, "uncenter");
}

} // namespace blocks

/// ISTAR: parameters plus topology. T is float for training, double for gradient checks.
template <typename T>
class IstarModel {
public:
    /// Fresh model initialized from `seed`.
    explicit IstarModel(const ModelConfig& config, std::uint64_t seed = 0);
    /// Adopts existing parameters; names and shapes must match the layout exactly.
    IstarModel(const ModelConfig& config, ParamStore<T> params);

    const ModelConfig& config() const noexcept { return config_; }
    ParamStore<T>& params() noexcept { return params_; }
    const ParamStore<T>& params() const noexcept { return params_; }

    /// Differentiable forward on a graph. Input is [B, colors, H, W].
    Var forward(Graph<T>& graph, Var input);
    /// Gradient-free forward, output [B, colors, rH, rW], not clipped.
    BasicTensor<T> infer(const BasicTensor<T>& input) const;

    std::size_t count_params() const { return params_.scalar_count(); }
    /// Sum over convolutions of Cout * Cin * kh * kw * H * W for an H x W LR input.
    std::uint64_t estimate_macs(std::size_t height, std::size_t width) const;

    /// Keeps learned threshold scales non-negative; call after each optimizer step.
    void project_constraints();

    template <typename U>
    IstarModel<U> cast() const {
        return IstarModel<U>(config_, params_.template cast<U>());
    }

private:
    ModelConfig config_;
    ParamStore<T> params_;
};

/// Checks that `params` holds exactly the tensors of `config`'s layout.
template <typename T>
void validate_params(const ModelConfig& config, const ParamStore<T>& params);

std::uint64_t estimate_macs(const ModelConfig& config, std::size_t height, std::size_t width);

/**
 * Finite-difference check of the whole network in double precision on a
 * random size x size input with an l1 loss against a random target. Biases
 * are randomized and theta_max set to 0.1 so every branch carries gradient.
 */
struct GradCheckResult;
GradCheckResult model_grad_check(const ModelConfig& config, std::size_t size, std::uint64_t seed, double eps = 1e-4);
std::size_t count_params(const ModelConfig& config);

extern template class IstarModel<float>;
extern template class IstarModel<double>;

} // namespace istar
