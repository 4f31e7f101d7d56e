#include "istar/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "istar/ops.hpp"

namespace istar {

const char* op_name(OpKind kind) noexcept {
    switch (kind) {
        case OpKind::Constant: return "constant";
        case OpKind::Variable: return "variable";
        case OpKind::Param: return "param";
        case OpKind::Conv2d: return "conv2d";
        case OpKind::Relu: return "relu";
        case OpKind::Sigmoid: return "sigmoid";
        case OpKind::PixelShuffle: return "pixel_shuffle";
        case OpKind::Add: return "add";
        case OpKind::Sub: return "sub";
        case OpKind::Mul: return "mul";
        case OpKind::Scale: return "scale";
        case OpKind::Concat: return "concat";
        case OpKind::SoftThreshold: return "soft_threshold";
        case OpKind::Sum: return "sum";
        case OpKind::L1Loss: return "l1_loss";
    }
    return "?";
}

template <typename T>
const typename Graph<T>::Node& Graph<T>::node(Var v) const {
    if (v.id >= nodes_.size()) throw InputError("Var does not belong to this graph");
    return nodes_[v.id];
}

template <typename T>
Var Graph<T>::push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename T>
typename Graph<T>::Node Graph<T>::make(OpKind kind, std::string label, std::initializer_list<Var> parents) {
    Node n{};
    n.kind = kind;
    n.label = std::move(label);
    std::uint32_t slots[3] = {0, 0, 0};
    std::size_t i = 0;
    for (Var p : parents) {
        node(p);
        slots[i++] = p.id;
        n.requires_grad = n.requires_grad || nodes_[p.id].requires_grad;
    }
    n.a = slots[0];
    n.b = slots[1];
    n.c = slots[2];
    return n;
}

template <typename T>
template <typename F>
Var Graph<T>::checked(Node n, F&& compute) {
    try {
        n.value = compute();
    } catch (const NumericError& e) {
        throw NumericError("forward of '" + n.label + "' (" + op_name(n.kind) + "): " + e.what());
    }
    return push(std::move(n));
}

template <typename T>
Var Graph<T>::constant(TensorT value, std::string label) {
    value.ensure_finite(label);
    Node n{};
    n.kind = OpKind::Constant;
    n.label = std::move(label);
    n.value = std::move(value);
    return push(std::move(n));
}

template <typename T>
Var Graph<T>::variable(TensorT value, std::string label) {
    value.ensure_finite(label);
    Node n{};
    n.kind = OpKind::Variable;
    n.label = std::move(label);
    n.value = std::move(value);
    n.requires_grad = true;
    return push(std::move(n));
}

template <typename T>
Var Graph<T>::param(ParamStore<T>& store, const std::string& name) {
    for (const auto& [pname, id] : param_leaves_)
        if (pname == name && nodes_[id].store == &store) return Var{id};
    Node n{};
    n.kind = OpKind::Param;
    n.label = name;
    n.value = store.value(name);
    n.value.ensure_finite("parameter '" + name + "'");
    n.requires_grad = true;
    n.store = &store;
    Var v = push(std::move(n));
    param_leaves_.emplace_back(name, v.id);
    return v;
}

template <typename T>
Var Graph<T>::conv2d(Var x, Var weight, Var bias, std::size_t stride, std::size_t pad, std::string label) {
    Node n = make(OpKind::Conv2d, std::move(label), {x, weight, bias});
    n.stride = stride;
    n.pad = pad;
    return checked(std::move(n), [&] {
        return ops::conv2d(value(x), value(weight), value(bias), stride, pad);
    });
}

template <typename T>
Var Graph<T>::relu(Var x, std::string label) {
    return checked(make(OpKind::Relu, std::move(label), {x}), [&] { return ops::relu(value(x)); });
}

template <typename T>
Var Graph<T>::sigmoid(Var x, std::string label) {
    return checked(make(OpKind::Sigmoid, std::move(label), {x}), [&] { return ops::sigmoid(value(x)); });
}

template <typename T>
Var Graph<T>::pixel_shuffle(Var x, std::size_t r, std::string label) {
    Node n = make(OpKind::PixelShuffle, std::move(label), {x});
    n.stride = r;
    return checked(std::move(n), [&] { return ops::pixel_shuffle(value(x), r); });
}

template <typename T>
Var Graph<T>::add(Var a, Var b, std::string label) {
    return checked(make(OpKind::Add, std::move(label), {a, b}), [&] { return ops::add(value(a), value(b)); });
}

template <typename T>
Var Graph<T>::sub(Var a, Var b, std::string label) {
    return checked(make(OpKind::Sub, std::move(label), {a, b}), [&] { return ops::sub(value(a), value(b)); });
}

template <typename T>
Var Graph<T>::mul(Var a, Var b, std::string label) {
    return checked(make(OpKind::Mul, std::move(label), {a, b}), [&] { return ops::mul(value(a), value(b)); });
}

template <typename T>
Var Graph<T>::scale(Var x, Var s, std::string label) {
    return checked(make(OpKind::Scale, std::move(label), {x, s}), [&] { return ops::scale(value(x), value(s)); });
}

template <typename T>
Var Graph<T>::concat(Var a, Var b, std::string label) {
    return checked(make(OpKind::Concat, std::move(label), {a, b}),
                   [&] { return ops::concat_channels(value(a), value(b)); });
}

template <typename T>
Var Graph<T>::soft_threshold(Var x, Var theta, std::string label) {
    return checked(make(OpKind::SoftThreshold, std::move(label), {x, theta}),
                   [&] { return ops::soft_threshold(value(x), value(theta)); });
}

template <typename T>
Var Graph<T>::sum(Var x, std::string label) {
    return checked(make(OpKind::Sum, std::move(label), {x}), [&] { return TensorT::scalar(ops::sum(value(x))); });
}

template <typename T>
Var Graph<T>::l1_loss(Var pred, Var target, std::string label) {
    return checked(make(OpKind::L1Loss, std::move(label), {pred, target}), [&] {
        const auto& p = value(pred);
        const auto& t = value(target);
        if (p.shape() != t.shape())
            throw ShapeError("l1_loss: shape mismatch " + shape_str(p.shape()) + " vs " + shape_str(t.shape()));
        double acc = 0;
        for (std::size_t i = 0; i < p.numel(); ++i) acc += std::abs(static_cast<double>(p[i]) - t[i]);
        return TensorT::scalar(static_cast<T>(acc / static_cast<double>(p.numel())));
    });
}

template <typename T>
typename Graph<T>::TensorT Graph<T>::grad(Var v) const {
    const Node& n = node(v);
    return n.has_grad ? n.grad : TensorT(n.value.shape());
}

template <typename T>
void Graph<T>::accumulate(std::uint32_t id, const TensorT& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (!n.has_grad) {
        n.grad = g;
        n.has_grad = true;
        return;
    }
    T* dst = n.grad.ptr();
    const T* src = g.ptr();
    for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += src[i];
}

template <typename T>
void Graph<T>::backward(Var loss) {
    const Node& root = node(loss);
    if (root.value.numel() != 1)
        throw ShapeError("backward: loss must be a single element, got " + shape_str(root.value.shape()));
    for (auto& n : nodes_) {
        n.has_grad = false;
        n.grad = TensorT();
    }
    accumulate(loss.id, TensorT::scalar(T(1)));

    for (std::uint32_t id = loss.id + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (!n.has_grad) continue;
        try {
            n.grad.ensure_finite("gradient");
        } catch (const NumericError& e) {
            throw NumericError("backward of '" + n.label + "' (" + op_name(n.kind) + "): " + e.what());
        }
        const TensorT& g = n.grad;
        switch (n.kind) {
            case OpKind::Constant:
            case OpKind::Variable:
            case OpKind::Param:
                break;
            case OpKind::Conv2d: {
                auto grads = ops::conv2d_backward(nodes_[n.a].value, nodes_[n.b].value, g, n.stride, n.pad,
                                                  nodes_[n.a].requires_grad);
                if (nodes_[n.a].requires_grad) accumulate(n.a, grads.input);
                accumulate(n.b, grads.weight);
                accumulate(n.c, grads.bias);
                break;
            }
            case OpKind::Relu:
                accumulate(n.a, ops::relu_backward(nodes_[n.a].value, g));
                break;
            case OpKind::Sigmoid:
                accumulate(n.a, ops::sigmoid_backward(n.value, g));
                break;
            case OpKind::PixelShuffle:
                accumulate(n.a, ops::pixel_unshuffle(g, n.stride));
                break;
            case OpKind::Add:
                accumulate(n.a, g);
                accumulate(n.b, g);
                break;
            case OpKind::Sub: {
                accumulate(n.a, g);
                TensorT neg(g.shape());
                for (std::size_t i = 0; i < g.numel(); ++i) neg[i] = -g[i];
                accumulate(n.b, neg);
                break;
            }
            case OpKind::Mul:
                accumulate(n.a, ops::mul(g, nodes_[n.b].value));
                accumulate(n.b, ops::mul(g, nodes_[n.a].value));
                break;
            case OpKind::Scale: {
                const auto& x = nodes_[n.a].value;
                accumulate(n.a, ops::scale(g, nodes_[n.b].value));
                double acc = 0;
                for (std::size_t i = 0; i < g.numel(); ++i) acc += static_cast<double>(g[i]) * x[i];
                accumulate(n.b, TensorT(nodes_[n.b].value.shape(), static_cast<T>(acc)));
                break;
            }
            case OpKind::Concat: {
                auto [ga, gb] = ops::split_channels(g, nodes_[n.a].value.dim(1));
                accumulate(n.a, ga);
                accumulate(n.b, gb);
                break;
            }
            case OpKind::SoftThreshold: {
                auto grads = ops::soft_threshold_backward(nodes_[n.a].value, nodes_[n.b].value, g);
                accumulate(n.a, grads.x);
                accumulate(n.b, grads.theta);
                break;
            }
            case OpKind::Sum:
                accumulate(n.a, TensorT(nodes_[n.a].value.shape(), g[0]));
                break;
            case OpKind::L1Loss: {
                const auto& p = nodes_[n.a].value;
                const auto& t = nodes_[n.b].value;
                const T w = g[0] / static_cast<T>(p.numel());
                TensorT gp(p.shape());
                for (std::size_t i = 0; i < p.numel(); ++i) {
                    const T d = p[i] - t[i];
                    gp[i] = d > T(0) ? w : (d < T(0) ? -w : T(0));
                }
                accumulate(n.a, gp);
                if (nodes_[n.b].requires_grad) {
                    for (std::size_t i = 0; i < gp.numel(); ++i) gp[i] = -gp[i];
                    accumulate(n.b, gp);
                }
                break;
            }
        }
    }

    for (const auto& [name, id] : param_leaves_) {
        const Node& n = nodes_[id];
        if (!n.has_grad) continue;
        auto& slot = n.store->grad(name);
        for (std::size_t i = 0; i < slot.numel(); ++i) slot[i] += n.grad[i];
    }
}

template <typename T>
std::uint64_t Graph<T>::regime_signature() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](std::uint64_t v) {
        h ^= v;
        h *= 1099511628211ULL;
    };
    for (const auto& n : nodes_) {
        switch (n.kind) {
            case OpKind::Relu:
                for (T v : nodes_[n.a].value.data()) mix(v > T(0));
                break;
            case OpKind::SoftThreshold: {
                const auto& x = nodes_[n.a].value;
                const auto& th = nodes_[n.b].value;
                const bool uniform = th.numel() == 1;
                for (std::size_t i = 0; i < x.numel(); ++i) {
                    const T t = th[uniform ? 0 : i];
                    mix(x[i] > t ? 2 : (x[i] < -t ? 0 : 1));
                }
                break;
            }
            case OpKind::L1Loss: {
                const auto& p = nodes_[n.a].value;
                const auto& t = nodes_[n.b].value;
                for (std::size_t i = 0; i < p.numel(); ++i) mix(p[i] > t[i] ? 2 : (p[i] < t[i] ? 0 : 1));
                break;
            }
            default:
                break;
        }
    }
    return h;
}

template class Graph<float>;
template class Graph<double>;

} // namespace istar
