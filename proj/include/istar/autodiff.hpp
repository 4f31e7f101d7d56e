#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "istar/param_store.hpp"
#include "istar/tensor.hpp"

namespace istar {

/// Handle to a node inside one Graph.
struct Var {
    std::uint32_t id = 0;
};

enum class OpKind : std::uint8_t {
    Constant,
    Variable,
    Param,
    Conv2d,
    Relu,
    Sigmoid,
    PixelShuffle,
    Add,
    Sub,
    Mul,
    Scale,
    Concat,
    SoftThreshold,
    Sum,
    L1Loss,
};

const char* op_name(OpKind kind) noexcept;

/**
 * Tape for reverse-mode differentiation. Nodes are appended in evaluation
 * order, so walking the tape backwards is a reverse topological order and
 * each node is visited once. A graph is single-use and single-threaded.
 *
 * Every forward op checks its output for NaN/Inf and rethrows NumericError
 * with the node label attached.
 */
template <typename T>
class Graph {
public:
    using TensorT = BasicTensor<T>;

    /// Input that never receives a gradient.
    Var constant(TensorT value, std::string label = "constant");
    /// Free leaf that receives a gradient (readable via grad()).
    Var variable(TensorT value, std::string label = "variable");
    /// Leaf bound to a ParamStore entry; backward() adds its gradient into the
    /// store's gradient slot. Repeated calls with one name share the leaf.
    Var param(ParamStore<T>& store, const std::string& name);

    Var conv2d(Var x, Var weight, Var bias, std::size_t stride, std::size_t pad, std::string label = "conv2d");
    Var relu(Var x, std::string label = "relu");
    Var sigmoid(Var x, std::string label = "sigmoid");
    Var pixel_shuffle(Var x, std::size_t r, std::string label = "pixel_shuffle");
    Var add(Var a, Var b, std::string label = "add");
    Var sub(Var a, Var b, std::string label = "sub");
    Var mul(Var a, Var b, std::string label = "mul");
    /// x times a single-element node.
    Var scale(Var x, Var s, std::string label = "scale");
    Var concat(Var a, Var b, std::string label = "concat");
    Var soft_threshold(Var x, Var theta, std::string label = "soft_threshold");
    Var sum(Var x, std::string label = "sum");
    /// Mean absolute difference; d|d|/dd is taken as 0 at d == 0.
    Var l1_loss(Var pred, Var target, std::string label = "l1_loss");

    const TensorT& value(Var v) const { return node(v).value; }
    /// Gradient slot; zeros if backward never reached the node.
    TensorT grad(Var v) const;
    const std::string& label(Var v) const { return node(v).label; }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Requires a single-element loss. Accumulates d loss / d node into every
    /// reachable node and then into bound ParamStore gradient slots.
    void backward(Var loss);

    /**
     * Hash of every branch decision taken by piecewise ops (relu side, soft
     * threshold zone, l1 sign). Two evaluations with equal signatures lie in
     * the same smooth piece of the function.
     */
    std::uint64_t regime_signature() const;

private:
    struct Node {
        OpKind kind;
        std::string label;
        TensorT value;
        TensorT grad;
        bool has_grad = false;
        bool requires_grad = false;
        std::uint32_t a = 0;
        std::uint32_t b = 0;
        std::uint32_t c = 0;
        std::size_t stride = 1;
        std::size_t pad = 0;
        ParamStore<T>* store = nullptr;
    };

    const Node& node(Var v) const;
    Var push(Node n);
    Node make(OpKind kind, std::string label, std::initializer_list<Var> parents);
    void accumulate(std::uint32_t id, const TensorT& g);
    template <typename F>
    Var checked(Node n, F&& compute);

    std::vector<Node> nodes_;
    std::vector<std::pair<std::string, std::uint32_t>> param_leaves_;
};

extern template class Graph<float>;
extern template class Graph<double>;

} // namespace istar
