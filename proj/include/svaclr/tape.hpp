#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "svaclr/tensor.hpp"

namespace svaclr {

// Recorded operations. `leaf` marks inputs/parameters; everything else is a
// compute node carrying the vector-Jacobian rule used by backward().
enum class OpKind : std::uint8_t {
  leaf,
  matmul,        // (m,k) x (k,n) -> (m,n)
  add,           // same shape, or (m,n) + (n) row broadcast
  sub,           // same shape, or (m,n) - (n) row broadcast
  mul,           // elementwise, same shape
  scale,         // x * attrs.scalar
  relu,
  exp,
  log,           // domain: strictly positive input
  softmax,       // along attrs.axis, or flattened when axis == kAllAxes
  l2_normalize,  // along attrs.axis, or flattened when axis == kAllAxes
  sum,           // reduce attrs.axis, or all axes -> shape (1)
  mean,
  transpose,     // rank-2
  concat,        // k inputs along attrs.axis
  slice,         // [attrs.start, attrs.start + attrs.extent) along attrs.axis
};

inline constexpr int kAllAxes = -1;

struct OpAttrs {
  int axis = kAllAxes;
  double scalar = 0.0;
  std::size_t start = 0;
  std::size_t extent = 0;
};

const char* op_name(OpKind kind);

// Eager tape: apply() computes the value immediately and records the node.
// Nodes are appended in execution order, so inputs always precede their
// consumers and backward() can walk the node list once in reverse. A tape
// must not be shared between threads; the tensors it stores may be read
// concurrently.
class Tape {
 public:
  using NodeId = std::uint32_t;

  NodeId leaf(Tensor value);
  NodeId constant(double v) { return leaf(Tensor::scalar(v)); }

  NodeId apply(OpKind kind, std::span<const NodeId> inputs, OpAttrs attrs = {});
  NodeId apply(OpKind kind, std::initializer_list<NodeId> inputs,
               OpAttrs attrs = {}) {
    return apply(kind, std::span<const NodeId>(inputs.begin(), inputs.size()),
                 attrs);
  }

  // valid for the life of the tape (node storage never relocates)
  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  std::size_t size() const { return nodes_.size(); }

  // d(root)/d(node) for every node that influences the scalar root, indexed
  // by node id (untouched entries stay empty). Fan-out accumulates by
  // summation; each node is visited exactly once, in reverse order.
  std::vector<Tensor> backward(NodeId root) const;

 private:
  struct Node {
    OpKind kind;
    OpAttrs attrs;
    std::uint32_t input_begin = 0;
    std::uint32_t input_count = 0;
    Tensor value;
  };

  std::span<const NodeId> inputs_of(const Node& n) const {
    return {inputs_.data() + n.input_begin, n.input_count};
  }

  Tensor forward(OpKind kind, std::span<const NodeId> inputs,
                 const OpAttrs& attrs) const;

  std::deque<Node> nodes_;
  std::vector<NodeId> inputs_;
};

// Max over coordinates of |g_analytic - g_numeric| / max(1, |g_numeric|),
// with g_numeric from central differences. `build` must construct the same
// scalar function on any fresh tape given the leaf for x.
using ScalarGraphFn = std::function<Tape::NodeId(Tape&, Tape::NodeId)>;
double grad_check(const ScalarGraphFn& f, const Tensor& x, double eps = 1e-6);

// Same check for functions of several tensors; the error is the max over all
// coordinates of all inputs.
using MultiGraphFn =
    std::function<Tape::NodeId(Tape&, std::span<const Tape::NodeId>)>;
double grad_check_multi(const MultiGraphFn& f, std::span<const Tensor> xs,
                        double eps = 1e-6);

}  // namespace svaclr
