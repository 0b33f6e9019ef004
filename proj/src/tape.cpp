#include "svaclr/tape.hpp"

#include <algorithm>
#include <cmath>

#include "svaclr/kernels.hpp"

namespace svaclr {

namespace {

std::size_t product(const std::vector<std::size_t>& s, std::size_t lo,
                    std::size_t hi) {
  std::size_t p = 1;
  for (std::size_t i = lo; i < hi; ++i) p *= s[i];
  return p;
}

// Lanes along `axis`: fn(base, stride, count) enumerates every 1-D slice.
// axis == kAllAxes treats the whole tensor as a single lane.
template <class F>
void for_each_lane(const std::vector<std::size_t>& shape, int axis, F&& fn) {
  const std::size_t numel = Tensor::numel_of(shape);
  if (axis == kAllAxes) {
    fn(std::size_t{0}, std::size_t{1}, numel);
    return;
  }
  const std::size_t a = static_cast<std::size_t>(axis);
  const std::size_t count = shape[a];
  const std::size_t inner = product(shape, a + 1, shape.size());
  const std::size_t outer = product(shape, 0, a);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in)
      fn(o * count * inner + in, inner, count);
}

void check_axis(OpKind kind, const Tensor& t, int axis) {
  if (axis == kAllAxes) return;
  if (axis < 0 || static_cast<std::size_t>(axis) >= t.rank())
    throw ShapeError(std::string(op_name(kind)) + ": axis " +
                     std::to_string(axis) + " out of range for shape " +
                     shape_str(t));
}

[[noreturn]] void shape_fail(OpKind kind, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op_name(kind)) + ": incompatible shapes " +
                   shape_str(a) + " and " + shape_str(b));
}

bool row_broadcast(const Tensor& a, const Tensor& b) {
  return a.rank() == 2 && b.rank() == 1 && b.shape[0] == a.shape[1];
}

void accumulate(Tensor& into, const Tensor& g) {
  if (into.empty()) {
    into = g;
    return;
  }
  kernels::binary(kernels::Binary::add, into.data.data(), g.data.data(),
                  into.data.data(), into.numel());
}

std::vector<std::size_t> reduced_shape(const std::vector<std::size_t>& shape,
                                       int axis) {
  if (axis == kAllAxes || shape.size() == 1) return {1};
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < shape.size(); ++i)
    if (i != static_cast<std::size_t>(axis)) out.push_back(shape[i]);
  return out;
}

}  // namespace

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::scale: return "scale";
    case OpKind::relu: return "relu";
    case OpKind::exp: return "exp";
    case OpKind::log: return "log";
    case OpKind::softmax: return "softmax";
    case OpKind::l2_normalize: return "l2_normalize";
    case OpKind::sum: return "sum";
    case OpKind::mean: return "mean";
    case OpKind::transpose: return "transpose";
    case OpKind::concat: return "concat";
    case OpKind::slice: return "slice";
  }
  return "?";
}

Tape::NodeId Tape::leaf(Tensor value) {
  if (value.empty()) throw ShapeError("leaf: tensor must have rank >= 1");
  nodes_.push_back(Node{OpKind::leaf, OpAttrs{}, 0, 0, std::move(value)});
  return static_cast<NodeId>(nodes_.size() - 1);
}

Tape::NodeId Tape::apply(OpKind kind, std::span<const NodeId> inputs,
                         OpAttrs attrs) {
  if (kind == OpKind::leaf) throw ShapeError("apply: use leaf()");
  for (NodeId id : inputs)
    if (id >= nodes_.size())
      throw ShapeError(std::string(op_name(kind)) + ": unknown input node");
  Tensor value = forward(kind, inputs, attrs);
  Node node;
  node.kind = kind;
  node.attrs = attrs;
  node.input_begin = static_cast<std::uint32_t>(inputs_.size());
  node.input_count = static_cast<std::uint32_t>(inputs.size());
  node.value = std::move(value);
  inputs_.insert(inputs_.end(), inputs.begin(), inputs.end());
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size() - 1);
}

Tensor Tape::forward(OpKind kind, std::span<const NodeId> inputs,
                     const OpAttrs& attrs) const {
  auto arity = [&](std::size_t n) {
    if (inputs.size() != n)
      throw ShapeError(std::string(op_name(kind)) + ": expected " +
                       std::to_string(n) + " inputs, got " +
                       std::to_string(inputs.size()));
  };
  switch (kind) {
    case OpKind::leaf:
      break;

    case OpKind::matmul: {
      arity(2);
      const Tensor& a = value(inputs[0]);
      const Tensor& b = value(inputs[1]);
      if (a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[0])
        shape_fail(kind, a, b);
      Tensor out = Tensor::zeros({a.shape[0], b.shape[1]});
      kernels::matmul(a.data.data(), b.data.data(), out.data.data(),
                      a.shape[0], a.shape[1], b.shape[1]);
      return out;
    }

    case OpKind::add:
    case OpKind::sub: {
      arity(2);
      const Tensor& a = value(inputs[0]);
      const Tensor& b = value(inputs[1]);
      const auto op =
          kind == OpKind::add ? kernels::Binary::add : kernels::Binary::sub;
      if (a.same_shape(b)) {
        Tensor out = Tensor::zeros(a.shape);
        kernels::binary(op, a.data.data(), b.data.data(), out.data.data(),
                        a.numel());
        return out;
      }
      if (row_broadcast(a, b)) {
        Tensor out = Tensor::zeros(a.shape);
        const std::size_t rows = a.shape[0], cols = a.shape[1];
        for (std::size_t r = 0; r < rows; ++r)
          kernels::serial::binary(op, a.data.data() + r * cols, b.data.data(),
                                  out.data.data() + r * cols, cols);
        return out;
      }
      shape_fail(kind, a, b);
    }

    case OpKind::mul: {
      arity(2);
      const Tensor& a = value(inputs[0]);
      const Tensor& b = value(inputs[1]);
      if (!a.same_shape(b)) shape_fail(kind, a, b);
      Tensor out = Tensor::zeros(a.shape);
      kernels::binary(kernels::Binary::mul, a.data.data(), b.data.data(),
                      out.data.data(), a.numel());
      return out;
    }

    case OpKind::scale: {
      arity(1);
      const Tensor& a = value(inputs[0]);
      Tensor out = Tensor::zeros(a.shape);
      kernels::scale(a.data.data(), attrs.scalar, out.data.data(), a.numel());
      return out;
    }

    case OpKind::relu:
    case OpKind::exp: {
      arity(1);
      const Tensor& a = value(inputs[0]);
      Tensor out = Tensor::zeros(a.shape);
      kernels::unary(
          kind == OpKind::relu ? kernels::Unary::relu : kernels::Unary::exp,
          a.data.data(), out.data.data(), a.numel());
      return out;
    }

    case OpKind::log: {
      arity(1);
      const Tensor& a = value(inputs[0]);
      for (double v : a.data)
        if (!(v > 0.0))
          throw DomainError("log: input must be strictly positive, got " +
                            std::to_string(v));
      Tensor out = Tensor::zeros(a.shape);
      kernels::unary(kernels::Unary::log, a.data.data(), out.data.data(),
                     a.numel());
      return out;
    }

    case OpKind::softmax: {
      arity(1);
      const Tensor& a = value(inputs[0]);
      check_axis(kind, a, attrs.axis);
      Tensor out = Tensor::zeros(a.shape);
      for_each_lane(a.shape, attrs.axis,
                    [&](std::size_t base, std::size_t stride, std::size_t n) {
                      double m = a.data[base];
                      for (std::size_t j = 1; j < n; ++j)
                        m = std::max(m, a.data[base + j * stride]);
                      double total = 0.0;
                      for (std::size_t j = 0; j < n; ++j) {
                        const double e = std::exp(a.data[base + j * stride] - m);
                        out.data[base + j * stride] = e;
                        total += e;
                      }
                      for (std::size_t j = 0; j < n; ++j)
                        out.data[base + j * stride] /= total;
                    });
      return out;
    }

    case OpKind::l2_normalize: {
      arity(1);
      const Tensor& a = value(inputs[0]);
      check_axis(kind, a, attrs.axis);
      Tensor out = Tensor::zeros(a.shape);
      for_each_lane(a.shape, attrs.axis,
                    [&](std::size_t base, std::size_t stride, std::size_t n) {
                      double sq = 0.0;
                      for (std::size_t j = 0; j < n; ++j) {
                        const double v = a.data[base + j * stride];
                        sq += v * v;
                      }
                      const double norm = std::sqrt(sq);
                      if (norm < 1e-150)
                        throw DomainError(
                            "l2_normalize: cannot normalize zero vector");
                      for (std::size_t j = 0; j < n; ++j)
                        out.data[base + j * stride] =
                            a.data[base + j * stride] / norm;
                    });
      return out;
    }

    case OpKind::sum:
    case OpKind::mean: {
      arity(1);
      const Tensor& a = value(inputs[0]);
      check_axis(kind, a, attrs.axis);
      Tensor out = Tensor::zeros(reduced_shape(a.shape, attrs.axis));
      std::size_t lane = 0;
      std::size_t lane_count = 0;
      for_each_lane(a.shape, attrs.axis,
                    [&](std::size_t base, std::size_t stride, std::size_t n) {
                      double acc = 0.0;
                      for (std::size_t j = 0; j < n; ++j)
                        acc += a.data[base + j * stride];
                      out.data[lane++] = acc;
                      lane_count = n;
                    });
      if (kind == OpKind::mean && lane_count > 0)
        for (double& v : out.data) v /= static_cast<double>(lane_count);
      return out;
    }

    case OpKind::transpose: {
      arity(1);
      const Tensor& a = value(inputs[0]);
      if (a.rank() != 2)
        throw ShapeError("transpose: expected rank-2, got " + shape_str(a));
      Tensor out = Tensor::zeros({a.shape[1], a.shape[0]});
      for (std::size_t r = 0; r < a.shape[0]; ++r)
        for (std::size_t c = 0; c < a.shape[1]; ++c)
          out.at2(c, r) = a.at2(r, c);
      return out;
    }

    case OpKind::concat: {
      if (inputs.empty()) throw ShapeError("concat: needs at least one input");
      const Tensor& first = value(inputs[0]);
      check_axis(kind, first, attrs.axis);
      const std::size_t a =
          attrs.axis == kAllAxes ? 0 : static_cast<std::size_t>(attrs.axis);
      std::size_t total = 0;
      for (NodeId id : inputs) {
        const Tensor& t = value(id);
        if (t.rank() != first.rank()) shape_fail(kind, first, t);
        for (std::size_t d = 0; d < t.rank(); ++d)
          if (d != a && t.shape[d] != first.shape[d]) shape_fail(kind, first, t);
        total += t.shape[a];
      }
      std::vector<std::size_t> oshape = first.shape;
      oshape[a] = total;
      Tensor out = Tensor::zeros(oshape);
      const std::size_t inner = product(first.shape, a + 1, first.rank());
      const std::size_t outer = product(first.shape, 0, a);
      std::size_t col = 0;
      for (NodeId id : inputs) {
        const Tensor& t = value(id);
        const std::size_t block = t.shape[a] * inner;
        for (std::size_t o = 0; o < outer; ++o)
          std::copy_n(t.data.data() + o * block, block,
                      out.data.data() + o * total * inner + col * inner);
        col += t.shape[a];
      }
      return out;
    }

    case OpKind::slice: {
      arity(1);
      const Tensor& t = value(inputs[0]);
      check_axis(kind, t, attrs.axis);
      const std::size_t a =
          attrs.axis == kAllAxes ? 0 : static_cast<std::size_t>(attrs.axis);
      if (attrs.extent == 0 || attrs.start + attrs.extent > t.shape[a])
        throw ShapeError("slice: range [" + std::to_string(attrs.start) + "," +
                         std::to_string(attrs.start + attrs.extent) +
                         ") out of bounds for shape " + shape_str(t));
      std::vector<std::size_t> oshape = t.shape;
      oshape[a] = attrs.extent;
      Tensor out = Tensor::zeros(oshape);
      const std::size_t inner = product(t.shape, a + 1, t.rank());
      const std::size_t outer = product(t.shape, 0, a);
      const std::size_t in_block = t.shape[a] * inner;
      const std::size_t out_block = attrs.extent * inner;
      for (std::size_t o = 0; o < outer; ++o)
        std::copy_n(t.data.data() + o * in_block + attrs.start * inner,
                    out_block, out.data.data() + o * out_block);
      return out;
    }
  }
  throw ShapeError("apply: unsupported op");
}

std::vector<Tensor> Tape::backward(NodeId root) const {
  if (root >= nodes_.size()) throw ShapeError("backward: unknown root node");
  if (nodes_[root].value.numel() != 1)
    throw ShapeError("backward: root must be scalar, got shape " +
                     shape_str(nodes_[root].value));

  std::vector<char> reachable(nodes_.size(), 0);
  reachable[root] = 1;
  for (NodeId id = root + 1; id-- > 0;) {
    if (!reachable[id]) continue;
    for (NodeId in : inputs_of(nodes_[id])) reachable[in] = 1;
  }

  std::vector<Tensor> grads(nodes_.size());
  grads[root] = Tensor::full(nodes_[root].value.shape, 1.0);

  for (NodeId id = root + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (!reachable[id] || n.kind == OpKind::leaf || grads[id].empty()) continue;
    const Tensor& g = grads[id];
    const auto in = inputs_of(n);

    switch (n.kind) {
      case OpKind::leaf:
        break;

      case OpKind::matmul: {
        const Tensor& a = value(in[0]);
        const Tensor& b = value(in[1]);
        Tensor da = Tensor::zeros(a.shape);
        kernels::matmul_nt(g.data.data(), b.data.data(), da.data.data(),
                           a.shape[0], b.shape[1], a.shape[1]);
        accumulate(grads[in[0]], da);
        Tensor db = Tensor::zeros(b.shape);
        kernels::matmul_tn(a.data.data(), g.data.data(), db.data.data(),
                           a.shape[1], a.shape[0], b.shape[1]);
        accumulate(grads[in[1]], db);
        break;
      }

      case OpKind::add:
      case OpKind::sub: {
        const Tensor& a = value(in[0]);
        const Tensor& b = value(in[1]);
        const double sign = n.kind == OpKind::add ? 1.0 : -1.0;
        accumulate(grads[in[0]], g);
        if (a.same_shape(b)) {
          Tensor db = Tensor::zeros(b.shape);
          kernels::scale(g.data.data(), sign, db.data.data(), g.numel());
          accumulate(grads[in[1]], db);
        } else {  // row broadcast: reduce over rows
          Tensor db = Tensor::zeros(b.shape);
          const std::size_t rows = a.shape[0], cols = a.shape[1];
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c)
              db.data[c] += sign * g.data[r * cols + c];
          accumulate(grads[in[1]], db);
        }
        break;
      }

      case OpKind::mul: {
        const Tensor& a = value(in[0]);
        const Tensor& b = value(in[1]);
        Tensor da = Tensor::zeros(a.shape);
        kernels::binary(kernels::Binary::mul, g.data.data(), b.data.data(),
                        da.data.data(), g.numel());
        accumulate(grads[in[0]], da);
        Tensor db = Tensor::zeros(b.shape);
        kernels::binary(kernels::Binary::mul, g.data.data(), a.data.data(),
                        db.data.data(), g.numel());
        accumulate(grads[in[1]], db);
        break;
      }

      case OpKind::scale: {
        Tensor da = Tensor::zeros(g.shape);
        kernels::scale(g.data.data(), n.attrs.scalar, da.data.data(),
                       g.numel());
        accumulate(grads[in[0]], da);
        break;
      }

      case OpKind::relu: {
        const Tensor& x = value(in[0]);
        Tensor da = Tensor::zeros(x.shape);
        for (std::size_t i = 0; i < x.numel(); ++i)
          da.data[i] = x.data[i] > 0.0 ? g.data[i] : 0.0;
        accumulate(grads[in[0]], da);
        break;
      }

      case OpKind::exp: {
        Tensor da = Tensor::zeros(g.shape);
        kernels::binary(kernels::Binary::mul, g.data.data(),
                        n.value.data.data(), da.data.data(), g.numel());
        accumulate(grads[in[0]], da);
        break;
      }

      case OpKind::log: {
        const Tensor& x = value(in[0]);
        Tensor da = Tensor::zeros(x.shape);
        for (std::size_t i = 0; i < x.numel(); ++i)
          da.data[i] = g.data[i] / x.data[i];
        accumulate(grads[in[0]], da);
        break;
      }

      case OpKind::softmax: {
        const Tensor& y = n.value;
        Tensor da = Tensor::zeros(y.shape);
        for_each_lane(y.shape, n.attrs.axis,
                      [&](std::size_t base, std::size_t stride, std::size_t k) {
                        double dot = 0.0;
                        for (std::size_t j = 0; j < k; ++j)
                          dot += g.data[base + j * stride] *
                                 y.data[base + j * stride];
                        for (std::size_t j = 0; j < k; ++j) {
                          const std::size_t idx = base + j * stride;
                          da.data[idx] = y.data[idx] * (g.data[idx] - dot);
                        }
                      });
        accumulate(grads[in[0]], da);
        break;
      }

      case OpKind::l2_normalize: {
        const Tensor& x = value(in[0]);
        const Tensor& y = n.value;
        Tensor da = Tensor::zeros(x.shape);
        for_each_lane(x.shape, n.attrs.axis,
                      [&](std::size_t base, std::size_t stride, std::size_t k) {
                        double sq = 0.0, ydotg = 0.0;
                        for (std::size_t j = 0; j < k; ++j) {
                          const std::size_t idx = base + j * stride;
                          sq += x.data[idx] * x.data[idx];
                          ydotg += y.data[idx] * g.data[idx];
                        }
                        const double norm = std::sqrt(sq);
                        for (std::size_t j = 0; j < k; ++j) {
                          const std::size_t idx = base + j * stride;
                          da.data[idx] =
                              (g.data[idx] - y.data[idx] * ydotg) / norm;
                        }
                      });
        accumulate(grads[in[0]], da);
        break;
      }

      case OpKind::sum:
      case OpKind::mean: {
        const Tensor& x = value(in[0]);
        Tensor da = Tensor::zeros(x.shape);
        std::size_t lane = 0;
        for_each_lane(x.shape, n.attrs.axis,
                      [&](std::size_t base, std::size_t stride, std::size_t k) {
                        double gv = g.data[lane++];
                        if (n.kind == OpKind::mean)
                          gv /= static_cast<double>(k);
                        for (std::size_t j = 0; j < k; ++j)
                          da.data[base + j * stride] += gv;
                      });
        accumulate(grads[in[0]], da);
        break;
      }

      case OpKind::transpose: {
        const Tensor& x = value(in[0]);
        Tensor da = Tensor::zeros(x.shape);
        for (std::size_t r = 0; r < g.shape[0]; ++r)
          for (std::size_t c = 0; c < g.shape[1]; ++c)
            da.at2(c, r) = g.at2(r, c);
        accumulate(grads[in[0]], da);
        break;
      }

      case OpKind::concat: {
        const std::size_t a = n.attrs.axis == kAllAxes
                                  ? 0
                                  : static_cast<std::size_t>(n.attrs.axis);
        const std::size_t inner = product(g.shape, a + 1, g.rank());
        const std::size_t outer = product(g.shape, 0, a);
        const std::size_t total = g.shape[a];
        std::size_t col = 0;
        for (NodeId input : in) {
          const Tensor& t = value(input);
          Tensor da = Tensor::zeros(t.shape);
          const std::size_t block = t.shape[a] * inner;
          for (std::size_t o = 0; o < outer; ++o)
            std::copy_n(g.data.data() + o * total * inner + col * inner, block,
                        da.data.data() + o * block);
          accumulate(grads[input], da);
          col += t.shape[a];
        }
        break;
      }

      case OpKind::slice: {
        const Tensor& x = value(in[0]);
        const std::size_t a = n.attrs.axis == kAllAxes
                                  ? 0
                                  : static_cast<std::size_t>(n.attrs.axis);
        Tensor da = Tensor::zeros(x.shape);
        const std::size_t inner = product(x.shape, a + 1, x.rank());
        const std::size_t outer = product(x.shape, 0, a);
        const std::size_t in_block = x.shape[a] * inner;
        const std::size_t out_block = n.attrs.extent * inner;
        for (std::size_t o = 0; o < outer; ++o)
          std::copy_n(g.data.data() + o * out_block, out_block,
                      da.data.data() + o * in_block + n.attrs.start * inner);
        accumulate(grads[in[0]], da);
        break;
      }
    }
  }
  return grads;
}

namespace {

double eval_scalar(const MultiGraphFn& f, std::span<const Tensor> xs) {
  Tape tape;
  std::vector<Tape::NodeId> ids;
  ids.reserve(xs.size());
  for (const Tensor& x : xs) ids.push_back(tape.leaf(x));
  const Tape::NodeId root = f(tape, ids);
  const double v = tape.value(root).data[0];
  if (!std::isfinite(v)) throw NumericError("grad_check: f(x) is not finite");
  return v;
}

}  // namespace

double grad_check_multi(const MultiGraphFn& f, std::span<const Tensor> xs,
                        double eps) {
  if (!(eps > 0.0)) throw DomainError("grad_check: eps must be > 0");

  Tape tape;
  std::vector<Tape::NodeId> ids;
  ids.reserve(xs.size());
  for (const Tensor& x : xs) ids.push_back(tape.leaf(x));
  const Tape::NodeId root = f(tape, ids);
  if (tape.value(root).numel() != 1)
    throw ShapeError("grad_check: f must be scalar-valued");
  if (!std::isfinite(tape.value(root).data[0]))
    throw NumericError("grad_check: f(x) is not finite");
  const auto grads = tape.backward(root);

  std::vector<Tensor> work(xs.begin(), xs.end());
  double max_err = 0.0;
  for (std::size_t t = 0; t < work.size(); ++t) {
    const Tensor analytic = grads[ids[t]].empty()
                                ? Tensor::zeros(work[t].shape)
                                : grads[ids[t]];
    for (std::size_t i = 0; i < work[t].numel(); ++i) {
      const double saved = work[t].data[i];
      work[t].data[i] = saved + eps;
      const double fp = eval_scalar(f, work);
      work[t].data[i] = saved - eps;
      const double fm = eval_scalar(f, work);
      work[t].data[i] = saved;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double err = std::abs(analytic.data[i] - numeric) /
                         std::max(1.0, std::abs(numeric));
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

double grad_check(const ScalarGraphFn& f, const Tensor& x, double eps) {
  const Tensor xs[] = {x};
  return grad_check_multi(
      [&](Tape& tape, std::span<const Tape::NodeId> ids) {
        return f(tape, ids[0]);
      },
      xs, eps);
}

}  // namespace svaclr
