#ifndef MWEFORGE_AUTODIFF_HPP
#define MWEFORGE_AUTODIFF_HPP

// Reverse-mode differentiation over dense row-major matrices.
//
// A BasicTape records every operation in append order. Handles (Var) are cheap
// values pointing back into their tape, so graphs are built with free functions:
//
//   Tape tape;
//   auto w = tape.leaf(W);
//   auto loss = sum(matmul(x, w));
//   tape.backward(loss);
//   tape.grad(w);
//
// Backward visits nodes in exact reverse append order and accumulates (+=) into
// gradient buffers, so a leaf used twice receives the sum of both contributions.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mweforge::ad {

template <typename Scalar>
using Tensor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

template <typename Derived>
std::string shape_of(const Eigen::MatrixBase<Derived>& m) {
  return "[" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + "]";
}

template <typename Scalar>
class BasicTape;

template <typename Scalar>
struct Var {
  BasicTape<Scalar>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<Scalar>& value() const { return tape->value(*this); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

template <typename Scalar>
class BasicTape {
 public:
  using Matrix = Tensor<Scalar>;
  using InputValues = std::vector<const Matrix*>;
  /// Maps (upstream gradient, input values, output value) to one gradient per input.
  using BackwardFn = std::function<std::vector<Matrix>(const Matrix& upstream, const InputValues& inputs, const Matrix& output)>;

  BasicTape() = default;
  BasicTape(const BasicTape&) = delete;
  BasicTape& operator=(const BasicTape&) = delete;

  /// Trainable input; receives a gradient on backward.
  Var<Scalar> leaf(Matrix value) { return push(std::move(value), {}, nullptr, true, "leaf"); }

  /// Input that never needs a gradient.
  Var<Scalar> constant(Matrix value) { return push(std::move(value), {}, nullptr, false, "constant"); }

  /// Records `value` as the output of `inputs`; `backward` is used verbatim in the reverse pass.
  Var<Scalar> record(std::vector<Var<Scalar>> inputs, Matrix value, BackwardFn backward, std::string name = "custom") {
    bool needs = false;
    std::vector<std::size_t> ids;
    ids.reserve(inputs.size());
    for (const auto& v : inputs) {
      check_owned(v);
      ids.push_back(v.id);
      needs = needs || nodes_[v.id].requires_grad;
    }
    return push(std::move(value), std::move(ids), std::move(backward), needs, std::move(name));
  }

  const Matrix& value(Var<Scalar> v) const {
    check_owned(v);
    return nodes_[v.id].value;
  }

  /// Gradient buffer of `v`; all zeros when backward never reached it.
  const Matrix& grad(Var<Scalar> v) const {
    check_owned(v);
    if (!backward_done_) throw TapeError("gradient requested before backward");
    return nodes_[v.id].grad;
  }

  std::size_t size() const { return nodes_.size(); }
  bool backward_done() const { return backward_done_; }

  void backward(Var<Scalar> loss) {
    check_owned(loss);
    if (backward_done_) throw TapeError("backward called twice without reset");
    const Matrix& out = nodes_[loss.id].value;
    if (out.rows() != 1 || out.cols() != 1) throw ShapeError("backward needs a scalar loss, got " + shape_of(out));
    for (auto& node : nodes_) node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
    nodes_[loss.id].grad(0, 0) = Scalar(1);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& node = nodes_[i];
      if (!node.backward || !node.requires_grad) continue;
      InputValues inputs;
      inputs.reserve(node.inputs.size());
      for (std::size_t in : node.inputs) inputs.push_back(&nodes_[in].value);
      std::vector<Matrix> grads = node.backward(node.grad, inputs, node.value);
      if (grads.size() != node.inputs.size())
        throw ShapeError(node.name + ": backward returned " + std::to_string(grads.size()) + " gradients for " +
                         std::to_string(node.inputs.size()) + " inputs");
      for (std::size_t k = 0; k < grads.size(); ++k) {
        Node& target = nodes_[node.inputs[k]];
        if (grads[k].rows() != target.value.rows() || grads[k].cols() != target.value.cols())
          throw ShapeError(node.name + ": backward gradient " + shape_of(grads[k]) + " does not match input " +
                           shape_of(target.value));
        if (target.requires_grad) target.grad += grads[k];
      }
    }
    backward_done_ = true;
  }

  /// Clears gradients so backward may run again on the same graph.
  void reset() {
    for (auto& node : nodes_) node.grad.resize(0, 0);
    backward_done_ = false;
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    std::string name;
  };

  Var<Scalar> push(Matrix value, std::vector<std::size_t> inputs, BackwardFn backward, bool requires_grad, std::string name) {
    if (backward_done_) throw TapeError("cannot record after backward; call reset first");
    nodes_.push_back({std::move(value), Matrix(), std::move(inputs), std::move(backward), requires_grad, std::move(name)});
    return {this, nodes_.size() - 1};
  }

  void check_owned(Var<Scalar> v) const {
    if (v.tape != this || v.id >= nodes_.size()) throw TapeError("variable does not belong to this tape");
  }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

using Tape = BasicTape<double>;
using Variable = Var<double>;
using Matrix = Tensor<double>;

// ---------------------------------------------------------------------------
// Built-in operations.

template <typename Scalar>
Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.cols() != bv.rows()) throw ShapeError("matmul: " + shape_of(av) + " x " + shape_of(bv));
  Tensor<Scalar> out = av * bv;
  return a.tape->record({a, b}, std::move(out),
                        [](const auto& g, const auto& in, const auto&) {
                          return std::vector<Tensor<Scalar>>{g * in[1]->transpose(), in[0]->transpose() * g};
                        },
                        "matmul");
}

template <typename Scalar>
Var<Scalar> transpose(Var<Scalar> a) {
  Tensor<Scalar> out = a.value().transpose();
  return a.tape->record({a}, std::move(out),
                        [](const auto& g, const auto&, const auto&) { return std::vector<Tensor<Scalar>>{g.transpose()}; },
                        "transpose");
}

template <typename Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("add: " + shape_of(a.value()) + " + " + shape_of(b.value()));
  Tensor<Scalar> out = a.value() + b.value();
  return a.tape->record({a, b}, std::move(out),
                        [](const auto& g, const auto&, const auto&) { return std::vector<Tensor<Scalar>>{g, g}; }, "add");
}

/// Hadamard product.
template <typename Scalar>
Var<Scalar> mul(Var<Scalar> a, Var<Scalar> b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("mul: " + shape_of(a.value()) + " * " + shape_of(b.value()));
  Tensor<Scalar> out = a.value().cwiseProduct(b.value());
  return a.tape->record({a, b}, std::move(out),
                        [](const auto& g, const auto& in, const auto&) {
                          return std::vector<Tensor<Scalar>>{g.cwiseProduct(*in[1]), g.cwiseProduct(*in[0])};
                        },
                        "mul");
}

template <typename Scalar>
Var<Scalar> scale(Var<Scalar> a, Scalar factor) {
  Tensor<Scalar> out = a.value() * factor;
  return a.tape->record({a}, std::move(out),
                        [factor](const auto& g, const auto&, const auto&) { return std::vector<Tensor<Scalar>>{g * factor}; },
                        "scale");
}

/// Adds the 1 x d row `bias` to every row of `x`.
template <typename Scalar>
Var<Scalar> add_row(Var<Scalar> x, Var<Scalar> bias) {
  if (bias.rows() != 1 || bias.cols() != x.cols())
    throw ShapeError("add_row: " + shape_of(x.value()) + " + row " + shape_of(bias.value()));
  Tensor<Scalar> out = x.value().rowwise() + bias.value().row(0);
  return x.tape->record({x, bias}, std::move(out),
                        [](const auto& g, const auto&, const auto&) {
                          return std::vector<Tensor<Scalar>>{g, g.colwise().sum()};
                        },
                        "add_row");
}

template <typename Scalar>
Scalar logistic(Scalar x, Scalar k = Scalar(1)) {
  const Scalar z = k * x;
  if (z >= 0) return Scalar(1) / (Scalar(1) + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

/// 1 / (1 + exp(-k x)) elementwise.
template <typename Scalar>
Var<Scalar> sigmoid(Var<Scalar> a, Scalar k = Scalar(1)) {
  Tensor<Scalar> out = a.value().unaryExpr([k](Scalar x) { return logistic(x, k); });
  return a.tape->record({a}, std::move(out),
                        [k](const auto& g, const auto&, const auto& y) {
                          Tensor<Scalar> d = y.unaryExpr([k](Scalar s) { return k * s * (Scalar(1) - s); });
                          return std::vector<Tensor<Scalar>>{g.cwiseProduct(d)};
                        },
                        "sigmoid");
}

template <typename Scalar>
Var<Scalar> sum(Var<Scalar> a) {
  Tensor<Scalar> out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape->record({a}, std::move(out),
                        [](const auto& g, const auto& in, const auto&) {
                          return std::vector<Tensor<Scalar>>{Tensor<Scalar>::Constant(in[0]->rows(), in[0]->cols(), g(0, 0))};
                        },
                        "sum");
}

template <typename Scalar>
Var<Scalar> operator+(Var<Scalar> a, Var<Scalar> b) { return add(a, b); }

/// Copy of a square matrix with its main diagonal zeroed; the diagonal receives no gradient.
template <typename Scalar>
Var<Scalar> zero_diag(Var<Scalar> m) {
  if (m.rows() != m.cols()) throw ShapeError("zero_diag: non-square " + shape_of(m.value()));
  Tensor<Scalar> out = m.value();
  out.diagonal().setZero();
  return m.tape->record({m}, std::move(out),
                        [](const auto& g, const auto&, const auto&) {
                          Tensor<Scalar> d = g;
                          d.diagonal().setZero();
                          return std::vector<Tensor<Scalar>>{std::move(d)};
                        },
                        "zero_diag");
}

/// Rows of `table` selected by `ids`; backward scatter-adds.
template <typename Scalar>
Var<Scalar> gather_rows(Var<Scalar> table, std::vector<std::size_t> ids) {
  const auto& t = table.value();
  Tensor<Scalar> out(static_cast<Eigen::Index>(ids.size()), t.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= static_cast<std::size_t>(t.rows()))
      throw std::out_of_range("gather_rows: id " + std::to_string(ids[i]) + " outside table of " + std::to_string(t.rows()));
    out.row(static_cast<Eigen::Index>(i)) = t.row(static_cast<Eigen::Index>(ids[i]));
  }
  return table.tape->record({table}, std::move(out),
                            [ids = std::move(ids)](const auto& g, const auto& in, const auto&) {
                              Tensor<Scalar> d = Tensor<Scalar>::Zero(in[0]->rows(), in[0]->cols());
                              for (std::size_t i = 0; i < ids.size(); ++i)
                                d.row(static_cast<Eigen::Index>(ids[i])) += g.row(static_cast<Eigen::Index>(i));
                              return std::vector<Tensor<Scalar>>{std::move(d)};
                            },
                            "gather_rows");
}

/// Row i of the result is row i + offset of `x` when both lie in the same segment,
/// otherwise zero. `segments` lists consecutive segment lengths summing to x.rows().
template <typename Scalar>
Var<Scalar> shift_rows(Var<Scalar> x, int offset, std::vector<std::size_t> segments) {
  const auto& xv = x.value();
  std::vector<Eigen::Index> source(static_cast<std::size_t>(xv.rows()), -1);
  std::size_t start = 0;
  for (std::size_t len : segments) {
    for (std::size_t i = 0; i < len; ++i) {
      const long j = static_cast<long>(i) + offset;
      if (j >= 0 && j < static_cast<long>(len)) source[start + i] = static_cast<Eigen::Index>(start + static_cast<std::size_t>(j));
    }
    start += len;
  }
  if (start != static_cast<std::size_t>(xv.rows())) throw ShapeError("shift_rows: segments do not cover " + shape_of(xv));
  Tensor<Scalar> out = Tensor<Scalar>::Zero(xv.rows(), xv.cols());
  for (std::size_t i = 0; i < source.size(); ++i)
    if (source[i] >= 0) out.row(static_cast<Eigen::Index>(i)) = xv.row(source[i]);
  return x.tape->record({x}, std::move(out),
                        [source = std::move(source)](const auto& g, const auto& in, const auto&) {
                          Tensor<Scalar> d = Tensor<Scalar>::Zero(in[0]->rows(), in[0]->cols());
                          for (std::size_t i = 0; i < source.size(); ++i)
                            if (source[i] >= 0) d.row(source[i]) += g.row(static_cast<Eigen::Index>(i));
                          return std::vector<Tensor<Scalar>>{std::move(d)};
                        },
                        "shift_rows");
}

enum class PoolMode { first, mean };

/// One row per segment: its first row, or the mean of its rows.
template <typename Scalar>
Var<Scalar> segment_pool(Var<Scalar> x, std::vector<std::size_t> segments, PoolMode mode) {
  const auto& xv = x.value();
  Tensor<Scalar> out(static_cast<Eigen::Index>(segments.size()), xv.cols());
  std::size_t start = 0;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    if (segments[s] == 0) throw ShapeError("segment_pool: empty segment");
    const auto begin = static_cast<Eigen::Index>(start);
    const auto len = static_cast<Eigen::Index>(segments[s]);
    if (mode == PoolMode::first) out.row(static_cast<Eigen::Index>(s)) = xv.row(begin);
    else out.row(static_cast<Eigen::Index>(s)) = xv.middleRows(begin, len).colwise().sum() / Scalar(len);
    start += segments[s];
  }
  if (start != static_cast<std::size_t>(xv.rows())) throw ShapeError("segment_pool: segments do not cover " + shape_of(xv));
  return x.tape->record({x}, std::move(out),
                        [segments = std::move(segments), mode](const auto& g, const auto& in, const auto&) {
                          Tensor<Scalar> d = Tensor<Scalar>::Zero(in[0]->rows(), in[0]->cols());
                          std::size_t start = 0;
                          for (std::size_t s = 0; s < segments.size(); ++s) {
                            const auto begin = static_cast<Eigen::Index>(start);
                            const auto len = static_cast<Eigen::Index>(segments[s]);
                            if (mode == PoolMode::first) d.row(begin) += g.row(static_cast<Eigen::Index>(s));
                            else d.middleRows(begin, len).rowwise() += g.row(static_cast<Eigen::Index>(s)) / Scalar(len);
                            start += segments[s];
                          }
                          return std::vector<Tensor<Scalar>>{std::move(d)};
                        },
                        "segment_pool");
}

/// Row-wise softmax with numerically stable shifting.
template <typename Derived>
Tensor<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Tensor<Scalar> p = logits;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    const Scalar m = p.row(r).maxCoeff();
    p.row(r) = (p.row(r).array() - m).exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

template <typename Scalar>
struct CrossEntropy {
  Var<Scalar> loss;
  Tensor<Scalar> probabilities;
};

/// Mean negative log-probability of the gold classes. Backward is (p - onehot) / n.
template <typename Scalar>
CrossEntropy<Scalar> softmax_cross_entropy(Var<Scalar> logits, const std::vector<std::size_t>& gold) {
  const auto& z = logits.value();
  if (gold.size() != static_cast<std::size_t>(z.rows()) || gold.empty())
    throw ShapeError("softmax_cross_entropy: " + std::to_string(gold.size()) + " gold labels for " + shape_of(z));
  for (std::size_t i = 0; i < gold.size(); ++i)
    if (gold[i] >= static_cast<std::size_t>(z.cols()))
      throw std::out_of_range("softmax_cross_entropy: gold class " + std::to_string(gold[i]) + " >= " + std::to_string(z.cols()));

  Tensor<Scalar> p = softmax_rows(z);
  const Scalar n = Scalar(gold.size());
  Scalar total = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    Eigen::Index arg = 0;
    const Scalar m = z.row(r).maxCoeff(&arg);
    // log1p keeps precision when one logit dominates
    Scalar rest = 0;
    for (Eigen::Index c = 0; c < z.cols(); ++c)
      if (c != arg) rest += std::exp(z(r, c) - m);
    const Scalar log_norm = m + std::log1p(rest);
    total += log_norm - z(r, static_cast<Eigen::Index>(gold[i]));
  }
  Tensor<Scalar> out(1, 1);
  out(0, 0) = total / n;
  Var<Scalar> loss = logits.tape->record({logits}, std::move(out),
                                         [p, gold, n](const auto& g, const auto&, const auto&) {
                                           Tensor<Scalar> d = p;
                                           for (std::size_t i = 0; i < gold.size(); ++i)
                                             d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(gold[i])) -= Scalar(1);
                                           d *= g(0, 0) / n;
                                           return std::vector<Tensor<Scalar>>{std::move(d)};
                                         },
                                         "softmax_cross_entropy");
  return {loss, std::move(p)};
}

// ---------------------------------------------------------------------------
// Finite-difference verification.

template <typename Scalar>
struct GradCheckResult {
  Scalar max_relative_error = 0;
  std::size_t worst_param = 0;
  Eigen::Index worst_index = 0;
  Scalar analytic = 0;
  Scalar numeric = 0;
};

/// Builds a scalar loss from leaves on the given tape.
template <typename Scalar>
using LossBuilder = std::function<Var<Scalar>(BasicTape<Scalar>&, const std::vector<Var<Scalar>>&)>;

/// |a - b| / max(1e-8, |a| + |b|).
template <typename Scalar>
Scalar relative_error(Scalar a, Scalar b) {
  return std::abs(a - b) / std::max(Scalar(1e-8), std::abs(a) + std::abs(b));
}

/// Loss value and, when requested, tape gradients of every leaf.
template <typename Scalar>
Scalar evaluate_loss(const LossBuilder<Scalar>& f, const std::vector<Tensor<Scalar>>& values, std::vector<Tensor<Scalar>>* grads) {
  BasicTape<Scalar> tape;
  std::vector<Var<Scalar>> leaves;
  for (const auto& v : values) leaves.push_back(tape.leaf(v));
  Var<Scalar> loss = f(tape, leaves);
  const Scalar value = loss.value()(0, 0);
  if (!std::isfinite(value)) throw std::domain_error("grad_check: loss is not finite");
  if (grads) {
    tape.backward(loss);
    for (const auto& leaf : leaves) grads->push_back(tape.grad(leaf));
  }
  return value;
}

/// Central differences (f(x + eps e_i) - f(x - eps e_i)) / (2 eps) for every coordinate.
template <typename Scalar>
std::vector<Tensor<Scalar>> numeric_gradient(const LossBuilder<Scalar>& f, const std::vector<Tensor<Scalar>>& params, Scalar eps) {
  if (!(eps > 0)) throw std::invalid_argument("grad_check: eps must be positive");
  std::vector<Tensor<Scalar>> out;
  std::vector<Tensor<Scalar>> probe = params;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor<Scalar> g(params[p].rows(), params[p].cols());
    for (Eigen::Index i = 0; i < params[p].size(); ++i) {
      const Scalar original = params[p](i);
      probe[p](i) = original + eps;
      const Scalar up = evaluate_loss<Scalar>(f, probe, nullptr);
      probe[p](i) = original - eps;
      const Scalar down = evaluate_loss<Scalar>(f, probe, nullptr);
      probe[p](i) = original;
      g(i) = (up - down) / (Scalar(2) * eps);
    }
    out.push_back(std::move(g));
  }
  return out;
}

/// Largest coordinate-wise relative error between two gradient lists.
template <typename Scalar>
GradCheckResult<Scalar> compare_gradients(const std::vector<Tensor<Scalar>>& analytic, const std::vector<Tensor<Scalar>>& numeric) {
  if (analytic.size() != numeric.size()) throw ShapeError("compare_gradients: list sizes differ");
  GradCheckResult<Scalar> result;
  bool first = true;
  for (std::size_t p = 0; p < analytic.size(); ++p) {
    if (analytic[p].rows() != numeric[p].rows() || analytic[p].cols() != numeric[p].cols())
      throw ShapeError("compare_gradients: " + shape_of(analytic[p]) + " vs " + shape_of(numeric[p]));
    for (Eigen::Index i = 0; i < analytic[p].size(); ++i) {
      const Scalar err = relative_error(analytic[p](i), numeric[p](i));
      if (first || err > result.max_relative_error) result = {err, p, i, analytic[p](i), numeric[p](i)};
      first = false;
    }
  }
  return result;
}

/// Compares tape gradients against central differences, coordinate by coordinate.
template <typename Scalar>
GradCheckResult<Scalar> grad_check(const LossBuilder<Scalar>& f, const std::vector<Tensor<Scalar>>& params, Scalar eps) {
  if (!(eps > 0)) throw std::invalid_argument("grad_check: eps must be positive");
  std::vector<Tensor<Scalar>> analytic;
  evaluate_loss(f, params, &analytic);
  return compare_gradients(analytic, numeric_gradient(f, params, eps));
}

/// Single-parameter convenience form.
template <typename Scalar>
GradCheckResult<Scalar> grad_check(const std::function<Var<Scalar>(BasicTape<Scalar>&, Var<Scalar>)>& f,
                                   const Tensor<Scalar>& param, Scalar eps) {
  LossBuilder<Scalar> wrapped = [&f](BasicTape<Scalar>& tape, const std::vector<Var<Scalar>>& leaves) {
    return f(tape, leaves.front());
  };
  return grad_check<Scalar>(wrapped, std::vector<Tensor<Scalar>>{param}, eps);
}

}  // namespace mweforge::ad

#endif  // MWEFORGE_AUTODIFF_HPP
