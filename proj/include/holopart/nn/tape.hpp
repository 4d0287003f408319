#pragma once

#include "holopart/common.hpp"

#include <deque>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace holopart::nn {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
struct Param {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;  // same shape as value once touched by backward
};

/// Named parameter tensors in declaration order. Addresses stay valid as entries are added.
template <typename T>
class ParamSet {
 public:
  Param<T>& add(const std::string& name, Matrix<T> value);
  Param<T>& operator[](const std::string& name);
  const Param<T>& operator[](const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::deque<Param<T>>& all() { return params_; }
  const std::deque<Param<T>>& all() const { return params_; }
  std::size_t scalar_count() const;
  void zero_grad();

 private:
  std::deque<Param<T>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

template <typename Dst, typename Src>
ParamSet<Dst> cast_params(const ParamSet<Src>& src) {
  ParamSet<Dst> out;
  for (const auto& p : src.all()) out.add(p.name, p.value.template cast<Dst>());
  return out;
}

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode tape. Every op evaluates eagerly; when recording, it also pushes a closure
/// that propagates the output gradient to its inputs. Parameter gradients accumulate into
/// Param::grad so several graphs can contribute to one optimizer step.
///
/// Row-grouped ops (`attention`, `modulate`, `gated_add`, `add_rows_grouped`) treat the rows
/// of their main operand as `groups` equal consecutive blocks, one per batch item.
template <typename T>
class Tape {
 public:
  using M = Matrix<T>;

  explicit Tape(bool record = true) : record_(record) {}

  Var constant(M value);
  Var param(Param<T>& p);
  const M& value(Var v) const;
  /// Gradient of the last backward pass w.r.t. a non-parameter node (zero-sized if untouched).
  const M& grad(Var v) const { return nodes_[v.id].grad; }
  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = 1 for a 1x1 node and runs the tape backwards.
  void backward(Var loss);

  Var matmul(Var a, Var b);
  /// x * w + b with `b` a 1 x out row (optional).
  Var linear(Var x, Var w, Var b = {});
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, T factor);
  /// a + row, row broadcast over every row of `a`.
  Var add_row(Var a, Var row);
  /// Row-wise normalization; gamma/beta are optional 1 x d rows.
  Var layer_norm(Var x, Var gamma = {}, Var beta = {}, T eps = T(1e-5));
  Var gelu(Var x);
  Var silu(Var x);
  /// Multi-head scaled dot-product attention. q: (groups*n) x d, k and v: (groups*m) x d.
  Var attention(Var q, Var k, Var v, int heads, int groups = 1);
  /// x * (1 + scale) + shift with shift/scale of shape groups x d.
  Var modulate(Var x, Var shift, Var scale, int groups = 1);
  /// x + gate * y with gate of shape groups x d.
  Var gated_add(Var x, Var gate, Var y, int groups = 1);
  Var slice_cols(Var x, int start, int count);
  Var concat_rows(Var a, Var b);
  Var concat_rows(std::span<const Var> parts);
  Var slice_rows(Var x, int start, int count);
  /// Stacks `times` copies of x vertically.
  Var tile_rows(Var x, int times);
  /// Repeats each row of `rows` (groups x d) over its block of `a`: a + expand(rows).
  Var add_rows_grouped(Var a, Var rows, int groups);
  /// mean + exp(logvar / 2) * noise.
  Var reparameterize(Var mean, Var logvar, const M& noise);

  /// Scalar losses (1x1 outputs).
  Var mse(Var pred, const M& target);
  Var bce_with_logits(Var logits, const M& targets);
  /// Mean over elements of the Gaussian KL to N(0, 1).
  Var kl_standard_normal(Var mean, Var logvar);
  Var weighted_sum(Var a, T wa, Var b, T wb);

 private:
  struct Node {
    M value;
    M grad;
    Param<T>* param = nullptr;
    bool needs_grad = false;
  };

  Var push(M value, bool needs_grad);
  bool needs(Var v) const { return v.valid() && nodes_[v.id].needs_grad; }
  M& grad_ref(Var v);
  void record(std::function<void()> fn) { backward_.push_back(std::move(fn)); }

  bool record_;
  std::vector<Node> nodes_;
  std::vector<std::function<void()>> backward_;
};

extern template class ParamSet<float>;
extern template class ParamSet<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace holopart::nn
