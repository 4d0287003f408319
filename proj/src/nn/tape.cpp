#include "holopart/nn/tape.hpp"

#include <unsupported/Eigen/SpecialFunctions>

#include <cmath>
#include <numbers>

namespace holopart::nn {

template <typename T>
Param<T>& ParamSet<T>::add(const std::string& name, Matrix<T> value) {
  if (index_.count(name)) throw InputError("duplicate parameter " + name);
  index_[name] = params_.size();
  params_.push_back({name, std::move(value), {}});
  return params_.back();
}

template <typename T>
Param<T>& ParamSet<T>::operator[](const std::string& name) {
  const auto it = index_.find(name);
  if (it == index_.end()) throw InputError("unknown parameter " + name);
  return params_[it->second];
}

template <typename T>
const Param<T>& ParamSet<T>::operator[](const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw InputError("unknown parameter " + name);
  return params_[it->second];
}

template <typename T>
std::size_t ParamSet<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

template <typename T>
void ParamSet<T>::zero_grad() {
  for (auto& p : params_) p.grad.setZero(p.value.rows(), p.value.cols());
}

// ---------------------------------------------------------------------------------------------

template <typename T>
Var Tape<T>::push(M value, bool needs_grad) {
  nodes_.push_back({std::move(value), {}, nullptr, needs_grad && record_});
  return {static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
Var Tape<T>::constant(M value) {
  return push(std::move(value), false);
}

template <typename T>
Var Tape<T>::param(Param<T>& p) {
  nodes_.push_back({{}, {}, &p, record_});
  return {static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
const typename Tape<T>::M& Tape<T>::value(Var v) const {
  const Node& n = nodes_[v.id];
  return n.param ? n.param->value : n.value;
}

template <typename T>
typename Tape<T>::M& Tape<T>::grad_ref(Var v) {
  Node& n = nodes_[v.id];
  M& g = n.param ? n.param->grad : n.grad;
  const M& val = value(v);
  if (g.rows() != val.rows() || g.cols() != val.cols()) g.setZero(val.rows(), val.cols());
  return g;
}

template <typename T>
void Tape<T>::backward(Var loss) {
  if (!record_) throw Error("backward on a tape that did not record");
  if (value(loss).size() != 1) throw Error("backward needs a scalar loss");
  for (Node& n : nodes_)
    if (!n.param) n.grad.resize(0, 0);
  grad_ref(loss)(0, 0) += T(1);
  for (auto it = backward_.rbegin(); it != backward_.rend(); ++it) (*it)();
}

template <typename T>
Var Tape<T>::matmul(Var a, Var b) {
  const M& A = value(a);
  const M& B = value(b);
  if (A.cols() != B.rows()) throw InputError("matmul shape mismatch");
  const Var out = push(A * B, needs(a) || needs(b));
  if (nodes_[out.id].needs_grad) {
    record([this, a, b, out] {
      const M& g = nodes_[out.id].grad;
      if (g.size() == 0) return;
      if (needs(a)) grad_ref(a).noalias() += g * value(b).transpose();
      if (needs(b)) grad_ref(b).noalias() += value(a).transpose() * g;
    });
  }
  return out;
}

template <typename T>
Var Tape<T>::linear(Var x, Var w, Var b) {
  const M& X = value(x);
  const M& W = value(w);
  if (X.cols() != W.rows()) throw InputError("linear shape mismatch");
  M y(X.rows(), W.cols());
  y.noalias() = X * W;
  if (b.valid()) {
    const M& B = value(b);
    if (B.rows() != 1 || B.cols() != W.cols()) throw InputError("linear bias shape mismatch");
    y.rowwise() += B.row(0);
  }
  const Var out = push(std::move(y), needs(x) || needs(w) || needs(b));
  if (nodes_[out.id].needs_grad) {
    record([this, x, w, b, out] {
      const M& g = nodes_[out.id].grad;
      if (g.size() == 0) return;
      if (needs(x)) grad_ref(x).noalias() += g * value(w).transpose();
      if (needs(w)) grad_ref(w).noalias() += value(x).transpose() * g;
      if (needs(b)) grad_ref(b) += g.colwise().sum();
    });
  }
  return out;
}

template <typename T>
Var Tape<T>::add(Var a, Var b) {
  const M& A = value(a);
  const M& B = value(b);
  if (A.rows() != B.rows() || A.cols() != B.cols()) throw InputError("add shape mismatch");
  const Var out = push(A + B, needs(a) || needs(b));
  if (nodes_[out.id].needs_grad) {
    record([this, a, b, out] {
      const M& g = nodes_[out.id].grad;
      if (g.size() == 0) return;
      if (needs(a)) grad_ref(a) += g;
      if (needs(b)) grad_ref(b) += g;
    });
  }
  return out;
}

template <typename T>
Var Tape<T>::sub(Var a, Var b) {
  const M& A = value(a);
  const M& B = value(b);
  if (A.rows() != B.rows() || A.cols() != B.cols()) throw InputError("sub shape mismatch");
  const Var out = push(A - B, needs(a) || needs(b));
  if (nodes_[out.id].needs_grad) {
    record([this, a, b, out] {
      const M& g = nodes_[out.id].grad;
      if (g.size() == 0) return;
      if (needs(a)) grad_ref(a) += g;
      if (needs(b)) grad_ref(b) -= g;
    });
  }
  return out;
}

template <typename T>
Var Tape<T>::mul(Var a, Var b) {
  const M& A = value(a);
  const M& B = value(b);
  if (A.rows() != B.rows() || A.cols() != B.cols()) throw InputError("mul shape mismatch");
  const Var out = push(A.cwiseProduct(B), needs(a) || needs(b));
  if (nodes_[out.id].needs_grad) {
    record([this, a, b, out] {
      const M& g = nodes_[out.id].grad;
      if (g.size() == 0) return;
      if (needs(a)) grad_ref(a) += g.cwiseProduct(value(b));
      if (needs(b)) grad_ref(b) += g.cwiseProduct(value(a));
    });
  }
  return out;
}

template <typename T>
Var Tape<T>::scale(Var a, T factor) {
  const Var out = push(value(a) * factor, needs(a));
  if (nodes_[out.id].needs_grad) {
    record([this, a, factor, out] {
      const M& g = nodes_[out.id].grad;
      if (g.size() == 0) return;
      grad_ref(a) += g * factor;
    });
  }
  return out;
}

template <typename T>
Var Tape<T>::add_row(Var a, Var row) {
  const M& A = value(a);
  const M& R = value(row);
  if (R.rows() != 1 || R.cols() != A.cols()) throw InputError("add_row shape mismatch");
  M y = A;
  y.rowwise() += R.row(0);
  const Var out = push(std::move(y), needs(a) || needs(row));
  if (nodes_[out.id].needs_grad) {
    record([this, a, row, out] {
      const M& g = nodes_[out.id].grad;
      if (g.size() == 0) return;
      if (needs(a)) grad_ref(a) += g;
      if (needs(row)) grad_ref(row) += g.colwise().sum();
    });
  }
  return out;
}

template <typename T>
Var Tape<T>::layer_norm(Var x, Var gamma, Var beta, T eps) {
  const M& X = value(x);
  const Eigen::Index n = X.rows(), d = X.cols();
  M xhat(n, d);
  Eigen::Matrix<T, Eigen::Dynamic, 1> inv_std(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const T mean = X.row(r).mean();
    const auto centered = (X.row(r).array() - mean).matrix();
    const T var = centered.squaredNorm() / static_cast<T>(d);
    inv_std(r) = T(1) / std::sqrt(var + eps);
    xhat.row(r) = centered * inv_std(r);
  }
  M y = xhat;
  if (gamma.valid()) y = y.array().rowwise() * value(gamma).row(0).array();
  if (beta.valid()) y.rowwise() += value(beta).row(0);
  const Var out = push(std::move(y), needs(x) || needs(gamma) || needs(beta));
  if (nodes_[out.id].needs_grad) {
    record([this, x, gamma, beta, out, xhat = std::move(xhat), inv_std = std::move(inv_std)] {
      const M& g = nodes_[out.id].grad;
      if (g.size() == 0) return;
      if (needs(gamma)) grad_ref(gamma) += g.cwiseProduct(xhat).colwise().sum();
      if (needs(beta)) grad_ref(beta) += g.colwise().sum();
      if (needs(x)) {
        M dxhat = g;
        if (gamma.valid()) dxhat = dxhat.array().rowwise() * value(gamma).row(0).array();
        M& gx = grad_ref(x);
        const T d = static_cast<T>(xhat.cols());
        for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
          const T mean_d = dxhat.row(r).sum() / d;
          const T mean_dx = dxhat.row(r).dot(xhat.row(r)) / d;
          gx.row(r).array() += inv_std(r) * (dxhat.row(r).array() - mean_d - xhat.row(r).array() * mean_dx);
        }
      }
    });
  }
  return out;
}

template <typename T>
Var Tape<T>::gelu(Var x) {
  const M& X = value(x);
  const T inv_sqrt2 = T(1) / std::sqrt(T(2));
  M y = (T(0.5) * X.array() * (T(1) + (X.array() * inv_sqrt2).erf())).matrix();
  const Var out = push(std::move(y), needs(x));
  if (nodes_[out.id].needs_grad) {
    record([this, x, out, inv_sqrt2] {
      const M& g = nodes_[out.id].grad;
      if (g.size() == 0) return;
      const T inv_sqrt2pi = T(1) / std::sqrt(T(2) * std::numbers::pi_v<T>);
      const auto v = value(x).array();
      grad_ref(x).array() +=
          g.array() * (T(0.5) * (T(1) + (v * inv_sqrt2).erf()) + v * inv_sqrt2pi * (T(-0.5) * v.square()).exp());
    });
  }
  return out;
}

template <typename T>
Var Tape<T>::silu(Var x) {
  const M& X = value(x);
  M y = (X.array() / (T(1) + (-X.array()).exp())).matrix();
  const Var out = push(std::move(y), needs(x));
  if (nodes_[out.id].needs_grad) {
    record([this, x, out] {
      const M& g = nodes_[out.id].grad;
      if (g.size() == 0) return;
      const auto v = value(x).array();
      const Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> s = (T(1) + (-v).exp()).inverse();
      grad_ref(x).array() += g.array() * s * (T(1) + v * (T(1) - s));
    });
  }
  return out;
}

template <typename T>
Var Tape<T>::attention(Var q, Var k, Var v, int heads, int groups) {
  const M& Q = value(q);
  const M& K = value(k);
  const M& V = value(v);
  const Eigen::Index d = Q.cols();
  if (K.cols() != d || V.cols() != d || K.rows() != V.rows()) throw InputError("attention shape mismatch");
  if (heads < 1 || d % heads != 0) throw InputError("attention width not divisible by heads");
  if (groups < 1 || Q.rows() % groups != 0 || K.rows() % groups != 0)
    throw InputError("attention rows not divisible by groups");
  const Eigen::Index n = Q.rows() / groups, m = K.rows() / groups, dh = d / heads;
  const T inv_scale = T(1) / std::sqrt(static_cast<T>(dh));
  const bool grad = needs(q) || needs(k) || needs(v);

  M out(Q.rows(), d);
  std::vector<M> probs;
  if (grad && record_) probs.reserve(static_cast<std::size_t>(groups * heads));
  M scores(n, m);
  for (int gi = 0; gi < groups; ++gi) {
    for (int h = 0; h < heads; ++h) {
      const auto Qh = Q.block(gi * n, h * dh, n, dh);
      const auto Kh = K.block(gi * m, h * dh, m, dh);
      const auto Vh = V.block(gi * m, h * dh, m, dh);
      scores.noalias() = Qh * Kh.transpose();
      scores *= inv_scale;
      for (Eigen::Index r = 0; r < n; ++r) {
        const T mx = scores.row(r).maxCoeff();
        scores.row(r) = (scores.row(r).array() - mx).exp().matrix();
        scores.row(r) /= scores.row(r).sum();
      }
      out.block(gi * n, h * dh, n, dh).noalias() = scores * Vh;
      if (grad && record_) probs.push_back(scores);
    }
  }
  const Var res = push(std::move(out), grad);
  if (nodes_[res.id].needs_grad) {
    record([this, q, k, v, res, heads, groups, n, m, dh, inv_scale, probs = std::move(probs)] {
      const M& g = nodes_[res.id].grad;
      if (g.size() == 0) return;
      const M& Q = value(q);
      const M& K = value(k);
      const M& V = value(v);
      M* gq = needs(q) ? &grad_ref(q) : nullptr;
      M* gk = needs(k) ? &grad_ref(k) : nullptr;
      M* gv = needs(v) ? &grad_ref(v) : nullptr;
      M dP(n, m), dS(n, m);
      for (int gi = 0; gi < groups; ++gi) {
        for (int h = 0; h < heads; ++h) {
          const M& P = probs[static_cast<std::size_t>(gi * heads + h)];
          const auto G = g.block(gi * n, h * dh, n, dh);
          if (gv) gv->block(gi * m, h * dh, m, dh).noalias() += P.transpose() * G;
          if (!gq && !gk) continue;
          dP.noalias() = G * V.block(gi * m, h * dh, m, dh).transpose();
          for (Eigen::Index r = 0; r < n; ++r) {
            const T dot = dP.row(r).dot(P.row(r));
            dS.row(r) = P.row(r).cwiseProduct((dP.row(r).array() - dot).matrix()) * inv_scale;
          }
          if (gq) gq->block(gi * n, h * dh, n, dh).noalias() += dS * K.block(gi * m, h * dh, m, dh);
          if (gk) gk->block(gi * m, h * dh, m, dh).noalias() += dS.transpose() * Q.block(gi * n, h * dh, n, dh);
        }
      }
    });
  }
  return res;
}

template <typename T>
Var Tape<T>::modulate(Var x, Var shift, Var scale, int groups) {
  const M& X = value(x);
  const M& Sh = value(shift);
  const M& Sc = value(scale);
  if (Sh.rows() != groups || Sc.rows() != groups || Sh.cols() != X.cols() || Sc.cols() != X.cols() ||
      X.rows() % groups != 0)
    throw InputError("modulate shape mismatch");
  const Eigen::Index n = X.rows() / groups;
  M y(X.rows(), X.cols());
  for (int gi = 0; gi < groups; ++gi) {
    auto blk = y.middleRows(gi * n, n);
    blk = X.middleRows(gi * n, n).array().rowwise() * (Sc.row(gi).array() + T(1));
    blk.rowwise() += Sh.row(gi);
  }
  const Var out = push(std::move(y), needs(x) || needs(shift) || needs(scale));
  if (nodes_[out.id].needs_grad) {
    record([this, x, shift, scale, out, groups, n] {
      const M& g = nodes_[out.id].grad;
      if (g.size() == 0) return;
      const M& X = value(x);
      const M& Sc = value(scale);
      for (int gi = 0; gi < groups; ++gi) {
        const auto G = g.middleRows(gi * n, n);
        if (needs(x)) grad_ref(x).middleRows(gi * n, n).array() += G.array().rowwise() * (Sc.row(gi).array() + T(1));
        if (needs(shift)) grad_ref(shift).row(gi) += G.colwise().sum();
        if (needs(scale)) grad_ref(scale).row(gi) += G.cwiseProduct(X.middleRows(gi * n, n)).colwise().sum();
      }
    });
  }
  return out;
}

template <typename T>
Var Tape<T>::gated_add(Var x, Var gate, Var y, int groups) {
  const M& X = value(x);
  const M& G = value(gate);
  const M& Y = value(y);
  if (X.rows() != Y.rows() || X.cols() != Y.cols() || G.rows() != groups || G.cols() != X.cols() ||
      X.rows() % groups != 0)
    throw InputError("gated_add shape mismatch");
  const Eigen::Index n = X.rows() / groups;
  M out = X;
  for (int gi = 0; gi < groups; ++gi)
    out.middleRows(gi * n, n).array() += Y.middleRows(gi * n, n).array().rowwise() * G.row(gi).array();
  const Var res = push(std::move(out), needs(x) || needs(gate) || needs(y));
  if (nodes_[res.id].needs_grad) {
    record([this, x, gate, y, res, groups, n] {
      const M& g = nodes_[res.id].grad;
      if (g.size() == 0) return;
      if (needs(x)) grad_ref(x) += g;
      const M& G = value(gate);
      const M& Y = value(y);
      for (int gi = 0; gi < groups; ++gi) {
        const auto Gb = g.middleRows(gi * n, n);
        if (needs(y)) grad_ref(y).middleRows(gi * n, n).array() += Gb.array().rowwise() * G.row(gi).array();
        if (needs(gate)) grad_ref(gate).row(gi) += Gb.cwiseProduct(Y.middleRows(gi * n, n)).colwise().sum();
      }
    });
  }
  return res;
}

template <typename T>
Var Tape<T>::slice_cols(Var x, int start, int count) {
  const M& X = value(x);
  if (start < 0 || count < 0 || start + count > X.cols()) throw InputError("slice out of range");
  const Var out = push(X.middleCols(start, count), needs(x));
  if (nodes_[out.id].needs_grad) {
    record([this, x, out, start, count] {
      const M& g = nodes_[out.id].grad;
      if (g.size() == 0) return;
      grad_ref(x).middleCols(start, count) += g;
    });
  }
  return out;
}

template <typename T>
Var Tape<T>::concat_rows(Var a, Var b) {
  const M& A = value(a);
  const M& B = value(b);
  if (A.cols() != B.cols()) throw InputError("concat shape mismatch");
  M y(A.rows() + B.rows(), A.cols());
  y.topRows(A.rows()) = A;
  y.bottomRows(B.rows()) = B;
  const Eigen::Index na = A.rows(), nb = B.rows();
  const Var out = push(std::move(y), needs(a) || needs(b));
  if (nodes_[out.id].needs_grad) {
    record([this, a, b, out, na, nb] {
      const M& g = nodes_[out.id].grad;
      if (g.size() == 0) return;
      if (needs(a)) grad_ref(a) += g.topRows(na);
      if (needs(b)) grad_ref(b) += g.bottomRows(nb);
    });
  }
  return out;
}

template <typename T>
Var Tape<T>::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw InputError("concat of nothing");
  Eigen::Index rows = 0;
  const Eigen::Index cols = value(parts[0]).cols();
  bool grad = false;
  for (const Var p : parts) {
    if (value(p).cols() != cols) throw InputError("concat shape mismatch");
    rows += value(p).rows();
    grad = grad || needs(p);
  }
  M y(rows, cols);
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (const Var p : parts) {
    offsets.push_back(at);
    y.middleRows(at, value(p).rows()) = value(p);
    at += value(p).rows();
  }
  const Var out = push(std::move(y), grad);
  if (nodes_[out.id].needs_grad) {
    record([this, out, list = std::vector<Var>(parts.begin(), parts.end()), offsets = std::move(offsets)] {
      const M& g = nodes_[out.id].grad;
      if (g.size() == 0) return;
      for (std::size_t i = 0; i < list.size(); ++i)
        if (needs(list[i])) grad_ref(list[i]) += g.middleRows(offsets[i], value(list[i]).rows());
    });
  }
  return out;
}

template <typename T>
Var Tape<T>::slice_rows(Var x, int start, int count) {
  const M& X = value(x);
  if (start < 0 || count < 0 || start + count > X.rows()) throw InputError("slice out of range");
  const Var out = push(X.middleRows(start, count), needs(x));
  if (nodes_[out.id].needs_grad) {
    record([this, x, out, start, count] {
      const M& g = nodes_[out.id].grad;
      if (g.size() == 0) return;
      grad_ref(x).middleRows(start, count) += g;
    });
  }
  return out;
}

template <typename T>
Var Tape<T>::tile_rows(Var x, int times) {
  const M& X = value(x);
  if (times < 1) throw InputError("tile count must be positive");
  const Eigen::Index n = X.rows();
  M y(n * times, X.cols());
  for (int i = 0; i < times; ++i) y.middleRows(i * n, n) = X;
  const Var out = push(std::move(y), needs(x));
  if (nodes_[out.id].needs_grad) {
    record([this, x, out, times, n] {
      const M& g = nodes_[out.id].grad;
      if (g.size() == 0) return;
      M& gx = grad_ref(x);
      for (int i = 0; i < times; ++i) gx += g.middleRows(i * n, n);
    });
  }
  return out;
}

template <typename T>
Var Tape<T>::add_rows_grouped(Var a, Var rows, int groups) {
  const M& A = value(a);
  const M& R = value(rows);
  if (R.rows() != groups || R.cols() != A.cols() || A.rows() % groups != 0)
    throw InputError("add_rows_grouped shape mismatch");
  const Eigen::Index n = A.rows() / groups;
  M y = A;
  for (int gi = 0; gi < groups; ++gi) y.middleRows(gi * n, n).rowwise() += R.row(gi);
  const Var out = push(std::move(y), needs(a) || needs(rows));
  if (nodes_[out.id].needs_grad) {
    record([this, a, rows, out, groups, n] {
      const M& g = nodes_[out.id].grad;
      if (g.size() == 0) return;
      if (needs(a)) grad_ref(a) += g;
      if (needs(rows))
        for (int gi = 0; gi < groups; ++gi) grad_ref(rows).row(gi) += g.middleRows(gi * n, n).colwise().sum();
    });
  }
  return out;
}

template <typename T>
Var Tape<T>::reparameterize(Var mean, Var logvar, const M& noise) {
  const M& Mu = value(mean);
  const M& Lv = value(logvar);
  if (Mu.rows() != Lv.rows() || Mu.cols() != Lv.cols() || noise.rows() != Mu.rows() || noise.cols() != Mu.cols())
    throw InputError("reparameterize shape mismatch");
  M stdev = (Lv.array() * T(0.5)).exp().matrix();
  M y = Mu + stdev.cwiseProduct(noise);
  const Var out = push(std::move(y), needs(mean) || needs(logvar));
  if (nodes_[out.id].needs_grad) {
    record([this, mean, logvar, out, noise, stdev = std::move(stdev)] {
      const M& g = nodes_[out.id].grad;
      if (g.size() == 0) return;
      if (needs(mean)) grad_ref(mean) += g;
      if (needs(logvar)) grad_ref(logvar).array() += g.array() * noise.array() * stdev.array() * T(0.5);
    });
  }
  return out;
}

template <typename T>
Var Tape<T>::mse(Var pred, const M& target) {
  const M& P = value(pred);
  if (P.rows() != target.rows() || P.cols() != target.cols()) throw InputError("mse shape mismatch");
  const T count = static_cast<T>(P.size());
  M diff = P - target;
  M y(1, 1);
  y(0, 0) = diff.squaredNorm() / count;
  const Var out = push(std::move(y), needs(pred));
  if (nodes_[out.id].needs_grad) {
    record([this, pred, out, count, diff = std::move(diff)] {
      const M& g = nodes_[out.id].grad;
      if (g.size() == 0) return;
      grad_ref(pred) += diff * (T(2) * g(0, 0) / count);
    });
  }
  return out;
}

template <typename T>
Var Tape<T>::bce_with_logits(Var logits, const M& targets) {
  const M& L = value(logits);
  if (L.rows() != targets.rows() || L.cols() != targets.cols()) throw InputError("bce shape mismatch");
  const T count = static_cast<T>(L.size());
  const M clipped = L.cwiseMax(T(-30)).cwiseMin(T(30));
  const auto terms = clipped.array().max(T(0)) - clipped.array() * targets.array() +
                     (T(1) + (-clipped.array().abs()).exp()).log();
  M y(1, 1);
  y(0, 0) = terms.sum() / count;
  const Var out = push(std::move(y), needs(logits));
  if (nodes_[out.id].needs_grad) {
    record([this, logits, out, count, clipped, targets] {
      const M& g = nodes_[out.id].grad;
      if (g.size() == 0) return;
      const M sig = clipped.unaryExpr([](T v) { return T(1) / (T(1) + std::exp(-v)); });
      grad_ref(logits) += (sig - targets) * (g(0, 0) / count);
    });
  }
  return out;
}

template <typename T>
Var Tape<T>::kl_standard_normal(Var mean, Var logvar) {
  const M& Mu = value(mean);
  const M& Lv = value(logvar);
  if (Mu.rows() != Lv.rows() || Mu.cols() != Lv.cols()) throw InputError("kl shape mismatch");
  const T count = static_cast<T>(Mu.size());
  M y(1, 1);
  y(0, 0) = T(0.5) * (Mu.array().square() + Lv.array().exp() - T(1) - Lv.array()).sum() / count;
  const Var out = push(std::move(y), needs(mean) || needs(logvar));
  if (nodes_[out.id].needs_grad) {
    record([this, mean, logvar, out, count] {
      const M& g = nodes_[out.id].grad;
      if (g.size() == 0) return;
      const T s = g(0, 0) / count;
      if (needs(mean)) grad_ref(mean) += value(mean) * s;
      if (needs(logvar)) grad_ref(logvar).array() += (value(logvar).array().exp() - T(1)) * (T(0.5) * s);
    });
  }
  return out;
}

template <typename T>
Var Tape<T>::weighted_sum(Var a, T wa, Var b, T wb) {
  const M& A = value(a);
  const M& B = value(b);
  if (A.rows() != B.rows() || A.cols() != B.cols()) throw InputError("weighted_sum shape mismatch");
  const Var out = push(A * wa + B * wb, needs(a) || needs(b));
  if (nodes_[out.id].needs_grad) {
    record([this, a, b, wa, wb, out] {
      const M& g = nodes_[out.id].grad;
      if (g.size() == 0) return;
      if (needs(a)) grad_ref(a) += g * wa;
      if (needs(b)) grad_ref(b) += g * wb;
    });
  }
  return out;
}

template class ParamSet<float>;
template class ParamSet<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace holopart::nn
