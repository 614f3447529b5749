#pragma once

// Tape-based reverse-mode differentiation over dense matrices. Nodes are
// appended in evaluation order, so walking the tape backwards visits them in
// reverse topological order, each exactly once.

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tspe/error.hpp"
#include "tspe/kernels.hpp"
#include "tspe/matrix.hpp"
#include "tspe/rng.hpp"

namespace tspe::ad {

template <class T>
struct Parameter {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;

  void zero_grad() { grad = Matrix<T>(value.rows(), value.cols()); }
};

struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

template <class T>
class Tape {
 public:
  using Mat = Matrix<T>;
  using Backward = std::function<void(Tape&)>;

  Var constant(Mat value) { return push(std::move(value), "constant", nullptr, nullptr); }

  Var parameter(Parameter<T>& p) { return push(p.value, "parameter", nullptr, &p); }

  /// Records an op output; `backward` reads grad(output) and accumulates
  /// into the inputs through grad_ref().
  Var record(Mat value, const char* op, Backward backward) {
    return push(std::move(value), op, std::move(backward), nullptr);
  }

  const Mat& value(Var v) const { return nodes_.at(v.id).value; }
  /// Gradient of a node after backward(); empty if nothing flowed into it.
  const Mat& grad(Var v) const { return nodes_.at(v.id).grad; }
  bool has_grad(Var v) const { return !nodes_.at(v.id).grad.empty(); }

  Mat& grad_ref(Var v) {
    Node& n = nodes_[v.id];
    if (n.grad.empty()) n.grad = Mat(n.value.rows(), n.value.cols());
    return n.grad;
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  const char* op_name(Var v) const { return nodes_.at(v.id).op; }

  /// Seeds d(loss)/d(loss) = 1 and propagates. Parameter gradients are
  /// accumulated into Parameter::grad.
  void backward(Var loss) {
    const Mat& l = value(loss);
    if (l.rows() != 1 || l.cols() != 1) {
      throw InvalidArgument("backward: loss must be a 1x1 scalar node");
    }
    grad_ref(loss)(0, 0) = T(1);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.empty()) continue;
      if (n.backward) n.backward(*this);
      if (n.param) {
        if (n.param->grad.empty()) n.param->zero_grad();
        auto& g = n.param->grad.storage();
        for (std::size_t j = 0; j < g.size(); ++j) g[j] += n.grad.storage()[j];
      }
    }
  }

 private:
  struct Node {
    Mat value;
    Mat grad;
    Backward backward;
    const char* op;
    Parameter<T>* param;
  };

  Var push(Mat value, const char* op, Backward backward, Parameter<T>* param) {
    if (!value.all_finite()) {
      throw NumericalError(std::string("non-finite value produced by op '") + op + "'");
    }
    nodes_.push_back(Node{std::move(value), Mat(), std::move(backward), op, param});
    return Var{nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Primitive ops

template <class T>
Var matmul(Tape<T>& t, Var a, Var b) {
  Matrix<T> out;
  kernels::gemm(kernels::Op::N, kernels::Op::N, t.value(a), t.value(b), out);
  Var o{t.size()};
  return t.record(std::move(out), "matmul", [a, b, o](Tape<T>& t) {
    const auto& g = t.grad(o);
    kernels::gemm(kernels::Op::N, kernels::Op::T, g, t.value(b), t.grad_ref(a), true);
    kernels::gemm(kernels::Op::T, kernels::Op::N, t.value(a), g, t.grad_ref(b), true);
  });
}

/// x (r x in) * w (in x out) + bias (1 x out), bias broadcast over rows.
template <class T>
Var linear(Tape<T>& t, Var x, Var w, Var bias) {
  Matrix<T> out;
  kernels::gemm(kernels::Op::N, kernels::Op::N, t.value(x), t.value(w), out);
  const auto& bv = t.value(bias);
  if (bv.rows() != 1 || bv.cols() != out.cols()) throw InvalidArgument("linear: bias shape");
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += bv(0, j);
  Var o{t.size()};
  return t.record(std::move(out), "linear", [x, w, bias, o](Tape<T>& t) {
    const auto& g = t.grad(o);
    kernels::gemm(kernels::Op::N, kernels::Op::T, g, t.value(w), t.grad_ref(x), true);
    kernels::gemm(kernels::Op::T, kernels::Op::N, t.value(x), g, t.grad_ref(w), true);
    auto& gb = t.grad_ref(bias);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) gb(0, j) += g(i, j);
  });
}

template <class T>
Var add(Tape<T>& t, Var a, Var b) {
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) throw InvalidArgument("add: shape");
  Matrix<T> out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += bv.data()[i];
  Var o{t.size()};
  return t.record(std::move(out), "add", [a, b, o](Tape<T>& t) {
    const auto& g = t.grad(o).storage();
    auto& ga = t.grad_ref(a).storage();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    auto& gb = t.grad_ref(b).storage();
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
  });
}

/// Elementwise product.
template <class T>
Var mul(Tape<T>& t, Var a, Var b) {
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) throw InvalidArgument("mul: shape");
  Matrix<T> out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= bv.data()[i];
  Var o{t.size()};
  return t.record(std::move(out), "mul", [a, b, o](Tape<T>& t) {
    const auto& g = t.grad(o).storage();
    const auto& avs = t.value(a).storage();
    const auto& bvs = t.value(b).storage();
    auto& ga = t.grad_ref(a).storage();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bvs[i];
    auto& gb = t.grad_ref(b).storage();
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * avs[i];
  });
}

template <class T>
Var scale(Tape<T>& t, Var a, T factor) {
  Matrix<T> out = t.value(a);
  for (T& v : out.storage()) v *= factor;
  Var o{t.size()};
  return t.record(std::move(out), "scale", [a, o, factor](Tape<T>& t) {
    const auto& g = t.grad(o).storage();
    auto& ga = t.grad_ref(a).storage();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
  });
}

/// Sum of all entries, as a 1x1 node.
template <class T>
Var sum(Tape<T>& t, Var a) {
  double s = 0;
  for (T v : t.value(a).storage()) s += v;
  Var o{t.size()};
  return t.record(Matrix<T>(1, 1, static_cast<T>(s)), "sum", [a, o](Tape<T>& t) {
    const T g = t.grad(o)(0, 0);
    for (T& v : t.grad_ref(a).storage()) v += g;
  });
}

template <class T>
Var transpose(Tape<T>& t, Var a) {
  Var o{t.size()};
  return t.record(t.value(a).transposed(), "transpose", [a, o](Tape<T>& t) {
    const auto& g = t.grad(o);
    auto& ga = t.grad_ref(a);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) ga(j, i) += g(i, j);
  });
}

template <class T>
Var relu(Tape<T>& t, Var a) {
  Matrix<T> out = t.value(a);
  for (T& v : out.storage()) v = v > T(0) ? v : T(0);
  Var o{t.size()};
  return t.record(std::move(out), "relu", [a, o](Tape<T>& t) {
    const auto& g = t.grad(o).storage();
    const auto& x = t.value(a).storage();
    auto& ga = t.grad_ref(a).storage();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x[i] > T(0)) ga[i] += g[i];
  });
}

template <class T>
Var sigmoid(Tape<T>& t, Var a) {
  Matrix<T> out = t.value(a);
  for (T& v : out.storage()) v = T(1) / (T(1) + std::exp(-v));
  Var o{t.size()};
  return t.record(std::move(out), "sigmoid", [a, o](Tape<T>& t) {
    const auto& g = t.grad(o).storage();
    const auto& y = t.value(o).storage();
    auto& ga = t.grad_ref(a).storage();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (T(1) - y[i]);
  });
}

/// Inverted dropout; identity when rate == 0 or rng is null.
template <class T>
Var dropout(Tape<T>& t, Var a, double rate, Rng* rng) {
  if (rate <= 0.0 || rng == nullptr) return a;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  Matrix<T> mask(t.value(a).rows(), t.value(a).cols());
  for (T& m : mask.storage()) m = rng->uniform() < rate ? T(0) : keep_scale;
  Matrix<T> out = t.value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= mask.data()[i];
  Var o{t.size()};
  return t.record(std::move(out), "dropout", [a, o, mask = std::move(mask)](Tape<T>& t) {
    const auto& g = t.grad(o).storage();
    auto& ga = t.grad_ref(a).storage();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * mask.data()[i];
  });
}

/// Row-wise layer normalization with learned gain/bias (each 1 x cols).
template <class T>
Var layer_norm(Tape<T>& t, Var x, Var gain, Var bias, T eps = T(1e-5)) {
  const auto& xv = t.value(x);
  const std::size_t r = xv.rows(), c = xv.cols();
  Matrix<T> xhat(r, c), out(r, c);
  std::vector<T> inv_std(r);
  const auto& gv = t.value(gain);
  const auto& bv = t.value(bias);
  for (std::size_t i = 0; i < r; ++i) {
    T mean = 0;
    for (std::size_t j = 0; j < c; ++j) mean += xv(i, j);
    mean /= static_cast<T>(c);
    T var = 0;
    for (std::size_t j = 0; j < c; ++j) var += (xv(i, j) - mean) * (xv(i, j) - mean);
    var /= static_cast<T>(c);
    inv_std[i] = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      xhat(i, j) = (xv(i, j) - mean) * inv_std[i];
      out(i, j) = gv(0, j) * xhat(i, j) + bv(0, j);
    }
  }
  Var o{t.size()};
  return t.record(std::move(out), "layer_norm",
                  [x, gain, bias, o, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                      Tape<T>& t) {
                    const auto& g = t.grad(o);
                    const auto& gv = t.value(gain);
                    auto& gx = t.grad_ref(x);
                    auto& gg = t.grad_ref(gain);
                    auto& gb = t.grad_ref(bias);
                    const std::size_t r = g.rows(), c = g.cols();
                    std::vector<T> dxhat(c);
                    for (std::size_t i = 0; i < r; ++i) {
                      T m1 = 0, m2 = 0;
                      for (std::size_t j = 0; j < c; ++j) {
                        gg(0, j) += g(i, j) * xhat(i, j);
                        gb(0, j) += g(i, j);
                        dxhat[j] = g(i, j) * gv(0, j);
                        m1 += dxhat[j];
                        m2 += dxhat[j] * xhat(i, j);
                      }
                      m1 /= static_cast<T>(c);
                      m2 /= static_cast<T>(c);
                      for (std::size_t j = 0; j < c; ++j)
                        gx(i, j) += inv_std[i] * (dxhat[j] - m1 - xhat(i, j) * m2);
                    }
                  });
}

/// Batched multi-head attention (see kernels::AttentionShape). key_mask marks
/// valid key rows. Dropout, when active, is applied to the attention weights.
/// If `probs_out` is non-null it receives the softmax weights.
template <class T>
Var attention(Tape<T>& t, Var q, Var k, Var v, const kernels::AttentionShape& shape,
              std::vector<std::uint8_t> key_mask, double rate, Rng* rng,
              std::vector<T>* probs_out = nullptr) {
  std::vector<T> probs(shape.prob_size());
  std::vector<T> keep;
  if (rate > 0.0 && rng != nullptr) {
    keep.resize(probs.size());
    const T s = static_cast<T>(1.0 / (1.0 - rate));
    for (T& m : keep) m = rng->uniform() < rate ? T(0) : s;
  }
  Matrix<T> out;
  kernels::attention_forward<T>(shape, t.value(q), t.value(k), t.value(v), key_mask, keep, probs,
                                out);
  if (probs_out) *probs_out = probs;
  Var o{t.size()};
  return t.record(std::move(out), "attention",
                  [q, k, v, o, shape, probs = std::move(probs), keep = std::move(keep)](
                      Tape<T>& t) {
                    auto& gq = t.grad_ref(q);
                    auto& gk = t.grad_ref(k);
                    auto& gv = t.grad_ref(v);
                    kernels::attention_backward<T>(shape, t.value(q), t.value(k), t.value(v), keep,
                                                   probs, t.grad(o), gq, gk, gv);
                  });
}

/// Column scoring on row-major decoder output: x holds `batch` blocks of
/// `len` rows (one row per decoder node, i.e. one column of the interaction
/// matrix). Returns batch x len weights: softmax over valid rows of the
/// squared row norms, exact zeros at masked rows.
template <class T>
Var column_scores(Tape<T>& t, Var x, std::span<const std::uint8_t> mask, std::size_t batch,
                  std::size_t len) {
  const auto& xv = t.value(x);
  if (xv.rows() != batch * len || mask.size() != batch * len) {
    throw InvalidArgument("column_scores: shape mismatch");
  }
  Matrix<T> s(batch, len);
  for (std::size_t b = 0; b < batch; ++b) {
    T mx = -std::numeric_limits<T>::infinity();
    std::vector<T> sq(len, T(0));
    for (std::size_t j = 0; j < len; ++j) {
      if (!mask[b * len + j]) continue;
      T acc = 0;
      for (T e : xv.row(b * len + j)) acc += e * e;
      sq[j] = acc;
      mx = std::max(mx, acc);
    }
    if (!std::isfinite(mx)) throw InvalidArgument("column_scores: no unmasked columns");
    T total = 0;
    for (std::size_t j = 0; j < len; ++j) {
      if (!mask[b * len + j]) continue;
      s(b, j) = std::exp(sq[j] - mx);
      total += s(b, j);
    }
    for (std::size_t j = 0; j < len; ++j) s(b, j) /= total;
  }
  Var o{t.size()};
  return t.record(std::move(s), "column_scores", [x, o, batch, len](Tape<T>& t) {
    const auto& g = t.grad(o);
    const auto& sv = t.value(o);
    const auto& xv = t.value(x);
    auto& gx = t.grad_ref(x);
    for (std::size_t b = 0; b < batch; ++b) {
      T inner = 0;
      for (std::size_t j = 0; j < len; ++j) inner += sv(b, j) * g(b, j);
      for (std::size_t j = 0; j < len; ++j) {
        if (sv(b, j) == T(0)) continue;
        const T dn = sv(b, j) * (g(b, j) - inner);
        auto xr = xv.row(b * len + j);
        auto gr = gx.row(b * len + j);
        for (std::size_t c = 0; c < xr.size(); ++c) gr[c] += T(2) * dn * xr[c];
      }
    }
  });
}

/// Weighted column sum: out(b, :) = sum_j s(b, j) * x(b*len + j, :).
template <class T>
Var aggregate(Tape<T>& t, Var x, Var s, std::size_t batch, std::size_t len) {
  const auto& xv = t.value(x);
  const auto& sv = t.value(s);
  if (sv.rows() != batch || sv.cols() != len || xv.rows() != batch * len) {
    throw InvalidArgument("aggregate: dimension mismatch");
  }
  Matrix<T> out(batch, xv.cols());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t j = 0; j < len; ++j) {
      const T w = sv(b, j);
      if (w == T(0)) continue;
      auto xr = xv.row(b * len + j);
      for (std::size_t c = 0; c < xr.size(); ++c) out(b, c) += w * xr[c];
    }
  Var o{t.size()};
  return t.record(std::move(out), "aggregate", [x, s, o, batch, len](Tape<T>& t) {
    const auto& g = t.grad(o);
    const auto& xv = t.value(x);
    const auto& sv = t.value(s);
    auto& gx = t.grad_ref(x);
    auto& gs = t.grad_ref(s);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < len; ++j) {
        auto xr = xv.row(b * len + j);
        auto gr = gx.row(b * len + j);
        T dot = 0;
        for (std::size_t c = 0; c < xr.size(); ++c) {
          dot += xr[c] * g(b, c);
          gr[c] += sv(b, j) * g(b, c);
        }
        gs(b, j) += dot;
      }
  });
}

/// logits(b) = x(b, :) . w(0, :) + bias, w is 1 x m.
template <class T>
Var head_logits(Tape<T>& t, Var x, Var w, Var bias) {
  const auto& xv = t.value(x);
  const auto& wv = t.value(w);
  if (wv.rows() != 1 || wv.cols() != xv.cols()) throw InvalidArgument("head: weight shape");
  Matrix<T> out(xv.rows(), 1);
  for (std::size_t b = 0; b < xv.rows(); ++b) {
    T acc = t.value(bias)(0, 0);
    for (std::size_t c = 0; c < xv.cols(); ++c) acc += xv(b, c) * wv(0, c);
    out(b, 0) = acc;
  }
  Var o{t.size()};
  return t.record(std::move(out), "head", [x, w, bias, o](Tape<T>& t) {
    const auto& g = t.grad(o);
    const auto& xv = t.value(x);
    const auto& wv = t.value(w);
    auto& gx = t.grad_ref(x);
    auto& gw = t.grad_ref(w);
    auto& gb = t.grad_ref(bias);
    for (std::size_t b = 0; b < xv.rows(); ++b) {
      gb(0, 0) += g(b, 0);
      for (std::size_t c = 0; c < xv.cols(); ++c) {
        gx(b, c) += g(b, 0) * wv(0, c);
        gw(0, c) += g(b, 0) * xv(b, c);
      }
    }
  });
}

/// Mean binary cross-entropy on logits in the stable form
/// max(z, 0) - z*y + log(1 + exp(-|z|)), accumulated in double.
template <class T>
Var bce_with_logits(Tape<T>& t, Var logits, std::vector<int> labels) {
  const auto& z = t.value(logits);
  if (z.size() != labels.size() || labels.empty()) {
    throw InvalidArgument("bce: logits/labels size mismatch");
  }
  double total = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw InvalidArgument("bce: label outside {0,1}");
    const double zi = static_cast<double>(z.data()[i]);
    total += std::max(zi, 0.0) - zi * labels[i] + std::log1p(std::exp(-std::abs(zi)));
  }
  const double n = static_cast<double>(labels.size());
  Var o{t.size()};
  return t.record(Matrix<T>(1, 1, static_cast<T>(total / n)), "bce",
                  [logits, o, labels = std::move(labels), n](Tape<T>& t) {
                    const T g = t.grad(o)(0, 0);
                    const auto& z = t.value(logits).storage();
                    auto& gz = t.grad_ref(logits).storage();
                    for (std::size_t i = 0; i < labels.size(); ++i) {
                      const double sig = 1.0 / (1.0 + std::exp(-static_cast<double>(z[i])));
                      gz[i] += g * static_cast<T>((sig - labels[i]) / n);
                    }
                  });
}

}  // namespace tspe::ad
