// mcvap/autograd.hpp

// Copyright 2026  The mcvap Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Minimal reverse-mode differentiation over dense row-major-by-convention
// matrices: rows are time frames, columns are features. Only the operations
// the predictor needs are provided; each records its own backward step.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mcvap/audio.hpp"

namespace mcvap::ag {

using Mat = Eigen::MatrixXd;
using RowVec = Eigen::RowVectorXd;

struct Var {
  int id = -1;
};

class Tape {
 public:
  Var Leaf(Mat value, bool requires_grad) {
    nodes_.push_back(Node{std::move(value), Mat(), {}, requires_grad});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }
  /// Constant input; no gradient is accumulated for it.
  Var Constant(Mat value) { return Leaf(std::move(value), false); }

  const Mat& value(Var v) const { return nodes_[v.id].value; }
  const Mat& grad(Var v) const { return nodes_[v.id].grad; }
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded backward step in
  /// reverse. `loss` must be 1x1.
  void Backward(Var loss) {
    if (value(loss).size() != 1) throw Error("Tape::Backward: loss must be a scalar");
    for (auto& n : nodes_)
      if (n.needs_grad) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    nodes_[loss.id].grad = Mat::Constant(1, 1, 1.0);
    for (int i = loss.id; i >= 0; --i) {
      auto& n = nodes_[i];
      if (n.backward && n.needs_grad) n.backward(*this, i);
    }
  }

  // Used by operations.
  Mat& mutable_grad(Var v) { return nodes_[v.id].grad; }
  const Mat& grad_at(int id) const { return nodes_[id].grad; }
  const Mat& value_at(int id) const { return nodes_[id].value; }

  using BackwardFn = std::function<void(Tape&, int self)>;
  Var Record(Mat value, std::initializer_list<Var> inputs, BackwardFn fn) {
    bool ng = false;
    for (Var in : inputs) ng = ng || nodes_[in.id].needs_grad;
    nodes_.push_back(Node{std::move(value), Mat(), ng ? std::move(fn) : BackwardFn{}, ng});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

 private:
  struct Node {
    Mat value;
    Mat grad;
    BackwardFn backward;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
};

/// a * w^T, i.e. a (T x in) through a weight stored as (out x in).
inline Var Linear(Tape& t, Var a, Var w) {
  Mat y = t.value(a) * t.value(w).transpose();
  return t.Record(std::move(y), {a, w}, [a, w](Tape& tp, int self) {
    const Mat& g = tp.grad_at(self);
    if (tp.needs_grad(a)) tp.mutable_grad(a).noalias() += g * tp.value(w);
    if (tp.needs_grad(w)) tp.mutable_grad(w).noalias() += g.transpose() * tp.value(a);
  });
}

/// a + b, same shape.
inline Var Add(Tape& t, Var a, Var b) {
  Mat y = t.value(a) + t.value(b);
  return t.Record(std::move(y), {a, b}, [a, b](Tape& tp, int self) {
    const Mat& g = tp.grad_at(self);
    if (tp.needs_grad(a)) tp.mutable_grad(a) += g;
    if (tp.needs_grad(b)) tp.mutable_grad(b) += g;
  });
}

/// Adds the 1 x n row `bias` to every row of `a`.
inline Var AddRow(Tape& t, Var a, Var bias) {
  Mat y = t.value(a).rowwise() + RowVec(t.value(bias).row(0));
  return t.Record(std::move(y), {a, bias}, [a, bias](Tape& tp, int self) {
    const Mat& g = tp.grad_at(self);
    if (tp.needs_grad(a)) tp.mutable_grad(a) += g;
    if (tp.needs_grad(bias)) tp.mutable_grad(bias) += g.colwise().sum();
  });
}

inline Var Dense(Tape& t, Var a, Var w, Var bias) { return AddRow(t, Linear(t, a, w), bias); }

/// tanh-approximated GELU.
inline Var Gelu(Tape& t, Var a) {
  constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
  const Mat& x = t.value(a);
  Mat y = x.unaryExpr([](double v) {
    return 0.5 * v * (1.0 + std::tanh(c * (v + 0.044715 * v * v * v)));
  });
  return t.Record(std::move(y), {a}, [a](Tape& tp, int self) {
    const Mat& x = tp.value(a);
    Mat d = x.unaryExpr([](double v) {
      double u = c * (v + 0.044715 * v * v * v);
      double th = std::tanh(u);
      double du = c * (1.0 + 3.0 * 0.044715 * v * v);
      return 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * du;
    });
    tp.mutable_grad(a) += tp.grad_at(self).cwiseProduct(d);
  });
}

/// Row-wise layer normalization with learned gain and bias (both 1 x n).
inline Var LayerNorm(Tape& t, Var a, Var gain, Var bias, double eps = 1e-5) {
  const Mat& x = t.value(a);
  const auto rows = x.rows(), n = x.cols();
  Mat xhat(rows, n);
  Eigen::VectorXd inv_std(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    double mu = x.row(r).mean();
    double var = (x.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (x.row(r).array() - mu) * inv_std(r);
  }
  Mat y = (xhat.array().rowwise() * t.value(gain).row(0).array()).rowwise() +
          t.value(bias).row(0).array();
  return t.Record(std::move(y), {a, gain, bias},
                  [a, gain, bias, xhat = std::move(xhat), inv_std](Tape& tp, int self) {
                    const Mat& g = tp.grad_at(self);
                    if (tp.needs_grad(gain))
                      tp.mutable_grad(gain) += g.cwiseProduct(xhat).colwise().sum();
                    if (tp.needs_grad(bias)) tp.mutable_grad(bias) += g.colwise().sum();
                    if (tp.needs_grad(a)) {
                      Mat dxhat = g.array().rowwise() * tp.value(gain).row(0).array();
                      Mat& ga = tp.mutable_grad(a);
                      for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
                        double m1 = dxhat.row(r).mean();
                        double m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
                        ga.row(r) += inv_std(r) *
                                     (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2).matrix();
                      }
                    }
                  });
}

/// Linear distance penalty per head, as in ALiBi.
inline std::vector<double> AlibiSlopes(int heads) {
  std::vector<double> s(heads);
  for (int h = 0; h < heads; ++h) s[h] = std::pow(2.0, -8.0 * (h + 1) / heads);
  return s;
}

/// Multi-head causal attention. Query row i attends key rows j <= i with
/// score q.k / sqrt(d_head) - slope_h * (i - j). Q, K, V are T x D and the
/// heads split D into equal contiguous slices.
inline Var CausalAttention(Tape& t, Var q, Var k, Var v, int heads) {
  const Mat& Q = t.value(q);
  const Mat& K = t.value(k);
  const Mat& V = t.value(v);
  if (Q.rows() != K.rows() || K.rows() != V.rows() || Q.cols() != K.cols() ||
      K.cols() != V.cols())
    throw Error("CausalAttention: shape mismatch");
  const auto T = Q.rows();
  const auto D = Q.cols();
  if (D % heads != 0) throw Error("CausalAttention: width not divisible by heads");
  const auto dh = D / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto slopes = AlibiSlopes(heads);

  std::vector<Mat> probs(heads);
  Mat out(T, D);
  for (int h = 0; h < heads; ++h) {
    Mat S = Q.middleCols(h * dh, dh) * K.middleCols(h * dh, dh).transpose();
    Mat P = Mat::Zero(T, T);
    for (Eigen::Index i = 0; i < T; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j <= i; ++j) {
        double s = S(i, j) * scale - slopes[h] * static_cast<double>(i - j);
        P(i, j) = s;
        mx = std::max(mx, s);
      }
      double z = 0.0;
      for (Eigen::Index j = 0; j <= i; ++j) {
        P(i, j) = std::exp(P(i, j) - mx);
        z += P(i, j);
      }
      for (Eigen::Index j = 0; j <= i; ++j) P(i, j) /= z;
    }
    out.middleCols(h * dh, dh).noalias() = P * V.middleCols(h * dh, dh);
    probs[h] = std::move(P);
  }
  return t.Record(std::move(out), {q, k, v},
                  [q, k, v, heads, dh, scale, probs = std::move(probs)](Tape& tp, int self) {
                    const Mat& G = tp.grad_at(self);
                    const Mat& Q = tp.value(q);
                    const Mat& K = tp.value(k);
                    const Mat& V = tp.value(v);
                    for (int h = 0; h < heads; ++h) {
                      const Mat& P = probs[h];
                      auto Gh = G.middleCols(h * dh, dh);
                      if (tp.needs_grad(v))
                        tp.mutable_grad(v).middleCols(h * dh, dh).noalias() += P.transpose() * Gh;
                      if (!tp.needs_grad(q) && !tp.needs_grad(k)) continue;
                      Mat dP = Gh * V.middleCols(h * dh, dh).transpose();
                      Eigen::VectorXd rs = (dP.cwiseProduct(P)).rowwise().sum();
                      Mat dS = P.cwiseProduct(dP.colwise() - rs) * scale;
                      if (tp.needs_grad(q))
                        tp.mutable_grad(q).middleCols(h * dh, dh).noalias() +=
                            dS * K.middleCols(h * dh, dh);
                      if (tp.needs_grad(k))
                        tp.mutable_grad(k).middleCols(h * dh, dh).noalias() +=
                            dS.transpose() * Q.middleCols(h * dh, dh);
                    }
                  });
}

/// Row-wise softmax of a logits matrix (no tape).
inline Mat SoftmaxRows(const Mat& logits) {
  Mat p(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    double mx = logits.row(r).maxCoeff();
    p.row(r) = (logits.row(r).array() - mx).exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

inline double Sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

/// log(1 + exp(x)), stable for large |x|.
inline double Softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

/// Mean over masked rows of -log softmax(logits)[target]. Returns a 1x1 node.
inline Var SoftmaxCrossEntropy(Tape& t, Var logits, std::span<const int> targets,
                               std::span<const std::uint8_t> mask) {
  const Mat& L = t.value(logits);
  Mat P = SoftmaxRows(L);
  double loss = 0.0;
  int n = 0;
  for (Eigen::Index r = 0; r < L.rows(); ++r) {
    if (!mask[r]) continue;
    double mx = L.row(r).maxCoeff();
    double lse = mx + std::log((L.row(r).array() - mx).exp().sum());
    loss += lse - L(r, targets[r]);
    ++n;
  }
  if (n == 0) throw Error("SoftmaxCrossEntropy: no frames with targets");
  loss /= n;
  std::vector<int> tg(targets.begin(), targets.end());
  std::vector<std::uint8_t> mk(mask.begin(), mask.end());
  return t.Record(Mat::Constant(1, 1, loss), {logits},
                  [logits, P = std::move(P), tg = std::move(tg), mk = std::move(mk), n](
                      Tape& tp, int self) {
                    double g = tp.grad_at(self)(0, 0) / n;
                    Mat& gl = tp.mutable_grad(logits);
                    for (Eigen::Index r = 0; r < P.rows(); ++r) {
                      if (!mk[r]) continue;
                      gl.row(r) += g * P.row(r);
                      gl(r, tg[r]) -= g;
                    }
                  });
}

/// Mean over masked rows and all columns of binary cross-entropy with
/// logits. `targets` holds 0/1 per entry.
inline Var SigmoidCrossEntropy(Tape& t, Var logits, const Mat& targets,
                               std::span<const std::uint8_t> mask) {
  const Mat& L = t.value(logits);
  double loss = 0.0;
  int n = 0;
  for (Eigen::Index r = 0; r < L.rows(); ++r) {
    if (!mask[r]) continue;
    for (Eigen::Index c = 0; c < L.cols(); ++c) {
      double z = L(r, c), y = targets(r, c);
      loss += Softplus(z) - y * z;
    }
    ++n;
  }
  if (n == 0) throw Error("SigmoidCrossEntropy: no frames with targets");
  const double denom = static_cast<double>(n) * static_cast<double>(L.cols());
  loss /= denom;
  std::vector<std::uint8_t> mk(mask.begin(), mask.end());
  return t.Record(Mat::Constant(1, 1, loss), {logits},
                  [logits, targets, mk = std::move(mk), denom](Tape& tp, int self) {
                    double g = tp.grad_at(self)(0, 0) / denom;
                    const Mat& L = tp.value(logits);
                    Mat& gl = tp.mutable_grad(logits);
                    for (Eigen::Index r = 0; r < L.rows(); ++r) {
                      if (!mk[r]) continue;
                      for (Eigen::Index c = 0; c < L.cols(); ++c)
                        gl(r, c) += g * (Sigmoid(L(r, c)) - targets(r, c));
                    }
                  });
}

/// Per-stream scalar heads: column s of the result is streams[s] * w.row(s)^T
/// + b(s). Used for the VAD head so each speaker reads its own stream.
inline Var PerStreamHead(Tape& t, Var stream_a, Var stream_b, Var w, Var b) {
  const Mat& A = t.value(stream_a);
  const Mat& B = t.value(stream_b);
  const Mat& W = t.value(w);
  const Mat& bias = t.value(b);
  Mat y(A.rows(), 2);
  y.col(0) = A * W.row(0).transpose();
  y.col(1) = B * W.row(1).transpose();
  y.col(0).array() += bias(0, 0);
  y.col(1).array() += bias(0, 1);
  return t.Record(std::move(y), {stream_a, stream_b, w, b},
                  [stream_a, stream_b, w, b](Tape& tp, int self) {
                    const Mat& g = tp.grad_at(self);
                    const Mat& W = tp.value(w);
                    if (tp.needs_grad(stream_a)) tp.mutable_grad(stream_a) += g.col(0) * W.row(0);
                    if (tp.needs_grad(stream_b)) tp.mutable_grad(stream_b) += g.col(1) * W.row(1);
                    if (tp.needs_grad(w)) {
                      tp.mutable_grad(w).row(0) += g.col(0).transpose() * tp.value(stream_a);
                      tp.mutable_grad(w).row(1) += g.col(1).transpose() * tp.value(stream_b);
                    }
                    if (tp.needs_grad(b)) {
                      tp.mutable_grad(b)(0, 0) += g.col(0).sum();
                      tp.mutable_grad(b)(0, 1) += g.col(1).sum();
                    }
                  });
}

}  // namespace mcvap::ag
