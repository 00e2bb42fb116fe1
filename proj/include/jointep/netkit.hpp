// Copyright 2026 The jointep Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Small deterministic differentiable kernels. Every forward op has a matching
// backward that accumulates (+=) parameter gradients; callers zero gradients
// between steps.

#ifndef JOINTEP_NETKIT_HPP_
#define JOINTEP_NETKIT_HPP_

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "jointep/common.hpp"

namespace jointep {

template <typename T>
using NoDeduce = std::type_identity_t<T>;

template <typename Scalar>
using ConstMatRef = Eigen::Ref<const MatrixX<Scalar>>;
template <typename Scalar>
using MatRef = Eigen::Ref<MatrixX<Scalar>>;
template <typename Scalar>
using ConstVecRef = Eigen::Ref<const VectorX<Scalar>>;
template <typename Scalar>
using VecRef = Eigen::Ref<VectorX<Scalar>>;

// ---------------------------------------------------------------------------
// Elementwise helpers

template <typename Derived>
auto sigmoid(const Eigen::MatrixBase<Derived>& z) {
  using S = typename Derived::Scalar;
  return (S(1) + (-z.array()).exp()).inverse().matrix();
}

// Numerically stable softmax (max subtraction).
template <typename Derived>
typename Derived::PlainObject softmax(const Eigen::MatrixBase<Derived>& z) {
  if (z.hasNaN()) throw NumericError("softmax: NaN input");
  const auto m = z.maxCoeff();
  typename Derived::PlainObject e = (z.array() - m).exp().matrix();
  return e / e.sum();
}

template <typename Derived>
typename Derived::PlainObject log_softmax(const Eigen::MatrixBase<Derived>& z) {
  if (z.hasNaN()) throw NumericError("log_softmax: NaN input");
  const auto m = z.maxCoeff();
  const auto lse = m + std::log((z.array() - m).exp().sum());
  return (z.array() - lse).matrix();
}

// Backward of p = softmax(z) given dL/dp.
template <typename DP, typename DG>
typename DP::PlainObject softmax_backward(const Eigen::MatrixBase<DP>& p, const Eigen::MatrixBase<DG>& dp) {
  const auto dot = p.cwiseProduct(dp).sum();
  return p.cwiseProduct((dp.array() - dot).matrix());
}

// ---------------------------------------------------------------------------
// Dense layer: y = W x + b

template <typename Scalar>
void check_dense_shapes(Eigen::Index x, Eigen::Index wr, Eigen::Index wc, Eigen::Index b) {
  if (wc != x || wr != b)
    throw ShapeError("dense: W is " + shape_str(wr, wc) + ", x has " + std::to_string(x) + ", b has " +
                     std::to_string(b));
}

template <typename Scalar>
VectorX<Scalar> dense_forward(const VectorX<Scalar>& x, ConstMatRef<NoDeduce<Scalar>> W,
                              ConstVecRef<NoDeduce<Scalar>> b) {
  check_dense_shapes<Scalar>(x.size(), W.rows(), W.cols(), b.size());
  VectorX<Scalar> y = W * x;
  y += b;
  return y;
}

// Accumulates dW += dy x^T, db += dy; returns dL/dx.
template <typename Scalar>
VectorX<Scalar> dense_backward(const VectorX<Scalar>& x, ConstMatRef<NoDeduce<Scalar>> W,
                               const VectorX<Scalar>& dy, MatRef<NoDeduce<Scalar>> dW,
                               VecRef<NoDeduce<Scalar>> db) {
  check_dense_shapes<Scalar>(x.size(), W.rows(), W.cols(), dy.size());
  if (dW.rows() != W.rows() || dW.cols() != W.cols() || db.size() != dy.size())
    throw ShapeError("dense_backward: gradient buffers do not match " + shape_str(W.rows(), W.cols()));
  dW.noalias() += dy * x.transpose();
  db += dy;
  return W.transpose() * dy;
}

// ---------------------------------------------------------------------------
// LSTM cell. Gate rows of W (4H x (I+H)) are ordered input, forget,
// candidate, output and act on the concatenation [x; h_prev].

template <typename Scalar>
struct LstmState {
  VectorX<Scalar> h;
  VectorX<Scalar> c;

  static LstmState zeros(Eigen::Index hidden) {
    return {VectorX<Scalar>::Zero(hidden), VectorX<Scalar>::Zero(hidden)};
  }
};

template <typename Scalar>
struct LstmCache {
  VectorX<Scalar> xh;
  VectorX<Scalar> c_prev;
  VectorX<Scalar> i, f, g, o;
  VectorX<Scalar> tanh_c;
};

template <typename Scalar>
LstmState<Scalar> lstm_cell_step(const VectorX<Scalar>& x, const LstmState<NoDeduce<Scalar>>& st,
                                 ConstMatRef<NoDeduce<Scalar>> W, ConstVecRef<NoDeduce<Scalar>> b,
                                 LstmCache<NoDeduce<Scalar>>* cache = nullptr) {
  const Eigen::Index H = st.h.size();
  const Eigen::Index I = x.size();
  if (st.c.size() != H || W.rows() != 4 * H || W.cols() != I + H || b.size() != 4 * H)
    throw ShapeError("lstm: W is " + shape_str(W.rows(), W.cols()) + ", x has " + std::to_string(I) +
                     ", hidden " + std::to_string(H));
  VectorX<Scalar> xh(I + H);
  xh << x, st.h;
  VectorX<Scalar> a = W * xh;
  a += b;
  VectorX<Scalar> i = sigmoid(a.segment(0, H));
  VectorX<Scalar> f = sigmoid(a.segment(H, H));
  VectorX<Scalar> g = a.segment(2 * H, H).array().tanh().matrix();
  VectorX<Scalar> o = sigmoid(a.segment(3 * H, H));
  LstmState<Scalar> next;
  next.c = f.cwiseProduct(st.c) + i.cwiseProduct(g);
  VectorX<Scalar> tanh_c = next.c.array().tanh().matrix();
  next.h = o.cwiseProduct(tanh_c);
  if (cache) {
    cache->xh = std::move(xh);
    cache->c_prev = st.c;
    cache->i = std::move(i);
    cache->f = std::move(f);
    cache->g = std::move(g);
    cache->o = std::move(o);
    cache->tanh_c = std::move(tanh_c);
  }
  return next;
}

template <typename Scalar>
struct LstmGrads {
  VectorX<Scalar> dx;
  VectorX<Scalar> dh_prev;
  VectorX<Scalar> dc_prev;
};

// dh, dc are the total gradients flowing into h' and c'.
template <typename Scalar>
LstmGrads<Scalar> lstm_cell_backward(const LstmCache<Scalar>& cache, ConstMatRef<NoDeduce<Scalar>> W,
                                     const VectorX<Scalar>& dh, const VectorX<Scalar>& dc,
                                     MatRef<NoDeduce<Scalar>> dW, VecRef<NoDeduce<Scalar>> db) {
  const Eigen::Index H = dh.size();
  const Eigen::Index I = cache.xh.size() - H;
  const auto one = Scalar(1);
  VectorX<Scalar> dc_total =
      dc + dh.cwiseProduct(cache.o).cwiseProduct((one - cache.tanh_c.array().square()).matrix());
  VectorX<Scalar> da(4 * H);
  da.segment(0, H) = dc_total.cwiseProduct(cache.g).cwiseProduct(cache.i.cwiseProduct((one - cache.i.array()).matrix()));
  da.segment(H, H) =
      dc_total.cwiseProduct(cache.c_prev).cwiseProduct(cache.f.cwiseProduct((one - cache.f.array()).matrix()));
  da.segment(2 * H, H) = dc_total.cwiseProduct(cache.i).cwiseProduct((one - cache.g.array().square()).matrix());
  da.segment(3 * H, H) =
      dh.cwiseProduct(cache.tanh_c).cwiseProduct(cache.o.cwiseProduct((one - cache.o.array()).matrix()));
  dW.noalias() += da * cache.xh.transpose();
  db += da;
  VectorX<Scalar> dxh = W.transpose() * da;
  LstmGrads<Scalar> out;
  out.dx = dxh.head(I);
  out.dh_prev = dxh.tail(H);
  out.dc_prev = dc_total.cwiseProduct(cache.f);
  return out;
}

// ---------------------------------------------------------------------------
// Causal block: y_t = x_t + tanh(conv_b + sum_j conv_w[:,j] * a_{t-j}),
// a_t = pw_W x_t + pw_b. Depthwise convolution looking back k-1 frames.

template <typename Scalar>
struct CausalBlockView {
  ConstMatRef<Scalar> pw_W;    // D x D
  ConstVecRef<Scalar> pw_b;    // D
  ConstMatRef<Scalar> conv_w;  // D x k
  ConstVecRef<Scalar> conv_b;  // D
};

template <typename Scalar>
struct CausalBlockGradView {
  MatRef<Scalar> pw_W;
  VecRef<Scalar> pw_b;
  MatRef<Scalar> conv_w;
  VecRef<Scalar> conv_b;
};

template <typename Scalar>
struct CausalBlockCache {
  MatrixX<Scalar> xs;      // T x D inputs
  MatrixX<Scalar> as;      // T x D pointwise outputs
  MatrixX<Scalar> tanh_s;  // T x D
};

// Frame-at-a-time evaluation; the sequence forward below is built on it so
// streaming and whole-sequence outputs agree bit for bit.
template <typename Scalar>
class CausalBlockStream {
 public:
  explicit CausalBlockStream(const CausalBlockView<Scalar>& p) : p_(p) {
    const Eigen::Index D = p.pw_W.rows();
    if (p.pw_W.cols() != D || p.pw_b.size() != D || p.conv_w.rows() != D || p.conv_b.size() != D ||
        p.conv_w.cols() < 1)
      throw ShapeError("causal block: pw_W " + shape_str(p.pw_W.rows(), p.pw_W.cols()) + ", conv_w " +
                       shape_str(p.conv_w.rows(), p.conv_w.cols()));
    history_.assign(static_cast<std::size_t>(p.conv_w.cols()), VectorX<Scalar>::Zero(D));
  }

  Eigen::Index dim() const { return p_.pw_W.rows(); }

  VectorX<Scalar> step(const VectorX<Scalar>& x, VectorX<Scalar>* a_out = nullptr, VectorX<Scalar>* tanh_out = nullptr) {
    if (x.size() != dim())
      throw ShapeError("causal block: input has " + std::to_string(x.size()) + ", block dim " + std::to_string(dim()));
    const std::size_t k = history_.size();
    head_ = (head_ + 1) % k;
    history_[head_] = p_.pw_W * x;
    history_[head_] += p_.pw_b;
    VectorX<Scalar> s = p_.conv_b;
    for (std::size_t j = 0; j < k; ++j) {
      const auto& a = history_[(head_ + k - j) % k];
      s += p_.conv_w.col(static_cast<Eigen::Index>(j)).cwiseProduct(a);
    }
    VectorX<Scalar> t = s.array().tanh().matrix();
    if (a_out) *a_out = history_[head_];
    VectorX<Scalar> y = x + t;
    if (tanh_out) *tanh_out = std::move(t);
    return y;
  }

 private:
  CausalBlockView<Scalar> p_;
  std::vector<VectorX<Scalar>> history_;
  std::size_t head_ = 0;
};

template <typename Scalar>
MatrixX<Scalar> causal_block_forward(const MatrixX<Scalar>& xs, const CausalBlockView<NoDeduce<Scalar>>& p,
                                     CausalBlockCache<NoDeduce<Scalar>>* cache = nullptr) {
  if (xs.rows() == 0) throw ShapeError("causal block: empty input sequence");
  CausalBlockStream<Scalar> stream(p);
  const Eigen::Index T = xs.rows();
  const Eigen::Index D = stream.dim();
  if (xs.cols() != D) throw ShapeError("causal block: input is " + shape_str(T, xs.cols()) + ", block dim " + std::to_string(D));
  MatrixX<Scalar> ys(T, D);
  if (cache) {
    cache->xs = xs;
    cache->as.resize(T, D);
    cache->tanh_s.resize(T, D);
  }
  VectorX<Scalar> a, t;
  for (Eigen::Index r = 0; r < T; ++r) {
    VectorX<Scalar> x = xs.row(r).transpose();
    ys.row(r) = stream.step(x, cache ? &a : nullptr, cache ? &t : nullptr).transpose();
    if (cache) {
      cache->as.row(r) = a.transpose();
      cache->tanh_s.row(r) = t.transpose();
    }
  }
  return ys;
}

// Returns dL/dxs and accumulates parameter gradients.
template <typename Scalar>
MatrixX<Scalar> causal_block_backward(const CausalBlockCache<Scalar>& cache, const CausalBlockView<NoDeduce<Scalar>>& p,
                                      const MatrixX<Scalar>& dys, CausalBlockGradView<NoDeduce<Scalar>>& g) {
  const Eigen::Index T = cache.xs.rows();
  const Eigen::Index D = cache.xs.cols();
  const Eigen::Index k = p.conv_w.cols();
  if (dys.rows() != T || dys.cols() != D) throw ShapeError("causal block backward: gradient is " + shape_str(dys.rows(), dys.cols()));
  MatrixX<Scalar> dxs = dys;  // residual path
  MatrixX<Scalar> das = MatrixX<Scalar>::Zero(T, D);
  for (Eigen::Index t = 0; t < T; ++t) {
    const VectorX<Scalar> ds =
        dys.row(t).transpose().cwiseProduct((Scalar(1) - cache.tanh_s.row(t).transpose().array().square()).matrix());
    g.conv_b += ds;
    for (Eigen::Index j = 0; j < k && t - j >= 0; ++j) {
      g.conv_w.col(j) += ds.cwiseProduct(cache.as.row(t - j).transpose());
      das.row(t - j) += ds.cwiseProduct(p.conv_w.col(j)).transpose();
    }
  }
  for (Eigen::Index t = 0; t < T; ++t) {
    const VectorX<Scalar> da = das.row(t).transpose();
    g.pw_W.noalias() += da * cache.xs.row(t);
    g.pw_b += da;
    dxs.row(t) += (p.pw_W.transpose() * da).transpose();
  }
  return dxs;
}

// ---------------------------------------------------------------------------
// Parameter store

struct Param {
  Tensor2 value;
  Tensor2 grad;
};

class ParamStore {
 public:
  using Map = std::map<std::string, Param>;

  Param& add(const std::string& path, Eigen::Index rows, Eigen::Index cols);
  bool contains(const std::string& path) const { return params_.count(path) != 0; }
  Param& at(const std::string& path);
  const Param& at(const std::string& path) const;

  const Tensor2& value(const std::string& path) const { return at(path).value; }
  Tensor2& value(const std::string& path) { return at(path).value; }
  Tensor2& grad(const std::string& path) { return at(path).grad; }
  const Tensor2& grad(const std::string& path) const { return at(path).grad; }

  // Column-vector views of (n x 1) parameters such as biases.
  Eigen::Map<const Vector> vec(const std::string& path) const;
  Eigen::Map<Vector> grad_vec(const std::string& path);

  void zero_grad();
  std::size_t size() const { return params_.size(); }
  std::size_t num_scalars() const;
  std::vector<std::string> paths() const;

  Map::iterator begin() { return params_.begin(); }
  Map::iterator end() { return params_.end(); }
  Map::const_iterator begin() const { return params_.begin(); }
  Map::const_iterator end() const { return params_.end(); }

  // Parameters whose path starts with `prefix`.
  ParamStore subset(const std::string& prefix) const;
  ParamStore without(const std::string& prefix) const;
  void merge(const ParamStore& other);

  // Bit-identical values (gradients are ignored).
  bool same_values(const ParamStore& other) const;

 private:
  Map params_;
};

// ---------------------------------------------------------------------------
// Finite-difference gradient checking

// Evaluates the loss and accumulates analytic gradients into the store.
using LossFn = std::function<Real(ParamStore&)>;

struct GradCheckEntry {
  std::string path;
  Real max_rel_error = 0;
  Eigen::Index worst_index = 0;
  Real analytic = 0;
  Real numeric = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  Real max_rel_error = 0;
  std::string worst_param;
  bool passed = false;
};

// |a - n| / max(|a|, |n|, floor)
Real relative_error(Real analytic, Real numeric, Real floor = 1e-6);

GradCheckReport grad_check(const LossFn& f, ParamStore& store, Real eps = 1e-5, Real tol = 1e-4);

// ---------------------------------------------------------------------------
// Checkpoint files: JSON with version, free-form metadata, per-parameter
// shape and row-major values, and an FNV-1a checksum over the values.

inline constexpr int kCheckpointVersion = 1;

struct CheckpointContents {
  ParamStore params;
  std::string metadata_json;  // "{}" when absent
};

std::string serialize_params(const ParamStore& store, const std::string& metadata_json = "{}");
CheckpointContents parse_params(const std::string& text);
void write_params(const std::filesystem::path& path, const ParamStore& store, const std::string& metadata_json = "{}");
CheckpointContents read_params(const std::filesystem::path& path);

std::uint64_t params_checksum(const ParamStore& store);

}  // namespace jointep

#endif  // JOINTEP_NETKIT_HPP_
