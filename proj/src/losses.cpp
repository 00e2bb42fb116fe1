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

#include "jointep/losses.hpp"

#include <cmath>
#include <limits>

namespace jointep {

namespace {

constexpr Real kNegInf = -std::numeric_limits<Real>::infinity();

Real log_add(Real a, Real b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

void check_targets(const RnntLattice& lat, std::span<const int> targets, const RnntOptions& opts) {
  if (lat.T <= 0) throw ValidationError("rnnt: lattice has no encoder frames (T=0)");
  if (static_cast<int>(targets.size()) != lat.U)
    throw ShapeError("rnnt: lattice has U=" + std::to_string(lat.U) + " but " + std::to_string(targets.size()) +
                     " targets");
  if (lat.log_probs.rows() != static_cast<Eigen::Index>(lat.T) * (lat.U + 1) || lat.log_probs.cols() != lat.K)
    throw ShapeError("rnnt: log_probs is " + shape_str(lat.log_probs.rows(), lat.log_probs.cols()));
  for (int tok : targets) {
    if (tok < 0 || tok >= lat.K) throw ValidationError("rnnt: target " + std::to_string(tok) + " out of range");
    if (tok == lat.blank) throw ValidationError("rnnt: target sequence contains the blank symbol");
    if (tok == opts.eos && !opts.allow_eos) throw ValidationError("rnnt: target sequence contains </s>");
  }
}

Real clamped(Real lp) { return lp < kLogProbFloor ? kLogProbFloor : lp; }

}  // namespace

CeResult ce_loss(const EpPosterior& post, const FrameLabelSeq& labels) {
  const Eigen::Index T = post.rows();
  if (T != static_cast<Eigen::Index>(labels.size()))
    throw ShapeError("ce_loss: " + std::to_string(T) + " posterior rows vs " + std::to_string(labels.size()) +
                     " labels");
  if (T == 0) throw ShapeError("ce_loss: empty sequence");
  CeResult out;
  out.d_logits = post;
  Real sum = 0;
  for (Eigen::Index t = 0; t < T; ++t) {
    const int y = static_cast<int>(labels[static_cast<std::size_t>(t)]);
    const Real p = post(t, y);
    sum -= p > 0 ? std::max(std::log(p), kLogProbFloor) : kLogProbFloor;
    out.d_logits(t, y) -= 1.0;
  }
  out.value = sum / static_cast<Real>(T);
  out.d_logits /= static_cast<Real>(T);
  return out;
}

RnntLattice::RnntLattice(int frames, int target_len, int symbols, int blank_id)
    : T(frames), U(target_len), K(symbols), blank(blank_id),
      log_probs(Tensor2::Zero(static_cast<Eigen::Index>(frames) * (target_len + 1), symbols)) {
  if (frames < 0 || target_len < 0 || symbols < 2 || blank_id < 0 || blank_id >= symbols)
    throw ShapeError("rnnt lattice: invalid dimensions");
}

void RnntLattice::validate(Real tol) const {
  for (Eigen::Index r = 0; r < log_probs.rows(); ++r) {
    const Real m = log_probs.row(r).maxCoeff();
    const Real lse = m + std::log((log_probs.row(r).array() - m).exp().sum());
    if (!(std::abs(lse) <= tol)) throw ValidationError("rnnt lattice row " + std::to_string(r) + " is not normalized");
  }
}

Real rnnt_loss_dp(const RnntLattice& lat, std::span<const int> targets, const RnntOptions& opts) {
  check_targets(lat, targets, opts);
  const int T = lat.T;
  const int U = lat.U;
  std::vector<Real> alpha(static_cast<std::size_t>(T) * (U + 1), kNegInf);
  auto A = [&](int t, int u) -> Real& { return alpha[static_cast<std::size_t>(t) * (U + 1) + u]; };
  A(0, 0) = 0;
  for (int t = 0; t < T; ++t) {
    for (int u = 0; u <= U; ++u) {
      if (t == 0 && u == 0) continue;
      Real a = kNegInf;
      if (t > 0) a = A(t - 1, u) + clamped(lat.at(t - 1, u, lat.blank));
      if (u > 0) a = log_add(a, A(t, u - 1) + clamped(lat.at(t, u - 1, targets[u - 1])));
      A(t, u) = a;
    }
  }
  return -(A(T - 1, U) + clamped(lat.at(T - 1, U, lat.blank)));
}

RnntForwardBackward rnnt_forward_backward(const RnntLattice& lat, std::span<const int> targets,
                                          const RnntOptions& opts) {
  check_targets(lat, targets, opts);
  const int T = lat.T;
  const int U = lat.U;
  RnntForwardBackward out;
  out.alpha = Tensor2::Constant(T, U + 1, kNegInf);
  out.beta = Tensor2::Constant(T, U + 1, kNegInf);
  auto& alpha = out.alpha;
  auto& beta = out.beta;

  alpha(0, 0) = 0;
  for (int t = 0; t < T; ++t) {
    for (int u = 0; u <= U; ++u) {
      if (t == 0 && u == 0) continue;
      Real a = kNegInf;
      if (t > 0) a = alpha(t - 1, u) + clamped(lat.at(t - 1, u, lat.blank));
      if (u > 0) a = log_add(a, alpha(t, u - 1) + clamped(lat.at(t, u - 1, targets[u - 1])));
      alpha(t, u) = a;
    }
  }

  beta(T - 1, U) = clamped(lat.at(T - 1, U, lat.blank));
  for (int t = T - 1; t >= 0; --t) {
    for (int u = U; u >= 0; --u) {
      if (t == T - 1 && u == U) continue;
      Real b = kNegInf;
      if (t < T - 1) b = beta(t + 1, u) + clamped(lat.at(t, u, lat.blank));
      if (u < U) b = log_add(b, beta(t, u + 1) + clamped(lat.at(t, u, targets[u])));
      beta(t, u) = b;
    }
  }

  const Real log_p = beta(0, 0);
  out.loss = -log_p;
  out.grad = Tensor2::Zero(lat.log_probs.rows(), lat.K);
  auto occupancy = [&](int t, int u, int k, Real next_beta) {
    const Real lp = lat.at(t, u, k);
    if (lp < kLogProbFloor || next_beta == kNegInf || alpha(t, u) == kNegInf) return Real(0);
    return -std::exp(alpha(t, u) + lp + next_beta - log_p);
  };
  for (int t = 0; t < T; ++t) {
    for (int u = 0; u <= U; ++u) {
      const Eigen::Index n = lat.node(t, u);
      if (t < T - 1)
        out.grad(n, lat.blank) = occupancy(t, u, lat.blank, beta(t + 1, u));
      else if (u == U)
        out.grad(n, lat.blank) = occupancy(t, u, lat.blank, 0.0);
      if (u < U) out.grad(n, targets[u]) += occupancy(t, u, targets[u], beta(t, u + 1));
    }
  }
  return out;
}

Tensor2 rnnt_grad(const RnntLattice& lattice, std::span<const int> targets, const RnntOptions& opts) {
  return rnnt_forward_backward(lattice, targets, opts).grad;
}

BruteForceResult rnnt_loss_bruteforce(const RnntLattice& lat, std::span<const int> targets, const RnntOptions& opts) {
  check_targets(lat, targets, opts);
  const int T = lat.T;
  const int U = lat.U;
  const int L = T + U;
  if (L > kBruteForceMaxSteps)
    throw ValidationError("rnnt_loss_bruteforce: T+U=" + std::to_string(L) + " exceeds " +
                          std::to_string(kBruteForceMaxSteps) + "; use rnnt_loss_dp");

  std::vector<int> non_blank;
  for (int k = 0; k < lat.K; ++k)
    if (k != lat.blank) non_blank.push_back(k);
  const int nb = static_cast<int>(non_blank.size());

  BruteForceResult out;
  Real log_total = kNegInf;
  std::vector<int> seq(static_cast<std::size_t>(L), lat.blank);
  std::vector<int> emit_pos;

  // Visit every sequence of length L ending in blank with exactly U
  // non-blank symbols, each drawn from the full non-blank alphabet.
  auto visit_symbols = [&]() {
    if (U > 0 && nb == 0) return;
    std::vector<int> digit(static_cast<std::size_t>(U), 0);
    while (true) {
      for (int i = 0; i < L; ++i) seq[static_cast<std::size_t>(i)] = lat.blank;
      for (int i = 0; i < U; ++i) seq[static_cast<std::size_t>(emit_pos[static_cast<std::size_t>(i)])] = non_blank[static_cast<std::size_t>(digit[static_cast<std::size_t>(i)])];
      std::vector<int> stripped;
      for (int s : seq)
        if (s != lat.blank) stripped.push_back(s);
      const bool valid = std::equal(stripped.begin(), stripped.end(), targets.begin(), targets.end());
      if (valid) {
        Real lp = 0;
        int t = 0;
        int u = 0;
        for (int s : seq) {
          lp += lat.at(t, u, s);
          if (s == lat.blank)
            ++t;
          else
            ++u;
        }
        log_total = log_add(log_total, lp);
        ++out.valid_paths;
      }
      int i = U - 1;
      while (i >= 0 && ++digit[static_cast<std::size_t>(i)] == nb) digit[static_cast<std::size_t>(i--)] = 0;
      if (i < 0) break;
    }
  };

  // Choose U emission positions among the first L-1 slots.
  auto choose = [&](auto&& self, int start, int remaining) -> void {
    if (remaining == 0) {
      visit_symbols();
      return;
    }
    for (int p = start; p <= L - 1 - remaining; ++p) {
      emit_pos.push_back(p);
      self(self, p + 1, remaining - 1);
      emit_pos.pop_back();
    }
  };
  choose(choose, 0, U);
  out.loss = -log_total;
  return out;
}

MultitaskLoss multitask_loss(LossValue l_asr, LossValue l_ep, Real lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("multitask lambda must be in [0,1], got " + std::to_string(lambda));
  MultitaskLoss out;
  out.asr_weight = lambda;
  out.ep_weight = 1.0 - lambda;
  out.value = lambda * l_asr.value + (1.0 - lambda) * l_ep.value;
  return out;
}

}  // namespace jointep
