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

#ifndef JOINTEP_LOSSES_HPP_
#define JOINTEP_LOSSES_HPP_

#include <span>
#include <vector>

#include "jointep/common.hpp"
#include "jointep/corpus.hpp"

namespace jointep {

struct LossValue {
  Real value = 0;
};

// ---------------------------------------------------------------------------
// Frame-level cross entropy

struct CeResult {
  Real value = 0;
  Tensor2 d_logits;  // T x 4, (p - onehot) / T
};

// Mean over frames of -log p(label_t).
CeResult ce_loss(const EpPosterior& post, const FrameLabelSeq& labels);

// ---------------------------------------------------------------------------
// Transducer lattice. Node (t, u) means t encoder frames consumed up to the
// current one and u target tokens emitted; its row holds the log-distribution
// over all K output symbols. Emission log-probs are read at the source node
// and the path terminates with a blank out of (T-1, U).

struct RnntLattice {
  int T = 0;
  int U = 0;
  int K = 0;
  int blank = 0;
  Tensor2 log_probs;  // T*(U+1) rows, K columns

  RnntLattice() = default;
  RnntLattice(int frames, int target_len, int symbols, int blank_id);

  Eigen::Index node(int t, int u) const { return static_cast<Eigen::Index>(t) * (U + 1) + u; }
  Real at(int t, int u, int k) const { return log_probs(node(t, u), k); }
  Real& at(int t, int u, int k) { return log_probs(node(t, u), k); }

  // Every row must be a log-distribution (log-sum-exp = 0 within tol).
  void validate(Real tol = 1e-6) const;
};

struct RnntOptions {
  int eos = -1;            // reserved end-of-speech id, -1 if none
  bool allow_eos = false;  // permit eos inside targets (used for EOQ supervision)
};

inline constexpr Real kLogProbFloor = -60.0;

// -log P(Y|X) by forward recursion in log space.
Real rnnt_loss_dp(const RnntLattice& lattice, std::span<const int> targets, const RnntOptions& opts = {});

struct RnntForwardBackward {
  Real loss = 0;
  Tensor2 alpha;  // T x (U+1)
  Tensor2 beta;   // T x (U+1)
  Tensor2 grad;   // same shape as log_probs: d loss / d log_probs
};

RnntForwardBackward rnnt_forward_backward(const RnntLattice& lattice, std::span<const int> targets,
                                          const RnntOptions& opts = {});

// d loss / d log_probs, via alpha/beta occupancies.
Tensor2 rnnt_grad(const RnntLattice& lattice, std::span<const int> targets, const RnntOptions& opts = {});

struct BruteForceResult {
  Real loss = 0;
  long valid_paths = 0;
};

inline constexpr int kBruteForceMaxSteps = 12;

// Enumerates every symbol sequence with exactly T blanks ending in a blank and
// sums the probabilities of those whose blank-stripped form equals the
// targets. Limited to T + U <= 12.
BruteForceResult rnnt_loss_bruteforce(const RnntLattice& lattice, std::span<const int> targets,
                                      const RnntOptions& opts = {});

// ---------------------------------------------------------------------------
// Multitask combination

struct MultitaskLoss {
  Real value = 0;
  Real asr_weight = 0;
  Real ep_weight = 0;
};

MultitaskLoss multitask_loss(LossValue l_asr, LossValue l_ep, Real lambda);

}  // namespace jointep

#endif  // JOINTEP_LOSSES_HPP_
