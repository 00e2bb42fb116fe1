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

#ifndef JOINTEP_EVALKIT_HPP_
#define JOINTEP_EVALKIT_HPP_

#include <algorithm>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "jointep/corpus.hpp"
#include "jointep/runtime.hpp"

namespace jointep {

// ---------------------------------------------------------------------------
// Word error rate

struct EditCounts {
  long del = 0;
  long ins = 0;
  long sub = 0;
  long ref_words = 0;

  EditCounts& operator+=(const EditCounts& o) {
    del += o.del;
    ins += o.ins;
    sub += o.sub;
    ref_words += o.ref_words;
    return *this;
  }
  bool operator==(const EditCounts&) const = default;
};

// Rates are percentages of ref_words.
struct WerBreakdown {
  EditCounts counts;
  Real wer = 0;
  Real del_rate = 0;
  Real ins_rate = 0;
  Real sub_rate = 0;
};

// Throws ValidationError when ref_words is zero.
WerBreakdown finalize_wer(const EditCounts& counts);

// Unit-cost Levenshtein alignment. The backtrace prefers the diagonal (match
// or substitution), then deletion, then insertion. An empty ref is allowed.
template <typename T>
EditCounts edit_counts(std::span<const T> ref, std::span<const T> hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  std::vector<long> d((n + 1) * (m + 1));
  auto D = [&](std::size_t i, std::size_t j) -> long& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) D(i, 0) = static_cast<long>(i);
  for (std::size_t j = 0; j <= m; ++j) D(0, j) = static_cast<long>(j);
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      D(i, j) = std::min({D(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1), D(i - 1, j) + 1, D(i, j - 1) + 1});
  EditCounts c;
  c.ref_words = static_cast<long>(n);
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && D(i, j) == D(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      if (ref[i - 1] != hyp[j - 1]) ++c.sub;
      --i;
      --j;
    } else if (i > 0 && D(i, j) == D(i - 1, j) + 1) {
      ++c.del;
      --i;
    } else {
      ++c.ins;
      --j;
    }
  }
  return c;
}

template <typename T>
WerBreakdown wer(std::span<const T> ref, std::span<const T> hyp) {
  if (ref.empty()) throw ValidationError("wer: empty reference");
  return finalize_wer(edit_counts(ref, hyp));
}

template <typename T>
WerBreakdown wer(const std::vector<T>& ref, const std::vector<T>& hyp) {
  return wer(std::span<const T>(ref), std::span<const T>(hyp));
}

// ---------------------------------------------------------------------------
// Latency

struct EndpointLatency {
  long latency_ms = 0;
  bool cutoff = false;      // endpoint before the ground-truth end
  bool endpointed = false;  // false: the no-endpoint sentinel was used
};

// Ground-truth end is the end of the last word segment. Without an endpoint
// the latency is the utterance duration minus that end.
EndpointLatency endpoint_latency(const SessionResult& session, const UtteranceRecord& utt);

struct LatencyStats {
  std::vector<long> latencies;
  long ep50 = 0;
  long ep90 = 0;
  long cutoff_count = 0;
};

// Nearest rank: the value at index ceil(p * n / 100) - 1 of the sorted list.
long nearest_rank(std::vector<long> values, int percent);
LatencyStats latency_stats(const std::vector<long>& latencies);

// Unfiltered trace rows over all rows.
Real speech_pct(const std::vector<SessionTrace>& traces);
// Unfiltered frames over all input frames, counting frames after End as not
// processed.
Real speech_pct(const std::vector<SessionResult>& sessions);

// ---------------------------------------------------------------------------
// Corpus evaluation

struct CorpusEvaluation {
  WerBreakdown wer;
  LatencyStats latency;  // ShortQuery only
  Real speech_pct = 0;
  std::vector<SessionResult> sessions;
};

CorpusEvaluation evaluate_corpus(StreamingModel& model, const std::vector<UtteranceRecord>& corpus, Mode mode,
                                 const Thresholds& th, const SessionOptions& opts = {});

// ---------------------------------------------------------------------------
// Sweep and tradeoff curve

struct SweepGrid {
  std::vector<Real> theta_eoq;
  std::vector<Real> theta_eos;
  std::vector<long> wait_ms;
  Real theta_vad = 0.5;

  void validate() const;
  std::size_t size() const { return theta_eoq.size() * theta_eos.size() * wait_ms.size(); }
};

SweepGrid default_sweep_grid();

struct SweepPoint {
  Thresholds thresholds;
  WerBreakdown wer;
  LatencyStats latency;
  Real speech_pct = 0;
};

struct SweepResult {
  std::vector<SweepPoint> points;  // grid order: theta_eoq, theta_eos, wait_ms
  std::size_t selected = 0;
  Real wer_budget = 0;
};

class BudgetError : public Error {
 public:
  BudgetError(const std::string& what, SweepPoint best) : Error(what), best_(std::move(best)) {}
  const SweepPoint& best() const { return best_; }

 private:
  SweepPoint best_;
};

// Among points with wer <= budget, the lexicographic minimum of (ep50, ep90);
// ties keep the earliest point. Throws BudgetError carrying the lowest-WER
// point when none qualifies.
std::size_t select_point(const std::vector<SweepPoint>& points, Real wer_budget);

// Every grid tuple in grid order, without selection.
std::vector<SweepPoint> evaluate_grid(const SweepGrid& grid, const std::vector<UtteranceRecord>& corpus,
                                      StreamingModel& model, const SessionOptions& opts = {});

SweepResult sweep(const SweepGrid& grid, const std::vector<UtteranceRecord>& corpus, StreamingModel& model,
                  Real wer_budget, const SessionOptions& opts = {});

struct CurvePoint {
  Real wer = 0;
  long ep50 = 0;
  bool operator==(const CurvePoint&) const = default;
};

// Lower envelope: points (wer, ep50) not dominated by any other point, sorted
// by increasing WER; ep50 strictly decreases along it.
std::vector<CurvePoint> tradeoff_curve(const std::vector<SweepPoint>& points);

std::string format_sweep_csv(const std::vector<SweepPoint>& points);
std::string format_curve_csv(const std::vector<CurvePoint>& curve);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace jointep

#endif  // JOINTEP_EVALKIT_HPP_
