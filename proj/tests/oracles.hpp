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

// Slow reference implementations of the evaluation metrics. They walk every
// alignment or candidate explicitly and share no code with evalkit.

#ifndef JOINTEP_TESTS_ORACLES_HPP_
#define JOINTEP_TESTS_ORACLES_HPP_

#include <algorithm>
#include <climits>
#include <vector>

#include "jointep/evalkit.hpp"

namespace jointep::oracle {

struct Alignment {
  long cost = LONG_MAX;
  EditCounts counts;
};

// Best alignment of ref[0..i) with hyp[0..j) by plain recursion. Ties on the
// last operation go to diagonal, then deletion, then insertion.
inline Alignment align(const std::vector<int>& ref, const std::vector<int>& hyp, std::size_t i, std::size_t j) {
  if (i == 0 && j == 0) return {0, {}};
  Alignment best;
  auto consider = [&](Alignment a, long extra, int kind) {
    a.cost += extra;
    if (a.cost < best.cost) {
      if (kind == 0 && extra) ++a.counts.sub;
      if (kind == 1) ++a.counts.del;
      if (kind == 2) ++a.counts.ins;
      best = a;
    }
  };
  if (i > 0 && j > 0) consider(align(ref, hyp, i - 1, j - 1), ref[i - 1] != hyp[j - 1], 0);
  if (i > 0) consider(align(ref, hyp, i - 1, j), 1, 1);
  if (j > 0) consider(align(ref, hyp, i, j - 1), 1, 2);
  return best;
}

inline Alignment align(const std::vector<int>& ref, const std::vector<int>& hyp) {
  Alignment a = align(ref, hyp, ref.size(), hyp.size());
  a.counts.ref_words = static_cast<long>(ref.size());
  return a;
}

// Smallest member v such that at least percent% of the list is <= v.
inline long nearest_rank(const std::vector<long>& values, int percent) {
  long best = LONG_MAX;
  for (long v : values) {
    long at_most = 0;
    for (long u : values) at_most += u <= v;
    if (at_most * 100 >= static_cast<long>(percent) * static_cast<long>(values.size())) best = std::min(best, v);
  }
  return best;
}

// Points not weakly dominated by a different point, deduplicated, by WER.
inline std::vector<CurvePoint> envelope(const std::vector<SweepPoint>& pts) {
  std::vector<CurvePoint> out;
  for (const auto& p : pts) {
    const CurvePoint c{p.wer.wer, p.latency.ep50};
    bool dominated = false;
    for (const auto& q : pts) {
      const CurvePoint d{q.wer.wer, q.latency.ep50};
      if (d.wer <= c.wer && d.ep50 <= c.ep50 && !(d == c)) dominated = true;
    }
    if (!dominated && std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  }
  std::sort(out.begin(), out.end(), [](const CurvePoint& a, const CurvePoint& b) { return a.wer < b.wer; });
  return out;
}

}  // namespace jointep::oracle

#endif  // JOINTEP_TESTS_ORACLES_HPP_
