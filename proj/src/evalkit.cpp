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

#include "jointep/evalkit.hpp"

#include <cstdio>
#include <fstream>

namespace jointep {

WerBreakdown finalize_wer(const EditCounts& c) {
  if (c.ref_words <= 0) throw ValidationError("wer: no reference words");
  WerBreakdown out;
  out.counts = c;
  const Real n = static_cast<Real>(c.ref_words);
  out.del_rate = 100.0 * static_cast<Real>(c.del) / n;
  out.ins_rate = 100.0 * static_cast<Real>(c.ins) / n;
  out.sub_rate = 100.0 * static_cast<Real>(c.sub) / n;
  out.wer = 100.0 * static_cast<Real>(c.del + c.ins + c.sub) / n;
  return out;
}

EndpointLatency endpoint_latency(const SessionResult& session, const UtteranceRecord& utt) {
  if (utt.segments.empty()) throw ValidationError(utt.id + ": no speech, endpoint latency is undefined");
  const long gt_end = utt.segments.back().end_ms;
  EndpointLatency out;
  out.endpointed = session.event.has_value();
  const long endpoint_ms = out.endpointed ? session.event->endpoint_ms : static_cast<long>(utt.duration_ms());
  out.latency_ms = endpoint_ms - gt_end;
  out.cutoff = out.latency_ms < 0;
  return out;
}

long nearest_rank(std::vector<long> values, int percent) {
  if (values.empty()) throw ValidationError("percentile of an empty list");
  if (percent <= 0 || percent > 100) throw ConfigError("percentile must be in (0,100]");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  const std::size_t rank = (static_cast<std::size_t>(percent) * n + 99) / 100;
  return values[rank - 1];
}

LatencyStats latency_stats(const std::vector<long>& latencies) {
  if (latencies.empty()) throw ValidationError("latency_stats: empty latency list");
  LatencyStats s;
  s.latencies = latencies;
  s.ep50 = nearest_rank(latencies, 50);
  s.ep90 = nearest_rank(latencies, 90);
  s.cutoff_count = std::count_if(latencies.begin(), latencies.end(), [](long v) { return v < 0; });
  return s;
}

Real speech_pct(const std::vector<SessionTrace>& traces) {
  long total = 0;
  long kept = 0;
  for (const auto& tr : traces) {
    total += static_cast<long>(tr.size());
    for (const auto& r : tr) kept += !r.filtered;
  }
  if (total == 0) throw ValidationError("speech_pct: no frames");
  return static_cast<Real>(kept) / static_cast<Real>(total);
}

Real speech_pct(const std::vector<SessionResult>& sessions) {
  long total = 0;
  long kept = 0;
  for (const auto& s : sessions) {
    total += s.total_frames;
    for (const auto& r : s.trace) kept += !r.filtered;
  }
  if (total == 0) throw ValidationError("speech_pct: no frames");
  return static_cast<Real>(kept) / static_cast<Real>(total);
}

CorpusEvaluation evaluate_corpus(StreamingModel& model, const std::vector<UtteranceRecord>& corpus, Mode mode,
                                 const Thresholds& th, const SessionOptions& opts) {
  if (corpus.empty()) throw ValidationError("evaluation corpus is empty");
  CorpusEvaluation out;
  EditCounts counts;
  std::vector<long> latencies;
  for (const auto& utt : corpus) {
    SessionResult r = run_session(utt, mode, th, model, opts);
    counts += edit_counts<int>(utt.target_tokens, r.hypothesis);
    if (mode == Mode::ShortQuery && !utt.segments.empty()) latencies.push_back(endpoint_latency(r, utt).latency_ms);
    out.sessions.push_back(std::move(r));
  }
  if (counts.ref_words > 0) out.wer = finalize_wer(counts);
  if (!latencies.empty()) out.latency = latency_stats(latencies);
  out.speech_pct = speech_pct(out.sessions);
  return out;
}

void SweepGrid::validate() const {
  if (theta_eoq.empty() || theta_eos.empty() || wait_ms.empty()) throw ConfigError("sweep grid is empty");
  for (Real v : theta_eoq)
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("sweep grid: theta_eoq out of [0,1]");
  for (Real v : theta_eos)
    if (!(v >= 0.0)) throw ConfigError("sweep grid: theta_eos must be non-negative");
  for (long v : wait_ms)
    if (v < 0) throw ConfigError("sweep grid: wait_ms must be non-negative");
}

SweepGrid default_sweep_grid() {
  SweepGrid g;
  g.theta_eoq = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 1.0};
  g.theta_eos = {0.0, 0.3, 0.7, 1.2, 2.0};
  g.wait_ms = {0, 60, 120};
  return g;
}

std::size_t select_point(const std::vector<SweepPoint>& points, Real wer_budget) {
  if (points.empty()) throw ValidationError("select_point: no sweep points");
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!(p.wer.wer <= wer_budget)) continue;
    if (!best) {
      best = i;
      continue;
    }
    const auto& b = points[*best];
    if (p.latency.ep50 < b.latency.ep50 || (p.latency.ep50 == b.latency.ep50 && p.latency.ep90 < b.latency.ep90))
      best = i;
  }
  if (!best) {
    std::size_t lowest = 0;
    for (std::size_t i = 1; i < points.size(); ++i)
      if (points[i].wer.wer < points[lowest].wer.wer) lowest = i;
    char buf[128];
    std::snprintf(buf, sizeof buf, "no sweep point meets the WER budget %.4g (best WER %.4g)", wer_budget,
                  points[lowest].wer.wer);
    throw BudgetError(buf, points[lowest]);
  }
  return *best;
}

std::vector<SweepPoint> evaluate_grid(const SweepGrid& grid, const std::vector<UtteranceRecord>& corpus,
                                      StreamingModel& model, const SessionOptions& opts) {
  grid.validate();
  std::vector<SweepPoint> points;
  points.reserve(grid.size());
  for (Real eoq : grid.theta_eoq) {
    for (Real eos : grid.theta_eos) {
      for (long w : grid.wait_ms) {
        const Thresholds th{grid.theta_vad, eoq, eos, w};
        CorpusEvaluation ev = evaluate_corpus(model, corpus, Mode::ShortQuery, th, opts);
        points.push_back(SweepPoint{th, ev.wer, ev.latency, ev.speech_pct});
      }
    }
  }
  return points;
}

SweepResult sweep(const SweepGrid& grid, const std::vector<UtteranceRecord>& corpus, StreamingModel& model,
                  Real wer_budget, const SessionOptions& opts) {
  SweepResult out;
  out.wer_budget = wer_budget;
  out.points = evaluate_grid(grid, corpus, model, opts);
  out.selected = select_point(out.points, wer_budget);
  return out;
}

std::vector<CurvePoint> tradeoff_curve(const std::vector<SweepPoint>& points) {
  std::vector<CurvePoint> all;
  for (const auto& p : points) all.push_back({p.wer.wer, p.latency.ep50});
  std::sort(all.begin(), all.end(), [](const CurvePoint& a, const CurvePoint& b) {
    return a.wer < b.wer || (a.wer == b.wer && a.ep50 < b.ep50);
  });
  std::vector<CurvePoint> out;
  for (const auto& c : all)
    if (out.empty() || c.ep50 < out.back().ep50) out.push_back(c);
  return out;
}

namespace {

std::string fmt9(Real v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string format_sweep_csv(const std::vector<SweepPoint>& points) {
  std::string out = "theta_eoq,theta_eos,w_ms,wer,del,ins,sub,ep50_ms,ep90_ms,speech_pct,cutoffs\n";
  for (const auto& p : points) {
    out += fmt9(p.thresholds.theta_eoq) + ',' + fmt9(p.thresholds.theta_eos) + ',' +
           std::to_string(p.thresholds.wait_ms) + ',' + fmt9(p.wer.wer) + ',' + fmt9(p.wer.del_rate) + ',' +
           fmt9(p.wer.ins_rate) + ',' + fmt9(p.wer.sub_rate) + ',' + std::to_string(p.latency.ep50) + ',' +
           std::to_string(p.latency.ep90) + ',' + fmt9(p.speech_pct) + ',' + std::to_string(p.latency.cutoff_count) +
           '\n';
  }
  return out;
}

std::string format_curve_csv(const std::vector<CurvePoint>& curve) {
  std::string out = "wer,ep50_ms\n";
  for (const auto& c : curve) out += fmt9(c.wer) + ',' + std::to_string(c.ep50) + '\n';
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace jointep
