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

#include "jointep/runtime.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

namespace jointep {

namespace {

constexpr int kSpeech = static_cast<int>(SpeechClass::Speech);
constexpr int kFinal = static_cast<int>(SpeechClass::FinalSilence);
constexpr std::size_t kLatentCacheSize = 64;

}  // namespace

std::string_view to_string(Mode m) { return m == Mode::ShortQuery ? "short" : "continuous"; }

std::string_view to_string(FsmState s) {
  switch (s) {
    case FsmState::EpOnly: return "EpOnly";
    case FsmState::AsrPlusEp: return "AsrPlusEp";
    case FsmState::End: return "End";
  }
  return "?";
}

std::string_view to_string(EoqSource s) { return s == EoqSource::Acoustic ? "acoustic" : "decoder"; }

Mode parse_mode(std::string_view name) {
  if (name == "short") return Mode::ShortQuery;
  if (name == "continuous") return Mode::Continuous;
  throw ConfigError("unknown mode '" + std::string(name) + "' (expected short or continuous)");
}

void Thresholds::validate() const {
  if (!(theta_vad >= 0.0 && theta_vad <= 1.0)) throw ConfigError("theta_vad must be in [0,1]");
  if (!(theta_eoq >= 0.0 && theta_eoq <= 1.0)) throw ConfigError("theta_eoq must be in [0,1]");
  if (!(theta_eos >= 0.0) || std::isinf(theta_eos)) throw ConfigError("theta_eos must be a non-negative real");
  if (wait_ms < 0) throw ConfigError("wait_ms must be non-negative");
}

EndpointDecision declare_endpoint(const PosteriorRow& acoustic, std::optional<Real> decoder_cost,
                                  const Thresholds& th, long now_ms, const std::optional<EoqEvent>& pending) {
  EndpointDecision d;
  d.fired_acoustic = acoustic(kFinal) > th.theta_eoq;
  d.fired_decoder = decoder_cost.has_value() && *decoder_cost < th.theta_eos;
  d.pending = pending;
  if (!d.pending && (d.fired_acoustic || d.fired_decoder)) {
    const EoqSource src = d.fired_acoustic ? EoqSource::Acoustic : EoqSource::Decoder;
    d.pending = EoqEvent{src, now_ms, now_ms + th.wait_ms};
  }
  d.endpoint = d.pending.has_value() && now_ms >= d.pending->endpoint_ms;
  return d;
}

// ---------------------------------------------------------------------------
// Greedy decoding

Real eos_cost(const Vector& joint_logits, const ModelConfig& cfg) {
  const Vector lp = log_softmax(joint_logits);
  return -lp(cfg.eos_id());
}

GreedyDecoder::GreedyDecoder(const ParamStore& store, const ModelConfig& cfg) : store_(&store), cfg_(cfg) {}

void GreedyDecoder::reset() {
  ctx_ = {kStartToken, kStartToken};
  tokens_.clear();
}

Real GreedyDecoder::step(const Vector& enc) {
  const int blank = cfg_.blank_id();
  const int eos = cfg_.eos_id();
  Real cost = std::numeric_limits<Real>::infinity();
  for (int n = 0;; ++n) {
    const Vector lp = log_softmax(joint_logits(*store_, cfg_, enc, ctx_));
    cost = std::min(cost, -lp(eos));
    if (n == kMaxSymbolsPerFrame) return cost;
    Eigen::Index best = 0;
    lp.maxCoeff(&best);
    if (best == blank) return cost;
    // </s> advances the prediction context as in training but is not part
    // of the hypothesis.
    if (best != eos) tokens_.push_back(static_cast<int>(best));
    ctx_ = {ctx_[1], static_cast<int>(best)};
  }
}

// ---------------------------------------------------------------------------
// Neural backend

EpRouting default_routing(Arm arm) {
  switch (arm) {
    case Arm::B1:
    case Arm::E1: return EpRouting::AudioOnly;
    case Arm::E2: return EpRouting::LatentOnly;
    case Arm::E3: return EpRouting::Switch;
  }
  return EpRouting::Switch;
}

NeuralBackend::NeuralBackend(const ModelSet& model, EpRouting routing)
    : model_(&model), routing_(routing), decoder_(model.params, model.config) {
  check_params(model.params, model.config, true, true);
  reset();
}

void NeuralBackend::reset() {
  encoder_.emplace(model_->params, model_->config);
  trunk_.emplace(model_->params, model_->config);
  ep_.emplace(model_->params, model_->config);
  decoder_.reset();
  latents_.clear();
  last_source_ = SwitchSource::AudioFrames;
  encoder_frames_ = 0;
  asr_frames_ = 0;
}

const Vector& NeuralBackend::latent_for(const FeatureFrame& frame) {
  for (auto it = latents_.rbegin(); it != latents_.rend(); ++it)
    if (it->first == frame.t_index) return it->second;
  latents_.emplace_back(frame.t_index, encoder_->step(frame.features));
  ++encoder_frames_;
  if (latents_.size() > kLatentCacheSize) latents_.pop_front();
  return latents_.back().second;
}

PosteriorRow NeuralBackend::ep_filter_step(const FeatureFrame& frame) {
  if (routing_ == EpRouting::LatentOnly) {
    last_source_ = SwitchSource::SharedLatent;
    return ep_->step(latent_for(frame), last_source_);
  }
  last_source_ = SwitchSource::AudioFrames;
  return ep_->step(frame.features, last_source_);
}

PosteriorRow NeuralBackend::ep_active_step(const FeatureFrame& frame) {
  if (routing_ == EpRouting::AudioOnly) {
    last_source_ = SwitchSource::AudioFrames;
    return ep_->step(frame.features, last_source_);
  }
  last_source_ = SwitchSource::SharedLatent;
  return ep_->step(latent_for(frame), last_source_);
}

std::optional<Real> NeuralBackend::asr_step(const FeatureFrame& frame) {
  const Vector latent = latent_for(frame);
  ++asr_frames_;
  if (auto enc = trunk_->push(latent)) return decoder_.step(*enc);
  return std::nullopt;
}

void NeuralBackend::finish() {
  if (auto enc = trunk_->flush()) decoder_.step(*enc);
}

// ---------------------------------------------------------------------------
// Scripted backend

ScriptedBackend::ScriptedBackend(std::vector<ScriptFrame> script) : script_(std::move(script)) {}

void ScriptedBackend::reset() {
  forwarded_.clear();
  last_source_ = SwitchSource::AudioFrames;
}

const ScriptFrame& ScriptedBackend::at(const FeatureFrame& frame) const {
  if (frame.t_index < 0 || static_cast<std::size_t>(frame.t_index) >= script_.size())
    throw ValidationError("script has no entry for frame " + std::to_string(frame.t_index));
  return script_[static_cast<std::size_t>(frame.t_index)];
}

PosteriorRow ScriptedBackend::ep_filter_step(const FeatureFrame& frame) {
  last_source_ = SwitchSource::AudioFrames;
  return at(frame).posterior;
}

PosteriorRow ScriptedBackend::ep_active_step(const FeatureFrame& frame) {
  last_source_ = SwitchSource::SharedLatent;
  return at(frame).posterior;
}

std::optional<Real> ScriptedBackend::asr_step(const FeatureFrame& frame) {
  forwarded_.push_back(frame.t_index);
  return at(frame).eos_cost;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Real parse_real(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const Real v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw ValidationError(where + ": bad number '" + s + "'");
  return v;
}

long parse_long(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size()) throw ValidationError(where + ": bad integer '" + s + "'");
  return v;
}

bool parse_flag(const std::string& s, const std::string& where) {
  if (s == "0") return false;
  if (s == "1") return true;
  throw ValidationError(where + ": bad flag '" + s + "'");
}

std::vector<std::string> lines_of(std::string_view text) {
  std::vector<std::string> lines;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt9(Real v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::vector<ScriptFrame> parse_script(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines[0] != "t_index,p_speech,p_initial,p_intermediate,p_final,eos_cost")
    throw ValidationError("script: missing or unexpected header");
  std::vector<ScriptFrame> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string where = "script line " + std::to_string(i + 1);
    const auto cells = split_csv(lines[i]);
    if (cells.size() != 6) throw ValidationError(where + ": expected 6 columns");
    if (parse_long(cells[0], where) != static_cast<long>(out.size()))
      throw ValidationError(where + ": frame indices must be consecutive from 0");
    ScriptFrame f;
    for (int k = 0; k < 4; ++k) f.posterior(k) = parse_real(cells[static_cast<std::size_t>(k + 1)], where);
    if (!cells[5].empty()) f.eos_cost = parse_real(cells[5], where);
    out.push_back(f);
  }
  return out;
}

std::vector<ScriptFrame> read_script(const std::filesystem::path& path) { return parse_script(slurp(path)); }

// ---------------------------------------------------------------------------
// Sessions

bool TraceRow::operator==(const TraceRow& o) const {
  return t_ms == o.t_ms && fsm_state == o.fsm_state && source == o.source && posterior == o.posterior &&
         eos_cost == o.eos_cost && filtered == o.filtered && fired_acoustic == o.fired_acoustic &&
         fired_decoder == o.fired_decoder && endpoint == o.endpoint;
}

SessionState initial_state(Mode mode, int frame_period_ms) {
  if (frame_period_ms <= 0) throw ConfigError("frame period must be positive");
  SessionState s;
  s.mode = mode;
  s.frame_period_ms = frame_period_ms;
  return s;
}

TraceRow step(const FeatureFrame& frame, SessionState& s, const Thresholds& th, StreamingModel& model,
              const SessionOptions& opts) {
  if (s.fsm_state == FsmState::End) throw ValidationError("step called after the session reached End");
  TraceRow row;
  row.t_ms = frame.t_ms;
  row.fsm_state = s.fsm_state;
  const long now_ms = static_cast<long>(frame.t_ms) + s.frame_period_ms;

  if (s.fsm_state == FsmState::EpOnly) {
    row.posterior = model.ep_filter_step(frame);
    row.source = model.last_source();
    if (row.posterior(kSpeech) > th.theta_vad) {
      // The triggering frame itself goes to the ASR side, after any replay.
      for (const auto& f : s.prepend) model.asr_step(f);
      s.prepend.clear();
      row.eos_cost = model.asr_step(frame);
      row.filtered = false;
      s.fsm_state = FsmState::AsrPlusEp;
    } else {
      row.filtered = true;
      if (opts.prepend_frames > 0) {
        s.prepend.push_back(frame);
        while (s.prepend.size() > static_cast<std::size_t>(opts.prepend_frames)) s.prepend.pop_front();
      }
    }
    return row;
  }

  row.eos_cost = model.asr_step(frame);
  row.posterior = model.ep_active_step(frame);
  row.source = model.last_source();
  if (s.mode == Mode::ShortQuery) {
    const EndpointDecision d = declare_endpoint(row.posterior, row.eos_cost, th, now_ms, s.pending);
    row.fired_acoustic = d.fired_acoustic;
    row.fired_decoder = d.fired_decoder;
    s.pending = d.pending;
    if (d.endpoint) {
      row.endpoint = true;
      s.fsm_state = FsmState::End;
    }
  } else if (row.posterior(kSpeech) < th.theta_vad) {
    s.fsm_state = FsmState::EpOnly;
  }
  return row;
}

SessionResult run_session(const UtteranceRecord& utt, Mode mode, const Thresholds& th, StreamingModel& model,
                          const SessionOptions& opts) {
  th.validate();
  if (opts.prepend_frames < 0) throw ConfigError("prepend_frames must be non-negative");
  SessionResult out;
  SessionState s = initial_state(mode, utt.frame_period_ms);
  model.reset();
  out.trace.reserve(static_cast<std::size_t>(utt.num_frames()));
  for (int t = 0; t < utt.num_frames(); ++t) {
    out.trace.push_back(step(utt.frame(t), s, th, model, opts));
    if (s.fsm_state == FsmState::End) break;
  }
  model.finish();
  out.hypothesis = model.hypothesis();
  if (mode == Mode::ShortQuery) out.event = s.pending;
  out.total_frames = utt.num_frames();
  out.duration_ms = utt.duration_ms();
  return out;
}

// ---------------------------------------------------------------------------
// Trace CSV

const char* const kTraceColumns[12] = {"t_ms",    "fsm_state", "source",   "p_speech",
                                       "p_initial", "p_intermediate", "p_final",  "eos_cost",
                                       "filtered",  "fired_acoustic", "fired_decoder", "endpoint"};

std::string format_trace(const SessionTrace& trace) {
  std::string out;
  for (int i = 0; i < 12; ++i) {
    if (i) out += ',';
    out += kTraceColumns[i];
  }
  out += '\n';
  for (const auto& r : trace) {
    out += std::to_string(r.t_ms);
    out += ',';
    out += to_string(r.fsm_state);
    out += ',';
    out += to_string(r.source);
    for (int k = 0; k < 4; ++k) {
      out += ',';
      out += fmt9(r.posterior(k));
    }
    out += ',';
    if (r.eos_cost) out += fmt9(*r.eos_cost);
    for (bool b : {r.filtered, r.fired_acoustic, r.fired_decoder, r.endpoint}) {
      out += ',';
      out += b ? '1' : '0';
    }
    out += '\n';
  }
  return out;
}

void export_trace(const SessionTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << format_trace(trace);
  if (!out) throw IoError("write failed: " + path.string());
}

SessionTrace parse_trace(std::string_view text) {
  const auto lines = lines_of(text);
  std::string header;
  for (int i = 0; i < 12; ++i) header += (i ? "," : "") + std::string(kTraceColumns[i]);
  if (lines.empty() || lines[0] != header) throw ValidationError("trace: missing or unexpected header");
  SessionTrace out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string where = "trace line " + std::to_string(i + 1);
    const auto c = split_csv(lines[i]);
    if (c.size() != 12) throw ValidationError(where + ": expected 12 columns");
    TraceRow r;
    r.t_ms = parse_long(c[0], where);
    if (c[1] == "EpOnly")
      r.fsm_state = FsmState::EpOnly;
    else if (c[1] == "AsrPlusEp")
      r.fsm_state = FsmState::AsrPlusEp;
    else if (c[1] == "End")
      r.fsm_state = FsmState::End;
    else
      throw ValidationError(where + ": bad fsm_state '" + c[1] + "'");
    if (c[2] == "audio")
      r.source = SwitchSource::AudioFrames;
    else if (c[2] == "latent")
      r.source = SwitchSource::SharedLatent;
    else
      throw ValidationError(where + ": bad source '" + c[2] + "'");
    for (int k = 0; k < 4; ++k) r.posterior(k) = parse_real(c[static_cast<std::size_t>(3 + k)], where);
    if (!c[7].empty()) r.eos_cost = parse_real(c[7], where);
    r.filtered = parse_flag(c[8], where);
    r.fired_acoustic = parse_flag(c[9], where);
    r.fired_decoder = parse_flag(c[10], where);
    r.endpoint = parse_flag(c[11], where);
    out.push_back(r);
  }
  return out;
}

SessionTrace read_trace(const std::filesystem::path& path) { return parse_trace(slurp(path)); }

}  // namespace jointep
