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

// Streaming inference: the endpointing state machines, frame filtering,
// greedy transducer decoding and acoustic/decoder end-of-query fusion.

#ifndef JOINTEP_RUNTIME_HPP_
#define JOINTEP_RUNTIME_HPP_

#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "jointep/corpus.hpp"
#include "jointep/models.hpp"
#include "jointep/trainer.hpp"

namespace jointep {

enum class Mode { ShortQuery, Continuous };
enum class FsmState { EpOnly, AsrPlusEp, End };
enum class EoqSource { Acoustic, Decoder };

std::string_view to_string(Mode m);
std::string_view to_string(FsmState s);
std::string_view to_string(EoqSource s);
Mode parse_mode(std::string_view name);  // "short" or "continuous"

struct Thresholds {
  Real theta_vad = 0.5;
  Real theta_eoq = 0.9;
  Real theta_eos = 0.0;  // decoder </s> cost threshold; 0 never fires
  long wait_ms = 0;

  void validate() const;
};

struct EoqEvent {
  EoqSource source = EoqSource::Acoustic;
  long fire_ms = 0;
  long endpoint_ms = 0;
};

// Result of evaluating the fusion rule on one frame.
struct EndpointDecision {
  bool fired_acoustic = false;
  bool fired_decoder = false;
  std::optional<EoqEvent> pending;  // the first event, once any signal fired
  bool endpoint = false;            // now_ms has reached pending->endpoint_ms
};

// Acoustic fires iff P(final) > theta_eoq, decoder iff cost < theta_eos. The
// first firing starts the wait; later firings never restart it.
EndpointDecision declare_endpoint(const PosteriorRow& acoustic, std::optional<Real> decoder_cost,
                                  const Thresholds& th, long now_ms, const std::optional<EoqEvent>& pending);

// ---------------------------------------------------------------------------
// Model backends

// Frame-synchronous interface the state machine drives. Within one frame the
// session calls either ep_filter_step (EpOnly), optionally followed by
// asr_step when that frame triggers the transition, or asr_step followed by
// ep_active_step (AsrPlusEp).
class StreamingModel {
 public:
  virtual ~StreamingModel() = default;

  virtual void reset() = 0;
  virtual PosteriorRow ep_filter_step(const FeatureFrame& frame) = 0;
  virtual PosteriorRow ep_active_step(const FeatureFrame& frame) = 0;
  // Advances the ASR side; returns the </s> cost if a decoder step ran.
  virtual std::optional<Real> asr_step(const FeatureFrame& frame) = 0;
  // Source used by the most recent EP step.
  virtual SwitchSource last_source() const = 0;
  // Flushes any buffered ASR input.
  virtual void finish() = 0;
  virtual std::vector<int> hypothesis() const = 0;
};

// Which pathway the endpointer reads.
enum class EpRouting {
  AudioOnly,   // B1, E1
  LatentOnly,  // E2: the shared encoder also runs on filtered frames
  Switch,      // E3: audio while filtering, shared latents while ASR is active
};

EpRouting default_routing(Arm arm);

// Greedy (beam 1) transducer decoder over reduced encoder frames.
class GreedyDecoder {
 public:
  static constexpr int kMaxSymbolsPerFrame = 4;

  GreedyDecoder(const ParamStore& store, const ModelConfig& cfg);
  void reset();
  // Decodes one encoder frame; returns the lowest -log P(</s>) over the
  // frame's joint evaluations. An argmax </s> enters the prediction context
  // but not the hypothesis.
  Real step(const Vector& enc);
  const std::vector<int>& tokens() const { return tokens_; }

 private:
  const ParamStore* store_;
  ModelConfig cfg_;
  TokenContext ctx_{kStartToken, kStartToken};
  std::vector<int> tokens_;
};

// -log P(</s>) for the given joint logits.
Real eos_cost(const Vector& joint_logits, const ModelConfig& cfg);

class NeuralBackend final : public StreamingModel {
 public:
  NeuralBackend(const ModelSet& model, EpRouting routing);

  void reset() override;
  PosteriorRow ep_filter_step(const FeatureFrame& frame) override;
  PosteriorRow ep_active_step(const FeatureFrame& frame) override;
  std::optional<Real> asr_step(const FeatureFrame& frame) override;
  SwitchSource last_source() const override { return last_source_; }
  void finish() override;
  std::vector<int> hypothesis() const override { return decoder_.tokens(); }

  // Number of frames the shared encoder and the ASR trunk consumed.
  long encoder_frames() const { return encoder_frames_; }
  long asr_frames() const { return asr_frames_; }

 private:
  const Vector& latent_for(const FeatureFrame& frame);

  const ModelSet* model_;
  EpRouting routing_;
  std::optional<SharedEncoderStream> encoder_;
  std::optional<AsrTrunkStream> trunk_;
  std::optional<EpStream> ep_;
  GreedyDecoder decoder_;
  SwitchSource last_source_ = SwitchSource::AudioFrames;
  std::deque<std::pair<int, Vector>> latents_;  // recent (t_index, latent)
  long encoder_frames_ = 0;
  long asr_frames_ = 0;
};

// Test double: replays posteriors and </s> costs from a script keyed by frame
// index, ignoring the features.
struct ScriptFrame {
  PosteriorRow posterior = PosteriorRow::Zero();
  std::optional<Real> eos_cost;
};

class ScriptedBackend final : public StreamingModel {
 public:
  explicit ScriptedBackend(std::vector<ScriptFrame> script);

  void reset() override;
  PosteriorRow ep_filter_step(const FeatureFrame& frame) override;
  PosteriorRow ep_active_step(const FeatureFrame& frame) override;
  std::optional<Real> asr_step(const FeatureFrame& frame) override;
  SwitchSource last_source() const override { return last_source_; }
  void finish() override {}
  // Frame indices the ASR side consumed, in order.
  std::vector<int> hypothesis() const override { return forwarded_; }

 private:
  const ScriptFrame& at(const FeatureFrame& frame) const;

  std::vector<ScriptFrame> script_;
  SwitchSource last_source_ = SwitchSource::AudioFrames;
  std::vector<int> forwarded_;
};

// CSV with header t_index,p_speech,p_initial,p_intermediate,p_final,eos_cost
// (eos_cost may be empty).
std::vector<ScriptFrame> parse_script(std::string_view text);
std::vector<ScriptFrame> read_script(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Sessions

struct TraceRow {
  long t_ms = 0;
  FsmState fsm_state = FsmState::EpOnly;  // state when the frame arrived
  SwitchSource source = SwitchSource::AudioFrames;
  PosteriorRow posterior = PosteriorRow::Zero();
  std::optional<Real> eos_cost;
  bool filtered = false;
  bool fired_acoustic = false;
  bool fired_decoder = false;
  bool endpoint = false;

  bool operator==(const TraceRow& o) const;
};

using SessionTrace = std::vector<TraceRow>;

struct SessionOptions {
  // Filtered frames replayed to the ASR side on the EpOnly -> AsrPlusEp edge.
  int prepend_frames = 0;
};

struct SessionState {
  Mode mode = Mode::ShortQuery;
  FsmState fsm_state = FsmState::EpOnly;
  int frame_period_ms = 30;  // a frame's decision time is its end, t_ms + period
  std::optional<EoqEvent> pending;
  std::deque<FeatureFrame> prepend;
};

SessionState initial_state(Mode mode, int frame_period_ms);

TraceRow step(const FeatureFrame& frame, SessionState& s, const Thresholds& th, StreamingModel& model,
              const SessionOptions& opts = {});

struct SessionResult {
  SessionTrace trace;
  std::vector<int> hypothesis;
  std::optional<EoqEvent> event;  // ShortQuery only; may outlive the audio
  long total_frames = 0;
  long duration_ms = 0;
};

SessionResult run_session(const UtteranceRecord& utt, Mode mode, const Thresholds& th, StreamingModel& model,
                          const SessionOptions& opts = {});

extern const char* const kTraceColumns[12];

std::string format_trace(const SessionTrace& trace);
void export_trace(const SessionTrace& trace, const std::filesystem::path& path);
SessionTrace parse_trace(std::string_view text);
SessionTrace read_trace(const std::filesystem::path& path);

}  // namespace jointep

#endif  // JOINTEP_RUNTIME_HPP_
