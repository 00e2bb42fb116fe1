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

#ifndef JOINTEP_TRAINER_HPP_
#define JOINTEP_TRAINER_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "jointep/corpus.hpp"
#include "jointep/models.hpp"
#include "jointep/netkit.hpp"

namespace jointep {

// B1: separately trained EP and ASR. E1: joint loss, EP on audio only.
// E2: joint loss, EP always on shared latents. E3: E2 plus the per-utterance
// switch between audio frames and shared latents.
enum class Arm { B1, E1, E2, E3 };

std::string_view to_string(Arm arm);
Arm parse_arm(std::string_view name);

struct TrainConfig {
  Arm arm = Arm::E3;
  Real lambda = 0.98;
  Real learning_rate = 1e-3;
  int batch_size = 8;
  int steps = 2000;
  std::uint64_t seed = 0;
  Real switch_prob = 0.5;  // probability of the AudioFrames source (E3)
  bool append_eos = true;
  ModelConfig model;

  void validate() const;
};

struct StepLoss {
  Real asr = 0;
  Real ep = 0;
  Real multitask = 0;
};

struct TrainReport {
  std::vector<StepLoss> losses;
  long audio_utterances = 0;
  long latent_utterances = 0;
  std::map<std::string, Real> final_metrics;
  std::string checkpoint_path;
};

// A trained system. For B1 the EP and ASR parameter groups were optimized
// independently; they still live in one store keyed by path prefix.
struct ModelSet {
  Arm arm = Arm::E3;
  ModelConfig config;
  ParamStore params;
};

struct TrainResult {
  ModelSet model;
  TrainReport report;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int step) : Error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

class AdamOptimizer {
 public:
  explicit AdamOptimizer(Real lr = 1e-3, Real beta1 = 0.9, Real beta2 = 0.999, Real eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // Updates every parameter accepted by `select` from its accumulated grad.
  void step(ParamStore& store, const std::function<bool(const std::string&)>& select);

 private:
  Real lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::map<std::string, std::pair<Tensor2, Tensor2>> moments_;
};

std::vector<int> append_eos_targets(std::span<const int> targets, int eos_id);
std::vector<int> strip_eos(std::span<const int> tokens, int eos_id);

// Per-step callback, e.g. for progress logging.
using StepObserver = std::function<void(int step, const StepLoss&)>;

TrainResult train(const TrainConfig& cfg, const std::vector<UtteranceRecord>& corpus, const StepObserver& observer = {});

// Forward and backward for one utterance. Gradients are scaled by the given
// weights and accumulated into `store`. A zero weight skips that branch
// entirely and its loss is reported as 0.
struct UtteranceLoss {
  Real asr = 0;
  Real ep = 0;
};

UtteranceLoss accumulate_utterance(ParamStore& store, const ModelConfig& cfg, const UtteranceRecord& utt,
                                   const FrameLabelSeq& labels, std::span<const int> targets, SwitchSource source,
                                   Real asr_weight, Real ep_weight, const RnntOptions& rnnt_opts);

// Held-out endpointer quality for one input pathway.
struct EpEvaluation {
  Real ce = 0;              // mean per-frame cross entropy over all frames
  Real frame_accuracy = 0;  // argmax accuracy
};

EpEvaluation evaluate_ep(const ModelSet& model, const std::vector<UtteranceRecord>& corpus, SwitchSource source);

// ---------------------------------------------------------------------------
// Checkpoints. A single file holds one ParamStore plus a metadata block with
// the model config, arm and role ("joint", "ep" or "asr").

struct LoadedCheckpoint {
  ParamStore params;
  ModelConfig config;
  Arm arm = Arm::E3;
  std::string role;
};

void save_checkpoint(const ParamStore& store, const ModelConfig& cfg, Arm arm, const std::string& role,
                     const std::filesystem::path& path);
// With `expected`, the stored config and parameter shapes must match it.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig* expected = nullptr);

// Model directory: model.ckpt.json for joint arms, ep.ckpt.json and
// asr.ckpt.json for B1. Returns the written file paths.
std::vector<std::filesystem::path> save_model_set(const ModelSet& model, const std::filesystem::path& dir);
ModelSet load_model_set(const std::filesystem::path& dir);

std::string model_config_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);

}  // namespace jointep

#endif  // JOINTEP_TRAINER_HPP_
