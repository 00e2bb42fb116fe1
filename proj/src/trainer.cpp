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

#include "jointep/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "json.hpp"

namespace jointep {

using nlohmann::json;

std::string_view to_string(Arm arm) {
  switch (arm) {
    case Arm::B1: return "B1";
    case Arm::E1: return "E1";
    case Arm::E2: return "E2";
    case Arm::E3: return "E3";
  }
  return "?";
}

Arm parse_arm(std::string_view name) {
  if (name == "B1") return Arm::B1;
  if (name == "E1") return Arm::E1;
  if (name == "E2") return Arm::E2;
  if (name == "E3") return Arm::E3;
  throw ConfigError("unknown arm '" + std::string(name) + "' (expected B1, E1, E2 or E3)");
}

void TrainConfig::validate() const {
  model.validate();
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("TrainConfig: lambda must be in [0,1]");
  if (!(learning_rate > 0.0)) throw ConfigError("TrainConfig: learning_rate must be positive");
  if (batch_size <= 0) throw ConfigError("TrainConfig: batch_size must be positive");
  if (steps <= 0) throw ConfigError("TrainConfig: steps must be positive");
  if (!(switch_prob >= 0.0 && switch_prob <= 1.0)) throw ConfigError("TrainConfig: switch_prob must be in [0,1]");
}

void AdamOptimizer::step(ParamStore& store, const std::function<bool(const std::string&)>& select) {
  ++t_;
  const Real c1 = 1.0 - std::pow(beta1_, static_cast<Real>(t_));
  const Real c2 = 1.0 - std::pow(beta2_, static_cast<Real>(t_));
  for (auto& [path, p] : store) {
    if (select && !select(path)) continue;
    auto it = moments_.find(path);
    if (it == moments_.end())
      it = moments_.emplace(path, std::make_pair(Tensor2::Zero(p.value.rows(), p.value.cols()),
                                                 Tensor2::Zero(p.value.rows(), p.value.cols()))).first;
    Tensor2& m = it->second.first;
    Tensor2& v = it->second.second;
    m = beta1_ * m + (1.0 - beta1_) * p.grad;
    v = beta2_ * v + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
  }
}

std::vector<int> append_eos_targets(std::span<const int> targets, int eos_id) {
  std::vector<int> out(targets.begin(), targets.end());
  out.push_back(eos_id);
  return out;
}

std::vector<int> strip_eos(std::span<const int> tokens, int eos_id) {
  std::vector<int> out;
  for (int t : tokens)
    if (t != eos_id) out.push_back(t);
  return out;
}

UtteranceLoss accumulate_utterance(ParamStore& store, const ModelConfig& cfg, const UtteranceRecord& utt,
                                   const FrameLabelSeq& labels, std::span<const int> targets, SwitchSource source,
                                   Real asr_weight, Real ep_weight, const RnntOptions& rnnt_opts) {
  UtteranceLoss out;
  const bool need_latents = asr_weight > 0 || (ep_weight > 0 && source == SwitchSource::SharedLatent);
  SharedEncodeCache shared_cache;
  Tensor2 latents;
  if (need_latents) latents = shared_encode(store, cfg, utt.features, &shared_cache);
  Tensor2 d_latents;

  if (asr_weight > 0) {
    AsrEncodeCache asr_cache;
    TransducerCache tr_cache;
    const Tensor2 enc = asr_encode(store, cfg, latents, &asr_cache);
    const RnntLattice lat = transducer_lattice(store, cfg, enc, targets, &tr_cache);
    const RnntForwardBackward fb = rnnt_forward_backward(lat, targets, rnnt_opts);
    out.asr = fb.loss;
    const Tensor2 d_enc = transducer_backward(store, cfg, tr_cache, fb.grad * asr_weight);
    d_latents = asr_encode_backward(store, cfg, asr_cache, d_enc);
  }

  if (ep_weight > 0) {
    EpCache ep_cache;
    const Tensor2& inputs = source == SwitchSource::AudioFrames ? utt.features : latents;
    const EpPosterior post = ep_forward(store, cfg, inputs, source, &ep_cache);
    const CeResult ce = ce_loss(post, labels);
    out.ep = ce.value;
    const Tensor2 d_in = ep_backward(store, cfg, ep_cache, ce.d_logits * ep_weight);
    if (source == SwitchSource::SharedLatent) {
      if (d_latents.size() == 0)
        d_latents = d_in;
      else
        d_latents += d_in;
    }
  }

  if (d_latents.size() > 0) shared_encode_backward(store, cfg, shared_cache, d_latents);
  return out;
}

namespace {

void check_corpus(const std::vector<UtteranceRecord>& corpus, const ModelConfig& cfg) {
  if (corpus.empty()) throw ConfigError("training corpus is empty");
  for (const auto& utt : corpus) {
    if (utt.num_frames() == 0) throw ValidationError(utt.id + ": utterance has no frames");
    if (utt.dim() != cfg.d_in)
      throw ConfigError(utt.id + ": feature dim " + std::to_string(utt.dim()) + " does not match model d_in " +
                        std::to_string(cfg.d_in));
    for (int tok : utt.target_tokens)
      if (tok < 0 || tok >= cfg.vocab)
        throw ConfigError(utt.id + ": token " + std::to_string(tok) + " outside model vocabulary of " +
                          std::to_string(cfg.vocab));
  }
}

// Cycles through a per-epoch shuffled order.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) { reshuffle(); }

  std::vector<std::size_t> next(int batch_size) {
    std::vector<std::size_t> out;
    for (int i = 0; i < batch_size; ++i) {
      if (cursor_ == order_.size()) reshuffle();
      out.push_back(order_[cursor_++]);
    }
    return out;
  }

 private:
  void reshuffle() {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::shuffle(order_.begin(), order_.end(), rng_);
    cursor_ = 0;
  }

  std::vector<std::size_t> order_;
  std::mt19937_64 rng_;
  std::size_t cursor_ = 0;
};

constexpr std::uint64_t kSwitchStreamSalt = 0x9e3779b97f4a7c15ull;

struct Prepared {
  std::vector<FrameLabelSeq> labels;
  std::vector<std::vector<int>> targets;
};

Prepared prepare(const TrainConfig& cfg, const std::vector<UtteranceRecord>& corpus) {
  Prepared p;
  for (const auto& utt : corpus) {
    p.labels.push_back(label_frames(utt));
    p.targets.push_back(cfg.append_eos ? append_eos_targets(utt.target_tokens, cfg.model.eos_id()) : utt.target_tokens);
  }
  return p;
}

void check_finite(const StepLoss& l, int step) {
  if (!std::isfinite(l.asr) || !std::isfinite(l.ep) || !std::isfinite(l.multitask))
    throw DivergenceError("training diverged at step " + std::to_string(step) + " (non-finite loss)", step);
}

void check_finite(const ParamStore& store, int step) {
  for (const auto& [path, p] : store)
    if (!p.value.allFinite())
      throw DivergenceError("training diverged at step " + std::to_string(step) + " (non-finite " + path + ")", step);
}

// Runs one optimizer step; numeric failures inside it count as divergence.
template <typename F>
StepLoss guarded_step(int step, F&& body) {
  try {
    return body();
  } catch (const NumericError& e) {
    throw DivergenceError("training diverged at step " + std::to_string(step) + " (" + e.what() + ")", step);
  }
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const std::vector<UtteranceRecord>& corpus, const StepObserver& observer) {
  cfg.validate();
  check_corpus(corpus, cfg.model);
  const Prepared prep = prepare(cfg, corpus);
  const RnntOptions rnnt_opts{cfg.model.eos_id(), cfg.append_eos};
  const Real B = static_cast<Real>(cfg.batch_size);

  TrainResult result;
  result.model.arm = cfg.arm;
  result.model.config = cfg.model;
  result.model.params = init_params(cfg.model, cfg.seed);
  ParamStore& store = result.model.params;
  TrainReport& report = result.report;
  report.losses.reserve(static_cast<std::size_t>(cfg.steps));

  if (cfg.arm == Arm::B1) {
    // Two independent optimizations over disjoint parameter groups: EP on CE
    // alone, ASR on the transducer loss alone.
    BatchSampler ep_sampler(corpus.size(), cfg.seed);
    BatchSampler asr_sampler(corpus.size(), cfg.seed);
    AdamOptimizer ep_opt(cfg.learning_rate);
    AdamOptimizer asr_opt(cfg.learning_rate);
    for (int step = 0; step < cfg.steps; ++step) {
      const StepLoss l = guarded_step(step, [&] {
        StepLoss l;
        store.zero_grad();
        for (std::size_t i : ep_sampler.next(cfg.batch_size)) {
          l.ep += accumulate_utterance(store, cfg.model, corpus[i], prep.labels[i], prep.targets[i],
                                       SwitchSource::AudioFrames, 0.0, 1.0 / B, rnnt_opts).ep / B;
          ++report.audio_utterances;
        }
        ep_opt.step(store, [](const std::string& p) { return is_ep_param(p); });
        store.zero_grad();
        for (std::size_t i : asr_sampler.next(cfg.batch_size))
          l.asr += accumulate_utterance(store, cfg.model, corpus[i], prep.labels[i], prep.targets[i],
                                        SwitchSource::AudioFrames, 1.0 / B, 0.0, rnnt_opts).asr / B;
        asr_opt.step(store, [](const std::string& p) { return !is_ep_param(p); });
        l.multitask = multitask_loss({l.asr}, {l.ep}, cfg.lambda).value;
        return l;
      });
      check_finite(l, step);
      check_finite(store, step);
      report.losses.push_back(l);
      if (observer) observer(step, l);
    }
    return result;
  }

  BatchSampler sampler(corpus.size(), cfg.seed);
  std::mt19937_64 switch_rng(cfg.seed ^ kSwitchStreamSalt);
  AdamOptimizer opt(cfg.learning_rate);
  const MultitaskLoss weights = multitask_loss({0.0}, {0.0}, cfg.lambda);
  for (int step = 0; step < cfg.steps; ++step) {
    const StepLoss l = guarded_step(step, [&] {
      StepLoss l;
      store.zero_grad();
      for (std::size_t i : sampler.next(cfg.batch_size)) {
        SwitchSource src = SwitchSource::AudioFrames;
        if (cfg.arm == Arm::E2)
          src = SwitchSource::SharedLatent;
        else if (cfg.arm == Arm::E3)
          src = sample_switch(switch_rng, cfg.switch_prob);
        (src == SwitchSource::AudioFrames ? report.audio_utterances : report.latent_utterances)++;
        const UtteranceLoss u = accumulate_utterance(store, cfg.model, corpus[i], prep.labels[i], prep.targets[i],
                                                     src, weights.asr_weight / B, weights.ep_weight / B, rnnt_opts);
        l.asr += u.asr / B;
        l.ep += u.ep / B;
      }
      l.multitask = multitask_loss({l.asr}, {l.ep}, cfg.lambda).value;
      return l;
    });
    check_finite(l, step);
    opt.step(store, {});
    check_finite(store, step);
    report.losses.push_back(l);
    if (observer) observer(step, l);
  }
  return result;
}

EpEvaluation evaluate_ep(const ModelSet& model, const std::vector<UtteranceRecord>& corpus, SwitchSource source) {
  Real ce_sum = 0;
  long correct = 0;
  long frames = 0;
  for (const auto& utt : corpus) {
    const FrameLabelSeq labels = label_frames(utt);
    const Tensor2 inputs =
        source == SwitchSource::AudioFrames ? utt.features : shared_encode(model.params, model.config, utt.features);
    const EpPosterior post = ep_forward(model.params, model.config, inputs, source);
    const CeResult ce = ce_loss(post, labels);
    ce_sum += ce.value * static_cast<Real>(post.rows());
    for (Eigen::Index t = 0; t < post.rows(); ++t) {
      Eigen::Index best;
      post.row(t).maxCoeff(&best);
      correct += (static_cast<int>(best) == static_cast<int>(labels[static_cast<std::size_t>(t)]));
    }
    frames += post.rows();
  }
  if (frames == 0) throw ValidationError("evaluate_ep: corpus has no frames");
  return {ce_sum / static_cast<Real>(frames), static_cast<Real>(correct) / static_cast<Real>(frames)};
}

// ---------------------------------------------------------------------------
// Checkpoints

std::string model_config_json(const ModelConfig& c) {
  return json{{"d_in", c.d_in},
              {"d_enc", c.d_enc},
              {"ep_hidden", c.ep_hidden},
              {"ep_layers", c.ep_layers},
              {"vocab", c.vocab},
              {"pred_embed", c.pred_embed},
              {"joint_hidden", c.joint_hidden},
              {"shared_blocks", c.shared_blocks},
              {"asr_blocks", c.asr_blocks},
              {"conv_kernel", c.conv_kernel},
              {"eos_id", c.eos_id()},
              {"blank_id", c.blank_id()}}
      .dump();
}

ModelConfig model_config_from_json(const std::string& text) {
  const json j = json::parse(text);
  ModelConfig c;
  c.d_in = j.at("d_in").get<int>();
  c.d_enc = j.at("d_enc").get<int>();
  c.ep_hidden = j.at("ep_hidden").get<int>();
  c.ep_layers = j.at("ep_layers").get<int>();
  c.vocab = j.at("vocab").get<int>();
  c.pred_embed = j.at("pred_embed").get<int>();
  c.joint_hidden = j.at("joint_hidden").get<int>();
  c.shared_blocks = j.at("shared_blocks").get<int>();
  c.asr_blocks = j.at("asr_blocks").get<int>();
  c.conv_kernel = j.at("conv_kernel").get<int>();
  if (j.contains("eos_id") && j.at("eos_id").get<int>() != c.eos_id())
    throw IntegrityError("checkpoint reserves </s> at a different index");
  if (j.contains("blank_id") && j.at("blank_id").get<int>() != c.blank_id())
    throw IntegrityError("checkpoint reserves blank at a different index");
  c.validate();
  return c;
}

namespace {

std::string first_config_mismatch(const ModelConfig& a, const ModelConfig& b) {
  const json ja = json::parse(model_config_json(a));
  const json jb = json::parse(model_config_json(b));
  for (auto it = ja.begin(); it != ja.end(); ++it)
    if (jb.at(it.key()) != it.value())
      return it.key() + " (checkpoint " + it.value().dump() + ", expected " + jb.at(it.key()).dump() + ")";
  return {};
}

}  // namespace

void save_checkpoint(const ParamStore& store, const ModelConfig& cfg, Arm arm, const std::string& role,
                     const std::filesystem::path& path) {
  json meta = {{"model_config", json::parse(model_config_json(cfg))}, {"arm", to_string(arm)}, {"role", role}};
  write_params(path, store, meta.dump());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig* expected) {
  CheckpointContents c = read_params(path);
  LoadedCheckpoint out;
  try {
    const json meta = json::parse(c.metadata_json);
    out.config = model_config_from_json(meta.at("model_config").dump());
    out.arm = parse_arm(meta.at("arm").get<std::string>());
    out.role = meta.at("role").get<std::string>();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw IntegrityError(std::string("checkpoint metadata is malformed: ") + e.what());
  }
  out.params = std::move(c.params);
  const bool need_ep = out.role != "asr";
  const bool need_asr = out.role != "ep";
  if (expected) {
    const std::string mismatch = first_config_mismatch(out.config, *expected);
    if (!mismatch.empty()) throw ShapeError("checkpoint model config mismatch: " + mismatch);
    check_params(out.params, *expected, need_ep, need_asr);
  } else {
    check_params(out.params, out.config, need_ep, need_asr);
  }
  return out;
}

std::vector<std::filesystem::path> save_model_set(const ModelSet& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  if (model.arm == Arm::B1) {
    const ParamStore ep = model.params.subset("ep/");
    const ParamStore asr = model.params.without("ep/");
    written.push_back(dir / "ep.ckpt.json");
    save_checkpoint(ep, model.config, model.arm, "ep", written.back());
    written.push_back(dir / "asr.ckpt.json");
    save_checkpoint(asr, model.config, model.arm, "asr", written.back());
  } else {
    written.push_back(dir / "model.ckpt.json");
    save_checkpoint(model.params, model.config, model.arm, "joint", written.back());
  }
  return written;
}

ModelSet load_model_set(const std::filesystem::path& dir) {
  ModelSet out;
  if (std::filesystem::exists(dir / "model.ckpt.json")) {
    LoadedCheckpoint c = load_checkpoint(dir / "model.ckpt.json");
    out.arm = c.arm;
    out.config = c.config;
    out.params = std::move(c.params);
    return out;
  }
  if (std::filesystem::exists(dir / "ep.ckpt.json") && std::filesystem::exists(dir / "asr.ckpt.json")) {
    LoadedCheckpoint ep = load_checkpoint(dir / "ep.ckpt.json");
    LoadedCheckpoint asr = load_checkpoint(dir / "asr.ckpt.json", &ep.config);
    out.arm = ep.arm;
    out.config = ep.config;
    out.params = std::move(asr.params);
    out.params.merge(ep.params);
    return out;
  }
  throw IoError("no checkpoint found in " + dir.string());
}

}  // namespace jointep
