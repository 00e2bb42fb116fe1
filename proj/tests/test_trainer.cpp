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

#include <gtest/gtest.h>

#include <numeric>

#include "jointep/trainer.hpp"
#include "test_support.hpp"

namespace jointep {
namespace {

ModelConfig tiny_model() {
  ModelConfig c;
  c.d_in = 3;
  c.d_enc = 4;
  c.ep_hidden = 3;
  c.ep_layers = 2;
  c.vocab = 3;
  c.pred_embed = 2;
  c.joint_hidden = 3;
  c.shared_blocks = 1;
  c.asr_blocks = 1;
  c.conv_kernel = 2;
  return c;
}

std::vector<UtteranceRecord> small_corpus(int n, std::uint64_t seed = 0) {
  SynthConfig s;
  s.num_utterances = n;
  return generate_synthetic_corpus(s, seed);
}

TrainConfig quick(Arm arm, int steps) {
  TrainConfig c;
  c.arm = arm;
  c.steps = steps;
  return c;
}

bool same_prefix(const ParamStore& a, const ParamStore& b, const std::string& prefix) {
  return a.subset(prefix).same_values(b.subset(prefix));
}

TEST(EosTargets, AppendAndStrip) {
  const std::vector<int> y{5, 2};
  EXPECT_EQ(append_eos_targets(y, 8), (std::vector<int>{5, 2, 8}));
  EXPECT_EQ(append_eos_targets(std::vector<int>{}, 8), (std::vector<int>{8}));
  EXPECT_EQ(strip_eos(append_eos_targets(y, 8), 8), y);
}

TEST(TrainConfig, ValidationAndArmNames) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.lambda = 1.2;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  for (Arm a : {Arm::B1, Arm::E1, Arm::E2, Arm::E3}) EXPECT_EQ(parse_arm(to_string(a)), a);
  EXPECT_THROW(parse_arm("E4"), ConfigError);
}

TEST(Training, LambdaOneFreezesTheEndpointerExactly) {
  const auto corpus = small_corpus(8);
  TrainConfig c = quick(Arm::E3, 20);
  c.lambda = 1.0;
  const ParamStore init = init_params(c.model, c.seed);
  const auto r = train(c, corpus);
  EXPECT_TRUE(same_prefix(init, r.model.params, "ep/"));
  EXPECT_FALSE(same_prefix(init, r.model.params, "asr/"));
}

TEST(Training, LambdaZeroFreezesAsrOnlyParametersExactly) {
  const auto corpus = small_corpus(8);
  TrainConfig c = quick(Arm::E3, 20);
  c.lambda = 0.0;
  const ParamStore init = init_params(c.model, c.seed);
  const auto r = train(c, corpus);
  for (const char* p : {"asr/", "pred/", "joint/"}) EXPECT_TRUE(same_prefix(init, r.model.params, p)) << p;
  EXPECT_FALSE(same_prefix(init, r.model.params, "ep/"));
  // Shared layers still learn from the endpointer.
  EXPECT_FALSE(same_prefix(init, r.model.params, "shared/"));
}

TEST(Training, E1EndpointerGradientNeverReachesTheEncoder) {
  const ModelConfig cfg = tiny_model();
  SynthConfig s;
  s.d_in = cfg.d_in;
  s.vocab = cfg.vocab;
  s.num_utterances = 3;
  for (const auto& utt : generate_synthetic_corpus(s, 4)) {
    ParamStore store = init_params(cfg, 1);
    store.zero_grad();
    const auto targets = append_eos_targets(utt.target_tokens, cfg.eos_id());
    accumulate_utterance(store, cfg, utt, label_frames(utt), targets, SwitchSource::AudioFrames, 0.0, 1.0,
                         RnntOptions{cfg.eos_id(), true});
    for (const auto& [path, p] : store)
      if (!is_ep_param(path)) EXPECT_EQ(p.grad.cwiseAbs().maxCoeff(), 0.0) << path;
  }
}

TEST(Training, FullUtteranceGradientMatchesFiniteDifferences) {
  const ModelConfig cfg = tiny_model();
  SynthConfig s;
  s.d_in = cfg.d_in;
  s.vocab = cfg.vocab;
  s.num_utterances = 4;
  s.min_words = 1;
  s.max_words = 2;
  s.min_word_frames = 2;
  s.max_word_frames = 3;
  const auto corpus = generate_synthetic_corpus(s, 9);
  int k = 0;
  for (const auto& utt : corpus) {
    ParamStore store = init_params(cfg, 10 + static_cast<std::uint64_t>(k));
    const auto labels = label_frames(utt);
    const auto targets = append_eos_targets(utt.target_tokens, cfg.eos_id());
    const SwitchSource src = k % 2 ? SwitchSource::SharedLatent : SwitchSource::AudioFrames;
    auto f = [&](ParamStore& p) {
      const auto l = accumulate_utterance(p, cfg, utt, labels, targets, src, 0.7, 0.3, RnntOptions{cfg.eos_id(), true});
      return 0.7 * l.asr + 0.3 * l.ep;
    };
    const auto rep = grad_check(f, store);
    EXPECT_TRUE(rep.passed) << "utt " << k << " worst " << rep.worst_param << " err " << rep.max_rel_error;
    ++k;
  }
}

TEST(Training, TinyCorpusLossDecreases) {
  const auto corpus = small_corpus(8, 3);
  const auto r = train(quick(Arm::E3, 500), corpus);
  ASSERT_EQ(r.report.losses.size(), 500u);
  Real tail = 0;
  for (std::size_t i = 450; i < 500; ++i) tail += r.report.losses[i].multitask;
  EXPECT_LT(tail / 50, r.report.losses.front().multitask);
}

TEST(Training, SmoothedLossDescendsForEveryArm) {
  const auto corpus = small_corpus(200, 5);
  for (Arm arm : {Arm::B1, Arm::E1, Arm::E2, Arm::E3}) {
    const auto r = train(quick(arm, 300), corpus);
    const auto& L = r.report.losses;
    Real tail = 0;
    for (std::size_t i = L.size() - 50; i < L.size(); ++i) tail += L[i].multitask;
    EXPECT_LT(tail / 50, L.front().multitask) << to_string(arm);
  }
}

TEST(Training, SameSeedGivesIdenticalCheckpoints) {
  const auto corpus = small_corpus(16, 2);
  const TrainConfig c = quick(Arm::E3, 15);
  const auto a = train(c, corpus);
  const auto b = train(c, corpus);
  EXPECT_EQ(serialize_params(a.model.params), serialize_params(b.model.params));
  TrainConfig d = c;
  d.seed = 1;
  EXPECT_NE(serialize_params(train(d, corpus).model.params), serialize_params(a.model.params));
}

TEST(Training, PinnedSwitchReproducesE2) {
  const auto corpus = small_corpus(16, 6);
  TrainConfig e2 = quick(Arm::E2, 25);
  TrainConfig e3 = quick(Arm::E3, 25);
  e3.switch_prob = 0.0;
  EXPECT_TRUE(train(e2, corpus).model.params.same_values(train(e3, corpus).model.params));
}

TEST(Training, SwitchSamplesBothSourcesEvenly) {
  const auto corpus = small_corpus(32, 7);
  const auto r = train(quick(Arm::E3, 100), corpus);
  const long a = r.report.audio_utterances, l = r.report.latent_utterances;
  EXPECT_EQ(a + l, 800);
  EXPECT_NEAR(static_cast<double>(a) / (a + l), 0.5, 0.06);
  const auto e2 = train(quick(Arm::E2, 10), corpus);
  EXPECT_EQ(e2.report.audio_utterances, 0);
  const auto e1 = train(quick(Arm::E1, 10), corpus);
  EXPECT_EQ(e1.report.latent_utterances, 0);
}

TEST(Training, ExplodingLearningRateReportsDivergence) {
  const auto corpus = small_corpus(8, 8);
  TrainConfig c = quick(Arm::E3, 200);
  c.learning_rate = 1e300;
  int seen = 0;
  try {
    train(c, corpus, [&seen](int, const StepLoss&) { ++seen; });
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_GE(e.step(), 0);
    EXPECT_EQ(seen, e.step());
  }
}

TEST(Training, EmptyCorpusOrMismatchedFeaturesAreRejected) {
  EXPECT_THROW(train(quick(Arm::E3, 1), {}), Error);
  TrainConfig c = quick(Arm::E3, 1);
  c.model.d_in = 5;
  EXPECT_THROW(train(c, small_corpus(2)), ConfigError);
}

TEST(Checkpoint, SaveLoadIsBitIdentical) {
  const auto r = train(quick(Arm::E3, 3), small_corpus(8));
  const auto dir = testing::scratch_dir("trainer_ckpt");
  save_checkpoint(r.model.params, r.model.config, r.model.arm, "joint", dir / "m.json");
  const auto back = load_checkpoint(dir / "m.json", &r.model.config);
  EXPECT_TRUE(back.params.same_values(r.model.params));
  EXPECT_EQ(back.config, r.model.config);
  EXPECT_EQ(back.arm, Arm::E3);
  EXPECT_EQ(back.role, "joint");
}

TEST(Checkpoint, CorruptedFileIsAnIntegrityError) {
  const auto r = train(quick(Arm::E3, 1), small_corpus(4));
  const auto dir = testing::scratch_dir("trainer_corrupt");
  save_checkpoint(r.model.params, r.model.config, r.model.arm, "joint", dir / "m.json");
  std::string text = testing::slurp(dir / "m.json");
  const auto pos = text.find_first_of("123456789", text.find("values"));
  text[pos] = text[pos] == '9' ? '1' : '9';
  {
    std::ofstream out(dir / "m.json", std::ios::binary);
    out << text;
  }
  EXPECT_THROW(load_checkpoint(dir / "m.json"), IntegrityError);
}

TEST(Checkpoint, MismatchedConfigNamesTheFirstDifference) {
  const auto r = train(quick(Arm::E3, 1), small_corpus(4));
  const auto dir = testing::scratch_dir("trainer_mismatch");
  save_checkpoint(r.model.params, r.model.config, r.model.arm, "joint", dir / "m.json");
  ModelConfig other = r.model.config;
  other.ep_hidden = 32;
  other.joint_hidden = 7;
  try {
    load_checkpoint(dir / "m.json", &other);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("ep_hidden"), std::string::npos) << msg;
    EXPECT_EQ(msg.find("joint_hidden"), std::string::npos) << msg;
  }
}

TEST(Checkpoint, B1WritesSeparateEndpointerAndAsrFiles) {
  const auto r = train(quick(Arm::B1, 3), small_corpus(8));
  const auto dir = testing::scratch_dir("trainer_b1");
  const auto files = save_model_set(r.model, dir);
  ASSERT_EQ(files.size(), 2u);
  EXPECT_TRUE(std::filesystem::exists(dir / "ep.ckpt.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "asr.ckpt.json"));
  const ModelSet back = load_model_set(dir);
  EXPECT_EQ(back.arm, Arm::B1);
  EXPECT_TRUE(back.params.same_values(r.model.params));
  EXPECT_THROW(load_model_set(testing::scratch_dir("trainer_empty")), IoError);
}

TEST(Checkpoint, ModelConfigJsonRoundTrip) {
  const ModelConfig c = tiny_model();
  EXPECT_EQ(model_config_from_json(model_config_json(c)), c);
}

TEST(EndpointerEval, ReportsFiniteCeAndAccuracy) {
  const auto corpus = small_corpus(8, 11);
  const auto r = train(quick(Arm::E3, 5), corpus);
  for (SwitchSource src : {SwitchSource::AudioFrames, SwitchSource::SharedLatent}) {
    const auto ev = evaluate_ep(r.model, corpus, src);
    EXPECT_TRUE(std::isfinite(ev.ce));
    EXPECT_GT(ev.ce, 0.0);
    EXPECT_GE(ev.frame_accuracy, 0.0);
    EXPECT_LE(ev.frame_accuracy, 1.0);
  }
}

}  // namespace
}  // namespace jointep
