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

// Endpointer, shared encoder trunk, ASR trunk and the small transducer.
//
// Parameter layout inside a ParamStore:
//   shared/in_proj/{W,b}          D_in -> D_enc
//   shared/block<i>/{pw_W,pw_b,conv_w,conv_b}
//   asr/reduce/{W,b}              2*D_enc -> D_enc (after frame-pair stacking)
//   asr/block<i>/...
//   pred/embed                    (V+2) x P; rows V+1 is the start sentinel
//   joint/{enc_W,pred_W,b,out_W,out_b}
//   ep/proj_audio/{W,b}, ep/proj_latent/{W,b}, ep/lstm<l>/{W,b}, ep/head/{W,b}

#ifndef JOINTEP_MODELS_HPP_
#define JOINTEP_MODELS_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "jointep/common.hpp"
#include "jointep/losses.hpp"
#include "jointep/netkit.hpp"

namespace jointep {

struct ModelConfig {
  int d_in = 8;
  int d_enc = 16;
  int ep_hidden = 16;
  int ep_layers = 3;
  int vocab = 8;
  int pred_embed = 8;
  int joint_hidden = 16;
  int shared_blocks = 2;
  int asr_blocks = 2;
  int conv_kernel = 3;

  // Reserved output indices.
  int eos_id() const { return vocab; }
  int blank_id() const { return vocab + 1; }
  int num_symbols() const { return vocab + 2; }

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Context slot value for "no previous token".
inline constexpr int kStartToken = -1;
using TokenContext = std::array<int, 2>;  // {older, newer}

enum class SwitchSource { AudioFrames, SharedLatent };

std::string_view to_string(SwitchSource s);

// Bernoulli draw: AudioFrames with probability p_audio.
SwitchSource sample_switch(std::mt19937_64& rng, Real p_audio = 0.5);

inline bool is_ep_param(std::string_view path) { return path.rfind("ep/", 0) == 0; }
inline bool is_shared_param(std::string_view path) { return path.rfind("shared/", 0) == 0; }
inline bool is_asr_only_param(std::string_view path) {
  return path.rfind("asr/", 0) == 0 || path.rfind("pred/", 0) == 0 || path.rfind("joint/", 0) == 0;
}

void add_ep_params(ParamStore& store, const ModelConfig& cfg, std::mt19937_64& rng);
// Shared encoder, ASR trunk, prediction network and joiner.
void add_asr_params(ParamStore& store, const ModelConfig& cfg, std::mt19937_64& rng);
ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed);

// Throws ShapeError naming the first missing or mis-shaped parameter.
void check_params(const ParamStore& store, const ModelConfig& cfg, bool need_ep, bool need_asr);

CausalBlockView<Real> block_view(const ParamStore& store, const std::string& prefix);
CausalBlockGradView<Real> block_grad_view(ParamStore& store, const std::string& prefix);

// ---------------------------------------------------------------------------
// Shared encoder: input projection followed by causal blocks, no reduction.

struct SharedEncodeCache {
  Tensor2 frames;
  Tensor2 projected;
  std::vector<CausalBlockCache<Real>> blocks;
};

Tensor2 shared_encode(const ParamStore& store, const ModelConfig& cfg, const Tensor2& frames,
                      SharedEncodeCache* cache = nullptr);
void shared_encode_backward(ParamStore& store, const ModelConfig& cfg, const SharedEncodeCache& cache,
                            const Tensor2& d_latents);

class SharedEncoderStream {
 public:
  SharedEncoderStream(const ParamStore& store, const ModelConfig& cfg);
  Vector step(const Vector& frame);

 private:
  const ParamStore* store_;
  std::vector<CausalBlockStream<Real>> blocks_;
};

// ---------------------------------------------------------------------------
// ASR trunk: frame-pair stacking (odd tail zero padded), projection, blocks.

struct AsrEncodeCache {
  int input_len = 0;
  Tensor2 stacked;
  Tensor2 reduced;
  std::vector<CausalBlockCache<Real>> blocks;
};

Tensor2 asr_encode(const ParamStore& store, const ModelConfig& cfg, const Tensor2& latents,
                   AsrEncodeCache* cache = nullptr);
Tensor2 asr_encode_backward(ParamStore& store, const ModelConfig& cfg, const AsrEncodeCache& cache,
                            const Tensor2& d_enc);

class AsrTrunkStream {
 public:
  AsrTrunkStream(const ParamStore& store, const ModelConfig& cfg);
  // Returns an encoder vector every second latent.
  std::optional<Vector> push(const Vector& latent);
  // Zero-pads and emits a pending odd latent, if any.
  std::optional<Vector> flush();

 private:
  std::optional<Vector> emit(const Vector& first, const Vector& second);

  const ParamStore* store_;
  int d_enc_;
  std::vector<CausalBlockStream<Real>> blocks_;
  std::optional<Vector> pending_;
};

// ---------------------------------------------------------------------------
// Endpointer: source-specific projection, LSTM stack, 4-way head.

struct EpCache {
  SwitchSource source = SwitchSource::AudioFrames;
  Tensor2 inputs;
  std::vector<Tensor2> layer_inputs;                   // per layer, T x in_dim
  std::vector<std::vector<LstmCache<Real>>> lstm;      // [layer][t]
  Tensor2 top;                                         // T x H
  EpPosterior posterior;
};

EpPosterior ep_forward(const ParamStore& store, const ModelConfig& cfg, const Tensor2& inputs, SwitchSource source,
                       EpCache* cache = nullptr);
// Returns d loss / d inputs.
Tensor2 ep_backward(ParamStore& store, const ModelConfig& cfg, const EpCache& cache, const Tensor2& d_logits);

class EpStream {
 public:
  EpStream(const ParamStore& store, const ModelConfig& cfg);
  PosteriorRow step(const Vector& input, SwitchSource source);
  void reset();

 private:
  const ParamStore* store_;
  ModelConfig cfg_;
  std::vector<LstmState<Real>> states_;
};

// ---------------------------------------------------------------------------
// Transducer: previous-two-token embedding prediction network and a joiner
// with one tanh hidden layer.

Vector prediction_vector(const ParamStore& store, const ModelConfig& cfg, const TokenContext& ctx);
Vector joint_logits(const ParamStore& store, const ModelConfig& cfg, const Vector& enc, const TokenContext& ctx);

// Contexts for target positions u = 0..U.
std::vector<TokenContext> target_contexts(std::span<const int> targets);

struct TransducerCache {
  Tensor2 enc;                       // T x D_enc
  std::vector<TokenContext> contexts;  // U+1
  Tensor2 pred;                      // (U+1) x 2P
  Tensor2 hidden;                    // T*(U+1) x J
  Tensor2 probs;                     // T*(U+1) x K
};

RnntLattice transducer_lattice(const ParamStore& store, const ModelConfig& cfg, const Tensor2& enc,
                               std::span<const int> targets, TransducerCache* cache = nullptr);
// d_log_probs has the lattice layout; returns d loss / d enc.
Tensor2 transducer_backward(ParamStore& store, const ModelConfig& cfg, const TransducerCache& cache,
                            const Tensor2& d_log_probs);

}  // namespace jointep

#endif  // JOINTEP_MODELS_HPP_
