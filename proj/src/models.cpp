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

#include "jointep/models.hpp"

#include <cmath>

namespace jointep {

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw ConfigError(std::string("ModelConfig: ") + name + " must be positive");
  };
  positive(d_in, "d_in");
  positive(d_enc, "d_enc");
  positive(ep_hidden, "ep_hidden");
  positive(ep_layers, "ep_layers");
  positive(vocab, "vocab");
  positive(pred_embed, "pred_embed");
  positive(joint_hidden, "joint_hidden");
  positive(conv_kernel, "conv_kernel");
  if (shared_blocks < 0 || asr_blocks < 0) throw ConfigError("ModelConfig: block counts must be non-negative");
}

std::string_view to_string(SwitchSource s) {
  return s == SwitchSource::AudioFrames ? "audio" : "latent";
}

SwitchSource sample_switch(std::mt19937_64& rng, Real p_audio) {
  return std::bernoulli_distribution(p_audio)(rng) ? SwitchSource::AudioFrames : SwitchSource::SharedLatent;
}

// ---------------------------------------------------------------------------
// Parameters

namespace {

void fill_uniform(Tensor2& m, Real scale, std::mt19937_64& rng) {
  std::uniform_real_distribution<Real> dist(-scale, scale);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
}

// Uniform with variance 1 / fan_in.
void fill_fan_in(Tensor2& m, int fan_in, std::mt19937_64& rng) {
  const Real scale = std::sqrt(3.0 / static_cast<Real>(fan_in));
  std::uniform_real_distribution<Real> dist(-scale, scale);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
}

void add_dense(ParamStore& s, const std::string& prefix, int out, int in, std::mt19937_64& rng) {
  fill_fan_in(s.add(prefix + "W", out, in).value, in, rng);
  s.add(prefix + "b", out, 1);
}

void add_block(ParamStore& s, const std::string& prefix, int dim, int kernel, std::mt19937_64& rng) {
  fill_fan_in(s.add(prefix + "pw_W", dim, dim).value, dim, rng);
  s.add(prefix + "pw_b", dim, 1);
  fill_fan_in(s.add(prefix + "conv_w", dim, kernel).value, kernel, rng);
  s.add(prefix + "conv_b", dim, 1);
}

std::string idx(const std::string& base, int i) { return base + std::to_string(i) + "/"; }

}  // namespace

void add_ep_params(ParamStore& s, const ModelConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const int H = cfg.ep_hidden;
  add_dense(s, "ep/proj_audio/", H, cfg.d_in, rng);
  add_dense(s, "ep/proj_latent/", H, cfg.d_enc, rng);
  for (int l = 0; l < cfg.ep_layers; ++l) {
    const std::string p = idx("ep/lstm", l);
    fill_fan_in(s.add(p + "W", 4 * H, 2 * H).value, 2 * H, rng);
    Tensor2& b = s.add(p + "b", 4 * H, 1).value;
    b.block(H, 0, H, 1).setOnes();  // forget gate
  }
  add_dense(s, "ep/head/", kNumSpeechClasses, H, rng);
}

void add_asr_params(ParamStore& s, const ModelConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const int D = cfg.d_enc;
  add_dense(s, "shared/in_proj/", D, cfg.d_in, rng);
  for (int i = 0; i < cfg.shared_blocks; ++i) add_block(s, idx("shared/block", i), D, cfg.conv_kernel, rng);
  add_dense(s, "asr/reduce/", D, 2 * D, rng);
  for (int i = 0; i < cfg.asr_blocks; ++i) add_block(s, idx("asr/block", i), D, cfg.conv_kernel, rng);
  fill_uniform(s.add("pred/embed", cfg.vocab + 2, cfg.pred_embed).value, std::sqrt(0.75), rng);
  const int J = cfg.joint_hidden;
  fill_fan_in(s.add("joint/enc_W", J, D).value, D, rng);
  fill_fan_in(s.add("joint/pred_W", J, 2 * cfg.pred_embed).value, 2 * cfg.pred_embed, rng);
  s.add("joint/b", J, 1);
  fill_fan_in(s.add("joint/out_W", cfg.num_symbols(), J).value, J, rng);
  s.add("joint/out_b", cfg.num_symbols(), 1);
}

ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed) {
  ParamStore s;
  std::mt19937_64 rng(seed);
  add_asr_params(s, cfg, rng);
  add_ep_params(s, cfg, rng);
  return s;
}

void check_params(const ParamStore& store, const ModelConfig& cfg, bool need_ep, bool need_asr) {
  ParamStore expected;
  std::mt19937_64 rng(0);
  if (need_asr) add_asr_params(expected, cfg, rng);
  if (need_ep) add_ep_params(expected, cfg, rng);
  for (const auto& [path, p] : expected) {
    if (!store.contains(path)) throw ShapeError("missing parameter " + path);
    const Tensor2& v = store.value(path);
    if (v.rows() != p.value.rows() || v.cols() != p.value.cols())
      throw ShapeError("parameter " + path + " has shape " + shape_str(v.rows(), v.cols()) + ", model config expects " +
                       shape_str(p.value.rows(), p.value.cols()));
  }
}

CausalBlockView<Real> block_view(const ParamStore& s, const std::string& prefix) {
  return {s.value(prefix + "pw_W"), s.vec(prefix + "pw_b"), s.value(prefix + "conv_w"), s.vec(prefix + "conv_b")};
}

CausalBlockGradView<Real> block_grad_view(ParamStore& s, const std::string& prefix) {
  return {s.grad(prefix + "pw_W"), s.grad_vec(prefix + "pw_b"), s.grad(prefix + "conv_w"), s.grad_vec(prefix + "conv_b")};
}

namespace {

Vector dense(const ParamStore& s, const std::string& prefix, const Vector& x) {
  return dense_forward<Real>(x, s.value(prefix + "W"), s.vec(prefix + "b"));
}

Vector dense_back(ParamStore& s, const std::string& prefix, const Vector& x, const Vector& dy) {
  return dense_backward<Real>(x, s.value(prefix + "W"), dy, s.grad(prefix + "W"), s.grad_vec(prefix + "b"));
}

}  // namespace

// ---------------------------------------------------------------------------
// Shared encoder

Tensor2 shared_encode(const ParamStore& s, const ModelConfig& cfg, const Tensor2& frames, SharedEncodeCache* cache) {
  if (frames.rows() == 0) throw ShapeError("shared_encode: empty input");
  if (frames.cols() != cfg.d_in)
    throw ShapeError("shared_encode: frames have dim " + std::to_string(frames.cols()) + ", expected " + std::to_string(cfg.d_in));
  const Eigen::Index T = frames.rows();
  Tensor2 h(T, cfg.d_enc);
  for (Eigen::Index t = 0; t < T; ++t) h.row(t) = dense(s, "shared/in_proj/", frames.row(t).transpose()).transpose();
  if (cache) {
    cache->frames = frames;
    cache->projected = h;
    cache->blocks.assign(static_cast<std::size_t>(cfg.shared_blocks), {});
  }
  for (int i = 0; i < cfg.shared_blocks; ++i)
    h = causal_block_forward<Real>(h, block_view(s, idx("shared/block", i)), cache ? &cache->blocks[static_cast<std::size_t>(i)] : nullptr);
  return h;
}

void shared_encode_backward(ParamStore& s, const ModelConfig& cfg, const SharedEncodeCache& cache, const Tensor2& d_latents) {
  Tensor2 d = d_latents;
  for (int i = cfg.shared_blocks - 1; i >= 0; --i) {
    const std::string p = idx("shared/block", i);
    auto g = block_grad_view(s, p);
    d = causal_block_backward<Real>(cache.blocks[static_cast<std::size_t>(i)], block_view(s, p), d, g);
  }
  for (Eigen::Index t = 0; t < d.rows(); ++t)
    dense_back(s, "shared/in_proj/", cache.frames.row(t).transpose(), d.row(t).transpose());
}

SharedEncoderStream::SharedEncoderStream(const ParamStore& store, const ModelConfig& cfg) : store_(&store) {
  for (int i = 0; i < cfg.shared_blocks; ++i) blocks_.emplace_back(block_view(store, idx("shared/block", i)));
}

Vector SharedEncoderStream::step(const Vector& frame) {
  Vector h = dense(*store_, "shared/in_proj/", frame);
  for (auto& b : blocks_) h = b.step(h);
  return h;
}

// ---------------------------------------------------------------------------
// ASR trunk

Tensor2 asr_encode(const ParamStore& s, const ModelConfig& cfg, const Tensor2& latents, AsrEncodeCache* cache) {
  if (latents.rows() == 0) throw ShapeError("asr_encode: empty input");
  if (latents.cols() != cfg.d_enc)
    throw ShapeError("asr_encode: latents have dim " + std::to_string(latents.cols()) + ", expected " + std::to_string(cfg.d_enc));
  const Eigen::Index T = latents.rows();
  const Eigen::Index R = (T + 1) / 2;
  const int D = cfg.d_enc;
  Tensor2 stacked = Tensor2::Zero(R, 2 * D);
  for (Eigen::Index t = 0; t < T; ++t) stacked.block(t / 2, (t % 2) * D, 1, D) = latents.row(t);
  Tensor2 h(R, D);
  for (Eigen::Index r = 0; r < R; ++r) h.row(r) = dense(s, "asr/reduce/", stacked.row(r).transpose()).transpose();
  if (cache) {
    cache->input_len = static_cast<int>(T);
    cache->stacked = stacked;
    cache->reduced = h;
    cache->blocks.assign(static_cast<std::size_t>(cfg.asr_blocks), {});
  }
  for (int i = 0; i < cfg.asr_blocks; ++i)
    h = causal_block_forward<Real>(h, block_view(s, idx("asr/block", i)), cache ? &cache->blocks[static_cast<std::size_t>(i)] : nullptr);
  return h;
}

Tensor2 asr_encode_backward(ParamStore& s, const ModelConfig& cfg, const AsrEncodeCache& cache, const Tensor2& d_enc) {
  Tensor2 d = d_enc;
  for (int i = cfg.asr_blocks - 1; i >= 0; --i) {
    const std::string p = idx("asr/block", i);
    auto g = block_grad_view(s, p);
    d = causal_block_backward<Real>(cache.blocks[static_cast<std::size_t>(i)], block_view(s, p), d, g);
  }
  const int D = cfg.d_enc;
  Tensor2 d_lat = Tensor2::Zero(cache.input_len, D);
  for (Eigen::Index r = 0; r < d.rows(); ++r) {
    const Vector ds = dense_back(s, "asr/reduce/", cache.stacked.row(r).transpose(), d.row(r).transpose());
    for (int half = 0; half < 2; ++half) {
      const Eigen::Index t = 2 * r + half;
      if (t < cache.input_len) d_lat.row(t) = ds.segment(half * D, D).transpose();
    }
  }
  return d_lat;
}

AsrTrunkStream::AsrTrunkStream(const ParamStore& store, const ModelConfig& cfg) : store_(&store), d_enc_(cfg.d_enc) {
  for (int i = 0; i < cfg.asr_blocks; ++i) blocks_.emplace_back(block_view(store, idx("asr/block", i)));
}

std::optional<Vector> AsrTrunkStream::emit(const Vector& first, const Vector& second) {
  Vector stacked(2 * d_enc_);
  stacked << first, second;
  Vector h = dense(*store_, "asr/reduce/", stacked);
  for (auto& b : blocks_) h = b.step(h);
  return h;
}

std::optional<Vector> AsrTrunkStream::push(const Vector& latent) {
  if (latent.size() != d_enc_) throw ShapeError("asr trunk: latent has dim " + std::to_string(latent.size()));
  if (!pending_) {
    pending_ = latent;
    return std::nullopt;
  }
  auto out = emit(*pending_, latent);
  pending_.reset();
  return out;
}

std::optional<Vector> AsrTrunkStream::flush() {
  if (!pending_) return std::nullopt;
  auto out = emit(*pending_, Vector::Zero(d_enc_));
  pending_.reset();
  return out;
}

// ---------------------------------------------------------------------------
// Endpointer

namespace {

const char* proj_prefix(SwitchSource src) {
  return src == SwitchSource::AudioFrames ? "ep/proj_audio/" : "ep/proj_latent/";
}

int source_dim(const ModelConfig& cfg, SwitchSource src) {
  return src == SwitchSource::AudioFrames ? cfg.d_in : cfg.d_enc;
}

PosteriorRow head_posterior(const ParamStore& s, const Vector& h) {
  const Vector z = dense(s, "ep/head/", h);
  return softmax(z).transpose();
}

}  // namespace

EpPosterior ep_forward(const ParamStore& s, const ModelConfig& cfg, const Tensor2& inputs, SwitchSource source, EpCache* cache) {
  if (inputs.rows() == 0) throw ShapeError("ep_forward: empty input");
  if (inputs.cols() != source_dim(cfg, source))
    throw ShapeError("ep_forward: " + std::string(to_string(source)) + " input has dim " + std::to_string(inputs.cols()) +
                     ", expected " + std::to_string(source_dim(cfg, source)));
  const Eigen::Index T = inputs.rows();
  const int H = cfg.ep_hidden;
  Tensor2 x(T, H);
  for (Eigen::Index t = 0; t < T; ++t) x.row(t) = dense(s, proj_prefix(source), inputs.row(t).transpose()).transpose();
  if (cache) {
    cache->source = source;
    cache->inputs = inputs;
    cache->layer_inputs.clear();
    cache->lstm.assign(static_cast<std::size_t>(cfg.ep_layers), std::vector<LstmCache<Real>>(static_cast<std::size_t>(T)));
  }
  for (int l = 0; l < cfg.ep_layers; ++l) {
    const std::string p = idx("ep/lstm", l);
    const Tensor2& W = s.value(p + "W");
    const auto b = s.vec(p + "b");
    if (cache) cache->layer_inputs.push_back(x);
    Tensor2 y(T, H);
    auto st = LstmState<Real>::zeros(H);
    for (Eigen::Index t = 0; t < T; ++t) {
      st = lstm_cell_step<Real>(x.row(t).transpose(), st, W, b,
                                cache ? &cache->lstm[static_cast<std::size_t>(l)][static_cast<std::size_t>(t)] : nullptr);
      y.row(t) = st.h.transpose();
    }
    x = std::move(y);
  }
  EpPosterior post(T, kNumSpeechClasses);
  for (Eigen::Index t = 0; t < T; ++t) post.row(t) = head_posterior(s, x.row(t).transpose());
  if (cache) {
    cache->top = x;
    cache->posterior = post;
  }
  return post;
}

Tensor2 ep_backward(ParamStore& s, const ModelConfig& cfg, const EpCache& cache, const Tensor2& d_logits) {
  const Eigen::Index T = cache.top.rows();
  const int H = cfg.ep_hidden;
  if (d_logits.rows() != T || d_logits.cols() != kNumSpeechClasses)
    throw ShapeError("ep_backward: d_logits is " + shape_str(d_logits.rows(), d_logits.cols()));
  Tensor2 d_out(T, H);
  for (Eigen::Index t = 0; t < T; ++t)
    d_out.row(t) = dense_back(s, "ep/head/", cache.top.row(t).transpose(), d_logits.row(t).transpose()).transpose();
  for (int l = cfg.ep_layers - 1; l >= 0; --l) {
    const std::string p = idx("ep/lstm", l);
    const Tensor2& W = s.value(p + "W");
    Tensor2& dW = s.grad(p + "W");
    auto db = s.grad_vec(p + "b");
    Tensor2 d_in(T, H);
    Vector dh_next = Vector::Zero(H);
    Vector dc_next = Vector::Zero(H);
    for (Eigen::Index t = T - 1; t >= 0; --t) {
      const Vector dh = d_out.row(t).transpose() + dh_next;
      auto g = lstm_cell_backward<Real>(cache.lstm[static_cast<std::size_t>(l)][static_cast<std::size_t>(t)], W, dh, dc_next, dW, db);
      d_in.row(t) = g.dx.transpose();
      dh_next = std::move(g.dh_prev);
      dc_next = std::move(g.dc_prev);
    }
    d_out = std::move(d_in);
  }
  Tensor2 d_inputs(T, cache.inputs.cols());
  for (Eigen::Index t = 0; t < T; ++t)
    d_inputs.row(t) = dense_back(s, proj_prefix(cache.source), cache.inputs.row(t).transpose(), d_out.row(t).transpose()).transpose();
  return d_inputs;
}

EpStream::EpStream(const ParamStore& store, const ModelConfig& cfg) : store_(&store), cfg_(cfg) { reset(); }

void EpStream::reset() { states_.assign(static_cast<std::size_t>(cfg_.ep_layers), LstmState<Real>::zeros(cfg_.ep_hidden)); }

PosteriorRow EpStream::step(const Vector& input, SwitchSource source) {
  if (input.size() != source_dim(cfg_, source))
    throw ShapeError("ep step: " + std::string(to_string(source)) + " input has dim " + std::to_string(input.size()));
  Vector x = dense(*store_, proj_prefix(source), input);
  for (int l = 0; l < cfg_.ep_layers; ++l) {
    const std::string p = idx("ep/lstm", l);
    auto& st = states_[static_cast<std::size_t>(l)];
    st = lstm_cell_step<Real>(x, st, store_->value(p + "W"), store_->vec(p + "b"));
    x = st.h;
  }
  return head_posterior(*store_, x);
}

// ---------------------------------------------------------------------------
// Transducer

namespace {

int embed_row(const ModelConfig& cfg, int token) {
  if (token == kStartToken) return cfg.vocab + 1;
  if (token < 0 || token > cfg.vocab)
    throw ValidationError("token id " + std::to_string(token) + " outside [0," + std::to_string(cfg.vocab) + "]");
  return token;
}

}  // namespace

Vector prediction_vector(const ParamStore& s, const ModelConfig& cfg, const TokenContext& ctx) {
  const Tensor2& E = s.value("pred/embed");
  const int P = cfg.pred_embed;
  Vector v(2 * P);
  v.head(P) = E.row(embed_row(cfg, ctx[0])).transpose();
  v.tail(P) = E.row(embed_row(cfg, ctx[1])).transpose();
  return v;
}

Vector joint_logits(const ParamStore& s, const ModelConfig& cfg, const Vector& enc, const TokenContext& ctx) {
  if (enc.size() != cfg.d_enc) throw ShapeError("joint_logits: encoder vector has dim " + std::to_string(enc.size()));
  const Vector pred = prediction_vector(s, cfg, ctx);
  Vector a = s.value("joint/enc_W") * enc;
  a += s.vec("joint/b");
  a += s.value("joint/pred_W") * pred;
  const Vector h = a.array().tanh().matrix();
  Vector z = s.value("joint/out_W") * h;
  z += s.vec("joint/out_b");
  return z;
}

std::vector<TokenContext> target_contexts(std::span<const int> targets) {
  std::vector<TokenContext> out;
  TokenContext ctx{kStartToken, kStartToken};
  out.push_back(ctx);
  for (int y : targets) {
    ctx = {ctx[1], y};
    out.push_back(ctx);
  }
  return out;
}

RnntLattice transducer_lattice(const ParamStore& s, const ModelConfig& cfg, const Tensor2& enc, std::span<const int> targets,
                               TransducerCache* cache) {
  if (enc.rows() == 0) throw ShapeError("transducer: empty encoder sequence");
  if (enc.cols() != cfg.d_enc) throw ShapeError("transducer: encoder dim " + std::to_string(enc.cols()));
  const int T = static_cast<int>(enc.rows());
  const int U = static_cast<int>(targets.size());
  const int K = cfg.num_symbols();
  const int J = cfg.joint_hidden;
  const auto contexts = target_contexts(targets);

  const Tensor2& enc_W = s.value("joint/enc_W");
  const Tensor2& pred_W = s.value("joint/pred_W");
  const Tensor2& out_W = s.value("joint/out_W");
  const auto jb = s.vec("joint/b");
  const auto out_b = s.vec("joint/out_b");

  Tensor2 pred(U + 1, 2 * cfg.pred_embed);
  Tensor2 pred_proj(U + 1, J);
  for (int u = 0; u <= U; ++u) {
    pred.row(u) = prediction_vector(s, cfg, contexts[static_cast<std::size_t>(u)]).transpose();
    pred_proj.row(u) = (pred_W * pred.row(u).transpose()).transpose();
  }
  RnntLattice lat(T, U, K, cfg.blank_id());
  if (cache) {
    cache->enc = enc;
    cache->contexts = contexts;
    cache->pred = pred;
    cache->hidden.resize(lat.log_probs.rows(), J);
    cache->probs.resize(lat.log_probs.rows(), K);
  }
  for (int t = 0; t < T; ++t) {
    Vector enc_proj = enc_W * enc.row(t).transpose();
    enc_proj += jb;
    for (int u = 0; u <= U; ++u) {
      const Vector a = enc_proj + pred_proj.row(u).transpose();
      const Vector h = a.array().tanh().matrix();
      Vector z = out_W * h;
      z += out_b;
      const Vector lp = log_softmax(z);
      const Eigen::Index n = lat.node(t, u);
      lat.log_probs.row(n) = lp.transpose();
      if (cache) {
        cache->hidden.row(n) = h.transpose();
        cache->probs.row(n) = lp.array().exp().matrix().transpose();
      }
    }
  }
  return lat;
}

Tensor2 transducer_backward(ParamStore& s, const ModelConfig& cfg, const TransducerCache& cache, const Tensor2& d_log_probs) {
  const int T = static_cast<int>(cache.enc.rows());
  const int U = static_cast<int>(cache.contexts.size()) - 1;
  const int J = cfg.joint_hidden;
  const int P = cfg.pred_embed;
  if (d_log_probs.rows() != static_cast<Eigen::Index>(T) * (U + 1) || d_log_probs.cols() != cfg.num_symbols())
    throw ShapeError("transducer_backward: gradient is " + shape_str(d_log_probs.rows(), d_log_probs.cols()));

  const Tensor2& enc_W = s.value("joint/enc_W");
  const Tensor2& pred_W = s.value("joint/pred_W");
  const Tensor2& out_W = s.value("joint/out_W");
  Tensor2& g_out_W = s.grad("joint/out_W");
  auto g_out_b = s.grad_vec("joint/out_b");

  Tensor2 d_enc_proj = Tensor2::Zero(T, J);
  Tensor2 d_pred_proj = Tensor2::Zero(U + 1, J);
  for (int t = 0; t < T; ++t) {
    for (int u = 0; u <= U; ++u) {
      const Eigen::Index n = static_cast<Eigen::Index>(t) * (U + 1) + u;
      const auto g = d_log_probs.row(n);
      const Real gsum = g.sum();
      if (gsum == 0.0 && g.cwiseAbs().maxCoeff() == 0.0) continue;
      const Vector dz = (g - cache.probs.row(n) * gsum).transpose();
      const Vector h = cache.hidden.row(n).transpose();
      g_out_W.noalias() += dz * h.transpose();
      g_out_b += dz;
      const Vector da = (out_W.transpose() * dz).cwiseProduct((1.0 - h.array().square()).matrix());
      d_enc_proj.row(t) += da.transpose();
      d_pred_proj.row(u) += da.transpose();
    }
  }

  Tensor2& g_enc_W = s.grad("joint/enc_W");
  auto g_b = s.grad_vec("joint/b");
  Tensor2 d_enc(T, cfg.d_enc);
  for (int t = 0; t < T; ++t) {
    const Vector dp = d_enc_proj.row(t).transpose();
    g_enc_W.noalias() += dp * cache.enc.row(t);
    g_b += dp;
    d_enc.row(t) = (enc_W.transpose() * dp).transpose();
  }
  Tensor2& g_pred_W = s.grad("joint/pred_W");
  Tensor2& g_embed = s.grad("pred/embed");
  for (int u = 0; u <= U; ++u) {
    const Vector dp = d_pred_proj.row(u).transpose();
    g_pred_W.noalias() += dp * cache.pred.row(u);
    const Vector d_pred = pred_W.transpose() * dp;
    const auto& ctx = cache.contexts[static_cast<std::size_t>(u)];
    g_embed.row(embed_row(cfg, ctx[0])) += d_pred.head(P).transpose();
    g_embed.row(embed_row(cfg, ctx[1])) += d_pred.tail(P).transpose();
  }
  return d_enc;
}

}  // namespace jointep
