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

#include "jointep/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

namespace jointep {

using nlohmann::json;

std::string_view to_string(SpeechClass c) {
  switch (c) {
    case SpeechClass::Speech: return "speech";
    case SpeechClass::InitialSilence: return "initial";
    case SpeechClass::IntermediateSilence: return "intermediate";
    case SpeechClass::FinalSilence: return "final";
  }
  return "?";
}

FeatureFrame UtteranceRecord::frame(int t) const {
  if (t < 0 || t >= num_frames())
    throw ValidationError("frame index " + std::to_string(t) + " out of range for " + id);
  FeatureFrame f;
  f.t_index = t;
  f.t_ms = t * frame_period_ms;
  f.features = features.row(t).transpose();
  if (!domain_ids.empty()) f.domain_id = domain_ids[t];
  return f;
}

bool UtteranceRecord::operator==(const UtteranceRecord& o) const {
  return id == o.id && features.rows() == o.features.rows() && features.cols() == o.features.cols() &&
         features == o.features && domain_ids == o.domain_ids && segments == o.segments &&
         target_tokens == o.target_tokens && frame_period_ms == o.frame_period_ms;
}

namespace {

std::string seg_str(const WordSegment& s) {
  return "[" + std::to_string(s.start_ms) + "," + std::to_string(s.end_ms) + ")";
}

void validate_segments(const UtteranceRecord& utt) {
  for (std::size_t i = 0; i < utt.segments.size(); ++i) {
    const auto& s = utt.segments[i];
    if (s.start_ms >= s.end_ms)
      throw ValidationError(utt.id + ": segment " + std::to_string(i) + " " + seg_str(s) +
                            " has non-positive duration");
    if (i > 0) {
      const auto& p = utt.segments[i - 1];
      if (s.start_ms < p.end_ms)
        throw ValidationError(utt.id + ": segments " + std::to_string(i - 1) + " " + seg_str(p) + " and " +
                              std::to_string(i) + " " + seg_str(s) + " overlap or are unsorted");
    }
  }
}

}  // namespace

void validate_utterance(const UtteranceRecord& utt) {
  if (utt.frame_period_ms <= 0) throw ValidationError(utt.id + ": frame_period_ms must be positive");
  if (!utt.domain_ids.empty() && static_cast<int>(utt.domain_ids.size()) != utt.num_frames())
    throw ValidationError(utt.id + ": domain_ids length does not match frame count");
  validate_segments(utt);
  std::vector<int> flat;
  for (const auto& s : utt.segments) {
    if (s.start_ms < 0 || s.end_ms > utt.duration_ms())
      throw ValidationError(utt.id + ": segment " + seg_str(s) + " outside [0," +
                            std::to_string(utt.duration_ms()) + "]");
    flat.insert(flat.end(), s.token_ids.begin(), s.token_ids.end());
  }
  if (flat != utt.target_tokens)
    throw ValidationError(utt.id + ": target tokens differ from concatenated segment tokens");
}

FrameLabelSeq label_frames(const UtteranceRecord& utt) {
  validate_segments(utt);
  const int n = utt.num_frames();
  const int period = utt.frame_period_ms;
  std::vector<bool> speech(n, false);
  // Segments are sorted, so each frame only needs to scan forward from the
  // first segment that has not ended before it.
  std::size_t first = 0;
  for (int f = 0; f < n; ++f) {
    const int lo = f * period;
    const int hi = lo + period;
    while (first < utt.segments.size() && utt.segments[first].end_ms <= lo) ++first;
    for (std::size_t s = first; s < utt.segments.size() && utt.segments[s].start_ms < hi; ++s) {
      if (std::min(hi, utt.segments[s].end_ms) > std::max(lo, utt.segments[s].start_ms)) {
        speech[f] = true;
        break;
      }
    }
  }

  FrameLabelSeq labels(n, SpeechClass::InitialSilence);
  const auto first_it = std::find(speech.begin(), speech.end(), true);
  if (first_it == speech.end()) return labels;
  const int first_speech = static_cast<int>(first_it - speech.begin());
  const int last_speech = n - 1 - static_cast<int>(std::find(speech.rbegin(), speech.rend(), true) - speech.rbegin());
  for (int f = 0; f < n; ++f) {
    if (speech[f])
      labels[f] = SpeechClass::Speech;
    else if (f < first_speech)
      labels[f] = SpeechClass::InitialSilence;
    else if (f > last_speech)
      labels[f] = SpeechClass::FinalSilence;
    else
      labels[f] = SpeechClass::IntermediateSilence;
  }
  return labels;
}

Real speech_fraction(const std::vector<UtteranceRecord>& corpus) {
  long speech = 0;
  long total = 0;
  for (const auto& utt : corpus) {
    for (SpeechClass c : label_frames(utt)) speech += (c == SpeechClass::Speech);
    total += utt.num_frames();
  }
  if (total == 0) throw ValidationError("speech_fraction of an empty corpus");
  return static_cast<Real>(speech) / static_cast<Real>(total);
}

// ---------------------------------------------------------------------------
// Synthetic generator

void SynthConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("SynthConfig: " + m); };
  if (d_in <= 0) fail("d_in must be positive");
  if (vocab <= 0) fail("vocab must be positive");
  if (frame_period_ms <= 0) fail("frame_period_ms must be positive");
  if (num_utterances < 0) fail("num_utterances must be non-negative");
  if (min_words < 0 || max_words < min_words) fail("invalid word-count range");
  if (min_word_frames <= 0 || max_word_frames < min_word_frames) fail("invalid word-length range");
  if (max_tokens_per_word <= 0 || max_tokens_per_word > min_word_frames)
    fail("max_tokens_per_word must be in [1, min_word_frames]");
  if (terminal_vocab < 0 || terminal_vocab >= vocab) fail("terminal_vocab must leave at least one non-terminal token");
  if (!(silence_fraction >= 0.0 && silence_fraction < 1.0)) fail("silence_fraction must be in [0,1)");
  if (!(silence_jitter >= 0.0 && silence_jitter < 1.0)) fail("silence_jitter must be in [0,1)");
  if (initial_weight < 0 || gap_weight < 0 || final_weight < 0) fail("silence weights must be non-negative");
  if (!(pause_prob >= 0.0 && pause_prob <= 1.0)) fail("pause_prob must be in [0,1]");
  if (mixture_components <= 0) fail("mixture_components must be positive");
  if (!(noise_std >= 0.0)) fail("noise_std must be non-negative");
}

SynthConfig SynthConfig::short_query() { return SynthConfig{}; }

SynthConfig SynthConfig::continuous() {
  SynthConfig c;
  c.min_words = 6;
  c.max_words = 14;
  c.silence_fraction = 0.27;
  c.initial_weight = 1.0;
  c.gap_weight = 1.0;
  c.final_weight = 1.0;
  // Pauses fall between phrases, not after every word; evenly spread 27%
  // silence would otherwise be mostly one-frame gaps.
  c.pause_prob = 0.25;
  return c;
}

namespace {

struct Prototypes {
  Vector silence;
  std::vector<std::vector<Vector>> tokens;  // [token][component]
};

Prototypes make_prototypes(const SynthConfig& cfg) {
  std::mt19937_64 rng(cfg.prototype_seed);
  std::normal_distribution<Real> normal(0.0, 1.0);
  auto draw = [&](Real norm) {
    Vector v(cfg.d_in);
    for (int i = 0; i < cfg.d_in; ++i) v[i] = normal(rng);
    return Vector(v * (norm / std::max(v.norm(), Real(1e-12))));
  };
  Prototypes p;
  p.silence = draw(0.25 * cfg.speech_scale);
  p.tokens.resize(cfg.vocab);
  for (auto& comps : p.tokens)
    for (int c = 0; c < cfg.mixture_components; ++c) comps.push_back(draw(cfg.speech_scale));
  return p;
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

Real uniform_real(std::mt19937_64& rng, Real lo, Real hi) { return std::uniform_real_distribution<Real>(lo, hi)(rng); }

UtteranceRecord generate_one(const SynthConfig& cfg, const Prototypes& protos, std::mt19937_64& rng, int index) {
  const int n_words = uniform_int(rng, cfg.min_words, cfg.max_words);
  const int n_regular = cfg.vocab - cfg.terminal_vocab;

  // Word lengths and token sequences.
  std::vector<int> word_frames(n_words);
  std::vector<std::vector<int>> word_tokens(n_words);
  int speech_frames = 0;
  for (int w = 0; w < n_words; ++w) {
    word_frames[w] = uniform_int(rng, cfg.min_word_frames, cfg.max_word_frames);
    speech_frames += word_frames[w];
    const int n_tok = uniform_int(rng, 1, cfg.max_tokens_per_word);
    const bool last_word = (w == n_words - 1);
    for (int k = 0; k < n_tok; ++k) {
      int tok;
      if (last_word && k == n_tok - 1 && cfg.terminal_vocab > 0)
        tok = n_regular + uniform_int(rng, 0, cfg.terminal_vocab - 1);
      else
        tok = uniform_int(rng, 0, n_regular - 1);
      word_tokens[w].push_back(tok);
    }
  }

  // Silence budget chosen so the expected silence fraction matches the
  // configured target, then split between initial, gaps and final.
  const Real sf = cfg.silence_fraction;
  const Real jitter = uniform_real(rng, 1.0 - cfg.silence_jitter, 1.0 + cfg.silence_jitter);
  int budget = static_cast<int>(std::lround(speech_frames * sf / (1.0 - sf) * jitter));
  if (n_words == 0) budget = std::max(budget, uniform_int(rng, cfg.min_word_frames, 4 * cfg.max_word_frames));
  const int n_gaps = std::max(0, n_words - 1);
  std::vector<Real> weights;
  weights.push_back(cfg.initial_weight * uniform_real(rng, 0.5, 1.5));
  for (int g = 0; g < n_gaps; ++g) {
    Real w = cfg.gap_weight * uniform_real(rng, 0.5, 1.5);
    // Skipped entirely at 1.0 so the default stream of draws is unchanged.
    if (cfg.pause_prob < 1.0 && uniform_real(rng, 0.0, 1.0) >= cfg.pause_prob) w = 0.0;
    weights.push_back(w);
  }
  weights.push_back(cfg.final_weight * uniform_real(rng, 0.5, 1.5));
  Real wsum = 0;
  for (Real w : weights) wsum += w;
  std::vector<int> sil(weights.size(), 0);
  int used = 0;
  if (wsum > 0) {
    for (std::size_t i = 0; i < weights.size(); ++i) {
      sil[i] = static_cast<int>(std::floor(budget * weights[i] / wsum));
      used += sil[i];
    }
  }
  sil.back() += budget - used;
  if (n_words > 0) {
    sil.front() = std::max(sil.front(), 1);
    sil.back() = std::max(sil.back(), 1);
  }

  UtteranceRecord utt;
  utt.id = "utt" + std::to_string(index);
  utt.frame_period_ms = cfg.frame_period_ms;

  // Per-frame class means: -1 marks silence, otherwise (token, component).
  struct FrameSource {
    int token = -1;
  };
  std::vector<FrameSource> sources;
  auto push_silence = [&](int n) {
    for (int i = 0; i < n; ++i) sources.push_back({-1});
  };
  push_silence(sil[0]);
  for (int w = 0; w < n_words; ++w) {
    const int start = static_cast<int>(sources.size());
    const int n_tok = static_cast<int>(word_tokens[w].size());
    // Tokens split the word frames as evenly as possible.
    for (int k = 0; k < n_tok; ++k) {
      const int lo = word_frames[w] * k / n_tok;
      const int hi = word_frames[w] * (k + 1) / n_tok;
      for (int f = lo; f < hi; ++f) sources.push_back({word_tokens[w][k]});
    }
    const int end = static_cast<int>(sources.size());
    utt.segments.push_back({start * cfg.frame_period_ms, end * cfg.frame_period_ms, word_tokens[w]});
    utt.target_tokens.insert(utt.target_tokens.end(), word_tokens[w].begin(), word_tokens[w].end());
    push_silence(w + 1 < n_words ? sil[w + 1] : sil.back());
  }
  if (n_words == 0) {
    sources.clear();
    push_silence(std::max(budget, 1));
  }

  const int n = static_cast<int>(sources.size());
  Tensor2 means(n, cfg.d_in);
  std::uniform_int_distribution<int> comp(0, cfg.mixture_components - 1);
  for (int f = 0; f < n; ++f) {
    const int tok = sources[f].token;
    means.row(f) = (tok < 0 ? protos.silence : protos.tokens[tok][comp(rng)]).transpose();
  }
  // One-frame crossfade: the first frame of every new source is the average
  // of its own mean and the previous frame's mean.
  Tensor2 faded = means;
  for (int f = 1; f < n; ++f)
    if (sources[f].token != sources[f - 1].token) faded.row(f) = 0.5 * (means.row(f) + means.row(f - 1));

  std::normal_distribution<Real> noise(0.0, 1.0);
  utt.features = faded;
  for (int f = 0; f < n; ++f)
    for (int d = 0; d < cfg.d_in; ++d) utt.features(f, d) += cfg.noise_std * noise(rng);
  if (cfg.domain_id >= 0) utt.domain_ids.assign(n, cfg.domain_id);
  return utt;
}

}  // namespace

std::vector<UtteranceRecord> generate_synthetic_corpus(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const Prototypes protos = make_prototypes(cfg);
  std::mt19937_64 rng(seed);
  std::vector<UtteranceRecord> out;
  out.reserve(cfg.num_utterances);
  for (int i = 0; i < cfg.num_utterances; ++i) {
    out.push_back(generate_one(cfg, protos, rng, i));
    validate_utterance(out.back());
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON-lines serialization

namespace {

json header_json(const CorpusHeader& h) {
  return json{{"version", h.version}, {"D_in", h.d_in}, {"V", h.vocab}, {"frame_period_ms", h.frame_period_ms}};
}

json record_json(const UtteranceRecord& r) {
  json frames = json::array();
  for (int t = 0; t < r.num_frames(); ++t) {
    json row = json::array();
    for (int d = 0; d < r.dim(); ++d) row.push_back(r.features(t, d));
    frames.push_back(std::move(row));
  }
  json segs = json::array();
  for (const auto& s : r.segments) segs.push_back({{"start_ms", s.start_ms}, {"end_ms", s.end_ms}, {"tokens", s.token_ids}});
  json j = {{"id", r.id}, {"frame_period_ms", r.frame_period_ms}, {"frames", frames}, {"segments", segs},
            {"targets", r.target_tokens}};
  if (!r.domain_ids.empty()) j["domain_ids"] = r.domain_ids;
  return j;
}

UtteranceRecord record_from_json(const json& j, const CorpusHeader& h) {
  UtteranceRecord r;
  r.id = j.at("id").get<std::string>();
  r.frame_period_ms = j.at("frame_period_ms").get<int>();
  if (r.frame_period_ms != h.frame_period_ms) throw CorpusError("frame_period_ms differs from header");
  const auto& frames = j.at("frames");
  r.features.resize(static_cast<Eigen::Index>(frames.size()), h.d_in);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const auto& row = frames[t];
    if (!row.is_array() || static_cast<int>(row.size()) != h.d_in)
      throw CorpusError("frame " + std::to_string(t) + " has dimension " + std::to_string(row.size()) +
                        ", header declares D_in=" + std::to_string(h.d_in));
    for (int d = 0; d < h.d_in; ++d) r.features(static_cast<Eigen::Index>(t), d) = row[d].get<Real>();
  }
  for (const auto& s : j.at("segments"))
    r.segments.push_back({s.at("start_ms").get<int>(), s.at("end_ms").get<int>(), s.at("tokens").get<std::vector<int>>()});
  r.target_tokens = j.at("targets").get<std::vector<int>>();
  if (j.contains("domain_ids")) r.domain_ids = j.at("domain_ids").get<std::vector<int>>();
  for (int tok : r.target_tokens)
    if (tok < 0 || tok >= h.vocab) throw CorpusError("token " + std::to_string(tok) + " outside vocabulary");
  validate_utterance(r);
  return r;
}

}  // namespace

std::string serialize_corpus(const std::vector<UtteranceRecord>& records, const CorpusHeader& header) {
  std::string out = header_json(header).dump();
  out += '\n';
  for (const auto& r : records) {
    if (r.dim() != header.d_in && r.num_frames() > 0)
      throw CorpusError(r.id + ": feature dimension " + std::to_string(r.dim()) + " differs from header D_in=" +
                        std::to_string(header.d_in));
    out += record_json(r).dump();
    out += '\n';
  }
  return out;
}

void write_corpus(const std::vector<UtteranceRecord>& records, const CorpusHeader& header,
                  const std::filesystem::path& path) {
  const std::string text = serialize_corpus(records, header);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw IoError("write failed: " + path.string());
}

Corpus parse_corpus(std::string_view text) {
  Corpus c;
  std::istringstream is{std::string(text)};
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      if (!have_header) {
        c.header.version = j.at("version").get<int>();
        if (c.header.version != 1) throw VersionError("unsupported corpus version " + std::to_string(c.header.version));
        c.header.d_in = j.at("D_in").get<int>();
        c.header.vocab = j.at("V").get<int>();
        c.header.frame_period_ms = j.at("frame_period_ms").get<int>();
        if (c.header.d_in <= 0 || c.header.vocab <= 0 || c.header.frame_period_ms <= 0)
          throw CorpusError("header dimensions must be positive");
        have_header = true;
      } else {
        c.records.push_back(record_from_json(j, c.header));
      }
    } catch (const VersionError&) {
      throw;
    } catch (const std::exception& e) {
      throw CorpusError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw CorpusError("line 1: missing corpus header");
  return c;
}

Corpus read_corpus(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open corpus " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_corpus(ss.str());
}

const UtteranceRecord& find_utterance(const Corpus& corpus, std::string_view id) {
  for (const auto& r : corpus.records)
    if (r.id == id) return r;
  throw ValidationError("no utterance with id '" + std::string(id) + "'");
}

}  // namespace jointep
