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

#ifndef JOINTEP_CORPUS_HPP_
#define JOINTEP_CORPUS_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "jointep/common.hpp"

namespace jointep {

// Integer ids are the softmax indices of the endpointer head.
enum class SpeechClass : int {
  Speech = 0,
  InitialSilence = 1,
  IntermediateSilence = 2,
  FinalSilence = 3,
};

inline constexpr int kNumSpeechClasses = 4;

std::string_view to_string(SpeechClass c);

struct FeatureFrame {
  int t_index = 0;
  int t_ms = 0;
  Vector features;
  std::optional<int> domain_id;
};

struct WordSegment {
  int start_ms = 0;
  int end_ms = 0;
  std::vector<int> token_ids;

  bool operator==(const WordSegment&) const = default;
};

// Features are stored as one row per frame; FeatureFrame views are built on
// demand by frame().
struct UtteranceRecord {
  std::string id;
  Tensor2 features;
  std::vector<int> domain_ids;  // empty, or one per frame
  std::vector<WordSegment> segments;
  std::vector<int> target_tokens;
  int frame_period_ms = 30;

  int num_frames() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }
  int duration_ms() const { return num_frames() * frame_period_ms; }
  FeatureFrame frame(int t) const;

  bool operator==(const UtteranceRecord& o) const;
};

using FrameLabelSeq = std::vector<SpeechClass>;

// Checks record invariants (sorted non-overlapping segments, targets equal to
// the flattened segment tokens, segment times inside the utterance).
void validate_utterance(const UtteranceRecord& utt);

FrameLabelSeq label_frames(const UtteranceRecord& utt);

// Fraction of frames labeled Speech over a set of utterances.
Real speech_fraction(const std::vector<UtteranceRecord>& corpus);

struct SynthConfig {
  int d_in = 8;
  int vocab = 8;
  int frame_period_ms = 30;
  int num_utterances = 1000;
  int min_words = 2;
  int max_words = 5;
  int min_word_frames = 4;
  int max_word_frames = 8;
  int max_tokens_per_word = 1;
  // The last `terminal_vocab` token ids are only used as the final word of an
  // utterance; all other words come from the remaining ids. Off by default:
  // a guessable last word lets endpointers fire before speech ends.
  int terminal_vocab = 0;
  Real silence_fraction = 0.5;
  Real silence_jitter = 0.2;
  Real initial_weight = 1.0;
  Real gap_weight = 0.3;
  Real final_weight = 3.0;
  // Chance that a word boundary is a pause. Boundaries that are not pauses
  // get no silence, so the gap share goes to the pauses that remain.
  Real pause_prob = 1.0;
  Real speech_scale = 1.5;
  int mixture_components = 1;
  Real noise_std = 0.5;
  std::uint64_t prototype_seed = 1234;
  int domain_id = -1;  // negative: no domain tag

  void validate() const;

  static SynthConfig short_query();
  static SynthConfig continuous();
};

std::vector<UtteranceRecord> generate_synthetic_corpus(const SynthConfig& cfg, std::uint64_t seed);

class CorpusError : public Error {
 public:
  using Error::Error;
};

struct CorpusHeader {
  int version = 1;
  int d_in = 0;
  int vocab = 0;
  int frame_period_ms = 30;
};

struct Corpus {
  CorpusHeader header;
  std::vector<UtteranceRecord> records;
};

void write_corpus(const std::vector<UtteranceRecord>& records, const CorpusHeader& header,
                  const std::filesystem::path& path);
std::string serialize_corpus(const std::vector<UtteranceRecord>& records, const CorpusHeader& header);
Corpus read_corpus(const std::filesystem::path& path);
Corpus parse_corpus(std::string_view text);

const UtteranceRecord& find_utterance(const Corpus& corpus, std::string_view id);

}  // namespace jointep

#endif  // JOINTEP_CORPUS_HPP_
