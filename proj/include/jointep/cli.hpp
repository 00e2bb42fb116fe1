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

// Command-line entry points. Every command writes its outputs plus a
// manifest.json describing how to reproduce them.
//
//   jointep gen-data --config C --seed S --out corpus.jsonl
//   jointep train    --config C --arm E3 --corpus corpus.jsonl --out model_dir
//   jointep eval     --model model_dir --corpus eval.jsonl --mode short --out eval_dir
//   jointep sweep    --model model_dir --corpus eval.jsonl --wer-budget 20 --out sweep_dir
//   jointep stream   --model model_dir --corpus eval.jsonl --utt utt3 --out trace.csv
//   jointep stream   --script script.csv --mode short --out trace.csv

#ifndef JOINTEP_CLI_HPP_
#define JOINTEP_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

#include "jointep/corpus.hpp"
#include "jointep/evalkit.hpp"
#include "jointep/runtime.hpp"
#include "jointep/trainer.hpp"

namespace jointep {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Everything a command may read from a config file. Sections mirror the
// library structs: {"synth": {...}, "train": {...}, "model": {...},
// "thresholds": {...}, "sweep": {...}}. Unknown keys are rejected.
struct RunConfig {
  SynthConfig synth;
  TrainConfig train;
  Thresholds thresholds;
  SweepGrid grid = default_sweep_grid();
  int prepend_frames = 0;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string run_config_json(const RunConfig& cfg);

// Runs the tool; returns the process exit code. Diagnostics go to `err`,
// result tables to `out`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace jointep

#endif  // JOINTEP_CLI_HPP_
