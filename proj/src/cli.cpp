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

#include "jointep/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

namespace jointep {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config files

namespace {

template <typename T>
using Setter = std::function<void(const json&, T&)>;

template <typename T, typename F>
Setter<T> field(F T::*member) {
  return [member](const json& v, T& obj) { obj.*member = v.get<F>(); };
}

template <typename T>
void apply_section(const json& sec, const std::string& name, const std::map<std::string, Setter<T>>& setters, T& obj) {
  if (!sec.is_object()) throw ConfigError("config section '" + name + "' must be an object");
  for (auto it = sec.begin(); it != sec.end(); ++it) {
    auto s = setters.find(it.key());
    if (s == setters.end()) throw ConfigError("unknown config key '" + name + "." + it.key() + "'");
    try {
      s->second(it.value(), obj);
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + name + "." + it.key() + "': " + e.what());
    }
  }
}

const std::map<std::string, Setter<SynthConfig>>& synth_setters() {
  static const std::map<std::string, Setter<SynthConfig>> m = {
      {"d_in", field(&SynthConfig::d_in)},
      {"vocab", field(&SynthConfig::vocab)},
      {"frame_period_ms", field(&SynthConfig::frame_period_ms)},
      {"num_utterances", field(&SynthConfig::num_utterances)},
      {"min_words", field(&SynthConfig::min_words)},
      {"max_words", field(&SynthConfig::max_words)},
      {"min_word_frames", field(&SynthConfig::min_word_frames)},
      {"max_word_frames", field(&SynthConfig::max_word_frames)},
      {"max_tokens_per_word", field(&SynthConfig::max_tokens_per_word)},
      {"terminal_vocab", field(&SynthConfig::terminal_vocab)},
      {"silence_fraction", field(&SynthConfig::silence_fraction)},
      {"silence_jitter", field(&SynthConfig::silence_jitter)},
      {"initial_weight", field(&SynthConfig::initial_weight)},
      {"gap_weight", field(&SynthConfig::gap_weight)},
      {"final_weight", field(&SynthConfig::final_weight)},
      {"pause_prob", field(&SynthConfig::pause_prob)},
      {"speech_scale", field(&SynthConfig::speech_scale)},
      {"mixture_components", field(&SynthConfig::mixture_components)},
      {"noise_std", field(&SynthConfig::noise_std)},
      {"prototype_seed", field(&SynthConfig::prototype_seed)},
      {"domain_id", field(&SynthConfig::domain_id)},
  };
  return m;
}

const std::map<std::string, Setter<ModelConfig>>& model_setters() {
  static const std::map<std::string, Setter<ModelConfig>> m = {
      {"d_in", field(&ModelConfig::d_in)},
      {"d_enc", field(&ModelConfig::d_enc)},
      {"ep_hidden", field(&ModelConfig::ep_hidden)},
      {"ep_layers", field(&ModelConfig::ep_layers)},
      {"vocab", field(&ModelConfig::vocab)},
      {"pred_embed", field(&ModelConfig::pred_embed)},
      {"joint_hidden", field(&ModelConfig::joint_hidden)},
      {"shared_blocks", field(&ModelConfig::shared_blocks)},
      {"asr_blocks", field(&ModelConfig::asr_blocks)},
      {"conv_kernel", field(&ModelConfig::conv_kernel)},
  };
  return m;
}

const std::map<std::string, Setter<TrainConfig>>& train_setters() {
  static const std::map<std::string, Setter<TrainConfig>> m = {
      {"arm", [](const json& v, TrainConfig& c) { c.arm = parse_arm(v.get<std::string>()); }},
      {"lambda", field(&TrainConfig::lambda)},
      {"learning_rate", field(&TrainConfig::learning_rate)},
      {"batch_size", field(&TrainConfig::batch_size)},
      {"steps", field(&TrainConfig::steps)},
      {"seed", field(&TrainConfig::seed)},
      {"switch_prob", field(&TrainConfig::switch_prob)},
      {"append_eos", field(&TrainConfig::append_eos)},
  };
  return m;
}

const std::map<std::string, Setter<Thresholds>>& threshold_setters() {
  static const std::map<std::string, Setter<Thresholds>> m = {
      {"theta_vad", field(&Thresholds::theta_vad)},
      {"theta_eoq", field(&Thresholds::theta_eoq)},
      {"theta_eos", field(&Thresholds::theta_eos)},
      {"wait_ms", field(&Thresholds::wait_ms)},
  };
  return m;
}

const std::map<std::string, Setter<SweepGrid>>& grid_setters() {
  static const std::map<std::string, Setter<SweepGrid>> m = {
      {"theta_eoq", field(&SweepGrid::theta_eoq)},
      {"theta_eos", field(&SweepGrid::theta_eos)},
      {"wait_ms", field(&SweepGrid::wait_ms)},
  };
  return m;
}

void apply_run_config(const std::string& text, RunConfig& cfg) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k == "synth") {
      apply_section(it.value(), k, synth_setters(), cfg.synth);
    } else if (k == "train") {
      apply_section(it.value(), k, train_setters(), cfg.train);
    } else if (k == "model") {
      apply_section(it.value(), k, model_setters(), cfg.train.model);
    } else if (k == "thresholds") {
      apply_section(it.value(), k, threshold_setters(), cfg.thresholds);
    } else if (k == "sweep") {
      apply_section(it.value(), k, grid_setters(), cfg.grid);
    } else if (k == "prepend_frames") {
      cfg.prepend_frames = it.value().get<int>();
    } else {
      throw ConfigError("unknown config section '" + k + "'");
    }
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  RunConfig cfg;
  apply_run_config(json_text, cfg);
  return cfg;
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(read_file(path)); }

std::string run_config_json(const RunConfig& c) {
  const SynthConfig& s = c.synth;
  const TrainConfig& t = c.train;
  json j;
  j["synth"] = {{"d_in", s.d_in},
                {"vocab", s.vocab},
                {"frame_period_ms", s.frame_period_ms},
                {"num_utterances", s.num_utterances},
                {"min_words", s.min_words},
                {"max_words", s.max_words},
                {"min_word_frames", s.min_word_frames},
                {"max_word_frames", s.max_word_frames},
                {"max_tokens_per_word", s.max_tokens_per_word},
                {"terminal_vocab", s.terminal_vocab},
                {"silence_fraction", s.silence_fraction},
                {"silence_jitter", s.silence_jitter},
                {"initial_weight", s.initial_weight},
                {"gap_weight", s.gap_weight},
                {"final_weight", s.final_weight},
                {"pause_prob", s.pause_prob},
                {"speech_scale", s.speech_scale},
                {"mixture_components", s.mixture_components},
                {"noise_std", s.noise_std},
                {"prototype_seed", s.prototype_seed},
                {"domain_id", s.domain_id}};
  j["train"] = {{"arm", to_string(t.arm)},
                {"lambda", t.lambda},
                {"learning_rate", t.learning_rate},
                {"batch_size", t.batch_size},
                {"steps", t.steps},
                {"seed", t.seed},
                {"switch_prob", t.switch_prob},
                {"append_eos", t.append_eos}};
  j["model"] = json::parse(model_config_json(t.model));
  j["model"].erase("eos_id");
  j["model"].erase("blank_id");
  j["thresholds"] = {{"theta_vad", c.thresholds.theta_vad},
                     {"theta_eoq", c.thresholds.theta_eoq},
                     {"theta_eos", c.thresholds.theta_eos},
                     {"wait_ms", c.thresholds.wait_ms}};
  j["sweep"] = {{"theta_eoq", c.grid.theta_eoq}, {"theta_eos", c.grid.theta_eos}, {"wait_ms", c.grid.wait_ms}};
  j["prepend_frames"] = c.prepend_frames;
  return j.dump(1);
}

// ---------------------------------------------------------------------------
// Commands

namespace {

namespace fs = std::filesystem;

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> arm;
  std::optional<std::string> mode;
  std::optional<Real> theta_vad, theta_eoq, theta_eos, wer_budget;
  std::optional<long> wait_ms;
  std::optional<int> prepend_frames;
  std::string out;
  std::string corpus;
  std::string model;
  std::string utt;
  std::string script;
  int frame_ms = 30;
};

class Manifest {
 public:
  Manifest(std::string command, const std::vector<std::string>& argv)
      : start_(std::chrono::steady_clock::now()), started_at_(std::time(nullptr)) {
    j_["command"] = std::move(command);
    j_["argv"] = argv;
    j_["tool_version"] = JOINTEP_VERSION;
    j_["inputs"] = json::object();
    j_["outputs"] = json::array();
  }
  void set_config(const std::string& config_json) { j_["config"] = json::parse(config_json); }
  void set_seed(std::uint64_t seed) { j_["seed"] = seed; }
  void input(const std::string& name, const std::string& path) { j_["inputs"][name] = path; }
  void output(const fs::path& path) { j_["outputs"].push_back(path.string()); }
  void note(const std::string& key, json value) { j_[key] = std::move(value); }

  void write(const fs::path& path) {
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&started_at_));
    j_["wall_clock"] = {
        {"started_at", buf},
        {"elapsed_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count()}};
    write_text(path, j_.dump(1) + "\n");
  }

 private:
  json j_;
  std::chrono::steady_clock::time_point start_;
  std::time_t started_at_;
};

fs::path manifest_beside(const fs::path& file) { return fs::path(file.string() + ".manifest.json"); }

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

RunConfig base_config(const CommonArgs& a) {
  RunConfig cfg;
  if (a.mode && parse_mode(*a.mode) == Mode::Continuous) cfg.synth = SynthConfig::continuous();
  if (!a.config.empty()) apply_run_config(read_file(a.config), cfg);
  if (a.seed) cfg.train.seed = *a.seed;
  if (a.arm) cfg.train.arm = parse_arm(*a.arm);
  if (a.theta_vad) cfg.thresholds.theta_vad = *a.theta_vad;
  if (a.theta_eoq) cfg.thresholds.theta_eoq = *a.theta_eoq;
  if (a.theta_eos) cfg.thresholds.theta_eos = *a.theta_eos;
  if (a.wait_ms) cfg.thresholds.wait_ms = *a.wait_ms;
  if (a.prepend_frames) cfg.prepend_frames = *a.prepend_frames;
  cfg.grid.theta_vad = cfg.thresholds.theta_vad;
  cfg.thresholds.validate();
  return cfg;
}

void check_compatible(const CorpusHeader& h, const ModelConfig& m) {
  if (h.d_in != m.d_in)
    throw Error("corpus/model mismatch: corpus D_in " + std::to_string(h.d_in) + " vs model d_in " +
                std::to_string(m.d_in));
  if (h.vocab != m.vocab)
    throw Error("corpus/model mismatch: corpus V " + std::to_string(h.vocab) + " vs model vocab " +
                std::to_string(m.vocab));
}

std::string fmt9(Real v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

int cmd_gen_data(const CommonArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  RunConfig cfg = base_config(a);
  cfg.synth.validate();
  const std::uint64_t seed = a.seed.value_or(0);
  const auto records = generate_synthetic_corpus(cfg.synth, seed);
  const fs::path path = a.out;
  ensure_parent(path);
  write_corpus(records, CorpusHeader{1, cfg.synth.d_in, cfg.synth.vocab, cfg.synth.frame_period_ms}, path);
  Manifest m("gen-data", argv);
  m.set_config(run_config_json(cfg));
  m.set_seed(seed);
  if (!a.config.empty()) m.input("config", a.config);
  m.output(path);
  m.note("speech_fraction", speech_fraction(records));
  m.write(manifest_beside(path));
  out << "wrote " << records.size() << " utterances to " << path.string() << "\n";
  return kExitOk;
}

json report_json(const TrainConfig& cfg, const TrainReport& r, std::optional<int> diverged_at) {
  json j;
  j["arm"] = to_string(cfg.arm);
  j["steps_completed"] = r.losses.size();
  j["audio_utterances"] = r.audio_utterances;
  j["latent_utterances"] = r.latent_utterances;
  json fm = json::object();
  for (const auto& [k, v] : r.final_metrics) fm[k] = v;
  j["final_metrics"] = fm;
  j["checkpoint_path"] = r.checkpoint_path;
  if (diverged_at) j["diverged_at_step"] = *diverged_at;
  return j;
}

std::string losses_csv(const std::vector<StepLoss>& losses) {
  std::string s = "step,asr,ep,multitask\n";
  for (std::size_t i = 0; i < losses.size(); ++i)
    s += std::to_string(i) + ',' + fmt9(losses[i].asr) + ',' + fmt9(losses[i].ep) + ',' + fmt9(losses[i].multitask) +
         '\n';
  return s;
}

void fill_final_metrics(TrainReport& r) {
  const std::size_t n = r.losses.size();
  const std::size_t w = std::min<std::size_t>(50, n);
  if (w == 0) return;
  Real asr = 0, ep = 0, mt = 0;
  for (std::size_t i = n - w; i < n; ++i) {
    asr += r.losses[i].asr;
    ep += r.losses[i].ep;
    mt += r.losses[i].multitask;
  }
  r.final_metrics["asr_loss_last50"] = asr / static_cast<Real>(w);
  r.final_metrics["ep_loss_last50"] = ep / static_cast<Real>(w);
  r.final_metrics["multitask_loss_last50"] = mt / static_cast<Real>(w);
}

int cmd_train(const CommonArgs& a, const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg = base_config(a);
  cfg.train.validate();
  const Corpus corpus = read_corpus(a.corpus);
  check_compatible(corpus.header, cfg.train.model);
  const fs::path dir = a.out;
  fs::create_directories(dir);
  Manifest m("train", argv);
  m.set_config(run_config_json(cfg));
  m.set_seed(cfg.train.seed);
  m.input("corpus", a.corpus);
  if (!a.config.empty()) m.input("config", a.config);

  std::vector<StepLoss> seen;
  TrainResult result;
  std::optional<int> diverged_at;
  std::string failure;
  try {
    result = train(cfg.train, corpus.records, [&seen](int, const StepLoss& l) { seen.push_back(l); });
  } catch (const DivergenceError& e) {
    diverged_at = e.step();
    failure = e.what();
    result.report.losses = seen;
  }
  TrainReport& report = result.report;
  if (!diverged_at) {
    const auto written = save_model_set(result.model, dir);
    for (const auto& p : written) m.output(p);
    report.checkpoint_path = written.front().string();
  }
  fill_final_metrics(report);
  write_text(dir / "train_report.json", report_json(cfg.train, report, diverged_at).dump(1) + "\n");
  write_text(dir / "train_losses.csv", losses_csv(report.losses));
  m.output(dir / "train_report.json");
  m.output(dir / "train_losses.csv");
  m.write(dir / "manifest.json");
  if (diverged_at) {
    err << "error: " << failure << "\n";
    return kExitFailure;
  }
  out << "arm " << to_string(cfg.train.arm) << ": " << report.losses.size() << " steps, audio/latent utterances "
      << report.audio_utterances << "/" << report.latent_utterances << ", final multitask loss "
      << fmt9(report.final_metrics["multitask_loss_last50"]) << "\n";
  return kExitOk;
}

ModelSet load_checked_model(const std::string& model_dir, const CorpusHeader& header) {
  ModelSet model = load_model_set(model_dir);
  check_compatible(header, model.config);
  return model;
}

int cmd_eval(const CommonArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  RunConfig cfg = base_config(a);
  const Mode mode = parse_mode(a.mode.value_or("short"));
  const Corpus corpus = read_corpus(a.corpus);
  const ModelSet model = load_checked_model(a.model, corpus.header);
  NeuralBackend backend(model, default_routing(model.arm));
  const CorpusEvaluation ev =
      evaluate_corpus(backend, corpus.records, mode, cfg.thresholds, SessionOptions{cfg.prepend_frames});

  const fs::path dir = a.out;
  fs::create_directories(dir);
  std::string table;
  if (mode == Mode::ShortQuery) {
    table = "wer,ep50_ms,ep90_ms\n" + fmt9(ev.wer.wer) + ',' + std::to_string(ev.latency.ep50) + ',' +
            std::to_string(ev.latency.ep90) + '\n';
  } else {
    table = "wer,del,ins,sub,speech_pct\n" + fmt9(ev.wer.wer) + ',' + fmt9(ev.wer.del_rate) + ',' +
            fmt9(ev.wer.ins_rate) + ',' + fmt9(ev.wer.sub_rate) + ',' + fmt9(ev.speech_pct) + '\n';
  }
  std::string per_utt = "id,ref,hyp,endpoint_ms,latency_ms,unfiltered_frames,frames\n";
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    const auto& utt = corpus.records[i];
    const auto& s = ev.sessions[i];
    auto join = [](const std::vector<int>& v) {
      std::string r;
      for (std::size_t k = 0; k < v.size(); ++k) r += (k ? " " : "") + std::to_string(v[k]);
      return r;
    };
    long kept = 0;
    for (const auto& r : s.trace) kept += !r.filtered;
    std::string ep_ms, lat;
    if (s.event) ep_ms = std::to_string(s.event->endpoint_ms);
    if (mode == Mode::ShortQuery && !utt.segments.empty()) lat = std::to_string(endpoint_latency(s, utt).latency_ms);
    per_utt += utt.id + ',' + join(utt.target_tokens) + ',' + join(s.hypothesis) + ',' + ep_ms + ',' + lat + ',' +
               std::to_string(kept) + ',' + std::to_string(s.total_frames) + '\n';
  }
  write_text(dir / "metrics.csv", table);
  write_text(dir / "per_utterance.csv", per_utt);

  Manifest m("eval", argv);
  m.set_config(run_config_json(cfg));
  m.note("mode", std::string(to_string(mode)));
  m.input("model", a.model);
  m.input("corpus", a.corpus);
  if (!a.config.empty()) m.input("config", a.config);
  m.output(dir / "metrics.csv");
  m.output(dir / "per_utterance.csv");
  m.write(dir / "manifest.json");
  out << table;
  return kExitOk;
}

int cmd_sweep(const CommonArgs& a, const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg = base_config(a);
  if (!a.wer_budget) throw ConfigError("sweep requires --wer-budget");
  const Corpus corpus = read_corpus(a.corpus);
  const ModelSet model = load_checked_model(a.model, corpus.header);
  NeuralBackend backend(model, default_routing(model.arm));
  const auto points = evaluate_grid(cfg.grid, corpus.records, backend, SessionOptions{cfg.prepend_frames});

  const fs::path dir = a.out;
  fs::create_directories(dir);
  write_text(dir / "sweep.csv", format_sweep_csv(points));
  write_text(dir / "curve.csv", format_curve_csv(tradeoff_curve(points)));
  Manifest m("sweep", argv);
  m.set_config(run_config_json(cfg));
  m.note("wer_budget", *a.wer_budget);
  m.input("model", a.model);
  m.input("corpus", a.corpus);
  if (!a.config.empty()) m.input("config", a.config);
  m.output(dir / "sweep.csv");
  m.output(dir / "curve.csv");
  int rc = kExitOk;
  try {
    const std::size_t sel = select_point(points, *a.wer_budget);
    const std::string selected = format_sweep_csv({points[sel]});
    write_text(dir / "selected.csv", selected);
    m.output(dir / "selected.csv");
    out << selected;
  } catch (const BudgetError& e) {
    write_text(dir / "best_wer.csv", format_sweep_csv({e.best()}));
    m.output(dir / "best_wer.csv");
    err << "error: " << e.what() << "\n";
    rc = kExitFailure;
  }
  m.write(dir / "manifest.json");
  return rc;
}

int cmd_stream(const CommonArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  RunConfig cfg = base_config(a);
  const Mode mode = parse_mode(a.mode.value_or("short"));
  Manifest m("stream", argv);
  m.set_config(run_config_json(cfg));
  m.note("mode", std::string(to_string(mode)));
  if (!a.config.empty()) m.input("config", a.config);

  SessionResult result;
  const SessionOptions opts{cfg.prepend_frames};
  if (!a.script.empty()) {
    if (!a.model.empty() || !a.corpus.empty()) throw ConfigError("--script cannot be combined with --model/--corpus");
    if (a.frame_ms <= 0) throw ConfigError("--frame-ms must be positive");
    ScriptedBackend backend(read_script(a.script));
    UtteranceRecord utt;
    utt.id = "script";
    utt.frame_period_ms = a.frame_ms;
    utt.features = Tensor2::Zero(static_cast<Eigen::Index>(read_script(a.script).size()), 1);
    result = run_session(utt, mode, cfg.thresholds, backend, opts);
    m.input("script", a.script);
  } else {
    if (a.model.empty() || a.corpus.empty() || a.utt.empty())
      throw ConfigError("stream needs --script, or --model, --corpus and --utt");
    const Corpus corpus = read_corpus(a.corpus);
    const ModelSet model = load_checked_model(a.model, corpus.header);
    NeuralBackend backend(model, default_routing(model.arm));
    result = run_session(find_utterance(corpus, a.utt), mode, cfg.thresholds, backend, opts);
    m.input("model", a.model);
    m.input("corpus", a.corpus);
    m.note("utt", a.utt);
  }
  const fs::path path = a.out;
  ensure_parent(path);
  export_trace(result.trace, path);
  m.output(path);
  json summary = {{"frames", result.total_frames}, {"trace_rows", result.trace.size()}, {"hypothesis", result.hypothesis}};
  if (result.event)
    summary["event"] = {{"source", to_string(result.event->source)},
                        {"fire_ms", result.event->fire_ms},
                        {"endpoint_ms", result.event->endpoint_ms}};
  m.note("session", summary);
  m.write(manifest_beside(path));
  out << summary.dump() << "\n";
  return kExitOk;
}

void add_common(CLI::App* c, CommonArgs& a, bool thresholds) {
  c->add_option("--config", a.config, "JSON config file")->check(CLI::ExistingFile);
  c->add_option("--seed", a.seed, "Random seed");
  c->add_option("--out", a.out, "Output path")->required();
  if (thresholds) {
    c->add_option("--theta-vad", a.theta_vad, "Speech posterior threshold for frame filtering");
    c->add_option("--theta-eoq", a.theta_eoq, "Final-silence posterior threshold");
    c->add_option("--theta-eos", a.theta_eos, "Decoder </s> cost threshold");
    c->add_option("--wait-ms", a.wait_ms, "Mandatory wait after the first end-of-query signal");
    c->add_option("--prepend-frames", a.prepend_frames, "Filtered frames replayed to ASR when speech starts");
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"jointep: joint ASR and endpointer training, streaming inference and evaluation", "jointep"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(JOINTEP_VERSION));
  CommonArgs a;
  const std::vector<std::string> modes = {"short", "continuous"};
  const std::vector<std::string> arms = {"B1", "E1", "E2", "E3"};

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic corpus");
  add_common(gen, a, false);
  gen->add_option("--mode", a.mode, "Corpus preset")->check(CLI::IsMember(modes));

  auto* tr = app.add_subcommand("train", "Train one experiment arm");
  add_common(tr, a, false);
  tr->add_option("--arm", a.arm, "B1, E1, E2 or E3")->check(CLI::IsMember(arms));
  tr->add_option("--corpus", a.corpus, "Training corpus")->required()->check(CLI::ExistingFile);

  auto* ev = app.add_subcommand("eval", "Evaluate a trained model");
  add_common(ev, a, true);
  ev->add_option("--mode", a.mode, "Session mode")->check(CLI::IsMember(modes));
  ev->add_option("--model", a.model, "Model directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--corpus", a.corpus, "Evaluation corpus")->required()->check(CLI::ExistingFile);

  auto* sw = app.add_subcommand("sweep", "Grid-search end-of-query thresholds");
  add_common(sw, a, true);
  sw->add_option("--model", a.model, "Model directory")->required()->check(CLI::ExistingDirectory);
  sw->add_option("--corpus", a.corpus, "Evaluation corpus")->required()->check(CLI::ExistingFile);
  sw->add_option("--wer-budget", a.wer_budget, "Maximum WER (percent) for the selected point")->required();

  auto* st = app.add_subcommand("stream", "Run one streaming session and export its trace");
  add_common(st, a, true);
  st->add_option("--mode", a.mode, "Session mode")->check(CLI::IsMember(modes));
  st->add_option("--model", a.model, "Model directory")->check(CLI::ExistingDirectory);
  st->add_option("--corpus", a.corpus, "Corpus holding the utterance")->check(CLI::ExistingFile);
  st->add_option("--utt", a.utt, "Utterance id");
  st->add_option("--script", a.script, "Scripted posterior CSV (test double)")->check(CLI::ExistingFile);
  st->add_option("--frame-ms", a.frame_ms, "Frame period for scripted sessions");

  std::vector<std::string> argv{"jointep"};
  argv.insert(argv.end(), args.begin(), args.end());
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(a, argv, out);
    if (tr->parsed()) return cmd_train(a, argv, out, err);
    if (ev->parsed()) return cmd_eval(a, argv, out);
    if (sw->parsed()) return cmd_sweep(a, argv, out, err);
    if (st->parsed()) return cmd_stream(a, argv, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace jointep
