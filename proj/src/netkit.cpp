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

#include "jointep/netkit.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace jointep {

using nlohmann::json;

Param& ParamStore::add(const std::string& path, Eigen::Index rows, Eigen::Index cols) {
  if (rows <= 0 || cols <= 0) throw ShapeError("parameter " + path + " must have positive shape");
  auto [it, inserted] = params_.emplace(path, Param{Tensor2::Zero(rows, cols), Tensor2::Zero(rows, cols)});
  if (!inserted) throw ConfigError("duplicate parameter path " + path);
  return it->second;
}

Param& ParamStore::at(const std::string& path) {
  auto it = params_.find(path);
  if (it == params_.end()) throw ConfigError("unknown parameter " + path);
  return it->second;
}

const Param& ParamStore::at(const std::string& path) const {
  auto it = params_.find(path);
  if (it == params_.end()) throw ConfigError("unknown parameter " + path);
  return it->second;
}

Eigen::Map<const Vector> ParamStore::vec(const std::string& path) const {
  const Tensor2& v = value(path);
  if (v.rows() != 1 && v.cols() != 1) throw ShapeError(path + " is not a vector: " + shape_str(v.rows(), v.cols()));
  return Eigen::Map<const Vector>(v.data(), v.size());
}

Eigen::Map<Vector> ParamStore::grad_vec(const std::string& path) {
  Tensor2& g = grad(path);
  if (g.rows() != 1 && g.cols() != 1) throw ShapeError(path + " is not a vector: " + shape_str(g.rows(), g.cols()));
  return Eigen::Map<Vector>(g.data(), g.size());
}

void ParamStore::zero_grad() {
  for (auto& [_, p] : params_) p.grad.setZero();
}

std::size_t ParamStore::num_scalars() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

std::vector<std::string> ParamStore::paths() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [k, _] : params_) out.push_back(k);
  return out;
}

ParamStore ParamStore::subset(const std::string& prefix) const {
  ParamStore out;
  for (const auto& [k, p] : params_)
    if (k.rfind(prefix, 0) == 0) out.params_.emplace(k, p);
  return out;
}

ParamStore ParamStore::without(const std::string& prefix) const {
  ParamStore out;
  for (const auto& [k, p] : params_)
    if (k.rfind(prefix, 0) != 0) out.params_.emplace(k, p);
  return out;
}

void ParamStore::merge(const ParamStore& other) {
  for (const auto& [k, p] : other.params_) {
    if (!params_.emplace(k, p).second) throw ConfigError("merge: duplicate parameter path " + k);
  }
}

bool ParamStore::same_values(const ParamStore& other) const {
  if (params_.size() != other.params_.size()) return false;
  auto a = params_.begin();
  auto b = other.params_.begin();
  for (; a != params_.end(); ++a, ++b) {
    if (a->first != b->first) return false;
    const Tensor2& x = a->second.value;
    const Tensor2& y = b->second.value;
    if (x.rows() != y.rows() || x.cols() != y.cols()) return false;
    if (std::memcmp(x.data(), y.data(), sizeof(Real) * static_cast<std::size_t>(x.size())) != 0) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

Real relative_error(Real analytic, Real numeric, Real floor) {
  const Real denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const LossFn& f, ParamStore& store, Real eps, Real tol) {
  store.zero_grad();
  const Real base = f(store);
  if (!std::isfinite(base)) throw NumericError("grad_check: loss is not finite");
  std::map<std::string, Tensor2> analytic;
  for (auto& [path, p] : store) analytic.emplace(path, p.grad);

  GradCheckReport report;
  for (auto& [path, p] : store) {
    GradCheckEntry entry;
    entry.path = path;
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      Real& v = p.value.data()[i];
      const Real saved = v;
      v = saved + eps;
      const Real fp = f(store);
      v = saved - eps;
      const Real fm = f(store);
      v = saved;
      if (!std::isfinite(fp) || !std::isfinite(fm)) throw NumericError("grad_check: loss is not finite at " + path);
      const Real numeric = (fp - fm) / (2 * eps);
      const Real a = analytic.at(path).data()[i];
      const Real err = relative_error(a, numeric);
      if (err > entry.max_rel_error || i == 0) {
        entry.max_rel_error = err;
        entry.worst_index = i;
        entry.analytic = a;
        entry.numeric = numeric;
      }
    }
    if (entry.max_rel_error >= report.max_rel_error) {
      report.max_rel_error = entry.max_rel_error;
      report.worst_param = path;
    }
    report.entries.push_back(entry);
  }
  for (auto& [path, p] : store) p.grad = analytic.at(path);
  report.passed = report.max_rel_error < tol;
  return report;
}

// ---------------------------------------------------------------------------

std::uint64_t params_checksum(const ParamStore& store) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& [path, p] : store) {
    mix(path.data(), path.size());
    const std::int64_t shape[2] = {p.value.rows(), p.value.cols()};
    mix(shape, sizeof(shape));
    mix(p.value.data(), sizeof(Real) * static_cast<std::size_t>(p.value.size()));
  }
  return h;
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string serialize_params(const ParamStore& store, const std::string& metadata_json) {
  json params = json::array();
  for (const auto& [path, p] : store) {
    json values = json::array();
    for (Eigen::Index i = 0; i < p.value.size(); ++i) values.push_back(p.value.data()[i]);
    params.push_back({{"path", path}, {"rows", p.value.rows()}, {"cols", p.value.cols()}, {"values", values}});
  }
  json doc = {{"format", "jointep-params"},
              {"version", kCheckpointVersion},
              {"metadata", json::parse(metadata_json)},
              {"checksum", hex64(params_checksum(store))},
              {"params", params}};
  return doc.dump(1) + "\n";
}

CheckpointContents parse_params(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw IntegrityError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  CheckpointContents out;
  try {
    if (doc.at("format").get<std::string>() != "jointep-params") throw IntegrityError("not a jointep checkpoint");
    const int version = doc.at("version").get<int>();
    if (version != kCheckpointVersion)
      throw VersionError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                         std::to_string(kCheckpointVersion) + ")");
    for (const auto& entry : doc.at("params")) {
      const auto path = entry.at("path").get<std::string>();
      const auto rows = entry.at("rows").get<Eigen::Index>();
      const auto cols = entry.at("cols").get<Eigen::Index>();
      const auto& values = entry.at("values");
      if (static_cast<Eigen::Index>(values.size()) != rows * cols)
        throw IntegrityError("parameter " + path + " has " + std::to_string(values.size()) + " values for shape " +
                             shape_str(rows, cols));
      Param& p = out.params.add(path, rows, cols);
      for (Eigen::Index i = 0; i < rows * cols; ++i) p.value.data()[i] = values[static_cast<std::size_t>(i)].get<Real>();
    }
    if (doc.at("checksum").get<std::string>() != hex64(params_checksum(out.params)))
      throw IntegrityError("checkpoint checksum mismatch");
    out.metadata_json = doc.contains("metadata") ? doc.at("metadata").dump() : "{}";
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw IntegrityError(std::string("malformed checkpoint: ") + e.what());
  }
  return out;
}

void write_params(const std::filesystem::path& path, const ParamStore& store, const std::string& metadata_json) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << serialize_params(store, metadata_json);
  if (!os) throw IoError("write failed: " + path.string());
}

CheckpointContents read_params(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_params(ss.str());
}

}  // namespace jointep
