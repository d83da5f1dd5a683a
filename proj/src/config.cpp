// Copyright 2026 The binmoe Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "binmoe/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace binmoe {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Rejects keys outside `allowed`.
void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!ok.count(it.key())) throw ConfigError(join(path, it.key()), "unknown key");
  }
}

double get_number(const json& obj, const std::string& path, const char* key,
                  double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(join(path, key), "expected a number");
  return v.get<double>();
}

std::size_t get_count(const json& obj, const std::string& path, const char* key,
                      std::size_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError(join(path, key), "expected a non-negative integer");
  }
  return std::size_t(v.get<long long>());
}

std::string get_string(const json& obj, const std::string& path, const char* key,
                       const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(join(path, key), "expected a string");
  return v.get<std::string>();
}

Eigen::Vector3d get_vec3(const json& obj, const std::string& path, const char* key,
                         const Eigen::Vector3d& fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_array() || v.size() != 3) {
    throw ConfigError(join(path, key), "expected [x, y, z]");
  }
  Eigen::Vector3d out;
  for (int i = 0; i < 3; ++i) {
    if (!v[std::size_t(i)].is_number()) throw ConfigError(join(path, key), "expected numbers");
    out[i] = v[std::size_t(i)].get<double>();
  }
  return out;
}

void require(bool ok, const std::string& key, const std::string& msg) {
  if (!ok) throw ConfigError(key, msg);
}

Method get_method(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError(key, "expected a method name");
  try {
    return parse_method(v.get<std::string>());
  } catch (const Error&) {
    throw ConfigError(key, "unknown method '" + v.get<std::string>() +
                               "' (bsm, compass, dbsm, moe-bsm, moe-dbsm, moe-compass)");
  }
}

}  // namespace

FovSpec FovConfig::to_spec(const DirectionGrid& grid) const {
  FovSpec f = indices.empty()
                  ? FovSpec::azimuth_window(center_deg * kPi / 180.0,
                                            width_deg * kPi / 180.0, gamma, delta)
                  : FovSpec::from_indices(grid, indices, gamma, delta);
  f.compass_boost = compass_boost;
  return f;
}

ArrayGeometry RunConfig::geometry() const {
  if (mics.empty()) return ArrayGeometry::glasses();
  ArrayGeometry::Positions p(Eigen::Index(mics.size()), 3);
  for (std::size_t m = 0; m < mics.size(); ++m) p.row(Eigen::Index(m)) = mics[m].transpose();
  return ArrayGeometry(p);
}

DirectionGrid RunConfig::grid() const {
  return DirectionGrid::ring(grid_count, grid_elevation_deg * kPi / 180.0);
}

PipelineOptions RunConfig::pipeline_for(Method m) const {
  PipelineOptions p = pipeline;
  p.method = m;
  if (fov) p.fov = fov->to_spec(grid());
  return p;
}

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("malformed JSON: ") + e.what());
  }
  check_keys(root, "", {"schema_version", "seed", "output_dir", "method", "baselines",
                        "source", "scene", "array", "grid", "stft", "hrtf", "bsm",
                        "moe", "parametric", "fov", "eval"});
  RunConfig c;
  if (!root.contains("schema_version")) {
    throw ConfigError("schema_version", "missing");
  }
  c.schema_version = int(get_count(root, "", "schema_version", 0));
  require(c.schema_version == kSchemaVersion, "schema_version",
          "unsupported version (expected " + std::to_string(kSchemaVersion) + ")");
  if (root.contains("seed")) {
    const json& s = root["seed"];
    require(s.is_number_unsigned() || (s.is_number_integer() && s.get<long long>() >= 0),
            "seed", "expected a non-negative 64-bit integer");
    c.seed = s.get<std::uint64_t>();
  }
  c.output_dir = get_string(root, "", "output_dir", c.output_dir);
  if (root.contains("method")) c.method = get_method(root["method"], "method");
  if (root.contains("baselines")) {
    const json& b = root["baselines"];
    require(b.is_array(), "baselines", "expected a list of method names");
    c.baselines.clear();
    for (std::size_t i = 0; i < b.size(); ++i) {
      c.baselines.push_back(get_method(b[i], "baselines[" + std::to_string(i) + "]"));
    }
  }

  if (root.contains("source")) {
    const json& s = root["source"];
    check_keys(s, "source", {"wav", "duration_s"});
    if (s.contains("wav")) c.source_wav = get_string(s, "source", "wav", "");
    c.source_duration = get_number(s, "source", "duration_s", c.source_duration);
    require(c.source_duration > 0.0, "source.duration_s", "must be positive");
  }

  if (root.contains("scene")) {
    const json& s = root["scene"];
    check_keys(s, "scene", {"room_dims", "rt60", "array_center", "noise_db",
                            "sample_rate", "max_image_order", "trajectory"});
    auto& sc = c.scene;
    sc.room_dims = get_vec3(s, "scene", "room_dims", sc.room_dims);
    require((sc.room_dims.array() > 0.0).all(), "scene.room_dims", "must be positive");
    sc.rt60_target = get_number(s, "scene", "rt60", sc.rt60_target);
    require(sc.rt60_target >= 0.0 && sc.rt60_target < 5.0, "scene.rt60", "must be in [0, 5) s");
    sc.array_center = get_vec3(s, "scene", "array_center", sc.array_center);
    sc.noise_level_db = get_number(s, "scene", "noise_db", sc.noise_level_db);
    sc.sample_rate = get_number(s, "scene", "sample_rate", sc.sample_rate);
    require(sc.sample_rate > 0.0, "scene.sample_rate", "must be positive");
    sc.max_image_order = int(get_count(s, "scene", "max_image_order",
                                       std::size_t(sc.max_image_order)));
    if (s.contains("trajectory")) {
      const json& t = s["trajectory"];
      const std::string p = "scene.trajectory";
      check_keys(t, p, {"start", "step_deg", "step_s", "num_steps", "sense"});
      auto& tr = sc.trajectory;
      tr.start_position = get_vec3(t, p, "start", tr.start_position);
      tr.azimuth_step = get_number(t, p, "step_deg", tr.azimuth_step * 180.0 / kPi) * kPi / 180.0;
      tr.step_duration = get_number(t, p, "step_s", tr.step_duration);
      require(tr.step_duration > 0.0, p + ".step_s", "must be positive");
      tr.num_steps = get_count(t, p, "num_steps", tr.num_steps);
      require(tr.num_steps >= 1, p + ".num_steps", "must be >= 1");
      const std::string sense = get_string(t, p, "sense", "ccw");
      require(sense == "ccw" || sense == "cw", p + ".sense", "must be 'ccw' or 'cw'");
      tr.sense = sense == "ccw" ? Sense::kCcw : Sense::kCw;
    }
  }

  if (root.contains("array")) {
    const json& a = root["array"];
    if (a.is_string()) {
      require(a.get<std::string>() == "glasses", "array", "unknown layout (glasses)");
    } else {
      require(a.is_array() && a.size() >= 2, "array", "expected 'glasses' or >= 2 positions");
      for (std::size_t i = 0; i < a.size(); ++i) {
        json wrap{{"p", a[i]}};
        c.mics.push_back(get_vec3(wrap, "array[" + std::to_string(i) + "]", "p", {}));
      }
      try {
        (void)c.geometry();
      } catch (const Error& e) {
        throw ConfigError("array", e.what());
      }
    }
  }

  if (root.contains("grid")) {
    const json& g = root["grid"];
    check_keys(g, "grid", {"count", "elevation_deg"});
    c.grid_count = get_count(g, "grid", "count", c.grid_count);
    require(c.grid_count >= 1, "grid.count", "must be >= 1");
    c.grid_elevation_deg = get_number(g, "grid", "elevation_deg", c.grid_elevation_deg);
  }

  if (root.contains("stft")) {
    const json& s = root["stft"];
    check_keys(s, "stft", {"fft_size", "hop"});
    c.stft.fft_size = get_count(s, "stft", "fft_size", c.stft.fft_size);
    c.stft.hop = get_count(s, "stft", "hop", c.stft.hop);
  }
  c.stft.sample_rate = c.scene.sample_rate;
  try {
    c.stft.validate();
  } catch (const Error& e) {
    throw ConfigError("stft", e.what());
  }

  if (root.contains("hrtf")) {
    const json& h = root["hrtf"];
    check_keys(h, "hrtf", {"kind", "path", "radius", "ear_deg"});
    const std::string kind = get_string(h, "hrtf", "kind", "sphere");
    require(kind == "sphere" || kind == "file", "hrtf.kind", "must be 'sphere' or 'file'");
    if (kind == "file") {
      require(h.contains("path"), "hrtf.path", "required when kind is 'file'");
      c.hrtf_file = get_string(h, "hrtf", "path", "");
    }
    c.head.radius = get_number(h, "hrtf", "radius", c.head.radius);
    require(c.head.radius > 0.0, "hrtf.radius", "must be positive");
    c.head.ear_azimuth = get_number(h, "hrtf", "ear_deg", c.head.ear_azimuth * 180.0 / kPi) * kPi / 180.0;
  }

  auto& po = c.pipeline;
  if (root.contains("bsm")) {
    const json& b = root["bsm"];
    check_keys(b, "bsm", {"eps_scale", "magls_cutoff_hz"});
    po.bsm.eps_scale = get_number(b, "bsm", "eps_scale", po.bsm.eps_scale);
    require(po.bsm.eps_scale >= 0.0, "bsm.eps_scale", "must be >= 0");
    po.bsm.magls_cutoff_hz = get_number(b, "bsm", "magls_cutoff_hz", po.bsm.magls_cutoff_hz);
  }

  if (root.contains("moe")) {
    const json& m = root["moe"];
    check_keys(m, "moe", {"eta", "lambda", "redesign_every", "pooling", "cov_beta",
                          "norm_mu", "estimator_loading", "directional_rho",
                          "pool_low_hz", "pool_high_hz"});
    auto& mo = po.moe;
    mo.eta = get_number(m, "moe", "eta", mo.eta);
    require(mo.eta > 0.0, "moe.eta", "must be > 0");
    mo.lambda = get_number(m, "moe", "lambda", mo.lambda);
    require(mo.lambda > 0.0 && mo.lambda <= 1.0, "moe.lambda", "must be in (0, 1]");
    mo.redesign_every = get_count(m, "moe", "redesign_every", mo.redesign_every);
    require(mo.redesign_every >= 1, "moe.redesign_every", "must be >= 1");
    const std::string pool = get_string(m, "moe", "pooling", "per-bin");
    require(pool == "per-bin" || pool == "pooled", "moe.pooling", "must be 'per-bin' or 'pooled'");
    mo.pooling = pool == "pooled" ? Pooling::kPooled : Pooling::kPerBin;
    mo.cov_beta = get_number(m, "moe", "cov_beta", mo.cov_beta);
    require(mo.cov_beta > 0.0 && mo.cov_beta < 1.0, "moe.cov_beta", "must be in (0, 1)");
    mo.norm_mu = get_number(m, "moe", "norm_mu", mo.norm_mu);
    require(mo.norm_mu >= 0.0 && mo.norm_mu < 1.0, "moe.norm_mu", "must be in [0, 1)");
    mo.experts.estimator_loading =
        get_number(m, "moe", "estimator_loading", mo.experts.estimator_loading);
    require(mo.experts.estimator_loading >= 0.0, "moe.estimator_loading", "must be >= 0");
    mo.experts.directional_rho = get_number(m, "moe", "directional_rho", mo.experts.directional_rho);
    require(mo.experts.directional_rho >= 0.0, "moe.directional_rho", "must be >= 0");
    mo.pool_low_hz = get_number(m, "moe", "pool_low_hz", mo.pool_low_hz);
    mo.pool_high_hz = get_number(m, "moe", "pool_high_hz", mo.pool_high_hz);
    require(mo.pool_high_hz > mo.pool_low_hz && mo.pool_low_hz >= 0.0, "moe.pool_high_hz",
            "pooling band must satisfy 0 <= low < high");
  }

  if (root.contains("parametric")) {
    const json& p = root["parametric"];
    check_keys(p, "parametric", {"num_sources", "update_every", "lcmv_loading", "cov_beta"});
    po.num_sources = get_count(p, "parametric", "num_sources", po.num_sources);
    require(po.num_sources >= 1, "parametric.num_sources", "must be >= 1");
    po.update_every = get_count(p, "parametric", "update_every", po.update_every);
    require(po.update_every >= 1, "parametric.update_every", "must be >= 1");
    po.lcmv_loading = get_number(p, "parametric", "lcmv_loading", po.lcmv_loading);
    require(po.lcmv_loading >= 0.0, "parametric.lcmv_loading", "must be >= 0");
    po.cov_beta = get_number(p, "parametric", "cov_beta", po.cov_beta);
    require(po.cov_beta > 0.0 && po.cov_beta < 1.0, "parametric.cov_beta", "must be in (0, 1)");
  }

  if (root.contains("fov") && !root["fov"].is_null()) {
    const json& f = root["fov"];
    check_keys(f, "fov", {"center_deg", "width_deg", "indices", "gamma", "delta",
                          "compass_boost"});
    FovConfig fc;
    fc.center_deg = get_number(f, "fov", "center_deg", fc.center_deg);
    fc.width_deg = get_number(f, "fov", "width_deg", fc.width_deg);
    require(fc.width_deg > 0.0 && fc.width_deg <= 360.0, "fov.width_deg", "must be in (0, 360]");
    if (f.contains("indices")) {
      require(f["indices"].is_array(), "fov.indices", "expected a list of grid indices");
      for (const auto& v : f["indices"]) {
        require(v.is_number_integer() && v.get<long long>() >= 0 &&
                    std::size_t(v.get<long long>()) < c.grid_count,
                "fov.indices", "entries must be grid indices below grid.count");
        fc.indices.push_back(std::size_t(v.get<long long>()));
      }
    }
    fc.gamma = get_number(f, "fov", "gamma", fc.gamma);
    require(fc.gamma >= 0.0 && fc.gamma <= 1.0, "fov.gamma", "gamma must be within [0, 1]");
    fc.delta = get_number(f, "fov", "delta", fc.delta);
    require(fc.delta >= 0.0 && fc.delta <= 1.0, "fov.delta", "delta must be within [0, 1]");
    fc.compass_boost = get_number(f, "fov", "compass_boost", fc.compass_boost);
    require(fc.compass_boost >= 1.0, "fov.compass_boost", "must be >= 1");
    try {
      fc.to_spec(c.grid()).validate(c.grid());
    } catch (const Error& e) {
      throw ConfigError("fov", e.what());
    }
    c.fov = fc;
  }

  if (root.contains("eval")) {
    const json& e = root["eval"];
    check_keys(e, "eval", {"tolerance_deg", "burn_in_s", "voiced_dbfs"});
    c.tolerance_deg = get_number(e, "eval", "tolerance_deg", c.tolerance_deg);
    require(c.tolerance_deg >= 0.0, "eval.tolerance_deg", "must be >= 0");
    c.burn_in_s = get_number(e, "eval", "burn_in_s", c.burn_in_s);
    require(c.burn_in_s >= 0.0, "eval.burn_in_s", "must be >= 0");
    c.voiced_dbfs = get_number(e, "eval", "voiced_dbfs", c.voiced_dbfs);
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const RunConfig& c) {
  auto vec = [](const Eigen::Vector3d& v) { return json::array({v[0], v[1], v[2]}); };
  json j;
  j["schema_version"] = c.schema_version;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["method"] = to_string(c.method);
  j["baselines"] = json::array();
  for (Method m : c.baselines) j["baselines"].push_back(to_string(m));
  j["source"]["duration_s"] = c.source_duration;
  if (c.source_wav) j["source"]["wav"] = *c.source_wav;
  const auto& s = c.scene;
  j["scene"] = {{"room_dims", vec(s.room_dims)},
                {"rt60", s.rt60_target},
                {"array_center", vec(s.array_center)},
                {"noise_db", s.noise_level_db},
                {"sample_rate", s.sample_rate},
                {"max_image_order", s.max_image_order},
                {"trajectory",
                 {{"start", vec(s.trajectory.start_position)},
                  {"step_deg", s.trajectory.azimuth_step * 180.0 / kPi},
                  {"step_s", s.trajectory.step_duration},
                  {"num_steps", s.trajectory.num_steps},
                  {"sense", s.trajectory.sense == Sense::kCcw ? "ccw" : "cw"}}}};
  if (c.mics.empty()) {
    j["array"] = "glasses";
  } else {
    j["array"] = json::array();
    for (const auto& m : c.mics) j["array"].push_back(vec(m));
  }
  j["grid"] = {{"count", c.grid_count}, {"elevation_deg", c.grid_elevation_deg}};
  j["stft"] = {{"fft_size", c.stft.fft_size}, {"hop", c.stft.hop}};
  j["hrtf"] = {{"kind", c.hrtf_file ? "file" : "sphere"},
               {"radius", c.head.radius},
               {"ear_deg", c.head.ear_azimuth * 180.0 / kPi}};
  if (c.hrtf_file) j["hrtf"]["path"] = *c.hrtf_file;
  const auto& po = c.pipeline;
  j["bsm"] = {{"eps_scale", po.bsm.eps_scale}, {"magls_cutoff_hz", po.bsm.magls_cutoff_hz}};
  const auto& mo = po.moe;
  j["moe"] = {{"eta", mo.eta},
              {"lambda", mo.lambda},
              {"redesign_every", mo.redesign_every},
              {"pooling", mo.pooling == Pooling::kPooled ? "pooled" : "per-bin"},
              {"cov_beta", mo.cov_beta},
              {"norm_mu", mo.norm_mu},
              {"estimator_loading", mo.experts.estimator_loading},
              {"directional_rho", mo.experts.directional_rho},
              {"pool_low_hz", mo.pool_low_hz},
              {"pool_high_hz", mo.pool_high_hz}};
  j["parametric"] = {{"num_sources", po.num_sources},
                     {"update_every", po.update_every},
                     {"lcmv_loading", po.lcmv_loading},
                     {"cov_beta", po.cov_beta}};
  if (c.fov) {
    j["fov"] = {{"center_deg", c.fov->center_deg},
                {"width_deg", c.fov->width_deg},
                {"indices", c.fov->indices},
                {"gamma", c.fov->gamma},
                {"delta", c.fov->delta},
                {"compass_boost", c.fov->compass_boost}};
  }
  j["eval"] = {{"tolerance_deg", c.tolerance_deg},
               {"burn_in_s", c.burn_in_s},
               {"voiced_dbfs", c.voiced_dbfs}};
  return j.dump(2);
}

}  // namespace binmoe
