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

#include "binmoe/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>

#include <Eigen/Core>

#include "binmoe/eval.hpp"
#include "binmoe/wav.hpp"
#include "json.hpp"

namespace binmoe {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

// Output directory bookkeeping: artifact list, WAV gains, stage timings and
// the manifest written at the end.
class Session {
 public:
  Session(const RunConfig& cfg, std::string command, const RunnerOptions& opts)
      : cfg_(cfg), command_(std::move(command)), opts_(opts), start_(Clock::now()) {
    try {
      fs::create_directories(cfg.output_dir);
    } catch (const fs::filesystem_error& e) {
      throw StageError("setup", std::string("cannot create output directory: ") + e.what());
    }
  }

  std::string path(const std::string& name) const {
    return (fs::path(cfg_.output_dir) / name).string();
  }

  template <typename F>
  auto stage(const std::string& name, F&& body) {
    log(name + "...");
    const auto t0 = Clock::now();
    try {
      if constexpr (std::is_void_v<decltype(body())>) {
        body();
        timings_.emplace_back(name, seconds_since(t0));
      } else {
        auto out = body();
        timings_.emplace_back(name, seconds_since(t0));
        return out;
      }
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
  }

  void add(const std::string& name) {
    if (std::find(files_.begin(), files_.end(), name) == files_.end()) files_.push_back(name);
  }
  void add_wav(const std::string& name, double gain) {
    add(name);
    gains_[name] = gain;
  }

  void log(const std::string& line) const {
    if (opts_.log) opts_.log(line);
  }

  RunOutputs finish() {
    json m;
    m["command"] = command_;
    m["config"] = json::parse(config_to_json(cfg_));
    json arts = json::array();
    for (const auto& f : files_) {
      const std::string p = path(f);
      std::error_code ec;
      const auto bytes = fs::file_size(p, ec);
      if (ec || bytes == 0) throw StageError("write", "missing or empty artifact " + f);
      char hash[20];
      std::snprintf(hash, sizeof hash, "%016llx",
                    static_cast<unsigned long long>(fnv1a_file(p)));
      json a{{"file", f}, {"bytes", bytes}, {"fnv1a64", hash}};
      if (auto it = gains_.find(f); it != gains_.end()) {
        a["gain"] = it->second;
        a["gain_db"] = 20.0 * std::log10(it->second);
      }
      arts.push_back(a);
    }
    m["artifacts"] = arts;
    m["versions"] = {{"binmoe", kVersion},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                   std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"compiler", __VERSION__},
                     {"config_schema", kSchemaVersion}};
    json st = json::array();
    for (const auto& [name, s] : timings_) st.push_back({{"stage", name}, {"seconds", s}});
    m["stage_timings"] = st;
    m["wall_clock_s"] = seconds_since(start_);

    // Write-then-rename so a reader never sees a partial manifest.
    const std::string final_path = path("manifest.json");
    const std::string tmp = final_path + ".tmp";
    {
      std::ofstream out(tmp);
      if (!out) throw StageError("write", "cannot write " + tmp);
      out << m.dump(2) << '\n';
      if (!out) throw StageError("write", "write failed: " + tmp);
    }
    std::error_code ec;
    fs::rename(tmp, final_path, ec);
    if (ec) throw StageError("write", "cannot rename manifest: " + ec.message());
    RunOutputs r;
    r.files = files_;
    r.files.push_back("manifest.json");
    log("wrote " + std::to_string(r.files.size()) + " files to " + cfg_.output_dir);
    return r;
  }

  // Gain recorded for `name` by an earlier run's manifest, 1 if unknown.
  double previous_gain(const std::string& name) const {
    std::ifstream in(path("manifest.json"));
    if (!in) return 1.0;
    try {
      const json m = json::parse(in);
      for (const auto& a : m.at("artifacts")) {
        if (a.at("file") == name && a.contains("gain")) return a["gain"].get<double>();
      }
    } catch (const json::exception&) {
    }
    return 1.0;
  }

 private:
  static double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
  }

  const RunConfig& cfg_;
  std::string command_;
  const RunnerOptions& opts_;
  Clock::time_point start_;
  std::vector<std::string> files_;
  std::map<std::string, double> gains_;
  std::vector<std::pair<std::string, double>> timings_;
};

std::vector<Method> methods_of(const RunConfig& cfg) {
  std::vector<Method> out{cfg.method};
  for (Method m : cfg.baselines) {
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  return out;
}

std::string wav_name(Method m) { return std::string("binaural_") + to_string(m) + ".wav"; }
std::string metrics_name(Method m) { return std::string("metrics_") + to_string(m) + ".csv"; }
std::string tracking_name(const RunConfig& cfg, Method m) {
  return m == cfg.method ? "moe_tracking.csv"
                         : std::string("moe_tracking_") + to_string(m) + ".csv";
}

struct Model {
  ArrayGeometry geom;
  SteeringSet a;
  HrtfSet h;
  StftConfig stft;
};

Model build_model(const RunConfig& cfg) {
  Model m;
  m.stft = cfg.stft;
  m.geom = cfg.geometry();
  const auto grid = cfg.grid();
  const auto freqs = m.stft.freq_grid();
  m.a = build_steering_set(m.geom, grid, freqs);
  m.h = cfg.hrtf_file ? load_hrtf_grid(*cfg.hrtf_file, grid, freqs)
                      : sphere_hrtf_set(cfg.head, grid, freqs);
  return m;
}

std::vector<double> load_source(const RunConfig& cfg) {
  if (!cfg.source_wav) {
    return speech_like_signal(cfg.source_duration, cfg.scene.sample_rate, cfg.seed);
  }
  const WavData w = read_wav(*cfg.source_wav);
  if (std::abs(w.sample_rate - cfg.scene.sample_rate) > 1e-6) {
    throw Error(Errc::kInvalidArgument,
                "source sample rate " + std::to_string(w.sample_rate) +
                    " differs from scene.sample_rate");
  }
  // Mono downmix.
  const RealVec mono = w.audio.colwise().mean().transpose();
  return std::vector<double>(mono.data(), mono.data() + mono.size());
}

std::size_t padded_frame_count(std::size_t samples, const StftConfig& stft) {
  Audio probe = Audio::Zero(1, Eigen::Index(samples));
  return analyze_padded(probe, stft).size();
}

struct SceneData {
  SimulationResult sim;
  std::vector<Direction> truth;
  std::vector<double> levels;
  BinauralTrack reference;
};

void write_ground_truth(const SceneData& s, const StftConfig& stft, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::kIo, "cannot write " + path);
  out << "frame,time_s,azimuth_deg,source_dbfs\n";
  char buf[96];
  for (std::size_t t = 0; t < s.truth.size(); ++t) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.4f\n", t, frame_center_seconds(t, stft),
                  s.truth[t].azimuth_deg(), std::max(s.levels[t], -300.0));
    out << buf;
  }
  if (!out) throw Error(Errc::kIo, "write failed: " + path);
}

Audio track_audio(const BinauralTrack& t) {
  Audio a(2, Eigen::Index(t.size()));
  for (std::size_t n = 0; n < t.size(); ++n) {
    a(0, Eigen::Index(n)) = t.left[n];
    a(1, Eigen::Index(n)) = t.right[n];
  }
  return a;
}

SceneData simulate_stage(Session& ses, const RunConfig& cfg, const Model& model) {
  SceneData s;
  ses.stage("simulate", [&] {
    const auto source = load_source(cfg);
    s.sim = simulate_shoebox(cfg.scene, model.geom, source, cfg.seed);
    const std::size_t nf = padded_frame_count(std::size_t(s.sim.mics.cols()), model.stft);
    s.truth = frame_truth(s.sim, model.stft, nf);
    s.levels = frame_levels_dbfs(s.sim.reference, model.stft, nf);
    ses.log("  rt60 target " + std::to_string(cfg.scene.rt60_target) + " s, measured " +
            std::to_string(s.sim.measured_rt60) + " s");
  });
  ses.stage("reference", [&] {
    s.reference = reference_render(s.sim.reference, s.truth, model.h, model.stft);
  });
  ses.stage("write", [&] {
    ses.add_wav("mics.wav", write_wav(ses.path("mics.wav"), s.sim.mics,
                                      cfg.scene.sample_rate, -1.0));
    ses.add_wav("reference.wav", write_wav(ses.path("reference.wav"), track_audio(s.reference),
                                           cfg.scene.sample_rate, -1.0));
    write_ground_truth(s, model.stft, ses.path("ground_truth.csv"));
    ses.add("ground_truth.csv");
  });
  return s;
}

std::map<Method, PipelineResult> process_stage(Session& ses, const RunConfig& cfg,
                                               const Model& model, const Audio& mics) {
  std::map<Method, PipelineResult> out;
  for (Method m : methods_of(cfg)) {
    const std::string name = std::string("process:") + to_string(m);
    auto res = ses.stage(name, [&] {
      return process_recording(mics, model.a, model.h, model.stft, cfg.pipeline_for(m));
    });
    ses.stage("write", [&] {
      ses.add_wav(wav_name(m), write_wav(ses.path(wav_name(m)), res.binaural,
                                         cfg.scene.sample_rate, -1.0));
      if (res.moe) {
        write_diagnostics_csv(res.moe->diagnostics, model.a.grid,
                              ses.path(tracking_name(cfg, m)));
        ses.add(tracking_name(cfg, m));
      }
    });
    out.emplace(m, std::move(res));
  }
  return out;
}

TrackingOptions tracking_options(const RunConfig& cfg) {
  TrackingOptions o;
  o.tolerance_deg = cfg.tolerance_deg;
  o.voiced_dbfs = cfg.voiced_dbfs;
  o.burn_in_frames =
      std::size_t(std::ceil(cfg.burn_in_s * cfg.stft.sample_rate / double(cfg.stft.hop)));
  return o;
}

json cue_summary(const CueErrors& e) {
  return {{"frames", e.frames.size()},
          {"active_frames", e.active()},
          {"median_itd_err_us", e.median_itd_us()},
          {"mean_itd_err_us", e.mean_itd_us()},
          {"median_ild_err_db", e.median_ild_db()},
          {"mean_ild_err_db", e.mean_ild_db()}};
}

json tracking_summary(const TrackingReport& r, const TrackingOptions& o) {
  return {{"hit_rate", r.hit_rate()},
          {"hits", r.hits},
          {"counted_frames", r.counted},
          {"total_frames", r.frames.size()},
          {"tolerance_deg", o.tolerance_deg},
          {"burn_in_frames", o.burn_in_frames},
          {"voiced_dbfs", o.voiced_dbfs}};
}

void write_summary(Session& ses, const json& summary) {
  const std::string p = ses.path("summary.json");
  std::ofstream out(p);
  if (!out) throw Error(Errc::kIo, "cannot write " + p);
  out << summary.dump(2) << '\n';
  if (!out) throw Error(Errc::kIo, "write failed: " + p);
  ses.add("summary.json");
}

json summary_header(const RunConfig& cfg) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["seed"] = cfg.seed;
  j["method"] = to_string(cfg.method);
  j["methods"] = json::object();
  return j;
}

// Undoes the peak normalization recorded by the run that wrote `name` and
// carries that gain into this manifest.
BinauralTrack read_track(Session& ses, const std::string& name) {
  const WavData w = read_wav(ses.path(name));
  if (w.audio.rows() != 2) throw Error(Errc::kChannelMismatch, name + " is not stereo");
  const double gain = ses.previous_gain(name);
  ses.add_wav(name, gain);
  return BinauralTrack::from_audio(w.audio / gain, w.sample_rate);
}

}  // namespace

std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIo, "cannot read " + path);
  std::uint64_t h = 14695981039346656037ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  return h;
}

RunOutputs run_all(const RunConfig& cfg, const RunnerOptions& opts) {
  Session ses(cfg, "run", opts);
  const Model model = ses.stage("setup", [&] { return build_model(cfg); });
  const SceneData scene = simulate_stage(ses, cfg, model);
  const auto results = process_stage(ses, cfg, model, scene.sim.mics);

  ses.stage("eval", [&] {
    json summary = summary_header(cfg);
    summary["scene"] = {{"rt60_target_s", cfg.scene.rt60_target},
                        {"rt60_measured_s", scene.sim.measured_rt60},
                        {"reflection", scene.sim.reflection},
                        {"noise_rms", scene.sim.noise_rms}};
    const auto topts = tracking_options(cfg);
    for (const auto& [m, res] : results) {
      const auto test = BinauralTrack::from_audio(res.binaural, cfg.scene.sample_rate);
      const CueErrors e = itd_ild_error(test, scene.reference);
      write_cue_csv(e, ses.path(metrics_name(m)));
      ses.add(metrics_name(m));
      json js = cue_summary(e);
      if (res.moe) {
        std::vector<double> argmin, truth;
        for (std::size_t t = 0; t < res.moe->diagnostics.size(); ++t) {
          argmin.push_back(model.a.grid[res.moe->diagnostics[t].argmin].azimuth_deg());
          truth.push_back(scene.truth[t].azimuth_deg());
        }
        const auto rep = tracking_report(argmin, truth, scene.levels, topts);
        js["tracking"] = tracking_summary(rep, topts);
        const auto& led = res.moe->ledger;
        if (led.frames() > 0) {
          js["regret"] = {{"frames", led.frames()},
                          {"total", led.regret(led.frames())},
                          {"average", led.average_regret(led.frames())},
                          {"best_expert", led.best_expert(led.frames())}};
        }
        if (m == cfg.method) summary["tracking"] = js["tracking"];
        ses.log(std::string("  ") + to_string(m) + " hit rate " +
                std::to_string(rep.hit_rate()));
      }
      ses.log(std::string("  ") + to_string(m) + " median ITD err " +
              std::to_string(e.median_itd_us()) + " us, ILD err " +
              std::to_string(e.median_ild_db()) + " dB");
      summary["methods"][to_string(m)] = js;
    }
    write_summary(ses, summary);
  });
  return ses.finish();
}

RunOutputs run_simulate(const RunConfig& cfg, const RunnerOptions& opts) {
  Session ses(cfg, "simulate", opts);
  const Model model = ses.stage("setup", [&] { return build_model(cfg); });
  simulate_stage(ses, cfg, model);
  return ses.finish();
}

RunOutputs run_process(const RunConfig& cfg, const std::string& mics_wav,
                       const RunnerOptions& opts) {
  Session ses(cfg, "process", opts);
  const Model model = ses.stage("setup", [&] { return build_model(cfg); });
  const Audio mics = ses.stage("read", [&] {
    const WavData w = read_wav(mics_wav);
    if (std::size_t(w.audio.rows()) != model.geom.num_mics()) {
      throw Error(Errc::kChannelMismatch,
                  mics_wav + " has " + std::to_string(w.audio.rows()) +
                      " channels, array has " + std::to_string(model.geom.num_mics()));
    }
    if (std::abs(w.sample_rate - cfg.scene.sample_rate) > 1e-6) {
      throw Error(Errc::kInvalidArgument, "recording sample rate differs from scene.sample_rate");
    }
    return w.audio;
  });
  process_stage(ses, cfg, model, mics);
  return ses.finish();
}

RunOutputs run_eval(const RunConfig& cfg, const RunnerOptions& opts) {
  Session ses(cfg, "eval", opts);
  ses.stage("eval", [&] {
    const BinauralTrack ref = read_track(ses, "reference.wav");
    json summary = summary_header(cfg);
    const auto topts = tracking_options(cfg);
    std::size_t evaluated = 0;
    for (Method m : methods_of(cfg)) {
      if (!fs::exists(ses.path(wav_name(m)))) continue;
      const BinauralTrack test = read_track(ses, wav_name(m));
      const CueErrors e = itd_ild_error(test, ref);
      write_cue_csv(e, ses.path(metrics_name(m)));
      ses.add(metrics_name(m));
      json js = cue_summary(e);
      if (is_moe(m) && fs::exists(ses.path(tracking_name(cfg, m)))) {
        const auto rep = tracking_report(ses.path(tracking_name(cfg, m)),
                                         ses.path("ground_truth.csv"), topts);
        js["tracking"] = tracking_summary(rep, topts);
        if (m == cfg.method) summary["tracking"] = js["tracking"];
      }
      summary["methods"][to_string(m)] = js;
      ++evaluated;
    }
    if (evaluated == 0) {
      throw Error(Errc::kIo, "no binaural_<method>.wav renders found in " + cfg.output_dir);
    }
    write_summary(ses, summary);
  });
  return ses.finish();
}

RunOutputs run_pattern(const RunConfig& cfg, const RunnerOptions& opts) {
  Session ses(cfg, "pattern", opts);
  const Model model = ses.stage("setup", [&] { return build_model(cfg); });
  ses.stage("pattern", [&] {
    const FovConfig base = cfg.fov.value_or(FovConfig{});
    const std::string p = ses.path("pattern.csv");
    std::ofstream out(p);
    if (!out) throw Error(Errc::kIo, "cannot write " + p);
    out << "gamma,azimuth_deg,in_fov,left_db,right_db\n";
    char buf[128];
    for (double gamma : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      FovConfig fc = base;
      fc.gamma = gamma;
      const FovSpec spec = fc.to_spec(model.a.grid);
      spec.validate(model.a.grid);
      const auto mask = spec.mask(model.a.grid);
      const HrtfSet hg = apply_gain_control(model.h, spec);
      const auto c = design_weighted_bsm(model.a, hg, distortion_matrix(model.a.grid, spec),
                                         cfg.pipeline.bsm);
      const auto g = directional_gain_pattern(c, model.a, model.h);
      for (std::size_t q = 0; q < g.azimuth_deg.size(); ++q) {
        std::snprintf(buf, sizeof buf, "%.2f,%.6f,%d,%.6f,%.6f\n", gamma, g.azimuth_deg[q],
                      mask[q] ? 1 : 0, g.left_db[q], g.right_db[q]);
        out << buf;
      }
    }
    if (!out) throw Error(Errc::kIo, "write failed: " + p);
    ses.add("pattern.csv");
  });
  return ses.finish();
}

}  // namespace binmoe
