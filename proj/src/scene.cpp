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

#include "binmoe/scene.hpp"

#include "binmoe/fft.hpp"

#include <algorithm>
#include <array>
#include <random>

namespace binmoe {

ArrayGeometry::ArrayGeometry(const Positions& positions) {
  if (positions.rows() < 2) {
    throw Error(Errc::kInvalidArgument, "ArrayGeometry: need at least 2 mics");
  }
  if (!positions.allFinite()) {
    throw Error(Errc::kInvalidArgument, "ArrayGeometry: non-finite position");
  }
  const Eigen::RowVector3d centroid = positions.colwise().mean();
  positions_ = positions.rowwise() - centroid;
  for (Eigen::Index i = 0; i < positions_.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < positions_.rows(); ++j) {
      if ((positions_.row(i) - positions_.row(j)).norm() < 1e-6) {
        throw Error(Errc::kInvalidArgument,
                    "ArrayGeometry: coincident mics " + std::to_string(i) +
                        " and " + std::to_string(j));
      }
    }
  }
  if (aperture() >= 1.0) {
    throw Error(Errc::kInvalidArgument, "ArrayGeometry: aperture >= 1 m");
  }
}

ArrayGeometry ArrayGeometry::glasses() {
  Positions p(4, 3);
  p << 0.025, 0.075, 0.0,   //
      0.025, -0.075, 0.0,   //
      -0.025, 0.075, 0.0,   //
      -0.025, -0.075, 0.0;
  return ArrayGeometry(p);
}

double ArrayGeometry::aperture() const {
  double a = 0.0;
  for (Eigen::Index i = 0; i < positions_.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < positions_.rows(); ++j) {
      a = std::max(a, (positions_.row(i) - positions_.row(j)).norm());
    }
  }
  return a;
}

ComplexMat steering_vector(const ArrayGeometry& geom, const Direction& dir,
                           const FreqGrid& freqs) {
  const Eigen::Vector3d u = dir.unit();
  const std::size_t nm = geom.num_mics();
  ComplexMat a(Eigen::Index(nm), Eigen::Index(freqs.num_bins()));
  for (std::size_t m = 0; m < nm; ++m) {
    // A mic displaced towards the source hears the wavefront early.
    const double tau = -u.dot(geom.mic(m)) / kSpeedOfSound;
    for (std::size_t k = 0; k < freqs.num_bins(); ++k) {
      a(Eigen::Index(m), Eigen::Index(k)) =
          std::polar(1.0, -kTwoPi * freqs[k] * tau);
    }
  }
  return a;
}

SteeringSet build_steering_set(const ArrayGeometry& geom,
                               const DirectionGrid& grid,
                               const FreqGrid& freqs) {
  SteeringSet set{grid, freqs, {}};
  const auto nm = Eigen::Index(geom.num_mics());
  set.a.assign(freqs.num_bins(), ComplexMat(nm, Eigen::Index(grid.size())));
  for (std::size_t q = 0; q < grid.size(); ++q) {
    const ComplexMat col = steering_vector(geom, grid[q], freqs);
    for (std::size_t k = 0; k < freqs.num_bins(); ++k) {
      set.a[k].col(Eigen::Index(q)) = col.col(Eigen::Index(k));
    }
  }
  return set;
}

std::vector<Eigen::Vector3d> trajectory_positions(const SceneConfig& cfg) {
  const auto& tr = cfg.trajectory;
  if (!(tr.step_duration > 0.0) || tr.num_steps == 0) {
    throw Error(Errc::kInvalidArgument,
                "trajectory: step_duration > 0 and num_steps >= 1 required");
  }
  const Eigen::Vector3d rel = tr.start_position - cfg.array_center;
  const double sign = tr.sense == Sense::kCcw ? 1.0 : -1.0;
  std::vector<Eigen::Vector3d> out;
  out.reserve(tr.num_steps);
  for (std::size_t k = 0; k < tr.num_steps; ++k) {
    const double ang = sign * tr.azimuth_step * double(k);
    const Eigen::Matrix3d rot =
        Eigen::AngleAxisd(ang, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    out.push_back(cfg.array_center + rot * rel);
  }
  return out;
}

Direction direction_from_array(const SceneConfig& cfg,
                               const Eigen::Vector3d& pos) {
  const Eigen::Vector3d d = pos - cfg.array_center;
  const double horiz = std::hypot(d.x(), d.y());
  return Direction(std::atan2(d.y(), d.x()), std::atan2(d.z(), horiz));
}

double eyring_reflection(const Eigen::Vector3d& room_dims, double rt60) {
  if (rt60 <= 0.0) return 0.0;
  const double v = room_dims.prod();
  const double s = 2.0 * (room_dims.x() * room_dims.y() +
                          room_dims.x() * room_dims.z() +
                          room_dims.y() * room_dims.z());
  // Eyring: rt60 = 0.161 V / (-S ln(1 - alpha)), and beta^2 = 1 - alpha.
  return std::exp(-0.161 * v / (2.0 * s * rt60));
}

namespace {

constexpr int kHalfTaps = 32;
constexpr int kPhases = 1024;

// Hann-windowed sinc fractional delay filters. Row p holds taps j - frac for
// j in [-kHalfTaps + 1, kHalfTaps], frac = p / kPhases.
const std::vector<std::array<double, 2 * kHalfTaps>>& fractional_table() {
  static const auto table = [] {
    std::vector<std::array<double, 2 * kHalfTaps>> t(kPhases + 1);
    for (int p = 0; p <= kPhases; ++p) {
      const double frac = double(p) / kPhases;
      for (int j = -kHalfTaps + 1; j <= kHalfTaps; ++j) {
        const double x = double(j) - frac;
        const double sinc = x == 0.0 ? 1.0 : std::sin(kPi * x) / (kPi * x);
        const double win = 0.5 * (1.0 + std::cos(kPi * x / kHalfTaps));
        t[p][j + kHalfTaps - 1] = std::abs(x) < kHalfTaps ? sinc * win : 0.0;
      }
    }
    return t;
  }();
  return table;
}

void check_inside(const Eigen::Vector3d& room, const Eigen::Vector3d& p,
                       Errc code, const std::string& what) {
  for (int i = 0; i < 3; ++i) {
    if (!(p[i] > 0.0 && p[i] < room[i])) {
      throw Error(code, what + " outside room");
    }
  }
}

}  // namespace

std::vector<double> image_source_rir(const Eigen::Vector3d& room_dims,
                                     const Eigen::Vector3d& source,
                                     const Eigen::Vector3d& receiver,
                                     double beta, int max_order,
                                     double sample_rate, std::size_t length) {
  std::vector<double> h(length, 0.0);
  const auto& table = fractional_table();
  const int order = beta > 0.0 ? std::max(0, max_order) : 0;

  // Per axis, every (offset, reflection count) pair within the order limit.
  struct Axis {
    std::vector<double> offset;
    std::vector<int> count;
  };
  std::array<Axis, 3> axes;
  for (int d = 0; d < 3; ++d) {
    for (int m = -order; m <= order; ++m) {
      for (int q = 0; q <= 1; ++q) {
        const int refl = std::abs(m - q) + std::abs(m);
        if (refl > order) continue;
        axes[d].offset.push_back((1 - 2 * q) * source[d] - receiver[d] +
                                 2.0 * m * room_dims[d]);
        axes[d].count.push_back(refl);
      }
    }
  }
  const double max_delay = double(length) - kHalfTaps - 1;
  for (std::size_t ix = 0; ix < axes[0].offset.size(); ++ix) {
    const int cx = axes[0].count[ix];
    const double ox2 = axes[0].offset[ix] * axes[0].offset[ix];
    for (std::size_t iy = 0; iy < axes[1].offset.size(); ++iy) {
      const int cxy = cx + axes[1].count[iy];
      if (cxy > order) continue;
      const double oxy2 = ox2 + axes[1].offset[iy] * axes[1].offset[iy];
      for (std::size_t iz = 0; iz < axes[2].offset.size(); ++iz) {
        const int c = cxy + axes[2].count[iz];
        if (c > order) continue;
        const double dist =
            std::sqrt(oxy2 + axes[2].offset[iz] * axes[2].offset[iz]);
        const double delay = dist / kSpeedOfSound * sample_rate;
        if (delay >= max_delay) continue;
        const double gain = std::pow(beta, c) / std::max(dist, 1e-3);
        const double whole = std::floor(delay);
        const int phase = int(std::lround((delay - whole) * kPhases));
        const auto& taps = table[std::size_t(phase)];
        const long base = long(whole) - kHalfTaps + 1;
        for (int j = 0; j < 2 * kHalfTaps; ++j) {
          const long n = base + j;
          if (n >= 0) h[std::size_t(n)] += gain * taps[std::size_t(j)];
        }
      }
    }
  }
  return h;
}

double measure_rt60(std::span<const double> rir, double sample_rate) {
  const std::size_t n = rir.size();
  std::vector<double> edc(n + 1, 0.0);
  for (std::size_t i = n; i-- > 0;) edc[i] = edc[i + 1] + rir[i] * rir[i];
  if (!(edc[0] > 0.0)) {
    throw Error(Errc::kInvalidArgument, "measure_rt60: all-zero response");
  }
  auto db = [&](std::size_t i) { return 10.0 * std::log10(edc[i] / edc[0]); };
  std::size_t i5 = n, i25 = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (i5 == n && db(i) <= -5.0) i5 = i;
    if (db(i) <= -25.0) {
      i25 = i;
      break;
    }
  }
  if (i5 >= n || i25 >= n || i25 < i5 + 8) {
    throw Error(Errc::kDecayTooShort,
                "measure_rt60: decay does not span -5 to -25 dB");
  }
  // Least-squares line through the energy decay curve in the fit range.
  double st = 0, sd = 0, stt = 0, std_ = 0;
  const double cnt = double(i25 - i5 + 1);
  for (std::size_t i = i5; i <= i25; ++i) {
    const double t = double(i) / sample_rate;
    const double d = db(i);
    st += t;
    sd += d;
    stt += t * t;
    std_ += t * d;
  }
  const double slope = (cnt * std_ - st * sd) / (cnt * stt - st * st);
  if (!(slope < 0.0)) {
    throw Error(Errc::kDecayTooShort, "measure_rt60: non-decaying response");
  }
  return -60.0 / slope;
}

SimulationResult simulate_shoebox(const SceneConfig& cfg,
                                  const ArrayGeometry& geom,
                                  std::span<const double> source_audio,
                                  std::uint64_t seed) {
  const double fs = cfg.sample_rate;
  if (!(fs > 0.0) || cfg.rt60_target < 0.0) {
    throw Error(Errc::kInvalidArgument, "simulate: bad sample rate or rt60");
  }
  const auto& tr = cfg.trajectory;
  check_inside(cfg.room_dims, tr.start_position, Errc::kSourceOutsideRoom,
                    "source start");
  for (std::size_t m = 0; m < geom.num_mics(); ++m) {
    check_inside(cfg.room_dims, cfg.array_center + geom.mic(m),
                      Errc::kInvalidArgument, "microphone");
  }
  SimulationResult res;
  res.step_positions = trajectory_positions(cfg);
  for (const auto& p : res.step_positions) {
    check_inside(cfg.room_dims, p, Errc::kTrajectoryExitsRoom,
                      "trajectory point");
    res.step_directions.push_back(direction_from_array(cfg, p));
  }
  res.step_samples = std::size_t(std::lround(tr.step_duration * fs));
  const std::size_t len = source_audio.size();
  if (res.step_samples == 0 || len < res.step_samples * tr.num_steps) {
    throw Error(Errc::kTooShort,
                "simulate: source shorter than the trajectory duration");
  }

  double max_dist = 0.0;
  for (const auto& p : res.step_positions) {
    max_dist = std::max(max_dist, (p - cfg.array_center).norm() + geom.aperture());
  }
  const std::size_t rir_len =
      std::size_t(std::ceil(fs * (1.2 * cfg.rt60_target + max_dist / kSpeedOfSound))) +
      2 * kHalfTaps + 1;
  const int order = cfg.rt60_target > 0.0 ? cfg.max_image_order : 0;

  // Calibrate the reflection coefficient so the simulated decay hits the
  // target; the order-limited image set decays differently from Eyring.
  res.reflection = eyring_reflection(cfg.room_dims, cfg.rt60_target);
  res.measured_rt60 = 0.0;
  if (cfg.rt60_target > 0.0) {
    const Eigen::Vector3d probe = cfg.array_center + geom.mic(0);
    for (int iter = 0; iter < 6; ++iter) {
      const auto h = image_source_rir(cfg.room_dims, tr.start_position, probe,
                                      res.reflection, order, fs, rir_len);
      res.measured_rt60 = measure_rt60(h, fs);
      const double ratio = res.measured_rt60 / cfg.rt60_target;
      if (std::abs(ratio - 1.0) < 0.01) break;
      res.reflection = std::exp(std::log(res.reflection) * ratio);
    }
  }

  const std::size_t steps = tr.num_steps;
  const auto xfade = std::size_t(std::lround(0.01 * fs));
  const std::size_t half = xfade / 2;
  const std::size_t nm = geom.num_mics();
  res.mics = Audio::Zero(Eigen::Index(nm), Eigen::Index(len));
  res.reference.assign(len, 0.0);

  auto ramp = [](double x) { return std::clamp(x, 0.0, 1.0); };
  for (std::size_t k = 0; k < steps; ++k) {
    const std::size_t nominal_begin = k * res.step_samples;
    const std::size_t nominal_end = k + 1 == steps ? len : (k + 1) * res.step_samples;
    const std::size_t begin = k == 0 ? 0 : nominal_begin - half;
    const std::size_t end = k + 1 == steps ? len : std::min(len, nominal_end + xfade - half);
    std::vector<double> seg(end - begin);
    for (std::size_t n = begin; n < end; ++n) {
      double w = 1.0;
      if (k > 0) w *= ramp((double(n) - double(nominal_begin - half)) / double(xfade));
      if (k + 1 < steps) {
        w *= ramp((double(nominal_end + xfade - half) - double(n)) / double(xfade));
      }
      seg[n - begin] = w * source_audio[n];
    }
    const Eigen::Vector3d& src = res.step_positions[k];
    for (std::size_t m = 0; m < nm; ++m) {
      const auto h = image_source_rir(cfg.room_dims, src,
                                      cfg.array_center + geom.mic(m),
                                      res.reflection, order, fs, rir_len);
      const auto y = fft_convolve(seg, h);
      for (std::size_t i = 0; i < y.size() && begin + i < len; ++i) {
        res.mics(Eigen::Index(m), Eigen::Index(begin + i)) += y[i];
      }
    }
    const auto h_ref = image_source_rir(cfg.room_dims, src, cfg.array_center,
                                        0.0, 0, fs, rir_len);
    const auto y_ref = fft_convolve(seg, h_ref);
    for (std::size_t i = 0; i < y_ref.size() && begin + i < len; ++i) {
      res.reference[begin + i] += y_ref[i];
    }
  }
  res.direct_delay =
      (res.step_positions.front() - cfg.array_center).norm() / kSpeedOfSound;

  const double clean_rms =
      len > 0 ? std::sqrt(res.mics.squaredNorm() / double(res.mics.size())) : 0.0;
  const double ref_level = clean_rms > 0.0 ? clean_rms : 1.0;
  res.noise_rms = ref_level * std::pow(10.0, cfg.noise_level_db / 20.0);
  if (res.noise_rms > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, res.noise_rms);
    for (Eigen::Index m = 0; m < res.mics.rows(); ++m) {
      for (Eigen::Index n = 0; n < res.mics.cols(); ++n) res.mics(m, n) += noise(rng);
    }
  }
  return res;
}

std::vector<Direction> frame_truth(const SimulationResult& sim,
                                   const StftConfig& stft,
                                   std::size_t num_frames) {
  std::vector<Direction> out(num_frames);
  const std::size_t steps = sim.step_directions.size();
  for (std::size_t t = 0; t < num_frames; ++t) {
    const double sec = frame_center_seconds(t, stft) - sim.direct_delay;
    const double pos = sec * stft.sample_rate / double(sim.step_samples);
    const auto step = std::size_t(std::clamp(std::floor(pos), 0.0, double(steps - 1)));
    out[t] = sim.step_directions[step];
  }
  return out;
}

std::vector<double> speech_like_signal(double duration, double sample_rate,
                                       std::uint64_t seed) {
  const auto len = std::size_t(std::lround(duration * sample_rate));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  std::vector<double> noise(len);
  for (auto& v : noise) v = gauss(rng);
  const std::size_t n = next_pow2(std::max<std::size_t>(len, 2));
  RealFft fft(n);
  auto spec = fft.forward(noise);
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double f = double(k) * sample_rate / double(n);
    if (f < 100.0 || f > 4000.0) spec[k] = 0.0;
  }
  auto band = fft.inverse(spec);
  band.resize(len);

  // Syllables of 120-300 ms with sin^2 envelopes, separated by short gaps
  // and the occasional longer pause.
  std::vector<double> env(len, 0.0);
  std::size_t pos = 0;
  while (pos < len) {
    const auto syl = std::size_t((0.12 + 0.18 * uni(rng)) * sample_rate);
    const double amp = 0.5 + 0.5 * uni(rng);
    for (std::size_t i = 0; i < syl && pos + i < len; ++i) {
      const double s = std::sin(kPi * double(i) / double(syl));
      env[pos + i] = amp * s * s;
    }
    const double gap = uni(rng) < 0.1 ? 0.3 : 0.03 + 0.12 * uni(rng);
    pos += syl + std::size_t(gap * sample_rate);
  }
  double peak = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    band[i] *= env[i];
    peak = std::max(peak, std::abs(band[i]));
  }
  if (peak > 0.0) {
    for (auto& v : band) v *= 0.5 / peak;
  }
  return band;
}

}  // namespace binmoe
