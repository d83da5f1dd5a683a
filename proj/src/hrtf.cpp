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

#include "binmoe/hrtf.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace binmoe {

ComplexVec HrtfSet::left(std::size_t q) const {
  ComplexVec v(Eigen::Index(h.size()));
  for (std::size_t k = 0; k < h.size(); ++k) v[Eigen::Index(k)] = h[k](Eigen::Index(q), 0);
  return v;
}

ComplexVec HrtfSet::right(std::size_t q) const {
  ComplexVec v(Eigen::Index(h.size()));
  for (std::size_t k = 0; k < h.size(); ++k) v[Eigen::Index(k)] = h[k](Eigen::Index(q), 1);
  return v;
}

cdouble sphere_response(double ka, double cos_incidence) {
  if (ka <= 0.0) return 1.0;
  constexpr int kMaxTerms = 100;
  constexpr double kRelTol = 1e-6;
  const double x = ka;
  const cdouble i(0.0, 1.0);
  // Spherical Hankel functions h_n = j_n + i y_n by upward recurrence; the
  // combination is dominated by y_n for n > x, which keeps it stable.
  cdouble h_prev(std::sin(x) / x, -std::cos(x) / x);
  cdouble h_cur(std::sin(x) / (x * x) - std::cos(x) / x,
                -std::cos(x) / (x * x) - std::sin(x) / x);
  double p_prev = 1.0;
  double p_cur = cos_incidence;
  // (-i)^(m-1) starts at m = 0 as i.
  cdouble phase = i;
  cdouble sum = phase * 1.0 * p_prev / (-h_cur);  // m = 0: h'_0 = -h_1
  int small_run = 0;
  for (int m = 1; m < kMaxTerms; ++m) {
    phase *= -i;
    const cdouble dh = h_prev - double(m + 1) / x * h_cur;
    const cdouble term = phase * double(2 * m + 1) * p_cur / dh;
    sum += term;
    if (double(m) > x && std::abs(term) < kRelTol * std::abs(sum)) {
      if (++small_run >= 2) {
        // Formula above is for the e^{+i w t} convention; conjugate so a
        // delay tau is e^{-i 2 pi f tau} as in the steering vectors.
        return std::conj(sum / (x * x));
      }
    } else {
      small_run = 0;
    }
    const cdouble h_next = double(2 * m + 1) / x * h_cur - h_prev;
    h_prev = h_cur;
    h_cur = h_next;
    const double p_next =
        (double(2 * m + 1) * cos_incidence * p_cur - double(m) * p_prev) /
        double(m + 1);
    p_prev = p_cur;
    p_cur = p_next;
  }
  throw Error(Errc::kSeriesNotConverged,
              "sphere_response: series did not converge for ka = " +
                  std::to_string(ka));
}

std::pair<ComplexVec, ComplexVec> sphere_hrtf(const SphereHeadParams& params,
                                              const Direction& dir,
                                              const FreqGrid& freqs) {
  if (!(params.radius > 0.0) || !(params.speed_of_sound > 0.0)) {
    throw Error(Errc::kInvalidArgument, "sphere_hrtf: radius must be > 0");
  }
  const Eigen::Vector3d u = dir.unit();
  const Eigen::Vector3d ear_l(std::cos(params.ear_azimuth),
                              std::sin(params.ear_azimuth), 0.0);
  const Eigen::Vector3d ear_r(ear_l.x(), -ear_l.y(), 0.0);
  const std::array<double, 2> cos_inc = {std::clamp(u.dot(ear_l), -1.0, 1.0),
                                         std::clamp(u.dot(ear_r), -1.0, 1.0)};
  std::array<ComplexVec, 2> out;
  for (int ear = 0; ear < 2; ++ear) {
    out[ear].resize(Eigen::Index(freqs.num_bins()));
    for (std::size_t k = 0; k < freqs.num_bins(); ++k) {
      const double f = freqs[k];
      cdouble v;
      if (f == 0.0) {
        v = 1.0;
      } else if (f < 50.0) {
        v = std::polar(1.0, kTwoPi * f * params.radius * cos_inc[ear] /
                                params.speed_of_sound);
      } else {
        const double ka = kTwoPi * f * params.radius / params.speed_of_sound;
        v = sphere_response(ka, cos_inc[ear]);
      }
      out[ear][Eigen::Index(k)] = v;
    }
  }
  return {out[0], out[1]};
}

HrtfSet sphere_hrtf_set(const SphereHeadParams& params,
                        const DirectionGrid& grid, const FreqGrid& freqs) {
  HrtfSet set{grid, freqs, {}, 0};
  set.h.assign(freqs.num_bins(), ComplexMat(Eigen::Index(grid.size()), 2));
  for (std::size_t q = 0; q < grid.size(); ++q) {
    const auto [l, r] = sphere_hrtf(params, grid[q], freqs);
    for (std::size_t k = 0; k < freqs.num_bins(); ++k) {
      set.h[k](Eigen::Index(q), 0) = l[Eigen::Index(k)];
      set.h[k](Eigen::Index(q), 1) = r[Eigen::Index(k)];
    }
  }
  return set;
}

void save_hrtf_grid(const HrtfSet& set, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error(Errc::kIo, "save_hrtf_grid: cannot open " + path);
  os << "# HRTF grid, one row per direction and frequency\n";
  os << "az_deg,el_deg,freq_hz,re_L,im_L,re_R,im_R\n";
  char buf[512];
  for (std::size_t q = 0; q < set.grid.size(); ++q) {
    for (std::size_t k = 0; k < set.num_bins(); ++k) {
      const cdouble l = set.h[k](Eigen::Index(q), 0);
      const cdouble r = set.h[k](Eigen::Index(q), 1);
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                    set.grid[q].azimuth_deg(), set.grid[q].elevation_deg(),
                    set.freqs[k], l.real(), l.imag(), r.real(), r.imag());
      os << buf;
    }
  }
  if (!os) throw Error(Errc::kIo, "save_hrtf_grid: write failed for " + path);
}

namespace {

struct GridRows {
  Direction dir;
  std::map<double, std::pair<cdouble, cdouble>> by_freq;
};

}  // namespace

HrtfSet load_hrtf_grid(const std::string& path, const DirectionGrid& grid,
                       const FreqGrid& freqs) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::kIo, "load_hrtf_grid: cannot open " + path);
  std::vector<GridRows> dirs;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    if (!header_seen) {
      if (line.substr(first) != "az_deg,el_deg,freq_hz,re_L,im_L,re_R,im_R") {
        throw Error(Errc::kParseError, path + ":" + std::to_string(line_no) +
                                           ": expected header row");
      }
      header_seen = true;
      continue;
    }
    std::array<double, 7> v{};
    std::size_t pos = 0;
    for (int c = 0; c < 7; ++c) {
      const auto comma = line.find(',', pos);
      const std::string field = line.substr(pos, comma == std::string::npos
                                                     ? std::string::npos
                                                     : comma - pos);
      std::size_t used = 0;
      try {
        v[c] = std::stod(field, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || field.find_first_not_of(" \t", used) != std::string::npos) {
        throw Error(Errc::kParseError, path + ":" + std::to_string(line_no) +
                                           ": byte " + std::to_string(pos + 1) +
                                           ": bad number '" + field + "'");
      }
      if ((c < 6) != (comma != std::string::npos)) {
        throw Error(Errc::kParseError, path + ":" + std::to_string(line_no) +
                                           ": expected 7 comma separated fields");
      }
      pos = comma + 1;
    }
    const Direction dir = Direction::from_degrees(v[0], v[1]);
    auto it = std::find_if(dirs.begin(), dirs.end(),
                           [&](const GridRows& g) { return g.dir == dir; });
    if (it == dirs.end()) {
      dirs.push_back({dir, {}});
      it = std::prev(dirs.end());
    }
    const bool inserted =
        it->by_freq.emplace(v[2], std::make_pair(cdouble(v[3], v[4]),
                                                 cdouble(v[5], v[6])))
            .second;
    if (!inserted) {
      throw Error(Errc::kParseError, path + ":" + std::to_string(line_no) +
                                         ": duplicate direction/frequency row");
    }
  }
  if (!header_seen) {
    throw Error(Errc::kParseError, path + ": missing header row");
  }

  HrtfSet set{grid, freqs, {}, 0};
  set.h.assign(freqs.num_bins(), ComplexMat(Eigen::Index(grid.size()), 2));
  for (std::size_t q = 0; q < grid.size(); ++q) {
    auto it = std::find_if(dirs.begin(), dirs.end(),
                           [&](const GridRows& g) { return g.dir == grid[q]; });
    if (it == dirs.end()) {
      char buf[128];
      std::snprintf(buf, sizeof(buf), "az=%.6g deg, el=%.6g deg",
                    grid[q].azimuth_deg(), grid[q].elevation_deg());
      throw Error(Errc::kGridMismatch,
                  "load_hrtf_grid: " + path + " has no direction " + buf);
    }
    const auto& rows = it->by_freq;
    const double f_max = rows.rbegin()->first;
    std::size_t held = 0;
    for (std::size_t k = 0; k < freqs.num_bins(); ++k) {
      const double f = freqs[k];
      std::pair<cdouble, cdouble> val;
      if (f > f_max + 1e-9) {
        val = rows.rbegin()->second;
        ++held;
      } else {
        auto hi = rows.lower_bound(f - 1e-9);
        if (hi == rows.begin() || std::abs(hi->first - f) <= 1e-9) {
          val = hi->second;
        } else {
          auto lo = std::prev(hi);
          const double w = (f - lo->first) / (hi->first - lo->first);
          val = {(1.0 - w) * lo->second.first + w * hi->second.first,
                 (1.0 - w) * lo->second.second + w * hi->second.second};
        }
      }
      set.h[k](Eigen::Index(q), 0) = val.first;
      set.h[k](Eigen::Index(q), 1) = val.second;
    }
    set.held_bins = std::max(set.held_bins, held);
  }
  return set;
}

double itd_of(const HrtfSet& set, std::size_t q) {
  if (q >= set.grid.size()) {
    throw Error(Errc::kDirectionOffGrid, "itd_of: direction index out of range");
  }
  double unwrapped = 0.0;
  double prev = 0.0;
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 1; k < set.num_bins(); ++k) {
    const double f = set.freqs[k];
    if (f > 1500.0) break;
    const cdouble l = set.h[k](Eigen::Index(q), 0);
    const cdouble r = set.h[k](Eigen::Index(q), 1);
    const double wrapped = std::arg(l * std::conj(r));
    double d = wrapped - prev;
    d -= kTwoPi * std::round(d / kTwoPi);
    unwrapped += d;
    prev = wrapped;
    if (f >= 200.0) {
      acc += unwrapped / (kTwoPi * f);
      ++count;
    }
  }
  return count > 0 ? acc / double(count) : 0.0;
}

double ild_at(const HrtfSet& set, std::size_t q, std::size_t k) {
  return 20.0 * std::log10(std::abs(set.h[k](Eigen::Index(q), 0)) /
                           std::abs(set.h[k](Eigen::Index(q), 1)));
}

}  // namespace binmoe
