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

#include "binmoe/eval.hpp"

#include "binmoe/fft.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace binmoe {

void BinauralTrack::validate() const {
  if (left.size() != right.size()) {
    throw Error(Errc::kChannelMismatch, "binaural track: channel lengths differ");
  }
  if (!(sample_rate > 0.0)) {
    throw Error(Errc::kInvalidArgument, "binaural track: sample rate");
  }
}

BinauralTrack BinauralTrack::from_audio(const Audio& two, double sample_rate) {
  if (two.rows() != 2) {
    throw Error(Errc::kChannelMismatch, "binaural track: need 2 channels");
  }
  BinauralTrack t;
  t.sample_rate = sample_rate;
  t.left.assign(two.row(0).data(), two.row(0).data() + two.cols());
  t.right.assign(two.row(1).data(), two.row(1).data() + two.cols());
  return t;
}

namespace {

double level_dbfs(std::span<const double> x) {
  if (x.empty()) return -400.0;
  double e = 0.0;
  for (double v : x) e += v * v;
  e /= double(x.size());
  return e > 0.0 ? 10.0 * std::log10(e) : -400.0;
}

void band_edges(double fs, std::size_t n, double lo, double hi,
                std::size_t& k0, std::size_t& k1) {
  const double df = fs / double(n);
  k0 = std::size_t(std::ceil(lo / df));
  k1 = std::min(n / 2, std::size_t(std::floor(hi / df)));
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + std::ptrdiff_t(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + std::ptrdiff_t(mid)));
  }
  return m;
}

}  // namespace

double estimate_itd(std::span<const double> left, std::span<const double> right,
                    double fs, const CueOptions& opts) {
  const std::size_t len = std::min(left.size(), right.size());
  const std::size_t n = next_pow2(2 * len);
  RealFft fft(n);
  const auto wl = hann_window(len);
  std::vector<double> l(len), r(len);
  for (std::size_t i = 0; i < len; ++i) {
    l[i] = left[i] * wl[Eigen::Index(i)];
    r[i] = right[i] * wl[Eigen::Index(i)];
  }
  const auto fl = fft.forward(l);
  const auto fr = fft.forward(r);
  std::size_t k0, k1;
  band_edges(fs, n, opts.itd_low_hz, opts.itd_high_hz, k0, k1);
  std::vector<cdouble> cross(fl.size(), 0.0);
  for (std::size_t k = k0; k <= k1 && k < cross.size(); ++k) {
    cross[k] = std::conj(fl[k]) * fr[k];
  }
  // cc[tau] = sum_n l[n] r[n + tau]
  const auto cc = fft.inverse(cross);
  const auto max_lag = std::ptrdiff_t(std::floor(opts.itd_max_lag_s * fs));
  auto at = [&](std::ptrdiff_t lag) {
    return cc[std::size_t((lag + std::ptrdiff_t(n)) % std::ptrdiff_t(n))];
  };
  std::ptrdiff_t best = 0;
  double peak = at(0);
  for (std::ptrdiff_t lag = -max_lag; lag <= max_lag; ++lag) {
    if (at(lag) > peak) {
      peak = at(lag);
      best = lag;
    }
  }
  double frac = 0.0;
  if (best > -max_lag && best < max_lag) {
    const double ym = at(best - 1), y0 = at(best), yp = at(best + 1);
    const double den = ym - 2.0 * y0 + yp;
    if (den < 0.0) frac = 0.5 * (ym - yp) / den;
  }
  return (double(best) + frac) / fs;
}

double estimate_ild(std::span<const double> left, std::span<const double> right,
                    double fs, const CueOptions& opts) {
  const std::size_t len = std::min(left.size(), right.size());
  const std::size_t n = next_pow2(len);
  RealFft fft(n);
  const auto fl = fft.forward(left.first(len));
  const auto fr = fft.forward(right.first(len));
  std::size_t k0, k1;
  band_edges(fs, n, opts.ild_low_hz, opts.ild_high_hz, k0, k1);
  double el = 0.0, er = 0.0;
  for (std::size_t k = k0; k <= k1; ++k) {
    el += std::norm(fl[k]);
    er += std::norm(fr[k]);
  }
  constexpr double kTiny = 1e-300;
  return 10.0 * std::log10(std::max(el, kTiny) / std::max(er, kTiny));
}

std::size_t CueErrors::active() const {
  return std::size_t(std::count_if(frames.begin(), frames.end(),
                                   [](const CueFrame& f) { return !f.silent; }));
}

double CueErrors::median_itd_us() const {
  std::vector<double> v;
  for (const auto& f : frames) if (!f.silent) v.push_back(f.itd_err_us);
  return median_of(std::move(v));
}

double CueErrors::median_ild_db() const {
  std::vector<double> v;
  for (const auto& f : frames) if (!f.silent) v.push_back(f.ild_err_db);
  return median_of(std::move(v));
}

double CueErrors::mean_itd_us() const {
  double s = 0.0;
  for (const auto& f : frames) if (!f.silent) s += f.itd_err_us;
  return active() ? s / double(active()) : 0.0;
}

double CueErrors::mean_ild_db() const {
  double s = 0.0;
  for (const auto& f : frames) if (!f.silent) s += f.ild_err_db;
  return active() ? s / double(active()) : 0.0;
}

CueErrors itd_ild_error(const BinauralTrack& test, const BinauralTrack& ref,
                        const CueOptions& opts) {
  test.validate();
  ref.validate();
  if (test.sample_rate != ref.sample_rate) {
    throw Error(Errc::kInvalidArgument, "itd_ild_error: sample rates differ");
  }
  if (test.size() != ref.size()) {
    throw Error(Errc::kTimelineMismatch, "itd_ild_error: track lengths differ");
  }
  const double fs = test.sample_rate;
  const auto len = std::size_t(std::lround(opts.frame_seconds * fs));
  const std::size_t hop = std::max<std::size_t>(1, len / 2);
  CueErrors out;
  if (len == 0 || test.size() < len) return out;
  for (std::size_t start = 0, i = 0; start + len <= test.size(); start += hop, ++i) {
    const std::span<const double> tl(test.left.data() + start, len);
    const std::span<const double> tr(test.right.data() + start, len);
    const std::span<const double> rl(ref.left.data() + start, len);
    const std::span<const double> rr(ref.right.data() + start, len);
    CueFrame f;
    f.frame = i;
    f.start_seconds = double(start) / fs;
    f.silent = std::min({level_dbfs(tl), level_dbfs(tr), level_dbfs(rl),
                         level_dbfs(rr)}) < opts.silence_dbfs;
    if (!f.silent) {
      f.itd_err_us = 1e6 * std::abs(estimate_itd(tl, tr, fs, opts) -
                                    estimate_itd(rl, rr, fs, opts));
      f.ild_err_db = std::abs(estimate_ild(tl, tr, fs, opts) -
                              estimate_ild(rl, rr, fs, opts));
    }
    out.frames.push_back(f);
  }
  return out;
}

void write_cue_csv(const CueErrors& e, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::kIo, "cannot write " + path);
  out << "frame,start_s,itd_err_us,ild_err_db,silent\n";
  char buf[128];
  for (const auto& f : e.frames) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f,%d\n", f.frame,
                  f.start_seconds, f.itd_err_us, f.ild_err_db, f.silent ? 1 : 0);
    out << buf;
  }
  if (!out) throw Error(Errc::kIo, "write failed: " + path);
}

BinauralTrack reference_render(std::span<const double> source,
                               const std::vector<Direction>& frame_dirs,
                               const HrtfSet& h, const StftConfig& stft) {
  stft.validate();
  if (!(h.freqs == stft.freq_grid())) {
    throw Error(Errc::kGridMismatch, "reference_render: HRTF frequency grid");
  }
  Audio mono(1, Eigen::Index(source.size()));
  for (std::size_t i = 0; i < source.size(); ++i) mono(0, Eigen::Index(i)) = source[i];
  auto frames = analyze_padded(mono, stft);
  if (frame_dirs.size() != frames.size()) {
    throw Error(Errc::kTimelineMismatch,
                "reference_render: " + std::to_string(frame_dirs.size()) +
                    " directions for " + std::to_string(frames.size()) + " frames");
  }
  std::vector<SpectralFrame> out(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const std::size_t q = h.grid.find(frame_dirs[t]);
    if (q == h.grid.size()) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "reference_render: azimuth %.4f deg off grid",
                    frame_dirs[t].azimuth_deg());
      throw Error(Errc::kDirectionOffGrid, buf);
    }
    out[t].time_index = frames[t].time_index;
    out[t].x.resize(2, frames[t].x.cols());
    for (Eigen::Index k = 0; k < frames[t].x.cols(); ++k) {
      const cdouble s = frames[t].x(0, k);
      out[t].x(0, k) = h.h[std::size_t(k)](Eigen::Index(q), 0) * s;
      out[t].x(1, k) = h.h[std::size_t(k)](Eigen::Index(q), 1) * s;
    }
  }
  return BinauralTrack::from_audio(synthesize_trimmed(out, stft, source.size()),
                                   stft.sample_rate);
}

std::vector<double> frame_levels_dbfs(std::span<const double> signal,
                                      const StftConfig& stft,
                                      std::size_t num_frames) {
  std::vector<double> lv(num_frames);
  const auto pad = std::ptrdiff_t(frame_padding(stft));
  const auto n = std::ptrdiff_t(stft.fft_size);
  const auto len = std::ptrdiff_t(signal.size());
  for (std::size_t t = 0; t < num_frames; ++t) {
    const std::ptrdiff_t a = std::ptrdiff_t(t * stft.hop) - pad;
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(a, 0);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(a + n, len);
    double e = 0.0;
    for (std::ptrdiff_t i = lo; i < hi; ++i) e += signal[std::size_t(i)] * signal[std::size_t(i)];
    e /= double(n);
    lv[t] = e > 0.0 ? 10.0 * std::log10(e) : -400.0;
  }
  return lv;
}

TrackingReport tracking_report(const std::vector<double>& argmin_deg,
                               const std::vector<double>& truth_deg,
                               const std::vector<double>& source_dbfs,
                               const TrackingOptions& opts) {
  if (argmin_deg.size() != truth_deg.size() ||
      (!source_dbfs.empty() && source_dbfs.size() != truth_deg.size())) {
    throw Error(Errc::kTimelineMismatch, "tracking_report: track lengths differ");
  }
  TrackingReport rep;
  rep.tolerance_deg = opts.tolerance_deg;
  for (std::size_t t = 0; t < truth_deg.size(); ++t) {
    TrackingFrame f;
    f.frame = t;
    f.true_azimuth_deg = truth_deg[t];
    f.argmin_azimuth_deg = argmin_deg[t];
    f.source_dbfs = source_dbfs.empty() ? 0.0 : source_dbfs[t];
    f.counted = t >= opts.burn_in_frames && f.source_dbfs > opts.voiced_dbfs;
    f.hit = circular_distance_deg(f.argmin_azimuth_deg, f.true_azimuth_deg) <=
            opts.tolerance_deg + 1e-9;
    if (f.counted) {
      ++rep.counted;
      if (f.hit) ++rep.hits;
    }
    rep.frames.push_back(std::move(f));
  }
  return rep;
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw Error(Errc::kParseError, "csv: missing column '" + name + "'");
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIo, "cannot read " + path);
  CsvTable tab;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (tab.header.empty()) {
      tab.header = std::move(cells);
      continue;
    }
    if (cells.size() != tab.header.size()) {
      throw Error(Errc::kParseError, path + ":" + std::to_string(line_no) +
                                         ": expected " +
                                         std::to_string(tab.header.size()) + " fields");
    }
    std::vector<double> row;
    for (const auto& c : cells) {
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (end == c.c_str() || *end != '\0') {
        throw Error(Errc::kParseError,
                    path + ":" + std::to_string(line_no) + ": bad number '" + c + "'");
      }
      row.push_back(v);
    }
    tab.rows.push_back(std::move(row));
  }
  if (tab.header.empty()) throw Error(Errc::kParseError, path + ": empty file");
  return tab;
}

TrackingReport tracking_report(const std::string& diagnostics_csv,
                               const std::string& truth_csv,
                               const TrackingOptions& opts) {
  const CsvTable diag = read_csv(diagnostics_csv);
  const CsvTable truth = read_csv(truth_csv);
  if (diag.rows.size() != truth.rows.size()) {
    throw Error(Errc::kTimelineMismatch,
                "tracking_report: " + std::to_string(diag.rows.size()) +
                    " diagnostic frames vs " + std::to_string(truth.rows.size()) +
                    " ground-truth frames");
  }
  const std::size_t df = diag.column("frame"), da = diag.column("argmin_azimuth_deg");
  const std::size_t tf = truth.column("frame"), ta = truth.column("azimuth_deg");
  std::size_t tl = truth.header.size();
  for (std::size_t i = 0; i < truth.header.size(); ++i) {
    if (truth.header[i] == "source_dbfs") tl = i;
  }
  std::vector<std::size_t> alpha_cols;
  for (std::size_t i = 0; i < diag.header.size(); ++i) {
    if (diag.header[i].rfind("alpha_", 0) == 0) alpha_cols.push_back(i);
  }
  std::vector<double> am, tr, lv;
  for (std::size_t t = 0; t < diag.rows.size(); ++t) {
    if (diag.rows[t][df] != truth.rows[t][tf]) {
      throw Error(Errc::kTimelineMismatch,
                  "tracking_report: frame index mismatch at row " + std::to_string(t));
    }
    am.push_back(diag.rows[t][da]);
    tr.push_back(truth.rows[t][ta]);
    if (tl < truth.header.size()) lv.push_back(truth.rows[t][tl]);
  }
  TrackingReport rep = tracking_report(am, tr, lv, opts);
  for (std::size_t t = 0; t < rep.frames.size(); ++t) {
    for (std::size_t c : alpha_cols) rep.frames[t].alpha.push_back(diag.rows[t][c]);
  }
  return rep;
}

}  // namespace binmoe
