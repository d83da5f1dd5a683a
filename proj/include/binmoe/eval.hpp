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

#ifndef BINMOE_EVAL_HPP_
#define BINMOE_EVAL_HPP_

#include "binmoe/core.hpp"
#include "binmoe/hrtf.hpp"
#include "binmoe/stft.hpp"

#include <span>
#include <string>
#include <vector>

namespace binmoe {

struct BinauralTrack {
  std::vector<double> left;
  std::vector<double> right;
  double sample_rate = 48000.0;

  std::size_t size() const { return left.size(); }
  void validate() const;  // equal lengths, positive rate

  static BinauralTrack from_audio(const Audio& two_channels, double sample_rate);
};

struct CueOptions {
  double frame_seconds = 0.02;  // 50% overlap
  double itd_low_hz = 200.0;
  double itd_high_hz = 1500.0;
  double itd_max_lag_s = 1e-3;
  double ild_low_hz = 500.0;
  double ild_high_hz = 8000.0;
  double silence_dbfs = -80.0;
};

// Seconds; positive when the right channel lags.
double estimate_itd(std::span<const double> left, std::span<const double> right,
                    double sample_rate, const CueOptions& opts = {});
// dB, left over right.
double estimate_ild(std::span<const double> left, std::span<const double> right,
                    double sample_rate, const CueOptions& opts = {});

struct CueFrame {
  std::size_t frame = 0;
  double start_seconds = 0.0;
  double itd_err_us = 0.0;
  double ild_err_db = 0.0;
  bool silent = false;  // skipped, errors not meaningful
};

struct CueErrors {
  std::vector<CueFrame> frames;

  std::size_t active() const;
  double median_itd_us() const;
  double median_ild_db() const;
  double mean_itd_us() const;
  double mean_ild_db() const;
};

// Per-frame |ITD_test - ITD_ref| and |ILD_test - ILD_ref|. Frames where any
// channel of either track is below the silence threshold are flagged.
CueErrors itd_ild_error(const BinauralTrack& test, const BinauralTrack& ref,
                        const CueOptions& opts = {});

void write_cue_csv(const CueErrors& e, const std::string& path);

// HRTF rendering of a mono signal in the STFT domain, one grid direction per
// padded frame. Throws DirectionOffGrid.
BinauralTrack reference_render(std::span<const double> source,
                               const std::vector<Direction>& frame_dirs,
                               const HrtfSet& h, const StftConfig& stft);

// Frame level in dBFS (RMS re 1.0) of `signal` under each padded frame.
std::vector<double> frame_levels_dbfs(std::span<const double> signal,
                                      const StftConfig& stft,
                                      std::size_t num_frames);

struct TrackingFrame {
  std::size_t frame = 0;
  double true_azimuth_deg = 0.0;
  double argmin_azimuth_deg = 0.0;
  double source_dbfs = 0.0;
  std::vector<double> alpha;
  bool counted = false;
  bool hit = false;
};

struct TrackingReport {
  std::vector<TrackingFrame> frames;
  std::size_t counted = 0;
  std::size_t hits = 0;
  double tolerance_deg = 12.0;

  double hit_rate() const { return counted ? double(hits) / double(counted) : 0.0; }
};

struct TrackingOptions {
  double tolerance_deg = 12.0;
  std::size_t burn_in_frames = 0;
  double voiced_dbfs = -50.0;
};

// In-memory form: equal-length per-frame tracks.
TrackingReport tracking_report(const std::vector<double>& argmin_azimuth_deg,
                               const std::vector<double>& true_azimuth_deg,
                               const std::vector<double>& source_dbfs,
                               const TrackingOptions& opts = {});

// Reads the MoE diagnostics CSV and the ground-truth CSV (frame, time_s,
// azimuth_deg[, source_dbfs]). Throws TimelineMismatch when the frame
// columns disagree.
TrackingReport tracking_report(const std::string& diagnostics_csv,
                               const std::string& truth_csv,
                               const TrackingOptions& opts = {});

// Minimal CSV table: header names and numeric rows.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const;  // throws ParseError
};
CsvTable read_csv(const std::string& path);

}  // namespace binmoe

#endif  // BINMOE_EVAL_HPP_
