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

#include "binmoe/stft.hpp"

#include "binmoe/fft.hpp"

namespace binmoe {

std::vector<double> fft_convolve(std::span<const double> a,
                                 std::span<const double> b) {
  if (a.empty() || b.empty()) return {};
  const std::size_t out_len = a.size() + b.size() - 1;
  const std::size_t n = next_pow2(out_len);
  RealFft fft(n);
  auto fa = fft.forward(a);
  const auto fb = fft.forward(b);
  for (std::size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
  auto out = fft.inverse(fa);
  out.resize(out_len);
  return out;
}

void StftConfig::validate() const {
  if (fft_size < 4 || (fft_size & (fft_size - 1)) != 0) {
    throw Error(Errc::kInvalidArgument, "stft: fft_size must be a power of two");
  }
  if (hop == 0 || fft_size % hop != 0 || hop > fft_size / 2) {
    throw Error(Errc::kInvalidArgument,
                "stft: hop must divide fft_size and be <= fft_size/2");
  }
  if (!(sample_rate > 0.0)) {
    throw Error(Errc::kInvalidArgument, "stft: sample_rate must be > 0");
  }
}

RealVec hann_window(std::size_t n) {
  RealVec w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(kTwoPi * double(i) / double(n));
  }
  return w;
}

double ola_gain(const StftConfig& cfg) {
  return hann_window(cfg.fft_size).squaredNorm() / double(cfg.hop);
}

std::vector<SpectralFrame> analyze(const Audio& audio, const StftConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.fft_size;
  const std::size_t len = std::size_t(audio.cols());
  if (audio.rows() == 0) {
    throw Error(Errc::kChannelMismatch, "analyze: no channels");
  }
  if (len < n) {
    throw Error(Errc::kTooShort, "analyze: " + std::to_string(len) +
                                     " samples < fft_size " +
                                     std::to_string(n));
  }
  const std::size_t num_frames = (len - n) / cfg.hop + 1;
  const std::size_t bins = n / 2 + 1;
  const RealVec w = hann_window(n);
  RealFft fft(n);
  std::vector<double> seg(n);
  std::vector<SpectralFrame> frames(num_frames);
  for (std::size_t t = 0; t < num_frames; ++t) {
    frames[t].time_index = t;
    frames[t].x.resize(audio.rows(), Eigen::Index(bins));
    for (Eigen::Index ch = 0; ch < audio.rows(); ++ch) {
      for (std::size_t i = 0; i < n; ++i) {
        seg[i] = w[i] * audio(ch, Eigen::Index(t * cfg.hop + i));
      }
      const auto spec = fft.forward(seg);
      for (std::size_t k = 0; k < bins; ++k) {
        frames[t].x(ch, Eigen::Index(k)) = spec[k];
      }
    }
  }
  return frames;
}

Audio synthesize(const std::vector<SpectralFrame>& frames,
                 const StftConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.fft_size;
  const std::size_t bins = n / 2 + 1;
  if (frames.empty()) return Audio(0, 0);
  const Eigen::Index channels = frames.front().x.rows();
  for (const auto& f : frames) {
    if (f.num_bins() != bins || f.x.rows() != channels) {
      throw Error(Errc::kInconsistentFrames,
                  "synthesize: frame shape differs from the first frame");
    }
  }
  const std::size_t len = (frames.size() - 1) * cfg.hop + n;
  Audio out = Audio::Zero(channels, Eigen::Index(len));
  const RealVec w = hann_window(n);
  const double norm = 1.0 / ola_gain(cfg);
  RealFft fft(n);
  std::vector<std::complex<double>> spec(bins);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    for (Eigen::Index ch = 0; ch < channels; ++ch) {
      for (std::size_t k = 0; k < bins; ++k) {
        spec[k] = frames[t].x(ch, Eigen::Index(k));
      }
      const auto seg = fft.inverse(spec);
      for (std::size_t i = 0; i < n; ++i) {
        out(ch, Eigen::Index(t * cfg.hop + i)) += norm * w[i] * seg[i];
      }
    }
  }
  return out;
}

std::size_t frame_padding(const StftConfig& cfg) {
  return cfg.fft_size - cfg.hop;
}

std::vector<SpectralFrame> analyze_padded(const Audio& audio,
                                          const StftConfig& cfg) {
  cfg.validate();
  const std::size_t pad = frame_padding(cfg);
  // Tail rounded up to whole hops so the last samples get full overlap too.
  const std::size_t tail = pad + (cfg.hop - std::size_t(audio.cols()) % cfg.hop) % cfg.hop;
  Audio padded = Audio::Zero(audio.rows(), audio.cols() + Eigen::Index(pad + tail));
  padded.middleCols(Eigen::Index(pad), audio.cols()) = audio;
  return analyze(padded, cfg);
}

Audio synthesize_trimmed(const std::vector<SpectralFrame>& frames,
                         const StftConfig& cfg, std::size_t length) {
  const Audio full = synthesize(frames, cfg);
  const std::size_t pad = frame_padding(cfg);
  Audio out = Audio::Zero(full.rows(), Eigen::Index(length));
  const Eigen::Index avail =
      std::min<Eigen::Index>(Eigen::Index(length),
                             std::max<Eigen::Index>(0, full.cols() - Eigen::Index(pad)));
  if (avail > 0) out.leftCols(avail) = full.middleCols(Eigen::Index(pad), avail);
  return out;
}

double frame_center_seconds(std::size_t t, const StftConfig& cfg) {
  const double center = double(t * cfg.hop) + 0.5 * double(cfg.fft_size) -
                        double(frame_padding(cfg));
  return center / cfg.sample_rate;
}

}  // namespace binmoe
