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

#include "binmoe/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

namespace binmoe {

namespace {

std::uint32_t le32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}
std::uint16_t le16(const unsigned char* p) {
  return std::uint16_t(p[0] | p[1] << 8);
}
void put32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
void put16(std::vector<unsigned char>& b, std::uint16_t v) {
  b.push_back(static_cast<unsigned char>(v));
  b.push_back(static_cast<unsigned char>(v >> 8));
}

}  // namespace

WavData read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIo, "cannot read " + path);
  const std::vector<unsigned char> b{std::istreambuf_iterator<char>(in), {}};
  auto fail = [&](const std::string& why) {
    return Error(Errc::kParseError, path + ": " + why);
  };
  if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 ||
      std::memcmp(b.data() + 8, "WAVE", 4) != 0) {
    throw fail("not a RIFF/WAVE file");
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  for (std::size_t pos = 12; pos + 8 <= b.size();) {
    const std::uint32_t len = le32(&b[pos + 4]);
    const std::size_t body = pos + 8;
    if (body + len > b.size()) throw fail("truncated chunk");
    if (std::memcmp(&b[pos], "fmt ", 4) == 0 && len >= 16) {
      format = le16(&b[body]);
      channels = le16(&b[body + 2]);
      rate = le32(&b[body + 4]);
      bits = le16(&b[body + 14]);
      if (format == 0xFFFE && len >= 26) format = le16(&b[body + 24]);
    } else if (std::memcmp(&b[pos], "data", 4) == 0) {
      data = &b[body];
      data_len = len;
    }
    pos = body + len + (len & 1);
  }
  if (channels == 0 || rate == 0 || !data) throw fail("missing fmt or data chunk");
  const bool is_float = format == 3 && bits == 32;
  if (!(format == 1 && (bits == 16 || bits == 24 || bits == 32)) && !is_float) {
    throw fail("unsupported sample format");
  }
  const std::size_t width = bits / 8;
  const std::size_t frames = data_len / (width * channels);
  WavData w;
  w.sample_rate = rate;
  w.audio.resize(channels, Eigen::Index(frames));
  for (std::size_t n = 0; n < frames; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + (n * channels + c) * width;
      double v = 0.0;
      if (is_float) {
        float f;
        std::uint32_t u = le32(p);
        std::memcpy(&f, &u, 4);
        v = f;
      } else if (bits == 16) {
        v = double(std::int16_t(le16(p))) / 32768.0;
      } else if (bits == 24) {
        std::int32_t s = std::int32_t(p[0] | p[1] << 8 | p[2] << 16);
        if (s & 0x800000) s -= 0x1000000;
        v = double(s) / 8388608.0;
      } else {
        v = double(std::int32_t(le32(p))) / 2147483648.0;
      }
      w.audio(Eigen::Index(c), Eigen::Index(n)) = v;
    }
  }
  return w;
}

double write_wav(const std::string& path, const Audio& audio, double sample_rate,
                 std::optional<double> peak_dbfs) {
  double gain = 1.0;
  if (peak_dbfs) {
    const double peak = audio.size() ? audio.cwiseAbs().maxCoeff() : 0.0;
    if (peak > 0.0) gain = std::pow(10.0, *peak_dbfs / 20.0) / peak;
  }
  const auto channels = std::uint16_t(audio.rows());
  const auto frames = std::size_t(audio.cols());
  const std::uint32_t data_len = std::uint32_t(frames * channels * 3);
  std::vector<unsigned char> b;
  b.reserve(44 + data_len);
  b.insert(b.end(), {'R', 'I', 'F', 'F'});
  put32(b, 36 + data_len);
  b.insert(b.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put32(b, 16);
  put16(b, 1);
  put16(b, channels);
  const auto rate = std::uint32_t(std::lround(sample_rate));
  put32(b, rate);
  put32(b, rate * channels * 3);
  put16(b, std::uint16_t(channels * 3));
  put16(b, 24);
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  put32(b, data_len);
  for (std::size_t n = 0; n < frames; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double v = std::clamp(gain * audio(Eigen::Index(c), Eigen::Index(n)), -1.0, 1.0);
      const auto s = std::int32_t(std::lround(std::min(v * 8388608.0, 8388607.0)));
      b.push_back(static_cast<unsigned char>(s));
      b.push_back(static_cast<unsigned char>(s >> 8));
      b.push_back(static_cast<unsigned char>(s >> 16));
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::kIo, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(b.data()), std::streamsize(b.size()));
  if (!out) throw Error(Errc::kIo, "write failed: " + path);
  return gain;
}

}  // namespace binmoe
