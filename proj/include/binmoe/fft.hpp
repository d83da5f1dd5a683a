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

#ifndef BINMOE_FFT_HPP_
#define BINMOE_FFT_HPP_

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <complex>
#include <span>
#include <vector>

namespace binmoe {

// One-sided real FFT of fixed size. Not thread safe: Eigen::FFT caches plans.
class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    fft_.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  }

  std::size_t size() const { return n_; }

  // `in` shorter than n is zero padded.
  std::vector<std::complex<double>> forward(std::span<const double> in) {
    buf_.assign(n_, 0.0);
    std::copy_n(in.begin(), std::min(in.size(), n_), buf_.begin());
    std::vector<std::complex<double>> out;
    fft_.fwd(out, buf_);
    return out;
  }

  // Inverse of a one-sided spectrum of n/2 + 1 bins. DC and Nyquist are
  // taken as real.
  std::vector<double> inverse(std::span<const std::complex<double>> spec) {
    std::vector<std::complex<double>> s(spec.begin(), spec.end());
    s.front() = s.front().real();
    s.back() = s.back().real();
    std::vector<double> out;
    fft_.inv(out, s, static_cast<Eigen::Index>(n_));
    return out;
  }

 private:
  std::size_t n_;
  Eigen::FFT<double> fft_;
  std::vector<double> buf_;
};

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Linear convolution through zero-padded FFTs.
std::vector<double> fft_convolve(std::span<const double> a,
                                 std::span<const double> b);

}  // namespace binmoe

#endif  // BINMOE_FFT_HPP_
