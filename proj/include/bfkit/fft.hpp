// Complex FFT for arbitrary lengths: iterative radix-2 Cooley-Tukey with a
// Bluestein chirp-z fallback for non power-of-two sizes.
#pragma once

#include <complex>
#include <vector>

#include "bfkit/common.hpp"

namespace bfkit::fft {

using cplx = std::complex<double>;

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

namespace detail {

// In-place radix-2; n must be a power of two. inverse applies conjugate
// twiddles and leaves the result unscaled (caller divides by n).
inline void radix2(std::vector<cplx>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n <= 1) return;

  // bit reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
    const cplx wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      cplx w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const cplx u = a[i + k];
        const cplx v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

// Bluestein: express the length-n DFT as a convolution of length >= 2n-1,
// evaluated with radix-2 transforms.
inline void bluestein(std::vector<cplx>& a, bool inverse) {
  const std::size_t n = a.size();
  std::size_t m = 1;
  while (m < 2 * n - 1) m <<= 1;

  const double sign = inverse ? 1.0 : -1.0;
  std::vector<cplx> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the phase argument small for large k
    const std::uint64_t k2 = (static_cast<std::uint64_t>(k) * k) % (2 * n);
    const double ang = sign * M_PI * static_cast<double>(k2) / static_cast<double>(n);
    chirp[k] = cplx(std::cos(ang), std::sin(ang));
  }

  std::vector<cplx> x(m, cplx(0.0, 0.0));
  std::vector<cplx> y(m, cplx(0.0, 0.0));
  for (std::size_t k = 0; k < n; ++k) x[k] = a[k] * chirp[k];
  y[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) {
    y[k] = std::conj(chirp[k]);
    y[m - k] = y[k];
  }

  radix2(x, false);
  radix2(y, false);
  for (std::size_t k = 0; k < m; ++k) x[k] *= y[k];
  radix2(x, true);
  const double scale = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * scale * chirp[k];
}

}  // namespace detail

// Forward transform, unscaled: X[k] = sum_j x[j] exp(-2 pi i j k / n).
inline void transform(std::vector<cplx>& a) {
  if (a.empty()) throw NumericError("fft: empty input");
  if (is_power_of_two(a.size()))
    detail::radix2(a, false);
  else
    detail::bluestein(a, false);
}

// Inverse transform including the 1/n scale.
inline void inverse(std::vector<cplx>& a) {
  if (a.empty()) throw NumericError("fft: empty input");
  if (is_power_of_two(a.size()))
    detail::radix2(a, true);
  else
    detail::bluestein(a, true);
  const double scale = 1.0 / static_cast<double>(a.size());
  for (auto& v : a) v *= scale;
}

inline std::vector<cplx> transform_real(const std::vector<double>& x) {
  std::vector<cplx> a(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) a[i] = cplx(x[i], 0.0);
  transform(a);
  return a;
}

}  // namespace bfkit::fft
