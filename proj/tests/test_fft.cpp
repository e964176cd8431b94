#include <catch2/catch_amalgamated.hpp>

#include <complex>
#include <vector>

#include "bfkit/common.hpp"
#include "bfkit/fft.hpp"

using namespace bfkit;
using fft::cplx;

namespace {

// Direct O(n^2) DFT used as the oracle for the fast transform.
std::vector<cplx> direct_dft(const std::vector<cplx>& a) {
  const std::size_t n = a.size();
  std::vector<cplx> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    cplx acc(0.0, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const double ang = -2.0 * M_PI * static_cast<double>(k) * static_cast<double>(j) /
                         static_cast<double>(n);
      acc += a[j] * cplx(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

std::vector<cplx> random_vector(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<cplx> v(n);
  for (auto& x : v) x = cplx(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
  return v;
}

double max_abs_diff(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("fast transform matches direct DFT") {
  // powers of two exercise the radix-2 path, the rest the chirp-z path
  for (std::size_t n : {1u, 2u, 3u, 5u, 8u, 16u, 17u, 60u, 64u, 100u, 127u, 256u, 1000u}) {
    const auto a = random_vector(n, 0xF00D + n);
    auto fast = a;
    fft::transform(fast);
    const auto slow = direct_dft(a);
    REQUIRE(fast.size() == n);
    CHECK(max_abs_diff(fast, slow) < 1e-8 * static_cast<double>(n));
  }
}

TEST_CASE("inverse transform round-trips") {
  for (std::size_t n : {4u, 7u, 64u, 129u, 500u}) {
    const auto a = random_vector(n, 0xBEEF + n);
    auto w = a;
    fft::transform(w);
    fft::inverse(w);
    CHECK(max_abs_diff(a, w) < 1e-10 * static_cast<double>(n));
  }
}

TEST_CASE("real input helper matches complex transform") {
  Rng rng(42);
  std::vector<double> r(96);
  for (auto& x : r) x = rng.normal();
  std::vector<cplx> c(r.begin(), r.end());
  fft::transform(c);
  CHECK(max_abs_diff(fft::transform_real(r), c) < 1e-9);
}

TEST_CASE("transform of a pure tone concentrates in one bin") {
  const std::size_t n = 128;
  std::vector<double> a(n);
  const std::size_t k0 = 9;
  for (std::size_t j = 0; j < n; ++j)
    a[j] = std::cos(2.0 * M_PI * static_cast<double>(k0 * j) / static_cast<double>(n));
  const auto spec = fft::transform_real(a);
  CHECK(std::abs(spec[k0]) > 0.99 * (static_cast<double>(n) / 2.0));
  for (std::size_t k = 0; k < n; ++k) {
    if (k == k0 || k == n - k0) continue;
    CHECK(std::abs(spec[k]) < 1e-8 * static_cast<double>(n));
  }
}

TEST_CASE("empty input is rejected") {
  std::vector<cplx> empty;
  CHECK_THROWS_AS(fft::transform(empty), NumericError);
}
