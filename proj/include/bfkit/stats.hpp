// Student-t machinery: regularized incomplete beta, CDF/quantile,
// confidence intervals, Welch two-sample test.
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "bfkit/common.hpp"

namespace bfkit::stats {

namespace detail {

// Continued fraction for the incomplete beta, modified Lentz method.
inline double beta_cf(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 3e-15;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 500; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) return h;
  }
  throw NumericError("incomplete beta: continued fraction did not converge");
}

}  // namespace detail

// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  if (a <= 0.0 || b <= 0.0) throw ConfigError("incomplete_beta: a and b must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                        a * std::log(x) + b * std::log1p(-x);
  const double bt = std::exp(log_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * detail::beta_cf(a, b, x) / a;
  return 1.0 - bt * detail::beta_cf(b, a, 1.0 - x) / b;
}

inline double student_t_cdf(double t, double nu) {
  if (nu <= 0.0) throw ConfigError("student_t_cdf: dof must be positive");
  const double x = nu / (nu + t * t);
  const double tail = 0.5 * incomplete_beta(0.5 * nu, 0.5, x);
  return t >= 0.0 ? 1.0 - tail : tail;
}

// Two-sided tail probability of |T| >= |t| for T ~ t(nu).
inline double student_t_two_sided_p(double t, double nu) {
  if (nu <= 0.0) throw ConfigError("student_t_two_sided_p: dof must be positive");
  return incomplete_beta(0.5 * nu, 0.5, nu / (nu + t * t));
}

inline double student_t_quantile(double p, double nu) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("student_t_quantile: p must lie in (0, 1)");
  if (nu <= 0.0) throw ConfigError("student_t_quantile: dof must be positive");
  if (p == 0.5) return 0.0;
  const bool upper = p > 0.5;
  const double target = upper ? p : 1.0 - p;
  double lo = 0.0, hi = 1.0;
  while (student_t_cdf(hi, nu) < target) {
    hi *= 2.0;
    if (hi > 1e12) throw NumericError("student_t_quantile: bracket expansion failed");
  }
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (student_t_cdf(mid, nu) < target)
      lo = mid;
    else
      hi = mid;
  }
  const double q = 0.5 * (lo + hi);
  return upper ? q : -q;
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Unbiased sample variance (n-1 denominator).
inline double sample_variance(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

struct MeanCi {
  double mean = 0.0;
  double halfwidth = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

// Student-t confidence interval: mean +- t_{1-alpha/2, n-1} * s / sqrt(n).
inline MeanCi mean_ci(const std::vector<double>& values, double alpha) {
  if (values.size() < 2) throw DataError("mean_ci: need at least two values");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("mean_ci: alpha must lie in (0, 1)");
  MeanCi ci;
  ci.mean = mean_of(values);
  const double s = std::sqrt(sample_variance(values));
  const double n = static_cast<double>(values.size());
  const double tq = student_t_quantile(1.0 - alpha / 2.0, n - 1.0);
  ci.halfwidth = tq * s / std::sqrt(n);
  ci.lo = ci.mean - ci.halfwidth;
  ci.hi = ci.mean + ci.halfwidth;
  return ci;
}

struct TTestResult {
  double t = 0.0;
  double dof = 0.0;
  double p = 1.0;
  bool significant_at_01 = false;
};

// Welch unequal-variance two-sample test, two-sided p-value.
inline TTestResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2)
    throw DataError("welch_t_test: each sample needs at least two values");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double va = sample_variance(a);
  const double vb = sample_variance(b);
  const double se_sq = va / na + vb / nb;
  if (se_sq <= 0.0)
    throw NumericError("welch_t_test: both samples have zero variance");
  TTestResult r;
  r.t = (mean_of(a) - mean_of(b)) / std::sqrt(se_sq);
  r.dof = se_sq * se_sq /
          ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
  r.p = student_t_two_sided_p(r.t, r.dof);
  r.significant_at_01 = r.p < 0.01;
  return r;
}

}  // namespace bfkit::stats
