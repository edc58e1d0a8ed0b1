#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "pdmp/errors.hpp"

namespace pdmp {

struct EstimateWithError {
  enum class Method { IID, BatchMeans };

  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
  Method method = Method::IID;
  std::size_t n_batches = 0;

  double z_score(double reference = 0.0) const {
    const double diff = mean - reference;
    if (std_error > 0.0) return diff / std_error;
    return diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
  }
};

inline EstimateWithError iid_estimate(std::span<const double> xs) {
  EstimateWithError est;
  est.n = xs.size();
  if (xs.empty()) return est;
  // Two-pass mean/variance; inputs here are at most a few million values.
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  est.mean = mean;
  if (xs.size() > 1) {
    est.std_error = std::sqrt(ss / static_cast<double>(xs.size() - 1) /
                              static_cast<double>(xs.size()));
  }
  return est;
}

// Batch means over equally weighted batches.
inline EstimateWithError batch_means_estimate(std::span<const double> batch_means,
                                              std::size_t n_samples) {
  EstimateWithError est = iid_estimate(batch_means);
  est.method = EstimateWithError::Method::BatchMeans;
  est.n_batches = batch_means.size();
  est.n = n_samples;
  return est;
}

// Q_KS(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2).
inline double kolmogorov_survival(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-16 * std::abs(sum)) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  bool pass(double alpha = 0.01) const { return p_value > alpha; }
};

// Asymptotic p-value with Stephens' small-sample correction.
inline double ks_p_value(double d, double effective_n) {
  const double root = std::sqrt(effective_n);
  return kolmogorov_survival((root + 0.12 + 0.11 / root) * d);
}

// Two-sample Kolmogorov-Smirnov test. Ties and infinite values are allowed
// (the test is then conservative).
inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw Error("ks_two_sample needs non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return {d, ks_p_value(d, na * nb / (na + nb))};
}

// One-sample test against a continuous CDF.
inline KsResult ks_one_sample(std::vector<double> a, const std::function<double(double)>& cdf) {
  if (a.empty()) throw Error("ks_one_sample needs a non-empty sample");
  std::sort(a.begin(), a.end());
  const double n = static_cast<double>(a.size());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double f = cdf(a[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return {d, ks_p_value(d, n)};
}

inline double exponential_cdf(double rate, double x) {
  return x <= 0.0 ? 0.0 : -std::expm1(-rate * x);
}

}  // namespace pdmp
