#pragma once

// Statistical helpers shared by the test suites.  These are deliberately
// independent of the library: Boost supplies distributions and quadrature.

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

namespace testsupport {

/// Asymptotic Kolmogorov survival function with the Stephens correction.
inline double kolmogorov_sf(double d, double n_eff) {
  const double sn = std::sqrt(n_eff);
  const double lam = (sn + 0.12 + 0.11 / sn) * d;
  if (lam < 0.2) return 1.0;
  double sum = 0.0, sign = 1.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * lam * lam);
    sum += term;
    if (std::abs(term) < 1e-16) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

inline double ks_two_sample_pvalue(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  return kolmogorov_sf(d, na * nb / (na + nb));
}

inline double ks_one_sample_pvalue(std::vector<double> a, const std::function<double(double)>& cdf) {
  std::sort(a.begin(), a.end());
  const double n = static_cast<double>(a.size());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double f = cdf(a[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return kolmogorov_sf(d, n);
}

/// Pearson chi-square p-value of observed counts against expected probabilities.
inline double chi_square_pvalue(const std::vector<double>& counts, const std::vector<double>& probs) {
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  double stat = 0.0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const double e = total * probs[k];
    stat += (counts[k] - e) * (counts[k] - e) / e;
  }
  boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

struct MeanSd {
  double mean = 0.0;
  double se = 0.0;  // standard error of the mean
  double var = 0.0;
};

inline MeanSd mean_se(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double var = ss / (n - 1.0);
  return {m, std::sqrt(var / n), var};
}

/// |observed - expected| within k standard errors of a Bernoulli frequency.
inline bool within_binomial(double hits, double trials, double p, double k = 3.0) {
  const double se = std::sqrt(std::max(p * (1.0 - p), 1e-300) / trials);
  return std::abs(hits / trials - p) <= k * se + 1e-12;
}

}  // namespace testsupport
