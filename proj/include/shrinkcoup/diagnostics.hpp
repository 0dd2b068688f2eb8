#pragma once

// Meeting times to TV bounds, meeting-time summaries, and the lag-L
// unbiased estimator.

#include <span>
#include <vector>

#include "shrinkcoup/couplings.hpp"

namespace shrinkcoup {

struct TVBoundCurve {
  std::vector<long> t_grid;
  std::vector<double> bound;
  int n_pairs = 0;  // uncensored pairs averaged over
  int n_censored = 0;
};

/// Number of indices j >= 0 with t + (j+1) L < tau.
inline long tv_bound_contribution(long tau, int L, long t) {
  const long gap = tau - L - t;
  return gap <= 0 ? 0 : (gap + L - 1) / L;
}

/// Average of the per-pair contributions over uncensored records.  Throws
/// DomainError on mixed lags and AllCensoredError when nothing is left.
TVBoundCurve tv_bound_curve(std::span<const MeetingRecord> records, std::span<const long> t_grid);

/// Every t up to the 0.99 quantile of tau, then every L until the bound is zero.
std::vector<long> default_t_grid(std::span<const MeetingRecord> records);

struct MeetingSummary {
  double min = 0, q25 = 0, median = 0, q75 = 0, q90 = 0, max = 0;
  int n = 0;
  int n_censored = 0;
};

/// Linear-interpolation sample quantile (type 7) of a sorted sample.
double quantile_sorted(std::span<const double> sorted, double prob);

/// Order statistics of the uncensored meeting times.
MeetingSummary meeting_summary(std::span<const MeetingRecord> records);

/// Average over s in [k, m_end] of H_s = h(C_s) + sum_{j >= 1, s + jL < tau}
/// (h(C_{s+jL}) - h(C~_{s+(j-1)L})), computed in one pass over l.  `h_lead[l]` is h(C_l)
/// and `h_lag[l]` is h(C~_l); both must cover every index the formula reads,
/// i.e. up to max(m_end, tau - 1) and tau - 1 - L respectively.
double unbiased_estimate(std::span<const double> h_lead, std::span<const double> h_lag, long k, long m_end, int L,
                         long tau);

}  // namespace shrinkcoup
