#include "shrinkcoup/diagnostics.hpp"

#include <algorithm>
#include <cmath>

namespace shrinkcoup {

namespace {

int common_lag(std::span<const MeetingRecord> records) {
  if (records.empty()) throw DomainError("no meeting records");
  const int L = records.front().L;
  for (const auto& r : records)
    if (r.L != L) throw DomainError("meeting records mix different lags");
  if (L < 1) throw DomainError("lag must be at least 1");
  return L;
}

std::vector<double> uncensored_taus(std::span<const MeetingRecord> records) {
  std::vector<double> taus;
  for (const auto& r : records)
    if (!r.censored) taus.push_back(static_cast<double>(r.tau));
  if (taus.empty()) throw AllCensoredError("all meeting times are censored");
  std::sort(taus.begin(), taus.end());
  return taus;
}

}  // namespace

TVBoundCurve tv_bound_curve(std::span<const MeetingRecord> records, std::span<const long> t_grid) {
  const int L = common_lag(records);
  TVBoundCurve c;
  c.t_grid.assign(t_grid.begin(), t_grid.end());
  c.bound.assign(t_grid.size(), 0.0);
  for (const auto& r : records) {
    if (r.censored) {
      ++c.n_censored;
      continue;
    }
    ++c.n_pairs;
    for (std::size_t i = 0; i < t_grid.size(); ++i)
      c.bound[i] += static_cast<double>(tv_bound_contribution(r.tau, L, t_grid[i]));
  }
  if (c.n_pairs == 0) throw AllCensoredError("all meeting times are censored");
  for (double& b : c.bound) b /= c.n_pairs;
  return c;
}

std::vector<long> default_t_grid(std::span<const MeetingRecord> records) {
  const int L = common_lag(records);
  const std::vector<double> taus = uncensored_taus(records);
  const long q99 = static_cast<long>(std::ceil(quantile_sorted(taus, 0.99)));
  const long last = std::max(0L, static_cast<long>(taus.back()) - L);
  std::vector<long> grid;
  long t = 0;
  for (; t <= std::min(q99, last); ++t) grid.push_back(t);
  for (t = grid.back() + L; t < last + L; t += L) grid.push_back(std::min(t, last));
  return grid;
}

double quantile_sorted(std::span<const double> sorted, double prob) {
  if (sorted.empty()) throw DomainError("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

MeetingSummary meeting_summary(std::span<const MeetingRecord> records) {
  MeetingSummary s;
  for (const auto& r : records) s.n_censored += r.censored ? 1 : 0;
  const std::vector<double> taus = uncensored_taus(records);
  s.n = static_cast<int>(taus.size());
  s.min = taus.front();
  s.max = taus.back();
  s.q25 = quantile_sorted(taus, 0.25);
  s.median = quantile_sorted(taus, 0.5);
  s.q75 = quantile_sorted(taus, 0.75);
  s.q90 = quantile_sorted(taus, 0.9);
  return s;
}

double unbiased_estimate(std::span<const double> h_lead, std::span<const double> h_lag, long k, long m_end, int L,
                         long tau) {
  if (k < 0 || m_end < k) throw DomainError("unbiased_estimate: need 0 <= k <= m_end");
  if (L < 1 || tau < L) throw DomainError("unbiased_estimate: need L >= 1 and tau >= L");
  const long need_lead = std::max(m_end, tau - 1);
  if (static_cast<long>(h_lead.size()) <= need_lead)
    throw DataError("unbiased_estimate: lead trajectory not retained far enough");
  if (tau - 1 - L >= 0 && static_cast<long>(h_lag.size()) <= tau - 1 - L)
    throw DataError("unbiased_estimate: lag trajectory not retained far enough");

  const double count = static_cast<double>(m_end - k + 1);
  double avg = 0.0;
  for (long l = k; l <= m_end; ++l) avg += h_lead[static_cast<std::size_t>(l)];
  avg /= count;

  // Term l enters H_s for every s in [k, m_end] with l - s a positive multiple of L.
  double corr = 0.0;
  for (long l = k + L; l <= tau - 1; ++l) {
    const long lo = std::max<long>(L, l - m_end);
    const long times = (l - k) / L - (lo + L - 1) / L + 1;
    if (times <= 0) continue;
    corr += static_cast<double>(times) / count *
            (h_lead[static_cast<std::size_t>(l)] - h_lag[static_cast<std::size_t>(l - L)]);
  }
  return avg + corr;
}

}  // namespace shrinkcoup
