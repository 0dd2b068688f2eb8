#pragma once

#include <cstdint>
#include <limits>

#include "shrinkcoup/model.hpp"
#include "shrinkcoup/rng.hpp"

namespace shrinkcoup {

enum class MetricEstimator { Mc, RaoBlackwell, AnalyticTvApprox };

struct MetricEstimate {
  double value = 0.0;  // in [0, 1]
  MetricEstimator estimator = MetricEstimator::RaoBlackwell;
  int R = 0;
};

/// Probability that the maximal coupling of the two truncated slice targets
/// x^{s-1} e^{-m x} on (0, T) and x^{s-1} e^{-m~ x} on (0, T~) returns equal
/// draws.  Arguments are log T, log T~.
double meet_prob_log_T(double log_T, double log_T_t, double m, double m_t, double s);

/// Same, from the slice levels U, U~ in (0, 1], with T = (U^{-2/(1+nu)} - 1) / nu.
double meet_prob_component(double U, double U_t, double m, double m_t, double nu);

/// Monte Carlo estimate: fraction of R full-vector coupled eta draws that
/// leave some coordinate unmatched.
MetricEstimate metric_d_hat1(const ChainState& a, const ChainState& b, double nu, int R, const RngStream& rng,
                             std::uint64_t iter);

/// Rao-Blackwellized estimate 1 - prod_j mean_r P(meet_j | U_j^{(r)}).  The
/// running log-product stops early once it falls below `log_stop`; the value
/// returned is then 1 - exp(running product), which already exceeds any
/// threshold the caller compares against.
MetricEstimate metric_d_hat2(const ChainState& a, const ChainState& b, double nu, int R, const RngStream& rng,
                             std::uint64_t iter, double log_stop = -std::numeric_limits<double>::infinity());

/// Total variation between p(eta | m) and p(eta | m~).
double slice_target_tv(double m, double m_t, double nu);

/// sum_j |log m_j - log m~_j|.
double dbar(const ChainState& a, const ChainState& b);
/// min(1, sqrt((1+nu)(e-1)/4 * dbar)).
double tv_kernel_bound(double dbar_value, double nu);

/// min(1, sum_j |m_j - m~_j|).
double capped_l1(const ChainState& a, const ChainState& b);

}  // namespace shrinkcoup
