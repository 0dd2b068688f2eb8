#include "shrinkcoup/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

#include "shrinkcoup/couplings.hpp"
#include "shrinkcoup/errors.hpp"
#include "shrinkcoup/gibbs.hpp"
#include "shrinkcoup/specfun.hpp"

namespace shrinkcoup {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

// log gamma_s(m x) from log x
double log_lower(double s, double m, double log_x) {
  if (log_x == -kInf) return -kInf;
  return specfun::log_reg_lower_gamma_logx(s, std::log(m) + log_x);
}

}  // namespace

double meet_prob_log_T(double log_T, double log_T_t, double m, double m_t, double s) {
  if (log_T == -kInf || log_T_t == -kInf) return 0.0;
  const double log_tmin = std::min(log_T, log_T_t);
  if (same_bits(m, m_t)) {
    const double log_tmax = std::max(log_T, log_T_t);
    return std::exp(log_lower(s, m, log_tmin) - log_lower(s, m, log_tmax));
  }
  // Side A has the larger rate; its density dominates left of K.
  double mA = m, mB = m_t, lTA = log_T, lTB = log_T_t;
  if (mA < mB) {
    std::swap(mA, mB);
    std::swap(lTA, lTB);
  }
  const double lgA = log_lower(s, mA, lTA);
  const double lgB = log_lower(s, mB, lTB);
  const double k_tilde = (s * (std::log(mA) - std::log(mB)) + lgB - lgA) / (mA - mB);
  const double tmin = std::exp(log_tmin);
  const double K = std::clamp(k_tilde, 0.0, tmin);
  const double log_K = K > 0.0 ? std::log(K) : -kInf;

  const double left = std::exp(log_lower(s, mB, log_K) - lgB);
  const double lA_tmin = log_lower(s, mA, log_tmin);
  const double right = std::exp(lA_tmin - lgA) * -std::expm1(log_lower(s, mA, log_K) - lA_tmin);
  return std::clamp(left + right, 0.0, 1.0);
}

double meet_prob_component(double U, double U_t, double m, double m_t, double nu) {
  if (!(U > 0.0 && U <= 1.0) || !(U_t > 0.0 && U_t <= 1.0))
    throw DomainError("meet_prob_component: slice levels must lie in (0, 1]");
  if (!(m > 0.0 && m_t > 0.0)) throw DomainError("meet_prob_component: rates must be positive");
  const double s = 0.5 * (1.0 + nu);
  auto log_T = [&](double u) {
    const double e = std::expm1(-std::log(u) / s);
    return e > 0.0 ? std::log(e) - std::log(nu) : -kInf;
  };
  return meet_prob_log_T(log_T(U), log_T(U_t), m, m_t, s);
}

MetricEstimate metric_d_hat2(const ChainState& a, const ChainState& b, double nu, int R, const RngStream& rng,
                             std::uint64_t iter, double log_stop) {
  if (R < 1) throw DomainError("metric_d_hat2: R must be at least 1");
  const double s = 0.5 * (1.0 + nu);
  double log_prod = 0.0;
  for (Eigen::Index j = 0; j < a.p(); ++j) {
    const double m = m_value(a.beta[j], a.xi, a.sigma2);
    const double m_t = m_value(b.beta[j], b.xi, b.sigma2);
    if (same_bits(m, m_t) && same_bits(a.eta[j], b.eta[j])) continue;
    RngCursor c = rng.at(iter, Block::Metric, static_cast<std::uint32_t>(j));
    double sum = 0.0;
    for (int r = 0; r < R; ++r) {
      const double u = c.uniform();
      sum += meet_prob_log_T(eta_slice_log_T(a.eta[j], nu, u), eta_slice_log_T(b.eta[j], nu, u), m, m_t, s);
    }
    log_prod += std::log(sum / R);
    if (log_prod < log_stop) break;
  }
  return {std::clamp(-std::expm1(log_prod), 0.0, 1.0), MetricEstimator::RaoBlackwell, R};
}

MetricEstimate metric_d_hat1(const ChainState& a, const ChainState& b, double nu, int R, const RngStream& rng,
                             std::uint64_t iter) {
  if (R < 1) throw DomainError("metric_d_hat1: R must be at least 1");
  const double s = 0.5 * (1.0 + nu);
  const Eigen::Index p = a.p();
  std::vector<RngCursor> cursors;
  cursors.reserve(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) cursors.push_back(rng.at(iter, Block::Metric, static_cast<std::uint32_t>(j)));

  int unmet = 0;
  for (int r = 0; r < R; ++r) {
    for (Eigen::Index j = 0; j < p; ++j) {
      RngCursor& c = cursors[static_cast<std::size_t>(j)];
      const double u = c.uniform();
      const double u_inv = c.uniform();
      const TruncatedGamma lead(s, m_value(a.beta[j], a.xi, a.sigma2), eta_slice_log_T(a.eta[j], nu, u));
      const TruncatedGamma lag(s, m_value(b.beta[j], b.xi, b.sigma2), eta_slice_log_T(b.eta[j], nu, u));
      if (!truncated_gamma_max_coupling(lead, lag, u_inv, c, c).met) {
        ++unmet;
        break;
      }
    }
  }
  return {static_cast<double>(unmet) / R, MetricEstimator::Mc, R};
}

double slice_target_tv(double m, double m_t, double nu) {
  if (!(m > 0.0 && m_t > 0.0)) throw DomainError("slice_target_tv: rates must be positive");
  if (same_bits(m, m_t)) return 0.0;
  const double s = 0.5 * (1.0 + nu);
  const specfun::IncompleteU iu(s, 1.0, m / nu);
  const specfun::IncompleteU iu_t(s, 1.0, m_t / nu);
  // The two densities cross once, at K.
  const double K = (iu.log_total() - iu_t.log_total()) / (m_t - m);
  if (!(K > 0.0)) return 0.0;
  return std::clamp(std::abs(iu.cdf(nu * K) - iu_t.cdf(nu * K)), 0.0, 1.0);
}

double dbar(const ChainState& a, const ChainState& b) {
  if (a.p() != b.p()) throw DomainError("dbar: states differ in dimension");
  double acc = 0.0;
  for (Eigen::Index j = 0; j < a.p(); ++j)
    acc += std::abs(std::log(m_value(a.beta[j], a.xi, a.sigma2)) - std::log(m_value(b.beta[j], b.xi, b.sigma2)));
  return acc;
}

double tv_kernel_bound(double dbar_value, double nu) {
  if (!(dbar_value >= 0.0)) throw DomainError("tv_kernel_bound: dbar must be nonnegative");
  return std::min(1.0, std::sqrt((1.0 + nu) * (std::numbers::e - 1.0) / 4.0 * dbar_value));
}

double capped_l1(const ChainState& a, const ChainState& b) {
  if (a.p() != b.p()) throw DomainError("capped_l1: states differ in dimension");
  double acc = 0.0;
  for (Eigen::Index j = 0; j < a.p() && acc < 1.0; ++j)
    acc += std::abs(m_value(a.beta[j], a.xi, a.sigma2) - m_value(b.beta[j], b.xi, b.sigma2));
  return std::min(acc, 1.0);
}

}  // namespace shrinkcoup
