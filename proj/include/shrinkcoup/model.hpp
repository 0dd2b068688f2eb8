#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>

#include "shrinkcoup/rng.hpp"

namespace shrinkcoup {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Dataset {
  MatrixXd X;  // n x p
  VectorXd y;  // n

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }
  void validate() const;
};

struct Hyperparams {
  double nu = 1.0;
  double a0 = 1.0;
  double b0 = 1.0;
  // Support of the global precision prior.  (0, inf) is the untruncated prior.
  double xi_lo = 1e-8;
  double xi_hi = 1e8;
  double sigma_mrth = 0.8;
  int xi_grid_size = 1024;

  bool xi_truncated() const { return xi_lo > 0.0 || xi_hi < std::numeric_limits<double>::infinity(); }
  bool xi_support_finite() const { return xi_lo > 0.0 && xi_hi < std::numeric_limits<double>::infinity(); }
  void validate() const;
};

struct ChainState {
  VectorXd beta;
  VectorXd eta;
  double sigma2 = 1.0;
  double xi = 1.0;

  Eigen::Index p() const { return beta.size(); }
};

/// Bitwise equality of every component.
bool identical(const ChainState& a, const ChainState& b);
inline bool operator==(const ChainState& a, const ChainState& b) { return identical(a, b); }

void validate_state(const ChainState& s, const Hyperparams& hp);

struct SyntheticTruth {
  VectorXd beta_star;
  double sigma_star = 0.0;
  int s = 0;
};

inline constexpr double kMFloor = 1e-300;

/// m_j = xi beta_j^2 / (2 sigma^2), floored at 1e-300.  Every module obtains
/// m through this function so that two evaluations from one state agree bitwise.
inline double m_value(double beta_j, double xi, double sigma2) {
  const double m = xi * (beta_j * beta_j) / (2.0 * sigma2);
  return m > kMFloor ? m : kMFloor;
}

VectorXd m_vector(const ChainState& s);

/// X_ij iid N(0,1), beta*_j = 2^{(9-j)/4} for j <= s (1-based), y = X beta* + sigma* eps.
std::pair<Dataset, SyntheticTruth> generate_synthetic(int n, int p, int s, double sigma_star,
                                                      std::uint64_t seed);

// ---------------------------------------------------------------------------
// Priors

/// Density of xi when xi^{-1/2} ~ Cauchy+(0,1), renormalized over the support.
double xi_prior_logpdf(double xi, const Hyperparams& hp);
/// P(xi <= x) under the truncated prior.
double xi_prior_cdf(double x, const Hyperparams& hp);
/// Inverse of xi_prior_cdf.
double xi_prior_quantile(double u, const Hyperparams& hp);

/// log of eta^{(nu-2)/2} (1+nu eta)^{-(nu+1)/2} / Z(nu), the prior induced on
/// eta = lambda^{-2} when lambda ~ Half-t(nu).
double half_t_eta_logpdf(double eta, double nu);
/// log Z(nu) = -(nu/2) log nu + log B(nu/2, 1/2).
double half_t_eta_log_normalizer(double nu);
/// eta draw via lambda = |t_nu|.
double half_t_eta_draw(RngCursor& c, double nu);

ChainState init_from_prior(const Hyperparams& hp, int p, const RngStream& stream);
ChainState init_from_prior(const Hyperparams& hp, int p, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Scalar diagnostics

/// sum_j m_j^{-c} + m_j^{d}; +inf as soon as some beta_j is exactly zero.
double drift_V(const ChainState& s, double c = 0.25, double d = 0.5);

/// log U((1+nu)/2, 1, xi beta^2 / (2 sigma2 nu)); +inf at beta = 0.
double marginal_beta_logprior(double beta_j, double xi, double sigma2, double nu);

}  // namespace shrinkcoup
