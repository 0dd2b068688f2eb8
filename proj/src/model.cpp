#include "shrinkcoup/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

#include "shrinkcoup/errors.hpp"
#include "shrinkcoup/specfun.hpp"

namespace shrinkcoup {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Upper tail of the untruncated prior: P(xi > x) = (2/pi) atan(x^{-1/2}).
double xi_upper_tail(double x) {
  if (x <= 0.0) return 1.0;
  if (x == kInf) return 0.0;
  return 2.0 / std::numbers::pi * std::atan(1.0 / std::sqrt(x));
}

bool same_bits(const VectorXd& a, const VectorXd& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

}  // namespace

void Dataset::validate() const {
  if (X.rows() < 1 || X.cols() < 1) throw DataError("dataset: need n >= 1 and p >= 1");
  if (y.size() != X.rows()) throw DataError("dataset: y length differs from the row count of X");
  if (!X.allFinite() || !y.allFinite()) throw DataError("dataset: non-finite entries");
}

void Hyperparams::validate() const {
  if (!(nu >= 1.0) || !std::isfinite(nu)) throw DomainError("hyperparams: nu must be >= 1");
  if (!(a0 > 0.0) || !(b0 > 0.0)) throw DomainError("hyperparams: a0 and b0 must be positive");
  if (!(xi_lo >= 0.0) || !(xi_lo < xi_hi)) throw DomainError("hyperparams: need 0 <= xi_lo < xi_hi");
  if (!(sigma_mrth > 0.0)) throw DomainError("hyperparams: sigma_mrth must be positive");
  if (xi_grid_size < 1) throw DomainError("hyperparams: xi_grid_size must be positive");
}

bool identical(const ChainState& a, const ChainState& b) {
  return same_bits(a.beta, b.beta) && same_bits(a.eta, b.eta) && same_bits(a.sigma2, b.sigma2) &&
         same_bits(a.xi, b.xi);
}

void validate_state(const ChainState& s, const Hyperparams& hp) {
  if (s.beta.size() != s.eta.size()) throw DomainError("state: beta and eta lengths differ");
  if (!s.beta.allFinite()) throw DomainError("state: non-finite beta");
  if (!(s.eta.array() > 0.0).all() || !s.eta.allFinite()) throw DomainError("state: eta must be positive");
  if (!(s.sigma2 > 0.0) || !std::isfinite(s.sigma2)) throw DomainError("state: sigma2 must be positive");
  if (!(s.xi >= hp.xi_lo && s.xi <= hp.xi_hi && s.xi > 0.0))
    throw DomainError("state: xi outside its support");
}

VectorXd m_vector(const ChainState& s) {
  VectorXd m(s.beta.size());
  for (Eigen::Index j = 0; j < m.size(); ++j) m[j] = m_value(s.beta[j], s.xi, s.sigma2);
  return m;
}

std::pair<Dataset, SyntheticTruth> generate_synthetic(int n, int p, int s, double sigma_star,
                                                      std::uint64_t seed) {
  if (n < 1 || p < 1) throw DomainError("generate_synthetic: need n >= 1 and p >= 1");
  if (s < 0 || s > p) throw DomainError("generate_synthetic: sparsity must lie in [0, p]");
  if (!(sigma_star >= 0.0)) throw DomainError("generate_synthetic: sigma_star must be nonnegative");

  SyntheticTruth truth;
  truth.s = s;
  truth.sigma_star = sigma_star;
  truth.beta_star = VectorXd::Zero(p);
  for (int j = 1; j <= s; ++j) truth.beta_star[j - 1] = std::pow(2.0, (9.0 - j) / 4.0);

  const RngStream stream = make_stream(seed, StreamRole::Data);
  Dataset d;
  d.X.resize(n, p);
  d.y.resize(n);
  for (int i = 0; i < n; ++i) {
    RngCursor row = stream.at(static_cast<std::uint64_t>(i), Block::Init, 0);
    for (int j = 0; j < p; ++j) d.X(i, j) = row.normal();
  }
  d.y = d.X * truth.beta_star;
  if (sigma_star > 0.0) {
    for (int i = 0; i < n; ++i) d.y[i] += sigma_star * stream.at(static_cast<std::uint64_t>(i), Block::Init, 1).normal();
  }
  return {std::move(d), std::move(truth)};
}

double xi_prior_logpdf(double xi, const Hyperparams& hp) {
  if (!(xi > 0.0) || xi < hp.xi_lo || xi > hp.xi_hi) return -kInf;
  const double mass = xi_upper_tail(hp.xi_lo) - xi_upper_tail(hp.xi_hi);
  return -std::log(std::numbers::pi) - 0.5 * std::log(xi) - std::log1p(xi) - std::log(mass);
}

double xi_prior_cdf(double x, const Hyperparams& hp) {
  if (x <= hp.xi_lo) return 0.0;
  if (x >= hp.xi_hi) return 1.0;
  const double top = xi_upper_tail(hp.xi_lo);
  return (top - xi_upper_tail(x)) / (top - xi_upper_tail(hp.xi_hi));
}

double xi_prior_quantile(double u, const Hyperparams& hp) {
  if (!(u >= 0.0 && u <= 1.0)) throw DomainError("xi_prior_quantile: u outside [0, 1]");
  const double top = xi_upper_tail(hp.xi_lo);
  const double tail = top - u * (top - xi_upper_tail(hp.xi_hi));
  if (tail <= 0.0) return hp.xi_hi;
  // tail = (2/pi) atan(x^{-1/2})  =>  x = cot^2(pi tail / 2)
  const double c = 1.0 / std::tan(0.5 * std::numbers::pi * tail);
  return std::clamp(c * c, hp.xi_lo, hp.xi_hi);
}

double half_t_eta_log_normalizer(double nu) {
  if (!(nu > 0.0)) throw DomainError("half_t_eta_log_normalizer: nu must be positive");
  return -0.5 * nu * std::log(nu) + std::lgamma(0.5 * nu) + std::lgamma(0.5) - std::lgamma(0.5 * nu + 0.5);
}

double half_t_eta_logpdf(double eta, double nu) {
  if (!(eta > 0.0)) throw DomainError("half_t_eta_logpdf: eta must be positive");
  if (!(nu > 0.0)) throw DomainError("half_t_eta_logpdf: nu must be positive");
  return 0.5 * (nu - 2.0) * std::log(eta) - 0.5 * (nu + 1.0) * std::log1p(nu * eta) -
         half_t_eta_log_normalizer(nu);
}

double half_t_eta_draw(RngCursor& c, double nu) {
  // lambda = |z| / sqrt(chi2_nu / nu), eta = lambda^{-2}
  const double z = c.normal();
  const double chi2 = 2.0 * c.gamma(0.5 * nu);
  const double eta = chi2 / (nu * z * z);
  return std::clamp(eta, std::numeric_limits<double>::min(), std::numeric_limits<double>::max());
}

ChainState init_from_prior(const Hyperparams& hp, int p, const RngStream& stream) {
  hp.validate();
  if (p < 1) throw DomainError("init_from_prior: p must be positive");
  ChainState s;
  {
    RngCursor c = stream.at(0, Block::Init, 0);
    s.sigma2 = 0.5 * hp.b0 / c.gamma(0.5 * hp.a0);
  }
  s.xi = xi_prior_quantile(stream.at(0, Block::Init, 1).uniform(), hp);
  s.eta.resize(p);
  s.beta.resize(p);
  for (int j = 0; j < p; ++j) {
    RngCursor c = stream.at(1, Block::Init, static_cast<std::uint32_t>(j));
    s.eta[j] = half_t_eta_draw(c, hp.nu);
  }
  for (int j = 0; j < p; ++j) {
    const double sd = std::sqrt(s.sigma2 / (s.xi * s.eta[j]));
    s.beta[j] = sd * stream.at(2, Block::Init, static_cast<std::uint32_t>(j)).normal();
  }
  return s;
}

ChainState init_from_prior(const Hyperparams& hp, int p, std::uint64_t seed) {
  return init_from_prior(hp, p, make_stream(seed, StreamRole::LeadInit));
}

double drift_V(const ChainState& s, double c, double d) {
  if (!(c > 0.0 && c < 0.5)) throw DomainError("drift_V: c must lie in (0, 1/2)");
  if (!(d > 0.0 && d < 1.0)) throw DomainError("drift_V: d must lie in (0, 1)");
  double v = 0.0;
  for (Eigen::Index j = 0; j < s.beta.size(); ++j) {
    if (s.beta[j] == 0.0) return kInf;
    const double m = m_value(s.beta[j], s.xi, s.sigma2);
    v += std::pow(m, -c) + std::pow(m, d);
  }
  return v;
}

double marginal_beta_logprior(double beta_j, double xi, double sigma2, double nu) {
  if (!(xi > 0.0) || !(sigma2 > 0.0)) throw DomainError("marginal_beta_logprior: xi and sigma2 must be positive");
  if (beta_j == 0.0) return kInf;
  const double z = m_value(beta_j, xi, sigma2) / nu;
  return specfun::log_confluent_U(0.5 * (1.0 + nu), 1.0, z);
}

}  // namespace shrinkcoup
