#include "shrinkcoup/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "shrinkcoup/errors.hpp"
#include "shrinkcoup/specfun.hpp"

namespace shrinkcoup {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEtaMin = std::numeric_limits<double>::min();

double log1mexp(double x) {
  return x > -0.6931471805599453 ? std::log(-std::expm1(x)) : std::log1p(-std::exp(x));
}

struct MEval {
  linalg::SpdFactor<double> factor;
  double quad;
  double log_lik;
};

MEval eval_M(const MatrixXd& G, const Dataset& d, const Hyperparams& hp, double xi) {
  MEval e{linalg::spd_factor(linalg::gram_to_M(G, xi)), 0.0, 0.0};
  e.quad = e.factor.quad_form(d.y);
  e.log_lik = -0.5 * e.factor.log_det() - 0.5 * (hp.a0 + static_cast<double>(d.n())) * std::log(hp.b0 + e.quad);
  return e;
}

}  // namespace

// ---------------------------------------------------------------------------
// eta

double eta_slice_log_T(double eta_prev, double nu, double u) {
  const double s = 0.5 * (1.0 + nu);
  const double log_U = std::max(std::log(u) - s * std::log1p(nu * eta_prev), std::log(kSliceUFloor));
  return std::log(std::expm1(-log_U / s)) - std::log(nu);
}

TruncatedGamma::TruncatedGamma(double s, double m, double log_T)
    : s_(s), log_m_(std::log(m)), m_(m), log_T_(log_T), T_(std::exp(log_T)),
      log_mass_(specfun::log_reg_lower_gamma_logx(s, log_m_ + log_T)) {}

double TruncatedGamma::quantile(double u) const {
  const double log_p = std::log(u) + log_mass_;
  const double y = specfun::inv_reg_lower_gamma_log(s_, log_p, log1mexp(log_p));
  return std::clamp(std::exp(y - log_m_), kEtaMin, T_);
}

double TruncatedGamma::logpdf(double x) const {
  if (!(x > 0.0) || x > T_) return -kInf;
  return s_ * log_m_ + (s_ - 1.0) * std::log(x) - m_ * x - std::lgamma(s_) - log_mass_;
}

double truncated_gamma_quantile(double s, double m, double log_T, double u) {
  return TruncatedGamma(s, m, log_T).quantile(u);
}

double truncated_gamma_logpdf(double x, double s, double m, double log_T) {
  return TruncatedGamma(s, m, log_T).logpdf(x);
}

double eta_slice_from_uniforms(double eta_prev, double m, double nu, double u_slice, double u_inv) {
  const double log_T = eta_slice_log_T(eta_prev, nu, u_slice);
  return truncated_gamma_quantile(0.5 * (1.0 + nu), m, log_T, u_inv);
}

EtaConditional::EtaConditional(double m, double nu) : m_(m), nu_(nu), s_(0.5 * (1.0 + nu)) {
  if (!(m > 0.0)) throw DomainError("EtaConditional: m must be positive");
  // Normalizer nu^{-s} Gamma(s) U(s, 1, m / nu); for nu = 1 it is e^m E1(m).
  if (nu == 1.0) {
    log_norm_ = m + specfun::log_exp_integral_E1(m);
  } else {
    iu_.emplace(s_, 1.0, m / nu);
    log_norm_ = -s_ * std::log(nu) + std::lgamma(s_) + iu_->log_total();
  }
}

double EtaConditional::logpdf(double eta) const {
  if (!(eta > 0.0)) return -kInf;
  return 0.5 * (nu_ - 1.0) * std::log(eta) - s_ * std::log1p(nu_ * eta) - m_ * eta - log_norm_;
}

double EtaConditional::quantile(double w) const {
  if (!(w >= 0.0 && w < 1.0)) throw DomainError("EtaConditional: w outside [0, 1)");
  if (w == 0.0) return kEtaMin;
  double eta;
  if (!iu_) {
    // F(eta) = 1 - E1(m (1 + eta)) / E1(m)
    eta = std::exp(specfun::inv_E1_ratio_log(m_, std::log1p(-w)));
  } else {
    eta = iu_->quantile(w, 1.0 - w) / nu_;
  }
  return std::clamp(eta, kEtaMin, std::numeric_limits<double>::max());
}

double eta_perfect_from_uniform(double m, double nu, double w) { return EtaConditional(m, nu).quantile(w); }

double eta_conditional_logpdf(double eta, double m, double nu) { return EtaConditional(m, nu).logpdf(eta); }

double eta_conditional_cdf(double t, double m, double nu) {
  if (t <= 0.0) return 0.0;
  return specfun::IncompleteU(0.5 * (1.0 + nu), 1.0, m / nu).cdf(nu * t);
}

double eta_slice_step(double eta_prev, double m, double nu, const RngStream& rng, std::uint64_t iter,
                      std::uint32_t j) {
  const double u_slice = rng.at(iter, Block::EtaSlice, j).uniform();
  const double u_inv = rng.at(iter, Block::EtaInv, j).uniform();
  return eta_slice_from_uniforms(eta_prev, m, nu, u_slice, u_inv);
}

double eta_perfect_step(double m, double nu, const RngStream& rng, std::uint64_t iter, std::uint32_t j) {
  return eta_perfect_from_uniform(m, nu, rng.at(iter, Block::EtaInv, j).uniform());
}

VectorXd eta_update(const ChainState& s, double nu, EtaUpdate kind, const RngStream& rng, std::uint64_t iter) {
  const Eigen::Index p = s.p();
  VectorXd eta(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double m = m_value(s.beta[j], s.xi, s.sigma2);
    const auto jj = static_cast<std::uint32_t>(j);
    eta[j] = kind == EtaUpdate::Slice ? eta_slice_step(s.eta[j], m, nu, rng, iter, jj)
                                      : eta_perfect_step(m, nu, rng, iter, jj);
  }
  return eta;
}

// ---------------------------------------------------------------------------
// xi

XiConditional::XiConditional(const Dataset& d, const VectorXd& eta) : G(linalg::weighted_cross(d.X, eta)) {}

void XiConditional::set_xi(const Dataset& d, const Hyperparams& hp, double xi_new) {
  MEval e = eval_M(G, d, hp, xi_new);
  xi = xi_new;
  factor = std::move(e.factor);
  quad = e.quad;
  log_lik = e.log_lik;
}

double XiConditional::log_target(const Dataset& d, const Hyperparams& hp, double xi_eval) const {
  const double lp = xi_prior_logpdf(xi_eval, hp);
  if (lp == -kInf) return -kInf;
  const double ll = xi_eval == xi ? log_lik : eval_M(G, d, hp, xi_eval).log_lik;
  return ll + lp + std::log(xi_eval);
}

MrthOutcome xi_mrth_from_uniforms(XiConditional& cond, double xi_prev, const Dataset& d, const Hyperparams& hp,
                                  double z, double u) {
  return xi_mrth_accept(cond, xi_prev, xi_proposal(xi_prev, hp.sigma_mrth, z), d, hp, u);
}

MrthOutcome xi_mrth_accept(XiConditional& cond, double xi_prev, double xi_star, const Dataset& d,
                           const Hyperparams& hp, double u) {
  if (cond.xi != xi_prev) cond.set_xi(d, hp, xi_prev);
  const double lp_star = xi_prior_logpdf(xi_star, hp);
  if (lp_star == -kInf) return {xi_prev, false};
  MEval e = eval_M(cond.G, d, hp, xi_star);
  const double lt_prev = cond.log_lik + xi_prior_logpdf(xi_prev, hp) + std::log(xi_prev);
  const double lt_star = e.log_lik + lp_star + std::log(xi_star);
  if (std::log(u) < lt_star - lt_prev) {
    cond.xi = xi_star;
    cond.factor = std::move(e.factor);
    cond.quad = e.quad;
    cond.log_lik = e.log_lik;
    return {xi_star, true};
  }
  return {xi_prev, false};
}

MrthOutcome xi_mrth_step(XiConditional& cond, double xi_prev, const Dataset& d, const Hyperparams& hp,
                         const RngStream& rng, std::uint64_t iter) {
  const double z = rng.at(iter, Block::XiProp).normal();
  const double u = rng.at(iter, Block::XiAccept).uniform();
  return xi_mrth_from_uniforms(cond, xi_prev, d, hp, z, u);
}

std::vector<double> xi_grid_points(const Hyperparams& hp) {
  if (!hp.xi_support_finite()) throw DomainError("xi grid: the xi support must be finite");
  const int k = hp.xi_grid_size;
  if (k < 1) throw DomainError("xi grid: need at least one point");
  const double a = std::log(hp.xi_lo), b = std::log(hp.xi_hi);
  std::vector<double> pts(static_cast<std::size_t>(k));
  if (k == 1) {
    pts[0] = std::exp(0.5 * (a + b));
    return pts;
  }
  for (int i = 0; i < k; ++i) pts[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / (k - 1));
  pts.front() = hp.xi_lo;
  pts.back() = hp.xi_hi;
  return pts;
}

namespace {

XiGrid finish_grid(std::vector<double> pts, std::vector<double> lw) {
  XiGrid g{std::move(pts), std::move(lw), {}};
  const double mx = *std::max_element(g.log_weights.begin(), g.log_weights.end());
  g.cdf.resize(g.points.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < g.points.size(); ++k) {
    acc += std::exp(g.log_weights[k] - mx);
    g.cdf[k] = acc;
  }
  for (double& c : g.cdf) c /= acc;
  g.cdf.back() = 1.0;
  return g;
}

}  // namespace

XiGrid xi_grid_eigen(const MatrixXd& G, const Dataset& d, const Hyperparams& hp) {
  const auto eig = linalg::sym_eigen(G);
  const VectorXd lambda = eig.values.cwiseMax(0.0);
  const VectorXd qty = eig.vectors.transpose() * d.y;
  std::vector<double> pts = xi_grid_points(hp);
  std::vector<double> lw(pts.size());
  for (std::size_t k = 0; k < pts.size(); ++k)
    lw[k] = linalg::marginal_log_lik_eigen(pts[k], lambda, qty, hp.a0, hp.b0) + xi_prior_logpdf(pts[k], hp) +
            std::log(pts[k]);
  return finish_grid(std::move(pts), std::move(lw));
}

XiGrid xi_grid_cholesky(const MatrixXd& G, const Dataset& d, const Hyperparams& hp) {
  std::vector<double> pts = xi_grid_points(hp);
  std::vector<double> lw(pts.size());
  for (std::size_t k = 0; k < pts.size(); ++k)
    lw[k] = eval_M(G, d, hp, pts[k]).log_lik + xi_prior_logpdf(pts[k], hp) + std::log(pts[k]);
  return finish_grid(std::move(pts), std::move(lw));
}

double xi_grid_sample(const XiGrid& g, double u) {
  const auto it = std::lower_bound(g.cdf.begin(), g.cdf.end(), u);
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(it - g.cdf.begin()), g.points.size() - 1);
  return g.points[k];
}

double xi_perfect_grid_step(XiConditional& cond, const Dataset& d, const Hyperparams& hp, const RngStream& rng,
                            std::uint64_t iter) {
  const XiGrid g = xi_grid_eigen(cond.G, d, hp);
  const double xi = xi_grid_sample(g, rng.at(iter, Block::XiGrid).uniform());
  cond.set_xi(d, hp, xi);
  return xi;
}

// ---------------------------------------------------------------------------
// sigma2 and beta

InvGammaParams sigma2_conditional(const XiConditional& cond, const Dataset& d, const Hyperparams& hp) {
  return {0.5 * (hp.a0 + static_cast<double>(d.n())), 0.5 * (cond.quad + hp.b0)};
}

double inv_gamma_logpdf(double x, const InvGammaParams& ig) {
  if (!(x > 0.0)) return -kInf;
  return ig.shape * std::log(ig.rate) - std::lgamma(ig.shape) - (ig.shape + 1.0) * std::log(x) - ig.rate / x;
}

double sigma2_step(const XiConditional& cond, const Dataset& d, const Hyperparams& hp, const RngStream& rng,
                   std::uint64_t iter) {
  const InvGammaParams ig = sigma2_conditional(cond, d, hp);
  RngCursor c = rng.at(iter, Block::Sigma2);
  return sigma2_from_gamma(ig, c.gamma(ig.shape));
}

VectorXd beta_from_noise(const Dataset& d, const VectorXd& eta, double xi, double sigma2,
                         const linalg::SpdFactor<double>& factor, const VectorXd& r, const VectorXd& delta) {
  const double sigma = std::sqrt(sigma2);
  const VectorXd prec = xi * eta;  // prior precision of beta / sigma
  const VectorXd u = r.cwiseQuotient(prec.cwiseSqrt());
  const VectorXd v = d.X * u + delta;
  const VectorXd vstar = factor.solve(d.y / sigma - v);
  return sigma * (u + (d.X.transpose() * vstar).cwiseQuotient(prec));
}

void beta_noise(const RngStream& rng, std::uint64_t iter, Eigen::Index p, Eigen::Index n, VectorXd& r,
                VectorXd& delta) {
  r.resize(p);
  delta.resize(n);
  RngCursor cr = rng.at(iter, Block::BetaR);
  for (Eigen::Index j = 0; j < p; ++j) r[j] = cr.normal();
  RngCursor cd = rng.at(iter, Block::BetaDelta);
  for (Eigen::Index i = 0; i < n; ++i) delta[i] = cd.normal();
}

VectorXd beta_fast_step(const Dataset& d, const VectorXd& eta, double xi, double sigma2,
                        const linalg::SpdFactor<double>& factor, const RngStream& rng, std::uint64_t iter) {
  VectorXd r, delta;
  beta_noise(rng, iter, d.p(), d.n(), r, delta);
  return beta_from_noise(d, eta, xi, sigma2, factor, r, delta);
}

// ---------------------------------------------------------------------------

ChainState gibbs_step(const ChainState& s, const Dataset& d, const Hyperparams& hp, KernelVariant variant,
                      const RngStream& rng, std::uint64_t iter, StepInfo* info) {
  ChainState out;
  out.eta = eta_update(s, hp.nu, variant.eta, rng, iter);
  XiConditional cond(d, out.eta);
  bool accepted = true;
  if (variant.xi == XiUpdate::Mrth) {
    const MrthOutcome o = xi_mrth_step(cond, s.xi, d, hp, rng, iter);
    out.xi = o.xi;
    accepted = o.accepted;
  } else {
    out.xi = xi_perfect_grid_step(cond, d, hp, rng, iter);
  }
  out.sigma2 = sigma2_step(cond, d, hp, rng, iter);
  out.beta = beta_fast_step(d, out.eta, out.xi, out.sigma2, cond.factor, rng, iter);
  if (info) {
    info->xi_accepted = accepted;
    info->log_lik = cond.log_lik;
  }
  return out;
}

}  // namespace shrinkcoup
