#pragma once

// Blocked Gibbs kernel: eta | beta, sigma2, xi  ->  xi | eta  ->  sigma2 | eta, xi
// ->  beta | eta, xi, sigma2.
//
// Each update comes in two layers.  The `*_from_uniforms` functions are pure
// maps from explicit random inputs to the new value; the stream-driven
// functions read their inputs from fixed addresses (iteration, block,
// coordinate).  Coupled kernels in couplings.hpp reuse both layers.

#include <cstdint>
#include <optional>
#include <vector>

#include "shrinkcoup/linalg.hpp"
#include "shrinkcoup/model.hpp"
#include "shrinkcoup/rng.hpp"
#include "shrinkcoup/specfun.hpp"

namespace shrinkcoup {

enum class EtaUpdate { Slice, Perfect };
enum class XiUpdate { Mrth, PerfectGrid };

struct KernelVariant {
  EtaUpdate eta = EtaUpdate::Slice;
  XiUpdate xi = XiUpdate::Mrth;
};

inline constexpr double kSliceUFloor = 1e-280;

// ---------------------------------------------------------------------------
// eta

/// Slice level for the eta conditional.  Given the previous eta and the
/// auxiliary uniform u, U = u (1 + nu eta)^{-(1+nu)/2} and the slice is (0, T)
/// with T = (U^{-2/(1+nu)} - 1) / nu.  Returns log T.
double eta_slice_log_T(double eta_prev, double nu, double u);

/// The law with density proportional to x^{s-1} e^{-m x} on (0, T).
class TruncatedGamma {
 public:
  TruncatedGamma(double s, double m, double log_T);
  /// Inversion draw; increasing in u.
  double quantile(double u) const;
  /// Normalized log density; -inf outside (0, T].
  double logpdf(double x) const;

 private:
  double s_, log_m_, m_, log_T_, T_, log_mass_;
};

double truncated_gamma_quantile(double s, double m, double log_T, double u);
double truncated_gamma_logpdf(double x, double s, double m, double log_T);

double eta_slice_from_uniforms(double eta_prev, double m, double nu, double u_slice, double u_inv);

/// The exact conditional p(eta | m) with its normalizer computed once.
class EtaConditional {
 public:
  EtaConditional(double m, double nu);
  double logpdf(double eta) const;
  /// Inverse-CDF draw; increasing in w, and eta_perfect_from_uniform(m, nu, w)
  /// returns the same value.
  double quantile(double w) const;

 private:
  double m_, nu_, s_, log_norm_;
  std::optional<specfun::IncompleteU> iu_;
};

/// Inverse-CDF draw from p(eta | m) proportional to
/// eta^{(nu-1)/2} (1 + nu eta)^{-(1+nu)/2} e^{-m eta}; increasing in w.
double eta_perfect_from_uniform(double m, double nu, double w);
/// log p(eta | m), normalized.
double eta_conditional_logpdf(double eta, double m, double nu);
/// P(eta <= t | m).
double eta_conditional_cdf(double t, double m, double nu);

double eta_slice_step(double eta_prev, double m, double nu, const RngStream& rng, std::uint64_t iter,
                      std::uint32_t j);
double eta_perfect_step(double m, double nu, const RngStream& rng, std::uint64_t iter, std::uint32_t j);

/// Full eta block for one chain.
VectorXd eta_update(const ChainState& s, double nu, EtaUpdate kind, const RngStream& rng,
                    std::uint64_t iter);

// ---------------------------------------------------------------------------
// xi

/// State of the xi | eta conditional: G = X Diag(eta)^{-1} X^T and the factor
/// of M(xi) = I + G / xi at the value of xi it was last evaluated for.  The
/// sigma2 and beta updates read the factor from here instead of refactoring.
struct XiConditional {
  MatrixXd G;
  double xi = 0.0;
  linalg::SpdFactor<double> factor;
  double quad = 0.0;     // y^T M^{-1} y
  double log_lik = 0.0;  // marginal log-likelihood at xi

  XiConditional(const Dataset& d, const VectorXd& eta);
  /// Re-evaluates M, its factor and the likelihood at a new xi.
  void set_xi(const Dataset& d, const Hyperparams& hp, double xi_new);
  /// log L(y | xi, eta) + log prior(xi) + log xi: the MRTH target on log xi.
  double log_target(const Dataset& d, const Hyperparams& hp, double xi_eval) const;
};

struct MrthOutcome {
  double xi;
  bool accepted;
};

/// Log-normal random walk proposal, on the log scale and on the natural scale.
inline double xi_log_proposal(double xi, double sigma_mrth, double z) { return std::log(xi) + sigma_mrth * z; }
inline double xi_proposal(double xi, double sigma_mrth, double z) {
  return std::exp(xi_log_proposal(xi, sigma_mrth, z));
}

/// Accept/reject of a given proposal with uniform u.
MrthOutcome xi_mrth_accept(XiConditional& cond, double xi_prev, double xi_star, const Dataset& d,
                           const Hyperparams& hp, double u);

/// One MRTH step given the standard normal increment z and accept uniform u.
/// On return cond holds the factor at the returned xi.
MrthOutcome xi_mrth_from_uniforms(XiConditional& cond, double xi_prev, const Dataset& d,
                                  const Hyperparams& hp, double z, double u);
MrthOutcome xi_mrth_step(XiConditional& cond, double xi_prev, const Dataset& d, const Hyperparams& hp,
                         const RngStream& rng, std::uint64_t iter);

/// Log-spaced grid over the xi support and the log weights of xi | eta on it.
/// The weights include the factor xi that converts the density on log xi
/// into cell masses of a log-spaced grid.
struct XiGrid {
  std::vector<double> points;
  std::vector<double> log_weights;  // unnormalized
  std::vector<double> cdf;          // normalized cumulative
};

std::vector<double> xi_grid_points(const Hyperparams& hp);
/// Weights from the eigendecomposition of G.
XiGrid xi_grid_eigen(const MatrixXd& G, const Dataset& d, const Hyperparams& hp);
/// Same weights through a Cholesky factorization per grid point.
XiGrid xi_grid_cholesky(const MatrixXd& G, const Dataset& d, const Hyperparams& hp);
double xi_grid_sample(const XiGrid& g, double u);

double xi_perfect_grid_step(XiConditional& cond, const Dataset& d, const Hyperparams& hp,
                            const RngStream& rng, std::uint64_t iter);

// ---------------------------------------------------------------------------
// sigma2 and beta

struct InvGammaParams {
  double shape;
  double rate;
};

InvGammaParams sigma2_conditional(const XiConditional& cond, const Dataset& d, const Hyperparams& hp);
double inv_gamma_logpdf(double x, const InvGammaParams& ig);
/// sigma2 = rate / g for a Gamma(shape, 1) variate g.
inline double sigma2_from_gamma(const InvGammaParams& ig, double g) { return ig.rate / g; }
double sigma2_step(const XiConditional& cond, const Dataset& d, const Hyperparams& hp, const RngStream& rng,
                   std::uint64_t iter);

/// beta ~ N(Sigma^{-1} X^T y, sigma2 Sigma^{-1}), Sigma = X^T X + xi Diag(eta),
/// from the standard normal vectors r (length p) and delta (length n).
VectorXd beta_from_noise(const Dataset& d, const VectorXd& eta, double xi, double sigma2,
                         const linalg::SpdFactor<double>& factor, const VectorXd& r, const VectorXd& delta);
void beta_noise(const RngStream& rng, std::uint64_t iter, Eigen::Index p, Eigen::Index n, VectorXd& r,
                VectorXd& delta);
VectorXd beta_fast_step(const Dataset& d, const VectorXd& eta, double xi, double sigma2,
                        const linalg::SpdFactor<double>& factor, const RngStream& rng, std::uint64_t iter);

// ---------------------------------------------------------------------------
// Full step

struct StepInfo {
  bool xi_accepted = false;
  double log_lik = 0.0;  // marginal log-likelihood at the new (xi, eta)
};

/// One sweep eta -> xi -> sigma2 -> beta.  `iter` is the address of this
/// transition in the stream.
ChainState gibbs_step(const ChainState& s, const Dataset& d, const Hyperparams& hp, KernelVariant variant,
                      const RngStream& rng, std::uint64_t iter, StepInfo* info = nullptr);

}  // namespace shrinkcoup
