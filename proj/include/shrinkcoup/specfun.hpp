#pragma once

// Scalar special functions used by the samplers and coupling metrics:
// regularized incomplete gamma, exponential integral, and the confluent
// hypergeometric function of the second kind together with its lower
// incomplete variant.  Inverses are computed by monotone bracketing followed
// by safeguarded Newton steps in the logarithm of the argument.

#include <vector>

namespace shrinkcoup::specfun {

struct Tolerance {
  double rel = 1e-10;   // relative error target on the returned argument
  double abs = 1e-300;  // absolute floor
  int max_iter = 200;

  void validate() const;
};

// ---------------------------------------------------------------------------
// Incomplete gamma

/// gamma_s(x) = Gamma(s)^{-1} int_0^x t^{s-1} e^{-t} dt.
double reg_lower_gamma(double s, double x);
/// 1 - gamma_s(x), computed without cancellation.
double reg_upper_gamma(double s, double x);

/// log gamma_s(x) given log(x); accurate when x underflows or gamma_s(x) ~ 1e-400.
double log_reg_lower_gamma_logx(double s, double log_x);
/// log(1 - gamma_s(x)) given log(x).
double log_reg_upper_gamma_logx(double s, double log_x);

/// Smallest x with gamma_s(x) = u, for u in [0, 1).
double inv_reg_lower_gamma(double s, double u, const Tolerance& tol = {});

/// Solves gamma_s(x) = P for log(x), with the target supplied both as log P and
/// log(1 - P).  The branch with the smaller tail is used, so precision is kept
/// for P near 0 and near 1.
double inv_reg_lower_gamma_log(double s, double log_p, double log_q,
                               const Tolerance& tol = {});

// ---------------------------------------------------------------------------
// Exponential integral

/// E1(x) = int_x^inf t^{-1} e^{-t} dt.
double exp_integral_E1(double x);
/// log E1(x); finite for x up to the double range.
double log_exp_integral_E1(double x);
/// e^x E1(x).
double scaled_exp_integral_E1(double x);
/// x such that E1(x) = y.
double inv_exp_integral_E1(double y, const Tolerance& tol = {});
/// x such that log E1(x) = log_y.
double inv_log_exp_integral_E1(double log_y, const Tolerance& tol = {});

/// log(eta) solving E1(m (1 + eta)) = r E1(m), given log r < 0.  Solved
/// directly in log(eta) so that small eta keeps full relative precision.
double inv_E1_ratio_log(double m, double log_r, const Tolerance& tol = {});

double digamma(double x);

// ---------------------------------------------------------------------------
// Confluent hypergeometric function of the second kind

/// U(a,b,z) = Gamma(a)^{-1} int_0^inf x^{a-1} (1+x)^{b-a-1} e^{-zx} dx, a > 0, z > 0.
double confluent_U(double a, double b, double z);
double log_confluent_U(double a, double b, double z);

/// U_{a,b,z}(t) = Gamma(a)^{-1} int_0^t x^{a-1} (1+x)^{b-a-1} e^{-zx} dx.
double lower_incomplete_U(double a, double b, double z, double t);

/// t such that U_{a,b,z}(t) = w, for 0 <= w < U(a,b,z).
double inv_lower_incomplete_U(double a, double b, double z, double w,
                              const Tolerance& tol = {});

/// Precomputed quadrature of t -> U_{a,b,z}(t) in the variable w = log t.
///
/// Construction integrates the whole profile once; cdf, ccdf and quantile then
/// reuse the panel decomposition, so repeated queries for one (a, b, z) are
/// cheap.  This is the workhorse behind perfect sampling of the local
/// precisions and the analytic slice-target total variation.
class IncompleteU {
 public:
  IncompleteU(double a, double b, double z, const Tolerance& tol = {});

  double a() const { return a_; }
  double b() const { return b_; }
  double z() const { return z_; }

  /// log U(a,b,z) from the quadrature.
  double log_total() const;

  /// U_{a,b,z}(t) / U(a,b,z) and its complement, both evaluated directly.
  double cdf(double t) const;
  double ccdf(double t) const;

  /// log t with cdf(t) = frac; frac_complement must equal 1 - frac (it is taken
  /// as given so that upper quantiles keep full relative precision).
  double log_quantile(double frac, double frac_complement) const;
  double quantile(double frac, double frac_complement) const;

  /// Log-integrand in the variable w = log x, without the 1/Gamma(a) factor.
  double log_integrand(double w) const;

 private:
  struct Panel {
    double lo;
    double hi;
    double mass;
  };

  double scaled(double w) const;          // exp(log_integrand(w) - fmax_)
  double dlog_integrand(double w) const;  // derivative in w
  double left_tail(double w) const;       // int_{-inf}^{w} scaled, for w <= w_lo_
  double mass_between(double lo, double hi) const;
  std::size_t panel_index(double w) const;
  double lower_mass(double w) const;
  double upper_mass(double w) const;

  double a_, b_, z_;
  Tolerance tol_;
  double fmax_ = 0.0;
  double w_lo_ = 0.0;
  double w_hi_ = 0.0;
  double tail_lo_ = 0.0;
  double total_ = 0.0;
  std::vector<Panel> panels_;
  std::vector<double> prefix_;  // prefix_[k] = tail_lo_ + sum of panels [0, k)
  std::vector<double> suffix_;  // suffix_[k] = sum of panels [k, end)
};

}  // namespace shrinkcoup::specfun
