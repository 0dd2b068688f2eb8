#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "shrinkcoup/dataset_io.hpp"
#include "shrinkcoup/errors.hpp"
#include "shrinkcoup/model.hpp"
#include "support.hpp"

using namespace shrinkcoup;

namespace {

// Prior of eta = lambda^{-2} for lambda ~ Half-t(nu), written out independently.
double eta_prior_oracle(double eta, double nu) {
  const double z = std::pow(nu, -0.5 * nu) * boost::math::beta(0.5 * nu, 0.5);
  return std::pow(eta, 0.5 * (nu - 2)) * std::pow(1 + nu * eta, -0.5 * (nu + 1)) / z;
}

// Marginal of beta with xi = sigma2 = 1: int N(b; 0, 1/eta) pi(eta) d eta.
double beta_marginal_oracle(double b, double nu) {
  boost::math::quadrature::exp_sinh<double> integrator;
  auto f = [&](double eta) {
    return std::sqrt(eta / (2 * std::numbers::pi)) * std::exp(-0.5 * eta * b * b) * eta_prior_oracle(eta, nu);
  };
  return integrator.integrate(f);
}

double beta_marginal_cdf_oracle(double b, double nu) {
  boost::math::quadrature::exp_sinh<double> integrator;
  boost::math::normal nd;
  auto f = [&](double eta) { return boost::math::cdf(nd, b * std::sqrt(eta)) * eta_prior_oracle(eta, nu); };
  return integrator.integrate(f);
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("shrinkcoup_test_" + name)).string();
}

}  // namespace

TEST_CASE("synthetic design") {
  auto [d, truth] = generate_synthetic(30, 40, 10, 0.5, 99);
  CHECK(d.n() == 30);
  CHECK(d.p() == 40);
  CHECK(truth.beta_star[0] == 4.0);
  CHECK(truth.beta_star[8] == 1.0);
  CHECK(truth.beta_star[10] == 0.0);
  CHECK((truth.beta_star.tail(30).array() == 0.0).all());

  auto [d0, t0] = generate_synthetic(30, 40, 10, 0.0, 99);
  CHECK((d0.y - d0.X * t0.beta_star).norm() == 0.0);
  CHECK((d0.X - d.X).norm() == 0.0);

  auto [d2, t2] = generate_synthetic(30, 40, 10, 0.5, 99);
  CHECK((d2.X - d.X).norm() == 0.0);
  CHECK((d2.y - d.y).norm() == 0.0);
  CHECK_THROWS_AS(generate_synthetic(10, 5, 6, 1.0, 1), DomainError);

  // Entries look standard normal.
  auto [big, tb] = generate_synthetic(200, 250, 0, 0.0, 5);
  std::vector<double> xs(big.X.data(), big.X.data() + big.X.size());
  boost::math::normal nd;
  CHECK(testsupport::ks_one_sample_pvalue(xs, [&](double x) { return boost::math::cdf(nd, x); }) > 0.001);
}

TEST_CASE("xi prior") {
  Hyperparams open;
  open.xi_lo = 0.0;
  open.xi_hi = INFINITY;
  CHECK(xi_prior_logpdf(1.0, open) == doctest::Approx(std::log(1 / (2 * std::numbers::pi))).epsilon(1e-14));

  // xi pi(xi) is symmetric under xi -> 1/xi: the prior of log xi is symmetric.
  for (double x : {1e-3, 0.2, 3.0, 70.0}) {
    CHECK(std::log(x) + xi_prior_logpdf(x, open) ==
          doctest::Approx(-std::log(x) + xi_prior_logpdf(1 / x, open)).epsilon(1e-13));
  }

  boost::math::quadrature::tanh_sinh<double> ts;
  // Integrate over log xi to cover many decades.
  auto mass = [&](const Hyperparams& hp, double lo, double hi) {
    return ts.integrate([&](double w) { return std::exp(w + xi_prior_logpdf(std::exp(w), hp)); }, std::log(lo),
                        std::log(hi));
  };
  CHECK(mass(open, 1e-30, 1e30) == doctest::Approx(1.0).epsilon(1e-8));
  Hyperparams trunc;
  CHECK(mass(trunc, trunc.xi_lo, trunc.xi_hi) == doctest::Approx(1.0).epsilon(1e-10));
  Hyperparams narrow;
  narrow.xi_lo = 0.5;
  narrow.xi_hi = 4.0;
  CHECK(mass(narrow, 0.5, 4.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(xi_prior_logpdf(0.4, narrow) == -INFINITY);

  for (double x : {0.6, 1.0, 2.5}) {
    CHECK(xi_prior_cdf(x, narrow) == doctest::Approx(mass(narrow, 0.5, x)).epsilon(1e-12));
    CHECK(xi_prior_quantile(xi_prior_cdf(x, narrow), narrow) == doctest::Approx(x).epsilon(1e-12));
  }
}

TEST_CASE("half-t prior on eta") {
  CHECK(half_t_eta_logpdf(1.0, 1.0) + half_t_eta_log_normalizer(1.0) == doctest::Approx(std::log(0.5)));
  boost::math::quadrature::tanh_sinh<double> ts;
  for (double nu : {1.0, 1.5, 2.0, 4.0}) {
    const double total = ts.integrate([&](double w) { return std::exp(w + half_t_eta_logpdf(std::exp(w), nu)); },
                                      -200.0, 200.0);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-8));
    for (double x : {0.3, 2.0}) CHECK(half_t_eta_logpdf(x, nu) == doctest::Approx(std::log(eta_prior_oracle(x, nu))));
  }

  // Draws transformed back to lambda = eta^{-1/2} follow Half-t(nu).
  for (double nu : {1.0, 3.0}) {
    RngCursor c = RngStream(3, 0).at(0, Block::Init);
    std::vector<double> lam(50000);
    for (double& l : lam) l = 1.0 / std::sqrt(half_t_eta_draw(c, nu));
    boost::math::students_t td(nu);
    CHECK(testsupport::ks_one_sample_pvalue(lam, [&](double l) { return 2 * boost::math::cdf(td, l) - 1; }) > 0.001);
  }
}

TEST_CASE("init_from_prior") {
  Hyperparams hp;
  const ChainState a = init_from_prior(hp, 25, 17);
  const ChainState b = init_from_prior(hp, 25, 17);
  CHECK(a == b);
  CHECK_NOTHROW(validate_state(a, hp));
  CHECK_FALSE(a == init_from_prior(hp, 25, 18));

  // beta * sqrt(xi / sigma2) has the scale-free Half-t mixture marginal.
  for (double nu : {1.0, 2.0}) {
    hp.nu = nu;
    const int p = 100000;
    const ChainState s = init_from_prior(hp, p, 23);
    std::vector<double> b(p);
    for (int j = 0; j < p; ++j) b[j] = s.beta[j] * std::sqrt(s.xi / s.sigma2);
    // Oracle CDF tabulated on a fine log grid of |b|, linear in between.
    std::vector<double> lx, F;
    for (double w = -12; w <= 12; w += 0.01) {
      lx.push_back(w);
      F.push_back(beta_marginal_cdf_oracle(std::exp(w), nu));
    }
    auto cdf = [&](double x) {
      const double w = std::log(std::abs(x));
      double v;
      if (w <= lx.front()) v = 0.5;
      else if (w >= lx.back()) v = 1.0;
      else {
        const auto k = static_cast<std::size_t>((w - lx.front()) / 0.01);
        const double f = (w - lx[k]) / (lx[k + 1] - lx[k]);
        v = F[k] + f * (F[k + 1] - F[k]);
      }
      return x < 0 ? 1.0 - v : v;
    };
    CHECK(testsupport::ks_one_sample_pvalue(b, cdf) > 0.001);
  }
}

TEST_CASE("drift function") {
  ChainState s;
  s.beta = VectorXd::Constant(1, std::sqrt(2.0));
  s.eta = VectorXd::Ones(1);
  s.xi = 1.0;
  s.sigma2 = 1.0;
  CHECK(drift_V(s) == doctest::Approx(2.0).epsilon(1e-15));
  s.beta[0] = 0.0;
  CHECK(drift_V(s) == INFINITY);

  ChainState r = init_from_prior(Hyperparams{}, 6, 4);
  double ref = 0.0;
  for (int j = 0; j < 6; ++j) {
    const double m = r.xi * r.beta[j] * r.beta[j] / (2 * r.sigma2);
    ref += std::pow(m, -0.3) + std::pow(m, 0.7);
  }
  CHECK(drift_V(r, 0.3, 0.7) == doctest::Approx(ref).epsilon(1e-12));
  CHECK_THROWS_AS(drift_V(r, 0.6, 0.5), DomainError);
}

TEST_CASE("marginal beta prior") {
  CHECK(marginal_beta_logprior(1.3, 2.0, 0.5, 1.0) == marginal_beta_logprior(-1.3, 2.0, 0.5, 1.0));
  for (double nu : {1.0, 2.0}) {
    const double offset = std::log(beta_marginal_oracle(1.0, nu)) - marginal_beta_logprior(1.0, 1.0, 1.0, nu);
    for (double b : {0.01, 0.1, 0.3, 0.7, 1.5, 2.0, 3.0, 5.0, 8.0, 12.0}) {
      CHECK(std::log(beta_marginal_oracle(b, nu)) - marginal_beta_logprior(b, 1.0, 1.0, nu) ==
            doctest::Approx(offset).epsilon(1e-8));
    }
  }
  const double ratio = std::exp(marginal_beta_logprior(20.0, 1, 1, 1) - marginal_beta_logprior(10.0, 1, 1, 1));
  CHECK(std::abs(ratio / 0.25 - 1.0) < 0.1);
  CHECK(marginal_beta_logprior(0.0, 1, 1, 1) == INFINITY);
}

TEST_CASE("dataset files") {
  auto [d, t] = generate_synthetic(7, 3, 2, 1.0, 8);
  const std::string csv = temp_path("d.csv"), bin = temp_path("d.bin");
  write_dataset_csv(d, csv);
  write_dataset_binary(d, bin);
  const Dataset c = load_dataset(csv), b = load_dataset(bin);
  CHECK((c.X - d.X).norm() == 0.0);
  CHECK((c.y - d.y).norm() == 0.0);
  CHECK((b.X - d.X).norm() == 0.0);
  CHECK((b.y - d.y).norm() == 0.0);
  {
    std::ofstream f(csv);
    f << "y,x1\n1.0,2.0\n3.0\n";
  }
  CHECK_THROWS_AS(read_dataset_csv(csv), DataError);
  CHECK_THROWS_AS(read_dataset_binary(temp_path("missing.bin")), DataError);
  std::remove(csv.c_str());
  std::remove(bin.c_str());
}
