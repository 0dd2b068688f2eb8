#include "shrinkcoup/couplings.hpp"

#include <chrono>
#include <cstring>
#include <numeric>
#include <vector>

#include "shrinkcoup/metrics.hpp"

namespace shrinkcoup {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

void CouplingStrategy::validate() const {
  if (!(d0 >= 0.0 && d0 <= 1.0)) throw DomainError("coupling strategy: d0 must lie in [0, 1]");
  if (R < 1) throw DomainError("coupling strategy: R must be at least 1");
}

std::string CouplingStrategy::name() const {
  switch (kind) {
    case StrategyKind::OneScale: return "one-scale";
    case StrategyKind::TwoScale: return "two-scale";
    case StrategyKind::SwitchToCRN: return "switch-to-crn";
    case StrategyKind::CRNOnly: return "crn";
  }
  return "unknown";
}

CouplingStrategy parse_strategy(const std::string& name) {
  if (name == "one-scale") return CouplingStrategy::one_scale();
  if (name == "two-scale") return CouplingStrategy::two_scale();
  if (name == "switch-to-crn") return CouplingStrategy::switch_to_crn();
  if (name == "crn") return CouplingStrategy::crn_only();
  throw DomainError("unknown coupling strategy '" + name + "'");
}

// ---------------------------------------------------------------------------
// eta

PairDraw truncated_gamma_max_coupling(const TruncatedGamma& lead, const TruncatedGamma& lag, double u_inv,
                                      RngCursor& w, RngCursor& resid) {
  const CoupledDraw c = maximal_coupling([&](double x) { return lead.logpdf(x); },
                                         [&] { return lead.quantile(u_inv); },
                                         [&](double x) { return lag.logpdf(x); },
                                         [&](RngCursor& cur) { return lag.quantile(cur.uniform()); }, w, resid);
  return {c.x, c.y, c.met};
}

PairDraw coupled_slice_eta_max(double eta, double eta_t, double m, double m_t, double nu, const RngStream& rng,
                               std::uint64_t iter, std::uint32_t j) {
  const double s = 0.5 * (1.0 + nu);
  const double u = rng.at(iter, Block::EtaSlice, j).uniform();
  const TruncatedGamma lead(s, m, eta_slice_log_T(eta, nu, u));
  const TruncatedGamma lag(s, m_t, eta_slice_log_T(eta_t, nu, u));
  const double u_inv = rng.at(iter, Block::EtaInv, j).uniform();
  RngCursor w = rng.at(iter, Block::EtaMaxcW, j);
  RngCursor resid = rng.at(iter, Block::EtaResid, j);
  return truncated_gamma_max_coupling(lead, lag, u_inv, w, resid);
}

PairDraw coupled_slice_eta_crn(double eta, double eta_t, double m, double m_t, double nu, const RngStream& rng,
                               std::uint64_t iter, std::uint32_t j) {
  const double u = rng.at(iter, Block::EtaSlice, j).uniform();
  const double u_inv = rng.at(iter, Block::EtaInv, j).uniform();
  const double a = eta_slice_from_uniforms(eta, m, nu, u, u_inv);
  const double b = eta_slice_from_uniforms(eta_t, m_t, nu, u, u_inv);
  return {a, b, same_bits(a, b)};
}

PairDraw coupled_eta_perfect(double m, double m_t, double nu, EtaMode mode, const RngStream& rng,
                             std::uint64_t iter, std::uint32_t j) {
  const double w_inv = rng.at(iter, Block::EtaInv, j).uniform();
  if (mode == EtaMode::Crn) {
    const double a = eta_perfect_from_uniform(m, nu, w_inv);
    const double b = eta_perfect_from_uniform(m_t, nu, w_inv);
    return {a, b, same_bits(a, b)};
  }
  const EtaConditional lead(m, nu);
  if (same_bits(m, m_t)) {
    const double a = lead.quantile(w_inv);
    return {a, a, true};
  }
  const EtaConditional lag(m_t, nu);
  RngCursor w = rng.at(iter, Block::EtaMaxcW, j);
  RngCursor resid = rng.at(iter, Block::EtaResid, j);
  const CoupledDraw c = maximal_coupling([&](double x) { return lead.logpdf(x); },
                                         [&] { return lead.quantile(w_inv); },
                                         [&](double x) { return lag.logpdf(x); },
                                         [&](RngCursor& cur) { return lag.quantile(cur.uniform()); }, w, resid);
  return {c.x, c.y, c.met};
}

// ---------------------------------------------------------------------------
// xi, sigma2, beta

XiPairOutcome coupled_xi_mrth(XiConditional& ca, XiConditional& cb, double xi_a, double xi_b, const Dataset& d,
                              const Hyperparams& hp, const RngStream& rng, std::uint64_t iter) {
  const double sd = hp.sigma_mrth;
  const double mu_a = std::log(xi_a), mu_b = std::log(xi_b);
  const double z = rng.at(iter, Block::XiProp).normal();
  RngCursor w = rng.at(iter, Block::XiMaxc);
  RngCursor resid = rng.at(iter, Block::XiResid);
  // Both proposal laws share sd, so the Gaussian constant cancels.
  const CoupledDraw c = maximal_coupling(
      [&](double v) { return -0.5 * ((v - mu_a) / sd) * ((v - mu_a) / sd); },
      [&] { return xi_log_proposal(xi_a, sd, z); },
      [&](double v) { return -0.5 * ((v - mu_b) / sd) * ((v - mu_b) / sd); },
      [&](RngCursor& cur) { return mu_b + sd * cur.normal(); }, w, resid);
  const double u = rng.at(iter, Block::XiAccept).uniform();
  const MrthOutcome oa = xi_mrth_accept(ca, xi_a, std::exp(c.x), d, hp, u);
  const MrthOutcome ob = xi_mrth_accept(cb, xi_b, std::exp(c.y), d, hp, u);
  return {oa.xi, ob.xi, c.met, oa.accepted, ob.accepted};
}

PairDraw coupled_xi_grid(XiConditional& ca, XiConditional& cb, const Dataset& d, const Hyperparams& hp,
                         const RngStream& rng, std::uint64_t iter) {
  const double u = rng.at(iter, Block::XiGrid).uniform();
  const double a = xi_grid_sample(xi_grid_eigen(ca.G, d, hp), u);
  const double b = xi_grid_sample(xi_grid_eigen(cb.G, d, hp), u);
  ca.set_xi(d, hp, a);
  cb.set_xi(d, hp, b);
  return {a, b, same_bits(a, b)};
}

PairDraw coupled_sigma2_max(const XiConditional& ca, const XiConditional& cb, const Dataset& d,
                            const Hyperparams& hp, const RngStream& rng, std::uint64_t iter) {
  const InvGammaParams ia = sigma2_conditional(ca, d, hp);
  const InvGammaParams ib = sigma2_conditional(cb, d, hp);
  RngCursor lead = rng.at(iter, Block::Sigma2);
  RngCursor w = rng.at(iter, Block::Sigma2Maxc);
  RngCursor resid = rng.at(iter, Block::Sigma2Resid);
  const CoupledDraw c = maximal_coupling([&](double x) { return inv_gamma_logpdf(x, ia); },
                                         [&] { return sigma2_from_gamma(ia, lead.gamma(ia.shape)); },
                                         [&](double x) { return inv_gamma_logpdf(x, ib); },
                                         [&](RngCursor& cur) { return sigma2_from_gamma(ib, cur.gamma(ib.shape)); },
                                         w, resid);
  return {c.x, c.y, c.met};
}

std::pair<VectorXd, VectorXd> coupled_beta_crn(const Dataset& d, const VectorXd& eta_a, const VectorXd& eta_b,
                                               double xi_a, double xi_b, double sigma2_a, double sigma2_b,
                                               const linalg::SpdFactor<double>& fa,
                                               const linalg::SpdFactor<double>& fb, const RngStream& rng,
                                               std::uint64_t iter) {
  VectorXd r, delta;
  beta_noise(rng, iter, d.p(), d.n(), r, delta);
  return {beta_from_noise(d, eta_a, xi_a, sigma2_a, fa, r, delta),
          beta_from_noise(d, eta_b, xi_b, sigma2_b, fb, r, delta)};
}

// ---------------------------------------------------------------------------
// Composite step

namespace {

PairDraw eta_coordinate(const PairState& pr, Eigen::Index j, double nu, EtaMode mode, EtaUpdate kind,
                        const RngStream& rng, std::uint64_t iter) {
  const double m = m_value(pr.lead.beta[j], pr.lead.xi, pr.lead.sigma2);
  const double m_t = m_value(pr.lag.beta[j], pr.lag.xi, pr.lag.sigma2);
  const auto jj = static_cast<std::uint32_t>(j);
  if (kind == EtaUpdate::Perfect) return coupled_eta_perfect(m, m_t, nu, mode, rng, iter, jj);
  if (mode == EtaMode::Max) return coupled_slice_eta_max(pr.lead.eta[j], pr.lag.eta[j], m, m_t, nu, rng, iter, jj);
  return coupled_slice_eta_crn(pr.lead.eta[j], pr.lag.eta[j], m, m_t, nu, rng, iter, jj);
}

std::vector<Eigen::Index> coordinate_order(Eigen::Index p, Ordering ordering, const RngStream& rng,
                                           std::uint64_t iter) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  if (ordering == Ordering::Randomized) {
    RngCursor c = rng.at(iter, Block::Permute);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[c.uniform_int(i)]);
  }
  return order;
}

}  // namespace

void coupled_step(PairState& pr, const Dataset& d, const Hyperparams& hp, const CouplingStrategy& strategy,
                  KernelVariant variant, const RngStream& rng, std::uint64_t iter, CoupledStepInfo* info) {
  CoupledStepInfo local;
  CoupledStepInfo& inf = info ? *info : local;
  inf = CoupledStepInfo{};

  if (identical(pr.lead, pr.lag)) {
    pr.lead = gibbs_step(pr.lead, d, hp, variant, rng, iter);
    pr.lag = pr.lead;
    inf.shared_step = true;
    inf.eta_max_path = true;
    inf.eta_met = static_cast<int>(pr.lead.p());
    inf.xi_met = inf.sigma2_met = inf.equal_after = true;
    inf.d_hat = 0.0;
    return;
  }

  const Eigen::Index p = pr.lead.p();
  VectorXd eta_a(p), eta_b(p);
  auto take = [&](Eigen::Index j, const PairDraw& pd) {
    eta_a[j] = pd.a;
    eta_b[j] = pd.b;
    if (pd.met) ++inf.eta_met;
  };

  switch (strategy.kind) {
    case StrategyKind::OneScale:
    case StrategyKind::TwoScale:
    case StrategyKind::CRNOnly: {
      EtaMode mode = EtaMode::Max;
      if (strategy.kind == StrategyKind::CRNOnly) {
        mode = EtaMode::Crn;
      } else if (strategy.kind == StrategyKind::TwoScale && strategy.d0 < 1.0) {
        const double log_stop = strategy.d0 < 1.0 - 1e-12 ? std::log(1e-12) : -kInf;
        inf.d_hat = metric_d_hat2(pr.lead, pr.lag, hp.nu, strategy.R, rng, iter, log_stop).value;
        if (inf.d_hat > strategy.d0) mode = EtaMode::Crn;
      }
      inf.eta_max_path = mode == EtaMode::Max;
      for (Eigen::Index j = 0; j < p; ++j) {
        const PairDraw pd = eta_coordinate(pr, j, hp.nu, mode, variant.eta, rng, iter);
        if (mode == EtaMode::Max && !pd.met) ++inf.eta_independent;
        take(j, pd);
      }
      break;
    }
    case StrategyKind::SwitchToCRN: {
      bool switched = false;
      for (Eigen::Index j : coordinate_order(p, strategy.ordering, rng, iter)) {
        const PairDraw pd = eta_coordinate(pr, j, hp.nu, switched ? EtaMode::Crn : EtaMode::Max, variant.eta, rng, iter);
        if (!switched && !pd.met) {
          ++inf.eta_independent;
          switched = true;
        }
        take(j, pd);
      }
      inf.eta_max_path = !switched;
      break;
    }
  }

  XiConditional ca(d, eta_a), cb(d, eta_b);
  double xi_a, xi_b;
  if (variant.xi == XiUpdate::Mrth) {
    const XiPairOutcome o = coupled_xi_mrth(ca, cb, pr.lead.xi, pr.lag.xi, d, hp, rng, iter);
    xi_a = o.a;
    xi_b = o.b;
  } else {
    const PairDraw o = coupled_xi_grid(ca, cb, d, hp, rng, iter);
    xi_a = o.a;
    xi_b = o.b;
  }
  inf.xi_met = same_bits(xi_a, xi_b);

  const PairDraw s2 = coupled_sigma2_max(ca, cb, d, hp, rng, iter);
  inf.sigma2_met = s2.met;

  auto [beta_a, beta_b] =
      coupled_beta_crn(d, eta_a, eta_b, xi_a, xi_b, s2.a, s2.b, ca.factor, cb.factor, rng, iter);

  pr.lead = ChainState{std::move(beta_a), std::move(eta_a), s2.a, xi_a};
  pr.lag = ChainState{std::move(beta_b), std::move(eta_b), s2.b, xi_b};
  inf.equal_after = identical(pr.lead, pr.lag);
}

void one_scale_step(PairState& pair, const Dataset& d, const Hyperparams& hp, KernelVariant variant,
                    const RngStream& rng, std::uint64_t iter, CoupledStepInfo* info) {
  coupled_step(pair, d, hp, CouplingStrategy::one_scale(), variant, rng, iter, info);
}

void two_scale_step(PairState& pair, const Dataset& d, const Hyperparams& hp, double d0, int R,
                    KernelVariant variant, const RngStream& rng, std::uint64_t iter, CoupledStepInfo* info) {
  const CouplingStrategy s = CouplingStrategy::two_scale(d0, R);
  s.validate();
  coupled_step(pair, d, hp, s, variant, rng, iter, info);
}

void switch_to_crn_step(PairState& pair, const Dataset& d, const Hyperparams& hp, Ordering ordering,
                        KernelVariant variant, const RngStream& rng, std::uint64_t iter, CoupledStepInfo* info) {
  coupled_step(pair, d, hp, CouplingStrategy::switch_to_crn(ordering), variant, rng, iter, info);
}

// ---------------------------------------------------------------------------

MeetingRecord run_coupled_pair(const Dataset& d, const Hyperparams& hp, const CouplingStrategy& strategy,
                               std::uint64_t seed, const PairRunOptions& opts) {
  if (opts.L < 1) throw DomainError("run_coupled_pair: L must be at least 1");
  if (opts.max_iter < opts.L) throw DomainError("run_coupled_pair: max_iter must be at least L");
  strategy.validate();
  hp.validate();
  d.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const int p = static_cast<int>(d.p());
  const RngStream kernel = make_stream(seed, StreamRole::Kernel);

  MeetingRecord rec;
  rec.L = opts.L;
  rec.seed = seed;
  rec.strategy = strategy.name();

  PairState pr;
  pr.lead = init_from_prior(hp, p, make_stream(seed, StreamRole::LeadInit));
  if (!opts.force_equal_start) pr.lag = init_from_prior(hp, p, make_stream(seed, StreamRole::LagInit));

  if (opts.observer) opts.observer(0, pr.lead, nullptr);
  for (long t = 1; t <= opts.L; ++t) {
    pr.lead = gibbs_step(pr.lead, d, hp, opts.variant, kernel, static_cast<std::uint64_t>(t));
    if (opts.force_equal_start && t == opts.L) pr.lag = pr.lead;
    if (opts.observer) opts.observer(t, pr.lead, t == opts.L ? &pr.lag : nullptr);
  }

  long t = opts.L;
  bool met = identical(pr.lead, pr.lag);
  if (met) rec.tau = t;
  CoupledStepInfo info;
  while ((!met && t < opts.max_iter) || t < opts.min_iter) {
    ++t;
    coupled_step(pr, d, hp, strategy, opts.variant, kernel, static_cast<std::uint64_t>(t), &info);
    if (opts.step_observer) opts.step_observer(t, pr, info);
    if (opts.observer) opts.observer(t, pr.lead, &pr.lag);
    if (!met && info.equal_after) {
      met = true;
      rec.tau = t;
    }
  }
  if (!met) {
    rec.censored = true;
    rec.tau = t;
  }
  rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

}  // namespace shrinkcoup
