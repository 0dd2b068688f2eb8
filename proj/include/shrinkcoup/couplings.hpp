#pragma once

// Coupled kernels for lagged pairs of Gibbs chains.
//
// Shared-randomness discipline: both chains read every random input from the
// kernel stream at the lead's iteration index.  Common random numbers means
// both sides read the same address.  In a maximal coupling the lead draws
// from its own single-chain address, so the lead trajectory is bit-identical
// to an uncoupled chain; the acceptance uniform and the residual draws of the
// lag live in dedicated blocks.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <utility>
#include <string>

#include "shrinkcoup/errors.hpp"
#include "shrinkcoup/gibbs.hpp"
#include "shrinkcoup/model.hpp"
#include "shrinkcoup/rng.hpp"

namespace shrinkcoup {

inline constexpr long kMaxResidualAttempts = 1'000'000;

struct CoupledDraw {
  double x;  // draw from P
  double y;  // draw from Q
  bool met;  // x == y
};

/// Maximal coupling with independent residuals.  `sample_p()` draws from P,
/// `sample_q(cursor)` draws from Q using the given cursor, and the log
/// densities must be consistent with the samplers up to a common constant.
template <class LogP, class SampleP, class LogQ, class SampleQ>
CoupledDraw maximal_coupling(LogP&& log_p, SampleP&& sample_p, LogQ&& log_q, SampleQ&& sample_q, RngCursor& w,
                             RngCursor& resid, long max_attempts = kMaxResidualAttempts) {
  const double x = sample_p();
  if (std::log(w.uniform()) + log_p(x) <= log_q(x)) return {x, x, true};
  for (long k = 0; k < max_attempts; ++k) {
    const double y = sample_q(resid);
    if (std::log(resid.uniform()) + log_q(y) > log_p(y)) return {x, y, false};
  }
  throw ConvergenceError("maximal_coupling: residual rejection loop exceeded its attempt limit");
}

// ---------------------------------------------------------------------------
// Strategies

enum class StrategyKind { OneScale, TwoScale, SwitchToCRN, CRNOnly };
enum class Ordering { Fixed, Randomized };

struct CouplingStrategy {
  StrategyKind kind = StrategyKind::TwoScale;
  double d0 = 0.5;
  int R = 1;
  Ordering ordering = Ordering::Randomized;

  void validate() const;
  std::string name() const;

  static CouplingStrategy one_scale() { return {StrategyKind::OneScale, 1.0, 1, Ordering::Fixed}; }
  static CouplingStrategy two_scale(double d0 = 0.5, int R = 1) { return {StrategyKind::TwoScale, d0, R, Ordering::Fixed}; }
  static CouplingStrategy switch_to_crn(Ordering o = Ordering::Randomized) {
    return {StrategyKind::SwitchToCRN, 1.0, 1, o};
  }
  static CouplingStrategy crn_only() { return {StrategyKind::CRNOnly, 0.0, 1, Ordering::Fixed}; }
};

CouplingStrategy parse_strategy(const std::string& name);

// ---------------------------------------------------------------------------
// Block couplings

struct PairDraw {
  double a;
  double b;
  bool met;
};

enum class EtaMode { Max, Crn };

/// Maximal coupling of the two truncated slice targets with the lead drawn
/// by inversion at u_inv.
PairDraw truncated_gamma_max_coupling(const TruncatedGamma& lead, const TruncatedGamma& lag, double u_inv,
                                      RngCursor& w, RngCursor& resid);

PairDraw coupled_slice_eta_max(double eta, double eta_t, double m, double m_t, double nu, const RngStream& rng,
                               std::uint64_t iter, std::uint32_t j);
PairDraw coupled_slice_eta_crn(double eta, double eta_t, double m, double m_t, double nu, const RngStream& rng,
                               std::uint64_t iter, std::uint32_t j);
PairDraw coupled_eta_perfect(double m, double m_t, double nu, EtaMode mode, const RngStream& rng,
                             std::uint64_t iter, std::uint32_t j);

struct XiPairOutcome {
  double a;
  double b;
  bool proposals_met;
  bool accepted_a;
  bool accepted_b;
};

XiPairOutcome coupled_xi_mrth(XiConditional& ca, XiConditional& cb, double xi_a, double xi_b, const Dataset& d,
                              const Hyperparams& hp, const RngStream& rng, std::uint64_t iter);
/// Perfect grid draws of both sides from one shared uniform.
PairDraw coupled_xi_grid(XiConditional& ca, XiConditional& cb, const Dataset& d, const Hyperparams& hp,
                         const RngStream& rng, std::uint64_t iter);

PairDraw coupled_sigma2_max(const XiConditional& ca, const XiConditional& cb, const Dataset& d,
                            const Hyperparams& hp, const RngStream& rng, std::uint64_t iter);

std::pair<VectorXd, VectorXd> coupled_beta_crn(const Dataset& d, const VectorXd& eta_a, const VectorXd& eta_b,
                                               double xi_a, double xi_b, double sigma2_a, double sigma2_b,
                                               const linalg::SpdFactor<double>& fa,
                                               const linalg::SpdFactor<double>& fb, const RngStream& rng,
                                               std::uint64_t iter);

// ---------------------------------------------------------------------------
// Composite kernels

struct PairState {
  ChainState lead;  // C_t
  ChainState lag;   // C~_{t-L}
};

struct CoupledStepInfo {
  bool shared_step = false;  // the pair was already equal
  double d_hat = std::numeric_limits<double>::quiet_NaN();
  bool eta_max_path = false;
  int eta_met = 0;
  int eta_independent = 0;  // coordinates whose maximal coupling failed
  bool xi_met = false;
  bool sigma2_met = false;
  bool equal_after = false;
};

void coupled_step(PairState& pair, const Dataset& d, const Hyperparams& hp, const CouplingStrategy& strategy,
                  KernelVariant variant, const RngStream& rng, std::uint64_t iter, CoupledStepInfo* info = nullptr);

void one_scale_step(PairState& pair, const Dataset& d, const Hyperparams& hp, KernelVariant variant,
                    const RngStream& rng, std::uint64_t iter, CoupledStepInfo* info = nullptr);
void two_scale_step(PairState& pair, const Dataset& d, const Hyperparams& hp, double d0, int R,
                    KernelVariant variant, const RngStream& rng, std::uint64_t iter,
                    CoupledStepInfo* info = nullptr);
void switch_to_crn_step(PairState& pair, const Dataset& d, const Hyperparams& hp, Ordering ordering,
                        KernelVariant variant, const RngStream& rng, std::uint64_t iter,
                        CoupledStepInfo* info = nullptr);

// ---------------------------------------------------------------------------
// Lagged pair runner

struct MeetingRecord {
  long tau = 0;  // meeting time; equals the last simulated time when censored
  bool censored = false;
  int L = 1;
  std::uint64_t seed = 0;
  std::string strategy;
  double wall_time = 0.0;  // seconds
};

struct PairRunOptions {
  int L = 1;
  long max_iter = 100000;
  KernelVariant variant;
  /// Debug aid: the lag starts as a copy of the lead at time L.
  bool force_equal_start = false;
  /// Keep simulating (with shared steps once met) until the lead reaches this time.
  long min_iter = 0;
  /// Called at every lead time t with C_t and, once t >= L, with C~_{t-L}.
  std::function<void(long t, const ChainState& lead, const ChainState* lag)> observer;
  /// Called after every coupled transition.
  std::function<void(long t, const PairState& pair, const CoupledStepInfo& info)> step_observer;
};

MeetingRecord run_coupled_pair(const Dataset& d, const Hyperparams& hp, const CouplingStrategy& strategy,
                               std::uint64_t seed, const PairRunOptions& opts = {});

}  // namespace shrinkcoup
