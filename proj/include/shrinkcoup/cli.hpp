#pragma once

// Experiment configuration and the commands behind the `shrinkcoup` binary.
//
// Configuration is resolved in layers: built-in defaults, then the preset
// named by `preset`, then the config file, then `--set key=value` overrides.
// Keys are `section.name`; the file uses INI sections for the same names.

#include <atomic>
#include <cstdint>
#include <exception>
#include <map>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "shrinkcoup/couplings.hpp"
#include "shrinkcoup/errors.hpp"
#include "shrinkcoup/model.hpp"

namespace shrinkcoup::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Unknown key, malformed value, or unusable input file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

enum ExitCode : int { kOk = 0, kConfigError = 2, kNumericalFailure = 3, kAllCensored = 4 };

std::uint64_t fnv1a64(const std::string& bytes);

struct ExperimentConfig {
  std::string command;

  std::string data_source = "synthetic";  // or a dataset path
  int n = 100, p = 100, s = 10;
  double sigma_star = 0.5;
  std::uint64_t data_seed = 0;

  Hyperparams hp;
  KernelVariant variant;
  CouplingStrategy strategy;
  int L = 1;
  bool L_auto = false;
  int pilot_pairs = 5;
  bool force_equal_start = false;

  int replicates = 20;
  long max_iter = 10000;
  long iterations = 1000;
  long chain_length = 1000;
  long burn_in = -1;  // -1: chosen by nu
  std::vector<double> nu_list;
  int beta_columns = -1;  // -1: all
  bool wall_time = true;
  std::string meetings_path;

  std::uint64_t seed = 1;
  int workers = 1;
  std::string out = "-";

  /// Sorted `key=value` lines of every resolved setting, plus the command.
  std::string canonical;
  std::uint64_t hash() const { return fnv1a64(canonical); }
  std::string provenance_line() const;
};

std::vector<std::string> preset_names();
std::map<std::string, std::string> default_settings();

/// Resolves the layered configuration.  `config_path` may be empty.
ExperimentConfig resolve_config(const std::string& command, const std::string& config_path,
                                const std::vector<std::string>& overrides, std::uint64_t seed, int workers);

/// Burn-in used by `mse` when none is configured: 600 for nu below 1.2, else 300.
long default_burn_in(double nu);

Dataset load_experiment_data(const ExperimentConfig& cfg);

/// Runs f(0), ..., f(jobs-1) on up to `workers` threads; results are in job
/// order whatever the schedule.  The first failing job's exception (by index)
/// is rethrown.
template <class F>
auto run_fleet(int jobs, int workers, F&& f) -> std::vector<decltype(f(0))> {
  using R = decltype(f(0));
  std::vector<R> out(static_cast<std::size_t>(jobs));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int j = next++; j < jobs; j = next++) {
      try {
        out[static_cast<std::size_t>(j)] = f(j);
      } catch (...) {
        errors[static_cast<std::size_t>(j)] = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min(workers, jobs));
  std::vector<std::thread> pool;
  for (int w = 1; w < n; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

/// Lag from a pilot fleet at L = 1: ten times the median pilot meeting time.
/// Censored pilots count at their cap.
int pilot_lag(const Dataset& d, const ExperimentConfig& cfg);

/// The coupled fleet behind `couple` and `tvbound`, sorted by replicate.
std::vector<MeetingRecord> run_meeting_fleet(const Dataset& d, const ExperimentConfig& cfg, int L);

struct MseRow {
  int replicate;
  double nu;
  long burn_in;
  double mse;
};
std::vector<MseRow> run_mse_fleet(const ExperimentConfig& cfg);

// Each command writes its CSV to `os` and returns an exit code.
int cmd_sample(const ExperimentConfig& cfg, std::ostream& os);
int cmd_couple(const ExperimentConfig& cfg, std::ostream& os);
int cmd_tvbound(const ExperimentConfig& cfg, std::ostream& os);
int cmd_mse(const ExperimentConfig& cfg, std::ostream& os);
int cmd_trace_metrics(const ExperimentConfig& cfg, std::ostream& os);
/// Writes the dataset to cfg.out and the true coefficients to `os`.
int cmd_synthetic(const ExperimentConfig& cfg, std::ostream& os);

/// Dispatches on cfg.command.
int run_command(const ExperimentConfig& cfg, std::ostream& os);

/// Maps an exception from configuration or a run to an exit code.
int exit_code_for(const std::exception& e);

/// Shortest round-trip decimal form.
std::string format_double(double x);

}  // namespace shrinkcoup::cli
