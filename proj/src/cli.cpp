#include "shrinkcoup/cli.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "shrinkcoup/dataset_io.hpp"
#include "shrinkcoup/diagnostics.hpp"
#include "shrinkcoup/gibbs.hpp"
#include "shrinkcoup/metrics.hpp"

namespace shrinkcoup::cli {

namespace {

using Settings = std::map<std::string, std::string>;

// Keeps the data seed away from the per-replicate chain seeds.
constexpr std::uint64_t kDataSalt = 0xD1B54A32D192ED03ULL;
constexpr std::uint64_t kPilotSalt = 0x8CB92BA72F3D8DD7ULL;

const std::map<std::string, Settings>& presets() {
  static const std::map<std::string, Settings> table = {
      {"fig2",
       {{"data.n", "100"}, {"data.p", "100"}, {"data.s", "10"}, {"data.sigma_star", "0.5"},
        {"coupling.strategy", "one-scale"}, {"run.replicates", "20"}, {"run.max_iter", "10000"}}},
      {"fig3",
       {{"data.n", "100"}, {"data.p", "400"}, {"data.s", "10"}, {"data.sigma_star", "0.5"},
        {"coupling.strategy", "two-scale"}, {"coupling.d0", "0.5"}, {"coupling.R", "1"},
        {"run.replicates", "20"}, {"run.max_iter", "10000"}}},
      {"fig4a",
       {{"data.n", "100"}, {"data.p", "500"}, {"data.s", "20"}, {"data.sigma_star", "2"},
        {"coupling.strategy", "two-scale"}, {"coupling.d0", "0.5"}, {"run.replicates", "20"},
        {"run.max_iter", "3000"}}},
      {"fig4b",
       {{"data.n", "100"}, {"data.p", "500"}, {"data.s", "20"}, {"data.sigma_star", "2"},
        {"run.replicates", "20"}, {"run.chain_length", "1000"}, {"run.nu_list", "1,1.2,1.4,1.6,1.8,2"}}},
      {"fig5-small",
       {{"data.n", "50"}, {"data.p", "200"}, {"data.s", "10"}, {"data.sigma_star", "0.5"},
        {"coupling.strategy", "two-scale"}, {"coupling.L", "auto"}, {"run.replicates", "100"},
        {"run.max_iter", "10000"}}},
  };
  return table;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

void set_known(Settings& s, const std::string& key, const std::string& value, const std::string& origin) {
  if (!s.contains(key)) throw ConfigError(origin + ": unknown setting '" + key + "'");
  s[key] = trim(value);
}

Settings read_config_file(const std::string& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("cannot read config: " + std::string(e.what()));
  }
  Settings out;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      out[section] = body.data();
      continue;
    }
    for (const auto& [key, leaf] : body) out[section + "." + key] = leaf.data();
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T x{};
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || end != v.data() + v.size()) throw ConfigError(key + ": cannot parse '" + v + "'");
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  for (std::string item; std::getline(ss, item, ',');)
    if (!trim(item).empty()) out.push_back(parse_number<double>(key, trim(item)));
  return out;
}

void write_provenance(std::ostream& os, const ExperimentConfig& cfg) { os << cfg.provenance_line() << '\n'; }

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string format_double(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

std::string ExperimentConfig::provenance_line() const {
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(hash()));
  return "# seed=" + std::to_string(seed) + " version=" + kVersion + " config_hash=" + hex;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& [name, _] : presets()) out.push_back(name);
  return out;
}

Settings default_settings() {
  return {
      {"preset", ""},
      {"data.source", "synthetic"},
      {"data.n", "100"},
      {"data.p", "100"},
      {"data.s", "10"},
      {"data.sigma_star", "0.5"},
      {"data.seed", "auto"},
      {"prior.nu", "1"},
      {"prior.a0", "1"},
      {"prior.b0", "1"},
      {"prior.xi_lo", "1e-8"},
      {"prior.xi_hi", "1e8"},
      {"kernel.eta", "slice"},
      {"kernel.xi", "mrth"},
      {"kernel.sigma_mrth", "0.8"},
      {"kernel.xi_grid_size", "1024"},
      {"coupling.strategy", "two-scale"},
      {"coupling.d0", "0.5"},
      {"coupling.R", "1"},
      {"coupling.ordering", "randomized"},
      {"coupling.L", "1"},
      {"coupling.pilot_pairs", "5"},
      {"coupling.force_equal_start", "false"},
      {"run.replicates", "20"},
      {"run.max_iter", "10000"},
      {"run.iterations", "1000"},
      {"run.chain_length", "1000"},
      {"run.burn_in", "auto"},
      {"run.nu_list", ""},
      {"run.beta_columns", "all"},
      {"run.wall_time", "true"},
      {"run.meetings", ""},
  };
}

long default_burn_in(double nu) { return nu < 1.2 ? 600 : 300; }

ExperimentConfig resolve_config(const std::string& command, const std::string& config_path,
                                const std::vector<std::string>& overrides, std::uint64_t seed, int workers) {
  static const std::vector<std::string> commands = {"sample", "couple", "tvbound", "mse", "trace-metrics", "synthetic"};
  if (std::find(commands.begin(), commands.end(), command) == commands.end())
    throw ConfigError("unknown command '" + command + "'");

  Settings file = config_path.empty() ? Settings{} : read_config_file(config_path);
  std::vector<std::pair<std::string, std::string>> sets;
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
    sets.emplace_back(trim(o.substr(0, eq)), o.substr(eq + 1));
  }

  // The preset is looked up first so that file and flags can refine it.
  std::string preset = file.contains("preset") ? trim(file["preset"]) : "";
  for (const auto& [k, v] : sets)
    if (k == "preset") preset = trim(v);

  Settings s = default_settings();
  if (!preset.empty()) {
    const auto it = presets().find(preset);
    if (it == presets().end()) throw ConfigError("unknown preset '" + preset + "'");
    for (const auto& [k, v] : it->second) set_known(s, k, v, "preset " + preset);
  }
  for (const auto& [k, v] : file) set_known(s, k, v, config_path);
  for (const auto& [k, v] : sets) set_known(s, k, v, "--set");
  s["preset"] = preset;

  ExperimentConfig c;
  c.command = command;
  c.seed = seed;
  c.workers = std::max(1, workers);

  c.data_source = s["data.source"];
  c.n = parse_number<int>("data.n", s["data.n"]);
  c.p = parse_number<int>("data.p", s["data.p"]);
  c.s = parse_number<int>("data.s", s["data.s"]);
  c.sigma_star = parse_number<double>("data.sigma_star", s["data.sigma_star"]);
  c.data_seed = s["data.seed"] == "auto" ? splitmix64(seed ^ kDataSalt)
                                         : parse_number<std::uint64_t>("data.seed", s["data.seed"]);

  c.hp.nu = parse_number<double>("prior.nu", s["prior.nu"]);
  c.hp.a0 = parse_number<double>("prior.a0", s["prior.a0"]);
  c.hp.b0 = parse_number<double>("prior.b0", s["prior.b0"]);
  c.hp.xi_lo = parse_number<double>("prior.xi_lo", s["prior.xi_lo"]);
  c.hp.xi_hi = s["prior.xi_hi"] == "inf" ? INFINITY : parse_number<double>("prior.xi_hi", s["prior.xi_hi"]);
  c.hp.sigma_mrth = parse_number<double>("kernel.sigma_mrth", s["kernel.sigma_mrth"]);
  c.hp.xi_grid_size = parse_number<int>("kernel.xi_grid_size", s["kernel.xi_grid_size"]);

  const std::string& eta = s["kernel.eta"];
  if (eta != "slice" && eta != "perfect") throw ConfigError("kernel.eta must be slice or perfect");
  c.variant.eta = eta == "slice" ? EtaUpdate::Slice : EtaUpdate::Perfect;
  const std::string& xi = s["kernel.xi"];
  if (xi != "mrth" && xi != "grid") throw ConfigError("kernel.xi must be mrth or grid");
  c.variant.xi = xi == "mrth" ? XiUpdate::Mrth : XiUpdate::PerfectGrid;

  try {
    c.strategy = parse_strategy(s["coupling.strategy"]);
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  if (c.strategy.kind == StrategyKind::TwoScale) {
    c.strategy.d0 = parse_number<double>("coupling.d0", s["coupling.d0"]);
    c.strategy.R = parse_number<int>("coupling.R", s["coupling.R"]);
  }
  if (c.strategy.kind == StrategyKind::SwitchToCRN) {
    const std::string& o = s["coupling.ordering"];
    if (o != "fixed" && o != "randomized") throw ConfigError("coupling.ordering must be fixed or randomized");
    c.strategy.ordering = o == "fixed" ? Ordering::Fixed : Ordering::Randomized;
  }
  c.L_auto = s["coupling.L"] == "auto";
  if (!c.L_auto) c.L = parse_number<int>("coupling.L", s["coupling.L"]);
  c.pilot_pairs = parse_number<int>("coupling.pilot_pairs", s["coupling.pilot_pairs"]);
  c.force_equal_start = parse_bool("coupling.force_equal_start", s["coupling.force_equal_start"]);

  c.replicates = parse_number<int>("run.replicates", s["run.replicates"]);
  c.max_iter = parse_number<long>("run.max_iter", s["run.max_iter"]);
  c.iterations = parse_number<long>("run.iterations", s["run.iterations"]);
  c.chain_length = parse_number<long>("run.chain_length", s["run.chain_length"]);
  c.burn_in = s["run.burn_in"] == "auto" ? -1 : parse_number<long>("run.burn_in", s["run.burn_in"]);
  c.nu_list = parse_list("run.nu_list", s["run.nu_list"]);
  c.beta_columns = s["run.beta_columns"] == "all" ? -1 : parse_number<int>("run.beta_columns", s["run.beta_columns"]);
  c.wall_time = parse_bool("run.wall_time", s["run.wall_time"]);
  c.meetings_path = s["run.meetings"];

  if (c.replicates < 1) throw ConfigError("run.replicates must be at least 1");
  if (c.max_iter < 1 || c.iterations < 0 || c.chain_length < 1) throw ConfigError("run lengths must be positive");
  if (!c.L_auto && (c.L < 1 || c.L > c.max_iter)) throw ConfigError("coupling.L must lie in [1, run.max_iter]");
  if (c.pilot_pairs < 1) throw ConfigError("coupling.pilot_pairs must be at least 1");
  if (c.burn_in < -1) throw ConfigError("run.burn_in must be nonnegative");
  if (c.data_source == "synthetic" && (c.n < 1 || c.p < 1 || c.s < 0 || c.s > c.p || !(c.sigma_star >= 0)))
    throw ConfigError("synthetic design needs n, p >= 1, 0 <= s <= p and sigma_star >= 0");
  try {
    c.hp.validate();
    c.strategy.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  for (double nu : c.nu_list)
    if (!(nu > 0)) throw ConfigError("run.nu_list entries must be positive");

  // Execution-only knobs stay out of the hash so they cannot change it.
  std::string canon = "command=" + command + "\nseed=" + std::to_string(seed) + "\n";
  for (const auto& [k, v] : s) canon += k + "=" + v + "\n";
  c.canonical = canon;
  return c;
}

Dataset load_experiment_data(const ExperimentConfig& cfg) {
  if (cfg.data_source == "synthetic")
    return generate_synthetic(cfg.n, cfg.p, cfg.s, cfg.sigma_star, cfg.data_seed).first;
  try {
    return load_dataset(cfg.data_source);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
}

namespace {

PairRunOptions pair_options(const ExperimentConfig& cfg, int L) {
  PairRunOptions o;
  o.L = L;
  o.max_iter = cfg.max_iter;
  o.variant = cfg.variant;
  o.force_equal_start = cfg.force_equal_start;
  return o;
}

}  // namespace

int pilot_lag(const Dataset& d, const ExperimentConfig& cfg) {
  const auto recs = run_fleet(cfg.pilot_pairs, cfg.workers, [&](int r) {
    return run_coupled_pair(d, cfg.hp, cfg.strategy, replicate_seed(cfg.seed ^ kPilotSalt, r), pair_options(cfg, 1));
  });
  std::vector<double> taus;
  for (const auto& r : recs) taus.push_back(static_cast<double>(r.tau));
  std::sort(taus.begin(), taus.end());
  const double L = 10.0 * quantile_sorted(taus, 0.5);
  return static_cast<int>(std::clamp(std::round(L), 1.0, static_cast<double>(cfg.max_iter)));
}

std::vector<MeetingRecord> run_meeting_fleet(const Dataset& d, const ExperimentConfig& cfg, int L) {
  return run_fleet(cfg.replicates, cfg.workers, [&](int r) {
    return run_coupled_pair(d, cfg.hp, cfg.strategy, replicate_seed(cfg.seed, r), pair_options(cfg, L));
  });
}

int cmd_couple(const ExperimentConfig& cfg, std::ostream& os) {
  const Dataset d = load_experiment_data(cfg);
  const int L = cfg.L_auto ? pilot_lag(d, cfg) : cfg.L;
  const auto recs = run_meeting_fleet(d, cfg, L);
  write_provenance(os, cfg);
  os << "replicate,seed,strategy,d0,R,L,tau,censored,wall_time_s\n";
  bool any_met = false;
  for (std::size_t r = 0; r < recs.size(); ++r) {
    const auto& m = recs[r];
    any_met |= !m.censored;
    os << r << ',' << m.seed << ',' << m.strategy << ',' << format_double(cfg.strategy.d0) << ',' << cfg.strategy.R
       << ',' << m.L << ',' << m.tau << ',' << (m.censored ? 1 : 0) << ','
       << format_double(cfg.wall_time ? m.wall_time : 0.0) << '\n';
  }
  return any_met ? kOk : kAllCensored;
}

namespace {

std::vector<MeetingRecord> read_meetings_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open meetings file '" + path + "'");
  std::string line;
  std::vector<std::string> header;
  std::vector<MeetingRecord> out;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(trim(cell));
    if (header.empty()) {
      header = cells;
      continue;
    }
    auto col = [&](const std::string& name) -> const std::string& {
      const auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end() || static_cast<std::size_t>(it - header.begin()) >= cells.size())
        throw ConfigError(path + ": missing column '" + name + "'");
      return cells[static_cast<std::size_t>(it - header.begin())];
    };
    MeetingRecord m;
    m.tau = parse_number<long>("tau", col("tau"));
    m.L = parse_number<int>("L", col("L"));
    m.censored = col("censored") == "1";
    out.push_back(m);
  }
  if (out.empty()) throw ConfigError(path + ": no meeting records");
  return out;
}

}  // namespace

int cmd_tvbound(const ExperimentConfig& cfg, std::ostream& os) {
  std::vector<MeetingRecord> recs;
  if (!cfg.meetings_path.empty()) {
    recs = read_meetings_csv(cfg.meetings_path);
  } else {
    const Dataset d = load_experiment_data(cfg);
    recs = run_meeting_fleet(d, cfg, cfg.L_auto ? pilot_lag(d, cfg) : cfg.L);
  }
  const std::vector<long> grid = default_t_grid(recs);
  const TVBoundCurve curve = tv_bound_curve(recs, grid);
  write_provenance(os, cfg);
  os << "t,bound,n_pairs,n_censored\n";
  for (std::size_t i = 0; i < grid.size(); ++i)
    os << grid[i] << ',' << format_double(curve.bound[i]) << ',' << curve.n_pairs << ',' << curve.n_censored << '\n';
  return kOk;
}

std::vector<MseRow> run_mse_fleet(const ExperimentConfig& cfg) {
  if (cfg.data_source != "synthetic") throw ConfigError("mse needs data.source = synthetic");
  const std::vector<double> nus = cfg.nu_list.empty() ? std::vector<double>{cfg.hp.nu} : cfg.nu_list;
  const int jobs = static_cast<int>(nus.size()) * cfg.replicates;
  return run_fleet(jobs, cfg.workers, [&](int job) {
    const int r = job % cfg.replicates;
    Hyperparams hp = cfg.hp;
    hp.nu = nus[static_cast<std::size_t>(job / cfg.replicates)];
    // Every nu sees the same dataset and chain seed for a given replicate.
    auto [d, truth] = generate_synthetic(cfg.n, cfg.p, cfg.s, cfg.sigma_star, replicate_seed(cfg.data_seed, r));
    const std::uint64_t seed = replicate_seed(cfg.seed, r);
    const RngStream kernel = make_stream(seed, StreamRole::Kernel);
    const long burn = cfg.burn_in >= 0 ? cfg.burn_in : default_burn_in(hp.nu);
    ChainState s = init_from_prior(hp, cfg.p, make_stream(seed, StreamRole::LeadInit));
    VectorXd sum = VectorXd::Zero(cfg.p);
    for (long t = 1; t <= burn + cfg.chain_length; ++t) {
      s = gibbs_step(s, d, hp, cfg.variant, kernel, static_cast<std::uint64_t>(t));
      if (t > burn) sum += s.beta;
    }
    const VectorXd beta_hat = sum / static_cast<double>(cfg.chain_length);
    return MseRow{r, hp.nu, burn, (truth.beta_star - beta_hat).squaredNorm() / cfg.p};
  });
}

int cmd_mse(const ExperimentConfig& cfg, std::ostream& os) {
  const auto rows = run_mse_fleet(cfg);
  write_provenance(os, cfg);
  os << "replicate,nu,burn_in,mse\n";
  for (const auto& r : rows)
    os << r.replicate << ',' << format_double(r.nu) << ',' << r.burn_in << ',' << format_double(r.mse) << '\n';
  return kOk;
}

int cmd_sample(const ExperimentConfig& cfg, std::ostream& os) {
  const Dataset d = load_experiment_data(cfg);
  const int p = static_cast<int>(d.p());
  const int cols = cfg.beta_columns < 0 ? p : std::min(cfg.beta_columns, p);
  const std::uint64_t seed = replicate_seed(cfg.seed, 0);
  const RngStream kernel = make_stream(seed, StreamRole::Kernel);
  ChainState s = init_from_prior(cfg.hp, p, make_stream(seed, StreamRole::LeadInit));

  write_provenance(os, cfg);
  os << "iter,sigma2,xi,log_lik";
  for (int j = 1; j <= cols; ++j) os << ",beta_" << j;
  os << '\n';
  auto row = [&](long t, double log_lik) {
    os << t << ',' << format_double(s.sigma2) << ',' << format_double(s.xi) << ',' << format_double(log_lik);
    for (int j = 0; j < cols; ++j) os << ',' << format_double(s.beta[j]);
    os << '\n';
  };
  XiConditional c0(d, s.eta);
  c0.set_xi(d, cfg.hp, s.xi);
  row(0, c0.log_lik);
  StepInfo info;
  for (long t = 1; t <= cfg.iterations; ++t) {
    s = gibbs_step(s, d, cfg.hp, cfg.variant, kernel, static_cast<std::uint64_t>(t), &info);
    row(t, info.log_lik);
  }
  return kOk;
}

int cmd_trace_metrics(const ExperimentConfig& cfg, std::ostream& os) {
  const Dataset d = load_experiment_data(cfg);
  const int L = cfg.L_auto ? pilot_lag(d, cfg) : cfg.L;
  const std::uint64_t seed = replicate_seed(cfg.seed, 0);
  const RngStream kernel = make_stream(seed, StreamRole::Kernel);
  const int R = std::max(1, cfg.strategy.R);

  write_provenance(os, cfg);
  os << "t,d_hat2,dbar,capped_l1,drift_V\n";
  PairRunOptions o = pair_options(cfg, L);
  // The metric reads the Metric block at address t without advancing any
  // cursor, so tracing leaves the trajectory unchanged.
  o.observer = [&](long t, const ChainState& lead, const ChainState* lag) {
    if (!lag) return;
    const double dh = metric_d_hat2(lead, *lag, cfg.hp.nu, R, kernel, static_cast<std::uint64_t>(t)).value;
    os << t << ',' << format_double(dh) << ',' << format_double(dbar(lead, *lag)) << ','
       << format_double(capped_l1(lead, *lag)) << ',' << format_double(drift_V(lead)) << '\n';
  };
  const MeetingRecord rec = run_coupled_pair(d, cfg.hp, cfg.strategy, seed, o);
  return rec.censored ? kAllCensored : kOk;
}

int cmd_synthetic(const ExperimentConfig& cfg, std::ostream& os) {
  if (cfg.data_source != "synthetic") throw ConfigError("synthetic needs data.source = synthetic");
  if (cfg.out.empty() || cfg.out == "-") throw ConfigError("synthetic needs --out <dataset path>");
  auto [d, truth] = generate_synthetic(cfg.n, cfg.p, cfg.s, cfg.sigma_star, cfg.data_seed);
  const bool binary = cfg.out.size() > 4 && cfg.out.ends_with(".bin");
  if (binary) write_dataset_binary(d, cfg.out);
  else write_dataset_csv(d, cfg.out);
  write_provenance(os, cfg);
  os << "j,beta_star\n";
  for (int j = 0; j < cfg.p; ++j) os << j + 1 << ',' << format_double(truth.beta_star[j]) << '\n';
  return kOk;
}

int run_command(const ExperimentConfig& cfg, std::ostream& os) {
  static const std::map<std::string, std::function<int(const ExperimentConfig&, std::ostream&)>> table = {
      {"sample", cmd_sample}, {"couple", cmd_couple}, {"tvbound", cmd_tvbound},
      {"mse", cmd_mse},       {"trace-metrics", cmd_trace_metrics}, {"synthetic", cmd_synthetic},
  };
  const auto it = table.find(cfg.command);
  if (it == table.end()) throw ConfigError("unknown command '" + cfg.command + "'");
  return it->second(cfg, os);
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DataError*>(&e)) return kConfigError;
  if (dynamic_cast<const AllCensoredError*>(&e)) return kAllCensored;
  return kNumericalFailure;
}

}  // namespace shrinkcoup::cli
