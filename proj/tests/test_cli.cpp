#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "shrinkcoup/cli.hpp"

using namespace shrinkcoup;
using namespace shrinkcoup::cli;

namespace {

const std::vector<std::string> kSmall = {"data.n=30", "data.p=20", "data.s=4", "run.replicates=6",
                                         "run.max_iter=3000", "run.wall_time=false"};

std::vector<std::string> with(std::vector<std::string> base, std::initializer_list<std::string> extra) {
  base.insert(base.end(), extra);
  return base;
}

std::string run_to_string(const std::string& cmd, const std::vector<std::string>& sets, std::uint64_t seed = 5,
                          int workers = 1, int* rc = nullptr) {
  const ExperimentConfig cfg = resolve_config(cmd, "", sets, seed, workers);
  std::ostringstream os;
  const int code = run_command(cfg, os);
  if (rc) *rc = code;
  return os.str();
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("shrinkcoup_cli_" + name)).string();
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(SHRINKCOUP_BIN) + " " + args + " > /dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

}  // namespace

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("configuration layering") {
  const std::string path = temp_path("cfg.ini");
  {
    std::ofstream f(path);
    f << "# desk run\npreset = fig3\n[data]\np = 50\n[prior]\nnu = 2\n";
  }
  ExperimentConfig c = resolve_config("couple", path, {"prior.nu=1.5"}, 9, 3);
  CHECK(c.p == 50);
  CHECK(c.n == 100);
  CHECK(c.hp.nu == 1.5);
  CHECK(c.strategy.kind == StrategyKind::TwoScale);
  CHECK(c.strategy.d0 == 0.5);
  CHECK(c.seed == 9);
  CHECK(c.workers == 3);

  // Workers do not enter the hash; settings and seed do.
  CHECK(resolve_config("couple", path, {"prior.nu=1.5"}, 9, 1).hash() == c.hash());
  CHECK(resolve_config("couple", path, {"prior.nu=1.6"}, 9, 3).hash() != c.hash());
  CHECK(resolve_config("couple", path, {"prior.nu=1.5"}, 10, 3).hash() != c.hash());

  for (const auto& name : preset_names()) CHECK_NOTHROW(resolve_config("couple", "", {"preset=" + name}, 1, 1));
  CHECK(resolve_config("mse", "", {"preset=fig4b"}, 1, 1).nu_list.size() == 6);
  CHECK(resolve_config("couple", "", {"preset=fig5-small"}, 1, 1).L_auto);
  CHECK(default_burn_in(1.0) == 600);
  CHECK(default_burn_in(1.2) == 300);

  CHECK_THROWS_AS(resolve_config("couple", "", {"prior.mu=1"}, 1, 1), ConfigError);
  CHECK_THROWS_AS(resolve_config("couple", "", {"prior.nu"}, 1, 1), ConfigError);
  CHECK_THROWS_AS(resolve_config("couple", "", {"prior.nu=abc"}, 1, 1), ConfigError);
  CHECK_THROWS_AS(resolve_config("couple", "", {"prior.nu=-1"}, 1, 1), ConfigError);
  CHECK_THROWS_AS(resolve_config("couple", "", {"coupling.strategy=psychic"}, 1, 1), ConfigError);
  CHECK_THROWS_AS(resolve_config("couple", "", {"preset=fig9"}, 1, 1), ConfigError);
  CHECK_THROWS_AS(resolve_config("couple", "", {"coupling.d0=1.5"}, 1, 1), ConfigError);
  CHECK_THROWS_AS(resolve_config("dance", "", {}, 1, 1), ConfigError);
  CHECK_THROWS_AS(resolve_config("couple", temp_path("missing.ini"), {}, 1, 1), ConfigError);
  std::remove(path.c_str());
}

TEST_CASE("fleet runner keeps job order") {
  const auto out = run_fleet(50, 4, [](int j) { return j * j; });
  for (int j = 0; j < 50; ++j) CHECK(out[j] == j * j);
  CHECK_THROWS_AS(run_fleet(10, 3, [](int j) -> int {
                    if (j == 7) throw ConvergenceError("boom");
                    return j;
                  }),
                  ConvergenceError);
}

TEST_CASE("couple command") {
  SUBCASE("forced-equal start meets at L") {
    const auto out = lines(run_to_string("couple", with(kSmall, {"coupling.force_equal_start=true", "coupling.L=7",
                                                                  "run.replicates=1"})));
    REQUIRE(out.size() == 3);
    CHECK(out[0].starts_with("# seed=5 version=0.1.0 config_hash="));
    CHECK(out[1] == "replicate,seed,strategy,d0,R,L,tau,censored,wall_time_s");
    CHECK(out[2].find(",two-scale,0.5,1,7,7,0,0") != std::string::npos);
  }

  SUBCASE("deterministic across reruns and worker counts") {
    const std::string a = run_to_string("couple", kSmall, 5, 1);
    const std::string b = run_to_string("couple", kSmall, 5, 1);
    const std::string c = run_to_string("couple", kSmall, 5, 3);
    CHECK(a == b);
    CHECK(a == c);
    CHECK(a != run_to_string("couple", kSmall, 6, 1));
  }

  SUBCASE("all censored") {
    int rc = -1;
    run_to_string("couple", with(kSmall, {"coupling.strategy=crn", "run.max_iter=2"}), 5, 1, &rc);
    CHECK(rc == kAllCensored);
  }
}

TEST_CASE("tvbound from a meetings file matches a fresh fleet") {
  const std::string meetings = temp_path("meetings.csv");
  {
    std::ofstream f(meetings);
    f << run_to_string("couple", kSmall);
  }
  const auto fresh = lines(run_to_string("tvbound", kSmall));
  const auto reread = lines(run_to_string("tvbound", with(kSmall, {"run.meetings=" + meetings})));
  REQUIRE(fresh.size() == reread.size());
  CHECK(fresh[1] == "t,bound,n_pairs,n_censored");
  for (std::size_t i = 1; i < fresh.size(); ++i) CHECK(fresh[i] == reread[i]);
  CHECK(fresh.back().find(",0,6,0") != std::string::npos);
  std::remove(meetings.c_str());
}

TEST_CASE("remaining commands write their schemas") {
  auto sample = lines(run_to_string("sample", with(kSmall, {"run.iterations=5", "run.beta_columns=3"})));
  CHECK(sample[1] == "iter,sigma2,xi,log_lik,beta_1,beta_2,beta_3");
  CHECK(sample.size() == 2 + 6);

  auto mse = lines(run_to_string("mse", with(kSmall, {"run.replicates=2", "run.nu_list=1,2", "run.chain_length=20",
                                                      "run.burn_in=10"})));
  CHECK(mse[1] == "replicate,nu,burn_in,mse");
  CHECK(mse.size() == 2 + 4);
  CHECK(mse[2].starts_with("0,1,10,"));
  CHECK(mse[5].starts_with("1,2,10,"));

  auto trace = lines(run_to_string("trace-metrics", with(kSmall, {"coupling.L=2"})));
  CHECK(trace[1] == "t,d_hat2,dbar,capped_l1,drift_V");
  CHECK(trace[2].starts_with("2,"));

  // Tracing does not perturb the pair: the last traced t is the meeting time.
  auto couple = lines(run_to_string("couple", with(kSmall, {"coupling.L=2", "run.replicates=1"})));
  const std::string& last = trace.back();
  const std::string tau = couple[2].substr(0, couple[2].rfind(",0,0"));
  CHECK(last.substr(0, last.find(',')) == tau.substr(tau.rfind(',') + 1));
}

TEST_CASE("binary exit codes") {
  const std::string out = temp_path("bin.csv");
  const std::string small = " --set data.n=30 data.p=20 data.s=4 run.replicates=2 run.max_iter=2000 ";
  CHECK(run_binary("couple" + small + "--out " + out) == 0);
  CHECK(std::filesystem::exists(out));
  CHECK(run_binary("couple" + small + "prior.nu=-3 --out " + out) == 2);
  CHECK(run_binary("couple --config " + temp_path("nope.ini") + " --out " + out) == 2);
  CHECK(run_binary("couple" + small + "coupling.strategy=crn run.max_iter=2 --out " + out) == 4);
  CHECK(run_binary("frobnicate") == 2);
  CHECK(run_binary("sample --set data.source=" + temp_path("absent.csv") + " --out " + out) == 2);
  std::remove(out.c_str());

  CHECK(exit_code_for(ConvergenceError("x")) == kNumericalFailure);
  CHECK(exit_code_for(FactorizationError("x")) == kNumericalFailure);
  CHECK(exit_code_for(AllCensoredError("x")) == kAllCensored);
  CHECK(exit_code_for(DataError("x")) == kConfigError);
}
