#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dynrisk/artifacts.hpp"
#include "dynrisk/config.hpp"
#include "dynrisk/run.hpp"
#include "dynrisk/simple_envs.hpp"
#include "dynrisk/statarb.hpp"
#include "helpers.hpp"

using namespace dynrisk;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Checkpoint text without the wall-clock line.
std::string timeless(const fs::path& p) {
  std::ifstream in(p);
  std::string out;
  for (std::string l; std::getline(in, l);) {
    if (l.rfind("a seconds ", 0) != 0) out += l + "\n";
  }
  return out;
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::string config_error(const std::string& text) {
  try {
    parse_config(text).validate();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

const char* kSmallStatArb = R"(
[run]
iterations = 2
seed = 5
[env]
kind = statarb
T = 3
[risk]
alpha = 0.6
[policy]
hidden = 4
depth = 2
[critic]
hidden = 4
depth = 2
epochs = 3
batch = 16
target_interval = 2
[actor]
epochs = 2
base_batch = 8
)";

}  // namespace

TEST_CASE("shipped configs parse and round-trip through to_ini") {
  for (const auto& entry : fs::recursive_directory_iterator(DYNRISK_TEST_CONFIG_DIR)) {
    if (entry.path().extension() != ".ini") continue;
    CAPTURE(entry.path().string());
    const RunConfig cfg = load_config(entry.path());
    cfg.validate();
    const RunConfig again = parse_config(cfg.to_ini());
    CHECK(again.to_ini() == cfg.to_ini());
  }
}

TEST_CASE("presets carry the documented hyperparameters") {
  const RunConfig s = preset("statarb");
  CHECK(s.iterations == 1500);
  CHECK(s.critic.epochs == 1000);
  CHECK(s.critic.batch == 750);
  CHECK(s.actor.base_batch == 500);
  CHECK(s.actor.lr.floor == 5e-4);
  const RunConfig p = preset("portfolio");
  CHECK(p.critic.batch == 1000);
  CHECK(preset("vecm").iterations == 4000);
  CHECK_THROWS_AS(preset("nope"), ConfigError);
}

TEST_CASE("config errors name the offending field") {
  CHECK(config_error("[critic]\nepochs = many\n").find("critic.epochs: expected an integer") == 0);
  CHECK(config_error("[critic]\nepoch = 3\n").find("critic.epoch: unknown key") == 0);
  CHECK(config_error("[bogus]\nx = 1\n").find("bogus: unknown section") == 0);
  CHECK(config_error("[risk]\nalpha = 0.5\nspectrum = 0.5:1\n").find("risk.alpha") == 0);
  CHECK(config_error("[risk]\nspectrum = 0.9:0.5, 0.5:0.5\n").find("risk.spectrum") == 0);
  CHECK(config_error("[actor]\ndrop_value_gradient = false\n").find("actor.drop_value_gradient") == 0);
  CHECK(config_error("[nested]\ninner_m = 1\n").find("nested.inner_m") == 0);
  CHECK(config_error("[critic]\nmodel = exact\n").find("critic.model") == 0);
  CHECK(config_error("[env]\nkind = statarb\nq_min = 3\nq_max = 1\n").find("env:") == 0);
  CHECK(config_error("[critic]\nlr_decay = 2\n").find("critic.lr_decay") == 0);
  CHECK(config_error("[env]\nkind = mars\n").find("env.kind") == 0);
  CHECK(config_error(kSmallStatArb).empty());
}

TEST_CASE("spectrum and correlation syntax") {
  const RunConfig a = parse_config("[risk]\nspectrum = 0.5:0.4, 0.9:0.6\n");
  CHECK(a.spectrum == Spectrum({0.5, 0.9}, {0.4, 0.6}));
  const RunConfig b = parse_config("[env]\nkind = portfolio\nrho = 0.3\n");
  CHECK(b.portfolio.rho(0, 2) == 0.3);
  const RunConfig c = parse_config(
      "[env]\nkind = portfolio\nrho = 1, 0.1, 0.2, 0.1, 1, 0.3, 0.2, 0.3, 1\ndynamics = gbm\n");
  CHECK(c.portfolio.rho(1, 2) == 0.3);
  CHECK(c.portfolio.dynamics[2] == AssetDynamics::gbm);
}

TEST_CASE("zero iterations writes the resolved config and an initial checkpoint") {
  const auto dir = testing::scratch("zero_iter");
  RunConfig cfg = parse_config(kSmallStatArb);
  cfg.iterations = 0;
  train_run(cfg, dir);
  CHECK(fs::exists(dir / "config.ini"));
  CHECK(fs::exists(dir / "checkpoint.txt"));
  CHECK_FALSE(fs::exists(dir / "loss_trace.csv"));
  const RunConfig back = load_config(dir / "config.ini");
  CHECK(back.cost_bound == doctest::Approx(cfg.statarb.default_cost_bound()));
}

TEST_CASE("training artifacts are deterministic for a fixed seed") {
  const auto a = testing::scratch("det_a"), b = testing::scratch("det_b"), c = testing::scratch("det_c");
  RunConfig cfg = parse_config(kSmallStatArb);
  cfg.snapshot_interval = 1;
  train_run(cfg, a);
  train_run(cfg, b);
  cfg.seed = 6;
  train_run(cfg, c);
  for (const char* f : {"loss_trace.csv", "policy_grid.csv", "config.ini"}) {
    CAPTURE(f);
    CHECK(slurp(a / f) == slurp(b / f));
  }
  CHECK(timeless(a / "checkpoint.txt") == timeless(b / "checkpoint.txt"));
  CHECK(slurp(a / "checkpoint.txt") != slurp(c / "checkpoint.txt"));
  CHECK(fs::exists(a / "snapshots" / "policy_grid_000002.csv"));
  const auto trace = lines(a / "loss_trace.csv");
  CHECK(trace.front() == "phase,iteration,epoch,loss,lr");
  CHECK(trace.size() == 1 + 2 * (3 + 2));
  const auto ledger = lines(a / "run_ledger.csv");
  REQUIRE(ledger.size() == 2);
  CHECK(ledger[1].rfind("elicitable,statarb,2,6,4,", 0) == 0);
}

TEST_CASE("resuming from a checkpoint continues the same run") {
  const auto full = testing::scratch("resume_full"), half = testing::scratch("resume_half");
  RunConfig cfg = parse_config(kSmallStatArb);
  const TrainingSession two = train_run(cfg, full);
  cfg.iterations = 1;
  train_run(cfg, half);
  TrainingSession resumed = TrainingSession::from_checkpoint(half / "checkpoint.txt");
  CHECK(resumed.iteration() == 1);
  resumed.iterate();
  CHECK(resumed.policy().parameters() == two.policy().parameters());
  CHECK(resumed.checkpoint().get_array("policy.mean.params") ==
        two.checkpoint().get_array("policy.mean.params"));
}

TEST_CASE("nested runs train and count inner transitions") {
  const auto dir = testing::scratch("nested_run");
  RunConfig cfg = parse_config(std::string(kSmallStatArb) + "[nested]\ninner_m = 5\n");
  cfg.method = "nested";
  cfg.validate();
  const TrainingSession s = train_run(cfg, dir);
  const auto& led = s.ledger();
  CHECK(led.critic_transitions.outer == 2u * 3u * 16u * 3u);
  CHECK(led.critic_transitions.total() == 5u * led.critic_transitions.outer);
}

TEST_CASE("evaluation with zero episodes writes headers only") {
  const auto dir = testing::scratch("eval_zero");
  const ConstantCostEnv env(3, 1.0);
  const ConstantPolicy policy(2, {0.0});
  write_evaluation(dir, env, policy, Spectrum::cvar(0.5), "elicitable", 0, 1, 1);
  CHECK(lines(dir / "pnl.csv").size() == 1);
  CHECK(lines(dir / "risk_summary.csv").size() == 1);
}

TEST_CASE("PnL of constant costs and of a zero-trade policy") {
  const auto dir = testing::scratch("eval_pnl");
  const ConstantCostEnv env(3, 0.5);
  const ConstantPolicy policy(2, {0.0});
  write_evaluation(dir, env, policy, Spectrum::cvar(0.5), "elicitable", 4, 1, 1);
  const auto pnl = lines(dir / "pnl.csv");
  CHECK(pnl.front() == "episode,period,wealth");
  REQUIRE(pnl.size() == 1 + 4 * 4);
  CHECK(pnl[1] == "0,0,0");
  CHECK(pnl[4] == "0,3,-1.5");
  const auto risk = lines(dir / "risk_summary.csv");
  REQUIRE(risk.size() == 2);
  CHECK(risk[1].rfind("elicitable,0.5,4,1.5,1.5,", 0) == 0);

  StatArbSpec spec;
  const StatArbEnv sa(spec);
  const ConstantPolicy hold(3, {sa.raw_for_trade(0.0)});
  const auto dir2 = testing::scratch("eval_hold");
  const EvaluationSummary sum = write_evaluation(dir2, sa, hold, Spectrum::cvar(0.5), "nested", 50, 2, 1);
  for (double v : sum.terminal_pnl) CHECK(v == 0.0);
  for (double v : sum.total_cost) CHECK(v == 0.0);
}

TEST_CASE("eval rejects a config for another environment") {
  const auto dir = testing::scratch("eval_mismatch");
  RunConfig cfg = parse_config(kSmallStatArb);
  cfg.iterations = 0;
  train_run(cfg, dir);
  RunConfig other = parse_config("[env]\nkind = constant\n");
  CHECK_THROWS_AS(eval_run(dir / "checkpoint.txt", dir, 10, 1, 1, other), CheckpointError);
  RunConfig longer = parse_config(kSmallStatArb);
  longer.statarb.T = 4;
  CHECK_THROWS_AS(eval_run(dir / "checkpoint.txt", dir, 10, 1, 1, longer), CheckpointError);
  eval_run(dir / "checkpoint.txt", dir, 20, 1, 1);
  CHECK(lines(dir / "pnl.csv").size() == 1 + 20 * 4);
  CHECK(lines(dir / "risk_summary.csv").size() == 2);
  CHECK(fs::exists(dir / "policy_grid.csv"));
}

TEST_CASE("missing or corrupt checkpoints raise CheckpointError") {
  const auto dir = testing::scratch("ckpt_missing");
  CHECK_THROWS_AS(TrainingSession::from_checkpoint(dir / "none.txt"), CheckpointError);
}
