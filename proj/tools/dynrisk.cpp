// dynrisk: train, evaluate and check risk-sensitive actor-critic runs.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "dynrisk/artifacts.hpp"
#include "dynrisk/checkpoint.hpp"
#include "dynrisk/config.hpp"
#include "dynrisk/oracle_suites.hpp"
#include "dynrisk/run.hpp"
#include "dynrisk/scoring.hpp"

namespace fs = std::filesystem;
using namespace dynrisk;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> threads;
  std::optional<int> iterations;
};

RunConfig resolve(const Common& c) {
  RunConfig cfg = c.config.empty() ? preset("statarb") : load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.threads) cfg.threads = *c.threads;
  if (c.iterations) cfg.iterations = *c.iterations;
  if (!c.out.empty()) cfg.output = c.out;
  cfg.critic.threads = cfg.actor.threads = cfg.threads;
  cfg.validate();
  return cfg;
}

int cmd_train(const Common& c, bool quiet) {
  const RunConfig cfg = resolve(c);
  const fs::path out = cfg.output;
  auto progress = [&](std::int64_t k, const std::vector<LossTraceRow>& rows) {
    if (quiet || rows.empty()) return;
    double critic = NAN, actor = NAN;
    for (const auto& r : rows) (r.phase == "actor" ? actor : critic) = r.loss;
    std::fprintf(stderr, "iteration %lld/%d  critic %.6g  actor %.6g\n", static_cast<long long>(k),
                 cfg.iterations, critic, actor);
  };
  const TrainingSession s = train_run(cfg, out, progress);
  std::fprintf(stderr, "wrote %s (%lld iterations, %llu critic transitions)\n", out.c_str(),
               static_cast<long long>(s.iteration()),
               static_cast<unsigned long long>(s.ledger().critic_transitions.total()));
  return 0;
}

int cmd_eval(const Common& c, const std::string& checkpoint, std::size_t episodes) {
  fs::path ck = checkpoint;
  if (ck.empty()) {
    if (c.out.empty()) throw std::invalid_argument("eval needs --checkpoint or --out <run directory>");
    ck = fs::path(c.out) / "checkpoint.txt";
  }
  const fs::path out = c.out.empty() ? ck.parent_path() : fs::path(c.out);
  std::optional<RunConfig> cfg;
  if (!c.config.empty()) cfg = load_config(c.config);
  const std::uint64_t seed = c.seed.value_or(derive_seed(1, 0x6576616cULL));
  eval_run(ck, out, episodes, seed, c.threads.value_or(1), cfg);
  std::fprintf(stderr, "wrote risk_summary.csv, pnl.csv, policy_grid.csv to %s\n", out.c_str());
  return 0;
}

int cmd_oracle(const std::string& suite, std::uint64_t seed) {
  const auto checks = run_oracle_suite(suite, seed);
  bool ok = true;
  for (const auto& chk : checks) {
    nlohmann::json j{{"suite", chk.suite},   {"check", chk.name},         {"passed", chk.passed},
                     {"value", chk.value},   {"expected", chk.expected},  {"tolerance", chk.tolerance},
                     {"detail", chk.detail}};
    std::cout << j.dump() << "\n";
    ok = ok && chk.passed;
  }
  return ok ? 0 : 1;
}

int cmd_simulate(const Common& c, const std::string& checkpoint, std::size_t episodes) {
  RunConfig cfg = resolve(c);
  std::unique_ptr<Environment> env;
  std::unique_ptr<Policy> policy;
  std::optional<TrainingSession> session;
  if (!checkpoint.empty()) {
    session.emplace(TrainingSession::from_checkpoint(fs::path(checkpoint)));
    policy = session->policy().clone();
    env = make_environment(session->config());
  } else {
    env = make_environment(cfg);
    // Raw zero: the mid trade for stat-arb, equal weights for portfolios.
    policy = std::make_unique<ConstantPolicy>(env->state_dim(), std::vector<double>(env->raw_action_dim(), 0.0));
  }
  const fs::path out = fs::path(cfg.output) / "rollouts.csv";
  write_rollouts(out, *env, *policy, episodes, cfg.seed, cfg.threads);
  std::fprintf(stderr, "wrote %s\n", out.c_str());
  return 0;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "INI run configuration");
  app->add_option("--seed", c.seed, "Override run.seed");
  app->add_option("--out", c.out, "Output directory");
  app->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
  app->add_option("--iterations", c.iterations, "Override run.iterations")->check(CLI::NonNegativeNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Risk-sensitive actor-critic with elicitable dynamic risk"};
  app.require_subcommand(1);

  Common train_opts, eval_opts, sim_opts;
  bool quiet = false;
  auto* train = app.add_subcommand("train", "Train a policy and write run artifacts");
  add_common(train, train_opts);
  train->add_flag("--quiet", quiet, "No per-iteration progress");

  std::string checkpoint;
  std::size_t episodes = 10000;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint: risk_summary, pnl, policy grid");
  add_common(eval, eval_opts);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file (default <out>/checkpoint.txt)");
  eval->add_option("--episodes", episodes, "Evaluation episodes");

  std::string suite = "all";
  std::uint64_t oracle_seed = 1;
  auto* oracle = app.add_subcommand("oracle", "Run oracle suites and print JSON lines");
  oracle->add_option("suite", suite, "tree | cvar | grad | all")
      ->check(CLI::IsMember(oracle_suite_names()));
  oracle->add_option("--seed", oracle_seed, "Seed for randomized checks");

  std::string sim_checkpoint;
  std::size_t sim_episodes = 100;
  auto* simulate = app.add_subcommand("simulate", "Environment rollouts to rollouts.csv");
  add_common(simulate, sim_opts);
  simulate->add_option("--checkpoint", sim_checkpoint, "Policy checkpoint (default: raw-zero policy)");
  simulate->add_option("--episodes", sim_episodes, "Episodes to simulate");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) return cmd_train(train_opts, quiet);
    if (*eval) return cmd_eval(eval_opts, checkpoint, episodes);
    if (*oracle) return cmd_oracle(suite, oracle_seed);
    if (*simulate) return cmd_simulate(sim_opts, sim_checkpoint, sim_episodes);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const CheckpointError& e) {
    std::fprintf(stderr, "checkpoint error: %s\n", e.what());
    return 3;
  } catch (const ScoreDomainError& e) {
    std::fprintf(stderr, "cost bound exceeded: %s (raise risk.cost_bound)\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
