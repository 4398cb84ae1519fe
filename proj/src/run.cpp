#include "dynrisk/run.hpp"

#include <chrono>
#include <cstdio>

#include "dynrisk/artifacts.hpp"
#include "dynrisk/simple_envs.hpp"
#include "dynrisk/tree.hpp"

namespace dynrisk {

namespace {

// Substreams of the run seed.
constexpr std::uint64_t kPolicyInit = 1;
constexpr std::uint64_t kCriticInit = 2;
constexpr std::uint64_t kCriticStream = 3;
constexpr std::uint64_t kActorStream = 4;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void restore_net(const Checkpoint& ck, const std::string& prefix, Mlp& net) {
  const Mlp saved = load_mlp(ck, prefix);
  if (!saved.same_architecture(net)) {
    throw CheckpointError(prefix + ": architecture differs from the checkpoint's config");
  }
  net.set_parameters(saved.parameters());
}

std::string snapshot_name(std::int64_t k) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "policy_grid_%06lld.csv", static_cast<long long>(k));
  return buf;
}

}  // namespace

TrainingSession::TrainingSession(RunConfig config) : config_(std::move(config)) { build(true); }
TrainingSession::TrainingSession(TrainingSession&&) noexcept = default;
TrainingSession::~TrainingSession() = default;

void TrainingSession::build(bool fresh) {
  config_.validate();
  env_ = make_environment(config_);
  if (fresh) config_.cost_bound = resolve_cost_bound(config_, *env_);
  config_.critic.cost_bound = config_.cost_bound;
  config_.critic.threads = config_.actor.threads = config_.threads;

  Rng policy_rng(derive_seed(config_.seed, kPolicyInit));
  policy_ = make_policy(config_, *env_, policy_rng);
  Rng critic_rng(derive_seed(config_.seed, kCriticInit));
  const std::uint64_t critic_seed = derive_seed(config_.seed, kCriticStream);
  const std::uint64_t actor_seed = derive_seed(config_.seed, kActorStream);

  if (config_.method == "nested") {
    nested_ = std::make_unique<NestedValue>(config_.spectrum, env_->state_dim(), config_.critic_hidden,
                                            config_.critic_depth, critic_rng, env_->input_affine());
    NestedConfig nc;
    nc.inner_M = config_.inner_M;
    nc.epochs = config_.critic.epochs;
    nc.batch = config_.critic.batch;
    nc.target_interval = config_.critic.target_interval;
    nc.lr = config_.critic.lr;
    nc.threads = config_.threads;
    nested_critic_ = std::make_unique<NestedCriticTrainer>(*nested_, nc, critic_seed);
    nested_actor_ = std::make_unique<NestedActorTrainer>(*policy_, config_.actor, config_.inner_M, actor_seed);
    return;
  }
  if (config_.critic_model == "exact") {
    refresh_exact_value();
  } else {
    ensemble_ = std::make_unique<ValueEnsemble>(config_.spectrum, env_->state_dim(), config_.critic_hidden,
                                                config_.critic_depth, critic_rng, env_->input_affine());
    critic_ = std::make_unique<CriticTrainer>(*ensemble_, config_.critic, critic_seed);
  }
  actor_ = std::make_unique<ActorTrainer>(*policy_, config_.actor, actor_seed);
}

void TrainingSession::refresh_exact_value() {
  const auto* tree = dynamic_cast<const TreeEnv*>(env_.get());
  const auto* tab = dynamic_cast<const TabularSoftmaxPolicy*>(policy_.get());
  if (!tree || !tab) throw ConfigError("critic.model: exact needs the tree environment");
  exact_ = std::make_unique<TabularValueModel>(
      config_.spectrum, tree_policy_risk(tree->mdp(), tab->table(), config_.spectrum));
}

const ValueModel& TrainingSession::value_model() const {
  if (nested_) return *nested_;
  if (exact_) return *exact_;
  return *ensemble_;
}

std::vector<LossTraceRow> TrainingSession::iterate() {
  const std::int64_t k = ledger_.iterations + 1;
  std::vector<LossTraceRow> rows;
  auto t0 = std::chrono::steady_clock::now();
  if (nested_) {
    rows = nested_critic_->train(*env_, *policy_, k, &ledger_.critic_transitions);
  } else if (ensemble_) {
    rows = critic_->train(*env_, *policy_, k, &ledger_.critic_transitions);
  } else {
    refresh_exact_value();
  }
  ledger_.critic_seconds += seconds_since(t0);
  ledger_.critic_epochs += exact_ ? 0 : static_cast<std::uint64_t>(config_.critic.epochs);

  t0 = std::chrono::steady_clock::now();
  std::vector<LossTraceRow> actor_rows =
      nested_ ? nested_actor_->train(*env_, *nested_, k, &ledger_.actor_transitions)
              : actor_->train(*env_, value_model(), k, &ledger_.actor_transitions);
  ledger_.actor_seconds += seconds_since(t0);
  ledger_.actor_epochs += static_cast<std::uint64_t>(config_.actor.epochs);
  if (exact_) refresh_exact_value();
  rows.insert(rows.end(), actor_rows.begin(), actor_rows.end());
  ledger_.iterations = k;
  return rows;
}

Checkpoint TrainingSession::checkpoint() const {
  Checkpoint ck;
  ck.config_text = config_.to_ini();
  ck.set("method", config_.method);
  ck.set("env", env_->kind());
  ck.set_int("iterations", ledger_.iterations);
  ck.set_int("critic_epochs", static_cast<std::int64_t>(ledger_.critic_epochs));
  ck.set_int("actor_epochs", static_cast<std::int64_t>(ledger_.actor_epochs));
  ck.set_array("transitions", {static_cast<double>(ledger_.critic_transitions.outer),
                               static_cast<double>(ledger_.critic_transitions.inner),
                               static_cast<double>(ledger_.actor_transitions.outer),
                               static_cast<double>(ledger_.actor_transitions.inner)});
  ck.set_array("seconds", {ledger_.critic_seconds, ledger_.actor_seconds});
  store_policy(ck, "policy", *policy_);
  if (nested_) {
    store_mlp(ck, "value.net", nested_->net());
    store_mlp(ck, "value.target", nested_->target());
    store_adam(ck, "value.adam", nested_critic_->optimizer());
    ck.set_int("critic.stream", static_cast<std::int64_t>(nested_critic_->epochs_run()));
    store_adam(ck, "actor.adam", nested_actor_->optimizer());
    ck.set_int("actor.stream", static_cast<std::int64_t>(nested_actor_->epochs_run()));
    return ck;
  }
  if (ensemble_) {
    ck.set_int("ensemble.size", static_cast<std::int64_t>(ensemble_->size()));
    for (std::size_t l = 0; l < ensemble_->size(); ++l) {
      const std::string p = "ensemble." + std::to_string(l);
      store_mlp(ck, p + ".net", ensemble_->net(l));
      store_mlp(ck, p + ".target", ensemble_->target(l));
      store_adam(ck, p + ".adam", critic_->optimizers()[l]);
    }
    ck.set_int("critic.stream", static_cast<std::int64_t>(critic_->epochs_run()));
  }
  store_adam(ck, "actor.adam", actor_->optimizer());
  ck.set_int("actor.stream", static_cast<std::int64_t>(actor_->epochs_run()));
  return ck;
}

TrainingSession TrainingSession::from_checkpoint(const Checkpoint& ck) {
  TrainingSession s;
  s.config_ = parse_config(ck.config_text);
  if (s.config_.cost_bound <= 0.0) throw CheckpointError("checkpoint config has no resolved cost bound");
  s.build(false);
  if (ck.get("env") != s.env_->kind() || ck.get("method") != s.config_.method) {
    throw CheckpointError("checkpoint header does not match its config");
  }
  auto policy = load_policy(ck, "policy");
  if (policy->kind() != s.policy_->kind() || policy->num_parameters() != s.policy_->num_parameters() ||
      policy->state_dim() != s.env_->state_dim()) {
    throw CheckpointError("checkpoint policy does not fit the environment");
  }
  s.policy_->set_parameters(policy->parameters());

  s.ledger_.iterations = ck.get_int("iterations");
  s.ledger_.critic_epochs = static_cast<std::uint64_t>(ck.get_int("critic_epochs"));
  s.ledger_.actor_epochs = static_cast<std::uint64_t>(ck.get_int("actor_epochs"));
  const auto& tr = ck.get_array("transitions");
  const auto& sec = ck.get_array("seconds");
  if (tr.size() != 4 || sec.size() != 2) throw CheckpointError("malformed run counters");
  s.ledger_.critic_transitions = {static_cast<std::uint64_t>(tr[0]), static_cast<std::uint64_t>(tr[1])};
  s.ledger_.actor_transitions = {static_cast<std::uint64_t>(tr[2]), static_cast<std::uint64_t>(tr[3])};
  s.ledger_.critic_seconds = sec[0];
  s.ledger_.actor_seconds = sec[1];

  if (s.nested_) {
    restore_net(ck, "value.net", s.nested_->net());
    restore_net(ck, "value.target", s.nested_->target());
    load_adam(ck, "value.adam", s.nested_critic_->optimizer());
    s.nested_critic_->set_epochs_run(static_cast<std::uint64_t>(ck.get_int("critic.stream")));
    load_adam(ck, "actor.adam", s.nested_actor_->optimizer());
    s.nested_actor_->set_epochs_run(static_cast<std::uint64_t>(ck.get_int("actor.stream")));
    return s;
  }
  if (s.ensemble_) {
    if (ck.get_int("ensemble.size") != static_cast<std::int64_t>(s.ensemble_->size())) {
      throw CheckpointError("checkpoint ensemble size does not match the spectrum");
    }
    for (std::size_t l = 0; l < s.ensemble_->size(); ++l) {
      const std::string p = "ensemble." + std::to_string(l);
      restore_net(ck, p + ".net", s.ensemble_->net(l));
      restore_net(ck, p + ".target", s.ensemble_->target(l));
      load_adam(ck, p + ".adam", s.critic_->optimizers()[l]);
    }
    s.critic_->set_epochs_run(static_cast<std::uint64_t>(ck.get_int("critic.stream")));
  } else {
    s.refresh_exact_value();
  }
  load_adam(ck, "actor.adam", s.actor_->optimizer());
  s.actor_->set_epochs_run(static_cast<std::uint64_t>(ck.get_int("actor.stream")));
  return s;
}

TrainingSession TrainingSession::from_checkpoint(const std::filesystem::path& path) {
  return from_checkpoint(Checkpoint::load(path));
}

void write_run_ledger(const std::filesystem::path& path, const RunConfig& config,
                      const RunLedger& ledger) {
  CsvWriter csv(path, {"method", "env", "iterations", "critic_epochs", "actor_epochs",
                       "critic_outer_transitions", "critic_inner_transitions",
                       "critic_total_transitions", "actor_outer_transitions",
                       "actor_inner_transitions", "critic_seconds", "actor_seconds",
                       "total_seconds"});
  csv.field(config.method).field(config.env).field(ledger.iterations)
      .field(ledger.critic_epochs).field(ledger.actor_epochs)
      .field(ledger.critic_transitions.outer).field(ledger.critic_transitions.inner)
      .field(ledger.critic_transitions.total()).field(ledger.actor_transitions.outer)
      .field(ledger.actor_transitions.inner).field(ledger.critic_seconds)
      .field(ledger.actor_seconds).field(ledger.critic_seconds + ledger.actor_seconds);
  csv.end_row();
}

TrainingSession train_run(const RunConfig& config, const std::filesystem::path& out,
                          const ProgressFn& progress) {
  TrainingSession session(config);
  std::filesystem::create_directories(out);
  {
    std::FILE* f = std::fopen((out / "config.ini").c_str(), "w");
    if (!f) throw std::runtime_error("cannot write " + (out / "config.ini").string());
    const std::string text = session.config().to_ini();
    std::fwrite(text.data(), 1, text.size(), f);
    std::fclose(f);
  }
  session.checkpoint().save(out / "checkpoint.txt");
  const RunConfig& cfg = session.config();
  if (cfg.iterations == 0) return session;

  const auto trace = out / "loss_trace.csv";
  std::filesystem::remove(trace);
  for (int k = 1; k <= cfg.iterations; ++k) {
    std::vector<LossTraceRow> rows;
    try {
      rows = session.iterate();
    } catch (const std::exception&) {
      session.checkpoint().save(out / "checkpoint_abort.txt");
      write_run_ledger(out / "run_ledger.csv", cfg, session.ledger());
      throw;
    }
    append_loss_trace(trace, rows);
    if (progress) progress(k, rows);
    if (cfg.snapshot_interval > 0 && k % cfg.snapshot_interval == 0) {
      write_policy_grid(out / "snapshots" / snapshot_name(k), session.env(), session.policy(),
                        cfg.grid_points);
    }
  }
  session.checkpoint().save(out / "checkpoint.txt");
  write_run_ledger(out / "run_ledger.csv", cfg, session.ledger());
  write_policy_grid(out / "policy_grid.csv", session.env(), session.policy(), cfg.grid_points);
  return session;
}

void eval_run(const std::filesystem::path& checkpoint, const std::filesystem::path& out,
              std::size_t episodes, std::uint64_t seed, std::size_t threads,
              const std::optional<RunConfig>& config) {
  TrainingSession session = TrainingSession::from_checkpoint(checkpoint);
  std::unique_ptr<Environment> other;
  if (config) {
    other = make_environment(*config);
    const Environment& mine = session.env();
    if (other->kind() != mine.kind() || other->state_dim() != mine.state_dim() ||
        other->raw_action_dim() != mine.raw_action_dim() || other->horizon() != mine.horizon()) {
      throw CheckpointError("checkpoint/env mismatch: checkpoint was trained on " + mine.kind() +
                            " (T=" + std::to_string(mine.horizon()) + ") but the config gives " +
                            other->kind() + " (T=" + std::to_string(other->horizon()) + ")");
    }
  }
  const Environment& env = other ? *other : session.env();
  const Spectrum& spectrum = config ? config->spectrum : session.config().spectrum;
  write_evaluation(out, env, session.policy(), spectrum, session.config().method, episodes, seed, threads);
  write_policy_grid(out / "policy_grid.csv", env, session.policy(), session.config().grid_points);
}

}  // namespace dynrisk
