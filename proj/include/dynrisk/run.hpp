#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "dynrisk/actor.hpp"
#include "dynrisk/checkpoint.hpp"
#include "dynrisk/config.hpp"
#include "dynrisk/critic.hpp"
#include "dynrisk/nested_baseline.hpp"

namespace dynrisk {

struct RunLedger {
  std::int64_t iterations = 0;
  std::uint64_t critic_epochs = 0;
  std::uint64_t actor_epochs = 0;
  TransitionCounter critic_transitions;
  TransitionCounter actor_transitions;
  double critic_seconds = 0.0;
  double actor_seconds = 0.0;
};

/**
 * Everything a run owns: environment, policy, value model and optimizer
 * state. Built fresh from a config or restored from a checkpoint, then
 * advanced one outer iteration at a time (critic epochs, then actor epochs).
 *
 * Method "elicitable" trains a ValueEnsemble with the spectral score, or for
 * critic.model = exact (tree only) recomputes the policy's dynamic risk by
 * backward induction each iteration. Method "nested" trains a single value
 * net on inner-simulation targets.
 */
class TrainingSession {
 public:
  explicit TrainingSession(RunConfig config);
  static TrainingSession from_checkpoint(const Checkpoint& ck);
  static TrainingSession from_checkpoint(const std::filesystem::path& path);

  TrainingSession(TrainingSession&&) noexcept;
  ~TrainingSession();

  /// One outer iteration; returns the loss-trace rows it produced.
  std::vector<LossTraceRow> iterate();

  Checkpoint checkpoint() const;

  const RunConfig& config() const { return config_; }
  const Environment& env() const { return *env_; }
  const Policy& policy() const { return *policy_; }
  Policy& policy() { return *policy_; }
  /// The value model the actor uses: ensemble, nested net, or exact table.
  const ValueModel& value_model() const;
  const ValueEnsemble* ensemble() const { return ensemble_.get(); }
  const NestedValue* nested_value() const { return nested_.get(); }
  const RunLedger& ledger() const { return ledger_; }
  std::int64_t iteration() const { return ledger_.iterations; }

 private:
  TrainingSession() = default;
  void build(bool fresh);
  void refresh_exact_value();

  RunConfig config_;
  std::unique_ptr<Environment> env_;
  std::unique_ptr<Policy> policy_;
  std::unique_ptr<ValueEnsemble> ensemble_;
  std::unique_ptr<NestedValue> nested_;
  std::unique_ptr<TabularValueModel> exact_;
  std::unique_ptr<CriticTrainer> critic_;
  std::unique_ptr<ActorTrainer> actor_;
  std::unique_ptr<NestedCriticTrainer> nested_critic_;
  std::unique_ptr<NestedActorTrainer> nested_actor_;
  RunLedger ledger_;
};

/// Per-iteration progress hook (iteration index, rows just produced).
using ProgressFn = std::function<void(std::int64_t, const std::vector<LossTraceRow>&)>;

/**
 * cmd_train: writes config.ini (resolved) and checkpoint.txt before training.
 * With iterations > 0 it also writes loss_trace.csv, run_ledger.csv and
 * policy_grid.csv, plus snapshots/policy_grid_<iter>.csv every
 * snapshot_interval iterations. A numerical failure writes
 * checkpoint_abort.txt and the partial ledger before rethrowing.
 */
TrainingSession train_run(const RunConfig& config, const std::filesystem::path& out,
                          const ProgressFn& progress = {});

/// cmd_eval on a checkpoint; `config` (optional) must describe the same
/// environment as the checkpoint.
void eval_run(const std::filesystem::path& checkpoint, const std::filesystem::path& out,
              std::size_t episodes, std::uint64_t seed, std::size_t threads,
              const std::optional<RunConfig>& config = std::nullopt);

void write_run_ledger(const std::filesystem::path& path, const RunConfig& config,
                      const RunLedger& ledger);

}  // namespace dynrisk
