#include "dynrisk/critic.hpp"

#include <cmath>
#include <stdexcept>

#include "dynrisk/policy.hpp"
#include "dynrisk/scoring.hpp"

namespace dynrisk {

ValueOutput compose_value(const Spectrum& spectrum, const Eigen::MatrixXd& heads) {
  const auto M = static_cast<Eigen::Index>(spectrum.size());
  if (heads.rows() != M + 1) {
    throw std::invalid_argument("compose_value: expected " + std::to_string(M + 1) + " heads, got " +
                                std::to_string(heads.rows()));
  }
  ValueOutput out;
  out.var_levels.resize(M, heads.cols());
  out.value = heads.row(M).transpose();
  Eigen::RowVectorXd running = Eigen::RowVectorXd::Zero(heads.cols());
  for (Eigen::Index m = 0; m < M; ++m) {
    running += heads.row(m);
    out.var_levels.row(m) = running;
    out.value += spectrum.weight(static_cast<std::size_t>(m)) * running.transpose();
  }
  return out;
}

ValueEnsemble::ValueEnsemble(Spectrum spectrum, std::size_t state_dim, std::size_t hidden,
                             std::size_t depth, Rng& rng, const InputAffine& affine)
    : spectrum_(std::move(spectrum)) {
  const auto layout = mlp_layout(state_dim, hidden, depth, 1);
  for (std::size_t l = 0; l <= spectrum_.size(); ++l) {
    nets_.emplace_back(layout, l == 0 ? OutputActivation::identity() : OutputActivation::softplus());
    nets_.back().init_glorot(rng);
    nets_.back().set_input_affine(affine);
  }
  targets_ = nets_;
}

ValueEnsemble::ValueEnsemble(Spectrum spectrum, std::vector<Mlp> nets)
    : spectrum_(std::move(spectrum)), nets_(std::move(nets)) {
  if (nets_.size() != spectrum_.size() + 1) {
    throw std::invalid_argument("ensemble needs one net per spectrum atom plus one");
  }
  for (std::size_t l = 0; l < nets_.size(); ++l) {
    const auto want = l == 0 ? OutputActivation::Kind::identity : OutputActivation::Kind::softplus;
    if (nets_[l].output_activation().kind != want || nets_[l].output_dim() != 1 ||
        nets_[l].input_dim() != nets_[0].input_dim()) {
      throw std::invalid_argument("ensemble net " + std::to_string(l) + " has the wrong shape");
    }
  }
  targets_ = nets_;
}

Eigen::MatrixXd ValueEnsemble::heads(const std::vector<Mlp>& nets, const Eigen::MatrixXd& states) {
  Eigen::MatrixXd h(static_cast<Eigen::Index>(nets.size()), states.cols());
  for (std::size_t l = 0; l < nets.size(); ++l) {
    h.row(static_cast<Eigen::Index>(l)) = nets[l].forward(states);
  }
  return h;
}

ValueOutput ValueEnsemble::evaluate(const Eigen::MatrixXd& states) const {
  return compose_value(spectrum_, heads(nets_, states));
}

ValueOutput ValueEnsemble::evaluate_target(const Eigen::MatrixXd& states) const {
  return compose_value(spectrum_, heads(targets_, states));
}

void ValueEnsemble::sync_targets() {
  for (std::size_t l = 0; l < nets_.size(); ++l) sync_target(nets_[l], targets_[l]);
}

TabularValueModel::TabularValueModel(Spectrum spectrum, std::vector<TreeRiskLevels> levels)
    : spectrum_(std::move(spectrum)), levels_(std::move(levels)) {}

ValueOutput TabularValueModel::evaluate(const Eigen::MatrixXd& states) const {
  const auto M = static_cast<Eigen::Index>(spectrum_.size());
  ValueOutput out{Eigen::MatrixXd(M, states.cols()), Eigen::VectorXd(states.cols())};
  for (Eigen::Index j = 0; j < states.cols(); ++j) {
    const auto id = static_cast<std::size_t>(std::llround(states(1, j)));
    const auto& lv = levels_.at(id);
    for (Eigen::Index m = 0; m < M; ++m) {
      // Leaves carry no VaR levels; the actor never asks for them.
      out.var_levels(m, j) = lv.var_levels.empty() ? 0.0 : lv.var_levels[static_cast<std::size_t>(m)];
    }
    out.value(j) = lv.value;
  }
  return out;
}

Eigen::VectorXd running_targets(const ValueEnsemble& ensemble, const EpisodeBatch& batch) {
  Eigen::VectorXd y = batch.costs;
  if (batch.horizon > 1) {
    const ValueOutput next = ensemble.evaluate_target(batch.next_states());
    for (std::size_t b = 0; b < batch.episodes; ++b) {
      for (int t = 0; t + 1 < batch.horizon; ++t) {
        const auto n = static_cast<Eigen::Index>(batch.step_col(b, t));
        y(n) += next.value(n);
      }
    }
  }
  return y;
}

double critic_loss(const ValueEnsemble& ensemble, const EpisodeBatch& batch, double C,
                   std::vector<std::vector<double>>* grads) {
  const Spectrum& sp = ensemble.spectrum();
  const std::size_t M = sp.size();
  const std::size_t K = ensemble.size();
  const Eigen::MatrixXd X = batch.decision_states();
  const Eigen::Index N = X.cols();

  std::vector<MlpTape> tapes(K);
  Eigen::MatrixXd H(static_cast<Eigen::Index>(K), N);
  for (std::size_t l = 0; l < K; ++l) {
    H.row(static_cast<Eigen::Index>(l)) = ensemble.net(l).forward(X, grads ? &tapes[l] : nullptr);
  }
  const ValueOutput est = compose_value(sp, H);
  const Eigen::VectorXd y = running_targets(ensemble, batch);

  Eigen::MatrixXd dH = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K), N);
  std::vector<double> var(M), d_var(M);
  double loss = 0.0;
  for (std::size_t b = 0; b < batch.episodes; ++b) {
    for (int t = 0; t < batch.horizon; ++t) {
      const auto n = static_cast<Eigen::Index>(batch.step_col(b, t));
      const std::string where = " at (t=" + std::to_string(t) + ", b=" + std::to_string(b) + ")";
      if (!(y(n) + C > 0.0) || !std::isfinite(y(n))) throw ScoreDomainError("y" + where, y(n), C);
      if (!(est.value(n) + C > 0.0) || !std::isfinite(est.value(n))) {
        throw ScoreDomainError("risk" + where, est.value(n), C);
      }
      for (std::size_t m = 0; m < M; ++m) var[m] = est.var_levels(static_cast<Eigen::Index>(m), n);
      if (!grads) {
        loss += score_spectral_raw(var, est.value(n), y(n), sp, C);
        continue;
      }
      double d_risk = 0.0;
      loss += score_spectral_grad(var, est.value(n), y(n), sp, C, d_var, d_risk);
      // Chain rule through the composition: dvar_m/dH_l = 1{l<=m},
      // dvalue/dH_l = sum_{m>=l} p_m for l<k and 1 for H_k.
      double acc = 0.0;
      for (std::size_t m = M; m-- > 0;) {
        acc += d_var[m] + d_risk * sp.weight(m);
        dH(static_cast<Eigen::Index>(m), n) = acc;
      }
      dH(static_cast<Eigen::Index>(M), n) = d_risk;
    }
  }
  if (grads) {
    grads->assign(K, {});
    for (std::size_t l = 0; l < K; ++l) {
      (*grads)[l].assign(ensemble.net(l).num_parameters(), 0.0);
      ensemble.net(l).backward(tapes[l], dH.row(static_cast<Eigen::Index>(l)), (*grads)[l]);
    }
  }
  return loss;
}

CriticTrainer::CriticTrainer(ValueEnsemble& ensemble, CriticConfig config, std::uint64_t seed)
    : ensemble_(ensemble), config_(config), seed_(seed) {
  if (config_.target_interval < 1) throw std::invalid_argument("target interval must be >= 1");
  if (config_.batch < 1) throw std::invalid_argument("critic batch must be >= 1");
  for (std::size_t l = 0; l < ensemble_.size(); ++l) {
    opt_.emplace_back(ensemble_.net(l).num_parameters(), config_.lr);
  }
}

std::vector<LossTraceRow> CriticTrainer::train(const Environment& env, const Policy& policy,
                                               std::int64_t iteration, TransitionCounter* counter) {
  std::vector<LossTraceRow> trace;
  std::vector<std::vector<double>> grads;
  for (int k1 = 1; k1 <= config_.epochs; ++k1) {
    const EpisodeBatch batch =
        simulate_batch(env, policy, config_.batch, derive_seed(seed_, epochs_), config_.threads);
    if (counter) counter->outer += batch.transitions();
    const double lr = opt_.front().learning_rate();
    const double loss = critic_loss(ensemble_, batch, config_.cost_bound, &grads);
    if (!std::isfinite(loss)) {
      throw NumericalError("critic loss is not finite at iteration " + std::to_string(iteration) +
                           ", epoch " + std::to_string(k1));
    }
    for (std::size_t l = 0; l < ensemble_.size(); ++l) {
      ensemble_.net(l).check_finite(grads[l], "critic net H" + std::to_string(l + 1));
      opt_[l].step(ensemble_.net(l).parameters(), grads[l]);
      opt_[l].end_epoch();
    }
    if (k1 % config_.target_interval == 0) ensemble_.sync_targets();
    trace.push_back({"critic", iteration, k1, loss, lr});
    ++epochs_;
  }
  return trace;
}

}  // namespace dynrisk
