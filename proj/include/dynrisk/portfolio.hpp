#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dynrisk/environment.hpp"

namespace dynrisk {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Risky-asset price engine driven one decision period at a time.
class PriceModel {
 public:
  virtual ~PriceModel() = default;
  virtual std::string kind() const = 0;
  virtual std::size_t num_assets() const = 0;
  virtual int horizon() const = 0;
  virtual void initial_prices(std::span<double> prices) const = 0;
  /// Prices at period t+1 given prices at period t.
  virtual void advance(int t, std::span<const double> prices, Rng& rng,
                       std::span<double> next) const = 0;
};

enum class AssetDynamics { gbm, exp_ou };

struct PortfolioSpec {
  int T = 12;
  double dt = 1.0 / 12.0;
  std::vector<AssetDynamics> dynamics{AssetDynamics::exp_ou, AssetDynamics::exp_ou,
                                      AssetDynamics::exp_ou};
  std::vector<double> mu{0.03, 0.06, 0.09};
  std::vector<double> sigma{0.06, 0.12, 0.18};
  double kappa = 2.0;
  Eigen::MatrixXd rho = uniform_correlation(3, 0.2);
  bool include_riskfree = false;

  std::size_t assets() const { return mu.size(); }
  void validate() const;
  static Eigen::MatrixXd uniform_correlation(std::size_t n, double r);
};

/// Mean-reversion level mu t - sigma^2 (1 - e^{-2 kappa t}) / (4 kappa).
double exp_ou_level(double mu, double sigma, double kappa, double t);

/**
 * Correlated GBM / exponential-OU prices with S_0 = 1, advanced with exact
 * transition laws. The shocks of all assets are Z = L eps with L L' = rho.
 */
class DiffusionPriceModel final : public PriceModel {
 public:
  explicit DiffusionPriceModel(PortfolioSpec spec);
  std::string kind() const override { return "diffusion"; }
  std::size_t num_assets() const override { return spec_.assets(); }
  int horizon() const override { return spec_.T; }
  void initial_prices(std::span<double> prices) const override;
  void advance(int t, std::span<const double> prices, Rng& rng,
               std::span<double> next) const override;
  /// Same step with the correlated shocks supplied directly.
  void advance_with(int t, std::span<const double> prices, std::span<const double> shocks,
                    std::span<double> next) const;
  const Eigen::MatrixXd& cholesky() const { return chol_; }
  const PortfolioSpec& spec() const { return spec_; }

 private:
  PortfolioSpec spec_;
  Eigen::MatrixXd chol_;
};

/// Log-price VECM with no lagged differences:
///   Y' = Y + Pi Y + C + u,  u ~ N(0, Sigma_u),  S = S_0 exp(Y).
struct VecmSpec {
  Eigen::MatrixXd Pi;
  Eigen::MatrixXd Sigma_u;
  Eigen::VectorXd C_det;
  int T = 24;
  int steps_per_period = 10;

  std::size_t dim() const { return static_cast<std::size_t>(Pi.rows()); }
  void validate() const;

  /// Plain-text matrices: "name rows cols scale" followed by rows of values.
  static VecmSpec load(const std::filesystem::path& path);
  /// The bundled estimates shipped in data/vecm_bundled.txt.
  static VecmSpec bundled();
};

/// Symmetrizes and floors eigenvalues at zero; returns a factor L with
/// L L' equal to the repaired matrix.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& cov, Eigen::MatrixXd* repaired = nullptr);

/// One daily step.
Eigen::VectorXd vecm_step(const Eigen::VectorXd& y, const VecmSpec& spec, const Eigen::MatrixXd& factor,
                          Rng& rng);

class VecmPriceModel final : public PriceModel {
 public:
  explicit VecmPriceModel(VecmSpec spec);
  std::string kind() const override { return "vecm"; }
  std::size_t num_assets() const override { return spec_.dim(); }
  int horizon() const override { return spec_.T; }
  void initial_prices(std::span<double> prices) const override;
  void advance(int t, std::span<const double> prices, Rng& rng,
               std::span<double> next) const override;
  const VecmSpec& spec() const { return spec_; }
  const Eigen::MatrixXd& factor() const { return factor_; }
  const Eigen::MatrixXd& repaired_covariance() const { return repaired_; }

 private:
  VecmSpec spec_;
  Eigen::MatrixXd factor_;
  Eigen::MatrixXd repaired_;
};

/// Softmax weights over the raw action. With a risk-free slot the last
/// weight goes to cash (zero rate).
void softmax_weights(std::span<const double> raw, std::span<double> weights);

/**
 * Self-financing allocation. State (t/T, S_1..S_I, y); wealth starts at 1 and
 * moves as y' = y sum_i pi_i S'_i / S_i. Cost c_t = y_t - y_{t+1}.
 */
class PortfolioEnv final : public Environment {
 public:
  PortfolioEnv(std::shared_ptr<const PriceModel> prices, bool include_riskfree);

  std::string kind() const override { return "portfolio_" + prices_->kind(); }
  int horizon() const override { return prices_->horizon(); }
  std::size_t state_dim() const override { return prices_->num_assets() + 2; }
  std::size_t raw_action_dim() const override { return slots(); }
  std::size_t applied_action_dim() const override { return slots(); }
  double initial_wealth() const override { return 1.0; }

  void initial_state(Rng& rng, std::span<double> state) const override;
  double step(int t, std::span<const double> state, std::span<const double> raw, Rng& rng,
              std::span<double> next, std::span<double> applied) const override;

  const PriceModel& price_model() const { return *prices_; }
  bool include_riskfree() const { return riskfree_; }
  std::size_t slots() const { return prices_->num_assets() + (riskfree_ ? 1 : 0); }
  /// 4 * max wealth over `episodes` equal-weight pilot paths.
  double pilot_cost_bound(std::size_t episodes, std::uint64_t seed) const;

 private:
  std::shared_ptr<const PriceModel> prices_;
  bool riskfree_;
};

}  // namespace dynrisk
