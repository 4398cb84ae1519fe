#include "dynrisk/portfolio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "dynrisk/data.hpp"
#include "dynrisk/policy.hpp"

namespace dynrisk {

// ---------------------------------------------------------------------------
// Diffusion prices

Eigen::MatrixXd PortfolioSpec::uniform_correlation(std::size_t n, double r) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n),
                                                static_cast<Eigen::Index>(n), r);
  m.diagonal().setOnes();
  return m;
}

void PortfolioSpec::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("portfolio: " + m); };
  const std::size_t n = assets();
  if (n == 0) fail("at least one asset required");
  if (sigma.size() != n || dynamics.size() != n) fail("mu, sigma and dynamics lengths differ");
  if (T < 1) fail("T must be >= 1");
  if (!(dt > 0.0)) fail("dt must be > 0");
  for (double s : sigma) {
    if (s < 0.0) fail("sigma must be >= 0");
  }
  const bool any_ou =
      std::any_of(dynamics.begin(), dynamics.end(), [](auto d) { return d == AssetDynamics::exp_ou; });
  if (any_ou && !(kappa > 0.0)) fail("kappa must be > 0 for exp_ou assets");
  const auto N = static_cast<Eigen::Index>(n);
  if (rho.rows() != N || rho.cols() != N) fail("rho must be " + std::to_string(n) + "x" + std::to_string(n));
  if (!rho.isApprox(rho.transpose(), 1e-12)) fail("rho must be symmetric");
  for (Eigen::Index i = 0; i < N; ++i) {
    if (std::abs(rho(i, i) - 1.0) > 1e-12) fail("rho must have a unit diagonal");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(rho, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-10) fail("rho must be positive semi-definite");
}

double exp_ou_level(double mu, double sigma, double kappa, double t) {
  return mu * t + sigma * sigma * std::expm1(-2.0 * kappa * t) / (4.0 * kappa);
}

DiffusionPriceModel::DiffusionPriceModel(PortfolioSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  Eigen::LLT<Eigen::MatrixXd> llt(spec_.rho);
  chol_ = llt.info() == Eigen::Success ? Eigen::MatrixXd(llt.matrixL()) : psd_factor(spec_.rho);
}

void DiffusionPriceModel::initial_prices(std::span<double> prices) const {
  std::fill(prices.begin(), prices.end(), 1.0);
}

void DiffusionPriceModel::advance(int t, std::span<const double> prices, Rng& rng,
                                  std::span<double> next) const {
  const auto n = static_cast<Eigen::Index>(num_assets());
  Eigen::VectorXd eps(n);
  for (Eigen::Index i = 0; i < n; ++i) eps(i) = rng.normal();
  const Eigen::VectorXd z = chol_ * eps;
  advance_with(t, prices, std::span<const double>(z.data(), num_assets()), next);
}

void DiffusionPriceModel::advance_with(int t, std::span<const double> prices,
                                       std::span<const double> z, std::span<double> next) const {
  const double dt = spec_.dt;
  const double k = spec_.kappa;
  for (std::size_t i = 0; i < num_assets(); ++i) {
    const double mu = spec_.mu[i], sg = spec_.sigma[i];
    if (spec_.dynamics[i] == AssetDynamics::gbm) {
      next[i] = prices[i] * std::exp((mu - 0.5 * sg * sg) * dt + sg * std::sqrt(dt) * z[i]);
    } else {
      const double x = std::log(prices[i]) - exp_ou_level(mu, sg, k, t * dt);
      const double sd = sg * std::sqrt(-std::expm1(-2.0 * k * dt) / (2.0 * k));
      const double x_next = x * std::exp(-k * dt) + sd * z[i];
      next[i] = std::exp(x_next + exp_ou_level(mu, sg, k, (t + 1) * dt));
    }
  }
}

// ---------------------------------------------------------------------------
// VECM

void VecmSpec::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("vecm: " + m); };
  const auto d = Pi.rows();
  if (d == 0 || Pi.cols() != d) fail("Pi must be square and non-empty");
  if (Sigma_u.rows() != d || Sigma_u.cols() != d) fail("Sigma_u must match Pi");
  if (C_det.size() != d) fail("C must have one entry per dimension");
  if (T < 1) fail("T must be >= 1");
  if (steps_per_period < 1) fail("steps_per_period must be >= 1");
  if (!Pi.allFinite() || !Sigma_u.allFinite() || !C_det.allFinite()) fail("non-finite parameters");
}

VecmSpec VecmSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open VECM parameter file " + path.string());
  VecmSpec spec;
  bool have_pi = false, have_sigma = false, have_c = false;
  std::string line;
  while (std::getline(in, line)) {
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    std::istringstream head(line);
    std::string name;
    if (!(head >> name)) continue;
    int rows = 0, cols = 0;
    double scale = 1.0;
    if (!(head >> rows >> cols >> scale) || rows <= 0 || cols <= 0) {
      throw ConfigError("malformed block header in " + path.string() + ": " + line);
    }
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        if (!(in >> m(r, c))) throw ConfigError("truncated block " + name + " in " + path.string());
      }
    }
    m *= scale;
    if (name == "Pi") {
      spec.Pi = m;
      have_pi = true;
    } else if (name == "Sigma_u") {
      spec.Sigma_u = m;
      have_sigma = true;
    } else if (name == "C") {
      spec.C_det = Eigen::Map<Eigen::VectorXd>(m.data(), m.size());
      have_c = true;
    } else {
      throw ConfigError("unknown block " + name + " in " + path.string());
    }
  }
  if (!have_pi || !have_sigma || !have_c) {
    throw ConfigError("VECM file needs Pi, Sigma_u and C blocks: " + path.string());
  }
  spec.validate();
  return spec;
}

VecmSpec VecmSpec::bundled() { return load(data_file("vecm_bundled.txt")); }

Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& cov, Eigen::MatrixXd* repaired) {
  const Eigen::MatrixXd sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) throw ConfigError("covariance eigen-decomposition failed");
  const Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(0.0);
  const Eigen::MatrixXd L = eig.eigenvectors() * lambda.cwiseSqrt().asDiagonal();
  if (!L.allFinite()) throw ConfigError("covariance factor is not finite");
  if (repaired) *repaired = L * L.transpose();
  return L;
}

Eigen::VectorXd vecm_step(const Eigen::VectorXd& y, const VecmSpec& spec,
                          const Eigen::MatrixXd& factor, Rng& rng) {
  if (y.size() != spec.Pi.rows()) throw std::invalid_argument("vecm_step: dimension mismatch");
  Eigen::VectorXd eps(y.size());
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps(i) = rng.normal();
  return y + spec.Pi * y + spec.C_det + factor * eps;
}

VecmPriceModel::VecmPriceModel(VecmSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  factor_ = psd_factor(spec_.Sigma_u, &repaired_);
}

void VecmPriceModel::initial_prices(std::span<double> prices) const {
  std::fill(prices.begin(), prices.end(), 1.0);
}

void VecmPriceModel::advance(int, std::span<const double> prices, Rng& rng,
                             std::span<double> next) const {
  Eigen::VectorXd y(static_cast<Eigen::Index>(num_assets()));
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = std::log(prices[static_cast<std::size_t>(i)]);
  for (int k = 0; k < spec_.steps_per_period; ++k) y = vecm_step(y, spec_, factor_, rng);
  for (Eigen::Index i = 0; i < y.size(); ++i) next[static_cast<std::size_t>(i)] = std::exp(y(i));
}

// ---------------------------------------------------------------------------
// Wealth dynamics

void softmax_weights(std::span<const double> raw, std::span<double> weights) {
  const double mx = *std::max_element(raw.begin(), raw.end());
  double total = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) total += weights[i] = std::exp(raw[i] - mx);
  for (std::size_t i = 0; i < raw.size(); ++i) weights[i] /= total;
}

PortfolioEnv::PortfolioEnv(std::shared_ptr<const PriceModel> prices, bool include_riskfree)
    : prices_(std::move(prices)), riskfree_(include_riskfree) {
  if (!prices_) throw std::invalid_argument("PortfolioEnv needs a price model");
}

void PortfolioEnv::initial_state(Rng&, std::span<double> state) const {
  state[0] = 0.0;
  prices_->initial_prices(state.subspan(1, prices_->num_assets()));
  state[prices_->num_assets() + 1] = 1.0;
}

double PortfolioEnv::step(int t, std::span<const double> state, std::span<const double> raw,
                          Rng& rng, std::span<double> next, std::span<double> applied) const {
  const std::size_t n = prices_->num_assets();
  softmax_weights(raw, applied);
  const auto S = state.subspan(1, n);
  auto S_next = next.subspan(1, n);
  prices_->advance(t, S, rng, S_next);
  double gross = riskfree_ ? applied[n] : 0.0;
  for (std::size_t i = 0; i < n; ++i) gross += applied[i] * S_next[i] / S[i];
  const double y = state[n + 1];
  const double y_next = y * gross;
  next[0] = static_cast<double>(t + 1) / horizon();
  next[n + 1] = y_next;
  return y - y_next;
}

double PortfolioEnv::pilot_cost_bound(std::size_t episodes, std::uint64_t seed) const {
  ConstantPolicy equal(state_dim(), std::vector<double>(slots(), 0.0));
  const EpisodeBatch batch = simulate_batch(*this, equal, episodes, seed);
  const auto y_row = static_cast<Eigen::Index>(prices_->num_assets() + 1);
  return 4.0 * batch.states.row(y_row).cwiseAbs().maxCoeff();
}

}  // namespace dynrisk
