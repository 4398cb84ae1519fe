#include "dynrisk/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "dynrisk/simple_envs.hpp"

namespace dynrisk {

namespace {

namespace pt = boost::property_tree;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt(v[i]);
  return out;
}

std::string dynamics_name(AssetDynamics d) { return d == AssetDynamics::gbm ? "gbm" : "exp_ou"; }

/// Typed access to one section with field-qualified error messages.
class Section {
 public:
  Section(const pt::ptree& root, std::string name, std::set<std::string> known)
      : name_(std::move(name)), known_(std::move(known)) {
    if (auto child = root.get_child_optional(name_)) {
      for (const auto& [key, node] : *child) {
        if (!known_.count(key)) throw ConfigError(name_ + "." + key + ": unknown key");
        values_[key] = boost::trim_copy(node.data());
      }
    }
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string str(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double real(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t used = 0;
      const double v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument("trailing");
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite");
      return v;
    } catch (const std::exception&) {
      throw ConfigError(where(key) + ": expected a number, got '" + it->second + "'");
    }
  }

  long long integer(const std::string& key, long long fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t used = 0;
      const long long v = std::stoll(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError(where(key) + ": expected an integer, got '" + it->second + "'");
    }
  }

  std::size_t count(const std::string& key, std::size_t fallback) const {
    const long long v = integer(key, static_cast<long long>(fallback));
    if (v < 0) throw ConfigError(where(key) + ": must be >= 0");
    return static_cast<std::size_t>(v);
  }

  bool flag(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string v = boost::to_lower_copy(it->second);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(where(key) + ": expected true or false, got '" + it->second + "'");
  }

  std::vector<double> reals(const std::string& key, std::vector<double> fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<std::string> parts;
    boost::split(parts, it->second, boost::is_any_of(", "), boost::token_compress_on);
    std::vector<double> out;
    for (auto& p : parts) {
      if (p.empty()) continue;
      try {
        out.push_back(std::stod(p));
      } catch (const std::exception&) {
        throw ConfigError(where(key) + ": expected a list of numbers, got '" + it->second + "'");
      }
    }
    return out;
  }

  std::string where(const std::string& key) const { return name_ + "." + key; }

 private:
  std::string name_;
  std::set<std::string> known_;
  std::map<std::string, std::string> values_;
};

LrSchedule read_lr(const Section& s, LrSchedule lr) {
  lr.initial = s.real("lr_initial", lr.initial);
  lr.decay = s.real("lr_decay", lr.decay);
  lr.interval = static_cast<int>(s.integer("lr_interval", lr.interval));
  lr.floor = s.real("lr_floor", lr.floor);
  if (!(lr.initial > 0.0)) throw ConfigError(s.where("lr_initial") + ": must be > 0");
  if (!(lr.decay > 0.0 && lr.decay <= 1.0)) throw ConfigError(s.where("lr_decay") + ": must be in (0, 1]");
  if (lr.interval < 1) throw ConfigError(s.where("lr_interval") + ": must be >= 1");
  if (lr.floor < 0.0 || lr.floor > lr.initial) {
    throw ConfigError(s.where("lr_floor") + ": must be in [0, lr_initial]");
  }
  return lr;
}

void write_lr(std::ostream& out, const LrSchedule& lr) {
  out << "lr_initial = " << fmt(lr.initial) << "\n"
      << "lr_decay = " << fmt(lr.decay) << "\n"
      << "lr_interval = " << lr.interval << "\n"
      << "lr_floor = " << fmt(lr.floor) << "\n";
}

}  // namespace

RunConfig preset(const std::string& name) {
  RunConfig c;
  c.env = name;
  if (name == "statarb") {
    c.iterations = 1500;
    c.critic.epochs = 1000;
    c.critic.batch = 750;
    c.critic.target_interval = 400;
    c.critic.lr = {5e-3, 0.95, 100, 0.0};
    c.actor.epochs = 30;
    c.actor.base_batch = 500;
    c.actor.lr = {4e-3, 0.95, 50, 5e-4};
  } else if (name == "portfolio" || name == "vecm") {
    c.iterations = name == "vecm" ? 4000 : 2000;
    c.critic.epochs = name == "vecm" ? 2000 : 1000;
    c.critic.batch = 1000;
    c.critic.target_interval = 300;
    c.critic.lr = {5e-3, 0.95, 50, 0.0};
    c.actor.epochs = 10;
    c.actor.base_batch = 1000;
    c.actor.lr = {5e-3, 0.97, 100, 3e-4};
  } else if (name == "constant" || name == "tree") {
    c.iterations = 100;
    c.critic.epochs = 200;
    c.critic.batch = 200;
    c.critic.target_interval = 50;
    c.actor.epochs = 10;
    c.actor.base_batch = 200;
    if (name == "tree") c.critic_model = "exact";
  } else {
    throw ConfigError("env.kind: unknown environment '" + name + "'");
  }
  return c;
}

RunConfig parse_config(const std::string& text) {
  pt::ptree root;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }
  for (const auto& [section, node] : root) {
    static const std::set<std::string> sections{"run", "env", "risk", "policy", "critic",
                                                "actor", "nested", "eval"};
    if (!sections.count(section)) throw ConfigError(section + ": unknown section");
    if (!node.data().empty()) throw ConfigError(section + ": key outside any section");
  }

  const Section env(root, "env",
                    {"kind", "T", "kappa", "mu", "sigma", "phi1", "phi2", "q_min", "q_max",
                     "a_min", "a_max", "dt", "q0_spread", "dynamics", "rho", "riskfree",
                     "vecm_file", "steps_per_period", "cost", "tree_file", "initial"});
  RunConfig c = preset(env.str("kind", "statarb"));

  const Section run(root, "run",
                    {"method", "seed", "iterations", "threads", "output", "snapshot_interval"});
  c.method = run.str("method", c.method);
  c.seed = static_cast<std::uint64_t>(run.integer("seed", static_cast<long long>(c.seed)));
  c.iterations = static_cast<int>(run.integer("iterations", c.iterations));
  c.threads = run.count("threads", c.threads);
  c.output = run.str("output", c.output);
  c.snapshot_interval = static_cast<int>(run.integer("snapshot_interval", c.snapshot_interval));

  if (c.env == "statarb") {
    auto& s = c.statarb;
    s.T = static_cast<int>(env.integer("T", s.T));
    s.kappa = env.real("kappa", s.kappa);
    s.mu = env.real("mu", s.mu);
    s.sigma = env.real("sigma", s.sigma);
    s.phi1 = env.real("phi1", s.phi1);
    s.phi2 = env.real("phi2", s.phi2);
    s.q_min = env.real("q_min", s.q_min);
    s.q_max = env.real("q_max", s.q_max);
    s.a_min = env.real("a_min", s.a_min);
    s.a_max = env.real("a_max", s.a_max);
    s.dt = env.real("dt", s.dt);
    s.q0_spread = env.real("q0_spread", s.q0_spread);
  } else if (c.env == "portfolio") {
    auto& p = c.portfolio;
    p.T = static_cast<int>(env.integer("T", p.T));
    p.dt = env.real("dt", 1.0 / p.T);
    p.mu = env.reals("mu", p.mu);
    p.sigma = env.reals("sigma", p.sigma);
    p.kappa = env.real("kappa", p.kappa);
    p.include_riskfree = env.flag("riskfree", p.include_riskfree);
    std::vector<std::string> dyn;
    const std::string dyn_text = env.str("dynamics", "exp_ou");
    boost::split(dyn, dyn_text, boost::is_any_of(", "), boost::token_compress_on);
    std::erase(dyn, std::string());
    if (dyn.size() == 1) dyn.assign(p.mu.size(), dyn.front());
    if (dyn.size() != p.mu.size()) throw ConfigError("env.dynamics: need one entry per asset");
    p.dynamics.clear();
    for (auto& d : dyn) {
      if (d == "gbm") p.dynamics.push_back(AssetDynamics::gbm);
      else if (d == "exp_ou") p.dynamics.push_back(AssetDynamics::exp_ou);
      else throw ConfigError("env.dynamics: unknown dynamics '" + d + "'");
    }
    const auto rho = env.reals("rho", {0.2});
    const std::size_t n = p.mu.size();
    if (rho.size() == 1) {
      p.rho = PortfolioSpec::uniform_correlation(n, rho[0]);
    } else if (rho.size() == n * n) {
      p.rho = Eigen::Map<const Eigen::MatrixXd>(rho.data(), static_cast<Eigen::Index>(n),
                                                static_cast<Eigen::Index>(n))
                  .transpose();
    } else {
      throw ConfigError("env.rho: give one correlation or a full row-major matrix");
    }
  } else if (c.env == "vecm") {
    c.vecm_file = env.str("vecm_file", c.vecm_file);
    c.vecm_T = static_cast<int>(env.integer("T", c.vecm_T));
    c.vecm_steps_per_period = static_cast<int>(env.integer("steps_per_period", c.vecm_steps_per_period));
    c.vecm_riskfree = env.flag("riskfree", c.vecm_riskfree);
  } else if (c.env == "constant") {
    c.constant_T = static_cast<int>(env.integer("T", c.constant_T));
    c.constant_cost = env.real("cost", c.constant_cost);
  } else if (c.env == "tree") {
    c.tree_file = env.str("tree_file", c.tree_file);
    c.tree_initial = env.reals("initial", c.tree_initial);
  }

  const Section risk(root, "risk", {"spectrum", "alpha", "cost_bound"});
  if (risk.has("spectrum") && risk.has("alpha")) {
    throw ConfigError("risk.alpha: give either alpha or spectrum, not both");
  }
  try {
    if (risk.has("spectrum")) c.spectrum = Spectrum::parse(risk.str("spectrum", ""));
    if (risk.has("alpha")) c.spectrum = Spectrum::cvar(risk.real("alpha", 0.5));
  } catch (const SpectrumError& e) {
    throw ConfigError(std::string("risk.spectrum: ") + e.what());
  }
  c.cost_bound = risk.real("cost_bound", c.cost_bound);

  const Section pol(root, "policy", {"hidden", "depth", "log_std_init"});
  c.policy_hidden = pol.count("hidden", c.policy_hidden);
  c.policy_depth = pol.count("depth", c.policy_depth);
  c.log_std_init = pol.real("log_std_init", c.log_std_init);

  const Section cr(root, "critic",
                   {"model", "hidden", "depth", "epochs", "batch", "target_interval", "lr_initial",
                    "lr_decay", "lr_interval", "lr_floor"});
  c.critic_model = cr.str("model", c.critic_model);
  c.critic_hidden = cr.count("hidden", c.critic_hidden);
  c.critic_depth = cr.count("depth", c.critic_depth);
  c.critic.epochs = static_cast<int>(cr.integer("epochs", c.critic.epochs));
  c.critic.batch = cr.count("batch", c.critic.batch);
  c.critic.target_interval = static_cast<int>(cr.integer("target_interval", c.critic.target_interval));
  c.critic.lr = read_lr(cr, c.critic.lr);

  const Section ac(root, "actor",
                   {"epochs", "base_batch", "drop_value_gradient", "lr_initial", "lr_decay",
                    "lr_interval", "lr_floor"});
  c.actor.epochs = static_cast<int>(ac.integer("epochs", c.actor.epochs));
  c.actor.base_batch = ac.count("base_batch", c.actor.base_batch);
  c.actor.drop_value_gradient = ac.flag("drop_value_gradient", c.actor.drop_value_gradient);
  c.actor.lr = read_lr(ac, c.actor.lr);

  const Section ne(root, "nested", {"inner_m"});
  c.inner_M = ne.count("inner_m", c.inner_M);

  const Section ev(root, "eval", {"episodes", "grid_points"});
  c.eval_episodes = ev.count("episodes", c.eval_episodes);
  c.grid_points = ev.count("grid_points", c.grid_points);

  c.critic.threads = c.actor.threads = c.threads;
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void RunConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (method != "elicitable" && method != "nested") fail("run.method: must be elicitable or nested");
  if (iterations < 0) fail("run.iterations: must be >= 0");
  if (threads < 1) fail("run.threads: must be >= 1");
  if (snapshot_interval < 0) fail("run.snapshot_interval: must be >= 0");
  if (cost_bound < 0.0) fail("risk.cost_bound: must be > 0 (or 0 for the environment default)");
  if (critic_model != "network" && critic_model != "exact") fail("critic.model: must be network or exact");
  if (critic_model == "exact" && env != "tree") fail("critic.model: exact is only available for env.kind = tree");
  if (critic_model == "exact" && method == "nested") fail("critic.model: exact is not used by the nested method");
  if (critic.epochs < 0) fail("critic.epochs: must be >= 0");
  if (critic.batch < 1) fail("critic.batch: must be >= 1");
  if (critic.target_interval < 1) fail("critic.target_interval: must be >= 1");
  if (critic_hidden < 1 || critic_depth < 1) fail("critic.hidden/depth: must be >= 1");
  if (policy_hidden < 1 || policy_depth < 1) fail("policy.hidden/depth: must be >= 1");
  if (actor.epochs < 0) fail("actor.epochs: must be >= 0");
  if (actor.base_batch < 1) fail("actor.base_batch: must be >= 1");
  if (!actor.drop_value_gradient) {
    fail("actor.drop_value_gradient: only true is supported (the continuation-value gradient is omitted)");
  }
  if (inner_M < 2) fail("nested.inner_m: must be >= 2");
  if (grid_points < 1) fail("eval.grid_points: must be >= 1");
  try {
    if (env == "statarb") statarb.validate();
    if (env == "portfolio") portfolio.validate();
  } catch (const std::invalid_argument& e) {
    fail(std::string("env: ") + e.what());
  }
  if (env == "vecm" && (vecm_T < 1 || vecm_steps_per_period < 1)) {
    fail("env.T/steps_per_period: must be >= 1");
  }
  if (env == "constant" && constant_T < 1) fail("env.T: must be >= 1");
}

std::string RunConfig::to_ini() const {
  std::ostringstream o;
  o << "[run]\nmethod = " << method << "\nseed = " << seed << "\niterations = " << iterations
    << "\nthreads = " << threads << "\noutput = " << output
    << "\nsnapshot_interval = " << snapshot_interval << "\n\n[env]\nkind = " << env << "\n";
  if (env == "statarb") {
    const auto& s = statarb;
    o << "T = " << s.T << "\nkappa = " << fmt(s.kappa) << "\nmu = " << fmt(s.mu)
      << "\nsigma = " << fmt(s.sigma) << "\nphi1 = " << fmt(s.phi1) << "\nphi2 = " << fmt(s.phi2)
      << "\nq_min = " << fmt(s.q_min) << "\nq_max = " << fmt(s.q_max) << "\na_min = " << fmt(s.a_min)
      << "\na_max = " << fmt(s.a_max) << "\ndt = " << fmt(s.step_length())
      << "\nq0_spread = " << fmt(s.q0_spread) << "\n";
  } else if (env == "portfolio") {
    const auto& p = portfolio;
    o << "T = " << p.T << "\ndt = " << fmt(p.dt) << "\nmu = " << join(p.mu)
      << "\nsigma = " << join(p.sigma) << "\nkappa = " << fmt(p.kappa) << "\ndynamics = ";
    for (std::size_t i = 0; i < p.dynamics.size(); ++i) o << (i ? ", " : "") << dynamics_name(p.dynamics[i]);
    std::vector<double> rho;
    for (Eigen::Index i = 0; i < p.rho.rows(); ++i)
      for (Eigen::Index j = 0; j < p.rho.cols(); ++j) rho.push_back(p.rho(i, j));
    o << "\nrho = " << join(rho) << "\nriskfree = " << (p.include_riskfree ? "true" : "false") << "\n";
  } else if (env == "vecm") {
    o << "vecm_file = " << vecm_file << "\nT = " << vecm_T << "\nsteps_per_period = "
      << vecm_steps_per_period << "\nriskfree = " << (vecm_riskfree ? "true" : "false") << "\n";
  } else if (env == "constant") {
    o << "T = " << constant_T << "\ncost = " << fmt(constant_cost) << "\n";
  } else if (env == "tree") {
    o << "tree_file = " << tree_file << "\n";
    if (!tree_initial.empty()) o << "initial = " << join(tree_initial) << "\n";
  }
  o << "\n[risk]\nspectrum = " << spectrum.to_string() << "\ncost_bound = " << fmt(cost_bound)
    << "\n\n[policy]\nhidden = " << policy_hidden << "\ndepth = " << policy_depth
    << "\nlog_std_init = " << fmt(log_std_init) << "\n\n[critic]\nmodel = " << critic_model
    << "\nhidden = " << critic_hidden << "\ndepth = " << critic_depth << "\nepochs = " << critic.epochs
    << "\nbatch = " << critic.batch << "\ntarget_interval = " << critic.target_interval << "\n";
  write_lr(o, critic.lr);
  o << "\n[actor]\nepochs = " << actor.epochs << "\nbase_batch = " << actor.base_batch
    << "\ndrop_value_gradient = " << (actor.drop_value_gradient ? "true" : "false") << "\n";
  write_lr(o, actor.lr);
  o << "\n[nested]\ninner_m = " << inner_M << "\n\n[eval]\nepisodes = " << eval_episodes
    << "\ngrid_points = " << grid_points << "\n";
  return o.str();
}

std::unique_ptr<Environment> make_environment(const RunConfig& c) {
  if (c.env == "statarb") return std::make_unique<StatArbEnv>(c.statarb);
  if (c.env == "portfolio") {
    return std::make_unique<PortfolioEnv>(std::make_shared<DiffusionPriceModel>(c.portfolio),
                                          c.portfolio.include_riskfree);
  }
  if (c.env == "vecm") {
    VecmSpec spec = c.vecm_file.empty() ? VecmSpec::bundled() : VecmSpec::load(c.vecm_file);
    spec.T = c.vecm_T;
    spec.steps_per_period = c.vecm_steps_per_period;
    return std::make_unique<PortfolioEnv>(std::make_shared<VecmPriceModel>(spec), c.vecm_riskfree);
  }
  if (c.env == "constant") return std::make_unique<ConstantCostEnv>(c.constant_T, c.constant_cost);
  if (c.env == "tree") {
    FiniteTreeMdp mdp = c.tree_file.empty() ? example_tree() : FiniteTreeMdp::load(c.tree_file);
    return std::make_unique<TreeEnv>(std::move(mdp), c.tree_initial);
  }
  throw ConfigError("env.kind: unknown environment '" + c.env + "'");
}

std::unique_ptr<Policy> make_policy(const RunConfig& c, const Environment& env, Rng& rng) {
  if (const auto* tree = dynamic_cast<const TreeEnv*>(&env)) {
    return std::make_unique<TabularSoftmaxPolicy>(2, 1, tree->mdp().size(), tree->mdp().max_actions());
  }
  Mlp mean(mlp_layout(env.state_dim(), c.policy_hidden, c.policy_depth, env.raw_action_dim()),
           OutputActivation::identity());
  mean.init_glorot(rng);
  mean.set_input_affine(env.input_affine());
  return std::make_unique<GaussianPolicy>(std::move(mean), c.log_std_init);
}

double resolve_cost_bound(const RunConfig& c, const Environment& env) {
  if (c.cost_bound > 0.0) return c.cost_bound;
  if (const auto* s = dynamic_cast<const StatArbEnv*>(&env)) return s->spec().default_cost_bound();
  if (const auto* p = dynamic_cast<const PortfolioEnv*>(&env)) {
    return p->pilot_cost_bound(10000, derive_seed(c.seed, 0x70696c6f74ULL));
  }
  if (const auto* k = dynamic_cast<const ConstantCostEnv*>(&env)) {
    return 4.0 * (k->horizon() * std::abs(k->cost())) + 1.0;
  }
  if (const auto* t = dynamic_cast<const TreeEnv*>(&env)) {
    std::vector<double> worst(static_cast<std::size_t>(t->horizon()), 0.0);
    for (const auto& n : t->mdp().nodes()) {
      for (const auto& edges : n.actions) {
        for (const auto& e : edges) {
          auto& w = worst[static_cast<std::size_t>(n.depth)];
          w = std::max(w, std::abs(e.cost));
        }
      }
    }
    double total = 0.0;
    for (double w : worst) total += w;
    return 4.0 * total + 1.0;
  }
  throw ConfigError("risk.cost_bound: no default for environment " + env.kind());
}

}  // namespace dynrisk
