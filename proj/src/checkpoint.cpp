#include "dynrisk/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace dynrisk {

namespace {

std::string hex(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_hex(const std::string& token, const std::string& key) {
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0') {
    throw CheckpointError("checkpoint array " + key + ": bad number '" + token + "'");
  }
  return v;
}

std::vector<double> to_doubles(const std::vector<std::size_t>& v) {
  return {v.begin(), v.end()};
}

std::vector<std::size_t> to_sizes(const std::vector<double>& v) {
  std::vector<std::size_t> out;
  for (double x : v) out.push_back(static_cast<std::size_t>(x));
  return out;
}

}  // namespace

void Checkpoint::set(const std::string& key, const std::string& value) {
  if (key.find_first_of(" \n") != std::string::npos || value.find('\n') != std::string::npos) {
    throw CheckpointError("checkpoint key/value must be single-line: " + key);
  }
  scalars_[key] = value;
}

void Checkpoint::set_int(const std::string& key, std::int64_t value) {
  set(key, std::to_string(value));
}

void Checkpoint::set_array(const std::string& key, std::vector<double> values) {
  arrays_[key] = std::move(values);
}

bool Checkpoint::has(const std::string& key) const {
  return scalars_.count(key) > 0 || arrays_.count(key) > 0;
}

const std::string& Checkpoint::get(const std::string& key) const {
  auto it = scalars_.find(key);
  if (it == scalars_.end()) throw CheckpointError("checkpoint is missing " + key);
  return it->second;
}

std::int64_t Checkpoint::get_int(const std::string& key) const {
  const std::string& v = get(key);
  try {
    return std::stoll(v);
  } catch (const std::exception&) {
    throw CheckpointError("checkpoint field " + key + " is not an integer: " + v);
  }
}

const std::vector<double>& Checkpoint::get_array(const std::string& key) const {
  auto it = arrays_.find(key);
  if (it == arrays_.end()) throw CheckpointError("checkpoint is missing " + key);
  return it->second;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw CheckpointError("cannot write " + tmp);
    out << "dynrisk-checkpoint " << kVersion << "\n";
    for (const auto& [k, v] : scalars_) out << "s " << k << " " << v << "\n";
    for (const auto& [k, v] : arrays_) {
      out << "a " << k << " " << v.size();
      for (double x : v) out << " " << hex(x);
      out << "\n";
    }
    std::size_t lines = 0;
    for (char ch : config_text) lines += ch == '\n';
    if (!config_text.empty() && config_text.back() != '\n') ++lines;
    out << "config " << lines << "\n" << config_text;
    if (!config_text.empty() && config_text.back() != '\n') out << "\n";
    if (!out) throw CheckpointError("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::string line;
  std::getline(in, line);
  int version = 0;
  if (std::sscanf(line.c_str(), "dynrisk-checkpoint %d", &version) != 1) {
    throw CheckpointError(path.string() + " is not a dynrisk checkpoint");
  }
  if (version != kVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag, key;
    ls >> tag;
    if (tag == "s") {
      ls >> key;
      std::string rest;
      std::getline(ls, rest);
      ck.scalars_[key] = rest.empty() ? rest : rest.substr(1);
    } else if (tag == "a") {
      std::size_t n = 0;
      ls >> key >> n;
      std::vector<double> values(n);
      std::string token;
      for (std::size_t i = 0; i < n; ++i) {
        if (!(ls >> token)) throw CheckpointError("checkpoint array " + key + " is truncated");
        values[i] = parse_hex(token, key);
      }
      ck.arrays_[key] = std::move(values);
    } else if (tag == "config") {
      std::size_t n = 0;
      ls >> n;
      for (std::size_t i = 0; i < n; ++i) {
        if (!std::getline(in, line)) throw CheckpointError("checkpoint config block is truncated");
        ck.config_text += line + "\n";
      }
    } else {
      throw CheckpointError("unknown checkpoint record '" + tag + "'");
    }
  }
  return ck;
}

void store_mlp(Checkpoint& ck, const std::string& prefix, const Mlp& net) {
  ck.set_array(prefix + ".sizes", to_doubles(net.layer_sizes()));
  ck.set(prefix + ".activation", net.output_activation().tag());
  if (!net.input_scale().empty()) {
    ck.set_array(prefix + ".input_shift", net.input_shift());
    ck.set_array(prefix + ".input_scale", net.input_scale());
  }
  const auto p = net.parameters();
  ck.set_array(prefix + ".params", {p.begin(), p.end()});
}

Mlp load_mlp(const Checkpoint& ck, const std::string& prefix) {
  Mlp net(to_sizes(ck.get_array(prefix + ".sizes")),
          OutputActivation::from_tag(ck.get(prefix + ".activation")));
  const auto& p = ck.get_array(prefix + ".params");
  if (p.size() != net.num_parameters()) {
    throw CheckpointError(prefix + ": parameter count does not match layer sizes");
  }
  net.set_parameters(p);
  if (ck.has(prefix + ".input_scale")) {
    try {
      net.set_input_affine({ck.get_array(prefix + ".input_shift"), ck.get_array(prefix + ".input_scale")});
    } catch (const std::invalid_argument& e) {
      throw CheckpointError(prefix + ": " + e.what());
    }
  }
  return net;
}

void store_adam(Checkpoint& ck, const std::string& prefix, const Adam& opt) {
  ck.set_array(prefix + ".m", opt.first_moment());
  ck.set_array(prefix + ".v", opt.second_moment());
  ck.set_int(prefix + ".steps", opt.steps());
  ck.set_int(prefix + ".epoch", opt.epoch());
}

void load_adam(const Checkpoint& ck, const std::string& prefix, Adam& opt) {
  opt.restore(ck.get_array(prefix + ".m"), ck.get_array(prefix + ".v"),
              ck.get_int(prefix + ".steps"), ck.get_int(prefix + ".epoch"));
}

void store_policy(Checkpoint& ck, const std::string& prefix, const Policy& policy) {
  ck.set(prefix + ".kind", policy.kind());
  if (const auto* g = dynamic_cast<const GaussianPolicy*>(&policy)) {
    store_mlp(ck, prefix + ".mean", g->mean_net());
    ck.set_array(prefix + ".log_std", g->log_std());
  } else if (const auto* t = dynamic_cast<const TabularSoftmaxPolicy*>(&policy)) {
    ck.set_array(prefix + ".dims", {static_cast<double>(t->state_dim()),
                                    static_cast<double>(t->index_coordinate()),
                                    static_cast<double>(t->num_states()),
                                    static_cast<double>(t->num_actions())});
    ck.set_array(prefix + ".logits", t->parameters());
  } else {
    throw CheckpointError("policy kind " + policy.kind() + " cannot be checkpointed");
  }
}

std::unique_ptr<Policy> load_policy(const Checkpoint& ck, const std::string& prefix) {
  const std::string& kind = ck.get(prefix + ".kind");
  if (kind == "gaussian") {
    const auto& log_std = ck.get_array(prefix + ".log_std");
    auto p = std::make_unique<GaussianPolicy>(load_mlp(ck, prefix + ".mean"), 0.0);
    std::vector<double> params = p->parameters();
    if (params.size() != p->mean_net().num_parameters() + log_std.size()) {
      throw CheckpointError(prefix + ": log_std size does not match the mean network");
    }
    std::copy(log_std.begin(), log_std.end(), params.end() - static_cast<std::ptrdiff_t>(log_std.size()));
    p->set_parameters(params);
    return p;
  }
  if (kind == "tabular_softmax") {
    const auto d = to_sizes(ck.get_array(prefix + ".dims"));
    if (d.size() != 4) throw CheckpointError(prefix + ".dims must have 4 entries");
    auto p = std::make_unique<TabularSoftmaxPolicy>(d[0], d[1], d[2], d[3]);
    p->set_parameters(ck.get_array(prefix + ".logits"));
    return p;
  }
  throw CheckpointError("unknown policy kind '" + kind + "'");
}

}  // namespace dynrisk
