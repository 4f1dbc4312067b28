#include "mimic/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mimic/metrics.hpp"
#include "mimic/net.hpp"

namespace mimic {

Variant parse_variant(const std::string& name) {
  if (name == "local") return Variant::kLocal;
  if (name == "non-local-reward") return Variant::kNonLocalReward;
  if (name == "non-local-value") return Variant::kNonLocalValue;
  if (name == "non-local-all") return Variant::kNonLocalAll;
  throw std::invalid_argument(
      "unknown variant '" + name +
      "' (expected local, non-local-reward, non-local-value, or non-local-all)");
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kLocal: return "local";
    case Variant::kNonLocalReward: return "non-local-reward";
    case Variant::kNonLocalValue: return "non-local-value";
    case Variant::kNonLocalAll: return "non-local-all";
  }
  return "local";
}

bool variant_reward_non_local(Variant v) { return v != Variant::kLocal; }
bool variant_policy_non_local(Variant v) { return v == Variant::kNonLocalAll; }
bool variant_value_non_local(Variant v) {
  return v == Variant::kNonLocalValue || v == Variant::kNonLocalAll;
}

void validate_config(const TrainConfig& cfg) {
  auto need = [](bool ok, const char* why) {
    if (!ok) throw std::invalid_argument(std::string("bad config: ") + why);
  };
  need(cfg.i_max >= 1, "i_max must be >= 1");
  need(cfg.c_max >= 1, "c_max must be >= 1");
  need(cfg.t_max >= 1, "t_max must be >= 1");
  need(cfg.d_max >= 0, "d_max must be >= 0");
  need(cfg.g_max >= 1, "g_max must be >= 1");
  need(cfg.minibatch >= 2, "minibatch must be >= 2");
  need(cfg.n_learners >= 1, "n_learners must be >= 1");
  need(!cfg.seeds.empty(), "seeds must not be empty");
  need(cfg.k >= 1, "k must be >= 1");
  need(cfg.resolution >= 32, "resolution must be >= 32");
  need(cfg.base_channels >= 8, "base_channels must be >= 8 so channel pooling keeps at least two channels");
  need(cfg.disc_base >= 2, "disc_base must be >= 2");
  need(cfg.nu >= 0.0, "nu must be >= 0");
  need(cfg.gamma > 0.0 && cfg.gamma < 1.0, "gamma must lie in (0, 1)");
  need(cfg.gae_lambda >= 0.0 && cfg.gae_lambda <= 1.0, "gae_lambda must lie in [0, 1]");
  need(cfg.eps_clip > 0.0, "eps_clip must be > 0");
  need(cfg.eval_every >= 1, "eval_every must be >= 1");
  need(cfg.eval_episodes >= 1, "eval_episodes must be >= 1");
  need(!cfg.demo_path.empty(), "demo_path must be set");
  need(!cfg.out_dir.empty(), "out_dir must be set");
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

int to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    int x = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "' wants an integer, got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "' wants a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config key '" + key + "' wants true/false, got '" + v + "'");
}

std::vector<uint64_t> to_seeds(const std::string& key, const std::string& v) {
  std::vector<uint64_t> out;
  std::istringstream ss(v);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (part.empty()) continue;
    try {
      out.push_back(std::stoull(part));
    } catch (const std::exception&) {
      throw std::invalid_argument("config key '" + key + "' wants comma-separated seeds, got '" +
                                  v + "'");
    }
  }
  if (out.empty()) {
    throw std::invalid_argument("config key '" + key + "' needs at least one seed");
  }
  return out;
}

std::string seeds_to_string(const std::vector<uint64_t>& seeds) {
  std::string s;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(seeds[i]);
  }
  return s;
}

}  // namespace

std::map<std::string, std::string> parse_kv_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  " is not 'key = value': " + line);
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + " has an empty key");
    }
    kv[key] = value;
  }
  return kv;
}

void apply_config_entry(TrainConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "i_max") cfg.i_max = to_int(key, value);
  else if (key == "c_max") cfg.c_max = to_int(key, value);
  else if (key == "t_max") cfg.t_max = to_int(key, value);
  else if (key == "d_max") cfg.d_max = to_int(key, value);
  else if (key == "g_max") cfg.g_max = to_int(key, value);
  else if (key == "minibatch") cfg.minibatch = to_int(key, value);
  else if (key == "n_learners") cfg.n_learners = to_int(key, value);
  else if (key == "seeds") cfg.seeds = to_seeds(key, value);
  else if (key == "k") cfg.k = to_int(key, value);
  else if (key == "resolution") cfg.resolution = to_int(key, value);
  else if (key == "variant") cfg.variant = parse_variant(value);
  else if (key == "base_channels") cfg.base_channels = to_int(key, value);
  else if (key == "disc_base") cfg.disc_base = to_int(key, value);
  else if (key == "nu") cfg.nu = to_double(key, value);
  else if (key == "lr_disc") cfg.lr_disc = to_double(key, value);
  else if (key == "lr_policy") cfg.lr_policy = to_double(key, value);
  else if (key == "lr_value") cfg.lr_value = to_double(key, value);
  else if (key == "gamma") cfg.gamma = to_double(key, value);
  else if (key == "gae_lambda") cfg.gae_lambda = to_double(key, value);
  else if (key == "eps_clip") cfg.eps_clip = to_double(key, value);
  else if (key == "entropy_coef") cfg.entropy_coef = to_double(key, value);
  else if (key == "value_coef") cfg.value_coef = to_double(key, value);
  else if (key == "max_grad_norm") cfg.max_grad_norm = to_double(key, value);
  else if (key == "eval_every") cfg.eval_every = to_int(key, value);
  else if (key == "eval_episodes") cfg.eval_episodes = to_int(key, value);
  else if (key == "target_progress") cfg.target_progress = to_double(key, value);
  else if (key == "verify_sync") cfg.verify_sync = to_bool(key, value);
  else if (key == "demo_path") cfg.demo_path = value;
  else if (key == "out_dir") cfg.out_dir = value;
  else throw std::invalid_argument("unknown config key '" + key + "'");
}

TrainConfig config_from_map(const std::map<std::string, std::string>& kv, TrainConfig base) {
  for (const auto& [key, value] : kv) {
    apply_config_entry(base, key, value);
  }
  return base;
}

std::string config_to_text(const TrainConfig& cfg) {
  // Keys kept alphabetical so serialization is deterministic.
  std::map<std::string, std::string> kv;
  kv["base_channels"] = std::to_string(cfg.base_channels);
  kv["c_max"] = std::to_string(cfg.c_max);
  kv["d_max"] = std::to_string(cfg.d_max);
  kv["demo_path"] = cfg.demo_path;
  kv["disc_base"] = std::to_string(cfg.disc_base);
  kv["entropy_coef"] = format_double(cfg.entropy_coef);
  kv["eps_clip"] = format_double(cfg.eps_clip);
  kv["eval_episodes"] = std::to_string(cfg.eval_episodes);
  kv["eval_every"] = std::to_string(cfg.eval_every);
  kv["g_max"] = std::to_string(cfg.g_max);
  kv["gae_lambda"] = format_double(cfg.gae_lambda);
  kv["gamma"] = format_double(cfg.gamma);
  kv["i_max"] = std::to_string(cfg.i_max);
  kv["k"] = std::to_string(cfg.k);
  kv["lr_disc"] = format_double(cfg.lr_disc);
  kv["lr_policy"] = format_double(cfg.lr_policy);
  kv["lr_value"] = format_double(cfg.lr_value);
  kv["max_grad_norm"] = format_double(cfg.max_grad_norm);
  kv["minibatch"] = std::to_string(cfg.minibatch);
  kv["n_learners"] = std::to_string(cfg.n_learners);
  kv["nu"] = format_double(cfg.nu);
  kv["out_dir"] = cfg.out_dir;
  kv["resolution"] = std::to_string(cfg.resolution);
  kv["seeds"] = seeds_to_string(cfg.seeds);
  kv["t_max"] = std::to_string(cfg.t_max);
  kv["target_progress"] = format_double(cfg.target_progress);
  kv["value_coef"] = format_double(cfg.value_coef);
  kv["variant"] = variant_name(cfg.variant);
  kv["verify_sync"] = cfg.verify_sync ? "true" : "false";
  std::string out;
  for (const auto& [key, value] : kv) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  }
  return out;
}

TrainConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open config file: " + path);
  }
  std::ostringstream body;
  body << in.rdbuf();
  return config_from_map(parse_kv_text(body.str()));
}

uint64_t architecture_signature(const TrainConfig& cfg) {
  std::string sig = "arch;k=" + std::to_string(cfg.k) +
                    ";res=" + std::to_string(cfg.resolution) +
                    ";base=" + std::to_string(cfg.base_channels) +
                    ";disc_base=" + std::to_string(cfg.disc_base) +
                    ";variant=" + variant_name(cfg.variant) + ";actions=2";
  return fnv1a64(sig);
}

std::vector<int> disc_widths(const TrainConfig& cfg) {
  const int w = cfg.disc_base;
  return {w, 2 * w, 2 * w, 2 * w, 2 * w};
}

}  // namespace mimic
