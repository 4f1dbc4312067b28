#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mimic {

// Which networks carry attention blocks. The four rows of the ablation grid:
//   local            - none (baseline)
//   non-local-reward - discriminator only
//   non-local-value  - discriminator and value function
//   non-local-all    - discriminator, value function, and policy
enum class Variant { kLocal, kNonLocalReward, kNonLocalValue, kNonLocalAll };

Variant parse_variant(const std::string& name);  // throws on unknown name
std::string variant_name(Variant v);
bool variant_reward_non_local(Variant v);
bool variant_policy_non_local(Variant v);
bool variant_value_non_local(Variant v);

struct TrainConfig {
  // Outer/inner loop schedule.
  int i_max = 300;   // outer iterations
  int c_max = 1024;  // transitions collected per learner per iteration
  int t_max = 4;     // alternation rounds per iteration
  int d_max = 1;     // discriminator updates per round (0 disables learning)
  int g_max = 4;     // policy/value updates per round
  int minibatch = 64;
  int n_learners = 4;
  std::vector<uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};

  // Observation and architecture.
  int k = 4;
  int resolution = 32;
  Variant variant = Variant::kNonLocalReward;
  int base_channels = 16;  // agent trunk width
  int disc_base = 16;      // discriminator widths {w, 2w, 2w, 2w, 2w}

  // Adversarial reward.
  double nu = 10.0;  // gradient penalty weight
  double lr_disc = 3e-4;

  // Policy optimization.
  double lr_policy = 3e-4;
  double lr_value = 3e-4;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double eps_clip = 0.2;
  double entropy_coef = 0.003;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;

  // Evaluation and stopping.
  int eval_every = 10;    // iterations between mean-action evaluations
  int eval_episodes = 10;
  double target_progress = 0.0;  // early stop once an evaluation reaches this (0 = off)
  bool verify_sync = false;      // assert cross-learner parameter equality per iteration

  // Paths.
  std::string demo_path = "demos.bin";
  std::string out_dir = "run";
};

// Throws std::invalid_argument when loop bounds or sizes are out of range
// (d_max may be zero for the reward-ablation; every other bound must be >= 1).
void validate_config(const TrainConfig& cfg);

// Flat `key = value` text with `#` comments. Unknown keys throw.
std::map<std::string, std::string> parse_kv_text(const std::string& text);
TrainConfig config_from_map(const std::map<std::string, std::string>& kv,
                            TrainConfig base = {});
void apply_config_entry(TrainConfig& cfg, const std::string& key, const std::string& value);
// Deterministic serialization (sorted keys, round-trip number formatting).
std::string config_to_text(const TrainConfig& cfg);
TrainConfig load_config_file(const std::string& path);

// Hash over the fields that determine network shapes; stamped into
// checkpoints so weights are only loaded into matching architectures.
uint64_t architecture_signature(const TrainConfig& cfg);

std::vector<int> disc_widths(const TrainConfig& cfg);

}  // namespace mimic
