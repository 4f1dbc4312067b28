#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "mimic/net.hpp"
#include "mimic/optim.hpp"
#include "mimic/tensor.hpp"

namespace mimic {

// Transition storage for one outer training iteration. Rewards are the
// discriminator surrogate rewards; the environment's own score never enters
// the buffer. The whole buffer is flushed after each outer iteration.
struct RolloutBuffer {
  Shape state_shape;  // observation shape per transition, e.g. {k*colors, H, W}
  int action_dim = 0;

  std::vector<std::vector<double>> states;
  std::vector<std::vector<double>> actions;
  std::vector<double> log_probs_old;
  std::vector<std::vector<double>> next_states;
  std::vector<double> rewards;
  std::vector<uint8_t> dones;  // 1 when the transition ends its episode
  std::vector<double> values_old;

  std::size_t size() const { return rewards.size(); }
  void push(std::vector<double> state, std::vector<double> action, double log_prob,
            std::vector<double> next_state, double reward, bool done, double value_old);
  void clear();
};

struct AdvantageSet {
  std::vector<double> advantages;
  std::vector<double> returns;  // advantage + value_old, the value-fit target
};

// Generalized advantage estimation over the buffer, run backwards with the
// recursion reset at episode ends (no bootstrap across terminations).
// `bootstrap_value` is the value estimate of the final next state; it only
// matters when collection truncated the last episode mid-flight.
AdvantageSet compute_advantages(const RolloutBuffer& buffer, double gamma, double lambda,
                                double bootstrap_value);

// In-place shift/scale to mean 0 and unit population std (epsilon-guarded).
void normalize_advantages(std::vector<double>& advantages);

// Clipped-ratio surrogate: -mean(min(rho*A, clamp(rho, 1-eps, 1+eps)*A)) with
// rho = exp(log_prob_new - log_prob_old). Only log_prob_new carries gradient.
Tensor ppo_policy_loss(const Tensor& log_prob_new, const Tensor& log_prob_old,
                       const Tensor& advantage, double eps_clip);

// Mean squared error between value predictions and return targets.
Tensor value_loss(const Tensor& v_new, const Tensor& return_target);

struct PPOConfig {
  double gamma = 0.99;
  double lambda = 0.95;
  double eps_clip = 0.2;
  double entropy_coef = 0.003;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
};

// Tensors for one sampled update batch. Advantages are normalized over the
// selected rows.
struct Minibatch {
  Tensor states;         // [B, C, H, W]
  Tensor actions;        // [B, A]
  Tensor log_probs_old;  // [B]
  Tensor advantages;     // [B]
  Tensor returns;        // [B]
};

Minibatch make_minibatch(const RolloutBuffer& buffer, const AdvantageSet& adv,
                         const std::vector<std::size_t>& rows);

// Uniform minibatch index draw (without replacement while the buffer lasts).
std::vector<std::size_t> sample_rows(std::size_t buffer_size, std::size_t count,
                                     std::mt19937_64& rng);

struct PPOUpdateStats {
  double policy_loss = 0.0;  // surrogate including the entropy bonus
  double value_loss = 0.0;   // weighted value error
  double entropy = 0.0;
  double clip_fraction = 0.0;  // share of samples with |ratio - 1| > eps_clip
};

struct PPOGrads {
  GradSet policy;
  GradSet value;
  PPOUpdateStats stats;
};

// Builds both losses on the minibatch and returns raw (unclipped) gradients,
// so callers can average across learners before clipping and stepping.
PPOGrads compute_ppo_grads(const PolicyNet& policy, const ValueNet& value,
                           const Minibatch& batch, const PPOConfig& cfg);

// One clipped optimizer step each for the policy and the value function.
PPOUpdateStats update_policy_value(PolicyNet& policy, ValueNet& value, Adam& policy_opt,
                                   Adam& value_opt, const Minibatch& batch,
                                   const PPOConfig& cfg);

}  // namespace mimic
