#include "mimic/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mimic/ops.hpp"

namespace mimic {

namespace {

void check_vector_len(const std::vector<double>& v, int64_t want, const char* what) {
  if (static_cast<int64_t>(v.size()) != want) {
    throw std::invalid_argument(std::string("rollout push: ") + what + " has " +
                                std::to_string(v.size()) + " values, expected " +
                                std::to_string(want));
  }
}

}  // namespace

void RolloutBuffer::push(std::vector<double> state, std::vector<double> action,
                         double log_prob, std::vector<double> next_state, double reward,
                         bool done, double value_old) {
  const int64_t state_len = shape_numel(state_shape);
  check_vector_len(state, state_len, "state");
  check_vector_len(next_state, state_len, "next state");
  check_vector_len(action, action_dim, "action");
  states.push_back(std::move(state));
  actions.push_back(std::move(action));
  log_probs_old.push_back(log_prob);
  next_states.push_back(std::move(next_state));
  rewards.push_back(reward);
  dones.push_back(done ? 1 : 0);
  values_old.push_back(value_old);
}

void RolloutBuffer::clear() {
  states.clear();
  actions.clear();
  log_probs_old.clear();
  next_states.clear();
  rewards.clear();
  dones.clear();
  values_old.clear();
}

AdvantageSet compute_advantages(const RolloutBuffer& buffer, double gamma, double lambda,
                                double bootstrap_value) {
  const std::size_t n = buffer.size();
  if (n == 0) {
    throw std::invalid_argument("advantage estimation needs a non-empty buffer");
  }
  AdvantageSet out;
  out.advantages.resize(n);
  out.returns.resize(n);
  double carry = 0.0;
  for (std::size_t j = n; j-- > 0;) {
    const bool done = buffer.dones[j] != 0;
    // When the episode continues, the successor state of row j is row j+1's
    // state (or, at the buffer edge, the caller-supplied bootstrap).
    const double next_value =
        done ? 0.0 : (j + 1 < n ? buffer.values_old[j + 1] : bootstrap_value);
    const double cont = done ? 0.0 : 1.0;
    const double delta =
        buffer.rewards[j] + gamma * cont * next_value - buffer.values_old[j];
    carry = delta + gamma * lambda * cont * carry;
    out.advantages[j] = carry;
    out.returns[j] = carry + buffer.values_old[j];
  }
  return out;
}

void normalize_advantages(std::vector<double>& advantages) {
  if (advantages.empty()) {
    return;
  }
  const double n = static_cast<double>(advantages.size());
  double mean = 0.0;
  for (double a : advantages) mean += a;
  mean /= n;
  double var = 0.0;
  for (double a : advantages) var += (a - mean) * (a - mean);
  var /= n;
  const double inv = 1.0 / (std::sqrt(var) + 1e-8);
  for (double& a : advantages) a = (a - mean) * inv;
}

Tensor ppo_policy_loss(const Tensor& log_prob_new, const Tensor& log_prob_old,
                       const Tensor& advantage, double eps_clip) {
  if (log_prob_new.ndim() != 1 || log_prob_old.shape() != log_prob_new.shape() ||
      advantage.shape() != log_prob_new.shape()) {
    throw std::invalid_argument(
        "policy loss wants three equal-length rank-1 tensors");
  }
  Tensor ratio = exp(sub(log_prob_new, log_prob_old));
  Tensor unclipped = mul(ratio, advantage);
  Tensor clipped = mul(clampv(ratio, 1.0 - eps_clip, 1.0 + eps_clip), advantage);
  return neg(mean(minimum(unclipped, clipped)));
}

Tensor value_loss(const Tensor& v_new, const Tensor& return_target) {
  if (v_new.shape() != return_target.shape()) {
    throw std::invalid_argument("value loss wants matching prediction/target shapes");
  }
  Tensor diff = sub(v_new, return_target);
  return mean(mul(diff, diff));
}

Minibatch make_minibatch(const RolloutBuffer& buffer, const AdvantageSet& adv,
                         const std::vector<std::size_t>& rows) {
  if (rows.empty()) {
    throw std::invalid_argument("minibatch needs at least one row");
  }
  if (adv.advantages.size() != buffer.size() || adv.returns.size() != buffer.size()) {
    throw std::invalid_argument("advantage set does not match the buffer");
  }
  const int b = static_cast<int>(rows.size());
  const int64_t state_len = shape_numel(buffer.state_shape);
  const int a_dim = buffer.action_dim;

  std::vector<double> states(static_cast<std::size_t>(b) * state_len);
  std::vector<double> actions(static_cast<std::size_t>(b) * a_dim);
  std::vector<double> lp_old(b), advantages(b), returns(b);
  for (int i = 0; i < b; ++i) {
    const std::size_t r = rows[i];
    if (r >= buffer.size()) {
      throw std::invalid_argument("minibatch row out of range");
    }
    std::copy(buffer.states[r].begin(), buffer.states[r].end(),
              states.begin() + static_cast<std::size_t>(i) * state_len);
    std::copy(buffer.actions[r].begin(), buffer.actions[r].end(),
              actions.begin() + static_cast<std::size_t>(i) * a_dim);
    lp_old[i] = buffer.log_probs_old[r];
    advantages[i] = adv.advantages[r];
    returns[i] = adv.returns[r];
  }
  normalize_advantages(advantages);

  Shape state_batch;
  state_batch.push_back(b);
  for (int d : buffer.state_shape) state_batch.push_back(d);

  Minibatch out;
  out.states = Tensor::from_data(state_batch, states, false);
  out.actions = Tensor::from_data({b, a_dim}, actions, false);
  out.log_probs_old = Tensor::from_data({b}, lp_old, false);
  out.advantages = Tensor::from_data({b}, advantages, false);
  out.returns = Tensor::from_data({b}, returns, false);
  return out;
}

std::vector<std::size_t> sample_rows(std::size_t buffer_size, std::size_t count,
                                     std::mt19937_64& rng) {
  if (buffer_size == 0) {
    throw std::invalid_argument("cannot sample from an empty buffer");
  }
  std::vector<std::size_t> rows(count);
  if (count <= buffer_size) {
    // Partial Fisher-Yates: the first `count` entries of a uniform shuffle.
    std::vector<std::size_t> pool(buffer_size);
    for (std::size_t i = 0; i < buffer_size; ++i) pool[i] = i;
    for (std::size_t i = 0; i < count; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, buffer_size - 1);
      std::swap(pool[i], pool[pick(rng)]);
      rows[i] = pool[i];
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, buffer_size - 1);
    for (std::size_t i = 0; i < count; ++i) rows[i] = pick(rng);
  }
  return rows;
}

PPOGrads compute_ppo_grads(const PolicyNet& policy, const ValueNet& value,
                           const Minibatch& batch, const PPOConfig& cfg) {
  PPOGrads out;
  const ParamList policy_params = policy.parameters();
  const ParamList value_params = value.parameters();

  // Policy: clipped surrogate minus the entropy bonus.
  zero_grads(policy_params);
  PolicyOutput po = policy.forward(batch.states);
  Tensor log_prob_new = gaussian_log_prob(po.mean, po.log_std, batch.actions);
  Tensor surrogate =
      ppo_policy_loss(log_prob_new, batch.log_probs_old, batch.advantages, cfg.eps_clip);
  Tensor entropy = gaussian_entropy(po.log_std);
  Tensor policy_total = add(surrogate, scale(entropy, -cfg.entropy_coef));
  backward(policy_total);
  out.policy = collect_grads(policy_params);
  check_grads_finite(policy_params, out.policy, "policy");
  zero_grads(policy_params);

  out.stats.policy_loss = policy_total.item();
  out.stats.entropy = entropy.item();
  {
    NoGradGuard ng;
    const int b = static_cast<int>(batch.log_probs_old.dim(0));
    int clipped_count = 0;
    for (int i = 0; i < b; ++i) {
      const double rho = std::exp(log_prob_new.at(i) - batch.log_probs_old.at(i));
      if (std::abs(rho - 1.0) > cfg.eps_clip) ++clipped_count;
    }
    out.stats.clip_fraction = static_cast<double>(clipped_count) / b;
  }

  // Value: weighted mean squared error against the return targets.
  zero_grads(value_params);
  Tensor v_new = value.forward(batch.states);
  Tensor value_total = scale(value_loss(v_new, batch.returns), cfg.value_coef);
  backward(value_total);
  out.value = collect_grads(value_params);
  check_grads_finite(value_params, out.value, "value");
  zero_grads(value_params);

  out.stats.value_loss = value_total.item();
  return out;
}

PPOUpdateStats update_policy_value(PolicyNet& policy, ValueNet& value, Adam& policy_opt,
                                   Adam& value_opt, const Minibatch& batch,
                                   const PPOConfig& cfg) {
  PPOGrads grads = compute_ppo_grads(policy, value, batch, cfg);
  clip_global_norm(grads.policy, cfg.max_grad_norm);
  clip_global_norm(grads.value, cfg.max_grad_norm);
  policy_opt.step_with(grads.policy);
  value_opt.step_with(grads.value);
  return grads.stats;
}

}  // namespace mimic
