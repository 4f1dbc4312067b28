#include "mimic/gail.hpp"

#include <cmath>
#include <stdexcept>

#include "mimic/ops.hpp"

namespace mimic {

namespace {

void check_batch(const Tensor& policy_states, const Tensor& expert_states) {
  if (!policy_states.defined() || !expert_states.defined() || policy_states.size() == 0 ||
      expert_states.size() == 0) {
    throw std::invalid_argument("discriminator batch must be non-empty");
  }
  if (policy_states.shape() != expert_states.shape()) {
    throw std::invalid_argument("policy and expert batches must have identical shapes "
                                "(equal mixture)");
  }
}

}  // namespace

Tensor gail_value_fn(const LogitFn& logit, const Tensor& policy_states,
                     const Tensor& expert_states) {
  check_batch(policy_states, expert_states);
  Tensor zp = logit(policy_states);
  Tensor ze = logit(expert_states);
  // log(1 - sigmoid(z)) = -softplus(z); log sigmoid(z) = -softplus(-z).
  return neg(add(mean(softplus(zp)), mean(softplus(neg(ze)))));
}

Tensor gradient_penalty_fn(const LogitFn& logit, const Tensor& policy_states,
                           const Tensor& expert_states, std::mt19937_64& rng) {
  check_batch(policy_states, expert_states);
  const int64_t b = policy_states.dim(0);
  const int64_t per = policy_states.size() / b;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<double> mix(static_cast<size_t>(policy_states.size()));
  const auto& pd = policy_states.data();
  const auto& ed = expert_states.data();
  for (int64_t i = 0; i < b; ++i) {
    const double eps = u01(rng);
    for (int64_t j = 0; j < per; ++j) {
      const int64_t at = i * per + j;
      mix[static_cast<size_t>(at)] = eps * ed[at] + (1.0 - eps) * pd[at];
    }
  }
  Tensor interp = Tensor::from_data(policy_states.shape(), std::move(mix), true);
  Tensor z = logit(interp);
  // Samples are independent, so the gradient of the summed logits holds each
  // sample's own input gradient.
  Tensor g = grad_of(sum(z), {interp}, /*create_graph=*/true)[0];
  Tensor g2 = reshape(g, {b, per});
  Tensor norms = sqrt(add_scalar(row_sum(mul(g2, g2)), 1e-12));
  Tensor dev = add_scalar(norms, -1.0);
  return mean(mul(dev, dev));
}

Tensor discriminator_loss_fn(const LogitFn& logit, const Tensor& policy_states,
                             const Tensor& expert_states, double nu, std::mt19937_64& rng) {
  if (nu < 0.0) throw std::invalid_argument("penalty coefficient must be >= 0");
  Tensor loss = neg(gail_value_fn(logit, policy_states, expert_states));
  if (nu > 0.0)
    loss = add(loss, scale(gradient_penalty_fn(logit, policy_states, expert_states, rng), nu));
  return loss;
}

Tensor gail_value(const DiscNet& d, const Tensor& policy_states, const Tensor& expert_states,
                  bool training) {
  return gail_value_fn([&](const Tensor& x) { return d.logit(x, training); }, policy_states,
                       expert_states);
}

Tensor gradient_penalty(const DiscNet& d, const Tensor& policy_states,
                        const Tensor& expert_states, std::mt19937_64& rng, bool training) {
  return gradient_penalty_fn([&](const Tensor& x) { return d.logit(x, training); },
                             policy_states, expert_states, rng);
}

Tensor discriminator_loss(const DiscNet& d, const Tensor& policy_states,
                          const Tensor& expert_states, double nu, std::mt19937_64& rng,
                          bool training) {
  return discriminator_loss_fn([&](const Tensor& x) { return d.logit(x, training); },
                               policy_states, expert_states, nu, rng);
}

double surrogate_reward(double d_prob) {
  const double d = std::min(std::max(d_prob, kRewardClamp), 1.0 - kRewardClamp);
  return -std::log(1.0 - d);
}

std::vector<double> surrogate_rewards(const DiscNet& d, const Tensor& states) {
  NoGradGuard ng;
  Tensor p = d.prob(states, /*training=*/false);
  std::vector<double> out(static_cast<size_t>(p.size()));
  for (int64_t i = 0; i < p.size(); ++i) out[static_cast<size_t>(i)] = surrogate_reward(p.at(i));
  return out;
}

DiscGrads compute_disc_grads(const DiscNet& d, const Tensor& policy_states,
                             const Tensor& expert_states, double nu,
                             std::mt19937_64& rng) {
  check_batch(policy_states, expert_states);
  DiscGrads out;
  const ParamList params = d.parameters();
  zero_grads(params);
  Tensor value = gail_value(d, policy_states, expert_states, /*training=*/true);
  Tensor penalty = gradient_penalty(d, policy_states, expert_states, rng, /*training=*/true);
  Tensor loss = add(neg(value), scale(penalty, nu));
  backward(loss);
  out.stats.value = value.item();
  out.stats.penalty = penalty.item();
  out.stats.loss = loss.item();

  out.grads = collect_grads(params);
  check_grads_finite(params, out.grads, "discriminator");
  zero_grads(params);

  {
    NoGradGuard ng;
    Tensor dp = d.prob(policy_states, false);
    Tensor de = d.prob(expert_states, false);
    int correct = 0;
    for (int64_t i = 0; i < dp.size(); ++i) correct += dp.at(i) < 0.5 ? 1 : 0;
    for (int64_t i = 0; i < de.size(); ++i) correct += de.at(i) >= 0.5 ? 1 : 0;
    out.stats.accuracy =
        static_cast<double>(correct) / static_cast<double>(dp.size() + de.size());
  }
  return out;
}

DiscUpdateStats update_discriminator(DiscNet& d, Adam& opt, const Tensor& policy_states,
                                     const Tensor& expert_states, double nu,
                                     std::mt19937_64& rng) {
  DiscGrads g = compute_disc_grads(d, policy_states, expert_states, nu, rng);
  opt.step_with(g.grads);
  return g.stats;
}

}  // namespace mimic
