#pragma once

#include <functional>
#include <random>
#include <vector>

#include "mimic/net.hpp"
#include "mimic/optim.hpp"

namespace mimic {

// Batched pre-sigmoid scorer: [B, ...] states -> [B] logits. The adversarial
// objective and its regularizer are written against this so they work for the
// image discriminator and for small analytic models in tests alike.
using LogitFn = std::function<Tensor(const Tensor&)>;

// Mean log(1 - D) over policy states plus mean log D over expert states,
// computed via softplus of the logits so extreme scores stay finite. Always
// <= 0; a perfect classifier approaches 0. Throws unless both batches are
// non-empty and equally sized.
Tensor gail_value_fn(const LogitFn& logit, const Tensor& policy_states,
                     const Tensor& expert_states);

// One-centered gradient penalty on per-pair interpolants epsilon * expert +
// (1 - epsilon) * policy, epsilon ~ U(0,1) drawn per pair. Differentiates the
// logit path (pre-sigmoid) with a double-backward-capable graph.
Tensor gradient_penalty_fn(const LogitFn& logit, const Tensor& policy_states,
                           const Tensor& expert_states, std::mt19937_64& rng);

// -gail_value + nu * gradient_penalty.
Tensor discriminator_loss_fn(const LogitFn& logit, const Tensor& policy_states,
                             const Tensor& expert_states, double nu, std::mt19937_64& rng);

// DiscNet-facing wrappers. `training` selects whether spectral power
// iteration state advances during the forward passes.
Tensor gail_value(const DiscNet& d, const Tensor& policy_states, const Tensor& expert_states,
                  bool training);
Tensor gradient_penalty(const DiscNet& d, const Tensor& policy_states,
                        const Tensor& expert_states, std::mt19937_64& rng, bool training);
Tensor discriminator_loss(const DiscNet& d, const Tensor& policy_states,
                          const Tensor& expert_states, double nu, std::mt19937_64& rng,
                          bool training);

// Surrogate reward -log(1 - D) with D clamped to [delta, 1 - delta] so the
// result lies in [0, -log delta].
constexpr double kRewardClamp = 1e-6;
double surrogate_reward(double d_prob);
// Evaluation-mode rewards for a batch of stacked states.
std::vector<double> surrogate_rewards(const DiscNet& d, const Tensor& states);

struct DiscUpdateStats {
  double loss = 0.0;
  double value = 0.0;     // gail_value at the pre-update parameters
  double penalty = 0.0;   // gradient penalty term
  double accuracy = 0.0;  // fraction of correctly classified samples
};

struct DiscGrads {
  GradSet grads;  // aligned with d.parameters()
  DiscUpdateStats stats;
};

// Gradients of the regularized loss over an equal policy/expert mixture,
// without an optimizer step, so callers can average across learners first.
// Throws on non-finite gradients, naming the parameter.
DiscGrads compute_disc_grads(const DiscNet& d, const Tensor& policy_states,
                             const Tensor& expert_states, double nu,
                             std::mt19937_64& rng);

// One Adam step on the regularized loss over an equal policy/expert mixture.
DiscUpdateStats update_discriminator(DiscNet& d, Adam& opt, const Tensor& policy_states,
                                     const Tensor& expert_states, double nu,
                                     std::mt19937_64& rng);

}  // namespace mimic
