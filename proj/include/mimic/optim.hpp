#pragma once

#include <vector>

#include "mimic/net.hpp"

namespace mimic {

// Gradients as raw per-parameter buffers, aligned with a ParamList. Keeping
// them detached from the graph makes cross-learner averaging trivial.
using GradSet = std::vector<std::vector<double>>;

// Reads each parameter's accumulated gradient (zeros where none was set).
GradSet collect_grads(const ParamList& params);
void zero_grads(const ParamList& params);

double global_grad_norm(const GradSet& grads);
// Scales all gradients so the global norm is at most max_norm. Returns the
// pre-clip norm.
double clip_global_norm(GradSet& grads, double max_norm);

// Throws if any gradient is non-finite, naming the parameter.
void check_grads_finite(const ParamList& params, const GradSet& grads, const char* module);

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adaptive-moment optimizer over a fixed parameter list.
class Adam {
 public:
  explicit Adam(ParamList params, AdamConfig cfg = {});

  // One update from explicit gradients (e.g. averaged across learners).
  void step_with(const GradSet& grads);
  // Convenience: read gradients off the parameters, then update.
  void step();

  const ParamList& params() const { return params_; }
  AdamConfig& config() { return cfg_; }

 private:
  ParamList params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  int64_t t_ = 0;
};

}  // namespace mimic
