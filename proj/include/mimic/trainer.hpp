#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mimic/config.hpp"
#include "mimic/demo.hpp"
#include "mimic/env.hpp"
#include "mimic/net.hpp"
#include "mimic/optim.hpp"
#include "mimic/tensor.hpp"

namespace mimic {

// Gradients tagged with their parameter names, as reported by one learner.
struct NamedGradSet {
  std::vector<std::string> names;
  GradSet grads;
};

// Arithmetic mean per parameter across learners, accumulated in learner order
// so the reduction is bit-reproducible. Throws when learners disagree on
// parameter names or sizes (missing/extra parameters abort).
GradSet average_gradients(const std::vector<NamedGradSet>& sets);

// Expert stacked states assembled on demand from raw demonstration frames,
// with episode starts padded by their first frame.
class ExpertPool {
 public:
  ExpertPool(DemoSet demos, int k);
  int64_t size() const { return static_cast<int64_t>(index_.size()); }
  int state_len() const { return k_ * res_ * res_; }
  Shape state_shape() const { return {k_, res_, res_}; }
  // Writes stacked state `idx` as k*res*res doubles (raw 0..255 values).
  void write_state(int64_t idx, double* dst) const;
  // [count, k, res, res] tensor of uniformly drawn stacked states.
  Tensor sample_batch(int count, std::mt19937_64& rng) const;

 private:
  int k_ = 1;
  int res_ = 0;
  std::vector<std::vector<Frame>> episodes_;
  std::vector<std::pair<int, int>> index_;  // (episode, time)
};

struct IterationRow {
  int iteration = 0;        // 1-based outer iteration
  double wall_time_s = 0.0;
  double surrogate_return = 0.0;  // mean discriminator reward per finished episode
  double true_progress = 0.0;     // mean forward progress, logging only
  double disc_accuracy = 0.0;
};

struct EvalRow {
  int iteration = 0;
  double progress = 0.0;  // mean forward progress over the evaluation episodes
};

struct SeedResult {
  uint64_t seed = 0;
  std::string dir;  // per-seed artifact directory
  std::vector<IterationRow> iterations;
  std::vector<EvalRow> evals;
  std::vector<double> final_eval_returns;  // per-episode progress at the last evaluation
  double best_eval = 0.0;
  bool reached_target = false;
};

// Mean-action rollouts at fixed evaluation seeds; returns the mean forward
// progress and, optionally, the per-episode scores.
double evaluate_policy(const PolicyNet& policy, int k, int resolution, int episodes,
                       std::vector<double>* per_episode = nullptr);

// One full training run for a single seed: parallel learners with synchronous
// gradient averaging, per-iteration logging, periodic evaluation, checkpoint
// and CSV artifacts under <out_dir>/seed_<seed>/.
SeedResult run_training_seed(const TrainConfig& cfg, uint64_t seed);

// All configured seeds plus the aggregate report in cfg.out_dir.
std::vector<SeedResult> run_training(const TrainConfig& cfg);

// Aggregates per-seed artifacts in `run_dir` into curve/ccdf/summary CSVs and
// an SVG learning-curve plot. Tolerates partially written runs.
void emit_report(const std::string& run_dir);

}  // namespace mimic
