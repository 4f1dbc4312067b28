#include "mimic/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <barrier>
#include <chrono>
#include <cmath>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "mimic/gail.hpp"
#include "mimic/metrics.hpp"
#include "mimic/ops.hpp"
#include "mimic/ppo.hpp"

namespace fs = std::filesystem;

namespace mimic {

GradSet average_gradients(const std::vector<NamedGradSet>& sets) {
  if (sets.empty()) {
    throw std::invalid_argument("gradient averaging needs at least one learner");
  }
  const NamedGradSet& ref = sets[0];
  if (ref.names.size() != ref.grads.size()) {
    throw std::runtime_error("gradient averaging: names and gradients misaligned");
  }
  for (std::size_t l = 1; l < sets.size(); ++l) {
    const NamedGradSet& s = sets[l];
    if (s.names.size() != ref.names.size()) {
      throw std::runtime_error("gradient averaging: learner " + std::to_string(l) +
                               " reports " + std::to_string(s.names.size()) +
                               " parameters, expected " + std::to_string(ref.names.size()));
    }
    for (std::size_t p = 0; p < ref.names.size(); ++p) {
      if (s.names[p] != ref.names[p]) {
        throw std::runtime_error("gradient averaging: parameter mismatch at slot " +
                                 std::to_string(p) + ": '" + s.names[p] + "' vs '" +
                                 ref.names[p] + "'");
      }
      if (s.grads[p].size() != ref.grads[p].size()) {
        throw std::runtime_error("gradient averaging: size mismatch for parameter '" +
                                 ref.names[p] + "'");
      }
    }
  }
  // Fixed learner-order accumulation keeps the reduction bit-reproducible.
  const double inv = 1.0 / static_cast<double>(sets.size());
  GradSet avg(ref.grads.size());
  for (std::size_t p = 0; p < ref.grads.size(); ++p) {
    avg[p].assign(ref.grads[p].size(), 0.0);
    for (std::size_t l = 0; l < sets.size(); ++l) {
      const std::vector<double>& g = sets[l].grads[p];
      for (std::size_t i = 0; i < g.size(); ++i) avg[p][i] += g[i];
    }
    for (double& x : avg[p]) x *= inv;
  }
  return avg;
}

// ---------------------------------------------------------------------------
// Expert pool

ExpertPool::ExpertPool(DemoSet demos, int k)
    : k_(k), res_(demos.resolution), episodes_(std::move(demos.episodes)) {
  if (k_ < 1) throw std::invalid_argument("stack depth must be >= 1");
  if (res_ < 1) throw std::invalid_argument("demonstrations have no resolution");
  for (int e = 0; e < static_cast<int>(episodes_.size()); ++e) {
    for (int t = 0; t < static_cast<int>(episodes_[e].size()); ++t) {
      index_.emplace_back(e, t);
    }
  }
  if (index_.empty()) {
    throw std::invalid_argument("demonstration set has no frames");
  }
}

void ExpertPool::write_state(int64_t idx, double* dst) const {
  const auto [e, t] = index_[static_cast<std::size_t>(idx)];
  const std::vector<Frame>& ep = episodes_[static_cast<std::size_t>(e)];
  const int n = res_ * res_;
  for (int j = 0; j < k_; ++j) {
    int src = t - k_ + 1 + j;
    if (src < 0) src = 0;  // episode start: repeat the first frame
    const std::vector<uint8_t>& px = ep[static_cast<std::size_t>(src)].px;
    double* out = dst + static_cast<std::size_t>(j) * n;
    for (int i = 0; i < n; ++i) out[i] = px[static_cast<std::size_t>(i)];
  }
}

Tensor ExpertPool::sample_batch(int count, std::mt19937_64& rng) const {
  if (count < 1) throw std::invalid_argument("expert batch needs at least one state");
  std::uniform_int_distribution<int64_t> pick(0, size() - 1);
  std::vector<double> data(static_cast<std::size_t>(count) * state_len());
  for (int i = 0; i < count; ++i) {
    write_state(pick(rng), data.data() + static_cast<std::size_t>(i) * state_len());
  }
  return Tensor::from_data({count, k_, res_, res_}, data, false);
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {
constexpr uint64_t kEvalSeedBase = 9000000ull;
}

double evaluate_policy(const PolicyNet& policy, int k, int resolution, int episodes,
                       std::vector<double>* per_episode) {
  HopperParams envp;
  NoGradGuard ng;
  if (per_episode) per_episode->clear();
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    HopperState st = env_reset(envp, kEvalSeedBase + static_cast<uint64_t>(e));
    const double x0 = st.x;
    FrameStack stack(k);
    stack.reset(render_to_frame(envp, st, resolution));
    bool done = false;
    while (!done) {
      Tensor s = frames_to_tensor(stack.frames());
      PolicyOutput po = policy.forward(s);
      StepResult sr = env_step(envp, st, po.mean.at(0), po.mean.at(1));
      st = sr.state;
      done = sr.done;
      stack.push(render_to_frame(envp, st, resolution));
    }
    const double p = st.x - x0;
    total += p;
    if (per_episode) per_episode->push_back(p);
  }
  return total / episodes;
}

// ---------------------------------------------------------------------------
// Training

namespace {

uint64_t mix_seed(uint64_t a, uint64_t b) {
  uint64_t x = a * 0x9e3779b97f4a7c15ull + b + 0x7f4a7c15ull;
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

struct IterStats {
  double reward_sum = 0.0;
  int episodes_done = 0;
  double progress_sum = 0.0;
  double acc_sum = 0.0;
  int acc_count = 0;
};

AgentConfig policy_agent_config(const TrainConfig& cfg) {
  AgentConfig a;
  a.k = cfg.k;
  a.colors = 1;
  a.resolution = cfg.resolution;
  a.non_local = variant_policy_non_local(cfg.variant);
  a.base_channels = cfg.base_channels;
  a.action_dim = 2;
  return a;
}

AgentConfig value_agent_config(const TrainConfig& cfg) {
  AgentConfig a = policy_agent_config(cfg);
  a.non_local = variant_value_non_local(cfg.variant);
  return a;
}

DiscConfig discriminator_config(const TrainConfig& cfg) {
  DiscConfig d;
  d.k = cfg.k;
  d.colors = 1;
  d.resolution = cfg.resolution;
  d.widths = disc_widths(cfg);
  d.non_local = variant_reward_non_local(cfg.variant);
  return d;
}

std::vector<std::string> param_names(const ParamList& ps) {
  std::vector<std::string> names;
  names.reserve(ps.size());
  for (const NamedTensor& p : ps) names.push_back(p.name);
  return names;
}

NamedGradSet zero_grad_template(const ParamList& ps) {
  NamedGradSet z;
  z.names = param_names(ps);
  z.grads.reserve(ps.size());
  for (const NamedTensor& p : ps) {
    z.grads.emplace_back(static_cast<std::size_t>(p.t.size()), 0.0);
  }
  return z;
}

// Appends one row, creating the file with its header first when needed, and
// flushes so logs stay readable while a run is still in progress.
void append_csv_row(const fs::path& path, const std::vector<std::string>& header,
                    const std::vector<std::string>& row) {
  const bool fresh = !fs::exists(path);
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw std::runtime_error("cannot append to " + path.string());
  auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      out << cells[i];
    }
    out << '\n';
  };
  if (fresh) line(header);
  line(row);
  out.flush();
}

const std::vector<std::string> kTrainLogHeader = {
    "iteration", "wall_time_s", "surrogate_return", "true_progress", "disc_accuracy"};
const std::vector<std::string> kEvalLogHeader = {"iteration", "progress"};

class Trainer {
 public:
  Trainer(const TrainConfig& cfg, uint64_t seed, const ExpertPool& expert,
          fs::path seed_dir)
      : cfg_(cfg),
        seed_(seed),
        expert_(expert),
        seed_dir_(std::move(seed_dir)),
        bar_(cfg.n_learners),
        grad_slots_(static_cast<std::size_t>(cfg.n_learners)),
        stat_slots_(static_cast<std::size_t>(cfg.n_learners)),
        hash_slots_(static_cast<std::size_t>(cfg.n_learners)),
        start_(std::chrono::steady_clock::now()) {
    learners_.reserve(static_cast<std::size_t>(cfg.n_learners));
    for (int i = 0; i < cfg.n_learners; ++i) {
      learners_.push_back(std::make_unique<Learner>(cfg_, seed_, i));
    }
  }

  SeedResult run() {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(cfg_.n_learners));
    for (int i = 0; i < cfg_.n_learners; ++i) {
      threads.emplace_back(&Trainer::worker, this, i);
    }
    for (std::thread& t : threads) t.join();
    if (error_) std::rethrow_exception(error_);
    SeedResult r;
    r.seed = seed_;
    r.iterations = rows_;
    r.evals = evals_;
    r.final_eval_returns = final_eval_returns_;
    r.best_eval = best_eval_;
    r.reached_target = reached_target_;
    return r;
  }

  void save_checkpoints(const fs::path& dir, uint64_t arch_hash) const {
    const Learner& L = *learners_[0];
    save_checkpoint((dir / "policy.ckpt").string(), arch_hash, L.policy.parameters());
    save_checkpoint((dir / "value.ckpt").string(), arch_hash, L.value.parameters());
    save_checkpoint((dir / "disc.ckpt").string(), arch_hash, L.disc.parameters());
  }

 private:
  struct Learner {
    Learner(const TrainConfig& cfg, uint64_t seed, int id_)
        : id(id_),
          policy(build_policy(policy_agent_config(cfg), seed)),
          value(build_value(value_agent_config(cfg), seed)),
          disc(build_discriminator(discriminator_config(cfg), seed)),
          rng(mix_seed(seed, 1000 + static_cast<uint64_t>(id_))),
          stack(cfg.k) {
      popt = std::make_unique<Adam>(policy.parameters(),
                                    AdamConfig{cfg.lr_policy, 0.9, 0.999, 1e-8});
      vopt = std::make_unique<Adam>(value.parameters(),
                                    AdamConfig{cfg.lr_value, 0.9, 0.999, 1e-8});
      dopt = std::make_unique<Adam>(disc.parameters(),
                                    AdamConfig{cfg.lr_disc, 0.9, 0.999, 1e-8});
      buf.state_shape = {cfg.k, cfg.resolution, cfg.resolution};
      buf.action_dim = 2;
      zero_policy = zero_grad_template(policy.parameters());
      zero_value = zero_grad_template(value.parameters());
      zero_disc = zero_grad_template(disc.parameters());
    }

    int id;
    PolicyNet policy;
    ValueNet value;
    DiscNet disc;
    std::unique_ptr<Adam> popt, vopt, dopt;
    std::mt19937_64 rng;
    RolloutBuffer buf;
    double bootstrap_value = 0.0;

    HopperParams envp;
    HopperState st;
    FrameStack stack;
    bool episode_live = false;
    double episode_x0 = 0.0;
    uint64_t episode_counter = 0;

    NamedGradSet zero_policy, zero_value, zero_disc;
    IterStats stats;
  };

  // Runs fn unless the run is aborting; a thrown exception flips the shared
  // stop flag so every learner exits at the next synchronization point.
  template <typename F>
  void guarded(F&& fn) {
    if (stop_.load(std::memory_order_acquire)) return;
    try {
      fn();
    } catch (...) {
      fail(std::current_exception());
    }
  }

  void fail(std::exception_ptr e) {
    {
      std::lock_guard<std::mutex> lk(err_mu_);
      if (!error_) error_ = e;
    }
    stop_.store(true, std::memory_order_release);
  }

  // Two-phase all-reduce: publish, wait, every learner computes the same
  // deterministic average, wait again so slots are not overwritten early.
  GradSet reduce(int id, NamedGradSet local) {
    grad_slots_[static_cast<std::size_t>(id)] = std::move(local);
    bar_.arrive_and_wait();
    GradSet avg;
    guarded([&] { avg = average_gradients(grad_slots_); });
    bar_.arrive_and_wait();
    return avg;
  }

  double seconds_since_start() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

  void start_episode(Learner& L) {
    const uint64_t es = mix_seed(mix_seed(seed_, 77 + static_cast<uint64_t>(L.id)),
                                 L.episode_counter++);
    L.st = env_reset(L.envp, es);
    L.stack.reset(render_to_frame(L.envp, L.st, cfg_.resolution));
    L.episode_x0 = L.st.x;
    L.episode_live = true;
  }

  void collect(Learner& L) {
    NoGradGuard ng;
    L.buf.clear();  // the buffer is flushed across outer iterations
    const int slen = cfg_.k * cfg_.resolution * cfg_.resolution;
    std::normal_distribution<double> gauss(0.0, 1.0);
    while (static_cast<int>(L.buf.size()) < cfg_.c_max) {
      if (!L.episode_live) start_episode(L);
      std::vector<double> sdata(static_cast<std::size_t>(slen));
      copy_stack_into(L.stack.frames(), sdata.data());

      double mu[2], lsd[2];
      {
        Tensor s = Tensor::from_data({1, cfg_.k, cfg_.resolution, cfg_.resolution}, sdata,
                                     false);
        PolicyOutput po = L.policy.forward(s);
        mu[0] = po.mean.at(0);
        mu[1] = po.mean.at(1);
        lsd[0] = po.log_std.at(0);
        lsd[1] = po.log_std.at(1);
      }
      double a[2];
      double lp = 0.0;
      for (int j = 0; j < 2; ++j) {
        const double z = gauss(L.rng);
        a[j] = mu[j] + std::exp(lsd[j]) * z;
        lp += -0.5 * z * z - lsd[j] - 0.5 * std::log(2.0 * 3.14159265358979323846);
      }

      StepResult sr = env_step(L.envp, L.st, a[0], a[1]);
      L.st = sr.state;
      L.stack.push(render_to_frame(L.envp, L.st, cfg_.resolution));
      std::vector<double> nsdata(static_cast<std::size_t>(slen));
      copy_stack_into(L.stack.frames(), nsdata.data());

      L.buf.push(std::move(sdata), {a[0], a[1]}, lp, std::move(nsdata), 0.0, sr.done, 0.0);
      if (sr.done) {
        L.stats.episodes_done += 1;
        L.stats.progress_sum += L.st.x - L.episode_x0;
        L.episode_live = false;
      }
    }
    fill_rewards_values(L);
  }

  // Deferred, batched reward and value computation over the fresh buffer.
  void fill_rewards_values(Learner& L) {
    NoGradGuard ng;
    const int n = static_cast<int>(L.buf.size());
    const int slen = cfg_.k * cfg_.resolution * cfg_.resolution;
    const int chunk = 64;
    for (int off = 0; off < n; off += chunk) {
      const int m = std::min(chunk, n - off);
      std::vector<double> ns(static_cast<std::size_t>(m) * slen);
      std::vector<double> s(static_cast<std::size_t>(m) * slen);
      for (int i = 0; i < m; ++i) {
        std::copy(L.buf.next_states[static_cast<std::size_t>(off + i)].begin(),
                  L.buf.next_states[static_cast<std::size_t>(off + i)].end(),
                  ns.begin() + static_cast<std::size_t>(i) * slen);
        std::copy(L.buf.states[static_cast<std::size_t>(off + i)].begin(),
                  L.buf.states[static_cast<std::size_t>(off + i)].end(),
                  s.begin() + static_cast<std::size_t>(i) * slen);
      }
      const Shape shape = {m, cfg_.k, cfg_.resolution, cfg_.resolution};
      std::vector<double> rewards =
          surrogate_rewards(L.disc, Tensor::from_data(shape, ns, false));
      Tensor values = L.value.forward(Tensor::from_data(shape, s, false));
      for (int i = 0; i < m; ++i) {
        L.buf.rewards[static_cast<std::size_t>(off + i)] = rewards[static_cast<std::size_t>(i)];
        L.buf.values_old[static_cast<std::size_t>(off + i)] = values.at(i);
      }
    }
    L.bootstrap_value = 0.0;
    if (L.buf.dones.back() == 0) {
      Tensor last = Tensor::from_data({1, cfg_.k, cfg_.resolution, cfg_.resolution},
                                      L.buf.next_states.back(), false);
      L.bootstrap_value = L.value.forward(last).at(0);
    }
    for (double r : L.buf.rewards) L.stats.reward_sum += r;
  }

  Tensor policy_state_batch(Learner& L, int count) {
    const int slen = cfg_.k * cfg_.resolution * cfg_.resolution;
    std::vector<std::size_t> rows = sample_rows(L.buf.size(), static_cast<std::size_t>(count),
                                                L.rng);
    std::vector<double> data(static_cast<std::size_t>(count) * slen);
    for (int i = 0; i < count; ++i) {
      std::copy(L.buf.next_states[rows[static_cast<std::size_t>(i)]].begin(),
                L.buf.next_states[rows[static_cast<std::size_t>(i)]].end(),
                data.begin() + static_cast<std::size_t>(i) * slen);
    }
    return Tensor::from_data({count, cfg_.k, cfg_.resolution, cfg_.resolution}, data, false);
  }

  void disc_update(Learner& L) {
    NamedGradSet g = L.zero_disc;
    DiscUpdateStats st;
    bool have_stats = false;
    guarded([&] {
      const int half = std::max(1, std::min(cfg_.minibatch / 2,
                                            static_cast<int>(L.buf.size())));
      Tensor pol = policy_state_batch(L, half);
      Tensor exp = expert_.sample_batch(half, L.rng);
      DiscGrads dg = compute_disc_grads(L.disc, pol, exp, cfg_.nu, L.rng);
      g.grads = std::move(dg.grads);
      st = dg.stats;
      have_stats = true;
    });
    GradSet avg = reduce(L.id, std::move(g));
    guarded([&] {
      L.dopt->step_with(avg);
      if (have_stats) {
        L.stats.acc_sum += st.accuracy;
        L.stats.acc_count += 1;
      }
    });
  }

  void ppo_update(Learner& L, const AdvantageSet& adv, const PPOConfig& pcfg) {
    NamedGradSet gp = L.zero_policy;
    NamedGradSet gv = L.zero_value;
    guarded([&] {
      const std::size_t count =
          std::min<std::size_t>(static_cast<std::size_t>(cfg_.minibatch), L.buf.size());
      std::vector<std::size_t> rows = sample_rows(L.buf.size(), count, L.rng);
      Minibatch mb = make_minibatch(L.buf, adv, rows);
      PPOGrads g = compute_ppo_grads(L.policy, L.value, mb, pcfg);
      gp.grads = std::move(g.policy);
      gv.grads = std::move(g.value);
    });
    GradSet pavg = reduce(L.id, std::move(gp));
    guarded([&] {
      clip_global_norm(pavg, cfg_.max_grad_norm);
      L.popt->step_with(pavg);
    });
    GradSet vavg = reduce(L.id, std::move(gv));
    guarded([&] {
      clip_global_norm(vavg, cfg_.max_grad_norm);
      L.vopt->step_with(vavg);
    });
  }

  uint64_t param_hash(const Learner& L) const {
    uint64_t h = 14695981039346656037ull;
    auto mix = [&h](const ParamList& ps) {
      for (const NamedTensor& p : ps) {
        for (int64_t i = 0; i < p.t.size(); ++i) {
          const double d = p.t.at(i);
          uint64_t bits;
          std::memcpy(&bits, &d, 8);
          for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (8 * b)) & 0xff;
            h *= 1099511628211ull;
          }
        }
      }
    };
    mix(L.policy.parameters());
    mix(L.value.parameters());
    mix(L.disc.parameters());
    return h;
  }

  void sync_check(Learner& L) {
    uint64_t h = 0;
    guarded([&] { h = param_hash(L); });
    hash_slots_[static_cast<std::size_t>(L.id)] = h;
    bar_.arrive_and_wait();
    guarded([&] {
      for (std::size_t i = 1; i < hash_slots_.size(); ++i) {
        if (hash_slots_[i] != hash_slots_[0]) {
          throw std::runtime_error("learner parameters diverged after update (learner " +
                                   std::to_string(i) + ")");
        }
      }
    });
    bar_.arrive_and_wait();
  }

  void end_of_iteration(Learner& L, int iter) {
    stat_slots_[static_cast<std::size_t>(L.id)] = L.stats;
    L.stats = IterStats{};
    bar_.arrive_and_wait();
    if (L.id == 0) {
      guarded([&] { log_iteration(L, iter); });
    }
    bar_.arrive_and_wait();
  }

  void log_iteration(Learner& L0, int iter) {
    IterStats tot;
    for (const IterStats& s : stat_slots_) {
      tot.reward_sum += s.reward_sum;
      tot.episodes_done += s.episodes_done;
      tot.progress_sum += s.progress_sum;
      tot.acc_sum += s.acc_sum;
      tot.acc_count += s.acc_count;
    }
    IterationRow row;
    row.iteration = iter;
    row.wall_time_s = seconds_since_start();
    row.surrogate_return =
        tot.episodes_done > 0 ? tot.reward_sum / tot.episodes_done : tot.reward_sum;
    row.true_progress = tot.episodes_done > 0 ? tot.progress_sum / tot.episodes_done : 0.0;
    row.disc_accuracy = tot.acc_count > 0 ? tot.acc_sum / tot.acc_count : 0.5;
    rows_.push_back(row);
    append_csv_row(seed_dir_ / "train_log.csv", kTrainLogHeader,
                   {std::to_string(row.iteration), format_double(row.wall_time_s),
                    format_double(row.surrogate_return), format_double(row.true_progress),
                    format_double(row.disc_accuracy)});

    const bool last = iter == cfg_.i_max;
    if (iter % cfg_.eval_every == 0 || last) {
      std::vector<double> per;
      const double p = evaluate_policy(L0.policy, cfg_.k, cfg_.resolution,
                                       cfg_.eval_episodes, &per);
      evals_.push_back({iter, p});
      append_csv_row(seed_dir_ / "eval_log.csv", kEvalLogHeader,
                     {std::to_string(iter), format_double(p)});
      final_eval_returns_ = std::move(per);
      best_eval_ = std::max(best_eval_, p);
      if (cfg_.target_progress > 0.0 && p >= cfg_.target_progress) {
        reached_target_ = true;
        stop_.store(true, std::memory_order_release);
      }
    }
  }

  void worker(int id) {
    Learner& L = *learners_[static_cast<std::size_t>(id)];
    const PPOConfig pcfg{cfg_.gamma,        cfg_.gae_lambda, cfg_.eps_clip,
                         cfg_.entropy_coef, cfg_.value_coef, cfg_.max_grad_norm};
    for (int iter = 1; iter <= cfg_.i_max; ++iter) {
      guarded([&] { collect(L); });
      AdvantageSet adv;
      guarded([&] {
        adv = compute_advantages(L.buf, cfg_.gamma, cfg_.gae_lambda, L.bootstrap_value);
      });
      for (int t = 0; t < cfg_.t_max; ++t) {
        for (int d = 0; d < cfg_.d_max; ++d) disc_update(L);
        for (int g = 0; g < cfg_.g_max; ++g) ppo_update(L, adv, pcfg);
      }
      guarded([&] { L.buf.clear(); });  // Flush C
      if (cfg_.verify_sync) sync_check(L);
      end_of_iteration(L, iter);
      if (stop_.load(std::memory_order_acquire)) break;
    }
  }

  const TrainConfig& cfg_;
  uint64_t seed_;
  const ExpertPool& expert_;
  fs::path seed_dir_;
  std::vector<std::unique_ptr<Learner>> learners_;

  std::barrier<> bar_;
  std::vector<NamedGradSet> grad_slots_;
  std::vector<IterStats> stat_slots_;
  std::vector<uint64_t> hash_slots_;

  std::atomic<bool> stop_{false};
  std::mutex err_mu_;
  std::exception_ptr error_;

  std::chrono::steady_clock::time_point start_;
  std::vector<IterationRow> rows_;
  std::vector<EvalRow> evals_;
  std::vector<double> final_eval_returns_;
  double best_eval_ = -std::numeric_limits<double>::infinity();
  bool reached_target_ = false;
};

void write_eval_returns(const fs::path& path, const std::vector<double>& returns) {
  CsvTable t;
  t.header = {"episode", "progress"};
  for (std::size_t i = 0; i < returns.size(); ++i) {
    t.rows.push_back({std::to_string(i), format_double(returns[i])});
  }
  write_csv(path.string(), t);
}

}  // namespace

SeedResult run_training_seed(const TrainConfig& cfg, uint64_t seed) {
  validate_config(cfg);
  // Aborts before any training when the demos do not match the configuration.
  DemoSet demos = load_demos(cfg.demo_path, cfg.resolution);
  ExpertPool pool(std::move(demos), cfg.k);

  const fs::path dir = fs::path(cfg.out_dir) / ("seed_" + std::to_string(seed));
  fs::create_directories(dir);
  // Logs stream during training; clear leftovers from any earlier run here.
  fs::remove(dir / "train_log.csv");
  fs::remove(dir / "eval_log.csv");

  Trainer trainer(cfg, seed, pool, dir);
  SeedResult res = trainer.run();
  res.seed = seed;
  res.dir = dir.string();

  write_eval_returns(dir / "eval_returns.csv", res.final_eval_returns);
  trainer.save_checkpoints(dir, architecture_signature(cfg));
  return res;
}

std::vector<SeedResult> run_training(const TrainConfig& cfg) {
  validate_config(cfg);
  fs::create_directories(cfg.out_dir);
  {
    std::ofstream out(fs::path(cfg.out_dir) / "config.txt", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write config into " + cfg.out_dir);
    out << config_to_text(cfg);
  }
  std::vector<SeedResult> results;
  results.reserve(cfg.seeds.size());
  for (uint64_t s : cfg.seeds) {
    results.push_back(run_training_seed(cfg, s));
  }
  emit_report(cfg.out_dir);
  return results;
}

// ---------------------------------------------------------------------------
// Reporting

namespace {

int find_column(const CsvTable& t, const std::string& name) {
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (t.header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace

void emit_report(const std::string& run_dir) {
  std::vector<fs::path> seed_dirs;
  for (const auto& entry : fs::directory_iterator(run_dir)) {
    if (entry.is_directory() && entry.path().filename().string().rfind("seed_", 0) == 0) {
      seed_dirs.push_back(entry.path());
    }
  }
  std::sort(seed_dirs.begin(), seed_dirs.end(),
            [](const fs::path& a, const fs::path& b) {
              auto num = [](const fs::path& p) {
                const std::string s = p.filename().string().substr(5);
                try {
                  return std::stoull(s);
                } catch (const std::exception&) {
                  return std::numeric_limits<unsigned long long>::max();
                }
              };
              const auto na = num(a), nb = num(b);
              if (na != nb) return na < nb;
              return a.filename().string() < b.filename().string();
            });
  if (seed_dirs.empty()) {
    throw std::runtime_error("no seed directories under " + run_dir);
  }

  // Per-seed training curves (iteration -> true progress).
  std::vector<std::vector<std::pair<int, double>>> curves;
  std::vector<double> pooled_returns;
  std::vector<PlotSeries> plot;
  for (const fs::path& sd : seed_dirs) {
    const fs::path log = sd / "train_log.csv";
    if (fs::exists(log)) {
      CsvTable t = read_csv(log.string());
      const int ci = find_column(t, "iteration");
      const int cp = find_column(t, "true_progress");
      if (ci >= 0 && cp >= 0) {
        std::vector<std::pair<int, double>> curve;
        PlotSeries ps;
        ps.name = sd.filename().string();
        for (const auto& row : t.rows) {
          const int it = std::stoi(row[static_cast<std::size_t>(ci)]);
          const double v = std::stod(row[static_cast<std::size_t>(cp)]);
          curve.emplace_back(it, v);
          ps.x.push_back(it);
          ps.y.push_back(v);
        }
        curves.push_back(std::move(curve));
        plot.push_back(std::move(ps));
      }
    }
    const fs::path ret = sd / "eval_returns.csv";
    if (fs::exists(ret)) {
      CsvTable t = read_csv(ret.string());
      const int cp = find_column(t, "progress");
      if (cp >= 0) {
        for (const auto& row : t.rows) {
          pooled_returns.push_back(std::stod(row[static_cast<std::size_t>(cp)]));
        }
      }
    }
  }

  // Mean/std across seeds for every iteration present anywhere.
  std::vector<int> iters;
  for (const auto& c : curves) {
    for (const auto& [it, v] : c) iters.push_back(it);
  }
  std::sort(iters.begin(), iters.end());
  iters.erase(std::unique(iters.begin(), iters.end()), iters.end());

  CsvTable curve_csv;
  curve_csv.header = {"iteration", "mean_true_progress", "std_true_progress"};
  PlotSeries mean_series;
  mean_series.name = "mean";
  for (int it : iters) {
    std::vector<double> vals;
    for (const auto& c : curves) {
      for (const auto& [ci, v] : c) {
        if (ci == it) vals.push_back(v);
      }
    }
    if (vals.empty()) continue;
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= static_cast<double>(vals.size());
    curve_csv.rows.push_back({std::to_string(it), format_double(mean),
                              format_double(std::sqrt(var))});
    mean_series.x.push_back(it);
    mean_series.y.push_back(mean);
  }
  write_csv((fs::path(run_dir) / "curve.csv").string(), curve_csv);
  plot.insert(plot.begin(), std::move(mean_series));
  write_svg_plot((fs::path(run_dir) / "curve.svg").string(), "forward progress", plot);

  CsvTable ccdf_csv;
  ccdf_csv.header = {"threshold", "survival"};
  double area = 0.0;
  double mean_final = 0.0;
  if (!pooled_returns.empty()) {
    CCDFReport rep = ccdf(pooled_returns);
    for (std::size_t i = 0; i < rep.thresholds.size(); ++i) {
      ccdf_csv.rows.push_back({format_double(rep.thresholds[i]),
                               format_double(rep.survival[i])});
    }
    area = rep.area;
    for (double r : pooled_returns) mean_final += r;
    mean_final /= static_cast<double>(pooled_returns.size());
  }
  write_csv((fs::path(run_dir) / "ccdf.csv").string(), ccdf_csv);

  CsvTable summary;
  summary.header = {"seeds", "eval_returns", "area_under_ccdf", "mean_final_progress"};
  summary.rows.push_back({std::to_string(seed_dirs.size()),
                          std::to_string(pooled_returns.size()), format_double(area),
                          format_double(mean_final)});
  write_csv((fs::path(run_dir) / "summary.csv").string(), summary);
}

}  // namespace mimic
