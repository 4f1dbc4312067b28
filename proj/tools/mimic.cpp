// Command line front end: demo recording, training, evaluation, reporting.
#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mimic/config.hpp"
#include "mimic/demo.hpp"
#include "mimic/env.hpp"
#include "mimic/metrics.hpp"
#include "mimic/net.hpp"
#include "mimic/trainer.hpp"

namespace fs = std::filesystem;
using namespace mimic;

namespace {

std::vector<uint64_t> parse_seed_list(const std::string& text) {
  std::vector<uint64_t> seeds;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    const std::string item = text.substr(pos, comma - pos);
    if (!item.empty()) seeds.push_back(std::stoull(item));
    pos = comma + 1;
  }
  if (seeds.empty()) throw std::runtime_error("seed list is empty");
  return seeds;
}

int cmd_demo_record(const std::string& env, int n, uint64_t seed, int resolution,
                    const std::string& out) {
  if (env != "hopper2d") {
    throw std::runtime_error("unknown environment '" + env + "' (available: hopper2d)");
  }
  HopperParams p;
  DemoSet demos = record_demos(p, n, seed, resolution);
  save_demos(demos, out);
  std::printf("recorded %zu episodes at %dx%d, mean forward progress %.4f -> %s\n",
              demos.episodes.size(), resolution, resolution, demos.mean_score,
              out.c_str());
  return 0;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& sets,
              const std::string& variant, int k, const std::string& seeds, int learners,
              int iters, const std::string& demos, const std::string& out) {
  TrainConfig cfg;
  if (!config_path.empty()) cfg = load_config_file(config_path);
  for (const std::string& kv : sets) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("--set expects key=value, got '" + kv + "'");
    }
    apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!variant.empty()) cfg.variant = parse_variant(variant);
  if (k > 0) cfg.k = k;
  if (!seeds.empty()) cfg.seeds = parse_seed_list(seeds);
  if (learners > 0) cfg.n_learners = learners;
  if (iters > 0) cfg.i_max = iters;
  if (!demos.empty()) cfg.demo_path = demos;
  if (!out.empty()) cfg.out_dir = out;

  std::vector<SeedResult> results = run_training(cfg);
  for (const SeedResult& r : results) {
    std::printf("seed %llu: %zu iterations, best eval progress %.4f%s\n",
                static_cast<unsigned long long>(r.seed), r.iterations.size(), r.best_eval,
                r.reached_target ? " (target reached)" : "");
  }
  std::printf("artifacts in %s\n", cfg.out_dir.c_str());
  return 0;
}

int cmd_eval(const std::string& run_dir, std::string checkpoint, std::string config_path,
             int episodes) {
  if (!run_dir.empty()) {
    if (checkpoint.empty()) checkpoint = (fs::path(run_dir) / "policy.ckpt").string();
    if (config_path.empty()) {
      config_path = (fs::path(run_dir).parent_path() / "config.txt").string();
    }
  }
  if (checkpoint.empty() || config_path.empty()) {
    throw std::runtime_error("eval needs --run-dir, or both --checkpoint and --config");
  }
  TrainConfig cfg = load_config_file(config_path);
  AgentConfig acfg;
  acfg.k = cfg.k;
  acfg.colors = 1;
  acfg.resolution = cfg.resolution;
  acfg.non_local = variant_policy_non_local(cfg.variant);
  acfg.base_channels = cfg.base_channels;
  acfg.action_dim = 2;
  PolicyNet policy = build_policy(acfg, 0);
  load_checkpoint(checkpoint, architecture_signature(cfg), policy.parameters());

  std::vector<double> per;
  const double mean = evaluate_policy(policy, cfg.k, cfg.resolution, episodes, &per);
  for (std::size_t i = 0; i < per.size(); ++i) {
    std::printf("episode %zu: progress %.4f\n", i, per[i]);
  }
  std::printf("mean progress over %d episodes: %.4f\n", episodes, mean);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"state-only visual imitation learner for the 2-D hopper"};
  app.require_subcommand(1);

  auto* rec = app.add_subcommand("demo-record", "roll out the scripted expert and save frames");
  std::string rec_env = "hopper2d", rec_out = "demos.bin";
  int rec_n = 8, rec_res = 32;
  uint64_t rec_seed = 7;
  rec->add_option("--env", rec_env, "environment name");
  rec->add_option("--n", rec_n, "number of episodes")->check(CLI::PositiveNumber);
  rec->add_option("--seed", rec_seed, "base seed for episode starts");
  rec->add_option("--resolution", rec_res, "square frame resolution")
      ->check(CLI::PositiveNumber);
  rec->add_option("--out", rec_out, "output file");

  auto* train = app.add_subcommand("train", "run adversarial imitation training");
  std::string tr_config, tr_variant, tr_seeds, tr_demos, tr_out;
  std::vector<std::string> tr_sets;
  int tr_k = 0, tr_learners = 0, tr_iters = 0;
  train->add_option("--config", tr_config, "config file (key = value lines)")
      ->check(CLI::ExistingFile);
  train->add_option("--set", tr_sets, "override any config key, e.g. --set c_max=256");
  train->add_option("--variant", tr_variant,
                    "local | non-local-reward | non-local-value | non-local-all");
  train->add_option("--k", tr_k, "frames per stacked observation");
  train->add_option("--seeds", tr_seeds, "comma separated run seeds, e.g. 0,1,2");
  train->add_option("--learners", tr_learners, "parallel learners per run");
  train->add_option("--iters", tr_iters, "outer training iterations");
  train->add_option("--demos", tr_demos, "demonstration file");
  train->add_option("--out", tr_out, "output directory");

  auto* ev = app.add_subcommand("eval", "roll out a trained policy with mean actions");
  std::string ev_run, ev_ckpt, ev_config;
  int ev_episodes = 10;
  ev->add_option("--run-dir", ev_run, "seed directory holding policy.ckpt");
  ev->add_option("--checkpoint", ev_ckpt, "policy checkpoint file");
  ev->add_option("--config", ev_config, "resolved config file");
  ev->add_option("--episodes", ev_episodes, "evaluation episodes")
      ->check(CLI::PositiveNumber);

  auto* rep = app.add_subcommand("report", "aggregate curves and CCDF across seeds");
  std::string rep_run;
  rep->add_option("--run", rep_run, "run directory holding seed_* subdirectories")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (rec->parsed()) return cmd_demo_record(rec_env, rec_n, rec_seed, rec_res, rec_out);
    if (train->parsed()) {
      return cmd_train(tr_config, tr_sets, tr_variant, tr_k, tr_seeds, tr_learners,
                       tr_iters, tr_demos, tr_out);
    }
    if (ev->parsed()) return cmd_eval(ev_run, ev_ckpt, ev_config, ev_episodes);
    if (rep->parsed()) {
      emit_report(rep_run);
      std::printf("report written to %s\n", rep_run.c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
