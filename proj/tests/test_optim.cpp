#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "mimic/optim.hpp"
#include "mimic/ops.hpp"
#include "mimic/tensor.hpp"

using namespace mimic;

namespace {

ParamList single_param(const Shape& shape, std::vector<double> data) {
  Tensor t = Tensor::from_data(shape, std::move(data), true);
  return {{"p", t}};
}

}  // namespace

TEST_CASE("zero learning rate leaves parameters bit-identical") {
  ParamList ps = single_param({3}, {1.0, -2.0, 0.5});
  AdamConfig cfg;
  cfg.lr = 0.0;
  Adam opt(ps, cfg);
  GradSet g = {{10.0, -3.0, 7.0}};
  for (int i = 0; i < 5; ++i) opt.step_with(g);
  CHECK(ps[0].t.at(0) == 1.0);
  CHECK(ps[0].t.at(1) == -2.0);
  CHECK(ps[0].t.at(2) == 0.5);
}

TEST_CASE("first step applies the bias-corrected update exactly") {
  ParamList ps = single_param({2}, {0.0, 1.0});
  AdamConfig cfg;
  cfg.lr = 0.01;
  Adam opt(ps, cfg);
  const double g0 = 0.4, g1 = -2.0;
  opt.step_with({{g0, g1}});
  // After bias correction the first step is lr * g / (|g| + eps).
  CHECK(ps[0].t.at(0) == doctest::Approx(0.0 - cfg.lr * g0 / (std::abs(g0) + cfg.eps)).epsilon(1e-14));
  CHECK(ps[0].t.at(1) == doctest::Approx(1.0 - cfg.lr * g1 / (std::abs(g1) + cfg.eps)).epsilon(1e-14));
}

TEST_CASE("adam minimizes a quadratic") {
  ParamList ps = single_param({1}, {10.0});
  Tensor x = ps[0].t;
  AdamConfig cfg;
  cfg.lr = 0.05;
  Adam opt(ps, cfg);
  for (int i = 0; i < 2000; ++i) {
    zero_grads(ps);
    Tensor d = add_scalar(x, -3.0);
    backward(mul(d, d));
    opt.step();
  }
  CHECK(std::abs(x.at(0) - 3.0) < 1e-2);
}

TEST_CASE("gradient collection and zeroing") {
  ParamList ps = single_param({2}, {1.0, 2.0});
  GradSet none = collect_grads(ps);
  CHECK(none[0][0] == 0.0);
  CHECK(none[0][1] == 0.0);
  backward(sum(mul(ps[0].t, ps[0].t)));
  GradSet g = collect_grads(ps);
  CHECK(g[0][0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(g[0][1] == doctest::Approx(4.0).epsilon(1e-14));
  zero_grads(ps);
  GradSet cleared = collect_grads(ps);
  CHECK(cleared[0][0] == 0.0);
}

TEST_CASE("global norm clipping") {
  GradSet g = {{3.0}, {4.0}};
  CHECK(global_grad_norm(g) == doctest::Approx(5.0).epsilon(1e-15));
  GradSet clipped = g;
  const double pre = clip_global_norm(clipped, 1.0);
  CHECK(pre == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(clipped[0][0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(clipped[1][0] == doctest::Approx(0.8).epsilon(1e-12));
  GradSet loose = g;
  clip_global_norm(loose, 10.0);
  CHECK(loose[0][0] == 3.0);
  CHECK(loose[1][0] == 4.0);
}

TEST_CASE("non-finite gradients are reported with the parameter name") {
  ParamList ps = single_param({2}, {1.0, 2.0});
  GradSet g = {{1.0, std::nan("")}};
  CHECK_THROWS_WITH_AS(check_grads_finite(ps, g, "ppo"), doctest::Contains("p"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(check_grads_finite(ps, g, "ppo"), doctest::Contains("ppo"),
                       std::runtime_error);
}

TEST_CASE("identical gradient streams keep two optimizers in lockstep") {
  ParamList a = single_param({3}, {0.3, -0.7, 1.1});
  ParamList b = single_param({3}, {0.3, -0.7, 1.1});
  Adam oa(a), ob(b);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> dist;
  for (int i = 0; i < 50; ++i) {
    GradSet g = {{dist(rng), dist(rng), dist(rng)}};
    oa.step_with(g);
    ob.step_with(g);
  }
  for (int64_t i = 0; i < 3; ++i) CHECK(a[0].t.at(i) == b[0].t.at(i));
}

TEST_CASE("mismatched gradient sets are rejected") {
  ParamList ps = single_param({2}, {0.0, 0.0});
  Adam opt(ps);
  CHECK_THROWS(opt.step_with({}));
  CHECK_THROWS(opt.step_with({{1.0}}));
}
