#include "mimic/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mimic {

GradSet collect_grads(const ParamList& params) {
  GradSet out;
  out.reserve(params.size());
  for (const auto& p : params) {
    Tensor g = p.t.grad();
    if (g.defined()) {
      out.push_back(g.data());
    } else {
      out.emplace_back(static_cast<size_t>(p.t.size()), 0.0);
    }
  }
  return out;
}

void zero_grads(const ParamList& params) {
  for (const auto& p : params) {
    Tensor t = p.t;
    t.clear_grad();
  }
}

double global_grad_norm(const GradSet& grads) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (double x : g) sq += x * x;
  return std::sqrt(sq);
}

double clip_global_norm(GradSet& grads, double max_norm) {
  const double norm = global_grad_norm(grads);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto& g : grads)
      for (double& x : g) x *= s;
  }
  return norm;
}

void check_grads_finite(const ParamList& params, const GradSet& grads, const char* module) {
  for (size_t i = 0; i < grads.size(); ++i) {
    for (double x : grads[i]) {
      if (!std::isfinite(x)) {
        throw std::runtime_error(std::string(module) + ": non-finite gradient in parameter " +
                                 params[i].name);
      }
    }
  }
}

Adam::Adam(ParamList params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(static_cast<size_t>(p.t.size()), 0.0);
    v_.emplace_back(static_cast<size_t>(p.t.size()), 0.0);
  }
}

void Adam::step_with(const GradSet& grads) {
  if (grads.size() != params_.size())
    throw std::invalid_argument("gradient set does not match parameter list");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor t = params_[i].t;
    auto& data = t.mutable_data();
    if (grads[i].size() != data.size())
      throw std::invalid_argument("gradient size mismatch for " + params_[i].name);
    auto& m = m_[i];
    auto& v = v_[i];
    for (size_t j = 0; j < data.size(); ++j) {
      const double g = grads[i][j];
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      data[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void Adam::step() { step_with(collect_grads(params_)); }

}  // namespace mimic
