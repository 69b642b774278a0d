#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ttmba/tensor.hpp"

namespace ttmba::ag {

double grad_check(const std::function<Tensor()>& f, ParamStore& params, double eps,
                  std::size_t max_coords) {
  params.zero_grad();
  backward(f());

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  std::vector<Tensor*> tensors;
  for (auto& [_, t] : params) {
    for (std::size_t i = 0; i < t.numel(); ++i) coords.emplace_back(tensors.size(), i);
    tensors.push_back(&t);
  }
  if (coords.size() > max_coords) {
    std::mt19937_64 rng(0x9c0ffee);
    for (std::size_t i = 0; i < max_coords; ++i) {
      const std::size_t j = i + rng() % (coords.size() - i);
      std::swap(coords[i], coords[j]);
    }
    coords.resize(max_coords);
  }

  double worst = 0.0;
  NoGradGuard no_grad;
  for (auto [ti, i] : coords) {
    Tensor& t = *tensors[ti];
    const double analytic = t.grad()[i];
    const double saved = t.values()[i];
    t.values()[i] = saved + eps;
    const double up = f().item();
    t.values()[i] = saved - eps;
    const double down = f().item();
    t.values()[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  }
  return worst;
}

void adam_step(ParamStore& params, AdamState& state, const AdamConfig& cfg) {
  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (const auto& [_, t] : params) {
      state.m.emplace_back(t.numel(), 0.0);
      state.v.emplace_back(t.numel(), 0.0);
    }
    state.step = 0;
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  std::size_t k = 0;
  for (auto& [_, t] : params) {
    auto& m = state.m[k];
    auto& v = state.v[k];
    ++k;
    if (!t.requires_grad()) continue;
    const auto g = t.grad();
    auto w = t.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

double clip_grad_norm(ParamStore& params, double max_norm) {
  double sq = 0.0;
  for (auto& [_, t] : params)
    for (double g : t.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto& [_, t] : params)
      for (double& g : t.grad()) g *= s;
  }
  return norm;
}

}  // namespace ttmba::ag
