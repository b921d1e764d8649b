#pragma once

// Central finite differences over every parameter of a tiny probe (and
// optional Learned-Mixin gate), compared with the analytic gradient.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "toxdebias/lmixin.hpp"
#include "toxdebias/probe.hpp"
#include "toxdebias/rng.hpp"

namespace gradcheck {

using namespace toxdebias;

inline constexpr double kStep = 1e-6;

struct Problem {
  ProbeModel model;
  FeatureMatrix x;
  std::vector<int> y;
  std::vector<ClassProbs> bias;
  std::vector<double> gate;
  double alpha = 0.0;
  double l2 = 0.0;
};

inline Problem random_problem(std::uint64_t seed) {
  Rng rng(seed);
  Problem p;
  const auto dim = static_cast<std::uint32_t>(3 + rng.below(6));
  const std::size_t n = 3 + rng.below(6);
  ProbeConfig cfg;
  cfg.hidden_size = rng.below(2) ? 0 : 1 + rng.below(4);
  cfg.seed = rng.next();
  p.model = ProbeModel::initialized(dim, cfg);
  for (auto* arr : {&p.model.b1, &p.model.w2, &p.model.b2}) {
    for (auto& v : *arr) v = rng.uniform(-1.0, 1.0);
  }
  p.x.dimension = dim;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> dense(dim, 0.0);
    for (auto& v : dense) {
      if (rng.below(3)) v = rng.uniform(-1.0, 1.0);
    }
    p.x.rows.push_back(dense_vector(dense));
    p.y.push_back(static_cast<int>(rng.below(2)));
    const double b = rng.uniform(0.02, 0.98);
    p.bias.push_back({1.0 - b, b});
  }
  p.gate.resize(p.model.representation_size());
  for (auto& v : p.gate) v = rng.uniform(-1.0, 1.0);
  p.alpha = rng.uniform(0.0, 0.5);
  p.l2 = rng.below(2) ? 0.0 : rng.uniform(0.0, 0.1);
  return p;
}

// ||a - n|| / max(||a||, ||n||), zero when both vanish.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& n) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - n[i]) * (a[i] - n[i]);
    na += a[i] * a[i];
    nn += n[i] * n[i];
  }
  const double scale = std::sqrt(std::max(na, nn));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

inline std::vector<double*> parameters(Problem& p, bool with_gate) {
  std::vector<double*> out;
  for (auto* arr : {&p.model.w1, &p.model.b1, &p.model.w2, &p.model.b2}) {
    for (auto& v : *arr) out.push_back(&v);
  }
  if (with_gate) {
    for (auto& v : p.gate) out.push_back(&v);
  }
  return out;
}

inline std::vector<double> numeric(Problem& p, bool with_gate, const std::function<double()>& f) {
  std::vector<double> g;
  for (double* v : parameters(p, with_gate)) {
    const double keep = *v;
    *v = keep + kStep;
    const double up = f();
    *v = keep - kStep;
    const double down = f();
    *v = keep;
    g.push_back((up - down) / (2.0 * kStep));
  }
  return g;
}

inline std::vector<double> flatten(const ProbeGradient& g, const std::vector<double>* gate = nullptr) {
  std::vector<double> out;
  for (const auto* arr : {&g.w1, &g.b1, &g.w2, &g.b2}) out.insert(out.end(), arr->begin(), arr->end());
  if (gate) out.insert(out.end(), gate->begin(), gate->end());
  return out;
}

inline double probe_error(Problem& p) {
  const auto analytic = flatten(probe_gradient(p.model, p.x, p.y, p.l2));
  const auto num = numeric(p, false, [&] { return probe_objective(p.model, p.x, p.y, p.l2); });
  return relative_error(analytic, num);
}

inline double lmixin_error(Problem& p) {
  const auto g = lmixin_gradient(p.model, p.gate, p.x, p.y, p.bias, p.alpha, p.l2);
  const auto analytic = flatten(g.full, &g.gate);
  const auto num = numeric(p, true, [&] {
    return lmixin_objective(p.model, p.gate, p.x, p.y, p.bias, p.alpha, p.l2);
  });
  return relative_error(analytic, num);
}

}  // namespace gradcheck
