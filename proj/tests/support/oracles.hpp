#pragma once

// Reference statistics computed the long way, for comparison with the
// library. Undefined results come back as nullopt.

#include <cmath>
#include <optional>
#include <vector>

namespace oracles {

// Pearson r from raw sums in long double.
inline std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2) return std::nullopt;
  long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += static_cast<long double>(x[i]) * x[i];
    syy += static_cast<long double>(y[i]) * y[i];
    sxy += static_cast<long double>(x[i]) * y[i];
  }
  const long double N = static_cast<long double>(n);
  const long double vx = N * sxx - sx * sx;
  const long double vy = N * syy - sy * sy;
  // Constant inputs: every value equals the first.
  bool cx = true, cy = true;
  for (std::size_t i = 1; i < n; ++i) {
    cx = cx && x[i] == x[0];
    cy = cy && y[i] == y[0];
  }
  if (cx || cy) return std::nullopt;
  return static_cast<double>((N * sxy - sx * sy) / std::sqrt(vx * vy));
}

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

inline Confusion confusion(const std::vector<int>& pred, const std::vector<int>& gold,
                           const std::vector<int>* mask = nullptr) {
  Confusion c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (mask && !(*mask)[i]) continue;
    if (pred[i] == 1 && gold[i] == 1) ++c.tp;
    if (pred[i] == 1 && gold[i] == 0) ++c.fp;
    if (pred[i] == 0 && gold[i] == 0) ++c.tn;
    if (pred[i] == 0 && gold[i] == 1) ++c.fn;
  }
  return c;
}

inline std::optional<double> fpr(const std::vector<int>& pred, const std::vector<int>& gold,
                                 const std::vector<int>& mask) {
  const auto c = confusion(pred, gold, &mask);
  if (c.fp + c.tn == 0) return std::nullopt;
  return static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn);
}

struct Metrics {
  double accuracy, precision, recall, f1;
};

// Precision or recall with an empty denominator counts as 0; so does F1.
inline Metrics metrics(const std::vector<int>& pred, const std::vector<int>& gold) {
  const auto c = confusion(pred, gold);
  Metrics m{};
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(pred.size());
  m.precision = c.tp + c.fp ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  m.recall = c.tp + c.fn ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  m.f1 = c.tp ? 2.0 * static_cast<double>(c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn) : 0.0;
  return m;
}

}  // namespace oracles
