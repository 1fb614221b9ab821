#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace cgvae {

/// log(sum(exp(v))) via the shifted form; safe for logits up to ~1e300.
inline double log_sum_exp(std::span<const double> v) {
  double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

/// softmax(v / temperature), written into out (same length).
inline void softmax(std::span<const double> v, std::span<double> out,
                    double temperature = 1.0) {
  double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp((v[i] - m) / temperature);
    s += out[i];
  }
  for (std::size_t i = 0; i < v.size(); ++i) out[i] /= s;
}

inline std::vector<double> softmax(std::span<const double> v,
                                   double temperature = 1.0) {
  std::vector<double> out(v.size());
  softmax(v, out, temperature);
  return out;
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace cgvae
