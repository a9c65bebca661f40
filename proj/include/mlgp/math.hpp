#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace mlgp {

inline double normal_pdf(double u) {
  static const double inv_sqrt_2pi = 0.39894228040143267794;
  return inv_sqrt_2pi * std::exp(-0.5 * u * u);
}

inline double normal_cdf(double u) {
  return 0.5 * std::erfc(-u / std::sqrt(2.0));
}

// Linear-interpolation quantile (the common "type 7" rule), q in [0,1].
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile: empty sample");
  std::sort(v.begin(), v.end());
  if (v.size() == 1) return v[0];
  double h = q * static_cast<double>(v.size() - 1);
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  std::size_t hi = std::min(lo + 1, v.size() - 1);
  double w = h - static_cast<double>(lo);
  return v[lo] * (1.0 - w) + v[hi] * w;
}

inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

}  // namespace mlgp
