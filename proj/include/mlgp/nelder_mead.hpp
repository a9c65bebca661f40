#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <functional>
#include <utility>
#include <vector>

namespace mlgp {

struct NelderMeadOptions {
  int max_evals = 400;
  double x_tol = 1e-9;       // simplex diameter
  double f_tol = 1e-12;      // spread of values across the simplex
  double init_step = 0.10;   // relative to box width
};

// Box-constrained Nelder-Mead ascent. Candidates are clamped into
// [lo, hi] componentwise before evaluation; result is the best vertex seen.
// Fully deterministic for a given start point.
inline std::pair<Eigen::VectorXd, double> nelder_mead_max(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x0, const Eigen::VectorXd& lo,
    const Eigen::VectorXd& hi, const NelderMeadOptions& opt = {}) {
  const Eigen::Index d = x0.size();
  auto clamp = [&](Eigen::VectorXd x) {
    for (Eigen::Index i = 0; i < d; ++i)
      x[i] = std::min(hi[i], std::max(lo[i], x[i]));
    return x;
  };

  int evals = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evals;
    return f(x);
  };

  std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(d) + 1);
  std::vector<double> val(static_cast<std::size_t>(d) + 1);
  pts[0] = clamp(x0);
  val[0] = eval(pts[0]);
  for (Eigen::Index i = 0; i < d; ++i) {
    Eigen::VectorXd v = pts[0];
    double step = opt.init_step * (hi[i] - lo[i]);
    v[i] += (v[i] + step <= hi[i]) ? step : -step;
    pts[static_cast<std::size_t>(i) + 1] = clamp(v);
    val[static_cast<std::size_t>(i) + 1] = eval(pts[static_cast<std::size_t>(i) + 1]);
  }

  std::vector<std::size_t> order(pts.size());
  auto sort_order = [&] {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return val[a] > val[b]; });
  };

  while (evals < opt.max_evals) {
    sort_order();
    const std::size_t best = order.front(), worst = order.back();
    const std::size_t second_worst = order[order.size() - 2];

    double diam = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i)
      diam = std::max(diam, (pts[order[i]] - pts[best]).lpNorm<Eigen::Infinity>());
    if (diam < opt.x_tol || val[best] - val[worst] < opt.f_tol) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (i != worst) centroid += pts[i];
    centroid /= static_cast<double>(d);

    Eigen::VectorXd xr = clamp(centroid + (centroid - pts[worst]));
    double fr = eval(xr);
    if (fr > val[best]) {
      Eigen::VectorXd xe = clamp(centroid + 2.0 * (centroid - pts[worst]));
      double fe = eval(xe);
      if (fe > fr) {
        pts[worst] = xe;
        val[worst] = fe;
      } else {
        pts[worst] = xr;
        val[worst] = fr;
      }
    } else if (fr > val[second_worst]) {
      pts[worst] = xr;
      val[worst] = fr;
    } else {
      Eigen::VectorXd xc = clamp(centroid + 0.5 * (pts[worst] - centroid));
      double fc = eval(xc);
      if (fc > val[worst]) {
        pts[worst] = xc;
        val[worst] = fc;
      } else {
        // shrink toward the best vertex
        for (std::size_t i = 0; i < pts.size(); ++i) {
          if (i == best) continue;
          pts[i] = clamp(pts[best] + 0.5 * (pts[i] - pts[best]));
          val[i] = eval(pts[i]);
        }
      }
    }
  }

  sort_order();
  return {pts[order.front()], val[order.front()]};
}

}  // namespace mlgp
