#pragma once

#include <Eigen/Dense>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "mlgp/esloo.hpp"
#include "mlgp/problems.hpp"
#include "mlgp/random.hpp"

namespace mlgp {

// Best-of-R random Latin hypercubes by the maximin (largest minimum pairwise
// distance) rule. Every 1-D projection hits each of the n equal bins exactly
// once; positions are jittered uniformly within their bin.
inline Eigen::MatrixXd maximin_lhc(int n, int p, std::uint64_t seed,
                                   int num_candidates = 100) {
  if (n < 2) throw std::invalid_argument("maximin_lhc: needs n >= 2");
  if (p < 1) throw std::invalid_argument("maximin_lhc: needs p >= 1");
  if (num_candidates < 1)
    throw std::invalid_argument("maximin_lhc: needs at least one candidate");
  Rng rng(derive_seed(seed, {0x6c6863ULL}));
  Eigen::MatrixXd best;
  double best_min_dist = -1.0;
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int c = 0; c < num_candidates; ++c) {
    Eigen::MatrixXd X(n, p);
    for (int d = 0; d < p; ++d) {
      std::iota(perm.begin(), perm.end(), 0);
      rng.shuffle(perm);
      for (int i = 0; i < n; ++i)
        X(i, d) = (static_cast<double>(perm[static_cast<std::size_t>(i)]) +
                   rng.uniform()) /
                  static_cast<double>(n);
    }
    double min_dist = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        min_dist = std::min(min_dist, (X.row(i) - X.row(j)).norm());
    if (min_dist > best_min_dist) {
      best_min_dist = min_dist;
      best = X;
    }
  }
  return best;
}

struct InitialDesignOptions {
  SurfaceConfig surface{};
  MaximizeOptions maximize{};
  MeanMode selector_mean = MeanMode::ConstantEstimated;
  double nugget = 1e-8;
  int multistarts = 10;
  int lhc_candidates = 100;
};

struct InitialDesign {
  std::vector<LevelData> levels;  // y_target left for the emulator to fill
  double setup_cost = 0.0;        // recorded, never charged to the run budget
};

// Initial designs per §-style recipe: maximin LHC on level 1; each level
// l > 1 takes the next n_l picks of the single-level ES-LOO selector fitted
// to level l-1's raw data (sequential through the repulsion function only; no
// new level-(l-1) training data). Both f^(l) and f^(l-1) are then evaluated
// at the picks to form the discrepancy targets.
inline InitialDesign initial_designs(const TestProblem& problem,
                                     const std::vector<int>& sizes,
                                     std::uint64_t seed,
                                     const InitialDesignOptions& opt = {}) {
  const int L = problem.num_levels();
  const int p = problem.dim;
  if (static_cast<int>(sizes.size()) != L)
    throw std::invalid_argument("initial_designs: one size per level required");
  if (sizes[0] < 2)
    throw std::invalid_argument("initial_designs: level 1 needs n >= 2");
  for (int l = 2; l <= L; ++l)
    if (sizes[static_cast<std::size_t>(l - 1)] < 1)
      throw std::invalid_argument("initial_designs: upper levels need n >= 1");

  InitialDesign out;
  out.levels.resize(static_cast<std::size_t>(L));

  LevelData& lvl1 = out.levels[0];
  lvl1.level = 1;
  lvl1.X = maximin_lhc(sizes[0], p, derive_seed(seed, {1}), opt.lhc_candidates);
  lvl1.y_raw.resize(lvl1.X.rows());
  for (Eigen::Index i = 0; i < lvl1.X.rows(); ++i)
    lvl1.y_raw[i] = problem.evaluate(1, lvl1.X.row(i).transpose());
  out.setup_cost += problem.default_costs[0] * static_cast<double>(sizes[0]);

  Eigen::MatrixXd pooled = lvl1.X;
  for (int l = 2; l <= L; ++l) {
    const LevelData& below = out.levels[static_cast<std::size_t>(l - 2)];
    FitOptions fopt;
    fopt.mean_mode = opt.selector_mean;
    fopt.nugget = opt.nugget;
    fopt.multistarts = opt.multistarts;
    fopt.seed = derive_seed(seed, {2, static_cast<std::uint64_t>(l)});
    GaussianProcess gp = fit_gp(below.X, below.y_raw, fopt);
    EsLooSurface surface = build_surface_single(
        gp, pooled, derive_seed(seed, {3, static_cast<std::uint64_t>(l)}),
        opt.surface);

    const int n_l = sizes[static_cast<std::size_t>(l - 1)];
    Eigen::MatrixXd picks(n_l, p);
    for (int q = 0; q < n_l; ++q) {
      auto [x, val] = maximize_pei(
          surface,
          derive_seed(seed, {4, static_cast<std::uint64_t>(l),
                             static_cast<std::uint64_t>(q)}),
          opt.maximize);
      (void)val;
      picks.row(q) = x.transpose();
      surface.add_repulsion_point(x);
    }

    LevelData& ld = out.levels[static_cast<std::size_t>(l - 1)];
    ld.level = l;
    ld.X = picks;
    ld.y_raw.resize(n_l);
    ld.y_low.resize(n_l);
    for (int i = 0; i < n_l; ++i) {
      ld.y_raw[i] = problem.evaluate(l, picks.row(i).transpose());
      ld.y_low[i] = problem.evaluate(l - 1, picks.row(i).transpose());
    }
    out.setup_cost += (problem.default_costs[l - 2] + problem.default_costs[l - 1]) *
                      static_cast<double>(n_l);
    pooled = detail::vstack(pooled, picks);
  }
  return out;
}

}  // namespace mlgp
