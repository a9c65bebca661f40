#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mlgp/math.hpp"
#include "mlgp/multilevel.hpp"

namespace mlgp {

// Distribution of the top-level error induced by a leave-one-out at one
// design point: Z_e ~ N(mean, variance).
struct ErrorDistribution {
  double mean = 0.0;
  double variance = 0.0;
};

// Error distribution from a LOO on the level-1 GP at design index i:
//   M = P_1 (m_{-i} - y_i) + sum_{j>=2} P_j e_d^(j)(x_i)
//   V = P_1^2 s2_{-i} + sum_{j>=2} P_j^2 s_d^(j)^2(x_i)
inline ErrorDistribution error_distribution_level1(const MultiLevelEmulator& em,
                                                   Eigen::Index i) {
  const LevelData& l1 = em.level(1);
  if (i < 0 || i >= l1.X.rows())
    throw std::out_of_range("error_distribution_level1: index out of range");
  const Eigen::VectorXd P = em.weights();
  const auto loo = em.gp(1).loo_predictions();
  const Eigen::VectorXd xi = l1.X.row(i).transpose();

  double M = P[0] * (loo[static_cast<std::size_t>(i)].mean - l1.y_raw[i]);
  double V = P[0] * P[0] * loo[static_cast<std::size_t>(i)].variance;
  for (int j = 2; j <= em.num_levels(); ++j) {
    PosteriorSummary e = em.gp(j).zero_mean_error(xi);
    M += P[j - 1] * e.mean;
    V += P[j - 1] * P[j - 1] * e.variance;
  }
  return {M, std::max(V, 0.0)};
}

// Error distribution from a LOO on the level-l discrepancy GP (l >= 2):
//   M = P_1 e^(1)(x_i) + P_l (m_{d,-i} - d^(l)(x_i)) + sum_{j!=l} P_j e_d^(j)
//   V = P_1^2 s^(1)^2 + P_l^2 s2_{d,-i} + sum_{j!=l} P_j^2 s_d^(j)^2
inline ErrorDistribution error_distribution_levell(const MultiLevelEmulator& em,
                                                   int l, Eigen::Index i) {
  if (l < 2 || l > em.num_levels())
    throw std::invalid_argument(
        "error_distribution_levell: level must be in 2..L");
  const LevelData& ld = em.level(l);
  if (i < 0 || i >= ld.X.rows())
    throw std::out_of_range("error_distribution_levell: index out of range");
  const Eigen::VectorXd P = em.weights();
  const auto loo = em.gp(l).loo_predictions();
  const Eigen::VectorXd xi = ld.X.row(i).transpose();

  PosteriorSummary e1 = em.gp(1).zero_mean_error(xi);
  double M = P[0] * e1.mean +
             P[l - 1] * (loo[static_cast<std::size_t>(i)].mean - ld.y_target[i]);
  double V = P[0] * P[0] * e1.variance +
             P[l - 1] * P[l - 1] * loo[static_cast<std::size_t>(i)].variance;
  for (int j = 2; j <= em.num_levels(); ++j) {
    if (j == l) continue;
    PosteriorSummary e = em.gp(j).zero_mean_error(xi);
    M += P[j - 1] * e.mean;
    V += P[j - 1] * P[j - 1] * e.variance;
  }
  return {M, std::max(V, 0.0)};
}

// Single-level collapse (L = 1): the plain LOO moments of one GP at its own
// design point, M = m_{-i} - y_i, V = s2_{-i}. Used for upper-level initial
// designs and the single-level comparison arm.
inline ErrorDistribution single_level_error_distribution(
    const GaussianProcess& gp, Eigen::Index i) {
  if (i < 0 || i >= gp.size())
    throw std::out_of_range("single_level_error_distribution: bad index");
  const auto loo = gp.loo_predictions();
  return {loo[static_cast<std::size_t>(i)].mean - gp.targets()[i],
          loo[static_cast<std::size_t>(i)].variance};
}

// Normalised expected squared error of Z_e ~ N(M, V):
//   E[Z_e^2] = V + M^2,  Var[Z_e^2] = 2 V^2 + 4 V M^2,
// returned as E / sqrt(Var). V is floored at 1e-12 so interpolation-exact
// points do not blow up the ratio.
inline double esloo_value(const ErrorDistribution& d) {
  if (d.variance < 0.0)
    throw std::invalid_argument("esloo_value: negative variance");
  if (d.variance == 0.0 && d.mean == 0.0)
    throw std::domain_error("esloo_value: undefined at (M, V) = (0, 0)");
  double V = std::max(d.variance, 1e-12);
  double M2 = d.mean * d.mean;
  return (V + M2) / std::sqrt(2.0 * V * V + 4.0 * V * M2);
}

// Lower bound on the ES-LOO surface lengthscales, sqrt(-0.5 / log(1e-8)).
inline double esloo_lengthscale_floor() {
  return std::sqrt(-0.5 / std::log(1e-8));
}

// Corners of [0,1]^p plus, per face, the projection of the nearest design
// point onto that face (ties to the lowest row index), deduplicated. These
// points are never evaluated by any simulator; they only repel the
// acquisition from the boundary.
inline Eigen::MatrixXd pseudo_points(const Eigen::MatrixXd& design_points,
                                     int p) {
  if (p < 1) throw std::invalid_argument("pseudo_points: dimension must be >= 1");
  if (design_points.rows() > 0 && design_points.cols() != p)
    throw std::invalid_argument("pseudo_points: design dimension mismatch");
  std::vector<Eigen::VectorXd> pts;
  auto push_unique = [&](const Eigen::VectorXd& v) {
    for (const auto& u : pts)
      if ((u - v).squaredNorm() == 0.0) return;
    pts.push_back(v);
  };

  for (std::uint64_t mask = 0; mask < (1ULL << p); ++mask) {
    Eigen::VectorXd corner(p);
    for (int d = 0; d < p; ++d) corner[d] = (mask >> d) & 1ULL ? 1.0 : 0.0;
    push_unique(corner);
  }
  if (design_points.rows() > 0) {
    for (int d = 0; d < p; ++d) {
      for (double face : {0.0, 1.0}) {
        Eigen::Index nearest = 0;
        double best = std::abs(design_points(0, d) - face);
        for (Eigen::Index i = 1; i < design_points.rows(); ++i) {
          double dist = std::abs(design_points(i, d) - face);
          if (dist < best) {
            best = dist;
            nearest = i;
          }
        }
        Eigen::VectorXd proj = design_points.row(nearest).transpose();
        proj[d] = face;
        push_unique(proj);
      }
    }
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(pts.size()), p);
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    out.row(i) = pts[static_cast<std::size_t>(i)].transpose();
  return out;
}

struct SurfaceConfig {
  MeanMode mean_mode = MeanMode::ConstantEstimated;
  bool log_transform = false;  // fit log(y_E) for heavy-tailed error values
  double nugget = 1e-8;
  int multistarts = 10;
  Eigen::MatrixXd extra_pseudo_points;  // optional user-supplied boundary points
};

// GP over the normalised ES-LOO values of one level, together with the
// repulsion anchors (that level's design, the pseudo points, and any pending
// batch picks). EI/RF/PEI queries are pure.
class EsLooSurface {
 public:
  EsLooSurface(int level, GaussianProcess gp, double y_max,
               Eigen::MatrixXd design_points, Eigen::MatrixXd pseudo_pts)
      : level_(level),
        gp_(std::move(gp)),
        y_max_(y_max),
        design_points_(std::move(design_points)),
        pseudo_points_(std::move(pseudo_pts)) {}

  int level() const { return level_; }
  const GaussianProcess& surface_gp() const { return gp_; }
  double y_max() const { return y_max_; }
  const Eigen::MatrixXd& design_points() const { return design_points_; }
  const Eigen::MatrixXd& pseudo_pts() const { return pseudo_points_; }
  const std::vector<Eigen::VectorXd>& pending_points() const { return pending_; }

  // Batch support: future picks join the repulsion set without refitting.
  void add_repulsion_point(const Eigen::VectorXd& x) { pending_.push_back(x); }

  double expected_improvement(const Eigen::VectorXd& x) const {
    PosteriorSummary s = gp_.posterior(x);
    double sd = std::sqrt(std::max(s.variance, 0.0));
    if (sd <= 0.0) return 0.0;
    double u = (s.mean - y_max_) / sd;
    double ei = (s.mean - y_max_) * normal_cdf(u) + sd * normal_pdf(u);
    return std::max(ei, 0.0);
  }

  double repulsion(const Eigen::VectorXd& x) const {
    double rf = 1.0;
    const KernelSpec& spec = gp_.kernel();
    for (Eigen::Index i = 0; i < design_points_.rows(); ++i)
      rf *= 1.0 - kernel_corr(spec, x, design_points_.row(i).transpose());
    for (Eigen::Index i = 0; i < pseudo_points_.rows(); ++i)
      rf *= 1.0 - kernel_corr(spec, x, pseudo_points_.row(i).transpose());
    for (const auto& q : pending_)
      rf *= 1.0 - kernel_corr(spec, x, q);
    return std::min(std::max(rf, 0.0), 1.0);
  }

  double pei(const Eigen::VectorXd& x) const {
    return expected_improvement(x) * repulsion(x);
  }

 private:
  int level_;
  GaussianProcess gp_;
  double y_max_;
  Eigen::MatrixXd design_points_;
  Eigen::MatrixXd pseudo_points_;
  std::vector<Eigen::VectorXd> pending_;
};

namespace detail {

inline Eigen::MatrixXd pooled_designs(const MultiLevelEmulator& em) {
  Eigen::Index total = 0;
  for (int l = 1; l <= em.num_levels(); ++l) total += em.level(l).X.rows();
  Eigen::MatrixXd pooled(total, em.dim());
  Eigen::Index at = 0;
  for (int l = 1; l <= em.num_levels(); ++l) {
    pooled.middleRows(at, em.level(l).X.rows()) = em.level(l).X;
    at += em.level(l).X.rows();
  }
  return pooled;
}

inline Eigen::MatrixXd vstack(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() == 0) return b;
  if (b.rows() == 0) return a;
  Eigen::MatrixXd out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a;
  out.bottomRows(b.rows()) = b;
  return out;
}

inline EsLooSurface fit_surface(int level, const Eigen::MatrixXd& X,
                                Eigen::VectorXd y_e,
                                const Eigen::MatrixXd& pooled_design,
                                std::uint64_t seed, const SurfaceConfig& cfg) {
  if (cfg.log_transform) y_e = y_e.array().log();
  FitOptions opt;
  opt.mean_mode = cfg.mean_mode;
  opt.nugget = cfg.nugget;
  opt.multistarts = cfg.multistarts;
  opt.seed = seed;
  opt.lengthscale_lower_bounds =
      Eigen::VectorXd::Constant(X.cols(), esloo_lengthscale_floor());
  GaussianProcess gp = fit_gp(X, y_e, opt);
  Eigen::MatrixXd pseudo =
      vstack(pseudo_points(pooled_design, static_cast<int>(X.cols())),
             cfg.extra_pseudo_points);
  return EsLooSurface(level, std::move(gp), y_e.maxCoeff(), X, pseudo);
}

}  // namespace detail

// ES-LOO surface for one level of a multi-level emulator. The pseudo points
// are derived from the designs of all levels pooled together; the repulsion
// design set is this level's own design.
inline EsLooSurface build_surface(const MultiLevelEmulator& em, int l,
                                  std::uint64_t seed,
                                  const SurfaceConfig& cfg = {}) {
  const LevelData& ld = em.level(l);
  if (ld.X.rows() < 2)
    throw std::invalid_argument("build_surface: level needs at least two points");
  Eigen::VectorXd y_e(ld.X.rows());
  for (Eigen::Index i = 0; i < ld.X.rows(); ++i) {
    ErrorDistribution d = (l == 1) ? error_distribution_level1(em, i)
                                   : error_distribution_levell(em, l, i);
    y_e[i] = esloo_value(d);
  }
  return detail::fit_surface(l, ld.X, y_e, detail::pooled_designs(em), seed, cfg);
}

// Single-level surface over a plain GP's own LOO errors; `pooled_design`
// supplies the pseudo-point anchors (pass the GP's design when nothing else
// exists yet).
inline EsLooSurface build_surface_single(const GaussianProcess& gp,
                                         const Eigen::MatrixXd& pooled_design,
                                         std::uint64_t seed,
                                         const SurfaceConfig& cfg = {}) {
  if (gp.size() < 2)
    throw std::invalid_argument("build_surface_single: needs at least two points");
  Eigen::VectorXd y_e(gp.size());
  for (Eigen::Index i = 0; i < gp.size(); ++i)
    y_e[i] = esloo_value(single_level_error_distribution(gp, i));
  return detail::fit_surface(1, gp.inputs(), y_e, pooled_design, seed, cfg);
}

struct MaximizeOptions {
  int candidates_per_dim = 500;  // candidate set size is this times p
  int refine_top = 5;            // local ascents from the best candidates
  NelderMeadOptions local_search{};
};

namespace detail {

inline double radical_inverse(std::uint64_t i, std::uint64_t base) {
  double inv = 1.0 / static_cast<double>(base);
  double f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

constexpr std::uint64_t kHaltonPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19,
                                           23, 29, 31, 37, 41, 43, 47, 53};

// Halton sequence with a seeded Cranley-Patterson rotation.
inline Eigen::MatrixXd scrambled_candidates(Eigen::Index n, Eigen::Index p,
                                            std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0x68616c74ULL}));
  Eigen::VectorXd shift(p);
  for (Eigen::Index d = 0; d < p; ++d) shift[d] = rng.uniform();
  Eigen::MatrixXd out(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index d = 0; d < p; ++d) {
      std::uint64_t base = kHaltonPrimes[d % 16] ;
      double u = radical_inverse(static_cast<std::uint64_t>(i) + 1, base) +
                 shift[d];
      out(i, d) = u - std::floor(u);
    }
  return out;
}

}  // namespace detail

// Multi-start PEI ascent: sweep a scrambled low-discrepancy candidate set,
// refine the best few with bounded Nelder-Mead, return the best point found.
// Deterministic under the seed; ties resolve to the earliest candidate.
inline std::pair<Eigen::VectorXd, double> maximize_pei(
    const EsLooSurface& s, std::uint64_t seed, const MaximizeOptions& opt = {}) {
  const Eigen::Index p = s.surface_gp().dim();
  const Eigen::Index n_cand =
      static_cast<Eigen::Index>(opt.candidates_per_dim) * p;
  Eigen::MatrixXd cand = detail::scrambled_candidates(n_cand, p, seed);

  std::vector<std::pair<double, Eigen::Index>> scored(
      static_cast<std::size_t>(n_cand));
  for (Eigen::Index i = 0; i < n_cand; ++i)
    scored[static_cast<std::size_t>(i)] = {s.pei(cand.row(i).transpose()), i};
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) {
                     if (a.first != b.first) return a.first > b.first;
                     return a.second < b.second;
                   });

  Eigen::VectorXd best_x = cand.row(scored.front().second).transpose();
  double best_val = scored.front().first;

  const Eigen::VectorXd lo = Eigen::VectorXd::Zero(p);
  const Eigen::VectorXd hi = Eigen::VectorXd::Ones(p);
  auto objective = [&](const Eigen::VectorXd& x) { return s.pei(x); };
  const int n_refine = std::min<int>(opt.refine_top, static_cast<int>(n_cand));
  for (int r = 0; r < n_refine; ++r) {
    Eigen::VectorXd x0 = cand.row(scored[static_cast<std::size_t>(r)].second)
                             .transpose();
    NelderMeadOptions nm = opt.local_search;
    nm.init_step = 0.05;
    auto [x, val] = nelder_mead_max(objective, x0, lo, hi, nm);
    if (val > best_val) {
      best_val = val;
      best_x = x;
    }
  }
  return {best_x, best_val};
}

}  // namespace mlgp
