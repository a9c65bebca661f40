#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mlgp/gp.hpp"

namespace mlgp {

// Training data for one level of the hierarchy. Level 1 carries raw outputs;
// levels above carry the raw output, the lower-level output at the same
// points, and the discrepancy target y - rho * y_low.
struct LevelData {
  int level = 1;              // 1-based
  Eigen::MatrixXd X;          // n_l x p
  Eigen::VectorXd y_raw;      // f^(l) at X
  Eigen::VectorXd y_low;      // f^(l-1) at X; empty for level 1
  Eigen::VectorXd y_target;   // filled by the emulator
};

// P_l = prod_{k=l}^{L-1} rho^(k), with P_L = 1.
inline Eigen::VectorXd level_weights(const Eigen::VectorXd& rho) {
  if (rho.size() == 0) throw std::invalid_argument("level_weights: empty rho");
  const Eigen::Index L = rho.size() + 1;
  Eigen::VectorXd P(L);
  P[L - 1] = 1.0;
  for (Eigen::Index l = L - 2; l >= 0; --l) P[l] = rho[l] * P[l + 1];
  return P;
}

inline Eigen::VectorXd discrepancy_targets(const Eigen::VectorXd& y_hi,
                                           const Eigen::VectorXd& y_lo,
                                           double rho_prev) {
  if (y_hi.size() != y_lo.size())
    throw std::invalid_argument("discrepancy_targets: length mismatch");
  return y_hi - rho_prev * y_lo;
}

struct EmulatorConfig {
  MeanMode level1_mean = MeanMode::ConstantEstimated;
  MeanMode discrepancy_mean = MeanMode::Zero;
  double nugget = 1e-8;
  int multistarts = 10;
  std::uint64_t fit_seed = 0;
  bool estimate_rho = false;  // refresh rho by regression on every upper-level add
};

// Kennedy-O'Hagan autoregressive emulator: level 1 GP on raw outputs,
// levels 2..L on discrepancies, combined with the level-weight products.
// Immutable snapshot; add_run returns an updated copy.
class MultiLevelEmulator {
 public:
  MultiLevelEmulator(std::vector<LevelData> levels, Eigen::VectorXd rho,
                     Eigen::VectorXd costs, EmulatorConfig cfg = {})
      : levels_(std::move(levels)),
        rho_(std::move(rho)),
        costs_(std::move(costs)),
        cfg_(cfg) {
    const int L = static_cast<int>(levels_.size());
    if (L < 2) throw std::invalid_argument("MultiLevelEmulator: needs >= 2 levels");
    if (rho_.size() != L - 1)
      throw std::invalid_argument("MultiLevelEmulator: |rho| must be L-1");
    if (costs_.size() != L)
      throw std::invalid_argument("MultiLevelEmulator: |costs| must be L");
    for (Eigen::Index l = 0; l < costs_.size(); ++l) {
      if (!(costs_[l] > 0.0))
        throw std::invalid_argument("MultiLevelEmulator: costs must be positive");
      if (l > 0 && costs_[l] < costs_[l - 1])
        throw std::invalid_argument(
            "MultiLevelEmulator: costs must be non-decreasing with level");
    }
    for (int l = 1; l <= L; ++l) {
      auto& ld = levels_[static_cast<std::size_t>(l - 1)];
      ld.level = l;
      if (ld.X.rows() != ld.y_raw.size())
        throw std::invalid_argument("MultiLevelEmulator: |y_raw| != rows(X)");
      if (l > 1 && ld.y_low.size() != ld.y_raw.size())
        throw std::invalid_argument("MultiLevelEmulator: |y_low| != rows(X)");
      refresh_targets(l);
    }
    gps_.resize(levels_.size());
    for (int l = 1; l <= L; ++l) refit_level(l);
  }

  int num_levels() const { return static_cast<int>(levels_.size()); }
  Eigen::Index dim() const { return levels_.front().X.cols(); }
  const LevelData& level(int l) const { return levels_.at(idx(l)); }
  const GaussianProcess& gp(int l) const { return *gps_.at(idx(l)); }
  const Eigen::VectorXd& rho() const { return rho_; }
  const Eigen::VectorXd& costs() const { return costs_; }
  const EmulatorConfig& config() const { return cfg_; }
  Eigen::VectorXd weights() const { return level_weights(rho_); }

  // Top-level prediction: sums of independent per-level posteriors.
  PosteriorSummary predict(const Eigen::VectorXd& x) const {
    Eigen::VectorXd P = weights();
    double mean = 0.0, var = 0.0;
    for (int l = 1; l <= num_levels(); ++l) {
      PosteriorSummary s = gp(l).posterior(x);
      mean += P[l - 1] * s.mean;
      var += P[l - 1] * P[l - 1] * s.variance;
    }
    return {mean, std::max(var, 0.0)};
  }

  // Appends one run to the given level only and refits that level's GP.
  // The lower-level output needed for the discrepancy target is consumed
  // here and never enters level l-1's training set (non-nested designs).
  MultiLevelEmulator add_run(const Eigen::VectorXd& x, int l, double f_level,
                             std::optional<double> f_below = std::nullopt) const {
    check_level(l);
    if (l > 1 && !f_below.has_value())
      throw std::invalid_argument("add_run: missing lower-level output");
    if (l == 1 && f_below.has_value())
      throw std::invalid_argument("add_run: level 1 takes no lower-level output");
    const LevelData& cur = level(l);
    if (x.size() != cur.X.cols())
      throw std::invalid_argument("add_run: dimension mismatch");
    for (Eigen::Index i = 0; i < cur.X.rows(); ++i)
      if ((cur.X.row(i).transpose() - x).squaredNorm() == 0.0)
        throw std::invalid_argument("add_run: duplicate point at this level");

    MultiLevelEmulator out(*this);
    LevelData& ld = out.levels_[idx(l)];
    const Eigen::Index n = ld.X.rows();
    ld.X.conservativeResize(n + 1, Eigen::NoChange);
    ld.X.row(n) = x.transpose();
    ld.y_raw.conservativeResize(n + 1);
    ld.y_raw[n] = f_level;
    if (l > 1) {
      ld.y_low.conservativeResize(n + 1);
      ld.y_low[n] = *f_below;
      if (cfg_.estimate_rho) out.rho_[l - 2] = out.estimate_rho(l);
    }
    out.refresh_targets(l);
    out.refit_level(l);
    return out;
  }

  // No-intercept least-squares slope of y_raw against y_low at this level.
  double estimate_rho(int l) const {
    check_level(l);
    if (l < 2) throw std::invalid_argument("estimate_rho: level must be >= 2");
    const LevelData& ld = level(l);
    if (ld.X.rows() < 2)
      throw std::invalid_argument("estimate_rho: needs at least two points");
    double denom = ld.y_low.squaredNorm();
    if (denom < 1e-300)
      throw std::invalid_argument("estimate_rho: degenerate lower-level outputs");
    return ld.y_low.dot(ld.y_raw) / denom;
  }

 private:
  std::size_t idx(int l) const {
    check_level(l);
    return static_cast<std::size_t>(l - 1);
  }
  void check_level(int l) const {
    if (l < 1 || l > num_levels())
      throw std::invalid_argument("MultiLevelEmulator: level out of range");
  }

  void refresh_targets(int l) {
    LevelData& ld = levels_[static_cast<std::size_t>(l - 1)];
    ld.y_target = (l == 1) ? ld.y_raw
                           : discrepancy_targets(ld.y_raw, ld.y_low, rho_[l - 2]);
  }

  void refit_level(int l) {
    const LevelData& ld = level(l);
    FitOptions opt;
    opt.mean_mode = (l == 1) ? cfg_.level1_mean : cfg_.discrepancy_mean;
    opt.nugget = cfg_.nugget;
    opt.multistarts = cfg_.multistarts;
    opt.seed = derive_seed(cfg_.fit_seed, {static_cast<std::uint64_t>(l),
                                           static_cast<std::uint64_t>(ld.X.rows())});
    if (ld.X.rows() >= 2) {
      gps_[static_cast<std::size_t>(l - 1)] =
          std::make_shared<const GaussianProcess>(fit_gp(ld.X, ld.y_target, opt));
    } else {
      // Single-point level: nothing to fit; fall back to fixed defaults.
      KernelSpec spec;
      spec.lengthscales = Eigen::VectorXd::Constant(ld.X.cols(), 0.5);
      spec.variance = 1.0;
      gps_[static_cast<std::size_t>(l - 1)] = std::make_shared<const GaussianProcess>(
          ld.X, ld.y_target, spec, opt.mean_mode, opt.nugget);
    }
  }

  std::vector<LevelData> levels_;
  Eigen::VectorXd rho_;
  Eigen::VectorXd costs_;
  EmulatorConfig cfg_;
  std::vector<std::shared_ptr<const GaussianProcess>> gps_;
};

}  // namespace mlgp
