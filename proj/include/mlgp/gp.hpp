#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mlgp/kernel.hpp"
#include "mlgp/nelder_mead.hpp"
#include "mlgp/random.hpp"

namespace mlgp {

enum class MeanMode { Zero, ConstantEstimated };

struct PosteriorSummary {
  double mean = 0.0;
  double variance = 0.0;  // clamped at 0
};

namespace detail {

// GLS estimate of a constant mean: (1' K^-1 y) / (1' K^-1 1).
inline double gls_constant_mean(const Eigen::LLT<Eigen::MatrixXd>& llt,
                                const Eigen::VectorXd& y) {
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(y.size());
  Eigen::VectorXd kinv_ones = llt.solve(ones);
  double denom = ones.dot(kinv_ones);
  return kinv_ones.dot(y) / denom;
}

}  // namespace detail

// Log marginal likelihood of (X, y) under the given kernel + nugget, with a
// constant mean profiled out by GLS when requested. Returns -inf when the
// covariance is not numerically positive definite, so searches skid off
// degenerate hyperparameters instead of aborting.
inline double log_marginal_likelihood(const Eigen::MatrixXd& X,
                                      const Eigen::VectorXd& y,
                                      const KernelSpec& kernel, double nugget,
                                      MeanMode mean_mode) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd K = gram_matrix(kernel, X);
  K.diagonal().array() += nugget;
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() != Eigen::Success)
    return -std::numeric_limits<double>::infinity();
  double mean = (mean_mode == MeanMode::ConstantEstimated)
                    ? detail::gls_constant_mean(llt, y)
                    : 0.0;
  Eigen::VectorXd r = y.array() - mean;
  Eigen::VectorXd alpha = llt.solve(r);
  double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  double lml = -0.5 * r.dot(alpha) - 0.5 * log_det -
               0.5 * static_cast<double>(n) * std::log(2.0 * M_PI);
  return std::isfinite(lml) ? lml : -std::numeric_limits<double>::infinity();
}

// Gaussian process conditioned on (X, y) with fixed hyperparameters.
// Immutable once built; all queries are const and thread-safe.
class GaussianProcess {
 public:
  GaussianProcess(Eigen::MatrixXd X, Eigen::VectorXd y, KernelSpec kernel,
                  MeanMode mean_mode, double nugget)
      : X_(std::move(X)),
        y_(std::move(y)),
        kernel_(std::move(kernel)),
        mean_mode_(mean_mode),
        nugget_(nugget) {
    kernel_.validate();
    const Eigen::Index n = X_.rows();
    if (n < 1) throw std::invalid_argument("GaussianProcess: empty design");
    if (y_.size() != n)
      throw std::invalid_argument("GaussianProcess: |y| != rows(X)");
    if (X_.cols() != kernel_.dim())
      throw std::invalid_argument("GaussianProcess: kernel dimension mismatch");
    if (!(nugget_ >= 0.0))
      throw std::invalid_argument("GaussianProcess: negative nugget");
    if (!y_.allFinite())
      throw std::invalid_argument("GaussianProcess: non-finite targets");
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j)
        if ((X_.row(i) - X_.row(j)).squaredNorm() == 0.0)
          throw std::invalid_argument("GaussianProcess: duplicate design rows");

    Eigen::MatrixXd K = gram_matrix(kernel_, X_);
    K.diagonal().array() += nugget_;
    llt_.compute(K);
    if (llt_.info() != Eigen::Success)
      throw std::runtime_error(
          "GaussianProcess: covariance not positive definite (degenerate "
          "design even after nugget)");
    mean_value_ = (mean_mode_ == MeanMode::ConstantEstimated)
                      ? detail::gls_constant_mean(llt_, y_)
                      : 0.0;
    Eigen::VectorXd r = y_.array() - mean_value_;
    alpha_ = llt_.solve(r);
    beta_zero_mean_ = llt_.solve(y_);
    kinv_ = llt_.solve(Eigen::MatrixXd::Identity(n, n));
  }

  Eigen::Index size() const { return X_.rows(); }
  Eigen::Index dim() const { return X_.cols(); }
  const Eigen::MatrixXd& inputs() const { return X_; }
  const Eigen::VectorXd& targets() const { return y_; }
  const KernelSpec& kernel() const { return kernel_; }
  MeanMode mean_mode() const { return mean_mode_; }
  double mean_value() const { return mean_value_; }
  double nugget() const { return nugget_; }
  Eigen::MatrixXd factor_lower() const { return llt_.matrixL(); }

  PosteriorSummary posterior(const Eigen::VectorXd& x) const {
    check_dim(x);
    Eigen::VectorXd k = cross_covariance(kernel_, X_, x);
    double mean = mean_value_ + k.dot(alpha_);
    double var = kernel_.variance - k.dot(kinv_ * k);
    return {mean, std::max(var, 0.0)};
  }

  // Same GP forced to a zero prior mean: mean = k(x,X) K^-1 y, variance as
  // in posterior().
  PosteriorSummary zero_mean_error(const Eigen::VectorXd& x) const {
    check_dim(x);
    Eigen::VectorXd k = cross_covariance(kernel_, X_, x);
    double mean = k.dot(beta_zero_mean_);
    double var = kernel_.variance - k.dot(kinv_ * k);
    return {mean, std::max(var, 0.0)};
  }

  // Exact leave-one-out predictive distributions at the design points, via
  //   m_{-i}(x_i) = y_i - [K^-1 (y - m)]_i / [K^-1]_ii,
  //   s2_{-i}(x_i) = 1 / [K^-1]_ii,
  // equivalent to refitting without row i at frozen hyperparameters and
  // frozen mean value.
  std::vector<PosteriorSummary> loo_predictions() const {
    if (size() < 2)
      throw std::invalid_argument("loo_predictions: needs at least two points");
    std::vector<PosteriorSummary> out(static_cast<std::size_t>(size()));
    for (Eigen::Index i = 0; i < size(); ++i) {
      double kii = kinv_(i, i);
      out[static_cast<std::size_t>(i)].mean = y_[i] - alpha_[i] / kii;
      out[static_cast<std::size_t>(i)].variance = std::max(1.0 / kii, 0.0);
    }
    return out;
  }

  double log_marginal() const {
    return log_marginal_likelihood(X_, y_, kernel_, nugget_, mean_mode_);
  }

 private:
  void check_dim(const Eigen::VectorXd& x) const {
    if (x.size() != X_.cols())
      throw std::invalid_argument("GaussianProcess: query dimension mismatch");
  }

  Eigen::MatrixXd X_;
  Eigen::VectorXd y_;
  KernelSpec kernel_;
  MeanMode mean_mode_;
  double nugget_;
  double mean_value_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;            // K^-1 (y - m)
  Eigen::VectorXd beta_zero_mean_;   // K^-1 y
  Eigen::MatrixXd kinv_;
};

struct FitOptions {
  MeanMode mean_mode = MeanMode::ConstantEstimated;
  double nugget = 1e-8;
  Eigen::VectorXd lengthscale_lower_bounds;  // empty = unbounded
  int multistarts = 10;
  std::uint64_t seed = 0;
  NelderMeadOptions local_search{};
};

// Maximum-likelihood hyperparameters by multi-start bounded Nelder-Mead over
// (log lengthscales, log variance). Search box: log l in
// [log(max(lb, 0.01)), log 10], log variance within +-4 nats of the data
// variance. Deterministic for a given seed.
inline GaussianProcess fit_gp(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const FitOptions& opt = {}) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (n < 2) throw std::invalid_argument("fit_gp: needs at least two points");
  if (!y.allFinite()) throw std::invalid_argument("fit_gp: non-finite targets");
  if (((X.array() < 0.0) || (X.array() > 1.0)).any())
    throw std::invalid_argument("fit_gp: design outside the unit hypercube");
  Eigen::VectorXd lb = opt.lengthscale_lower_bounds;
  if (lb.size() == 0) lb = Eigen::VectorXd::Zero(p);
  if (lb.size() != p)
    throw std::invalid_argument("fit_gp: lower-bound size mismatch");

  double var_y = (y.array() - y.mean()).square().sum() /
                 std::max<double>(1.0, static_cast<double>(n - 1));
  var_y = std::max(var_y, 1e-12);

  const Eigen::Index d = p + 1;  // log lengthscales + log variance
  Eigen::VectorXd lo(d), hi(d);
  for (Eigen::Index k = 0; k < p; ++k) {
    lo[k] = std::log(std::max(lb[k], 0.01));
    hi[k] = std::log(10.0);
  }
  lo[p] = std::log(var_y) - 4.0;
  hi[p] = std::log(var_y) + 4.0;

  auto objective = [&](const Eigen::VectorXd& theta) {
    KernelSpec spec;
    spec.lengthscales = theta.head(p).array().exp();
    spec.variance = std::exp(theta[p]);
    return log_marginal_likelihood(X, y, spec, opt.nugget, opt.mean_mode);
  };

  auto clamp_into = [&](Eigen::VectorXd v) {
    for (Eigen::Index k = 0; k < d; ++k)
      v[k] = std::min(hi[k], std::max(lo[k], v[k]));
    return v;
  };

  // Start 0 is a fixed heuristic; the rest are uniform draws in the box.
  std::vector<Eigen::VectorXd> starts;
  Eigen::VectorXd s0(d);
  for (Eigen::Index k = 0; k < p; ++k) s0[k] = std::log(0.5);
  s0[p] = std::log(var_y);
  starts.push_back(clamp_into(s0));
  Rng rng(derive_seed(opt.seed, {0x66697453ULL}));
  for (int s = 1; s < std::max(1, opt.multistarts); ++s) {
    Eigen::VectorXd v(d);
    for (Eigen::Index k = 0; k < d; ++k) v[k] = rng.uniform(lo[k], hi[k]);
    starts.push_back(v);
  }

  Eigen::VectorXd best_theta = starts.front();
  double best_val = -std::numeric_limits<double>::infinity();
  for (const auto& start : starts) {
    auto [theta, val] = nelder_mead_max(objective, start, lo, hi, opt.local_search);
    if (val > best_val) {
      best_val = val;
      best_theta = theta;
    }
  }
  if (!std::isfinite(best_val))
    throw std::runtime_error(
        "fit_gp: covariance singular at every start (duplicate or degenerate "
        "design)");

  KernelSpec spec;
  spec.lengthscales = best_theta.head(p).array().exp();
  spec.variance = std::exp(best_theta[p]);
  spec.lengthscale_lower_bounds = lb;
  // guard against round-off dipping just below the bound after exp(log(.))
  for (Eigen::Index k = 0; k < p; ++k)
    spec.lengthscales[k] = std::max(spec.lengthscales[k], lb[k]);
  return GaussianProcess(X, y, spec, opt.mean_mode, opt.nugget);
}

}  // namespace mlgp
