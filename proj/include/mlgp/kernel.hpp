#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace mlgp {

// Squared-exponential kernel with per-dimension lengthscales. Lengthscale
// lower bounds (0 = unbounded) are carried along so fitted kernels remember
// the box they were optimized in.
struct KernelSpec {
  Eigen::VectorXd lengthscales;
  double variance = 1.0;
  Eigen::VectorXd lengthscale_lower_bounds;  // empty or same size; 0 = unbounded

  Eigen::Index dim() const { return lengthscales.size(); }

  void validate() const {
    if (lengthscales.size() == 0)
      throw std::invalid_argument("KernelSpec: no lengthscales");
    if (!(variance > 0.0))
      throw std::invalid_argument("KernelSpec: variance must be positive");
    if (lengthscale_lower_bounds.size() != 0 &&
        lengthscale_lower_bounds.size() != lengthscales.size())
      throw std::invalid_argument("KernelSpec: lower-bound size mismatch");
    for (Eigen::Index d = 0; d < lengthscales.size(); ++d) {
      if (!(lengthscales[d] > 0.0))
        throw std::invalid_argument("KernelSpec: lengthscales must be positive");
      if (lengthscale_lower_bounds.size() != 0 &&
          lengthscales[d] < lengthscale_lower_bounds[d])
        throw std::invalid_argument("KernelSpec: lengthscale below lower bound");
    }
  }
};

// Correlation part, exp(-sum_d (a_d-b_d)^2 / (2 l_d^2)); in (0, 1].
inline double kernel_corr(const KernelSpec& spec, const Eigen::VectorXd& a,
                          const Eigen::VectorXd& b) {
  if (a.size() != spec.dim() || b.size() != spec.dim())
    throw std::invalid_argument("kernel_corr: dimension mismatch");
  double s = 0.0;
  for (Eigen::Index d = 0; d < a.size(); ++d) {
    double t = (a[d] - b[d]) / spec.lengthscales[d];
    s += t * t;
  }
  return std::exp(-0.5 * s);
}

inline double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& a,
                          const Eigen::VectorXd& b) {
  return spec.variance * kernel_corr(spec, a, b);
}

inline Eigen::MatrixXd gram_matrix(const KernelSpec& spec,
                                   const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = spec.variance;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double v = kernel_eval(spec, X.row(i), X.row(j));
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

inline Eigen::VectorXd cross_covariance(const KernelSpec& spec,
                                        const Eigen::MatrixXd& X,
                                        const Eigen::VectorXd& x) {
  Eigen::VectorXd k(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    k[i] = kernel_eval(spec, X.row(i), x);
  return k;
}

}  // namespace mlgp
