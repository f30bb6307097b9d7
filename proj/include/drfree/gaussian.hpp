#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "drfree/rng.hpp"

namespace drfree {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Smallest admissible covariance eigenvalue.
inline constexpr double kCovFloor = 1e-8;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NotPositiveDefinite : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/**
 * Multivariate normal N(mean, covariance).
 *
 * Two storage modes: a diagonal fast path (what the learned models emit)
 * and a dense path with a cached Cholesky factor. Construction validates
 * symmetry, positive definiteness and the covariance floor and throws
 * rather than repairing an invalid matrix.
 */
class GaussianKernel {
 public:
  /// Dense covariance.
  GaussianKernel(Vector mean, Matrix covariance);

  /// Diagonal covariance given as the vector of variances.
  static GaussianKernel diagonal(Vector mean, Vector variances);

  /// Isotropic covariance scale * I.
  static GaussianKernel isotropic(Vector mean, double variance);

  int dim() const noexcept { return static_cast<int>(mean_.size()); }
  const Vector& mean() const noexcept { return mean_; }
  bool is_diagonal() const noexcept { return diag_.has_value(); }

  /// Diagonal variances; only valid when is_diagonal().
  const Vector& variances() const { return *diag_; }

  /// Dense covariance (materialized for the diagonal path).
  Matrix covariance() const;

  double log_det() const noexcept { return log_det_; }

  /// Same kernel with covariance multiplied by `factor` > 0.
  GaussianKernel scaled(double factor) const;

  /// Whitened coordinates L^{-1}(x - mean).
  Vector whiten(const Vector& x) const;

  /// Affine map mean + L z of a standard-normal vector z.
  Vector color(const Vector& z) const;

  /// Squared Mahalanobis distance of x from the mean.
  double mahalanobis_sq(const Vector& x) const;

  /// Squared Mahalanobis norm of v under this covariance, without the mean.
  double quad_form(const Vector& v) const;

  /// Lower Cholesky factor (dense path; materialized for diagonal).
  Matrix cholesky() const;

  /// tr(Sigma_this^{-1} Sigma_other).
  double trace_inv_times(const GaussianKernel& other) const;

 private:
  GaussianKernel() = default;

  Vector mean_;
  std::optional<Vector> diag_;
  std::optional<Matrix> cov_;
  Matrix chol_;  // lower factor, dense path only
  double log_det_ = 0.0;
};

/// D_KL(p || q) in closed form.
double kl_gaussian(const GaussianKernel& p, const GaussianKernel& q);

/// Differential entropy n/2 (1 + ln 2 pi) + 1/2 ln det Sigma.
double entropy(const GaussianKernel& p);

double log_density(const GaussianKernel& p, const Vector& x);

/// log_density of every column of xs (dim x count).
Vector log_density_columns(const GaussianKernel& p, const Matrix& xs);

/// Draws `count` vectors; deterministic in `seed`.
std::vector<Vector> sample(const GaussianKernel& p, std::uint64_t seed, int count);

/// Fills the columns of `out` (dim x count) with draws from p using `rng`.
void sample_into(const GaussianKernel& p, Rng& rng, Matrix& out);

/// Columns of i.i.d. standard-normal draws.
Matrix standard_normal(int dim, int count, Rng& rng);

}  // namespace drfree
