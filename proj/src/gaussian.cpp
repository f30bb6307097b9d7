#include "drfree/gaussian.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>

namespace drfree {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void check_same_dim(const GaussianKernel& p, const GaussianKernel& q) {
  if (p.dim() != q.dim())
    throw DimensionError("gaussian dimension mismatch: " + std::to_string(p.dim()) +
                         " vs " + std::to_string(q.dim()));
}

void check_vector_dim(const GaussianKernel& p, const Vector& x) {
  if (x.size() != p.dim())
    throw DimensionError("vector of length " + std::to_string(x.size()) +
                         " for gaussian of dim " + std::to_string(p.dim()));
}

}  // namespace

GaussianKernel::GaussianKernel(Vector mean, Matrix covariance) : mean_(std::move(mean)) {
  const auto n = mean_.size();
  if (n == 0) throw DimensionError("gaussian dimension must be positive");
  if (covariance.rows() != n || covariance.cols() != n)
    throw DimensionError("covariance shape does not match mean length");
  if (!covariance.allFinite()) throw NotPositiveDefinite("covariance has non-finite entries");

  const double scale = covariance.cwiseAbs().maxCoeff();
  const double asym = (covariance - covariance.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * std::max(scale, 1.0))
    throw NotPositiveDefinite("covariance is not symmetric");

  Eigen::LLT<Matrix> llt(covariance);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite("covariance is not positive definite");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(covariance, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < kCovFloor)
    throw NotPositiveDefinite("covariance eigenvalue below floor");

  chol_ = llt.matrixL();
  log_det_ = 2.0 * chol_.diagonal().array().log().sum();
  cov_ = std::move(covariance);
}

GaussianKernel GaussianKernel::diagonal(Vector mean, Vector variances) {
  if (mean.size() == 0) throw DimensionError("gaussian dimension must be positive");
  if (variances.size() != mean.size())
    throw DimensionError("variance vector length does not match mean length");
  if (!variances.allFinite() || (variances.array() < kCovFloor).any())
    throw NotPositiveDefinite("diagonal variance below floor or non-finite");
  GaussianKernel g;
  g.mean_ = std::move(mean);
  g.log_det_ = variances.array().log().sum();
  g.diag_ = std::move(variances);
  return g;
}

GaussianKernel GaussianKernel::isotropic(Vector mean, double variance) {
  const auto n = mean.size();
  return diagonal(std::move(mean), Vector::Constant(n, variance));
}

Matrix GaussianKernel::covariance() const {
  if (diag_) return diag_->asDiagonal();
  return *cov_;
}

GaussianKernel GaussianKernel::scaled(double factor) const {
  if (!(factor > 0.0)) throw NotPositiveDefinite("covariance scale must be positive");
  if (diag_) return diagonal(mean_, *diag_ * factor);
  return GaussianKernel(mean_, *cov_ * factor);
}

Vector GaussianKernel::whiten(const Vector& x) const {
  check_vector_dim(*this, x);
  if (diag_) return (x - mean_).array() / diag_->array().sqrt();
  return chol_.triangularView<Eigen::Lower>().solve(x - mean_);
}

Vector GaussianKernel::color(const Vector& z) const {
  check_vector_dim(*this, z);
  if (diag_) return mean_.array() + diag_->array().sqrt() * z.array();
  return mean_ + chol_.triangularView<Eigen::Lower>() * z;
}

Matrix GaussianKernel::cholesky() const {
  if (diag_) return diag_->array().sqrt().matrix().asDiagonal();
  return chol_;
}

double GaussianKernel::quad_form(const Vector& v) const {
  check_vector_dim(*this, v);
  if (diag_) return (v.array().square() / diag_->array()).sum();
  return chol_.triangularView<Eigen::Lower>().solve(v).squaredNorm();
}

double GaussianKernel::mahalanobis_sq(const Vector& x) const {
  check_vector_dim(*this, x);
  return quad_form(x - mean_);
}

double GaussianKernel::trace_inv_times(const GaussianKernel& other) const {
  check_same_dim(*this, other);
  if (diag_) {
    if (other.diag_) return (other.diag_->array() / diag_->array()).sum();
    return (other.cov_->diagonal().array() / diag_->array()).sum();
  }
  Eigen::LLT<Matrix> llt;
  llt.compute(*cov_);
  return llt.solve(other.covariance()).trace();
}

double kl_gaussian(const GaussianKernel& p, const GaussianKernel& q) {
  check_same_dim(p, q);
  const double n = p.dim();
  const double tr = q.trace_inv_times(p);
  const double maha = q.quad_form(q.mean() - p.mean());
  const double kl = 0.5 * (tr + maha - n + q.log_det() - p.log_det());
  // Cancellation can leave a tiny negative residue for identical inputs.
  return kl < 0.0 ? 0.0 : kl;
}

double entropy(const GaussianKernel& p) {
  return 0.5 * p.dim() * (1.0 + kLog2Pi) + 0.5 * p.log_det();
}

double log_density(const GaussianKernel& p, const Vector& x) {
  return -0.5 * (p.dim() * kLog2Pi + p.log_det() + p.mahalanobis_sq(x));
}

Vector log_density_columns(const GaussianKernel& p, const Matrix& xs) {
  if (xs.rows() != p.dim()) throw DimensionError("log_density: sample dimension mismatch");
  Vector q(xs.cols());
  if (p.is_diagonal()) {
    const Eigen::ArrayXd var = p.variances().array();
    q = ((xs.colwise() - p.mean()).array().square().colwise() / var).colwise().sum().transpose();
  } else {
    for (Eigen::Index j = 0; j < xs.cols(); ++j) q[j] = p.mahalanobis_sq(xs.col(j));
  }
  return (-0.5 * (p.dim() * kLog2Pi + p.log_det() + q.array())).matrix();
}

Matrix standard_normal(int dim, int count, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix z(dim, count);
  for (int j = 0; j < count; ++j)
    for (int i = 0; i < dim; ++i) z(i, j) = normal(rng);
  return z;
}

void sample_into(const GaussianKernel& p, Rng& rng, Matrix& out) {
  const Matrix z = standard_normal(p.dim(), static_cast<int>(out.cols()), rng);
  if (p.is_diagonal())
    out = ((z.array().colwise() * p.variances().array().sqrt()).matrix()).colwise() + p.mean();
  else
    out = (p.cholesky() * z).colwise() + p.mean();
}

std::vector<Vector> sample(const GaussianKernel& p, std::uint64_t seed, int count) {
  if (count < 1) throw std::invalid_argument("sample count must be >= 1");
  Rng rng(seed);
  Matrix draws(p.dim(), count);
  sample_into(p, rng, draws);
  std::vector<Vector> out;
  out.reserve(count);
  for (int j = 0; j < count; ++j) out.emplace_back(draws.col(j));
  return out;
}

}  // namespace drfree
