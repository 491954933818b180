#pragma once

#include <Eigen/Dense>

#include <stdexcept>

namespace gop {

/// Thrown when two coincident means make the minmax separator undefined.
class degenerate_means_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Multivariate normal over positions, d in {2, 3}.
///
/// Construction validates symmetry and positive definiteness of the
/// covariance; instances are immutable afterwards.
class Gaussian {
 public:
  Gaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov);

  int dim() const { return static_cast<int>(mean_.size()); }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& cov() const { return cov_; }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
};

/// Validation helper shared by Gaussian and scenario parsing: symmetric
/// within 1e-12 relative and smallest eigenvalue strictly positive.
bool is_valid_covariance(const Eigen::MatrixXd& cov, std::string* why = nullptr);

}  // namespace gop
