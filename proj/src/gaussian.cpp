#include "gop/gaussian.hpp"

#include <Eigen/Eigenvalues>

#include <string>
#include <utility>

namespace gop {

bool is_valid_covariance(const Eigen::MatrixXd& cov, std::string* why) {
  if (cov.rows() != cov.cols() || cov.rows() < 1) {
    if (why) *why = "covariance is not square";
    return false;
  }
  const double scale = cov.cwiseAbs().maxCoeff();
  const double asym = (cov - cov.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * std::max(scale, 1e-300)) {
    if (why) *why = "covariance is not symmetric";
    return false;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= 0.0) {
    if (why) *why = "covariance is not positive definite";
    return false;
  }
  return true;
}

Gaussian::Gaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov)
    : mean_(std::move(mean)), cov_(std::move(cov)) {
  const auto d = mean_.size();
  if (d != 2 && d != 3) {
    throw std::invalid_argument("Gaussian: dimension must be 2 or 3");
  }
  if (cov_.rows() != d || cov_.cols() != d) {
    throw std::invalid_argument("Gaussian: covariance shape does not match mean");
  }
  std::string why;
  if (!is_valid_covariance(cov_, &why)) {
    throw std::invalid_argument("Gaussian: " + why);
  }
}

}  // namespace gop
