#pragma once

// Independent numerical oracles used by the test suites. Everything here is
// deliberately brute force (quadrature, bisection on integrals, support
// function geometry) and shares no code with the library paths it checks.

#include <Eigen/Dense>

#include <random>
#include <utility>

#include "gop/gaussian.hpp"

namespace gop::testing {

/// Standard normal CDF by composite Simpson quadrature of the density.
double phi_quadrature(double x);

/// Chi-square CDF by Simpson quadrature of the density, dof in {2,3}.
double chi_square_cdf_quadrature(double q, int dof);

/// Quantile by bisection on the quadrature CDF.
double chi_square_quantile_quadrature(double p, int dof);

struct TouchingPair {
  Eigen::Vector2d mu1;
  Eigen::Vector2d mu2;
  Eigen::Vector2d touch_point;
  double separation = 0.0;
  double radius = 0.0;  // Mahalanobis radius of the touching contours
};

/// Places two 2D Gaussians with the given covariances so that their c_t
/// confidence ellipses touch along direction `dir` (set distance zero).
/// Uses support-function evaluation on an angular grid with local
/// refinement plus bisection on the separation.
TouchingPair touching_means(const Eigen::Matrix2d& cov1, const Eigen::Matrix2d& cov2,
                            double c_t, const Eigen::Vector2d& dir);

/// Well-conditioned random Gaussian: cov = A A^T + 1e-3 I with A entries
/// uniform in [-1,1], mean uniform in [-5,5]^d.
Gaussian random_gaussian(std::mt19937_64& rng, int dim);

}  // namespace gop::testing
