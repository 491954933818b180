#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <random>
#include <utility>

#include "gop/gaussian.hpp"

namespace gop {

/// Minmax linear separator between two Gaussians: the hyperplane
/// alpha^T x = beta together with the overlap parameter lambda that blends
/// the covariances, the whitened distances eta1/eta2 of each mean to the
/// plane, and the resulting overlap (sum of both misclassification
/// probabilities).
struct Separator {
  Eigen::VectorXd alpha;
  double beta = 0.0;
  double lambda = 0.5;
  double eta1 = 0.0;
  double eta2 = 0.0;
  double overlap = 1.0;
  /// Set when the means coincide and no separator exists; overlap is 1.
  bool degenerate = false;
};

/// Bhattacharyya distance between two Gaussians of equal dimension.
double bhattacharyya(const Gaussian& g1, const Gaussian& g2);

/// Hyperplane (alpha, beta) for a given overlap parameter:
///   alpha = (lambda S1 + (1-lambda) S2)^-1 (mu2 - mu1)
///   beta  = alpha^T mu1 + lambda alpha^T S1 alpha
/// Throws degenerate_means_error when mu1 == mu2 (within 1e-12).
std::pair<Eigen::VectorXd, double> separator_from_lambda(const Gaussian& g1,
                                                         const Gaussian& g2,
                                                         double lambda);

/// Whitened signed distances of each mean to the plane alpha^T x = beta:
///   eta1 = (beta - alpha^T mu1) / sqrt(alpha^T S1 alpha)
///   eta2 = (alpha^T mu2 - beta) / sqrt(alpha^T S2 alpha)
std::pair<double, double> eta_values(const Gaussian& g1, const Gaussian& g2,
                                     const Eigen::VectorXd& alpha, double beta);

/// alpha^T [lambda^2 S1 - (1-lambda)^2 S2] alpha with alpha from
/// separator_from_lambda. Zero exactly at the admissible lambda where
/// eta1 == eta2; negative as lambda -> 0, positive as lambda -> 1.
double admissibility_residual(const Gaussian& g1, const Gaussian& g2, double lambda);

/// Finds the admissible overlap parameter by bisection on the
/// admissibility residual over lambda in [1e-6, 1-1e-6] and returns the
/// full separator. Coincident means yield the total-overlap result
/// (overlap 1, lambda 0.5, degenerate flag). tol is relative to
/// alpha^T S1 alpha + alpha^T S2 alpha.
Separator solve_lambda(const Gaussian& g1, const Gaussian& g2, double tol = 1e-10);

/// Overlap of two Gaussians whose confidence ellipsoids touch exactly at
/// level c_t: 2 (1 - Phi(r)) with r^2 the chi-square quantile of c_t.
/// Strictly decreasing bijection of (0,1) onto (0,1) for dim in {2,3}.
double contour_to_overlap(double c_t, int dim);

/// Inverse of contour_to_overlap; round-trip error below 1e-9.
double overlap_to_contour(double upsilon, int dim);

struct MisclassificationEstimate {
  double p1_hat = 0.0;  // fraction of g1 samples with alpha^T x > beta
  double p2_hat = 0.0;  // fraction of g2 samples with alpha^T x <= beta
};

/// Sampling estimate of both misclassification probabilities for a given
/// separator. The caller owns and seeds the generator; results are
/// reproducible for a fixed seed.
MisclassificationEstimate monte_carlo_misclassification(const Gaussian& g1,
                                                        const Gaussian& g2,
                                                        const Separator& sep,
                                                        int n,
                                                        std::mt19937_64 rng);

/// Writes the contour-of-touch to overlap table as CSV rows
/// `c_t,dim,upsilon` with 15 significant digits on a regular c_t grid.
void write_contour_table(std::ostream& out, int dim, double step = 0.01);

}  // namespace gop
