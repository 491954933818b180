#pragma once

#include <Eigen/Dense>

#include <vector>

#include "gop/gaussian.hpp"

namespace gop {

/// Additive isotropic covariance inflation absorbing a physical radius:
/// cov + (radius/kappa)^2 I. Preserves positive definiteness and commutes
/// with rotations.
Eigen::MatrixXd inflate(const Eigen::MatrixXd& cov, double radius, double kappa);

/// Drone/obstacle covariances after radius inflation with a shared kappa.
struct InflatedPair {
  Eigen::MatrixXd drone_cov;
  Eigen::MatrixXd obstacle_cov;
  double kappa = 3.0;
};

InflatedPair make_inflated_pair(const Eigen::MatrixXd& drone_cov, double drone_radius,
                                const Eigen::MatrixXd& obstacle_cov,
                                double obstacle_radius, double kappa);

/// Overlap value f1 and admissibility residual f2 for a FIXED overlap
/// parameter (the separator is built from the given lambda, never
/// re-solved). Coincident positions yield the total-overlap sentinel
/// f1 = 1, f2 = 0.
struct PairValues {
  double f1 = 1.0;
  double f2 = 0.0;
  double scale = 1.0;  // alpha^T S1 alpha + alpha^T S2 alpha, the natural f2 unit
  bool degenerate = false;
};

PairValues constraint_pair(const Eigen::VectorXd& drone_pos,
                           const Eigen::MatrixXd& drone_cov,
                           const Eigen::VectorXd& obstacle_mean,
                           const Eigen::MatrixXd& obstacle_cov, double lambda);

/// Values and partial derivatives of the pair constraint at one trajectory
/// step, chained through the holonomic motion model: every velocity
/// component up to the step contributes tau * (position gradient).
struct ConstraintEval {
  double upsilon = 1.0;   // f1
  double residual = 0.0;  // f2
  Eigen::VectorXd grad_upsilon_v;   // length 3*step
  Eigen::VectorXd grad_residual_v;  // length 3*step
  double grad_upsilon_lambda = 0.0;
  double grad_residual_lambda = 0.0;
  Eigen::VectorXd grad_upsilon_pos;   // length 3, zero-padded beyond dim
  Eigen::VectorXd grad_residual_pos;  // length 3
  bool finite = true;
  bool degenerate = false;
};

/// Values of f1/f2 together with their gradients in the drone position and
/// in lambda, at a fixed evaluation point. Building block for the
/// velocity-chained variant below and for the optimizer's linearizations.
struct PairLinearization {
  double f1 = 1.0;
  double f2 = 0.0;
  double scale = 1.0;  // alpha^T S1 alpha + alpha^T S2 alpha at the point
  Eigen::Vector3d grad_f1_pos = Eigen::Vector3d::Zero();  // zero-padded past dim
  Eigen::Vector3d grad_f2_pos = Eigen::Vector3d::Zero();
  double grad_f1_lambda = 0.0;
  double grad_f2_lambda = 0.0;
  bool degenerate = false;
  bool finite = true;
};

PairLinearization pair_linearization(const Eigen::Vector3d& drone_pos,
                                     const Eigen::MatrixXd& drone_cov,
                                     const Eigen::Vector3d& obstacle_mean,
                                     const Eigen::MatrixXd& obstacle_cov,
                                     double lambda, int dim = 3);

/// Evaluates the pair constraint at step `step` (1-based) of the
/// trajectory rolled out from `start` with the given velocity sequence.
/// Covariances are taken as already inflated. `dim` selects how many
/// leading position components participate (2 keeps motion planar).
ConstraintEval constraint_gradients(const Eigen::Vector3d& start,
                                    const std::vector<Eigen::Vector3d>& velocities,
                                    double tau, int step,
                                    const Eigen::MatrixXd& drone_cov,
                                    const Eigen::Vector3d& obstacle_mean,
                                    const Eigen::MatrixXd& obstacle_cov,
                                    double lambda, int dim = 3);

}  // namespace gop
