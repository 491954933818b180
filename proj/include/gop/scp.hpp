#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "gop/qp.hpp"

namespace gop {

/// Axis-aligned box, used to scope the overlap lower-bound constraint to a
/// corridor region.
struct Region {
  Eigen::Vector3d min_corner = Eigen::Vector3d::Zero();
  Eigen::Vector3d max_corner = Eigen::Vector3d::Zero();

  bool contains(const Eigen::Vector3d& p) const {
    return (p.array() >= min_corner.array()).all() &&
           (p.array() <= max_corner.array()).all();
  }
};

/// One obstacle over the planning horizon: predicted means and raw
/// (uninflated) covariances per step.
struct ObstacleTrack {
  std::vector<Eigen::Vector3d> means;
  std::vector<Eigen::Matrix3d> covs;
  double radius = 0.0;
  bool upper_bound_exempt = false;  // walls never get the stay-close bound
  int id = 0;
};

/// Finite-horizon probabilistic trajectory optimization problem.
struct ProblemSpec {
  Eigen::Vector3d start = Eigen::Vector3d::Zero();
  Eigen::Vector3d goal = Eigen::Vector3d::Zero();
  int steps = 0;  // N >= 3
  double tau = 0.1;
  Eigen::Vector3d v_min = Eigen::Vector3d::Constant(-1.0);
  Eigen::Vector3d v_max = Eigen::Vector3d::Constant(1.0);
  Eigen::Vector3d a_min = Eigen::Vector3d::Constant(-1.0);
  Eigen::Vector3d a_max = Eigen::Vector3d::Constant(1.0);
  std::vector<Eigen::Matrix3d> drone_cov_seq;  // length N, raw
  double drone_radius = 0.0;
  std::vector<ObstacleTrack> obstacles;
  double upsilon_max = 1.0;
  std::optional<double> upsilon_min;
  std::optional<Region> upper_bound_region;
  double smooth_weight = 1.0;
  double terminal_weight = 1.0;
  double kappa = 3.0;
  int dim = 3;
  /// When set, the first planned velocity honors the acceleration bounds
  /// relative to this (the currently executed) velocity.
  std::optional<Eigen::Vector3d> initial_velocity;
};

struct ScpSettings {
  double cost_tolerance = 1e-3;  // stop when the merit improves less than this
  int max_iterations = 50;
  double trust_initial = 0.5;  // per-component velocity trust box (m/s)
  double trust_min = 1e-3;
  double slack_penalty = 1e4;
  double lambda_min = 0.01;
  double lambda_max = 0.99;
  double activation_factor = 3.0;  // times the combined 99% contour extent
  double prox_velocity = 1e-3;
  double prox_lambda = 1e-3;
  double slack_quad = 1.0;
  QpMode qp_mode = QpMode::kAuto;
  int dense_limit = 200;
};

struct ScpIterationRecord {
  int iteration = 0;
  double cost = 0.0;   // terminal + smoothness (weighted)
  double merit = 0.0;  // cost + penalty-weighted exact violations
  double max_violation = 0.0;
  double trust_radius = 0.0;
  int qp_variables = 0;
  int qp_iterations = 0;
  bool accepted = false;
};

struct TrajectorySolution {
  std::vector<Eigen::Vector3d> velocities;  // N
  std::vector<Eigen::Vector3d> positions;   // N, exact rollout of velocities
  Eigen::MatrixXd lambdas;                  // P x N
  Eigen::MatrixXd upsilons;                 // P x N, exact re-solved overlap
  double cost_terminal = 0.0;               // squared Mahalanobis goal distance
  double cost_smooth = 0.0;                 // summed squared jerk
  int scp_iterations = 0;
  bool converged = false;
  bool constraint_violated = false;
  double max_exact_violation = 0.0;
  double linearization_gap = 0.0;  // |f1_lin - f1_exact| at the last accepted step
  std::vector<double> per_iteration_cost;
  std::vector<ScpIterationRecord> diagnostics;
  std::string message;
};

/// Holonomic rollout: position i is start + tau * sum of the first i+1
/// velocities.
std::vector<Eigen::Vector3d> rollout(const Eigen::Vector3d& start,
                                     const std::vector<Eigen::Vector3d>& velocities,
                                     double tau);

/// Squared Mahalanobis distance of the final position to the goal under
/// the final covariance (restricted to the leading dim block).
double terminal_cost(const Eigen::Vector3d& final_pos,
                     const Eigen::Matrix3d& final_cov, const Eigen::Vector3d& goal,
                     int dim = 3);

/// Summed squared second differences of the velocity profile over tau^2.
double smoothness_cost(const std::vector<Eigen::Vector3d>& velocities, double tau);

/// Sequential convex programming over velocities and per-pair overlap
/// parameters: linearized overlap constraints with slack, box trust
/// region, exact-merit acceptance, and a final exact overlap audit.
TrajectorySolution scp_solve(const ProblemSpec& spec,
                             const TrajectorySolution* warm_start = nullptr,
                             const ScpSettings& settings = {});

}  // namespace gop
