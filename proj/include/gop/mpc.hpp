#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "gop/scp.hpp"

namespace gop {

struct ObstacleState {
  Eigen::Vector3d pos = Eigen::Vector3d::Zero();
  Eigen::Vector3d vel = Eigen::Vector3d::Zero();
  Eigen::Matrix3d cov = Eigen::Matrix3d::Identity();
  double radius = 0.0;
  int id = 0;
  bool wall = false;
};

struct WorldState {
  double time = 0.0;
  Eigen::Vector3d drone_pos = Eigen::Vector3d::Zero();
  Eigen::Vector3d drone_vel = Eigen::Vector3d::Zero();
  std::vector<ObstacleState> obstacles;
};

struct MpcConfig {
  int horizon = 10;
  double tau = 0.3;
  double sensing_range = 10.0;
  double c_min = 0.9;
  std::optional<double> c_max;
  double waypoint_spacing = 5.0;
  double goal_tolerance = 0.2;
  double cov_growth = 0.0;  // added to obstacle covariances per step, times I
  int dim = 3;
  double kappa = 3.0;
  Eigen::Vector3d v_min = Eigen::Vector3d::Constant(-1.0);
  Eigen::Vector3d v_max = Eigen::Vector3d::Constant(1.0);
  Eigen::Vector3d a_min = Eigen::Vector3d::Constant(-1.0);
  Eigen::Vector3d a_max = Eigen::Vector3d::Constant(1.0);
  Eigen::Matrix3d drone_cov = 0.02 * Eigen::Matrix3d::Identity();
  double drone_radius = 0.5;
  double smooth_weight = 1.0;
  double terminal_weight = 1.0;
  Eigen::Vector3d route_start = Eigen::Vector3d::Zero();  // waypoint line origin
  std::optional<Region> corridor_region;
  ScpSettings scp;
};

struct ObstaclePrediction {
  int world_index = 0;
  std::vector<Eigen::Vector3d> means;
  std::vector<Eigen::Matrix3d> covs;
};

/// Constant-velocity mean extrapolation over the horizon; covariances held
/// fixed or grown linearly by cov_growth * I per step.
std::vector<ObstaclePrediction> predict_obstacles(const WorldState& world,
                                                  int horizon, double tau,
                                                  double cov_growth = 0.0);

struct ObstacleMetric {
  int id = 0;
  double upsilon = 0.0;   // exact overlap at the current realized state
  double contour = 1.0;   // contour of touch for that overlap
  bool active = false;    // within sensing range this step
};

struct MpcStepResult {
  Eigen::Vector3d command = Eigen::Vector3d::Zero();
  TrajectorySolution plan;
  std::vector<ObstacleMetric> metrics;
  Eigen::Vector3d waypoint = Eigen::Vector3d::Zero();
  double solve_ms = 0.0;
  bool scp_failed = false;
};

/// One receding-horizon step: sense, predict, plan toward the current
/// waypoint, return the first velocity command and exact overlap metrics
/// for every obstacle at the realized state.
MpcStepResult mpc_step(const WorldState& world, const MpcConfig& config,
                       const Eigen::Vector3d& goal,
                       const TrajectorySolution* previous_plan = nullptr);

/// Exact overlap and contour of touch against every obstacle at the
/// current realized state (solve_lambda on inflated pairs, no
/// linearization anywhere).
std::vector<ObstacleMetric> exact_metrics(const WorldState& world,
                                          const MpcConfig& config);

/// Waypoint selection along the route_start -> goal line: the nearest
/// grid point (spacing apart) strictly ahead of the drone's projection,
/// capped at the goal itself.
Eigen::Vector3d select_waypoint(const Eigen::Vector3d& route_start,
                                const Eigen::Vector3d& goal,
                                const Eigen::Vector3d& drone_pos, double spacing);

}  // namespace gop
