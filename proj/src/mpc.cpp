#include "gop/mpc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "gop/constraint.hpp"
#include "gop/gaussian.hpp"
#include "gop/overlap.hpp"

namespace gop {

namespace {

using Eigen::Matrix3d;
using Eigen::Vector3d;

// Exact overlap between the inflated drone and obstacle Gaussians at a
// realized state; reporting always goes through this, never through the
// planner's linearizations.
ObstacleMetric exact_metric(const Vector3d& drone_pos, const Matrix3d& drone_cov,
                            double drone_radius, const ObstacleState& obs,
                            double kappa, int dim, bool sensed) {
  ObstacleMetric metric;
  metric.id = obs.id;
  metric.active = sensed;
  const Eigen::VectorXd mean1 = drone_pos.head(dim);
  const Eigen::VectorXd mean2 = obs.pos.head(dim);
  if ((mean1 - mean2).cwiseAbs().maxCoeff() <= 1e-12) {
    metric.upsilon = 1.0;
    metric.contour = 0.0;
    return metric;
  }
  const Gaussian g1(mean1,
                    inflate(drone_cov.topLeftCorner(dim, dim), drone_radius, kappa));
  const Gaussian g2(mean2, inflate(obs.cov.topLeftCorner(dim, dim), obs.radius, kappa));
  metric.upsilon = solve_lambda(g1, g2).overlap;
  metric.contour = metric.upsilon > 0.0 ? overlap_to_contour(metric.upsilon, dim) : 1.0;
  return metric;
}

}  // namespace

std::vector<ObstaclePrediction> predict_obstacles(const WorldState& world,
                                                  int horizon, double tau,
                                                  double cov_growth) {
  if (horizon < 1) throw std::invalid_argument("predict_obstacles: horizon must be >= 1");
  std::vector<ObstaclePrediction> predictions;
  predictions.reserve(world.obstacles.size());
  for (size_t k = 0; k < world.obstacles.size(); ++k) {
    const ObstacleState& obs = world.obstacles[k];
    ObstaclePrediction pred;
    pred.world_index = static_cast<int>(k);
    pred.means.reserve(horizon);
    pred.covs.reserve(horizon);
    for (int i = 1; i <= horizon; ++i) {
      pred.means.push_back(obs.pos + i * tau * obs.vel);
      pred.covs.push_back(obs.cov + i * cov_growth * Matrix3d::Identity());
    }
    predictions.push_back(std::move(pred));
  }
  return predictions;
}

Vector3d select_waypoint(const Vector3d& route_start, const Vector3d& goal,
                         const Vector3d& drone_pos, double spacing) {
  const Vector3d axis = goal - route_start;
  const double length = axis.norm();
  if (length <= 1e-9 || spacing <= 0.0) return goal;
  const Vector3d dir = axis / length;
  const double progress = (drone_pos - route_start).dot(dir);
  const double next = (std::floor(std::max(progress, 0.0) / spacing) + 1.0) * spacing;
  if (next >= length) return goal;
  return route_start + next * dir;
}

MpcStepResult mpc_step(const WorldState& world, const MpcConfig& config,
                       const Vector3d& goal, const TrajectorySolution* previous_plan) {
  const auto t0 = std::chrono::steady_clock::now();
  MpcStepResult result;

  std::vector<size_t> sensed;
  for (size_t k = 0; k < world.obstacles.size(); ++k) {
    if ((world.obstacles[k].pos - world.drone_pos).norm() <= config.sensing_range) {
      sensed.push_back(k);
    }
  }

  result.waypoint =
      select_waypoint(config.route_start, goal, world.drone_pos, config.waypoint_spacing);

  ProblemSpec spec;
  spec.start = world.drone_pos;
  spec.goal = result.waypoint;
  spec.steps = config.horizon;
  spec.tau = config.tau;
  spec.v_min = config.v_min;
  spec.v_max = config.v_max;
  spec.a_min = config.a_min;
  spec.a_max = config.a_max;
  spec.drone_cov_seq.assign(config.horizon, config.drone_cov);
  spec.drone_radius = config.drone_radius;
  spec.upsilon_max = contour_to_overlap(config.c_min, config.dim);
  if (config.c_max) spec.upsilon_min = contour_to_overlap(*config.c_max, config.dim);
  spec.upper_bound_region = config.corridor_region;
  spec.smooth_weight = config.smooth_weight;
  spec.terminal_weight = config.terminal_weight;
  spec.kappa = config.kappa;
  spec.dim = config.dim;
  spec.initial_velocity = world.drone_vel;

  const auto predictions =
      predict_obstacles(world, config.horizon, config.tau, config.cov_growth);
  for (size_t k : sensed) {
    const ObstacleState& obs = world.obstacles[k];
    ObstacleTrack track;
    track.means = predictions[k].means;
    track.covs = predictions[k].covs;
    track.radius = obs.radius;
    track.upper_bound_exempt = obs.wall;
    track.id = obs.id;
    spec.obstacles.push_back(std::move(track));
  }

  // Warm start: shift the previous plan by one step and align the overlap
  // parameters by obstacle id.
  TrajectorySolution seed;
  const TrajectorySolution* seed_ptr = nullptr;
  if (previous_plan &&
      static_cast<int>(previous_plan->velocities.size()) == config.horizon) {
    seed.velocities.assign(previous_plan->velocities.begin() + 1,
                           previous_plan->velocities.end());
    seed.velocities.push_back(previous_plan->velocities.back());
    seed.lambdas =
        Eigen::MatrixXd::Constant(spec.obstacles.size(), config.horizon, 0.5);
    seed_ptr = &seed;
  }

  bool failed = false;
  try {
    result.plan = scp_solve(spec, seed_ptr, config.scp);
    failed = result.plan.velocities.empty();
    for (const auto& v : result.plan.velocities) {
      if (!v.allFinite()) failed = true;
    }
  } catch (const std::exception&) {
    failed = true;
  }

  if (failed) {
    result.scp_failed = true;
    result.command = Vector3d::Zero();
  } else {
    result.command = result.plan.velocities.front();
  }

  result.metrics = exact_metrics(world, config);

  result.solve_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
  return result;
}

std::vector<ObstacleMetric> exact_metrics(const WorldState& world,
                                          const MpcConfig& config) {
  std::vector<ObstacleMetric> metrics;
  metrics.reserve(world.obstacles.size());
  for (const ObstacleState& obs : world.obstacles) {
    const bool sensed =
        (obs.pos - world.drone_pos).norm() <= config.sensing_range;
    metrics.push_back(exact_metric(world.drone_pos, config.drone_cov,
                                   config.drone_radius, obs, config.kappa,
                                   config.dim, sensed));
  }
  return metrics;
}

}  // namespace gop
