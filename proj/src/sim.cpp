#include "gop/sim.hpp"

#include <algorithm>
#include <cmath>

namespace gop {

namespace {

using Eigen::Vector3d;

// Nominal straight-line time: route length over the fastest admissible
// speed along the route direction under the componentwise velocity box.
double nominal_time(const Scenario& sc) {
  const Vector3d axis = sc.goal - sc.start;
  const double length = axis.norm();
  if (length <= 1e-9) return sc.tau;
  const Vector3d dir = axis / length;
  double best_scale = 0.0;
  // Largest s with s*dir inside [v_min, v_max].
  double cap = kInf;
  for (int c = 0; c < 3; ++c) {
    if (dir(c) > 1e-12) {
      cap = std::min(cap, sc.v_max(c) / dir(c));
    } else if (dir(c) < -1e-12) {
      cap = std::min(cap, sc.v_min(c) / dir(c));
    }
  }
  best_scale = std::max(cap, 1e-6);
  return length / best_scale;
}

}  // namespace

MpcConfig mpc_config_from_scenario(const Scenario& scenario) {
  MpcConfig config;
  config.horizon = scenario.horizon;
  config.tau = scenario.tau;
  config.sensing_range = scenario.sensing_range;
  config.c_min = scenario.c_min;
  config.c_max = scenario.c_max;
  config.waypoint_spacing = scenario.waypoint_spacing;
  config.goal_tolerance = scenario.goal_tolerance;
  config.cov_growth = scenario.cov_growth;
  config.dim = scenario.dim;
  config.kappa = scenario.kappa;
  config.v_min = scenario.v_min;
  config.v_max = scenario.v_max;
  config.a_min = scenario.a_min;
  config.a_max = scenario.a_max;
  config.drone_cov = scenario.drone_cov;
  config.drone_radius = scenario.drone_radius;
  config.smooth_weight = scenario.smooth_weight;
  config.terminal_weight = scenario.terminal_weight;
  config.route_start = scenario.start;
  config.scp = scenario.scp;
  if (scenario.corridor) config.corridor_region = scenario.corridor->box;
  return config;
}

SimTrace run_scenario(const Scenario& scenario, std::uint64_t seed,
                      const StepObserver& observer) {
  const MpcConfig config = mpc_config_from_scenario(scenario);

  std::vector<ObstacleScript> scripts = scenario.obstacles;
  const std::vector<ObstacleScript> walls = scenario.wall_obstacles();
  scripts.insert(scripts.end(), walls.begin(), walls.end());
  const size_t num_declared = scenario.obstacles.size();

  const int budget = scenario.step_budget
                         ? *scenario.step_budget
                         : static_cast<int>(
                               std::ceil(4.0 * nominal_time(scenario) / scenario.tau));

  SimTrace trace;
  trace.scenario = scenario.name;
  trace.summary.seed = seed;

  WorldState world;
  world.time = 0.0;
  world.drone_pos = scenario.start;
  world.drone_vel = Vector3d::Zero();
  world.obstacles.resize(scripts.size());

  TrajectorySolution previous_plan;
  bool have_plan = false;
  double min_wall_clearance = kInf;

  for (int step = 0; step < budget; ++step) {
    for (size_t k = 0; k < scripts.size(); ++k) {
      ObstacleState& obs = world.obstacles[k];
      obs.pos = scripts[k].position(world.time);
      obs.vel = scripts[k].velocity(world.time);
      obs.cov = scripts[k].cov;
      obs.radius = scripts[k].radius;
      obs.id = scripts[k].id;
      obs.wall = scripts[k].wall;
    }

    const bool reached = (world.drone_pos - scenario.goal).head(scenario.dim).norm() <=
                         scenario.goal_tolerance;

    SimRecord record;
    record.t = world.time;
    record.pos = world.drone_pos;
    record.vel = world.drone_vel;
    for (size_t k = num_declared; k < scripts.size(); ++k) {
      min_wall_clearance =
          std::min(min_wall_clearance,
                   (world.drone_pos - world.obstacles[k].pos).norm());
    }

    if (reached) {
      // Terminal record: state and metrics at arrival, no plan attached.
      const auto metrics = exact_metrics(world, config);
      for (size_t k = 0; k < num_declared; ++k) {
        record.obstacles.push_back({metrics[k].id, metrics[k].upsilon,
                                    metrics[k].contour, metrics[k].active});
      }
      trace.records.push_back(std::move(record));
      trace.summary.completed = true;
      trace.summary.completion_time = world.time;
      break;
    }

    const MpcStepResult result = mpc_step(world, config, scenario.goal,
                                          have_plan ? &previous_plan : nullptr);
    for (size_t k = 0; k < num_declared; ++k) {
      const ObstacleMetric& metric = result.metrics[k];
      record.obstacles.push_back(
          {metric.id, metric.upsilon, metric.contour, metric.active});
    }
    record.cost_terminal = result.plan.cost_terminal;
    record.cost_smooth = result.plan.cost_smooth;
    record.scp_iterations = result.plan.scp_iterations;
    record.solve_ms = result.solve_ms;
    record.scp_failed = result.scp_failed;
    if (observer) observer(record, result);
    trace.records.push_back(std::move(record));

    world.drone_pos += scenario.tau * result.command;
    world.drone_vel = result.command;
    world.time += scenario.tau;
    if (!result.scp_failed) {
      previous_plan = result.plan;
      have_plan = true;
    } else {
      have_plan = false;
    }
  }

  recompute_summary_reductions(trace);
  if (!walls.empty()) trace.summary.min_wall_clearance = min_wall_clearance;

  // A run violates its contract when an obstacle that was in sensing range
  // crossed below the contour floor, or when a wall was touched.
  bool violated = false;
  for (const SimRecord& rec : trace.records) {
    for (const ObstacleRecord& obs : rec.obstacles) {
      if (obs.active && obs.contour < scenario.c_min - 0.01) violated = true;
    }
  }
  if (trace.summary.min_wall_clearance && scenario.corridor) {
    const double contact =
        scenario.corridor->wall_thickness + scenario.drone_radius;
    if (*trace.summary.min_wall_clearance < contact) violated = true;
  }
  trace.summary.constraint_violated = violated;
  return trace;
}

}  // namespace gop
