#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>

#include "gop/overlap.hpp"
#include "gop/scp.hpp"

using namespace gop;
using Eigen::Matrix3d;
using Eigen::Vector3d;

namespace {

// Single obstacle crossing the route head-on while the drone travels
// start -> goal; the staple characterization scenario for the optimizer.
ProblemSpec head_on_spec() {
  ProblemSpec spec;
  spec.start = Vector3d(0, 0, 0);
  spec.goal = Vector3d(10, 0, 0);
  spec.steps = 20;
  spec.tau = 1.0;
  spec.v_min = Vector3d::Constant(-2.0);
  spec.v_max = Vector3d::Constant(2.0);
  spec.a_min = Vector3d::Constant(-1.0);
  spec.a_max = Vector3d::Constant(1.0);
  spec.drone_cov_seq.assign(spec.steps, 0.02 * Matrix3d::Identity());
  spec.drone_radius = 0.5;
  ObstacleTrack obstacle;
  for (int i = 0; i < spec.steps; ++i) {
    const double s = static_cast<double>(i) / (spec.steps - 1);
    obstacle.means.emplace_back(10.0 - 10.0 * s, 0.0, 0.0);
    obstacle.covs.push_back(0.02 * Matrix3d::Identity());
  }
  obstacle.radius = 0.5;
  spec.obstacles.push_back(obstacle);
  spec.upsilon_max = contour_to_overlap(0.60, 3);
  spec.dim = 3;
  return spec;
}

}  // namespace

TEST_CASE("rollout arithmetic") {
  const Vector3d start(1, 2, 3);
  {
    const auto pos = rollout(start, {Vector3d(1, 0, 0), Vector3d(1, 0, 0),
                                     Vector3d(1, 0, 0)},
                             1.0);
    CHECK((pos[2] - (start + Vector3d(3, 0, 0))).norm() == 0.0);
  }
  {
    const auto pos = rollout(start, std::vector<Vector3d>(4, Vector3d::Zero()), 0.5);
    for (const auto& p : pos) CHECK((p - start).norm() == 0.0);
  }
  {
    const auto pos =
        rollout(Vector3d::Zero(), std::vector<Vector3d>(5, Vector3d(0, 2, 0)), 0.3);
    CHECK(std::abs(pos[4].y() - 3.0) <= 1e-14);
  }
}

TEST_CASE("terminal_cost closed forms") {
  CHECK(terminal_cost(Vector3d(1, 2, 3), Matrix3d::Identity(), Vector3d(1, 2, 3)) == 0.0);
  CHECK(std::abs(terminal_cost(Vector3d(1, 0, 0), Matrix3d::Identity(),
                               Vector3d::Zero()) -
                 1.0) <= 1e-14);
  const Matrix3d stretched = Vector3d(4, 1, 1).asDiagonal();
  CHECK(std::abs(terminal_cost(Vector3d(2, 0, 0), stretched, Vector3d::Zero()) - 1.0) <=
        1e-14);
}

TEST_CASE("smoothness_cost closed forms") {
  CHECK(smoothness_cost(std::vector<Vector3d>(5, Vector3d(1, -2, 0.5)), 0.7) == 0.0);
  std::vector<Vector3d> ramp;
  for (int i = 0; i < 6; ++i) ramp.emplace_back(0.2 * i, -0.1 * i, 0.0);
  CHECK(smoothness_cost(ramp, 0.4) <= 1e-22);
  const std::vector<Vector3d> spike = {Vector3d::Zero(), Vector3d(1, 0, 0),
                                       Vector3d::Zero()};
  CHECK(std::abs(smoothness_cost(spike, 1.0) - 4.0) <= 1e-14);
}

TEST_CASE("unconstrained problem converges immediately to the goal") {
  ProblemSpec spec;
  spec.start = Vector3d::Zero();
  spec.goal = Vector3d(5, 0, 0);
  spec.steps = 10;
  spec.tau = 1.0;
  spec.v_min = Vector3d::Constant(-2.0);
  spec.v_max = Vector3d::Constant(2.0);
  spec.a_min = Vector3d::Constant(-1.0);
  spec.a_max = Vector3d::Constant(1.0);
  spec.drone_cov_seq.assign(spec.steps, 0.02 * Matrix3d::Identity());

  const TrajectorySolution sol = scp_solve(spec);
  CHECK(sol.converged);
  CHECK(sol.scp_iterations <= 2);
  CHECK(sol.cost_terminal <= 1e-6);

  const auto replay = rollout(spec.start, sol.velocities, spec.tau);
  for (int i = 0; i < spec.steps; ++i) {
    CHECK((sol.positions[i] - replay[i]).norm() <= 1e-10);
  }
}

TEST_CASE("head-on crossing satisfies the overlap bound") {
  const ProblemSpec spec = head_on_spec();
  const TrajectorySolution sol = scp_solve(spec);

  REQUIRE(!sol.velocities.empty());
  CHECK(sol.converged);
  CHECK(sol.upsilons.maxCoeff() <= spec.upsilon_max + 1e-3);
  CHECK(sol.cost_terminal <= 0.25);
  CHECK(sol.linearization_gap <= 5e-3);

  // Bound satisfaction on the returned iterate.
  for (int i = 0; i < spec.steps; ++i) {
    for (int c = 0; c < 3; ++c) {
      CHECK(sol.velocities[i](c) >= spec.v_min(c) - 1e-6);
      CHECK(sol.velocities[i](c) <= spec.v_max(c) + 1e-6);
      if (i + 1 < spec.steps) {
        const double accel = (sol.velocities[i + 1](c) - sol.velocities[i](c)) / spec.tau;
        CHECK(accel >= spec.a_min(c) - 1e-6);
        CHECK(accel <= spec.a_max(c) + 1e-6);
      }
    }
  }

  // Accepted-iterate merits never increase (within tolerance).
  for (size_t k = 1; k < sol.per_iteration_cost.size(); ++k) {
    CHECK(sol.per_iteration_cost[k] <=
          sol.per_iteration_cost[k - 1] + 1e-9 * std::max(1.0, sol.per_iteration_cost[k - 1]));
  }
}

TEST_CASE("tight covariances approximate the euclidean keep-out") {
  ProblemSpec spec = head_on_spec();
  for (auto& cov : spec.drone_cov_seq) cov *= 1e-2;
  for (auto& cov : spec.obstacles[0].covs) cov *= 1e-2;
  spec.upsilon_max = contour_to_overlap(0.99, 3);

  const TrajectorySolution sol = scp_solve(spec);
  REQUIRE(!sol.velocities.empty());
  CHECK(sol.converged);
  double min_dist = 1e9;
  for (int i = 0; i < spec.steps; ++i) {
    min_dist = std::min(min_dist,
                        (sol.positions[i] - spec.obstacles[0].means[i]).norm());
  }
  CHECK(min_dist >= spec.drone_radius + spec.obstacles[0].radius);
}

TEST_CASE("warm start keeps feasibility and the bound") {
  const ProblemSpec spec = head_on_spec();
  const TrajectorySolution cold = scp_solve(spec);
  REQUIRE(cold.converged);

  TrajectorySolution seed;
  seed.velocities.assign(cold.velocities.begin() + 1, cold.velocities.end());
  seed.velocities.push_back(cold.velocities.back());
  const TrajectorySolution warm = scp_solve(spec, &seed);
  CHECK(warm.converged == cold.converged);
  CHECK(warm.upsilons.maxCoeff() <= spec.upsilon_max + 1e-3);
}

TEST_CASE("overlap band pulls the drone toward a leader") {
  // A slower leader just ahead of the drone, with both the ceiling and the
  // floor on the overlap active everywhere: the plan must stay inside the
  // band, which means matching the leader's pace at close range.
  ProblemSpec spec;
  spec.start = Vector3d::Zero();
  spec.goal = Vector3d(9, 0, 0);
  spec.steps = 16;
  spec.tau = 0.5;
  spec.v_min = Vector3d::Constant(-2.0);
  spec.v_max = Vector3d::Constant(2.0);
  spec.a_min = Vector3d::Constant(-1.5);
  spec.a_max = Vector3d::Constant(1.5);
  spec.drone_cov_seq.assign(spec.steps, 0.02 * Matrix3d::Identity());
  spec.drone_radius = 0.2;
  ObstacleTrack leader;
  for (int i = 0; i < spec.steps; ++i) {
    leader.means.emplace_back(0.5 + 1.0 * spec.tau * (i + 1), 0.0, 0.0);
    leader.covs.push_back(0.03 * Matrix3d::Identity());
  }
  leader.radius = 0.2;
  spec.obstacles.push_back(leader);
  spec.upsilon_max = contour_to_overlap(0.30, 3);
  spec.upsilon_min = contour_to_overlap(0.60, 3);

  const TrajectorySolution sol = scp_solve(spec);
  REQUIRE(!sol.velocities.empty());
  CHECK(sol.converged);
  CHECK(sol.upsilons.maxCoeff() <= spec.upsilon_max + 1e-3);
  CHECK(sol.upsilons.minCoeff() >= *spec.upsilon_min - 1e-3);
}

TEST_CASE("spec validation rejects malformed problems") {
  ProblemSpec spec;
  spec.steps = 2;
  CHECK_THROWS_AS(scp_solve(spec), std::invalid_argument);
  spec.steps = 5;
  spec.drone_cov_seq.assign(4, Matrix3d::Identity());
  CHECK_THROWS_AS(scp_solve(spec), std::invalid_argument);
}
