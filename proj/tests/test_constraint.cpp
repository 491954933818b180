#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "gop/constraint.hpp"
#include "gop/overlap.hpp"
#include "test_oracles.hpp"

using namespace gop;
using Eigen::Matrix2d;
using Eigen::Matrix3d;
using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::Vector3d;
using Eigen::VectorXd;

namespace {

struct RandomConfig {
  Vector3d start;
  std::vector<Vector3d> velocities;
  double tau;
  int step;
  MatrixXd drone_cov;
  Vector3d obstacle_mean;
  MatrixXd obstacle_cov;
  double lambda;
  int dim;
};

// General-position configurations: separation between 0.3 and 3 meters so
// the overlap and its derivatives stay well scaled.
RandomConfig random_config(std::mt19937_64& rng, int dim) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_real_distribution<double> vel(-1.5, 1.5);
  std::normal_distribution<double> n01;

  RandomConfig cfg;
  cfg.dim = dim;
  cfg.tau = 0.2 + 0.8 * u01(rng);
  cfg.step = 1 + static_cast<int>(u01(rng) * 6);
  cfg.start = Vector3d(vel(rng), vel(rng), dim == 3 ? vel(rng) : 0.0);
  for (int k = 0; k < cfg.step + 2; ++k) {
    cfg.velocities.emplace_back(vel(rng), vel(rng), dim == 3 ? vel(rng) : 0.0);
  }
  const Gaussian gd = testing::random_gaussian(rng, dim);
  const Gaussian go = testing::random_gaussian(rng, dim);
  cfg.drone_cov = 0.05 * gd.cov();
  cfg.obstacle_cov = 0.05 * go.cov();

  Vector3d pos = cfg.start;
  for (int k = 0; k < cfg.step; ++k) pos += cfg.tau * cfg.velocities[k];
  Vector3d dir(n01(rng), n01(rng), dim == 3 ? n01(rng) : 0.0);
  dir.normalize();
  const double dist = 0.3 + 2.7 * u01(rng);
  cfg.obstacle_mean = pos + dist * dir;
  cfg.lambda = 0.1 + 0.8 * u01(rng);
  return cfg;
}

double exact_f(const RandomConfig& cfg, const std::vector<Vector3d>& velocities,
               double lambda, bool first) {
  Vector3d pos = cfg.start;
  for (int k = 0; k < cfg.step; ++k) pos += cfg.tau * velocities[k];
  const auto values = constraint_pair(pos.head(cfg.dim), cfg.drone_cov,
                                      cfg.obstacle_mean.head(cfg.dim),
                                      cfg.obstacle_cov, lambda);
  return first ? values.f1 : values.f2;
}

}  // namespace

TEST_CASE("inflate adds the squared radius share on the diagonal") {
  const Matrix3d cov = 0.02 * Matrix3d::Identity();
  const MatrixXd out = inflate(cov, 0.5, 3.0);
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(out(i, i) - (0.02 + 0.25 / 9.0)) <= 1e-15);
  }
  CHECK((inflate(cov, 0.0, 3.0) - cov).norm() == 0.0);
}

TEST_CASE("inflate commutes with rotation") {
  Matrix2d cov;
  cov << 0.04, 0.01, 0.01, 0.02;
  const double angle = 0.7;
  Matrix2d rot;
  rot << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  const MatrixXd lhs = inflate(rot * cov * rot.transpose(), 0.4, 2.5);
  const MatrixXd rhs = rot * inflate(cov, 0.4, 2.5) * rot.transpose();
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("make_inflated_pair tracks both radii") {
  const Matrix3d base = 0.01 * Matrix3d::Identity();
  const auto pair = make_inflated_pair(base, 0.3, base, 0.6, 3.0);
  CHECK(std::abs(pair.drone_cov(0, 0) - (0.01 + 0.01)) <= 1e-15);
  CHECK(std::abs(pair.obstacle_cov(0, 0) - (0.01 + 0.04)) <= 1e-15);
}

TEST_CASE("constraint_pair agrees with the overlap solver at the fixed point") {
  std::mt19937_64 rng(31u);
  for (int i = 0; i < 200; ++i) {
    const int dim = (i % 2 == 0) ? 2 : 3;
    const Gaussian g1 = testing::random_gaussian(rng, dim);
    const Gaussian g2 = testing::random_gaussian(rng, dim);
    if ((g1.mean() - g2.mean()).norm() < 1e-6) continue;
    const Separator sep = solve_lambda(g1, g2);
    const auto values =
        constraint_pair(g1.mean(), g1.cov(), g2.mean(), g2.cov(), sep.lambda);
    CHECK(std::abs(values.f2) <= 1e-8 * (1.0 + std::abs(values.f2)));
    CHECK(std::abs(values.f1 - sep.overlap) <= 1e-9);
  }
}

TEST_CASE("constraint_pair closed form and sentinel") {
  const Matrix2d eye = Matrix2d::Identity();
  const auto mid = constraint_pair(Vector2d(0, 0), eye, Vector2d(2, 0), eye, 0.5);
  CHECK(std::abs(mid.f1 - 0.317311) <= 1e-6);
  CHECK(std::abs(mid.f2) <= 1e-14);

  // Equal covariances make the residual vanish for any positions.
  const auto shifted = constraint_pair(Vector2d(0.3, -1), eye, Vector2d(2, 5), eye, 0.5);
  CHECK(std::abs(shifted.f2) <= 1e-12);

  const auto coincident =
      constraint_pair(Vector2d(1, 1), eye, Vector2d(1, 1), eye, 0.4);
  CHECK(coincident.degenerate);
  CHECK(coincident.f1 == 1.0);
  CHECK(coincident.f2 == 0.0);
}

TEST_CASE("analytic gradients match central differences") {
  std::mt19937_64 rng(417u);
  const double h = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = (trial % 2 == 0) ? 3 : 2;
    const RandomConfig cfg = random_config(rng, dim);
    const auto eval = constraint_gradients(cfg.start, cfg.velocities, cfg.tau,
                                           cfg.step, cfg.drone_cov, cfg.obstacle_mean,
                                           cfg.obstacle_cov, cfg.lambda, cfg.dim);
    REQUIRE(eval.finite);
    REQUIRE(!eval.degenerate);

    const auto rel = [&](double analytic, double fd) {
      const double denom = std::max({std::abs(fd), std::abs(analytic), 1e-6});
      return std::abs(analytic - fd) / denom;
    };

    for (int k = 0; k < cfg.step; ++k) {
      for (int c = 0; c < 3; ++c) {
        auto bumped = cfg.velocities;
        bumped[k](c) += h;
        const double f1p = exact_f(cfg, bumped, cfg.lambda, true);
        const double f2p = exact_f(cfg, bumped, cfg.lambda, false);
        bumped[k](c) -= 2.0 * h;
        const double f1m = exact_f(cfg, bumped, cfg.lambda, true);
        const double f2m = exact_f(cfg, bumped, cfg.lambda, false);
        worst = std::max(worst, rel(eval.grad_upsilon_v(3 * k + c), (f1p - f1m) / (2 * h)));
        worst = std::max(worst, rel(eval.grad_residual_v(3 * k + c), (f2p - f2m) / (2 * h)));
      }
    }
    const double f1p = exact_f(cfg, cfg.velocities, cfg.lambda + h, true);
    const double f1m = exact_f(cfg, cfg.velocities, cfg.lambda - h, true);
    const double f2p = exact_f(cfg, cfg.velocities, cfg.lambda + h, false);
    const double f2m = exact_f(cfg, cfg.velocities, cfg.lambda - h, false);
    worst = std::max(worst, rel(eval.grad_upsilon_lambda, (f1p - f1m) / (2 * h)));
    worst = std::max(worst, rel(eval.grad_residual_lambda, (f2p - f2m) / (2 * h)));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("velocities beyond the constrained step do not contribute") {
  std::mt19937_64 rng(55u);
  const RandomConfig cfg = random_config(rng, 3);
  const auto eval = constraint_gradients(cfg.start, cfg.velocities, cfg.tau,
                                         cfg.step, cfg.drone_cov, cfg.obstacle_mean,
                                         cfg.obstacle_cov, cfg.lambda, cfg.dim);
  CHECK(eval.grad_upsilon_v.size() == 3 * cfg.step);
  CHECK(eval.grad_residual_v.size() == 3 * cfg.step);

  // Later velocities leave the values untouched.
  auto bumped = cfg.velocities;
  bumped[cfg.step](0) += 0.37;
  const auto eval2 = constraint_gradients(cfg.start, bumped, cfg.tau, cfg.step,
                                          cfg.drone_cov, cfg.obstacle_mean,
                                          cfg.obstacle_cov, cfg.lambda, cfg.dim);
  CHECK(eval2.upsilon == eval.upsilon);
  CHECK(eval2.residual == eval.residual);
}

TEST_CASE("overlap is stationary in lambda at the admissible point") {
  // Symmetric configuration: the minmax lambda is 0.5 and f1 attains its
  // minimum over lambda there, so the lambda gradient must vanish.
  const Matrix3d eye = 0.04 * Matrix3d::Identity();
  const Vector3d start(0, 0, 0);
  const std::vector<Vector3d> vels = {Vector3d(1.0, 0, 0)};
  const Vector3d obstacle(2.0, 0.5, 0.0);
  const auto eval =
      constraint_gradients(start, vels, 1.0, 1, eye, obstacle, eye, 0.5, 3);
  CHECK(std::abs(eval.grad_upsilon_lambda) <= 1e-10);
  CHECK(std::abs(eval.residual) <= 1e-12);
}

TEST_CASE("linearization reproduces the value at the reference point") {
  std::mt19937_64 rng(88u);
  const RandomConfig cfg = random_config(rng, 3);
  const auto eval = constraint_gradients(cfg.start, cfg.velocities, cfg.tau,
                                         cfg.step, cfg.drone_cov, cfg.obstacle_mean,
                                         cfg.obstacle_cov, cfg.lambda, cfg.dim);
  CHECK(eval.upsilon == exact_f(cfg, cfg.velocities, cfg.lambda, true));
  CHECK(eval.residual == exact_f(cfg, cfg.velocities, cfg.lambda, false));
}

TEST_CASE("joint translation leaves values and gradients unchanged") {
  std::mt19937_64 rng(91u);
  for (int trial = 0; trial < 50; ++trial) {
    RandomConfig cfg = random_config(rng, 3);
    const auto base = constraint_gradients(cfg.start, cfg.velocities, cfg.tau,
                                           cfg.step, cfg.drone_cov, cfg.obstacle_mean,
                                           cfg.obstacle_cov, cfg.lambda, cfg.dim);
    const Vector3d shift(1.7, -4.2, 0.9);
    cfg.start += shift;
    cfg.obstacle_mean += shift;
    const auto moved = constraint_gradients(cfg.start, cfg.velocities, cfg.tau,
                                            cfg.step, cfg.drone_cov, cfg.obstacle_mean,
                                            cfg.obstacle_cov, cfg.lambda, cfg.dim);
    CHECK(std::abs(base.upsilon - moved.upsilon) <= 1e-12);
    CHECK(std::abs(base.residual - moved.residual) <= 1e-11);
    CHECK(std::abs(base.grad_upsilon_lambda - moved.grad_upsilon_lambda) <= 1e-11);
    CHECK((base.grad_upsilon_v - moved.grad_upsilon_v).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("overlap falls along the separation direction") {
  std::mt19937_64 rng(117u);
  for (int trial = 0; trial < 50; ++trial) {
    const RandomConfig cfg = random_config(rng, 3);
    const auto eval = constraint_gradients(cfg.start, cfg.velocities, cfg.tau,
                                           cfg.step, cfg.drone_cov, cfg.obstacle_mean,
                                           cfg.obstacle_cov, cfg.lambda, cfg.dim);
    Vector3d pos = cfg.start;
    for (int k = 0; k < cfg.step; ++k) pos += cfg.tau * cfg.velocities[k];
    const Vector3d away = (pos - cfg.obstacle_mean).normalized();
    CHECK(eval.grad_upsilon_pos.dot(away) <= 1e-12);
  }
}
