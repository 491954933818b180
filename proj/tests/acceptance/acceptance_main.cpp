// End-to-end acceptance suite: one numbered check per release criterion,
// each printed as a pass/fail line with its measured values. Scenario
// files are taken from the source tree (GOP_SCENARIO_DIR).

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gop/constraint.hpp"
#include "gop/gaussian.hpp"
#include "gop/overlap.hpp"
#include "gop/scenario.hpp"
#include "gop/scp.hpp"
#include "gop/sim.hpp"
#include "gop/stats.hpp"
#include "gop/trace.hpp"
#include "test_oracles.hpp"

#ifndef GOP_SCENARIO_DIR
#define GOP_SCENARIO_DIR "scenarios"
#endif

namespace {

using namespace gop;
using Eigen::Matrix2d;
using Eigen::Matrix3d;
using Eigen::Vector2d;
using Eigen::Vector3d;

int failures = 0;

void report(int number, const std::string& name, bool pass, const std::string& detail,
            double seconds) {
  std::printf("[%s] %2d %-38s %s (%.1fs)\n", pass ? "PASS" : "FAIL", number,
              name.c_str(), detail.c_str(), seconds);
  std::fflush(stdout);
  if (!pass) ++failures;
}

void run_criterion(int number, const std::string& name,
                   const std::function<bool(std::string*)>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  bool pass = false;
  try {
    pass = body(&detail);
  } catch (const std::exception& err) {
    detail = std::string("exception: ") + err.what();
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(number, name, pass, detail, seconds);
}

std::string scenario_path(const char* file) {
  return std::string(GOP_SCENARIO_DIR) + "/" + file;
}

Matrix2d cov_a1() { return Vector2d(0.04, 0.02).asDiagonal(); }
Matrix2d cov_a2() {
  Matrix2d s;
  s << 0.02, 0.01, 0.01, 0.02;
  return s;
}
Matrix2d cov_b1() { return Vector2d(0.01, 0.02).asDiagonal(); }
Matrix2d cov_b2() { return Vector2d(0.03, 0.03).asDiagonal(); }

// Head-on crossing: drone 0 -> 10 m in 20 one-second steps while the
// obstacle traverses the same segment in reverse.
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

bool criterion_contour_anchors(std::string* detail) {
  const double two_d = contour_to_overlap(0.8051, 2);
  const double three_d = contour_to_overlap(0.60, 3);
  std::ostringstream out;
  out << "overlap(0.8051,2d)=" << two_d << " overlap(0.60,3d)=" << three_d;
  *detail = out.str();
  return std::abs(two_d - 0.0706) <= 5e-4 && std::abs(three_d - 0.0861) <= 5e-4;
}

struct TouchingPairs {
  Separator a;
  Separator b;
  Gaussian a1, a2, b1, b2;
};

TouchingPairs build_touching_pairs() {
  const auto ta = testing::touching_means(cov_a1(), cov_a2(), 0.8051, Vector2d(0, 1));
  const auto tb = testing::touching_means(cov_b1(), cov_b2(), 0.8051, Vector2d(1, 0));
  TouchingPairs out{Separator{},
                    Separator{},
                    Gaussian(ta.mu1, cov_a1()),
                    Gaussian(ta.mu2, cov_a2()),
                    Gaussian(tb.mu1, cov_b1()),
                    Gaussian(tb.mu2, cov_b2())};
  out.a = solve_lambda(out.a1, out.a2);
  out.b = solve_lambda(out.b1, out.b2);
  return out;
}

bool criterion_equal_overlap(std::string* detail) {
  const TouchingPairs pairs = build_touching_pairs();
  std::ostringstream out;
  out << "overlap_a=" << pairs.a.overlap << " overlap_b=" << pairs.b.overlap;
  *detail = out.str();
  return std::abs(pairs.a.overlap - 0.0706) <= 1e-3 &&
         std::abs(pairs.b.overlap - 0.0706) <= 1e-3 &&
         std::abs(pairs.a.overlap - pairs.b.overlap) <= 1e-4;
}

bool criterion_bhattacharyya_gap(std::string* detail) {
  const TouchingPairs pairs = build_touching_pairs();
  const double bc_a = bhattacharyya(pairs.a1, pairs.a2);
  const double bc_b = bhattacharyya(pairs.b1, pairs.b2);
  std::ostringstream out;
  out << "bc_a=" << bc_a << " bc_b=" << bc_b << " |gap|=" << std::abs(bc_a - bc_b);
  *detail = out.str();
  return std::abs(pairs.a.overlap - pairs.b.overlap) <= 1e-6 &&
         std::abs(bc_a - bc_b) >= 0.05;
}

bool criterion_sampling_agreement(std::string* detail) {
  std::mt19937_64 rng(4242u);
  const int n = 100000;
  int tested = 0;
  double worst_eta_gap = 0.0;
  double worst_excess = -1e9;
  while (tested < 100) {
    const int dim = (tested % 2 == 0) ? 2 : 3;
    const Gaussian g1 = testing::random_gaussian(rng, dim);
    const Gaussian g2 = testing::random_gaussian(rng, dim);
    if ((g1.mean() - g2.mean()).norm() < 1e-6) continue;
    const Separator sep = solve_lambda(g1, g2);
    worst_eta_gap = std::max(worst_eta_gap, std::abs(sep.eta1 - sep.eta2));
    const double p = normal_sf(sep.eta1);
    const double three_se = 3.0 * std::sqrt(std::max(p * (1.0 - p), 1e-12) / n);
    const auto est = monte_carlo_misclassification(
        g1, g2, sep, n, std::mt19937_64(9000u + static_cast<unsigned>(tested)));
    const double excess = std::max(std::abs(est.p1_hat - p), std::abs(est.p2_hat - p)) -
                          three_se;
    worst_excess = std::max(worst_excess, excess);
    ++tested;
  }
  std::ostringstream out;
  out << "pairs=" << tested << " max|eta1-eta2|=" << worst_eta_gap
      << " worst sampling excess=" << worst_excess;
  *detail = out.str();
  return worst_eta_gap <= 1e-8 && worst_excess <= 0.0;
}

bool criterion_gradient_audit(std::string* detail) {
  std::mt19937_64 rng(1717u);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_real_distribution<double> vel(-1.5, 1.5);
  std::normal_distribution<double> n01;
  const double h = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = (trial % 2 == 0) ? 3 : 2;
    const double tau = 0.2 + 0.8 * u01(rng);
    const int step = 1 + static_cast<int>(u01(rng) * 6);
    const Vector3d start(vel(rng), vel(rng), dim == 3 ? vel(rng) : 0.0);
    std::vector<Vector3d> velocities;
    for (int k = 0; k < step + 1; ++k) {
      velocities.emplace_back(vel(rng), vel(rng), dim == 3 ? vel(rng) : 0.0);
    }
    const Eigen::MatrixXd drone_cov = 0.05 * testing::random_gaussian(rng, dim).cov();
    const Eigen::MatrixXd obs_cov = 0.05 * testing::random_gaussian(rng, dim).cov();
    Vector3d pos = start;
    for (int k = 0; k < step; ++k) pos += tau * velocities[k];
    Vector3d dir(n01(rng), n01(rng), dim == 3 ? n01(rng) : 0.0);
    dir.normalize();
    const Vector3d obstacle = pos + (0.3 + 2.7 * u01(rng)) * dir;
    const double lambda = 0.1 + 0.8 * u01(rng);

    const auto eval = constraint_gradients(start, velocities, tau, step, drone_cov,
                                           obstacle, obs_cov, lambda, dim);
    const auto exact = [&](const std::vector<Vector3d>& vs, double lam, bool first) {
      Vector3d p = start;
      for (int k = 0; k < step; ++k) p += tau * vs[k];
      const auto values = constraint_pair(p.head(dim), drone_cov,
                                          obstacle.head(dim), obs_cov, lam);
      return first ? values.f1 : values.f2;
    };
    const auto rel = [](double a, double fd) {
      return std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
    };
    for (int k = 0; k < step; ++k) {
      for (int c = 0; c < 3; ++c) {
        auto bumped = velocities;
        bumped[k](c) += h;
        const double f1p = exact(bumped, lambda, true);
        const double f2p = exact(bumped, lambda, false);
        bumped[k](c) -= 2 * h;
        const double f1m = exact(bumped, lambda, true);
        const double f2m = exact(bumped, lambda, false);
        worst = std::max(worst, rel(eval.grad_upsilon_v(3 * k + c), (f1p - f1m) / (2 * h)));
        worst = std::max(worst, rel(eval.grad_residual_v(3 * k + c), (f2p - f2m) / (2 * h)));
      }
    }
    worst = std::max(worst, rel(eval.grad_upsilon_lambda,
                                (exact(velocities, lambda + h, true) -
                                 exact(velocities, lambda - h, true)) /
                                    (2 * h)));
    worst = std::max(worst, rel(eval.grad_residual_lambda,
                                (exact(velocities, lambda + h, false) -
                                 exact(velocities, lambda - h, false)) /
                                    (2 * h)));
  }
  std::ostringstream out;
  out << "max relative error=" << worst;
  *detail = out.str();
  return worst <= 1e-4;
}

bool criterion_head_on(std::string* detail) {
  const ProblemSpec spec = head_on_spec();
  const TrajectorySolution sol = scp_solve(spec);
  const double max_upsilon = sol.upsilons.maxCoeff();
  std::ostringstream out;
  out << "converged=" << sol.converged << " max_overlap=" << max_upsilon
      << " terminal=" << sol.cost_terminal;
  *detail = out.str();
  return sol.converged && max_upsilon <= 0.0861 + 1e-3 && sol.cost_terminal <= 0.25;
}

bool criterion_antipodal(std::string* detail) {
  const Scenario scenario = load_scenario_file(scenario_path("antipodal.json"));
  const SimTrace trace = run_scenario(scenario, 0);
  double min_ct = 1.0;
  for (const auto& [id, value] : trace.summary.min_contour) {
    min_ct = std::min(min_ct, value);
  }
  std::ostringstream out;
  out << "completed=" << trace.summary.completed << " steps=" << trace.summary.steps
      << " min contour=" << min_ct;
  *detail = out.str();
  return trace.summary.completed && min_ct >= 0.89;
}

bool criterion_corridor(std::string* detail) {
  const Scenario scenario = load_scenario_file(scenario_path("corridor.json"));
  const SimTrace trace = run_scenario(scenario, 0);

  // Interaction window: strictly inside the corridor, past the entry
  // stretch the controller needs to acquire the follow band.
  const Region box = scenario.corridor->box;
  const double x_enter = box.min_corner.x() + 3.0;
  const double x_exit = box.max_corner.x() - 0.5;
  double band_lo = 1.0;
  double band_hi = 0.0;
  int window_steps = 0;
  for (const SimRecord& rec : trace.records) {
    if (rec.pos.x() < x_enter || rec.pos.x() > x_exit) continue;
    for (const ObstacleRecord& obs : rec.obstacles) {
      if (!obs.active) continue;
      band_lo = std::min(band_lo, obs.contour);
      band_hi = std::max(band_hi, obs.contour);
      ++window_steps;
    }
  }
  const double clearance = trace.summary.min_wall_clearance.value_or(0.0);
  const double contact =
      scenario.corridor->wall_thickness + scenario.drone_radius;
  std::ostringstream out;
  out << "completed=" << trace.summary.completed << " window=" << window_steps
      << " contour range=[" << band_lo << "," << band_hi << "]"
      << " wall clearance=" << clearance;
  *detail = out.str();
  return trace.summary.completed && window_steps > 10 && band_lo >= 0.29 &&
         band_hi <= 0.61 && clearance >= contact;
}

bool criterion_tight_covariance(std::string* detail) {
  ProblemSpec spec = head_on_spec();
  for (auto& cov : spec.drone_cov_seq) cov *= 1e-2;
  for (auto& cov : spec.obstacles[0].covs) cov *= 1e-2;
  spec.upsilon_max = contour_to_overlap(0.99, 3);
  const TrajectorySolution sol = scp_solve(spec);
  double min_dist = 1e9;
  for (int i = 0; i < spec.steps; ++i) {
    min_dist =
        std::min(min_dist, (sol.positions[i] - spec.obstacles[0].means[i]).norm());
  }
  const double combined = spec.drone_radius + spec.obstacles[0].radius;
  std::ostringstream out;
  out << "converged=" << sol.converged << " min distance=" << min_dist
      << " combined radius=" << combined;
  *detail = out.str();
  return sol.converged && min_dist >= combined;
}

bool criterion_determinism(std::string* detail) {
  const Scenario scenario = load_scenario_file(scenario_path("minimal.json"));
  const SimTrace first = run_scenario(scenario, 7);
  const SimTrace second = run_scenario(scenario, 7);
  std::ostringstream a, b, sa, sb;
  write_trace(first, a);
  write_trace(second, b);
  write_summary(first, sa);
  write_summary(second, sb);
  std::ostringstream out;
  out << "steps=" << first.records.size() << " bytes=" << a.str().size();
  *detail = out.str();
  return !first.records.empty() && a.str() == b.str() && sa.str() == sb.str();
}

}  // namespace

int main() {
  run_criterion(1, "contour-overlap anchors", criterion_contour_anchors);
  run_criterion(2, "equal overlap for touching pairs", criterion_equal_overlap);
  run_criterion(3, "bhattacharyya does not fix overlap", criterion_bhattacharyya_gap);
  run_criterion(4, "misclassification sampling agreement", criterion_sampling_agreement);
  run_criterion(5, "constraint gradient audit", criterion_gradient_audit);
  run_criterion(6, "head-on crossing bound", criterion_head_on);
  run_criterion(7, "antipodal receding-horizon run", criterion_antipodal);
  run_criterion(8, "corridor band and wall clearance", criterion_corridor);
  run_criterion(9, "tight-covariance keep-out", criterion_tight_covariance);
  run_criterion(10, "byte-identical reruns", criterion_determinism);

  if (failures == 0) {
    std::printf("all acceptance criteria passed\n");
  } else {
    std::printf("%d acceptance criteria FAILED\n", failures);
  }
  return failures == 0 ? 0 : 1;
}
