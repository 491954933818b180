#include "gop/scp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "gop/constraint.hpp"
#include "gop/gaussian.hpp"
#include "gop/overlap.hpp"
#include "gop/stats.hpp"

namespace gop {

namespace {

using Eigen::Matrix3d;
using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;
using Triplet = Eigen::Triplet<double>;

struct ActivePair {
  int obstacle = 0;
  int step = 0;  // 0-based
  bool lower_bounded = false;
  PairLinearization lin;
  int lambda_var = -1;
  int s1_var = -1;
  int s2_var = -1;
  int s3_var = -1;
  // Row bookkeeping for warm starting the next iteration's solver.
  int lambda_box_row = -1;
  int s1_box_row = -1;
  int s2_box_row = -1;
  int s3_box_row = -1;
  int f1_row = -1;
  int f2a_row = -1;
  int f2b_row = -1;
  int band_row = -1;
};

// Primal/dual iterates of the previous iteration's QP, keyed by pair so
// the next, structurally similar QP can start from them.
struct QpMemory {
  bool valid = false;
  Eigen::VectorXd z, y;
  int fixed_rows = 0;
  std::vector<ActivePair> pairs;
};

// Per-solve precomputation: inflated covariances and activation radii.
struct Workspace {
  std::vector<MatrixXd> drone_cov;               // [N] dim x dim
  std::vector<std::vector<MatrixXd>> obs_cov;    // [P][N]
  MatrixXd activation;                           // P x N (meters)
  std::vector<std::vector<bool>> band;           // [P][N] lower-bound applies
};

double max_eigenvalue(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

void validate_spec(const ProblemSpec& spec) {
  if (spec.steps < 3) throw std::invalid_argument("scp: need at least 3 steps");
  if (!(spec.tau > 0.0)) throw std::invalid_argument("scp: tau must be positive");
  if (spec.dim != 2 && spec.dim != 3) throw std::invalid_argument("scp: dim must be 2 or 3");
  for (int c = 0; c < 3; ++c) {
    if (spec.v_min(c) > spec.v_max(c) || spec.a_min(c) > spec.a_max(c)) {
      throw std::invalid_argument("scp: empty velocity or acceleration box");
    }
  }
  if (static_cast<int>(spec.drone_cov_seq.size()) != spec.steps) {
    throw std::invalid_argument("scp: drone covariance sequence length mismatch");
  }
  for (const auto& obs : spec.obstacles) {
    if (static_cast<int>(obs.means.size()) != spec.steps ||
        static_cast<int>(obs.covs.size()) != spec.steps) {
      throw std::invalid_argument("scp: obstacle track length mismatch");
    }
  }
  if (spec.upsilon_min &&
      !(0.0 < *spec.upsilon_min && *spec.upsilon_min < spec.upsilon_max)) {
    throw std::invalid_argument("scp: overlap band is empty");
  }
}

Workspace build_workspace(const ProblemSpec& spec, const ScpSettings& settings,
                          const std::vector<Vector3d>& initial_positions) {
  const int n = spec.steps;
  const int p = static_cast<int>(spec.obstacles.size());
  const double r99 = std::sqrt(chi_square_quantile(0.99, spec.dim));

  Workspace ws;
  ws.drone_cov.resize(n);
  std::vector<double> drone_extent(n);
  for (int i = 0; i < n; ++i) {
    ws.drone_cov[i] = inflate(spec.drone_cov_seq[i].topLeftCorner(spec.dim, spec.dim),
                              spec.drone_radius, spec.kappa);
    drone_extent[i] = r99 * std::sqrt(max_eigenvalue(ws.drone_cov[i]));
  }
  ws.obs_cov.resize(p);
  ws.activation = MatrixXd::Zero(p, n);
  ws.band.assign(p, std::vector<bool>(n, false));
  for (int j = 0; j < p; ++j) {
    ws.obs_cov[j].resize(n);
    const bool band_candidate = spec.upsilon_min.has_value() &&
                                !spec.obstacles[j].upper_bound_exempt;
    for (int i = 0; i < n; ++i) {
      ws.obs_cov[j][i] =
          inflate(spec.obstacles[j].covs[i].topLeftCorner(spec.dim, spec.dim),
                  spec.obstacles[j].radius, spec.kappa);
      const double obs_extent = r99 * std::sqrt(max_eigenvalue(ws.obs_cov[j][i]));
      ws.activation(j, i) = settings.activation_factor * (drone_extent[i] + obs_extent);
      if (band_candidate) {
        ws.band[j][i] = !spec.upper_bound_region ||
                        spec.upper_bound_region->contains(initial_positions[i]);
      }
    }
  }
  return ws;
}

Vector3d clamp_box(const Vector3d& v, const Vector3d& lo, const Vector3d& hi) {
  return v.cwiseMax(lo).cwiseMin(hi);
}

// Constant cruise profile toward the goal, ramped from the current
// velocity so the acceleration bounds hold from the first step. A tiny
// lateral component breaks exact route symmetry: head-on geometries
// otherwise have identically zero sideways overlap gradients and the
// optimizer cannot discover the dodge direction.
std::vector<Vector3d> initial_profile(const ProblemSpec& spec) {
  const Vector3d cruise = clamp_box((spec.goal - spec.start) / (spec.steps * spec.tau),
                                    spec.v_min, spec.v_max);
  Vector3d axis = spec.goal - spec.start;
  if (axis.norm() < 1e-9) axis = Vector3d::UnitX();
  axis.normalize();
  Vector3d lateral = axis.cross(Vector3d::UnitZ());
  if (lateral.norm() < 1e-6) lateral = axis.cross(Vector3d::UnitY());
  lateral.normalize();
  if (spec.dim == 2) lateral.z() = 0.0;
  Vector3d nudged = cruise + 1e-3 * lateral;
  if ((clamp_box(nudged, spec.v_min, spec.v_max) - cruise).norm() < 1e-9) {
    nudged = cruise - 1e-3 * lateral;
  }
  const Vector3d target = clamp_box(nudged, spec.v_min, spec.v_max);

  std::vector<Vector3d> vel(spec.steps, target);
  if (spec.initial_velocity) {
    Vector3d current = *spec.initial_velocity;
    for (int i = 0; i < spec.steps; ++i) {
      const Vector3d lo = current + spec.tau * spec.a_min;
      const Vector3d hi = current + spec.tau * spec.a_max;
      vel[i] = clamp_box(clamp_box(target, lo, hi), spec.v_min, spec.v_max);
      current = vel[i];
    }
  }
  return vel;
}

double exact_pair_overlap(const ProblemSpec& spec, const Workspace& ws,
                          const Vector3d& pos, int j, int i, double* lambda_out) {
  const VectorXd mean1 = pos.head(spec.dim);
  const VectorXd mean2 = spec.obstacles[j].means[i].head(spec.dim);
  if ((mean1 - mean2).cwiseAbs().maxCoeff() <= 1e-12) {
    if (lambda_out) *lambda_out = 0.5;
    return 1.0;
  }
  const Separator sep = solve_lambda(Gaussian(mean1, ws.drone_cov[i]),
                                     Gaussian(mean2, ws.obs_cov[j][i]));
  if (lambda_out) *lambda_out = sep.lambda;
  return sep.overlap;
}

struct MeritBreakdown {
  double terminal_raw = 0.0;
  double smooth_raw = 0.0;
  double cost = 0.0;
  double merit = 0.0;
  double max_violation = 0.0;
};

// Exact (non-linearized) merit: weighted cost plus penalty-weighted
// constraint violations. Pairs in the active set are measured at their
// current overlap parameter; all other pairs at the admissible one.
MeritBreakdown evaluate_merit(const ProblemSpec& spec, const ScpSettings& settings,
                              const Workspace& ws,
                              const std::vector<Vector3d>& velocities,
                              const MatrixXd& lambdas,
                              const std::vector<std::vector<bool>>& in_active_set,
                              const std::vector<std::vector<bool>>& band_on,
                              const std::vector<Vector3d>& pace) {
  MeritBreakdown out;
  const std::vector<Vector3d> positions = rollout(spec.start, velocities, spec.tau);
  out.terminal_raw = terminal_cost(positions.back(), spec.drone_cov_seq.back(),
                                   spec.goal, spec.dim);
  out.smooth_raw = smoothness_cost(velocities, spec.tau);
  out.cost = spec.terminal_weight * out.terminal_raw + spec.smooth_weight * out.smooth_raw;

  // The pace regularizer is part of the subproblem objective, so the
  // acceptance test must see it too; otherwise its tie-breaking pull and
  // the merit would disagree inside cost-flat regions and stall the loop.
  double pace_term = 0.0;
  for (size_t i = 0; i < velocities.size(); ++i) {
    pace_term += settings.prox_velocity * (velocities[i] - pace[i]).squaredNorm();
  }

  double violation_sum = 0.0;
  for (int j = 0; j < static_cast<int>(spec.obstacles.size()); ++j) {
    for (int i = 0; i < spec.steps; ++i) {
      double f1;
      double f2_scaled = 0.0;
      if (in_active_set[j][i]) {
        const auto values =
            constraint_pair(positions[i].head(spec.dim), ws.drone_cov[i],
                            spec.obstacles[j].means[i].head(spec.dim),
                            ws.obs_cov[j][i], lambdas(j, i));
        f1 = values.f1;
        f2_scaled = values.f2 / values.scale;
      } else {
        f1 = exact_pair_overlap(spec, ws, positions[i], j, i, nullptr);
      }
      double v = std::max(0.0, f1 - spec.upsilon_max) + std::abs(f2_scaled);
      if (band_on[j][i]) v += std::max(0.0, *spec.upsilon_min - f1);
      violation_sum += v;
      out.max_violation = std::max(out.max_violation, v);
    }
  }
  out.merit = out.cost + pace_term + settings.slack_penalty * violation_sum;
  return out;
}

}  // namespace

std::vector<Vector3d> rollout(const Vector3d& start,
                              const std::vector<Vector3d>& velocities, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("rollout: tau must be positive");
  std::vector<Vector3d> positions;
  positions.reserve(velocities.size());
  Vector3d pos = start;
  for (const Vector3d& v : velocities) {
    pos += tau * v;
    positions.push_back(pos);
  }
  return positions;
}

double terminal_cost(const Vector3d& final_pos, const Matrix3d& final_cov,
                     const Vector3d& goal, int dim) {
  const VectorXd diff = (final_pos - goal).head(dim);
  const MatrixXd cov = final_cov.topLeftCorner(dim, dim);
  return diff.dot(cov.ldlt().solve(diff));
}

double smoothness_cost(const std::vector<Vector3d>& velocities, double tau) {
  if (velocities.size() < 3) {
    throw std::invalid_argument("smoothness_cost: need at least 3 velocities");
  }
  const double tau2 = tau * tau;
  double sum = 0.0;
  for (size_t i = 1; i + 1 < velocities.size(); ++i) {
    sum += ((velocities[i + 1] + velocities[i - 1] - 2.0 * velocities[i]) / tau2)
               .squaredNorm();
  }
  return sum;
}

TrajectorySolution scp_solve(const ProblemSpec& spec,
                             const TrajectorySolution* warm_start,
                             const ScpSettings& settings) {
  validate_spec(spec);
  const int n = spec.steps;
  const int num_obstacles = static_cast<int>(spec.obstacles.size());

  // Reference trajectory and overlap parameters.
  std::vector<Vector3d> ref_v;
  if (warm_start && static_cast<int>(warm_start->velocities.size()) == n) {
    ref_v = warm_start->velocities;
    for (auto& v : ref_v) v = clamp_box(v, spec.v_min, spec.v_max);
  } else {
    ref_v = initial_profile(spec);
  }
  MatrixXd ref_lambda = MatrixXd::Constant(num_obstacles, n, 0.5);
  if (warm_start && warm_start->lambdas.rows() == num_obstacles &&
      warm_start->lambdas.cols() == n) {
    ref_lambda = warm_start->lambdas.cwiseMax(settings.lambda_min)
                     .cwiseMin(settings.lambda_max);
  }

  const std::vector<Vector3d> pace = initial_profile(spec);
  const Workspace ws =
      build_workspace(spec, settings, rollout(spec.start, ref_v, spec.tau));

  TrajectorySolution sol;
  sol.message = "not converged";

  std::vector<std::vector<bool>> in_active(num_obstacles,
                                           std::vector<bool>(n, false));
  std::vector<std::vector<bool>> was_active = in_active;
  std::vector<std::vector<bool>> band_on = in_active;

  QpMemory memory;
  double trust = settings.trust_initial;
  MeritBreakdown ref_merit =
      evaluate_merit(spec, settings, ws, ref_v, ref_lambda, in_active, band_on, pace);
  sol.per_iteration_cost.push_back(ref_merit.merit);
  bool converged = false;

  const int vel0 = 0;
  const int pos0 = 3 * n;

  // The stay-close bound only enters once the pair's overlap carries a
  // usable gradient; far away it is exponentially flat and the linearized
  // constraint would be pure penalty noise.
  const double band_engage =
      spec.upsilon_min ? 0.05 * *spec.upsilon_min : 0.0;

  for (int iter = 1; iter <= settings.max_iterations; ++iter) {
    const std::vector<Vector3d> ref_p = rollout(spec.start, ref_v, spec.tau);

    // Active pairs: within the activation radius of the reference.
    std::vector<ActivePair> pairs;
    for (auto& row : in_active) std::fill(row.begin(), row.end(), false);
    for (auto& row : band_on) std::fill(row.begin(), row.end(), false);
    for (int j = 0; j < num_obstacles; ++j) {
      for (int i = 0; i < n; ++i) {
        const double dist =
            (ref_p[i].head(spec.dim) - spec.obstacles[j].means[i].head(spec.dim))
                .norm();
        if (dist >= ws.activation(j, i)) continue;
        double admissible_lambda = 0.5;
        double exact_upsilon = 0.0;
        const bool need_exact = ws.band[j][i] || !was_active[j][i];
        if (need_exact) {
          exact_upsilon =
              exact_pair_overlap(spec, ws, ref_p[i], j, i, &admissible_lambda);
        }
        if (!was_active[j][i]) {
          // Entering pair: seed its overlap parameter at the admissible
          // value so the residual constraint starts satisfied.
          ref_lambda(j, i) = std::clamp(admissible_lambda, settings.lambda_min,
                                        settings.lambda_max);
        }
        ActivePair pair;
        pair.obstacle = j;
        pair.step = i;
        pair.lower_bounded = ws.band[j][i] && exact_upsilon >= band_engage;
        pair.lin = pair_linearization(ref_p[i], ws.drone_cov[i],
                                      spec.obstacles[j].means[i], ws.obs_cov[j][i],
                                      ref_lambda(j, i), spec.dim);
        pairs.push_back(pair);
        in_active[j][i] = true;
        band_on[j][i] = pair.lower_bounded;
      }
    }
    was_active = in_active;
    ref_merit = evaluate_merit(spec, settings, ws, ref_v, ref_lambda, in_active, band_on, pace);

    // Variable layout: velocities, positions, overlap parameters, slacks.
    int next = pos0 + 3 * n;
    for (auto& pair : pairs) pair.lambda_var = next++;
    for (auto& pair : pairs) pair.s1_var = next++;
    for (auto& pair : pairs) pair.s2_var = next++;
    for (auto& pair : pairs) {
      if (pair.lower_bounded) pair.s3_var = next++;
    }
    const int num_vars = next;

    std::vector<Triplet> h_trip;
    VectorXd g = VectorXd::Zero(num_vars);
    std::vector<Triplet> a_trip;
    std::vector<double> lo, hi;
    int row = 0;
    const auto add_row_bound = [&](double l, double u) {
      lo.push_back(l);
      hi.push_back(u);
      ++row;
    };

    // Dynamics equalities: p_0 - tau v_0 = start, p_i - p_{i-1} - tau v_i = 0.
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < 3; ++c) {
        a_trip.emplace_back(row, pos0 + 3 * i + c, 1.0);
        a_trip.emplace_back(row, vel0 + 3 * i + c, -spec.tau);
        if (i > 0) {
          a_trip.emplace_back(row, pos0 + 3 * (i - 1) + c, -1.0);
          add_row_bound(0.0, 0.0);
        } else {
          add_row_bound(spec.start(c), spec.start(c));
        }
      }
    }
    // Acceleration bounds between consecutive planned velocities.
    for (int i = 0; i + 1 < n; ++i) {
      for (int c = 0; c < 3; ++c) {
        a_trip.emplace_back(row, vel0 + 3 * (i + 1) + c, 1.0);
        a_trip.emplace_back(row, vel0 + 3 * i + c, -1.0);
        add_row_bound(spec.tau * spec.a_min(c), spec.tau * spec.a_max(c));
      }
    }
    // Velocity boxes intersected with the trust region (and with the
    // reachable set from the executed velocity for the first step).
    for (int i = 0; i < n; ++i) {
      Vector3d box_lo = spec.v_min.cwiseMax(ref_v[i] - Vector3d::Constant(trust));
      Vector3d box_hi = spec.v_max.cwiseMin(ref_v[i] + Vector3d::Constant(trust));
      if (i == 0 && spec.initial_velocity) {
        box_lo = box_lo.cwiseMax(*spec.initial_velocity + spec.tau * spec.a_min);
        box_hi = box_hi.cwiseMin(*spec.initial_velocity + spec.tau * spec.a_max);
      }
      for (int c = 0; c < 3; ++c) {
        a_trip.emplace_back(row, vel0 + 3 * i + c, 1.0);
        add_row_bound(std::min(box_lo(c), box_hi(c)), std::max(box_lo(c), box_hi(c)));
      }
    }
    const int fixed_rows = row;
    // Overlap parameter and slack boxes.
    for (auto& pair : pairs) {
      pair.lambda_box_row = row;
      a_trip.emplace_back(row, pair.lambda_var, 1.0);
      add_row_bound(settings.lambda_min, settings.lambda_max);
    }
    for (auto& pair : pairs) {
      pair.s1_box_row = row;
      a_trip.emplace_back(row, pair.s1_var, 1.0);
      add_row_bound(0.0, kInf);
      pair.s2_box_row = row;
      a_trip.emplace_back(row, pair.s2_var, 1.0);
      add_row_bound(0.0, kInf);
      if (pair.s3_var >= 0) {
        pair.s3_box_row = row;
        a_trip.emplace_back(row, pair.s3_var, 1.0);
        add_row_bound(0.0, kInf);
      }
    }
    // Linearized overlap constraints with slack.
    for (auto& pair : pairs) {
      const int pbase = pos0 + 3 * pair.step;
      const Vector3d& pref = ref_p[pair.step];
      const double lref = ref_lambda(pair.obstacle, pair.step);
      const double c1 = pair.lin.f1 - pair.lin.grad_f1_pos.dot(pref) -
                        pair.lin.grad_f1_lambda * lref;

      // f1_lin <= upsilon_max + s1
      pair.f1_row = row;
      for (int c = 0; c < spec.dim; ++c) {
        a_trip.emplace_back(row, pbase + c, pair.lin.grad_f1_pos(c));
      }
      a_trip.emplace_back(row, pair.lambda_var, pair.lin.grad_f1_lambda);
      a_trip.emplace_back(row, pair.s1_var, -1.0);
      add_row_bound(-kInf, spec.upsilon_max - c1);

      // |f2_lin| <= s2, in units of the residual scale alpha^T(S1+S2)alpha
      // so the slack penalty means the same thing for near and far pairs.
      const double inv_scale = 1.0 / pair.lin.scale;
      const Vector3d g2 = inv_scale * pair.lin.grad_f2_pos;
      const double g2l = inv_scale * pair.lin.grad_f2_lambda;
      const double c2 = inv_scale * pair.lin.f2 - g2.dot(pref) - g2l * lref;
      pair.f2a_row = row;
      for (int c = 0; c < spec.dim; ++c) {
        a_trip.emplace_back(row, pbase + c, g2(c));
      }
      a_trip.emplace_back(row, pair.lambda_var, g2l);
      a_trip.emplace_back(row, pair.s2_var, -1.0);
      add_row_bound(-kInf, -c2);
      pair.f2b_row = row;
      for (int c = 0; c < spec.dim; ++c) {
        a_trip.emplace_back(row, pbase + c, -g2(c));
      }
      a_trip.emplace_back(row, pair.lambda_var, -g2l);
      a_trip.emplace_back(row, pair.s2_var, -1.0);
      add_row_bound(-kInf, c2);

      // f1_lin >= upsilon_min - s3 while the band applies.
      if (pair.s3_var >= 0) {
        pair.band_row = row;
        for (int c = 0; c < spec.dim; ++c) {
          a_trip.emplace_back(row, pbase + c, -pair.lin.grad_f1_pos(c));
        }
        a_trip.emplace_back(row, pair.lambda_var, -pair.lin.grad_f1_lambda);
        a_trip.emplace_back(row, pair.s3_var, -1.0);
        add_row_bound(-kInf, c1 - *spec.upsilon_min);
      }
    }

    // Cost: exact quadratic terminal and smoothness terms, proximal
    // regularization on velocities and overlap parameters, penalized slack.
    {
      const MatrixXd goal_metric =
          spec.drone_cov_seq.back().topLeftCorner(spec.dim, spec.dim).ldlt().solve(
              MatrixXd::Identity(spec.dim, spec.dim));
      const MatrixXd block = 2.0 * spec.terminal_weight * goal_metric;
      const VectorXd lin = -block * spec.goal.head(spec.dim);
      const int pn = pos0 + 3 * (n - 1);
      for (int r = 0; r < spec.dim; ++r) {
        for (int c = 0; c < spec.dim; ++c) {
          h_trip.emplace_back(pn + r, pn + c, block(r, c));
        }
        g(pn + r) += lin(r);
      }
    }
    {
      const double w = 2.0 * spec.smooth_weight / std::pow(spec.tau, 4);
      for (int i = 1; i + 1 < n; ++i) {
        const int a = vel0 + 3 * (i - 1);
        const int b = vel0 + 3 * i;
        const int c = vel0 + 3 * (i + 1);
        for (int k = 0; k < 3; ++k) {
          const int idx[3] = {a + k, b + k, c + k};
          const double coef[3] = {1.0, -2.0, 1.0};
          for (int r = 0; r < 3; ++r) {
            for (int s = 0; s < 3; ++s) {
              h_trip.emplace_back(idx[r], idx[s], w * coef[r] * coef[s]);
            }
          }
        }
      }
    }
    // The cost has flat directions (any zero-jerk ramp that reaches the
    // goal is optimal), so the convexifying term is centered on the
    // straight-to-goal pace profile: among equally cheap plans the QP
    // prefers the one that makes progress now rather than later.
    for (int i = 0; i < 3 * n; ++i) {
      h_trip.emplace_back(vel0 + i, vel0 + i, 2.0 * settings.prox_velocity);
      g(vel0 + i) += -2.0 * settings.prox_velocity * pace[i / 3](i % 3);
    }
    for (const auto& pair : pairs) {
      h_trip.emplace_back(pair.lambda_var, pair.lambda_var, 2.0 * settings.prox_lambda);
      g(pair.lambda_var) +=
          -2.0 * settings.prox_lambda * ref_lambda(pair.obstacle, pair.step);
      for (int s : {pair.s1_var, pair.s2_var, pair.s3_var}) {
        if (s < 0) continue;
        h_trip.emplace_back(s, s, 2.0 * settings.slack_quad);
        g(s) += settings.slack_penalty;
      }
    }

    QpProblem qp;
    qp.H.resize(num_vars, num_vars);
    qp.H.setFromTriplets(h_trip.begin(), h_trip.end());
    qp.g = g;
    qp.A.resize(row, num_vars);
    qp.A.setFromTriplets(a_trip.begin(), a_trip.end());
    qp.lower = Eigen::Map<VectorXd>(lo.data(), row);
    qp.upper = Eigen::Map<VectorXd>(hi.data(), row);

    const bool use_dense =
        settings.qp_mode == QpMode::kDense ||
        (settings.qp_mode == QpMode::kAuto && num_vars <= settings.dense_limit);
    QpResult qp_result;
    if (use_dense) {
      qp_result = solve_qp_dense(qp);
    } else {
      AdmmSettings admm;
      Eigen::VectorXd warm_x, warm_y;
      if (memory.valid) {
        warm_x = Eigen::VectorXd::Zero(num_vars);
        warm_y = Eigen::VectorXd::Zero(row);
        warm_x.head(6 * n) = memory.z.head(6 * n);
        warm_y.head(fixed_rows) = memory.y.head(memory.fixed_rows);
        std::map<std::pair<int, int>, const ActivePair*> prev;
        for (const auto& p : memory.pairs) prev[{p.obstacle, p.step}] = &p;
        for (const auto& pair : pairs) {
          const auto it = prev.find({pair.obstacle, pair.step});
          warm_x(pair.lambda_var) = ref_lambda(pair.obstacle, pair.step);
          if (it == prev.end()) continue;
          const ActivePair& old = *it->second;
          warm_x(pair.lambda_var) = memory.z(old.lambda_var);
          warm_x(pair.s1_var) = memory.z(old.s1_var);
          warm_x(pair.s2_var) = memory.z(old.s2_var);
          if (pair.s3_var >= 0 && old.s3_var >= 0) {
            warm_x(pair.s3_var) = memory.z(old.s3_var);
          }
          warm_y(pair.lambda_box_row) = memory.y(old.lambda_box_row);
          warm_y(pair.s1_box_row) = memory.y(old.s1_box_row);
          warm_y(pair.s2_box_row) = memory.y(old.s2_box_row);
          warm_y(pair.f1_row) = memory.y(old.f1_row);
          warm_y(pair.f2a_row) = memory.y(old.f2a_row);
          warm_y(pair.f2b_row) = memory.y(old.f2b_row);
          if (pair.band_row >= 0 && old.band_row >= 0) {
            warm_y(pair.band_row) = memory.y(old.band_row);
            warm_y(pair.s3_box_row) = memory.y(old.s3_box_row);
          }
        }
        admm.warm_x = &warm_x;
        admm.warm_y = &warm_y;
      }
      qp_result = solve_qp_admm(qp, admm);
      if (qp_result.z.size() == num_vars && qp_result.z.allFinite()) {
        memory.valid = true;
        memory.z = qp_result.z;
        memory.y = qp_result.y;
        memory.fixed_rows = fixed_rows;
        memory.pairs = pairs;
      }
    }
    const bool qp_usable = (qp_result.status == QpStatus::kSolved ||
                            qp_result.status == QpStatus::kMaxIterations) &&
                           qp_result.z.size() == num_vars && qp_result.z.allFinite();

    ScpIterationRecord record;
    record.iteration = iter;
    record.trust_radius = trust;
    record.qp_variables = num_vars;
    record.qp_iterations = qp_result.iterations;

    if (!qp_usable) {
      trust *= 0.5;
      record.merit = ref_merit.merit;
      record.cost = ref_merit.cost;
      record.max_violation = ref_merit.max_violation;
      sol.diagnostics.push_back(record);
      if (trust < settings.trust_min) {
        sol.message = "trust region collapsed after qp failure";
        break;
      }
      continue;
    }

    // Candidate trajectory.
    std::vector<Vector3d> cand_v(n);
    for (int i = 0; i < n; ++i) {
      cand_v[i] = clamp_box(qp_result.z.segment<3>(vel0 + 3 * i), spec.v_min,
                            spec.v_max);
    }
    MatrixXd cand_lambda = ref_lambda;
    for (const auto& pair : pairs) {
      cand_lambda(pair.obstacle, pair.step) = std::clamp(
          qp_result.z(pair.lambda_var), settings.lambda_min, settings.lambda_max);
    }
    const MeritBreakdown cand_merit =
        evaluate_merit(spec, settings, ws, cand_v, cand_lambda, in_active, band_on, pace);

    record.merit = cand_merit.merit;
    record.cost = cand_merit.cost;
    record.max_violation = cand_merit.max_violation;

    const double tolerance = 1e-12 * std::max(1.0, std::abs(ref_merit.merit));
    if (cand_merit.merit <= ref_merit.merit + tolerance) {
      record.accepted = true;
      sol.diagnostics.push_back(record);
      const double improvement = ref_merit.merit - cand_merit.merit;

      // Linearization audit at the accepted point, over the constraints
      // that are actually binding there.
      const std::vector<Vector3d> cand_p = rollout(spec.start, cand_v, spec.tau);
      double gap = 0.0;
      for (const auto& pair : pairs) {
        const double f1_lin =
            pair.lin.f1 +
            pair.lin.grad_f1_pos.dot(cand_p[pair.step] - ref_p[pair.step]) +
            pair.lin.grad_f1_lambda * (cand_lambda(pair.obstacle, pair.step) -
                                       ref_lambda(pair.obstacle, pair.step));
        const bool binding =
            f1_lin >= spec.upsilon_max - 1e-3 ||
            (pair.lower_bounded && f1_lin <= *spec.upsilon_min + 1e-3);
        if (!binding) continue;
        const auto exact = constraint_pair(
            cand_p[pair.step].head(spec.dim), ws.drone_cov[pair.step],
            spec.obstacles[pair.obstacle].means[pair.step].head(spec.dim),
            ws.obs_cov[pair.obstacle][pair.step],
            cand_lambda(pair.obstacle, pair.step));
        gap = std::max(gap, std::abs(f1_lin - exact.f1));
      }
      sol.linearization_gap = gap;

      ref_v = cand_v;
      ref_lambda = cand_lambda;
      ref_merit = cand_merit;
      sol.per_iteration_cost.push_back(cand_merit.merit);
      sol.scp_iterations = iter;
      trust = std::min(2.0 * trust, settings.trust_initial);
      if (improvement < settings.cost_tolerance) {
        converged = true;
        sol.message = "converged";
        break;
      }
    } else {
      sol.diagnostics.push_back(record);
      // A candidate that is neither better nor meaningfully worse means
      // the cost has flattened out; that is convergence, not failure.
      if (cand_merit.merit - ref_merit.merit < settings.cost_tolerance) {
        converged = true;
        sol.message = "converged";
        break;
      }
      trust *= 0.5;
      if (trust < settings.trust_min) {
        sol.message = "trust region collapsed";
        break;
      }
    }
  }

  // Final exact audit: positions from the motion model, overlap re-solved
  // per pair, bound checks against the exact values.
  sol.velocities = ref_v;
  sol.positions = rollout(spec.start, ref_v, spec.tau);
  sol.lambdas = ref_lambda;
  sol.upsilons = MatrixXd::Zero(num_obstacles, n);
  double worst = 0.0;
  for (int j = 0; j < num_obstacles; ++j) {
    for (int i = 0; i < n; ++i) {
      double lam = ref_lambda(j, i);
      const double ups =
          exact_pair_overlap(spec, ws, sol.positions[i], j, i, &lam);
      sol.upsilons(j, i) = ups;
      if (!in_active[j][i]) sol.lambdas(j, i) = lam;
      worst = std::max(worst, ups - spec.upsilon_max);
      if (band_on[j][i]) worst = std::max(worst, *spec.upsilon_min - ups);
    }
  }
  sol.max_exact_violation = std::max(0.0, worst);
  sol.constraint_violated = sol.max_exact_violation > 1e-3;
  sol.converged = converged && !sol.constraint_violated;
  if (converged && sol.constraint_violated) sol.message = "constraint violated";
  sol.cost_terminal = terminal_cost(sol.positions.back(), spec.drone_cov_seq.back(),
                                    spec.goal, spec.dim);
  sol.cost_smooth = smoothness_cost(sol.velocities, spec.tau);
  return sol;
}

}  // namespace gop
