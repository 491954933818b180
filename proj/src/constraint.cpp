#include "gop/constraint.hpp"

#include <cmath>
#include <stdexcept>

#include "gop/stats.hpp"

// Defining GOP_FD_GRADIENTS swaps the analytic chain-rule gradients for
// central finite differences of the exact pair values. Useful when
// validating changes to the closed forms.

namespace gop {

namespace {

constexpr double kDegenerateSeparation = 1e-9;

struct PairCore {
  double f1 = 1.0;
  double f2 = 0.0;
  double s1 = 0.0;
  double s2 = 0.0;
  double eta1 = 0.0;
  double eta2 = 0.0;
  Eigen::VectorXd alpha;
  Eigen::MatrixXd blend_inv;
  bool degenerate = false;
};

// Shared evaluation of the fixed-lambda separator quantities. With
// beta = alpha^T mu1 + lambda s1 the whitened distances collapse to
// eta1 = lambda sqrt(s1) and eta2 = (1-lambda) sqrt(s2).
PairCore evaluate_pair(const Eigen::VectorXd& drone_pos,
                       const Eigen::MatrixXd& drone_cov,
                       const Eigen::VectorXd& obstacle_mean,
                       const Eigen::MatrixXd& obstacle_cov, double lambda,
                       bool need_inverse) {
  PairCore core;
  const Eigen::VectorXd delta = obstacle_mean - drone_pos;
  if (delta.cwiseAbs().maxCoeff() <= kDegenerateSeparation) {
    core.degenerate = true;
    return core;
  }
  const Eigen::MatrixXd blend = lambda * drone_cov + (1.0 - lambda) * obstacle_cov;
  const auto ldlt = blend.ldlt();
  core.alpha = ldlt.solve(delta);
  if (need_inverse) {
    core.blend_inv =
        ldlt.solve(Eigen::MatrixXd::Identity(blend.rows(), blend.cols()));
  }
  core.s1 = core.alpha.dot(drone_cov * core.alpha);
  core.s2 = core.alpha.dot(obstacle_cov * core.alpha);
  core.eta1 = lambda * std::sqrt(core.s1);
  core.eta2 = (1.0 - lambda) * std::sqrt(core.s2);
  core.f1 = normal_sf(core.eta1) + normal_sf(core.eta2);
  core.f2 = lambda * lambda * core.s1 -
            (1.0 - lambda) * (1.0 - lambda) * core.s2;
  return core;
}

}  // namespace

Eigen::MatrixXd inflate(const Eigen::MatrixXd& cov, double radius, double kappa) {
  if (radius < 0.0) throw std::domain_error("inflate: radius must be non-negative");
  if (!(kappa > 0.0)) throw std::domain_error("inflate: kappa must be positive");
  const double bump = (radius / kappa) * (radius / kappa);
  return cov + bump * Eigen::MatrixXd::Identity(cov.rows(), cov.cols());
}

InflatedPair make_inflated_pair(const Eigen::MatrixXd& drone_cov, double drone_radius,
                                const Eigen::MatrixXd& obstacle_cov,
                                double obstacle_radius, double kappa) {
  InflatedPair pair;
  pair.drone_cov = inflate(drone_cov, drone_radius, kappa);
  pair.obstacle_cov = inflate(obstacle_cov, obstacle_radius, kappa);
  pair.kappa = kappa;
  return pair;
}

PairValues constraint_pair(const Eigen::VectorXd& drone_pos,
                           const Eigen::MatrixXd& drone_cov,
                           const Eigen::VectorXd& obstacle_mean,
                           const Eigen::MatrixXd& obstacle_cov, double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0)) {
    throw std::domain_error("constraint_pair: lambda must lie in (0,1)");
  }
  const PairCore core = evaluate_pair(drone_pos, drone_cov, obstacle_mean,
                                      obstacle_cov, lambda, false);
  PairValues values;
  values.f1 = core.f1;
  values.f2 = core.f2;
  values.scale = core.degenerate ? 1.0 : core.s1 + core.s2;
  values.degenerate = core.degenerate;
  return values;
}

PairLinearization pair_linearization(const Eigen::Vector3d& drone_pos,
                                     const Eigen::MatrixXd& drone_cov,
                                     const Eigen::Vector3d& obstacle_mean,
                                     const Eigen::MatrixXd& obstacle_cov,
                                     double lambda, int dim) {
  if (dim != 2 && dim != 3) {
    throw std::invalid_argument("pair_linearization: dim must be 2 or 3");
  }
  const Eigen::VectorXd p = drone_pos.head(dim);
  const Eigen::VectorXd o = obstacle_mean.head(dim);

  PairLinearization lin;
  Eigen::VectorXd df1_dp;
  Eigen::VectorXd df2_dp;

#ifdef GOP_FD_GRADIENTS
  const PairCore core = evaluate_pair(p, drone_cov, o, obstacle_cov, lambda, false);
  lin.f1 = core.f1;
  lin.f2 = core.f2;
  lin.scale = core.s1 + core.s2;
  lin.degenerate = core.degenerate;
  if (core.degenerate) return lin;
  const double h = 1e-6;
  df1_dp.resize(dim);
  df2_dp.resize(dim);
  for (int k = 0; k < dim; ++k) {
    Eigen::VectorXd shift = Eigen::VectorXd::Zero(dim);
    shift(k) = h;
    const PairCore plus =
        evaluate_pair(p + shift, drone_cov, o, obstacle_cov, lambda, false);
    const PairCore minus =
        evaluate_pair(p - shift, drone_cov, o, obstacle_cov, lambda, false);
    df1_dp(k) = (plus.f1 - minus.f1) / (2.0 * h);
    df2_dp(k) = (plus.f2 - minus.f2) / (2.0 * h);
  }
  {
    const PairCore plus = evaluate_pair(p, drone_cov, o, obstacle_cov, lambda + h, false);
    const PairCore minus = evaluate_pair(p, drone_cov, o, obstacle_cov, lambda - h, false);
    lin.grad_f1_lambda = (plus.f1 - minus.f1) / (2.0 * h);
    lin.grad_f2_lambda = (plus.f2 - minus.f2) / (2.0 * h);
  }
#else
  const PairCore core = evaluate_pair(p, drone_cov, o, obstacle_cov, lambda, true);
  lin.f1 = core.f1;
  lin.f2 = core.f2;
  lin.scale = core.s1 + core.s2;
  lin.degenerate = core.degenerate;
  if (core.degenerate) return lin;

  const double sqrt_s1 = std::sqrt(core.s1);
  const double sqrt_s2 = std::sqrt(core.s2);
  const double pdf1 = normal_pdf(core.eta1);
  const double pdf2 = normal_pdf(core.eta2);
  const double one_m = 1.0 - lambda;

  // Position gradients. d(delta)/d(pos) = -I, alpha = blend^-1 delta, so
  // d(s_i)/d(pos) = -2 blend^-1 S_i alpha.
  const Eigen::VectorXd ds1_dp = -2.0 * (core.blend_inv * (drone_cov * core.alpha));
  const Eigen::VectorXd ds2_dp = -2.0 * (core.blend_inv * (obstacle_cov * core.alpha));
  df2_dp = lambda * lambda * ds1_dp - one_m * one_m * ds2_dp;
  df1_dp = -pdf1 * lambda / (2.0 * sqrt_s1) * ds1_dp -
           pdf2 * one_m / (2.0 * sqrt_s2) * ds2_dp;

  // Lambda gradients include the blend-inverse derivative term
  // d(alpha)/d(lambda) = -blend^-1 (S1 - S2) alpha.
  const Eigen::VectorXd dalpha =
      -(core.blend_inv * ((drone_cov - obstacle_cov) * core.alpha));
  const double ds1_dl = 2.0 * core.alpha.dot(drone_cov * dalpha);
  const double ds2_dl = 2.0 * core.alpha.dot(obstacle_cov * dalpha);
  const double deta1 = sqrt_s1 + lambda * ds1_dl / (2.0 * sqrt_s1);
  const double deta2 = -sqrt_s2 + one_m * ds2_dl / (2.0 * sqrt_s2);
  lin.grad_f1_lambda = -pdf1 * deta1 - pdf2 * deta2;
  lin.grad_f2_lambda = 2.0 * lambda * core.s1 + lambda * lambda * ds1_dl +
                       2.0 * one_m * core.s2 - one_m * one_m * ds2_dl;
#endif

  lin.grad_f1_pos.head(dim) = df1_dp;
  lin.grad_f2_pos.head(dim) = df2_dp;
  lin.finite = lin.grad_f1_pos.allFinite() && lin.grad_f2_pos.allFinite() &&
               std::isfinite(lin.grad_f1_lambda) && std::isfinite(lin.grad_f2_lambda);
  return lin;
}

ConstraintEval constraint_gradients(const Eigen::Vector3d& start,
                                    const std::vector<Eigen::Vector3d>& velocities,
                                    double tau, int step,
                                    const Eigen::MatrixXd& drone_cov,
                                    const Eigen::Vector3d& obstacle_mean,
                                    const Eigen::MatrixXd& obstacle_cov,
                                    double lambda, int dim) {
  if (step < 1 || step > static_cast<int>(velocities.size())) {
    throw std::invalid_argument("constraint_gradients: step out of range");
  }

  Eigen::Vector3d pos = start;
  for (int k = 0; k < step; ++k) pos += tau * velocities[k];

  const PairLinearization lin =
      pair_linearization(pos, drone_cov, obstacle_mean, obstacle_cov, lambda, dim);

  ConstraintEval eval;
  eval.upsilon = lin.f1;
  eval.residual = lin.f2;
  eval.degenerate = lin.degenerate;
  eval.grad_upsilon_v = Eigen::VectorXd::Zero(3 * step);
  eval.grad_residual_v = Eigen::VectorXd::Zero(3 * step);
  eval.grad_upsilon_pos = lin.grad_f1_pos;
  eval.grad_residual_pos = lin.grad_f2_pos;
  eval.grad_upsilon_lambda = lin.grad_f1_lambda;
  eval.grad_residual_lambda = lin.grad_f2_lambda;
  if (lin.degenerate) return eval;
  for (int k = 0; k < step; ++k) {
    eval.grad_upsilon_v.segment<3>(3 * k) = tau * eval.grad_upsilon_pos;
    eval.grad_residual_v.segment<3>(3 * k) = tau * eval.grad_residual_pos;
  }
  eval.finite = lin.finite;
  return eval;
}

}  // namespace gop
