#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <limits>
#include <string>

namespace gop {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Convex quadratic program over ranged affine constraints:
///   min 0.5 z^T H z + g^T z   subject to   l <= A z <= u.
/// Equality rows use l == u; simple bounds are identity rows of A.
struct QpProblem {
  Eigen::SparseMatrix<double> H;  // n x n, symmetric positive semidefinite
  Eigen::VectorXd g;              // n
  Eigen::SparseMatrix<double> A;  // m x n
  Eigen::VectorXd lower;          // m, -inf allowed
  Eigen::VectorXd upper;          // m, +inf allowed

  int vars() const { return static_cast<int>(g.size()); }
  int rows() const { return static_cast<int>(lower.size()); }
};

enum class QpStatus {
  kSolved,
  kMaxIterations,
  kInfeasible,
  kNumericalError,
};

/// Scaled KKT residuals of a candidate primal/dual pair. Multiplier sign
/// convention: stationarity is H z + g + A^T y = 0 with y_i >= 0 when row i
/// sits at its upper bound and y_i <= 0 at its lower bound.
struct KktResiduals {
  double stationarity = kInf;
  double primal = kInf;
  double dual = kInf;
  double complementarity = kInf;

  double worst() const;
  bool within(double tol) const { return worst() <= tol; }
};

KktResiduals kkt_residuals(const QpProblem& qp, const Eigen::VectorXd& z,
                           const Eigen::VectorXd& y);

struct QpResult {
  Eigen::VectorXd z;
  Eigen::VectorXd y;
  QpStatus status = QpStatus::kNumericalError;
  int iterations = 0;
  double objective = 0.0;
  double max_violation = 0.0;  // on infeasible reports
  KktResiduals kkt;
  std::string message;
};

/// Dense dual active-set method (Goldfarb-Idnani). Exact for small and
/// medium problems; requires an (effectively) positive definite Hessian
/// and densifies the inputs.
QpResult solve_qp_dense(const QpProblem& qp);

struct AdmmSettings {
  double eps_abs = 2e-4;
  double eps_rel = 2e-4;
  int max_iterations = 2500;
  double sigma = 1e-6;
  double alpha = 1.6;
  double rho = 0.1;
  bool adaptive_rho = true;
  bool polish = true;  // refines to direct-solver accuracy when it lands
  // Optional primal/dual warm start (non-owning; must match the problem
  // dimensions when set).
  const Eigen::VectorXd* warm_x = nullptr;
  const Eigen::VectorXd* warm_y = nullptr;
};

/// Operator-splitting solver with Ruiz equilibration and an active-set
/// polish step; intended for the large sparse programs the dense method
/// cannot touch. Polished solutions pass the same KKT checks.
QpResult solve_qp_admm(const QpProblem& qp, const AdmmSettings& settings = {});

enum class QpMode { kAuto, kDense, kAdmm };

/// kAuto picks the dense active set up to `dense_limit` variables and the
/// operator-splitting mode beyond it.
QpResult solve_qp(const QpProblem& qp, QpMode mode = QpMode::kAuto,
                  int dense_limit = 200);

}  // namespace gop
