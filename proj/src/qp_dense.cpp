#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "gop/qp.hpp"

// Dual active-set method after Goldfarb and Idnani: start at the
// unconstrained minimum, repeatedly add the most violated constraint while
// keeping dual feasibility, dropping blocking constraints along partial
// steps. The Cholesky-based J = L^-T and the triangular factor R of the
// active normals are updated by Givens rotations.

namespace gop {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct VirtualConstraint {
  int row = 0;       // row of A
  int side = 0;      // 0 equality, +1 upper bound, -1 lower bound
  double rhs = 0.0;  // bound value
};

class GoldfarbIdnani {
 public:
  GoldfarbIdnani(const QpProblem& qp) : qp_(qp), n_(qp.vars()) {
    rows_.resize(qp.rows());
    Eigen::SparseMatrix<double, Eigen::RowMajor> by_row(qp.A);
    for (int r = 0; r < qp.rows(); ++r) {
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(by_row, r);
           it; ++it) {
        rows_[r].emplace_back(static_cast<int>(it.col()), it.value());
      }
    }
    for (int i = 0; i < qp.rows(); ++i) {
      const bool is_eq = std::isfinite(qp.lower(i)) && std::isfinite(qp.upper(i)) &&
                         qp.upper(i) - qp.lower(i) <= 0.0;
      if (is_eq) {
        equalities_.push_back({i, 0, qp.upper(i)});
      } else {
        if (std::isfinite(qp.upper(i))) inequalities_.push_back({i, +1, qp.upper(i)});
        if (std::isfinite(qp.lower(i))) inequalities_.push_back({i, -1, qp.lower(i)});
      }
    }
  }

  QpResult solve() {
    QpResult result;
    if (!factorize()) {
      result.status = QpStatus::kNumericalError;
      result.message = "hessian factorization failed";
      return result;
    }

    x_ = -chol_.solve(qp_.g);
    iq_ = 0;
    r_norm_ = 1.0;
    active_.clear();
    u_ = VectorXd::Zero(n_ + 1);
    r_ = VectorXd::Zero(n_ + 1);
    d_ = VectorXd::Zero(n_);
    z_ = VectorXd::Zero(n_);
    big_r_ = MatrixXd::Zero(n_ + 1, n_ + 1);

    if (!add_equalities(&result)) return result;

    const int max_steps = 20 * (n_ + static_cast<int>(inequalities_.size()) + 1);
    int pending = -1;       // inequality being worked in
    double pending_s = 0.0; // its violation
    for (int step = 0; step < max_steps; ++step) {
      ++result.iterations;
      if (pending < 0) {
        pending = most_violated(&pending_s);
        if (pending < 0) {
          finish(&result);
          return result;
        }
        u_(iq_) = 0.0;
      }

      const VirtualConstraint& working = inequalities_[pending];
      compute_step_directions(working);

      // Partial step bound from the dual variables of active inequalities.
      double t1 = kInf;
      int blocking = -1;
      for (int k = static_cast<int>(equalities_active_); k < iq_; ++k) {
        if (r_(k) > 0.0 && u_(k) / r_(k) < t1) {
          t1 = u_(k) / r_(k);
          blocking = k;
        }
      }
      // Full step bound from the primal violation.
      const double ztn = dot_normal(working, z_);
      const double t2 = (z_.squaredNorm() > eps_) ? -pending_s / ztn : kInf;
      const double t = std::min(t1, t2);

      if (!std::isfinite(t)) {
        result.status = QpStatus::kInfeasible;
        result.max_violation = -pending_s;
        result.message = "no feasible point (dual ray)";
        finish_point(&result);
        return result;
      }

      if (!std::isfinite(t2)) {
        // Step in dual space only, dropping the blocking constraint.
        for (int k = 0; k < iq_; ++k) u_(k) -= t * r_(k);
        u_(iq_) += t;
        drop_position(blocking);
        continue;
      }

      x_ += t * z_;
      for (int k = 0; k < iq_; ++k) u_(k) -= t * r_(k);
      u_(iq_) += t;

      if (t2 <= t1) {
        if (!add_constraint()) {
          result.status = QpStatus::kNumericalError;
          result.message = "active-set update lost rank";
          finish_point(&result);
          return result;
        }
        active_.push_back(pending + static_cast<int>(equalities_.size()));
        pending = -1;
      } else {
        drop_position(blocking);
        pending_s = violation(inequalities_[pending]);
      }
    }
    result.status = QpStatus::kMaxIterations;
    result.message = "active-set iteration cap";
    finish_point(&result);
    return result;
  }

 private:
  bool factorize() {
    MatrixXd h = MatrixXd(qp_.H);
    h = 0.5 * (h + h.transpose().eval());
    const double scale = std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
    for (double bump : {0.0, 1e-12, 1e-10, 1e-8}) {
      MatrixXd trial = h + bump * scale * MatrixXd::Identity(n_, n_);
      chol_.compute(trial);
      if (chol_.info() == Eigen::Success) {
        // J = L^-T so that J J^T = H^-1.
        j_ = chol_.matrixL()
                 .transpose()
                 .solve(MatrixXd::Identity(n_, n_));
        return true;
      }
    }
    return false;
  }

  double row_dot_x(int row) const {
    double sum = 0.0;
    for (const auto& [col, value] : rows_[row]) sum += value * x_(col);
    return sum;
  }

  double violation(const VirtualConstraint& c) const {
    const double az = row_dot_x(c.row);
    if (c.side > 0) return c.rhs - az;   // upper: u - a.z >= 0
    if (c.side < 0) return az - c.rhs;   // lower: a.z - l >= 0
    return az - c.rhs;
  }

  int most_violated(double* s_out) const {
    // One pass of per-row products; each virtual constraint reads its row.
    int best = -1;
    double worst = -tol_();
    for (int k = 0; k < static_cast<int>(inequalities_.size()); ++k) {
      const VirtualConstraint& c = inequalities_[k];
      const double az = row_dot_x(c.row);
      const double s = c.side > 0 ? c.rhs - az : az - c.rhs;
      if (s < worst) {
        worst = s;
        best = k;
      }
    }
    if (best >= 0) *s_out = worst;
    return best;
  }

  double tol_() const {
    return 1e-10 * std::max(1.0, qp_.g.lpNorm<Eigen::Infinity>());
  }

  // d = J^T np and z = J_2 d_2 for a sparse constraint normal: np is
  // sign * (row of A), touching only a handful of coordinates.
  void compute_step_directions(const VirtualConstraint& c) {
    const double sign = c.side > 0 ? -1.0 : 1.0;
    d_.setZero();
    for (const auto& [col, value] : rows_[c.row]) {
      d_ += (sign * value) * j_.row(col).transpose();
    }
    z_.setZero();
    for (int col = iq_; col < n_; ++col) z_ += j_.col(col) * d_(col);
    // r = R^-1 d over the active block.
    for (int k = iq_ - 1; k >= 0; --k) {
      double sum = d_(k);
      for (int col = k + 1; col < iq_; ++col) sum -= big_r_(k, col) * r_(col);
      r_(k) = sum / big_r_(k, k);
    }
  }

  double dot_normal(const VirtualConstraint& c, const VectorXd& v) const {
    const double sign = c.side > 0 ? -1.0 : 1.0;
    double sum = 0.0;
    for (const auto& [col, value] : rows_[c.row]) sum += sign * value * v(col);
    return sum;
  }

  bool add_constraint() {
    for (int j = n_ - 1; j >= iq_ + 1; --j) {
      const double cc = d_(j - 1);
      const double ss = d_(j);
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      d_(j) = 0.0;
      double c = cc / h;
      double s = ss / h;
      if (c < 0.0) {
        c = -c;
        s = -s;
        d_(j - 1) = -h;
      } else {
        d_(j - 1) = h;
      }
      const double xny = s / (1.0 + c);
      for (int k = 0; k < n_; ++k) {
        const double t1 = j_(k, j - 1);
        const double t2 = j_(k, j);
        j_(k, j - 1) = t1 * c + t2 * s;
        j_(k, j) = xny * (t1 + j_(k, j - 1)) - t2;
      }
    }
    ++iq_;
    for (int i = 0; i < iq_; ++i) big_r_(i, iq_ - 1) = d_(i);
    r_norm_ = std::max(r_norm_, std::abs(d_(iq_ - 1)));
    return std::abs(d_(iq_ - 1)) > 1e-13 * r_norm_;
  }

  void drop_position(int qq) {
    for (int i = qq; i < iq_ - 1; ++i) {
      active_[i] = active_[i + 1];
      u_(i) = u_(i + 1);
      big_r_.col(i) = big_r_.col(i + 1);
    }
    active_.pop_back();
    u_(iq_ - 1) = u_(iq_);
    u_(iq_) = 0.0;
    --iq_;
    if (iq_ == 0) return;

    for (int j = qq; j < iq_; ++j) {
      const double cc = big_r_(j, j);
      const double ss = big_r_(j + 1, j);
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      double c = cc / h;
      double s = ss / h;
      big_r_(j + 1, j) = 0.0;
      if (c < 0.0) {
        big_r_(j, j) = -h;
        c = -c;
        s = -s;
      } else {
        big_r_(j, j) = h;
      }
      const double xny = s / (1.0 + c);
      for (int k = j + 1; k < iq_; ++k) {
        const double t1 = big_r_(j, k);
        const double t2 = big_r_(j + 1, k);
        big_r_(j, k) = t1 * c + t2 * s;
        big_r_(j + 1, k) = xny * (t1 + big_r_(j, k)) - t2;
      }
      for (int k = 0; k < n_; ++k) {
        const double t1 = j_(k, j);
        const double t2 = j_(k, j + 1);
        j_(k, j) = t1 * c + t2 * s;
        j_(k, j + 1) = xny * (j_(k, j) + t1) - t2;
      }
    }
  }

  bool add_equalities(QpResult* result) {
    equalities_active_ = 0;
    for (int e = 0; e < static_cast<int>(equalities_.size()); ++e) {
      compute_step_directions(equalities_[e]);
      const double gap = -violation(equalities_[e]);
      if (z_.squaredNorm() <= eps_) {
        if (std::abs(gap) > 1e-8 * std::max(1.0, std::abs(equalities_[e].rhs))) {
          result->status = QpStatus::kInfeasible;
          result->max_violation = std::abs(gap);
          result->message = "inconsistent equality constraints";
          finish_point(result);
          return false;
        }
        continue;  // dependent but consistent; multiplier stays zero
      }
      const double t2 = gap / dot_normal(equalities_[e], z_);
      x_ += t2 * z_;
      for (int k = 0; k < iq_; ++k) u_(k) -= t2 * r_(k);
      u_(iq_) = t2;
      if (!add_constraint()) {
        result->status = QpStatus::kNumericalError;
        result->message = "dependent equality slipped through";
        finish_point(result);
        return false;
      }
      active_.push_back(e);
      ++equalities_active_;
    }
    return true;
  }

  void finish_point(QpResult* result) const {
    result->z = x_;
    result->y = VectorXd::Zero(qp_.rows());
  }

  void finish(QpResult* result) const {
    result->z = x_;
    result->y = VectorXd::Zero(qp_.rows());
    const int me = static_cast<int>(equalities_.size());
    for (int k = 0; k < iq_; ++k) {
      const int id = active_[k];
      if (id < me) {
        result->y(equalities_[id].row) -= u_(k);
      } else {
        const VirtualConstraint& c = inequalities_[id - me];
        result->y(c.row) += (c.side > 0 ? u_(k) : -u_(k));
      }
    }
    result->objective = 0.5 * x_.dot(qp_.H * x_) + qp_.g.dot(x_);
    result->status = QpStatus::kSolved;
    result->kkt = kkt_residuals(qp_, result->z, result->y);
  }

  const QpProblem& qp_;
  int n_;
  std::vector<std::vector<std::pair<int, double>>> rows_;
  std::vector<VirtualConstraint> equalities_;
  std::vector<VirtualConstraint> inequalities_;

  Eigen::LLT<MatrixXd> chol_;
  MatrixXd j_;
  MatrixXd big_r_;
  VectorXd x_, u_, r_, d_, z_;
  std::vector<int> active_;
  int iq_ = 0;
  size_t equalities_active_ = 0;
  double r_norm_ = 1.0;
  static constexpr double eps_ = 1e-24;  // squared-norm threshold for z
};

}  // namespace

QpResult solve_qp_dense(const QpProblem& qp) {
  QpResult result;
  if (qp.vars() == 0) {
    result.status = QpStatus::kSolved;
    return result;
  }
  if (qp.H.rows() != qp.vars() || qp.A.cols() != qp.vars() ||
      qp.A.rows() != qp.rows() || qp.upper.size() != qp.rows()) {
    result.status = QpStatus::kNumericalError;
    result.message = "inconsistent problem dimensions";
    return result;
  }
  GoldfarbIdnani solver(qp);
  return solver.solve();
}

}  // namespace gop
