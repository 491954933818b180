#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <vector>

#include "gop/qp.hpp"

// Operator-splitting solver in the OSQP mold: Ruiz equilibration, a
// quasi-definite KKT factorization reused across iterations, over-relaxed
// ADMM updates, deterministic rho adaptation, and an active-set polish
// solve with iterative refinement to reach direct-solver accuracy.

namespace gop {

namespace {

using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

constexpr double kRhoEqualityFactor = 1e3;
constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;

struct Scaling {
  VectorXd d;  // variable scaling, size n
  VectorXd e;  // constraint scaling, size m
  double c = 1.0;
};

Scaling ruiz_equilibrate(SpMat& h, VectorXd& g, SpMat& a, VectorXd& l, VectorXd& u) {
  const int n = static_cast<int>(g.size());
  const int m = static_cast<int>(l.size());
  Scaling s;
  s.d = VectorXd::Ones(n);
  s.e = VectorXd::Ones(m);

  for (int iter = 0; iter < 10; ++iter) {
    VectorXd col_h = VectorXd::Zero(n);
    for (int k = 0; k < h.outerSize(); ++k) {
      for (SpMat::InnerIterator it(h, k); it; ++it) {
        col_h(it.col()) = std::max(col_h(it.col()), std::abs(it.value()));
        col_h(it.row()) = std::max(col_h(it.row()), std::abs(it.value()));
      }
    }
    VectorXd col_a = VectorXd::Zero(n);
    VectorXd row_a = VectorXd::Zero(m);
    for (int k = 0; k < a.outerSize(); ++k) {
      for (SpMat::InnerIterator it(a, k); it; ++it) {
        col_a(it.col()) = std::max(col_a(it.col()), std::abs(it.value()));
        row_a(it.row()) = std::max(row_a(it.row()), std::abs(it.value()));
      }
    }
    VectorXd dv(n), ev(m);
    for (int i = 0; i < n; ++i) {
      const double norm = std::max(col_h(i), col_a(i));
      dv(i) = norm > 1e-12 ? 1.0 / std::sqrt(norm) : 1.0;
    }
    for (int i = 0; i < m; ++i) {
      ev(i) = row_a(i) > 1e-12 ? 1.0 / std::sqrt(row_a(i)) : 1.0;
    }
    h = dv.asDiagonal() * h * dv.asDiagonal();
    a = ev.asDiagonal() * a * dv.asDiagonal();
    g = dv.cwiseProduct(g);
    for (int i = 0; i < m; ++i) {
      if (std::isfinite(l(i))) l(i) *= ev(i);
      if (std::isfinite(u(i))) u(i) *= ev(i);
    }
    s.d = s.d.cwiseProduct(dv);
    s.e = s.e.cwiseProduct(ev);
  }

  // Cost normalization.
  double col_norm_sum = 0.0;
  VectorXd col_h = VectorXd::Zero(n);
  for (int k = 0; k < h.outerSize(); ++k) {
    for (SpMat::InnerIterator it(h, k); it; ++it) {
      col_h(it.col()) = std::max(col_h(it.col()), std::abs(it.value()));
      col_h(it.row()) = std::max(col_h(it.row()), std::abs(it.value()));
    }
  }
  for (int i = 0; i < n; ++i) col_norm_sum += col_h(i);
  const double mean_col = n > 0 ? col_norm_sum / n : 0.0;
  const double denom = std::max({1.0, mean_col, g.lpNorm<Eigen::Infinity>()});
  s.c = 1.0 / denom;
  h *= s.c;
  g *= s.c;
  return s;
}

class AdmmSolver {
 public:
  AdmmSolver(const QpProblem& qp, const AdmmSettings& settings)
      : qp_(qp), settings_(settings), n_(qp.vars()), m_(qp.rows()) {}

  QpResult solve() {
    QpResult result;
    h_ = SpMat(qp_.H);
    a_ = SpMat(qp_.A);
    g_ = qp_.g;
    l_ = qp_.lower;
    u_ = qp_.upper;

    is_equality_.assign(m_, false);
    for (int i = 0; i < m_; ++i) {
      is_equality_[i] = std::isfinite(l_(i)) && std::isfinite(u_(i)) &&
                        u_(i) - l_(i) <= 1e-12 * std::max(1.0, std::abs(u_(i)));
    }

    scaling_ = ruiz_equilibrate(h_, g_, a_, l_, u_);

    rho_base_ = settings_.rho;
    build_rho();
    if (!factorize()) {
      result.status = QpStatus::kNumericalError;
      result.message = "kkt factorization failed";
      return result;
    }

    VectorXd x = VectorXd::Zero(n_);
    VectorXd z = VectorXd::Zero(m_);
    VectorXd y = VectorXd::Zero(m_);
    if (settings_.warm_x && settings_.warm_x->size() == n_) {
      x = settings_.warm_x->cwiseQuotient(scaling_.d);
      z = a_ * x;
      for (int i = 0; i < m_; ++i) z(i) = std::clamp(z(i), l_(i), u_(i));
    } else {
      for (int i = 0; i < m_; ++i) {
        if (std::isfinite(l_(i)) && std::isfinite(u_(i))) {
          z(i) = 0.5 * (l_(i) + u_(i));
        } else if (std::isfinite(l_(i))) {
          z(i) = l_(i);
        } else if (std::isfinite(u_(i))) {
          z(i) = u_(i);
        }
      }
    }
    if (settings_.warm_y && settings_.warm_y->size() == m_) {
      y = scaling_.c * settings_.warm_y->cwiseQuotient(scaling_.e);
    }

    VectorXd rhs(n_ + m_), sol(n_ + m_);
    int iter = 0;
    for (; iter < settings_.max_iterations; ++iter) {
      rhs.head(n_) = settings_.sigma * x - g_;
      rhs.tail(m_) = z - y.cwiseQuotient(rho_);
      sol = ldlt_.solve(rhs);
      const VectorXd x_tilde = sol.head(n_);
      const VectorXd nu = sol.tail(m_);
      const VectorXd z_tilde = z + (nu - y).cwiseQuotient(rho_);

      const VectorXd x_next = settings_.alpha * x_tilde + (1.0 - settings_.alpha) * x;
      const VectorXd z_relaxed = settings_.alpha * z_tilde + (1.0 - settings_.alpha) * z;
      const VectorXd projection_arg = z_relaxed + y.cwiseQuotient(rho_);
      VectorXd z_next = projection_arg;
      for (int i = 0; i < m_; ++i) z_next(i) = std::clamp(z_next(i), l_(i), u_(i));
      const VectorXd y_next = rho_.cwiseProduct(projection_arg - z_next);

      const VectorXd dy = y_next - y;
      x = x_next;
      z = z_next;
      y = y_next;

      if ((iter + 1) % 25 == 0 || iter + 1 == settings_.max_iterations) {
        double eps_prim = 0.0;
        double eps_dual = 0.0;
        const double rp = primal_residual(x, z, &eps_prim);
        const double rd = dual_residual(x, y, &eps_dual);
        if (rp <= eps_prim && rd <= eps_dual) {
          ++iter;
          break;
        }
        if (primal_infeasible(dy)) {
          result.status = QpStatus::kInfeasible;
          result.message = "primal infeasibility certificate";
          unscale_into(&result, x, y);
          result.max_violation = raw_violation(result.z);
          result.iterations = iter + 1;
          return result;
        }
        if (settings_.adaptive_rho && (iter + 1) % 50 == 0) {
          maybe_rescale_rho(rp / std::max(eps_prim, 1e-30),
                            rd / std::max(eps_dual, 1e-30));
        }
      }
    }

    unscale_into(&result, x, y);
    result.iterations = iter;
    if (settings_.polish && polish(&result)) {
      result.status = QpStatus::kSolved;
    } else {
      result.kkt = kkt_residuals(qp_, result.z, result.y);
      result.status = result.kkt.within(1e-8)
                          ? QpStatus::kSolved
                          : (iter >= settings_.max_iterations
                                 ? QpStatus::kMaxIterations
                                 : QpStatus::kSolved);
      if (!result.kkt.within(1e-8)) {
        result.message = "unpolished iterate above kkt tolerance";
      }
    }
    result.objective = 0.5 * result.z.dot(qp_.H * result.z) + qp_.g.dot(result.z);
    result.max_violation = raw_violation(result.z);
    return result;
  }

 private:
  void build_rho() {
    rho_ = VectorXd::Constant(m_, rho_base_);
    for (int i = 0; i < m_; ++i) {
      if (is_equality_[i]) {
        rho_(i) = kRhoEqualityFactor * rho_base_;
      } else if (!std::isfinite(l_(i)) && !std::isfinite(u_(i))) {
        rho_(i) = kRhoMin;
      }
      rho_(i) = std::clamp(rho_(i), kRhoMin, kRhoMax);
    }
  }

  bool factorize() {
    std::vector<Triplet> trip;
    trip.reserve(h_.nonZeros() + a_.nonZeros() + n_ + m_);
    for (int k = 0; k < h_.outerSize(); ++k) {
      for (SpMat::InnerIterator it(h_, k); it; ++it) {
        trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                          it.value());
      }
    }
    for (int i = 0; i < n_; ++i) trip.emplace_back(i, i, settings_.sigma);
    for (int k = 0; k < a_.outerSize(); ++k) {
      for (SpMat::InnerIterator it(a_, k); it; ++it) {
        trip.emplace_back(n_ + static_cast<int>(it.row()), static_cast<int>(it.col()),
                          it.value());
        trip.emplace_back(static_cast<int>(it.col()), n_ + static_cast<int>(it.row()),
                          it.value());
      }
    }
    for (int i = 0; i < m_; ++i) trip.emplace_back(n_ + i, n_ + i, -1.0 / rho_(i));
    SpMat kkt(n_ + m_, n_ + m_);
    kkt.setFromTriplets(trip.begin(), trip.end());
    ldlt_.compute(kkt);
    return ldlt_.info() == Eigen::Success;
  }

  // Residuals in unscaled units; thresholds follow the eps_abs/eps_rel rule.
  double primal_residual(const VectorXd& x, const VectorXd& z, double* eps) const {
    if (m_ == 0) {
      *eps = settings_.eps_abs;
      return 0.0;
    }
    const VectorXd ax = a_ * x;
    const VectorXd einv = scaling_.e.cwiseInverse();
    const double rp = (einv.cwiseProduct(ax - z)).lpNorm<Eigen::Infinity>();
    const double scale = std::max(einv.cwiseProduct(ax).lpNorm<Eigen::Infinity>(),
                                  einv.cwiseProduct(z).lpNorm<Eigen::Infinity>());
    *eps = settings_.eps_abs + settings_.eps_rel * scale;
    return rp;
  }

  double dual_residual(const VectorXd& x, const VectorXd& y, double* eps) const {
    const VectorXd hx = h_ * x;
    const VectorXd aty = a_.transpose() * y;
    const VectorXd dinv = scaling_.d.cwiseInverse();
    const double cinv = 1.0 / scaling_.c;
    const double rd =
        cinv * (dinv.cwiseProduct(hx + g_ + aty)).lpNorm<Eigen::Infinity>();
    const double scale =
        cinv * std::max({dinv.cwiseProduct(hx).lpNorm<Eigen::Infinity>(),
                         dinv.cwiseProduct(g_).lpNorm<Eigen::Infinity>(),
                         dinv.cwiseProduct(aty).lpNorm<Eigen::Infinity>()});
    *eps = settings_.eps_abs + settings_.eps_rel * scale;
    return rd;
  }

  bool primal_infeasible(const VectorXd& dy_scaled) const {
    const VectorXd dy = scaling_.e.cwiseProduct(dy_scaled) / scaling_.c;
    const double norm = dy.lpNorm<Eigen::Infinity>();
    if (norm <= 1e-12) return false;
    const VectorXd at_dy =
        scaling_.d.cwiseInverse().cwiseProduct(a_.transpose() * dy_scaled) /
        scaling_.c;
    if (at_dy.lpNorm<Eigen::Infinity>() > 1e-10 * norm) return false;
    double support = 0.0;
    for (int i = 0; i < m_; ++i) {
      const double raw_u = qp_.upper(i);
      const double raw_l = qp_.lower(i);
      if (dy(i) > 0.0) {
        if (!std::isfinite(raw_u)) return false;
        support += raw_u * dy(i);
      } else if (dy(i) < 0.0) {
        if (!std::isfinite(raw_l)) return false;
        support += raw_l * dy(i);
      }
    }
    return support < -1e-10 * norm;
  }

  void maybe_rescale_rho(double prim_ratio, double dual_ratio) {
    const double target = rho_base_ * std::sqrt(prim_ratio / std::max(dual_ratio, 1e-30));
    const double clamped = std::clamp(target, kRhoMin, kRhoMax);
    if (clamped > 5.0 * rho_base_ || clamped < 0.2 * rho_base_) {
      rho_base_ = clamped;
      build_rho();
      factorize();
    }
  }

  void unscale_into(QpResult* result, const VectorXd& x, const VectorXd& y) const {
    result->z = scaling_.d.cwiseProduct(x);
    result->y = scaling_.e.cwiseProduct(y) / scaling_.c;
  }

  double raw_violation(const VectorXd& z) const {
    if (m_ == 0) return 0.0;
    const VectorXd az = qp_.A * z;
    double v = 0.0;
    for (int i = 0; i < m_; ++i) {
      v = std::max({v, qp_.lower(i) - az(i), az(i) - qp_.upper(i)});
    }
    return v;
  }

  // Equality-KKT solve on the detected active set with regularization and
  // iterative refinement against the unregularized system.
  bool polish(QpResult* result) const {
    const VectorXd az = qp_.A * result->z;
    const double ytol = 1e-10 * std::max(1.0, result->y.lpNorm<Eigen::Infinity>());
    std::vector<int> active_rows;
    std::vector<double> active_rhs;
    for (int i = 0; i < m_; ++i) {
      if (is_equality_[i]) {
        active_rows.push_back(i);
        active_rhs.push_back(qp_.upper(i));
      } else if (result->y(i) < -ytol && std::isfinite(qp_.lower(i))) {
        active_rows.push_back(i);
        active_rhs.push_back(qp_.lower(i));
      } else if (result->y(i) > ytol && std::isfinite(qp_.upper(i))) {
        active_rows.push_back(i);
        active_rhs.push_back(qp_.upper(i));
      }
    }
    const int ma = static_cast<int>(active_rows.size());
    const int dim = n_ + ma;
    const double delta = 1e-9;

    std::vector<Triplet> trip;
    trip.reserve(qp_.H.nonZeros() + 4 * qp_.A.nonZeros() + dim);
    for (int k = 0; k < qp_.H.outerSize(); ++k) {
      for (SpMat::InnerIterator it(qp_.H, k); it; ++it) {
        trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                          it.value());
      }
    }
    std::vector<int> row_to_active(m_, -1);
    for (int k = 0; k < ma; ++k) row_to_active[active_rows[k]] = k;
    for (int k = 0; k < qp_.A.outerSize(); ++k) {
      for (SpMat::InnerIterator it(qp_.A, k); it; ++it) {
        const int ai = row_to_active[it.row()];
        if (ai < 0) continue;
        trip.emplace_back(n_ + ai, static_cast<int>(it.col()), it.value());
        trip.emplace_back(static_cast<int>(it.col()), n_ + ai, it.value());
      }
    }
    SpMat kkt_plain(dim, dim);
    kkt_plain.setFromTriplets(trip.begin(), trip.end());

    for (int i = 0; i < n_; ++i) trip.emplace_back(i, i, delta);
    for (int i = 0; i < ma; ++i) trip.emplace_back(n_ + i, n_ + i, -delta);
    SpMat kkt_reg(dim, dim);
    kkt_reg.setFromTriplets(trip.begin(), trip.end());

    Eigen::SimplicialLDLT<SpMat> reg_ldlt(kkt_reg);
    if (reg_ldlt.info() != Eigen::Success) return false;

    VectorXd rhs(dim);
    rhs.head(n_) = -qp_.g;
    for (int k = 0; k < ma; ++k) rhs(n_ + k) = active_rhs[k];

    VectorXd sol = reg_ldlt.solve(rhs);
    for (int refine = 0; refine < 4; ++refine) {
      const VectorXd residual = rhs - kkt_plain * sol;
      sol += reg_ldlt.solve(residual);
    }

    QpResult candidate;
    candidate.z = sol.head(n_);
    candidate.y = VectorXd::Zero(m_);
    for (int k = 0; k < ma; ++k) candidate.y(active_rows[k]) = sol(n_ + k);
    candidate.kkt = kkt_residuals(qp_, candidate.z, candidate.y);
    if (!candidate.kkt.within(1e-8)) return false;
    result->z = candidate.z;
    result->y = candidate.y;
    result->kkt = candidate.kkt;
    return true;
  }

  const QpProblem& qp_;
  AdmmSettings settings_;
  int n_;
  int m_;
  SpMat h_, a_;
  VectorXd g_, l_, u_;
  VectorXd rho_;
  double rho_base_ = 0.1;
  std::vector<bool> is_equality_;
  Scaling scaling_;
  Eigen::SimplicialLDLT<SpMat> ldlt_;
};

}  // namespace

QpResult solve_qp_admm(const QpProblem& qp, const AdmmSettings& settings) {
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
  AdmmSolver solver(qp, settings);
  return solver.solve();
}

}  // namespace gop
