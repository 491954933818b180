#include "gop/qp.hpp"

#include <algorithm>
#include <cmath>

namespace gop {

double KktResiduals::worst() const {
  return std::max({stationarity, primal, dual, complementarity});
}

KktResiduals kkt_residuals(const QpProblem& qp, const Eigen::VectorXd& z,
                           const Eigen::VectorXd& y) {
  KktResiduals res;
  if (z.size() != qp.vars() || y.size() != qp.rows()) return res;

  const Eigen::VectorXd hz = qp.H * z;
  const Eigen::VectorXd aty = qp.A.transpose() * y;
  const Eigen::VectorXd az = qp.A * z;

  const double stat_scale =
      std::max({1.0, hz.lpNorm<Eigen::Infinity>(), qp.g.lpNorm<Eigen::Infinity>(),
                aty.lpNorm<Eigen::Infinity>()});
  res.stationarity = (hz + qp.g + aty).lpNorm<Eigen::Infinity>() / stat_scale;

  if (qp.rows() == 0) {
    res.primal = res.dual = res.complementarity = 0.0;
    return res;
  }
  const double prim_scale = std::max(1.0, az.lpNorm<Eigen::Infinity>());
  double prim = 0.0;
  double dual = 0.0;
  double comp = 0.0;
  for (int i = 0; i < qp.rows(); ++i) {
    prim = std::max({prim, qp.lower(i) - az(i), az(i) - qp.upper(i)});
    if (y(i) > 0.0) {
      if (std::isfinite(qp.upper(i))) {
        comp = std::max(comp, y(i) * std::max(qp.upper(i) - az(i), 0.0));
      } else {
        dual = std::max(dual, y(i));
      }
    } else if (y(i) < 0.0) {
      if (std::isfinite(qp.lower(i))) {
        comp = std::max(comp, -y(i) * std::max(az(i) - qp.lower(i), 0.0));
      } else {
        dual = std::max(dual, -y(i));
      }
    }
  }
  res.primal = std::max(prim, 0.0) / prim_scale;
  res.dual = dual / std::max(1.0, y.lpNorm<Eigen::Infinity>());
  res.complementarity = comp / prim_scale;
  return res;
}

QpResult solve_qp(const QpProblem& qp, QpMode mode, int dense_limit) {
  switch (mode) {
    case QpMode::kDense:
      return solve_qp_dense(qp);
    case QpMode::kAdmm:
      return solve_qp_admm(qp);
    case QpMode::kAuto:
    default:
      return qp.vars() <= dense_limit ? solve_qp_dense(qp) : solve_qp_admm(qp);
  }
}

}  // namespace gop
