#include "gop/overlap.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "gop/stats.hpp"

namespace gop {

namespace {

void check_same_dim(const Gaussian& g1, const Gaussian& g2, const char* who) {
  if (g1.dim() != g2.dim()) {
    throw std::invalid_argument(std::string(who) + ": dimension mismatch");
  }
}

bool means_coincide(const Gaussian& g1, const Gaussian& g2) {
  return (g2.mean() - g1.mean()).cwiseAbs().maxCoeff() <= 1e-12;
}

}  // namespace

double bhattacharyya(const Gaussian& g1, const Gaussian& g2) {
  check_same_dim(g1, g2, "bhattacharyya");
  const Eigen::MatrixXd blend = 0.5 * (g1.cov() + g2.cov());
  const Eigen::VectorXd dmu = g1.mean() - g2.mean();
  const double quad = 0.125 * dmu.dot(blend.ldlt().solve(dmu));
  const double logdet =
      0.5 * std::log(blend.determinant() /
                     std::sqrt(g1.cov().determinant() * g2.cov().determinant()));
  return quad + logdet;
}

std::pair<Eigen::VectorXd, double> separator_from_lambda(const Gaussian& g1,
                                                         const Gaussian& g2,
                                                         double lambda) {
  check_same_dim(g1, g2, "separator_from_lambda");
  if (!(lambda > 0.0 && lambda < 1.0)) {
    throw std::domain_error("separator_from_lambda: lambda must lie in (0,1)");
  }
  if (means_coincide(g1, g2)) {
    throw degenerate_means_error("separator_from_lambda: coincident means");
  }
  const Eigen::MatrixXd blend = lambda * g1.cov() + (1.0 - lambda) * g2.cov();
  const Eigen::VectorXd alpha = blend.ldlt().solve(g2.mean() - g1.mean());
  const double beta = alpha.dot(g1.mean()) + lambda * alpha.dot(g1.cov() * alpha);
  return {alpha, beta};
}

std::pair<double, double> eta_values(const Gaussian& g1, const Gaussian& g2,
                                     const Eigen::VectorXd& alpha, double beta) {
  check_same_dim(g1, g2, "eta_values");
  const double s1 = alpha.dot(g1.cov() * alpha);
  const double s2 = alpha.dot(g2.cov() * alpha);
  if (!(s1 > 0.0) || !(s2 > 0.0)) {
    throw std::domain_error("eta_values: degenerate separator (zero alpha)");
  }
  const double eta1 = (beta - alpha.dot(g1.mean())) / std::sqrt(s1);
  const double eta2 = (alpha.dot(g2.mean()) - beta) / std::sqrt(s2);
  return {eta1, eta2};
}

double admissibility_residual(const Gaussian& g1, const Gaussian& g2, double lambda) {
  const auto [alpha, beta] = separator_from_lambda(g1, g2, lambda);
  (void)beta;
  const double s1 = alpha.dot(g1.cov() * alpha);
  const double s2 = alpha.dot(g2.cov() * alpha);
  return lambda * lambda * s1 - (1.0 - lambda) * (1.0 - lambda) * s2;
}

Separator solve_lambda(const Gaussian& g1, const Gaussian& g2, double tol) {
  check_same_dim(g1, g2, "solve_lambda");
  if (!(tol > 0.0)) throw std::domain_error("solve_lambda: tol must be positive");
  if (means_coincide(g1, g2)) {
    Separator total;
    total.alpha = Eigen::VectorXd::Zero(g1.dim());
    total.beta = 0.0;
    total.lambda = 0.5;
    total.eta1 = total.eta2 = 0.0;
    total.overlap = 1.0;
    total.degenerate = true;
    return total;
  }

  // The residual is negative at the lower bracket end and positive at the
  // upper one, so plain bisection always converges to the unique root.
  double lo = 1e-6;
  double hi = 1.0 - 1e-6;
  const int max_iters = 200;
  double lambda = 0.5;
  for (int i = 0; i < max_iters; ++i) {
    lambda = 0.5 * (lo + hi);
    const double res = admissibility_residual(g1, g2, lambda);
    if (res < 0.0) {
      lo = lambda;
    } else {
      hi = lambda;
    }
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon()) break;
  }
  lambda = 0.5 * (lo + hi);

  Separator sep;
  sep.lambda = lambda;
  std::tie(sep.alpha, sep.beta) = separator_from_lambda(g1, g2, lambda);
  std::tie(sep.eta1, sep.eta2) = eta_values(g1, g2, sep.alpha, sep.beta);
  sep.overlap = normal_sf(sep.eta1) + normal_sf(sep.eta2);
  sep.degenerate = false;

  const double s1 = sep.alpha.dot(g1.cov() * sep.alpha);
  const double s2 = sep.alpha.dot(g2.cov() * sep.alpha);
  const double residual = lambda * lambda * s1 - (1.0 - lambda) * (1.0 - lambda) * s2;
  if (std::abs(residual) > tol * (s1 + s2) && std::abs(sep.eta1 - sep.eta2) > 1e-8) {
    throw std::runtime_error("solve_lambda: bisection did not converge, residual " +
                             std::to_string(residual));
  }
  return sep;
}

double contour_to_overlap(double c_t, int dim) {
  if (!(c_t > 0.0 && c_t < 1.0)) {
    throw std::domain_error("contour_to_overlap: c_t must lie in (0,1)");
  }
  const double r = std::sqrt(chi_square_quantile(c_t, dim));
  return 2.0 * normal_sf(r);
}

double overlap_to_contour(double upsilon, int dim) {
  if (!(upsilon > 0.0 && upsilon <= 1.0)) {
    throw std::domain_error("overlap_to_contour: upsilon must lie in (0,1]");
  }
  if (upsilon == 1.0) return 0.0;
  // r solves 1 - Phi(r) = upsilon/2; the mirrored form keeps precision for
  // vanishing overlaps where 1 - upsilon/2 would round to one.
  const double r = -normal_quantile(0.5 * upsilon);
  return chi_square_cdf(r * r, dim);
}

MisclassificationEstimate monte_carlo_misclassification(const Gaussian& g1,
                                                        const Gaussian& g2,
                                                        const Separator& sep,
                                                        int n,
                                                        std::mt19937_64 rng) {
  check_same_dim(g1, g2, "monte_carlo_misclassification");
  if (n < 1) throw std::domain_error("monte_carlo_misclassification: n must be >= 1");
  const int d = g1.dim();
  const Eigen::MatrixXd l1 = g1.cov().llt().matrixL();
  const Eigen::MatrixXd l2 = g2.cov().llt().matrixL();
  std::normal_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd z(d);
  long hits1 = 0;
  long hits2 = 0;
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) z(k) = unit(rng);
    const Eigen::VectorXd x1 = g1.mean() + l1 * z;
    if (sep.alpha.dot(x1) > sep.beta) ++hits1;
    for (int k = 0; k < d; ++k) z(k) = unit(rng);
    const Eigen::VectorXd x2 = g2.mean() + l2 * z;
    if (sep.alpha.dot(x2) <= sep.beta) ++hits2;
  }
  MisclassificationEstimate est;
  est.p1_hat = static_cast<double>(hits1) / n;
  est.p2_hat = static_cast<double>(hits2) / n;
  return est;
}

void write_contour_table(std::ostream& out, int dim, double step) {
  if (!(step > 0.0 && step < 1.0)) {
    throw std::domain_error("write_contour_table: step must lie in (0,1)");
  }
  out << "c_t,dim,upsilon\n";
  char line[96];
  for (int k = 1; k * step < 1.0 - 0.5 * step; ++k) {
    const double c_t = k * step;
    std::snprintf(line, sizeof(line), "%.*g,%d,%.*g\n", 15, c_t, dim, 15,
                  contour_to_overlap(c_t, dim));
    out << line;
  }
}

}  // namespace gop
