#include "test_oracles.hpp"

#include <cmath>
#include <stdexcept>

namespace gop::testing {

namespace {

double simpson(double lo, double hi, int intervals, double (*f)(double)) {
  if (intervals % 2 != 0) ++intervals;
  const double h = (hi - lo) / intervals;
  double sum = f(lo) + f(hi);
  for (int i = 1; i < intervals; ++i) {
    sum += f(lo + i * h) * (i % 2 == 0 ? 2.0 : 4.0);
  }
  return sum * h / 3.0;
}

double normal_density(double t) {
  return std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI);
}

double chi2_density_2(double t) { return 0.5 * std::exp(-0.5 * t); }

// dof-3 density integrated with t = u^2 so the sqrt kink at zero does not
// spoil Simpson's convergence order.
double chi2_density_3_sub(double u) {
  return 2.0 * u * u / std::sqrt(2.0 * M_PI) * std::exp(-0.5 * u * u);
}

}  // namespace

double phi_quadrature(double x) {
  if (x < -12.0) return 0.0;
  if (x > 12.0) return 1.0;
  if (x >= 0.0) return 0.5 + simpson(0.0, x, 20000, normal_density);
  return 0.5 - simpson(x, 0.0, 20000, normal_density);
}

double chi_square_cdf_quadrature(double q, int dof) {
  if (q <= 0.0) return 0.0;
  if (dof == 2) return simpson(0.0, q, 40000, chi2_density_2);
  return simpson(0.0, std::sqrt(q), 40000, chi2_density_3_sub);
}

double chi_square_quantile_quadrature(double p, int dof) {
  double lo = 0.0;
  double hi = 100.0;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    (chi_square_cdf_quadrature(mid, dof) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

TouchingPair touching_means(const Eigen::Matrix2d& cov1, const Eigen::Matrix2d& cov2,
                            double c_t, const Eigen::Vector2d& dir) {
  const double r = std::sqrt(chi_square_quantile_quadrature(c_t, 2));
  const Eigen::Vector2d u = dir.normalized();

  // Gap between the two r-scaled ellipses as seen along direction theta:
  // inf over the second body minus sup over the first. The maximum over
  // theta is the set distance when positive.
  const auto gap_at = [&](double s, double theta) {
    const Eigen::Vector2d th(std::cos(theta), std::sin(theta));
    const double support1 = r * std::sqrt(th.dot(cov1 * th));
    const double support2 = r * std::sqrt(th.dot(cov2 * th));
    return th.dot(s * u) - support2 - support1;
  };
  const auto max_gap = [&](double s, double* best_theta) {
    const int grid = 4096;
    double best = -1e300;
    double arg = 0.0;
    for (int k = 0; k < grid; ++k) {
      const double theta = 2.0 * M_PI * k / grid;
      const double g = gap_at(s, theta);
      if (g > best) {
        best = g;
        arg = theta;
      }
    }
    // Ternary refinement around the best grid angle.
    double a = arg - 2.0 * M_PI / grid;
    double b = arg + 2.0 * M_PI / grid;
    for (int i = 0; i < 120; ++i) {
      const double m1 = a + (b - a) / 3.0;
      const double m2 = b - (b - a) / 3.0;
      if (gap_at(s, m1) < gap_at(s, m2)) {
        a = m1;
      } else {
        b = m2;
      }
    }
    arg = 0.5 * (a + b);
    if (best_theta) *best_theta = arg;
    return gap_at(s, arg);
  };

  double lo = 1e-9;
  double hi = 1.0;
  while (max_gap(hi, nullptr) < 0.0 && hi < 1e4) hi *= 2.0;
  for (int i = 0; i < 80 && (hi - lo) > 1e-10; ++i) {
    const double mid = 0.5 * (lo + hi);
    (max_gap(mid, nullptr) < 0.0 ? lo : hi) = mid;
  }
  const double s = 0.5 * (lo + hi);

  double theta = 0.0;
  max_gap(s, &theta);
  const Eigen::Vector2d th(std::cos(theta), std::sin(theta));

  TouchingPair pair;
  pair.mu1 = Eigen::Vector2d::Zero();
  pair.mu2 = s * u;
  pair.separation = s;
  pair.radius = r;
  pair.touch_point = r * (cov1 * th) / std::sqrt(th.dot(cov1 * th));
  return pair;
}

Gaussian random_gaussian(std::mt19937_64& rng, int dim) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> box(-5.0, 5.0);
  Eigen::MatrixXd a(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) a(i, j) = unit(rng);
  }
  Eigen::MatrixXd cov = a * a.transpose() + 1e-3 * Eigen::MatrixXd::Identity(dim, dim);
  Eigen::VectorXd mean(dim);
  for (int i = 0; i < dim; ++i) mean(i) = box(rng);
  return Gaussian(mean, cov);
}

}  // namespace gop::testing
