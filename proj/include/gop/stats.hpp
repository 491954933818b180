#pragma once

namespace gop {

/// Standard normal CDF, absolute error below 1e-14 (erfc based).
double normal_cdf(double x);

/// Standard normal survival function 1 - Phi(x), computed directly from
/// erfc so deep tail values keep full relative precision.
double normal_sf(double x);

/// Standard normal density.
double normal_pdf(double x);

/// Inverse standard normal CDF for p in (0,1). Rational approximation
/// polished by Newton steps; round-trips with normal_cdf to ~1e-15.
double normal_quantile(double p);

/// Chi-square CDF for dof in {2, 3}, closed forms.
double chi_square_cdf(double q, int dof);

/// Chi-square quantile, CDF(q) = p within 1e-10. Throws std::domain_error
/// for p outside (0,1) or unsupported dof.
double chi_square_quantile(double p, int dof);

}  // namespace gop
