#pragma once

#include <span>

namespace dsc {

// Continuous ranked probability score of an m-member ensemble against a
// scalar observation, evaluated in closed form:
//   (1/m) sum_i |x_i - y|  -  (1/(2 m^2)) sum_ij |x_i - x_j|
// Equals the integral of [F(z) - 1(z >= y)]^2 dz for the empirical step CDF.
// With m = 1 it reduces to |x - y|.
double crps_empirical(std::span<const double> members, double y);

// Test-only reference: direct quadrature of the CRPS integral over
// [min - 1, max + 1] with the empirical CDF evaluated pointwise. Segments are
// aligned to the CDF breakpoints, then subdivided to the requested step, so
// the piecewise-constant integrand is integrated without discontinuity error.
double crps_integral_oracle(std::span<const double> members, double y, double step);

// 1 - model/baseline, the fractional CRPS improvement over the baseline.
double improvement(double model, double baseline);

// transfer/direct - 1, the relative drop versus direct training (negative
// when the transferred model wins).
double drop_vs_direct(double transfer, double direct);

}  // namespace dsc
