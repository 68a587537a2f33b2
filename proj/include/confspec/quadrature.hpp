#pragma once

#include <vector>

namespace confspec {

struct Rule {
  std::vector<double> x;
  std::vector<double> w;
};

// Gauss rule for the weight (1-t^2)^a on [-1,1] via Golub-Welsch.
Rule gauss_gegenbauer(int npts, double a);

// Equispaced rule on [0, 2π) with equal weights.
Rule periodic_trapezoid(int npts);

// ∫_{-1}^{1} (1-t^2)^a dt
double gegenbauer_mass(double a);

// Values p_0..p_m at t of the polynomials orthonormal for (1-t^2)^a.
void orthonormal_gegenbauer(int m, double a, double t, double* out);

}  // namespace confspec
