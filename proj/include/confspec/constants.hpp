#pragma once

#include <vector>

namespace confspec {

struct DimPair {
  int n = 3;
  int s = 1;
};

// Throws DomainError unless n >= 3, s >= 1 and 2s < n.
void require_admissible(const DimPair& d);

double sphere_volume(int n);
double critical_exponent(const DimPair& d);  // 2n/(n-2s)

double sobolev_constant_sq_inv(const DimPair& d);
double sobolev_constant_sq_inv_gamma(const DimPair& d);
double green_constant(const DimPair& d);
double bubble_gamma(const DimPair& d);

struct BubbleProfile {
  DimPair dims;
  double gamma = 0.0;
  std::vector<double> center;
  double scale = 1.0;
};

BubbleProfile standard_bubble(const DimPair& d);
double bubble_eval(const BubbleProfile& b, const std::vector<double>& x);
double bubble_radial(const BubbleProfile& b, double r);

// ∫_{R^n} B^{2n/(n-2s)} by radial tanh-sinh quadrature plus an analytic tail.
double bubble_critical_mass(const BubbleProfile& b);

// max relative residual of Δ^s B - B^{(n+2s)/(n-2s)} on a uniform radial grid
// of spacing h over [r0, r1], with Δ applied by second-order differences.
double bubble_equation_residual(const DimPair& d, double r0, double r1, double h);

double sphere_gjms_eigenvalue(const DimPair& d, int degree);
double sphere_lambda0(const DimPair& d);
double harmonic_dimension(int n, int degree);  // dim of degree-l harmonics on S^n

double gamma_bound_F(int n, double alpha);
double gamma_bound_root(int n);

struct KnBound {
  int value = 0;
  double raw = 0.0;
  int asymptotic_cap = 0;
};

KnBound kn_upper_bound(const DimPair& d);

}  // namespace confspec
