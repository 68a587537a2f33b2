#pragma once

#include <memory>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "confspec/constants.hpp"
#include "confspec/discretization.hpp"

namespace confspec {

struct OperatorModel {
  ModelPtr manifold;
  DimPair dims;
  double shift_c = 0.0;
  std::vector<Eigen::VectorXd> multiplier;  // per block
  double tol_ker = 0.0;
  std::vector<std::pair<int, int>> kernel_indices;  // (block, profile)
  double k_minus = 0;
  double k_plus = 1;

  double ker_dim() const { return k_plus - k_minus - 1; }
  double min_multiplier() const;
};

using OperatorPtr = std::shared_ptr<const OperatorModel>;

// Sphere: exact GJMS multipliers. Torus: |m|^{2s} + c.
OperatorPtr make_operator(const ModelPtr& model, int s, double c = 0.0, double tol_rel = 1e-10);

CoefVector stiffness_apply(const OperatorModel& op, const CoefVector& c);
double quadratic_form(const OperatorModel& op, const CoefVector& c);

struct SpectrumClass {
  double k_minus = 0;
  double k_plus = 1;
  double ker_dim = 0;
};

SpectrumClass classify_spectrum(const OperatorModel& op, double tol_ker);

// Ascending multipliers with multiplicity, first `count` of them.
std::vector<double> first_eigenvalues(const OperatorModel& op, int count);

// Möbius dilation of the sphere with parameter t (scale e^t in stereographic
// coordinates from the pole -e_0).
struct Dilation {
  double t = 0.0;
  Eigen::MatrixXd apply(const Eigen::MatrixXd& pts) const;
  Eigen::MatrixXd inverse(const Eigen::MatrixXd& pts) const;
  // conformal factor c with ψ*g = c^2 g
  Eigen::VectorXd factor(const Eigen::MatrixXd& pts) const;
};

struct CovarianceReport {
  double residual = 0.0;
  double reference_norm = 0.0;
  int truncation = 0;
};

// Relative L^2 residual of P_ĝ f - u^{-(n+2s)/(n-2s)} P_g(u f) for ĝ = ψ*g = u^{4/(n-2s)} g.
// f is given by its coefficients on the operator's (full sphere) model.
CovarianceReport conformal_covariance_residual(const OperatorModel& op, const Dilation& psi,
                                               const Eigen::VectorXd& f_coef,
                                               double oversample = 2.0);

// Fraction of grid nodes where |v| is below tol·max|v| (unique-continuation diagnostic).
double zero_set_fraction(const GridFunction& v, double tol);

}  // namespace confspec
