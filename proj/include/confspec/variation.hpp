#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "confspec/discretization.hpp"
#include "confspec/geneig.hpp"
#include "confspec/operator.hpp"

namespace confspec {

struct DirectionalDerivative {
  double value = 0.0;          // (k-i(k)+1)-th smallest cluster pencil eigenvalue
  double value_max_form = 0.0;  // (I(k)-k+1)-th largest, from a separate solve
  EigenCluster cluster;
  Eigen::VectorXd pencil_spectrum;  // ascending
  Eigen::MatrixXd witness;          // grid values spanning the minimizing subspace
};

// Right derivative of t -> λ_k(β + t b) at t = 0, b ≥ 0.
DirectionalDerivative directional_derivative(const GenEigenResult& res, int k, const Weight& b,
                                             double cluster_tol = 1e-6);
DirectionalDerivative directional_derivative(const OperatorPtr& op, const Weight& beta, int k,
                                             const Weight& b, double cluster_tol = 1e-6);

struct FiniteDifference {
  double coarse = 0.0;  // (λ_k(β+tb) - λ_k(β))/t
  double fine = 0.0;    // same with t/2
  double richardson = 0.0;
};

FiniteDifference finite_difference_derivative(const OperatorPtr& op, const Weight& beta, int k,
                                              const Weight& b, double t);

struct MixResult {
  Eigen::VectorXd d;       // ascending eigenvalues of the mixing matrix
  Eigen::MatrixXd rotation;  // columns: w_i in the coordinates of the input basis
  Eigen::MatrixXd family;    // basis * rotation
};

// Rewrites Σ_α t_α v_α², v_α = basis * coeffs.col(α), as Σ_i d_i w_i² with (w_i)
// orthonormal whenever the basis is.
MixResult mix_weights(const Eigen::MatrixXd& basis, const Eigen::MatrixXd& coeffs,
                      const Eigen::VectorXd& t);

enum class Direction { min, max };
std::string to_string(Direction d);
Direction direction_from_string(const std::string& s);

struct ELCertificate {
  Direction direction = Direction::min;
  int k = 0;
  int r_or_s = 0;  // first (min) or last (max) index of the family
  double lambda_bar = 0.0;
  double p = 0.0;
  Eigen::VectorXd d;
  Eigen::MatrixXd family;         // grid values, Q(β,·)-orthonormal
  Eigen::VectorXd combination;    // Σ d_i v_i² on the grid
  Eigen::VectorXd residual_field;  // λ̄ (β^{p-1} - Σ d_i v_i²)
  double residual_norm = 0.0;      // L^{p'} norm of the negative (min) / positive (max) part
  double orth_error = 0.0;
};

struct CertificateOptions {
  int iterations = 200;
  int restarts = 6;
  unsigned long long seed = 7;
};

// β must satisfy ‖β‖_p = 1 up to the caller's tolerance.
ELCertificate el_certificate(const GenEigenResult& res, int k, double p, Direction dir,
                             const CertificateOptions& opt = {});
ELCertificate el_certificate(const OperatorPtr& op, const Weight& beta, int k, double p,
                             Direction dir, const CertificateOptions& opt = {});

}  // namespace confspec
