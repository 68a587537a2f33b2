#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "confspec/constants.hpp"
#include "confspec/discretization.hpp"
#include "confspec/operator.hpp"

namespace confspec {

// ½ Λ₁(Sⁿ)^{n/2s} = ½ K_{n,s}^{-n/s}. For n = 2s the two-dimensional analogue
// ½ λ₁(S²)·|S²| = 4π is used.
double concentration_threshold(const DimPair& d);

struct ScaledWeight {
  double lambda = 1.0;  // eigenvalue absorbed into the weight
  Weight beta;
};

struct ConcentrationReport {
  double threshold = 0.0;
  double delta = 0.0;
  Eigen::MatrixXd flagged_points;  // rows in grid coordinates
  std::vector<double> flagged_masses;
  Eigen::VectorXd local_masses;  // limsup over the sequence, one per node
  std::string sequence_tag;
  int snapshots = 0;
  double total_mass = 0.0;  // max over the sequence of ∫ |λβ|^{n/2s}

  int flag_count() const { return static_cast<int>(flagged_masses.size()); }
};

// Scans ∫_{B(x,δ)} |λβ|^{n/2s} over every node x, takes the max over the last
// `window` members of the sequence, flags exceedances and merges flags whose balls overlap.
ConcentrationReport detect_concentration(const std::vector<ScaledWeight>& sequence, int s,
                                         double delta, int window = 5,
                                         const std::string& tag = "");
ConcentrationReport detect_concentration_serial(const std::vector<ScaledWeight>& sequence, int s,
                                                double delta, int window = 5,
                                                const std::string& tag = "");

// Fraction of the orbit {θ = θ_q} of S^n lying in the geodesic ball of radius δ
// around a point at polar angle θ_x.
double orbit_ball_fraction(int n, double theta_x, double theta_q, double delta);

struct InvariantEntry {
  double value = 0.0;
  bool attained = false;
};

struct InvariantTable {
  DimPair dims;
  int k_plus = 1;
  std::vector<InvariantEntry> manifold;  // index ℓ = 1, 2, ...
  std::vector<InvariantEntry> sphere;    // index ℓ = 1, 2, ...
};

struct Partition {
  int l0 = 0;
  std::vector<int> sphere_parts;  // nonincreasing
};

struct XYResult {
  double X = 0.0;  // +∞ when no admissible partition exists
  double Y = 0.0;
  double X_pow = 0.0;  // X^{n/2s}
  double Y_pow = 0.0;
  Partition x_partition;
  Partition y_partition;
  bool x_admissible = false;
};

XYResult compute_X_Y(const InvariantTable& table, int k);

// Sphere invariants: Λ₁ exact (attained), Λ₂ = 2^{2s/n}Λ₁ (not attained), and the
// given numerical estimates for higher indices.
InvariantTable sphere_invariant_table(const DimPair& d, const std::vector<InvariantEntry>& higher);

struct KernelEscapeReport {
  std::vector<double> kernel_norms;
  std::vector<double> complement_hs_norms;
  std::vector<double> kernel_ratio;
  std::vector<double> beta_norms;  // ‖β‖_{n/2s}
  bool kernel_trivial = true;
  bool unbounded_regime = false;
};

// φ_sequence: coefficient vectors on block 0 of the operator's model; β_sequence may be empty.
KernelEscapeReport kernel_escape_diagnostic(const OperatorModel& op,
                                            const std::vector<Eigen::VectorXd>& phi_sequence,
                                            const std::vector<Weight>& beta_sequence = {});

}  // namespace confspec
