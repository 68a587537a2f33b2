#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "confspec/discretization.hpp"
#include "confspec/geneig.hpp"
#include "confspec/operator.hpp"
#include "confspec/variation.hpp"

namespace confspec {

struct OptimizerConfig {
  int k = 1;
  Direction direction = Direction::min;
  std::vector<double> p_schedule;
  double theta = 0.5;
  int max_iters = 2000;  // per exponent
  double tol_fun = 1e-12;
  double tol_residual = 1e-4;
  double floor_eps = 0.0;
  unsigned long long seed = 1;
  double seed_amplitude = 0.05;
  std::optional<Eigen::VectorXd> seed_values;  // grid values of β₀ (overrides the random seed)
  int snapshots = 5;                           // β snapshots kept from the schedule tail
  CertificateOptions step_certificate{60, 2, 7};
};

void validate(const OptimizerConfig& cfg, const OperatorModel& op);

enum class StageStatus { converged, stalled, blowup_suspected, max_iters };
std::string to_string(StageStatus s);

struct OptimizerState {
  Weight beta;  // ‖β‖_p = 1
  double p = 0.0;
  double lambda_bar = 0.0;
  double theta = 0.5;
  std::vector<double> history;  // accepted λ̄ values
  std::vector<double> residual_history;
  std::vector<double> cluster;  // eigenvalues of the cluster of λ_k
  int iterations = 0;
  int rejections = 0;
  StageStatus status = StageStatus::max_iters;
  bool done = false;
  std::optional<GenEigenResult> solution;  // spectrum of the current β
};

Weight normalize_weight(const Weight& beta, double p, double floor_eps = 0.0);
Weight seed_weight(const OperatorModel& op, const OptimizerConfig& cfg);
OptimizerState initial_state(const OperatorPtr& op, const OptimizerConfig& cfg, double p,
                             const Weight& beta0);

// One damped Euler–Lagrange step. Returns true when the step was accepted.
bool el_step(const OperatorPtr& op, const OptimizerConfig& cfg, OptimizerState& st);

// Runs el_step at fixed p until convergence, stall or the iteration cap.
void optimize_at(const OperatorPtr& op, const OptimizerConfig& cfg, OptimizerState& st);

struct StageRecord {
  double p = 0.0;
  double lambda_bar = 0.0;
  double lambda = 0.0;
  double residual = 0.0;
  int iterations = 0;
  int rejections = 0;
  StageStatus status = StageStatus::max_iters;
  std::vector<double> cluster;
  std::vector<double> history;
};

struct Extrapolation {
  double value = 0.0;
  double slope = 0.0;
  double fit_residual = 0.0;
  int points = 0;
};

struct Snapshot {
  double p = 0.0;
  double lambda = 0.0;
  Weight beta;
};

struct ContinuationResult {
  std::vector<StageRecord> stages;
  Extrapolation extrapolation;
  bool holder_consistent = true;
  bool monotone_iterates = true;
  std::vector<Snapshot> tail;  // last cfg.snapshots stages
  OptimizerState final_state;
  ELCertificate final_certificate;
};

ContinuationResult continuation(const OperatorPtr& op, const OptimizerConfig& cfg);

// Linear fit of (p - p0, value) over the last `points` entries, evaluated at p0.
Extrapolation extrapolate(const std::vector<double>& p, const std::vector<double>& v, double p0,
                          int points = 3);

enum class Verdict { attained, not_attained_bubbling, inconclusive };
std::string to_string(Verdict v);

struct ConcentrationReport;

struct VerdictReport {
  Verdict verdict = Verdict::inconclusive;
  double residual = 0.0;
  int flags = 0;
  double reference = 0.0;     // comparison threshold (e.g. a Y_k-type value), 0 if none
  double relative_gap = 0.0;  // (extrapolated - reference)/reference
};

VerdictReport attainment_verdict(const ContinuationResult& run, const ConcentrationReport& conc,
                                 double tol_residual, double reference = 0.0,
                                 double reference_tol = 0.05);

// k well-separated unit vectors in R^{dim} (deterministic repulsion from a seeded start).
Eigen::MatrixXd spread_points(int dim, int k, unsigned long long seed = 1);

// Σ_i exp(-|x - x_i|²/w²) + floor on the grid of a full sphere model.
Eigen::VectorXd bump_seed(const ManifoldModel& m, const Eigen::MatrixXd& points, double width,
                          double floor = 0.05);

struct EstimateOptions {
  int iters = 300;  // per exponent
  double bump_width = 0.5;
  std::vector<double> offsets{0.5, 0.3, 0.15, 0.05};  // p - n/2s
  unsigned long long seed = 1;
};

struct InvariantEstimate {
  int k = 0;
  double value = 0.0;       // extrapolated to p = n/2s
  double last_stage = 0.0;  // λ̄ at the smallest scheduled p
  double residual = 0.0;
  bool converged = false;   // every stage converged
  int flags = 0;            // concentration flags on the schedule tail
  double delta = 0.0;
};

// Resolution-limited estimate of Λ_k(Sⁿ) from a continuation run seeded with k bumps.
InvariantEstimate estimate_sphere_invariant(const OperatorPtr& op, int k,
                                            const EstimateOptions& opt = {});

}  // namespace confspec
