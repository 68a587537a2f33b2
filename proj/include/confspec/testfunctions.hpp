#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "confspec/constants.hpp"
#include "confspec/discretization.hpp"
#include "confspec/geneig.hpp"
#include "confspec/operator.hpp"

namespace confspec {

// Quintic smoothstep cutoff: 1 on [0,1], 0 on [2,∞), C² in between.
double smooth_cutoff(double r);

enum class BubbleVariant { plain, green };
std::string to_string(BubbleVariant v);
BubbleVariant bubble_variant_from_string(const std::string& s);

struct GluedBubble {
  ModelPtr model;
  DimPair dims;
  Eigen::RowVectorXd center;
  double eps = 0.0;
  double delta = 0.0;
  BubbleVariant variant = BubbleVariant::plain;
  GridFunction values;
  bool normalized = false;
  double raw_critical_mass = 0.0;  // ∫ |ũ_ε|^{2n/(n-2s)} before normalization
};

// Green's function of the operator at `center`, evaluated at the rows of pts.
// Sphere: b_{n,s}·|x-ξ|^{2s-n} (chordal). Torus with c > 0: periodic image sum for s = 1,
// Richardson-accelerated damped lattice Fourier sum otherwise.
Eigen::VectorXd green_function(const OperatorModel& op, const Eigen::RowVectorXd& center,
                               const Eigen::MatrixXd& pts);

GluedBubble build_glued_bubble(const OperatorModel& op, const Eigen::RowVectorXd& center,
                               double eps, double delta, BubbleVariant variant,
                               bool normalize = true);

// Admissible scale window [4h, δ/4].
struct EpsWindow {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double eps) const { return eps >= lo && eps <= hi; }
};
EpsWindow resolvable_window(const ManifoldModel& m, double delta);

// I(u) = G(u)/‖u‖²_{2n/(n-2s)} with G evaluated spectrally on the model.
double rayleigh_quotient(const OperatorModel& op, const GridFunction& u);
double spectral_energy(const OperatorModel& op, const GridFunction& u);

struct SweepRow {
  double eps = 0.0;
  double I = 0.0;
  double raw_critical_mass = 0.0;
  double aliasing = 0.0;
};

struct SweepTable {
  std::vector<SweepRow> rows;
  double limit = 0.0;         // extrapolated I as ε → 0
  double fitted_exponent = 0.0;  // a in |I - limit| ~ C ε^a (reference limit K^{-2})
};

SweepTable rayleigh_sweep(const OperatorModel& op, const std::vector<GluedBubble>& bubbles);

// Least-squares slope of log|y| against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct DemoRow {
  double eps = 0.0;
  double lambda = 0.0;
  double norm = 0.0;        // ‖β_ε‖_{n/2s}
  double lambda_bar = 0.0;  // λ_k(β_ε)·‖β_ε‖_{n/2s}
  bool resolvable = true;
};

struct DemoTable {
  int k = 0;
  std::vector<DemoRow> rows;
  bool strictly_monotone = false;  // increasing for k_+, decreasing for k_-
  int resolvable_rows = 0;
};

// β^{1/2s} = 1 - χ(d) + χ(d)/d and β_ε^{1/2s} = (1 - χ(d/ε))β^{1/2s} + χ(d/ε)/ε.
Weight unbounded_weight(const OperatorModel& op, const Eigen::RowVectorXd& center, double eps);
DemoTable unbounded_weight_demo(const OperatorPtr& op, const Eigen::RowVectorXd& center,
                                const std::vector<double>& eps_list, bool use_k_minus = false);

struct EnergyCheck {
  double energy = 0.0;     // I(φ)^{n/2s}
  double threshold = 0.0;  // 2 K^{-n/s}
  double residual = 0.0;   // relative residual of P φ = μ |φ|^{q-2} φ
  double mu = 0.0;
  bool sign_changing = false;
  bool passes = false;  // energy >= threshold (1 - tol) when sign-changing
};

// φ given by grid values on the operator's sphere model; q is the nonlinearity
// exponent (2n/(n-2s) for the critical equation).
EnergyCheck sign_changing_energy_check(const OperatorModel& op, const GridFunction& phi,
                                       double q, double residual_tol = 0.05,
                                       double energy_tol = 0.05, double sign_tol = 1e-3);

// κ c_t(x)^{(n-2s)/2} solving P u = u^{(n+2s)/(n-2s)}, concentrating at e₀ (or -e₀).
Eigen::VectorXd mobius_bubble(const OperatorModel& op, double t, bool south,
                              const Eigen::MatrixXd& pts);

}  // namespace confspec
