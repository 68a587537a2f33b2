#include "confspec/operator.hpp"

#include <algorithm>
#include <cmath>

#include "confspec/errors.hpp"
#include "confspec/kernels.hpp"

namespace confspec {

double OperatorModel::min_multiplier() const {
  double m = multiplier[0].minCoeff();
  for (const auto& v : multiplier) m = std::min(m, v.minCoeff());
  return m;
}

OperatorPtr make_operator(const ModelPtr& model, int s, double c, double tol_rel) {
  if (s < 1) throw DomainError("operator order s must be >= 1");
  auto op = std::make_shared<OperatorModel>();
  op->manifold = model;
  op->dims = DimPair{model->n(), s};
  if (model->kind() == ManifoldKind::sphere) {
    require_admissible(op->dims);
    if (c != 0.0) throw InvalidConfig("the sphere operator has no free shift");
  }
  op->shift_c = c;
  double maxabs = 0.0;
  for (const auto& b : model->blocks()) {
    Eigen::VectorXd m(b.degree.size());
    for (size_t i = 0; i < b.degree.size(); ++i) {
      if (model->kind() == ManifoldKind::sphere)
        m[i] = sphere_gjms_eigenvalue(op->dims, b.degree[i]);
      else
        m[i] = std::pow(static_cast<double>(b.degree[i]), s) + c;  // |m|^{2s} = (|m|^2)^s
    }
    maxabs = std::max(maxabs, m.cwiseAbs().maxCoeff());
    op->multiplier.push_back(std::move(m));
  }
  op->tol_ker = tol_rel * maxabs;
  const SpectrumClass sc = classify_spectrum(*op, op->tol_ker);
  op->k_minus = sc.k_minus;
  op->k_plus = sc.k_plus;
  for (int b = 0; b < model->block_count(); ++b)
    for (int i = 0; i < op->multiplier[b].size(); ++i)
      if (std::abs(op->multiplier[b][i]) <= op->tol_ker) op->kernel_indices.emplace_back(b, i);
  return op;
}

CoefVector stiffness_apply(const OperatorModel& op, const CoefVector& c) {
  if (c.model != op.manifold) throw ModelMismatch("coefficients belong to another model");
  return CoefVector{c.model, c.block, op.multiplier[c.block].cwiseProduct(c.coef)};
}

double quadratic_form(const OperatorModel& op, const CoefVector& c) {
  if (c.model != op.manifold) throw ModelMismatch("coefficients belong to another model");
  return (op.multiplier[c.block].array() * c.coef.array().square()).sum();
}

SpectrumClass classify_spectrum(const OperatorModel& op, double tol_ker) {
  if (!(tol_ker > 0.0)) throw InvalidConfig("tol_ker must be positive");
  SpectrumClass sc;
  sc.k_minus = 0;
  sc.ker_dim = 0;
  for (int b = 0; b < op.manifold->block_count(); ++b) {
    const double mult = op.manifold->blocks()[b].multiplicity;
    for (int i = 0; i < op.multiplier[b].size(); ++i) {
      const double v = op.multiplier[b][i];
      if (v < -tol_ker) sc.k_minus += mult;
      else if (std::abs(v) <= tol_ker) sc.ker_dim += mult;
    }
  }
  sc.k_plus = sc.k_minus + sc.ker_dim + 1;
  return sc;
}

std::vector<double> first_eigenvalues(const OperatorModel& op, int count) {
  std::vector<std::pair<double, double>> all;
  for (int b = 0; b < op.manifold->block_count(); ++b)
    for (int i = 0; i < op.multiplier[b].size(); ++i)
      all.emplace_back(op.multiplier[b][i], op.manifold->blocks()[b].multiplicity);
  std::sort(all.begin(), all.end());
  std::vector<double> out;
  for (const auto& [v, mult] : all)
    for (int r = 0; r < mult && static_cast<int>(out.size()) < count; ++r) out.push_back(v);
  return out;
}

namespace {

// stereographic chart from -e_0: x = y'/(1+y_0)
Eigen::MatrixXd scale_points(const Eigen::MatrixXd& pts, double lam) {
  Eigen::MatrixXd out(pts.rows(), pts.cols());
  for (Eigen::Index q = 0; q < pts.rows(); ++q) {
    const double y0 = pts(q, 0);
    const Eigen::RowVectorXd yp = pts.row(q).tail(pts.cols() - 1);
    // |x|^2 = (1-y0)/(1+y0); with x -> lam x
    const double den = 1.0 + y0 + lam * lam * (1.0 - y0);
    out(q, 0) = (1.0 + y0 - lam * lam * (1.0 - y0)) / den;
    out.row(q).tail(pts.cols() - 1) = 2.0 * lam * yp / den;
    out.row(q) /= out.row(q).norm();
  }
  return out;
}

}  // namespace

Eigen::MatrixXd Dilation::apply(const Eigen::MatrixXd& pts) const {
  return scale_points(pts, std::exp(t));
}

Eigen::MatrixXd Dilation::inverse(const Eigen::MatrixXd& pts) const {
  return scale_points(pts, std::exp(-t));
}

Eigen::VectorXd Dilation::factor(const Eigen::MatrixXd& pts) const {
  const double lam = std::exp(t);
  Eigen::VectorXd c(pts.rows());
  for (Eigen::Index q = 0; q < pts.rows(); ++q) {
    const double y0 = pts(q, 0);
    c[q] = 2.0 * lam / (1.0 + y0 + lam * lam * (1.0 - y0));
  }
  return c;
}

CovarianceReport conformal_covariance_residual(const OperatorModel& op, const Dilation& psi,
                                               const Eigen::VectorXd& f_coef, double oversample) {
  const ModelPtr& base = op.manifold;
  if (base->kind() != ManifoldKind::sphere || base->axial())
    throw InvalidConfig("conformal covariance check needs the full sphere backend");
  ModelSpec spec = base->spec();
  spec.quad_density = std::max(spec.quad_density, oversample);
  const ModelPtr fine = ManifoldModel::build(spec);
  const Grid& g = fine->grid();
  const int n = op.dims.n, s = op.dims.s;
  const Eigen::VectorXd& mult = op.multiplier[0];

  const Eigen::VectorXd u = psi.factor(g.coords).array().pow(0.5 * (n - 2.0 * s));
  for (Eigen::Index q = 0; q < u.size(); ++q)
    if (!(u[q] > 0.0)) throw PreconditionViolation("conformal factor must be positive");

  // left: (P (f∘ψ^{-1})) ∘ ψ
  const Eigen::MatrixXd back = psi.inverse(g.coords);
  const Eigen::VectorXd f_back = fine->evaluate_block(0, back) * f_coef;
  const Eigen::VectorXd c1 = kernels::project(g.phi[0], g.weights, f_back).cwiseProduct(mult);
  const Eigen::VectorXd left = fine->evaluate_block(0, psi.apply(g.coords)) * c1;

  // right: u^{-(n+2s)/(n-2s)} P(u f)
  const Eigen::VectorXd f = g.phi[0] * f_coef;
  const Eigen::VectorXd c2 =
      kernels::project(g.phi[0], g.weights, u.cwiseProduct(f)).cwiseProduct(mult);
  const Eigen::VectorXd right =
      (g.phi[0] * c2).array() * u.array().pow(-(n + 2.0 * s) / (n - 2.0 * s));

  CovarianceReport r;
  r.truncation = base->truncation();
  r.reference_norm = std::sqrt((g.weights.array() * right.array().square()).sum());
  const double diff = std::sqrt((g.weights.array() * (left - right).array().square()).sum());
  r.residual = r.reference_norm > 0.0 ? diff / r.reference_norm : diff;
  return r;
}

double zero_set_fraction(const GridFunction& v, double tol) {
  const double m = v.values.cwiseAbs().maxCoeff();
  if (m == 0.0) return 1.0;
  return static_cast<double>((v.values.array().abs() <= tol * m).count()) / v.values.size();
}

}  // namespace confspec
