#include "confspec/testfunctions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/special_functions/bessel.hpp>

#include "confspec/errors.hpp"

namespace confspec {

double smooth_cutoff(double r) {
  if (r <= 1.0) return 1.0;
  if (r >= 2.0) return 0.0;
  const double x = r - 1.0;
  return 1.0 - x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
}

std::string to_string(BubbleVariant v) { return v == BubbleVariant::plain ? "plain" : "green"; }

BubbleVariant bubble_variant_from_string(const std::string& s) {
  if (s == "plain") return BubbleVariant::plain;
  if (s == "green") return BubbleVariant::green;
  throw InvalidConfig("variant must be plain or green, got '" + s + "'");
}

namespace {

// Green's function of -Δ + c on Rⁿ
double yukawa(int n, double c, double r) {
  const double m = std::sqrt(c);
  const double nu = 0.5 * n - 1.0;
  return std::pow(2.0 * std::numbers::pi, -0.5 * n) * std::pow(m / r, nu) *
         boost::math::cyl_bessel_k(nu, m * r);
}

double node_distance(const ManifoldModel& m, const Eigen::RowVectorXd& a,
                     const Eigen::RowVectorXd& b) {
  return m.distance(a, b);
}

}  // namespace

Eigen::VectorXd green_function(const OperatorModel& op, const Eigen::RowVectorXd& center,
                               const Eigen::MatrixXd& pts) {
  const ManifoldModel& m = *op.manifold;
  const int n = m.n(), s = op.dims.s;
  Eigen::VectorXd G(pts.rows());
  if (m.kind() == ManifoldKind::sphere) {
    const double b = green_constant(op.dims);
    for (Eigen::Index q = 0; q < pts.rows(); ++q) {
      const double chord = std::sqrt(std::max(2.0 - 2.0 * pts.row(q).dot(center), 1e-28));
      G[q] = b * std::pow(chord, 2.0 * s - n);
    }
    return G;
  }
  if (!(op.shift_c > 0.0)) throw DomainError("torus Green's function needs c > 0");
  if (s != 1) throw DomainError("torus Green's function is implemented for s = 1");
  const double period = 2.0 * std::numbers::pi;
  const int reach = static_cast<int>(std::ceil(40.0 / (std::sqrt(op.shift_c) * period))) + 1;
#pragma omp parallel for
  for (Eigen::Index q = 0; q < pts.rows(); ++q) {
    Eigen::VectorXd d(n);
    for (int i = 0; i < n; ++i) {
      double x = std::fmod(pts(q, i) - center[i], period);
      if (x > 0.5 * period) x -= period;
      if (x < -0.5 * period) x += period;
      d[i] = x;
    }
    std::vector<int> k(n, -reach);
    double acc = 0.0;
    while (true) {
      double r2 = 0.0;
      for (int i = 0; i < n; ++i) {
        const double y = d[i] + period * k[i];
        r2 += y * y;
      }
      acc += yukawa(n, op.shift_c, std::max(std::sqrt(r2), 1e-7));
      int i = 0;
      while (i < n && ++k[i] > reach) k[i++] = -reach;
      if (i == n) break;
    }
    G[q] = acc;
  }
  return G;
}

GluedBubble build_glued_bubble(const OperatorModel& op, const Eigen::RowVectorXd& center,
                               double eps, double delta, BubbleVariant variant, bool normalize) {
  const ModelPtr& model = op.manifold;
  require_admissible(op.dims);
  if (!(eps > 0.0 && delta > 0.0)) throw PreconditionViolation("eps and delta must be positive");
  if (eps < 2.0 * model->grid_spacing())
    throw PreconditionViolation("bubble scale below the grid resolution");
  if (2.0 * delta >= model->injectivity_radius())
    throw PreconditionViolation("cutoff radius exceeds the injectivity scale");
  if (variant == BubbleVariant::green && model->kind() == ManifoldKind::torus &&
      !(op.shift_c > 0.0))
    throw DomainError("green-corrected torus bubble needs c > 0");
  const int n = op.dims.n, s = op.dims.s;
  const double e = 0.5 * (n - 2.0 * s);
  const BubbleProfile B = standard_bubble(op.dims);
  const Grid& g = model->grid();
  const Eigen::Index nq = g.weights.size();

  GluedBubble out;
  out.model = model;
  out.dims = op.dims;
  out.center = center;
  out.eps = eps;
  out.delta = delta;
  out.variant = variant;
  Eigen::VectorXd u(nq);
  Eigen::VectorXd green;
  if (variant == BubbleVariant::green) green = green_function(op, center, g.coords);
  const double b = green_constant(op.dims);
  const double gamma_e = std::pow(B.gamma, e);
  for (Eigen::Index q = 0; q < nq; ++q) {
    const double d = node_distance(*model, g.coords.row(q), center);
    const double chi = smooth_cutoff(d / delta);
    double v = chi * std::pow(eps, -e) * bubble_radial(B, d / eps);
    if (variant == BubbleVariant::plain) {
      v += (1.0 - chi) * std::pow(eps, e);
    } else {
      const double singular = b * std::pow(std::max(d, 1e-7), 2.0 * s - n);
      v += gamma_e / b * std::pow(eps, e) * (green[q] - chi * singular);
    }
    u[q] = v;
  }
  const double q2 = critical_exponent(op.dims);
  out.raw_critical_mass = (g.weights.array() * u.array().abs().pow(q2)).sum();
  if (normalize) {
    u /= std::pow(out.raw_critical_mass, 1.0 / q2);
    out.normalized = true;
  }
  out.values = GridFunction{model, u};
  return out;
}

EpsWindow resolvable_window(const ManifoldModel& m, double delta) {
  return EpsWindow{4.0 * m.grid_spacing(), 0.25 * delta};
}

double spectral_energy(const OperatorModel& op, const GridFunction& u) {
  if (u.model != op.manifold) throw ModelMismatch("function and operator use different models");
  // axial models represent zonal functions, which live in block 0
  const CoefVector c = analyze(u, 0);
  return (op.multiplier[0].array() * c.coef.array().square()).sum();
}

double rayleigh_quotient(const OperatorModel& op, const GridFunction& u) {
  const double q = critical_exponent(op.dims);
  const double nrm = lp_norm(u, q);
  if (!(nrm > 0.0)) throw PreconditionViolation("zero test function");
  return spectral_energy(op, u) / (nrm * nrm);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw PreconditionViolation("slope fit needs >= 2 points");
  const Eigen::Index m = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd A(m, 2);
  Eigen::VectorXd b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    A(i, 0) = 1.0;
    A(i, 1) = std::log(x[i]);
    b[i] = std::log(std::abs(y[i]));
  }
  return A.colPivHouseholderQr().solve(b)[1];
}

SweepTable rayleigh_sweep(const OperatorModel& op, const std::vector<GluedBubble>& bubbles) {
  SweepTable t;
  if (bubbles.empty()) return t;
  for (const auto& b : bubbles)
    if (b.model != op.manifold) throw ModelMismatch("bubbles must share the operator's model");
  for (const auto& b : bubbles) {
    SweepRow r;
    r.eps = b.eps;
    r.I = rayleigh_quotient(op, b.values);
    r.raw_critical_mass = b.raw_critical_mass;
    r.aliasing = aliasing_residual(b.values);
    t.rows.push_back(r);
  }
  const double ref = sobolev_constant_sq_inv(op.dims);
  std::vector<double> e, d;
  for (const auto& r : t.rows) {
    e.push_back(r.eps);
    d.push_back(std::max(std::abs(r.I - ref), 1e-300));
  }
  t.fitted_exponent = t.rows.size() >= 2 ? loglog_slope(e, d) : 0.0;
  // linear fit of I against ε^a
  if (t.rows.size() >= 2 && t.fitted_exponent > 0.0) {
    const Eigen::Index m = static_cast<Eigen::Index>(t.rows.size());
    Eigen::MatrixXd A(m, 2);
    Eigen::VectorXd y(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      A(i, 0) = 1.0;
      A(i, 1) = std::pow(t.rows[i].eps, t.fitted_exponent);
      y[i] = t.rows[i].I;
    }
    t.limit = A.colPivHouseholderQr().solve(y)[0];
  } else {
    t.limit = t.rows.back().I;
  }
  return t;
}

Weight unbounded_weight(const OperatorModel& op, const Eigen::RowVectorXd& center, double eps) {
  const ModelPtr& m = op.manifold;
  const Grid& g = m->grid();
  const int s = op.dims.s;
  Eigen::VectorXd v(g.weights.size());
  for (Eigen::Index q = 0; q < v.size(); ++q) {
    const double d = node_distance(*m, g.coords.row(q), center);
    const double chi = smooth_cutoff(d);
    const double base = d > 0.0 ? 1.0 - chi + chi / d : 0.0;
    const double ce = smooth_cutoff(d / eps);
    const double root = (1.0 - ce) * base + ce / eps;
    v[q] = std::pow(root, 2.0 * s);
  }
  return grid_weight(m, std::move(v), Provenance::singular_family);
}

DemoTable unbounded_weight_demo(const OperatorPtr& op, const Eigen::RowVectorXd& center,
                                const std::vector<double>& eps_list, bool use_k_minus) {
  DemoTable t;
  t.k = use_k_minus ? static_cast<int>(op->k_minus) : static_cast<int>(op->k_plus);
  if (t.k < 1) throw PreconditionViolation("backend has no eigenvalue of the requested sign");
  const double e = op->manifold->n() / (2.0 * op->dims.s);
  const double h = op->manifold->grid_spacing();
  std::vector<double> eps = eps_list;
  std::sort(eps.begin(), eps.end(), std::greater<>());
  for (double ep : eps) {
    DemoRow r;
    r.eps = ep;
    r.resolvable = ep >= 2.0 * h;
    const Weight w = unbounded_weight(*op, center, ep);
    const GenEigenResult res = solve_pencil(op, w, t.k);
    r.lambda = res.lambda(t.k);
    r.norm = w.norm(e);
    r.lambda_bar = r.lambda * r.norm;
    t.rows.push_back(r);
  }
  std::vector<double> vals;
  for (const auto& r : t.rows)
    if (r.resolvable) vals.push_back(r.lambda_bar);
  t.resolvable_rows = static_cast<int>(vals.size());
  t.strictly_monotone = vals.size() >= 2;
  for (size_t i = 1; i < vals.size(); ++i)
    t.strictly_monotone = t.strictly_monotone &&
                          (use_k_minus ? vals[i] < vals[i - 1] : vals[i] > vals[i - 1]);
  return t;
}

EnergyCheck sign_changing_energy_check(const OperatorModel& op, const GridFunction& phi,
                                       double q, double residual_tol, double energy_tol,
                                       double sign_tol) {
  if (op.manifold->kind() != ManifoldKind::sphere)
    throw InvalidConfig("the energy check runs on the sphere backend");
  require_admissible(op.dims);
  const int s = op.dims.s;
  const double crit = critical_exponent(op.dims);
  EnergyCheck out;
  out.threshold = 2.0 * std::pow(sobolev_constant_sq_inv(op.dims), op.dims.n / (2.0 * s));

  const CoefVector c = analyze(phi, 0);
  const Eigen::VectorXd Pc = op.multiplier[0].cwiseProduct(c.coef);
  Eigen::VectorXd f(phi.values.size());
  for (Eigen::Index i = 0; i < f.size(); ++i)
    f[i] = std::pow(std::abs(phi.values[i]), q - 2.0) * phi.values[i];
  const Eigen::VectorXd fc = analyze(GridFunction{phi.model, f}, 0).coef;
  const Eigen::VectorXd w =
      (1.0 + op.manifold->blocks()[0].laplace.array()).pow(-0.5 * s).matrix();
  const Eigen::VectorXd a = Pc.cwiseProduct(w), b = fc.cwiseProduct(w);
  out.mu = a.dot(b) / b.squaredNorm();
  out.residual = (a - out.mu * b).norm() / a.norm();
  if (out.residual > residual_tol)
    throw PreconditionViolation("input is not a numerical solution (residual " +
                                std::to_string(out.residual) + ")");

  const double nrm = lp_norm(phi, crit);
  const double I = (op.multiplier[0].array() * c.coef.array().square()).sum() / (nrm * nrm);
  out.energy = std::pow(I, op.dims.n / (2.0 * s));
  const GridFunction pos{phi.model, phi.values.cwiseMax(0.0)};
  const GridFunction neg{phi.model, (-phi.values).cwiseMax(0.0)};
  out.sign_changing = lp_norm(pos, crit) > sign_tol * nrm && lp_norm(neg, crit) > sign_tol * nrm;
  out.passes = out.sign_changing && out.energy >= out.threshold * (1.0 - energy_tol);
  return out;
}

Eigen::VectorXd mobius_bubble(const OperatorModel& op, double t, bool south,
                              const Eigen::MatrixXd& pts) {
  if (op.manifold->kind() != ManifoldKind::sphere) throw InvalidConfig("sphere backend required");
  require_admissible(op.dims);
  Eigen::MatrixXd p = pts;
  if (south) p.col(0) = -p.col(0);
  const Eigen::VectorXd c = Dilation{t}.factor(p);
  const double n = op.dims.n, s = op.dims.s;
  const double kappa = std::pow(sphere_gjms_eigenvalue(op.dims, 0), (n - 2 * s) / (4 * s));
  return kappa * c.array().pow(0.5 * (n - 2 * s)).matrix();
}

}  // namespace confspec
