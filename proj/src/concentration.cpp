#include "confspec/concentration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <boost/math/special_functions/beta.hpp>

#include "confspec/errors.hpp"
#include "confspec/kernels.hpp"

namespace confspec {

double concentration_threshold(const DimPair& d) {
  if (d.n == 2 * d.s) return 4.0 * std::numbers::pi;
  return 0.5 * std::pow(sobolev_constant_sq_inv(d), d.n / (2.0 * d.s));
}

double orbit_ball_fraction(int n, double theta_x, double theta_q, double delta) {
  const double sx = std::sin(theta_x), sq = std::sin(theta_q);
  if (sx * sq < 1e-14) return std::abs(theta_x - theta_q) < delta ? 1.0 : 0.0;
  const double c = (std::cos(delta) - std::cos(theta_x) * std::cos(theta_q)) / (sx * sq);
  if (c <= -1.0) return 1.0;
  if (c >= 1.0) return 0.0;
  const double a = 0.5 * (n - 1);
  return boost::math::ibeta(a, a, 0.5 * (1.0 - c));
}

namespace {

struct Scan {
  const ManifoldModel& model;
  double delta;
  double cos_delta;
  Eigen::MatrixXd axial_overlap;
  Eigen::VectorXd theta;

  Scan(const ManifoldModel& m, double d) : model(m), delta(d), cos_delta(std::cos(d)) {
    const Grid& g = m.grid();
    if (m.axial()) {
      const Eigen::Index nq = g.weights.size();
      theta = g.coords.col(0).array().max(-1.0).min(1.0).acos();
      axial_overlap.resize(nq, nq);
#pragma omp parallel for schedule(dynamic, 8)
      for (Eigen::Index i = 0; i < nq; ++i)
        for (Eigen::Index q = 0; q < nq; ++q)
          axial_overlap(i, q) = orbit_ball_fraction(m.n(), theta[i], theta[q], delta);
    }
  }

  double operator()(int i, Eigen::Index q) const {
    const Grid& g = model.grid();
    if (model.axial()) return axial_overlap(i, q);
    if (model.kind() == ManifoldKind::sphere)
      return g.coords.row(i).dot(g.coords.row(q)) > cos_delta ? 1.0 : 0.0;
    return model.distance(g.coords.row(i), g.coords.row(q)) < delta ? 1.0 : 0.0;
  }

  double separation(int i, int j) const {
    if (model.axial()) return std::abs(theta[i] - theta[j]);
    const Grid& g = model.grid();
    return model.distance(g.coords.row(i), g.coords.row(j));
  }
};

ConcentrationReport detect_impl(const std::vector<ScaledWeight>& sequence, int s, double delta,
                                int window, const std::string& tag, bool parallel) {
  if (sequence.empty()) throw PreconditionViolation("empty weight sequence");
  if (!(delta > 0.0)) throw PreconditionViolation("delta must be positive");
  if (window < 1) throw PreconditionViolation("window must be >= 1");
  const ModelPtr& model = sequence.front().beta.model;
  for (const auto& w : sequence)
    if (w.beta.model != model) throw ModelMismatch("weights live on different models");
  if (delta >= model->injectivity_radius())
    throw PreconditionViolation("delta exceeds the injectivity scale of the model");

  const DimPair dims{model->n(), s};
  const double e = model->n() / (2.0 * s);
  ConcentrationReport rep;
  rep.threshold = concentration_threshold(dims);
  rep.delta = delta;
  rep.sequence_tag = tag;
  const Grid& g = model->grid();
  const int nq = static_cast<int>(g.weights.size());
  const Scan scan(*model, delta);
  rep.local_masses = Eigen::VectorXd::Zero(nq);
  const size_t first = sequence.size() > static_cast<size_t>(window) ? sequence.size() - window : 0;
  for (size_t j = first; j < sequence.size(); ++j) {
    const Eigen::VectorXd& b = sequence[j].beta.grid_values();
    const double lam = std::abs(sequence[j].lambda);
    Eigen::VectorXd wg(nq);
    for (int q = 0; q < nq; ++q) wg[q] = g.weights[q] * std::pow(lam * b[q], e);
    rep.total_mass = std::max(rep.total_mass, wg.sum());
    const Eigen::VectorXd m = parallel ? kernels::local_masses(nq, wg, scan)
                                       : kernels::local_masses_serial(nq, wg, scan);
    rep.local_masses = rep.local_masses.cwiseMax(m);
    ++rep.snapshots;
  }

  std::vector<int> cand;
  for (int i = 0; i < nq; ++i)
    if (rep.local_masses[i] > rep.threshold) cand.push_back(i);
  std::stable_sort(cand.begin(), cand.end(),
                   [&](int a, int b) { return rep.local_masses[a] > rep.local_masses[b]; });
  // overlapping balls describe the same concentration point
  std::vector<int> kept;
  for (int i : cand) {
    bool near = false;
    for (int j : kept) near = near || scan.separation(i, j) < 2.0 * delta;
    if (!near) kept.push_back(i);
  }
  rep.flagged_points.resize(kept.size(), g.coords.cols());
  for (size_t i = 0; i < kept.size(); ++i) {
    rep.flagged_points.row(i) = g.coords.row(kept[i]);
    rep.flagged_masses.push_back(rep.local_masses[kept[i]]);
  }
  return rep;
}

}  // namespace

ConcentrationReport detect_concentration(const std::vector<ScaledWeight>& sequence, int s,
                                         double delta, int window, const std::string& tag) {
  return detect_impl(sequence, s, delta, window, tag, true);
}

ConcentrationReport detect_concentration_serial(const std::vector<ScaledWeight>& sequence, int s,
                                                double delta, int window,
                                                const std::string& tag) {
  return detect_impl(sequence, s, delta, window, tag, false);
}

namespace {

struct Knapsack {
  std::vector<double> best;
  std::vector<int> choice;
};

Knapsack sphere_knapsack(const std::vector<double>& pw, const std::vector<bool>& allowed, int N) {
  const double inf = std::numeric_limits<double>::infinity();
  Knapsack ks{std::vector<double>(N + 1, inf), std::vector<int>(N + 1, 0)};
  ks.best[0] = 0.0;
  for (int t = 1; t <= N; ++t)
    for (int l = 1; l <= t; ++l) {
      if (!allowed[l] || !std::isfinite(ks.best[t - l])) continue;
      const double v = pw[l] + ks.best[t - l];
      if (v < ks.best[t]) {
        ks.best[t] = v;
        ks.choice[t] = l;
      }
    }
  return ks;
}

std::vector<int> unwind(const Knapsack& ks, int t) {
  std::vector<int> parts;
  while (t > 0) {
    parts.push_back(ks.choice[t]);
    t -= ks.choice[t];
  }
  std::sort(parts.begin(), parts.end(), std::greater<>());
  return parts;
}

}  // namespace

XYResult compute_X_Y(const InvariantTable& table, int k) {
  if (k < table.k_plus) throw PreconditionViolation("X_k and Y_k need k >= k_plus");
  if (table.k_plus < 1) throw PreconditionViolation("k_plus must be >= 1");
  const int need_sphere = k;
  if (static_cast<int>(table.sphere.size()) < need_sphere ||
      static_cast<int>(table.manifold.size()) < k - 1)
    throw PreconditionViolation("incomplete invariant table");
  const double e = table.dims.n / (2.0 * table.dims.s);
  auto pw = [&](double v) {
    if (v < 0.0) throw PreconditionViolation("negative invariant above k_plus");
    return std::pow(v, e);
  };
  std::vector<double> sp(need_sphere + 1, 0.0);
  std::vector<bool> all(need_sphere + 1, true), att(need_sphere + 1, false);
  for (int l = 1; l <= need_sphere; ++l) {
    sp[l] = pw(table.sphere[l - 1].value);
    att[l] = table.sphere[l - 1].attained;
  }
  const Knapsack kx = sphere_knapsack(sp, att, need_sphere);
  const Knapsack ky = sphere_knapsack(sp, all, need_sphere);

  const double inf = std::numeric_limits<double>::infinity();
  XYResult out;
  out.X_pow = out.Y_pow = inf;
  auto consider = [&](int l0, double base, int target, bool x_ok) {
    if (target < 1) return;
    if (x_ok && base + kx.best[target] < out.X_pow) {
      out.X_pow = base + kx.best[target];
      out.x_partition = Partition{l0, unwind(kx, target)};
    }
    if (base + ky.best[target] < out.Y_pow) {
      out.Y_pow = base + ky.best[target];
      out.y_partition = Partition{l0, unwind(ky, target)};
    }
  };
  consider(0, 0.0, k - table.k_plus + 1, true);
  for (int l0 = table.k_plus; l0 <= k - 1; ++l0) {
    const InvariantEntry& m = table.manifold[l0 - 1];
    consider(l0, pw(m.value), k - l0, m.attained);
  }
  out.x_admissible = std::isfinite(out.X_pow);
  out.X = out.x_admissible ? std::pow(out.X_pow, 1.0 / e) : inf;
  out.Y = std::pow(out.Y_pow, 1.0 / e);
  return out;
}

InvariantTable sphere_invariant_table(const DimPair& d,
                                      const std::vector<InvariantEntry>& higher) {
  InvariantTable t;
  t.dims = d;
  t.k_plus = 1;
  const double l1 = sobolev_constant_sq_inv(d);
  t.sphere.push_back({l1, true});
  t.sphere.push_back({std::pow(2.0, 2.0 * d.s / d.n) * l1, false});
  for (const auto& h : higher) t.sphere.push_back(h);
  t.manifold = t.sphere;
  return t;
}

KernelEscapeReport kernel_escape_diagnostic(const OperatorModel& op,
                                            const std::vector<Eigen::VectorXd>& phi_sequence,
                                            const std::vector<Weight>& beta_sequence) {
  KernelEscapeReport rep;
  std::vector<int> ker;
  for (const auto& [b, i] : op.kernel_indices)
    if (b == 0) ker.push_back(i);
  rep.kernel_trivial = ker.empty();
  const Eigen::VectorXd& lap = op.manifold->blocks()[0].laplace;
  for (const Eigen::VectorXd& c : phi_sequence) {
    if (c.size() != lap.size()) throw ModelMismatch("coefficient length does not match block 0");
    Eigen::VectorXd comp = c;
    double kn = 0.0;
    for (int i : ker) {
      kn += c[i] * c[i];
      comp[i] = 0.0;
    }
    kn = std::sqrt(kn);
    const double hs =
        std::sqrt(((1.0 + lap.array()).pow(op.dims.s) * comp.array().square()).sum());
    rep.kernel_norms.push_back(kn);
    rep.complement_hs_norms.push_back(hs);
    const double total = c.norm();
    rep.kernel_ratio.push_back(total > 0.0 ? kn / total : 0.0);
  }
  const double e = op.manifold->n() / (2.0 * op.dims.s);
  for (const Weight& b : beta_sequence) rep.beta_norms.push_back(b.norm(e));
  rep.unbounded_regime = !rep.kernel_trivial && !rep.kernel_ratio.empty() &&
                         rep.kernel_ratio.back() > 0.9 &&
                         rep.kernel_norms.back() > rep.kernel_norms.front();
  return rep;
}

}  // namespace confspec
