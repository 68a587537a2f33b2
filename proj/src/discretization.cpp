#include "confspec/discretization.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "confspec/constants.hpp"
#include "confspec/errors.hpp"
#include "confspec/kernels.hpp"
#include "confspec/quadrature.hpp"

namespace confspec {

std::string to_string(ManifoldKind k) { return k == ManifoldKind::sphere ? "sphere" : "torus"; }

ManifoldKind manifold_kind_from_string(const std::string& s) {
  if (s == "sphere") return ManifoldKind::sphere;
  if (s == "torus") return ManifoldKind::torus;
  throw InvalidConfig("unknown backend '" + s + "'");
}

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::constant: return "constant";
    case Provenance::iterate: return "iterate";
    case Provenance::singular_family: return "singular_family";
    default: return "user";
  }
}

namespace {

void enumerate_tuples(int n, int l, std::vector<int>& cur, std::vector<std::vector<int>>& out,
                      std::vector<int>& trig) {
  if (static_cast<int>(cur.size()) == n) {
    out.push_back(cur);
    trig.push_back(1);
    if (cur.back() > 0) {
      out.push_back(cur);
      trig.push_back(2);
    }
    return;
  }
  const int top = cur.back();
  for (int m = 0; m <= top; ++m) {
    cur.push_back(m);
    enumerate_tuples(n, l, cur, out, trig);
    cur.pop_back();
  }
}

int ceil_density(double rho, int base) {
  return static_cast<int>(std::ceil(rho * base - 1e-9));
}

}  // namespace

ManifoldModel::ManifoldModel(const ModelSpec& spec) : spec_(spec) {}

std::shared_ptr<const ManifoldModel> ManifoldModel::build(const ModelSpec& spec) {
  if (spec.truncation < 1) throw InvalidConfig("truncation must be >= 1");
  if (spec.quad_density < 1.0) throw InvalidConfig("quad_density must be >= 1 for exactness");
  if (spec.n < 2) throw InvalidConfig("dimension must be >= 2");
  if (spec.axial && spec.kind != ManifoldKind::sphere)
    throw InvalidConfig("the axial reduction exists only for the sphere");
  std::shared_ptr<ManifoldModel> m(new ManifoldModel(spec));
  const int n = spec.n, L = spec.truncation;
  if (spec.kind == ManifoldKind::sphere) {
    m->volume_ = sphere_volume(n);
    if (spec.axial) {
      if (n < 3) throw InvalidConfig("axial model needs n >= 3");
      for (int j = 0; j <= L; ++j) {
        Block b;
        b.index = j;
        b.multiplicity = harmonic_dimension(n - 1, j);
        for (int l = j; l <= L; ++l) b.degree.push_back(l);
        b.laplace.resize(b.degree.size());
        for (size_t i = 0; i < b.degree.size(); ++i)
          b.laplace[i] = double(b.degree[i]) * (b.degree[i] + n - 1);
        m->blocks_.push_back(std::move(b));
      }
    } else {
      Block b;
      for (int l = 0; l <= L; ++l) {
        std::vector<int> cur{l};
        enumerate_tuples(n, l, cur, m->tuples_, m->trig_);
      }
      for (const auto& t : m->tuples_) b.degree.push_back(t[0]);
      b.laplace.resize(b.degree.size());
      for (size_t i = 0; i < b.degree.size(); ++i)
        b.laplace[i] = double(b.degree[i]) * (b.degree[i] + n - 1);
      m->blocks_.push_back(std::move(b));
    }
  } else {
    m->volume_ = std::pow(2.0 * std::numbers::pi, n);
    std::vector<std::vector<int>> reps;
    std::vector<int> cur(n, -L);
    while (true) {
      long norm2 = 0;
      for (int v : cur) norm2 += long(v) * v;
      int first = 0;
      for (int v : cur)
        if (v != 0) {
          first = v;
          break;
        }
      if (norm2 <= long(L) * L && first >= 0) reps.push_back(cur);
      int i = n - 1;
      while (i >= 0 && cur[i] == L) cur[i--] = -L;
      if (i < 0) break;
      ++cur[i];
    }
    auto nrm = [](const std::vector<int>& v) {
      long s = 0;
      for (int x : v) s += long(x) * x;
      return s;
    };
    std::stable_sort(reps.begin(), reps.end(), [&](const auto& a, const auto& b) {
      if (nrm(a) != nrm(b)) return nrm(a) < nrm(b);
      return a > b;
    });
    Block b;
    for (const auto& r : reps) {
      const int norm2 = static_cast<int>(nrm(r));
      if (norm2 == 0) {
        m->modes_.push_back(r);
        m->mode_kind_.push_back(0);
        b.degree.push_back(0);
      } else {
        for (int kind : {1, 2}) {
          m->modes_.push_back(r);
          m->mode_kind_.push_back(kind);
          b.degree.push_back(norm2);
        }
      }
    }
    b.laplace.resize(b.degree.size());
    for (size_t i = 0; i < b.degree.size(); ++i) b.laplace[i] = b.degree[i];
    m->blocks_.push_back(std::move(b));
  }
  return m;
}

double ManifoldModel::basis_size() const {
  double total = 0.0;
  for (const auto& b : blocks_) total += b.multiplicity * b.degree.size();
  return total;
}

const Grid& ManifoldModel::grid() const {
  std::call_once(grid_once_, [this] { build_grid(); });
  return *grid_;
}

int ManifoldModel::node_count() const { return static_cast<int>(grid().weights.size()); }

void ManifoldModel::build_grid() const {
  auto g = std::make_unique<Grid>();
  const int n = spec_.n, L = spec_.truncation;
  const double rho = spec_.quad_density;
  if (spec_.kind == ManifoldKind::torus) {
    const int N = ceil_density(rho, 2 * L + 2);
    long total = 1;
    for (int i = 0; i < n; ++i) total *= N;
    g->coords.resize(total, n);
    g->weights.setConstant(total, std::pow(2.0 * std::numbers::pi / N, n));
    std::vector<int> idx(n, 0);
    for (long q = 0; q < total; ++q) {
      for (int i = 0; i < n; ++i) g->coords(q, i) = 2.0 * std::numbers::pi * idx[i] / N;
      int i = n - 1;
      while (i >= 0 && ++idx[i] == N) idx[i--] = 0;
    }
  } else if (spec_.axial) {
    const Rule r = gauss_gegenbauer(ceil_density(rho, L + 1), 0.5 * (n - 2));
    const int N = static_cast<int>(r.x.size());
    g->coords = Eigen::MatrixXd::Zero(N, n + 1);
    g->weights.resize(N);
    const double area = sphere_volume(n - 1);
    for (int q = 0; q < N; ++q) {
      g->coords(q, 0) = r.x[q];
      g->coords(q, 1) = std::sqrt(std::max(0.0, 1.0 - r.x[q] * r.x[q]));
      g->weights[q] = area * r.w[q];
    }
  } else {
    std::vector<Rule> levels;
    for (int k = 1; k <= n - 1; ++k)
      levels.push_back(gauss_gegenbauer(ceil_density(rho, L + 1), 0.5 * (n - k - 1)));
    const Rule az = periodic_trapezoid(ceil_density(rho, 2 * L + 2));
    long total = static_cast<long>(az.x.size());
    for (const auto& r : levels) total *= static_cast<long>(r.x.size());
    g->coords.resize(total, n + 1);
    g->weights.resize(total);
    std::vector<int> idx(n, 0);
    for (long q = 0; q < total; ++q) {
      double w = az.w[idx[n - 1]];
      double prod = 1.0;  // product of sines so far
      for (int k = 0; k < n - 1; ++k) {
        const double t = levels[k].x[idx[k]];
        const double s = std::sqrt(std::max(0.0, 1.0 - t * t));
        g->coords(q, k) = prod * t;
        prod *= s;
        w *= levels[k].w[idx[k]];
      }
      const double phi = az.x[idx[n - 1]];
      g->coords(q, n - 1) = prod * std::cos(phi);
      g->coords(q, n) = prod * std::sin(phi);
      g->weights[q] = w;
      int i = n - 1;
      while (i >= 0) {
        const int lim = i == n - 1 ? static_cast<int>(az.x.size())
                                   : static_cast<int>(levels[i].x.size());
        if (++idx[i] < lim) break;
        idx[i--] = 0;
      }
    }
  }
  g->phi.resize(blocks_.size());
  for (int b = 0; b < block_count(); ++b) g->phi[b] = evaluate_block(b, g->coords);
  grid_ = std::move(g);
  grid_ready_ = true;
}

Eigen::MatrixXd ManifoldModel::evaluate_block(int b, const Eigen::MatrixXd& points,
                                              bool parallel) const {
  if (b < 0 || b >= block_count()) throw InvalidConfig("block index out of range");
  if (spec_.kind == ManifoldKind::torus) return eval_torus(points, parallel);
  if (spec_.axial) return eval_axial(b, points, parallel);
  return eval_sphere(points, parallel);
}

Eigen::MatrixXd ManifoldModel::eval_sphere(const Eigen::MatrixXd& pts, bool parallel) const {
  const int n = spec_.n, L = spec_.truncation;
  const Eigen::Index np = pts.rows();
  const int nb = block_size(0);
  Eigen::MatrixXd out(np, nb);
  // table offsets: level k (0-based), order m, index j -> (k*(L+1) + m)*(L+1) + j
  const int stride = L + 1;
#pragma omp parallel for if (parallel)
  for (Eigen::Index q = 0; q < np; ++q) {
    std::vector<double> P(static_cast<size_t>(n - 1) * stride * stride, 0.0);
    std::vector<double> S(static_cast<size_t>(n - 1) * stride, 1.0);
    std::vector<double> rtail(n + 2, 0.0);
    for (int i = n; i >= 0; --i) rtail[i] = rtail[i + 1] + pts(q, i) * pts(q, i);
    for (int i = 0; i <= n; ++i) rtail[i] = std::sqrt(rtail[i]);
    for (int k = 0; k < n - 1; ++k) {
      double t = 1.0, s = 0.0;
      if (rtail[k] > 1e-300) {
        t = std::clamp(pts(q, k) / rtail[k], -1.0, 1.0);
        s = rtail[k + 1] / rtail[k];
      }
      for (int m = 0; m <= L; ++m) {
        orthonormal_gegenbauer(L - m, m + 0.5 * (n - k - 2), t, &P[(k * stride + m) * stride]);
        S[k * stride + m] = m == 0 ? 1.0 : S[k * stride + m - 1] * s;
      }
    }
    const double phi = std::atan2(pts(q, n), pts(q, n - 1));
    for (int i = 0; i < nb; ++i) {
      const auto& t = tuples_[i];
      double v = 1.0;
      for (int k = 0; k < n - 1; ++k) {
        const int m = t[k + 1];
        v *= S[k * stride + m] * P[(k * stride + m) * stride + (t[k] - m)];
      }
      const int m = t[n - 1];
      if (m == 0)
        v /= std::sqrt(2.0 * std::numbers::pi);
      else
        v *= (trig_[i] == 1 ? std::cos(m * phi) : std::sin(m * phi)) / std::sqrt(std::numbers::pi);
      out(q, i) = v;
    }
  }
  return out;
}

Eigen::MatrixXd ManifoldModel::eval_axial(int b, const Eigen::MatrixXd& pts, bool parallel) const {
  const int n = spec_.n, L = spec_.truncation;
  const int j = blocks_[b].index;
  const Eigen::Index np = pts.rows();
  const int nb = block_size(b);
  const double inv_area = 1.0 / std::sqrt(sphere_volume(n - 1));
  Eigen::MatrixXd out(np, nb);
#pragma omp parallel for if (parallel)
  for (Eigen::Index q = 0; q < np; ++q) {
    std::vector<double> P(nb);
    const double t = std::clamp(pts(q, 0), -1.0, 1.0);
    const double s = std::sqrt(std::max(0.0, 1.0 - t * t));
    orthonormal_gegenbauer(L - j, j + 0.5 * (n - 2), t, P.data());
    const double sj = std::pow(s, j) * inv_area;
    for (int i = 0; i < nb; ++i) out(q, i) = sj * P[i];
  }
  return out;
}

Eigen::MatrixXd ManifoldModel::eval_torus(const Eigen::MatrixXd& pts, bool parallel) const {
  const int n = spec_.n;
  const Eigen::Index np = pts.rows();
  const int nb = block_size(0);
  const double c0 = 1.0 / std::sqrt(volume_), c1 = std::sqrt(2.0 / volume_);
  Eigen::MatrixXd out(np, nb);
#pragma omp parallel for if (parallel)
  for (Eigen::Index q = 0; q < np; ++q) {
    for (int i = 0; i < nb; ++i) {
      if (mode_kind_[i] == 0) {
        out(q, i) = c0;
        continue;
      }
      double arg = 0.0;
      for (int d = 0; d < n; ++d) arg += modes_[i][d] * pts(q, d);
      out(q, i) = c1 * (mode_kind_[i] == 1 ? std::cos(arg) : std::sin(arg));
    }
  }
  return out;
}

double ManifoldModel::distance(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                               const Eigen::Ref<const Eigen::RowVectorXd>& b) const {
  if (spec_.kind == ManifoldKind::sphere)
    return std::acos(std::clamp(a.dot(b), -1.0, 1.0));
  double d2 = 0.0;
  const double period = 2.0 * std::numbers::pi;
  for (int i = 0; i < spec_.n; ++i) {
    double d = std::fmod(std::abs(a[i] - b[i]), period);
    d = std::min(d, period - d);
    d2 += d * d;
  }
  return std::sqrt(d2);
}

double ManifoldModel::injectivity_radius() const { return std::numbers::pi; }

double ManifoldModel::grid_spacing() const {
  const int L = spec_.truncation;
  if (spec_.kind == ManifoldKind::torus)
    return 2.0 * std::numbers::pi / ceil_density(spec_.quad_density, 2 * L + 2);
  return std::numbers::pi / ceil_density(spec_.quad_density, L + 1);
}

const Eigen::VectorXd& Weight::grid_values() const {
  if (!is_constant()) return values;
  const int nq = model->node_count();
  if (expanded_.size() != nq) expanded_ = Eigen::VectorXd::Constant(nq, constant_value);
  return expanded_;
}

double Weight::integral_power(double q) const {
  if (is_constant()) return std::pow(constant_value, q) * model->volume();
  const Eigen::VectorXd& w = model->grid().weights;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i)
    if (values[i] > 0.0) acc += w[i] * std::pow(values[i], q);
  return acc;
}

double Weight::norm(double p) const { return std::pow(integral_power(p), 1.0 / p); }

Weight Weight::scaled(double mu) const {
  Weight w = *this;
  w.constant_value *= mu;
  w.values *= mu;
  w.expanded_.resize(0);
  return w;
}

Weight constant_weight(const ModelPtr& model, double c) {
  if (!(c > 0.0)) throw PreconditionViolation("constant weight must be positive");
  Weight w;
  w.model = model;
  w.provenance = Provenance::constant;
  w.constant_value = c;
  return w;
}

Weight grid_weight(const ModelPtr& model, Eigen::VectorXd values, Provenance prov) {
  if (prov == Provenance::constant) throw PreconditionViolation("use constant_weight");
  if (values.size() != model->node_count())
    throw ModelMismatch("weight length does not match the grid");
  if ((values.array() < 0.0).any()) throw PreconditionViolation("negative weight node");
  if (!(values.array() > 0.0).any()) throw PreconditionViolation("weight is identically zero");
  Weight w;
  w.model = model;
  w.provenance = prov;
  w.values = std::move(values);
  return w;
}

CoefVector analyze(const GridFunction& f, int block) {
  const Grid& g = f.model->grid();
  if (f.values.size() != g.weights.size()) throw ModelMismatch("grid function length mismatch");
  return CoefVector{f.model, block, kernels::project(g.phi[block], g.weights, f.values)};
}

GridFunction synthesize(const CoefVector& c) {
  const Grid& g = c.model->grid();
  if (c.coef.size() != c.model->block_size(c.block)) throw ModelMismatch("coefficient length");
  return GridFunction{c.model, kernels::expand(g.phi[c.block], c.coef)};
}

double aliasing_residual(const GridFunction& f) {
  const GridFunction back = synthesize(analyze(f));
  const Eigen::VectorXd& w = f.model->grid().weights;
  const Eigen::VectorXd d = f.values - back.values;
  const double num = std::sqrt((w.array() * d.array().square()).sum());
  const double den = std::sqrt((w.array() * f.values.array().square()).sum());
  return den > 0.0 ? num / den : num;
}

double lp_norm(const GridFunction& f, double p) {
  const Eigen::VectorXd& w = f.model->grid().weights;
  return std::pow((w.array() * f.values.array().abs().pow(p)).sum(), 1.0 / p);
}

Eigen::MatrixXd weighted_gram(const Weight& beta, int block) {
  const int nb = beta.model->block_size(block);
  if (beta.is_constant()) return beta.constant_value * Eigen::MatrixXd::Identity(nb, nb);
  const Grid& g = beta.model->grid();
  if ((beta.values.array() < 0.0).any()) throw PreconditionViolation("negative weight node");
  return kernels::weighted_gram(g.phi[block], g.weights.cwiseProduct(beta.values));
}

double gram_identity_error(const ManifoldModel& m) {
  const Grid& g = m.grid();
  double err = 0.0;
  for (int b = 0; b < m.block_count(); ++b) {
    const Eigen::MatrixXd G = kernels::weighted_gram(g.phi[b], g.weights);
    err = std::max(err, (G - Eigen::MatrixXd::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff());
  }
  return err;
}

}  // namespace confspec
