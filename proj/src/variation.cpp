#include "confspec/variation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "confspec/errors.hpp"

namespace confspec {

namespace {

Eigen::MatrixXd block_gram(const Weight& w, int block, std::map<int, Eigen::MatrixXd>& cache) {
  auto it = cache.find(block);
  if (it != cache.end()) return it->second;
  return cache[block] = weighted_gram(w, block);
}

Weight add_weights(const Weight& a, const Weight& b, double t) {
  if (a.is_constant() && b.is_constant()) return constant_weight(a.model, a.constant_value + t * b.constant_value);
  return grid_weight(a.model, a.grid_values() + t * b.grid_values(), Provenance::user);
}

}  // namespace

DirectionalDerivative directional_derivative(const GenEigenResult& res, int k, const Weight& b,
                                             double cluster_tol) {
  if (b.model != res.op->manifold) throw ModelMismatch("direction and weight use different models");
  if (k < res.m_beta) throw PreconditionViolation("k is below m(beta)");
  DirectionalDerivative out;
  out.cluster = eigencluster(res, k, cluster_tol);
  const EigenCluster& c = out.cluster;
  if (c.I_k >= res.count() && res.count() > k)
    throw PreconditionViolation("cluster not fully resolved; raise k_max");
  const int dim = static_cast<int>(c.members.size());
  const double lam = res.lambda(k);

  std::map<int, Eigen::MatrixXd> gb, gq;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(dim, dim);
  for (int i = 0; i < dim; ++i) {
    const EigenEntry& ei = res.entries[c.members[i] - 1];
    const Eigen::VectorXd vi = res.vector(c.members[i]);
    for (int j = 0; j <= i; ++j) {
      const EigenEntry& ej = res.entries[c.members[j] - 1];
      if (ei.block != ej.block || ei.copy != ej.copy) continue;
      const Eigen::VectorXd vj = res.vector(c.members[j]);
      const double bij = vi.dot(block_gram(b, ei.block, gb) * vj);
      const double qij = vi.dot(block_gram(res.beta, ei.block, gq) * vj);
      M(i, j) = M(j, i) = -lam * bij;
      G(i, j) = G(j, i) = qij;
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(G);
  if (llt.info() != Eigen::Success) throw NumericalFailure("degenerate cluster Gram matrix");
  Eigen::MatrixXd S = llt.matrixL().solve(M);
  S = llt.matrixL().solve(S.transpose().eval());
  S = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  out.pencil_spectrum = es.eigenvalues();
  out.value = out.pencil_spectrum[k - c.i_k];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(-S, Eigen::EigenvaluesOnly);
  out.value_max_form = -em.eigenvalues()[c.I_k - k];

  const int wdim = k - c.i_k + 1;
  const Eigen::MatrixXd coef =
      llt.matrixL().transpose().solve(es.eigenvectors().leftCols(wdim));
  out.witness = cluster_grid_values(res, c) * coef;
  return out;
}

DirectionalDerivative directional_derivative(const OperatorPtr& op, const Weight& beta, int k,
                                             const Weight& b, double cluster_tol) {
  SolveOptions opt;
  opt.k_max = k;
  opt.cluster_tol = cluster_tol;
  while (true) {
    GenEigenResult res = solve_pencil(op, beta, opt);
    // widen the solve until the cluster of λ_k ends strictly inside it
    if (eigencluster(res, k, cluster_tol).I_k < res.count() || res.count() < opt.k_max)
      return directional_derivative(res, k, b, cluster_tol);
    opt.k_max *= 2;
  }
}

FiniteDifference finite_difference_derivative(const OperatorPtr& op, const Weight& beta, int k,
                                              const Weight& b, double t) {
  if (!(t > 0.0)) throw PreconditionViolation("finite-difference step must be positive");
  const double l0 = solve_pencil(op, beta, k).lambda(k);
  const double l1 = solve_pencil(op, add_weights(beta, b, t), k).lambda(k);
  const double l2 = solve_pencil(op, add_weights(beta, b, 0.5 * t), k).lambda(k);
  FiniteDifference fd;
  fd.coarse = (l1 - l0) / t;
  fd.fine = (l2 - l0) / (0.5 * t);
  fd.richardson = 2.0 * fd.fine - fd.coarse;
  return fd;
}

MixResult mix_weights(const Eigen::MatrixXd& basis, const Eigen::MatrixXd& coeffs,
                      const Eigen::VectorXd& t) {
  if (coeffs.cols() != t.size() || coeffs.rows() != basis.cols())
    throw ModelMismatch("mixture data dimensions do not agree");
  if ((t.array() < 0.0).any()) throw PreconditionViolation("mixture weights must be nonnegative");
  Eigen::MatrixXd A = coeffs * t.asDiagonal() * coeffs.transpose();
  A = 0.5 * (A + A.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  MixResult out;
  out.d = es.eigenvalues();
  out.rotation = es.eigenvectors();
  out.family = basis * out.rotation;
  return out;
}

std::string to_string(Direction d) { return d == Direction::min ? "min" : "max"; }

Direction direction_from_string(const std::string& s) {
  if (s == "min") return Direction::min;
  if (s == "max") return Direction::max;
  throw InvalidConfig("direction must be min or max, got '" + s + "'");
}

namespace {

struct Loss {
  const Eigen::VectorXd& w;
  const Eigen::VectorXd& b;
  double scale;
  double pp;  // p'

  double value(const Eigen::VectorXd& g) const {
    double acc = 0.0;
    for (Eigen::Index q = 0; q < g.size(); ++q) {
      const double h = scale * (g[q] - b[q]);
      if (h > 0.0) acc += w[q] * std::pow(h, pp);
    }
    return acc;
  }
  // d loss / d g_q
  Eigen::VectorXd dual(const Eigen::VectorXd& g) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(g.size());
    for (Eigen::Index q = 0; q < g.size(); ++q) {
      const double h = scale * (g[q] - b[q]);
      if (h > 0.0) out[q] = w[q] * pp * scale * std::pow(h, pp - 1.0);
    }
    return out;
  }
};

Eigen::VectorXd project_simplex(const Eigen::VectorXd& v) {
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, tau = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    cum += u[i];
    const double t = (cum - 1.0) / static_cast<double>(i + 1);
    if (u[i] - t > 0.0) tau = t;
  }
  return (v.array() - tau).max(0.0).matrix();
}

// minimize loss(Σ_q (Φ W)_q²) over ‖W‖_F = 1
Eigen::MatrixXd search_spectraplex(const Eigen::MatrixXd& phi, const Loss& loss, int r,
                                   const CertificateOptions& opt, double& best_loss) {
  const Eigen::Index c = phi.cols();
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd best;
  best_loss = std::numeric_limits<double>::infinity();
  auto gvals = [&](const Eigen::MatrixXd& W) {
    return (phi * W).rowwise().squaredNorm().eval();
  };
  for (int start = 0; start < std::max(1, opt.restarts); ++start) {
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(c, r);
    if (start == 0) {
      for (int i = 0; i < r && i < c; ++i) W(c - 1 - i, r - 1 - i) = 1.0;
    } else {
      for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = nd(rng);
    }
    W /= W.norm();
    double f = loss.value(gvals(W));
    double step = 1.0;
    for (int it = 0; it < opt.iterations && f > 0.0; ++it) {
      const Eigen::VectorXd g = gvals(W);
      const Eigen::VectorXd y = loss.dual(g);
      Eigen::MatrixXd grad = 2.0 * phi.transpose() * (y.asDiagonal() * (phi * W));
      // tangent component on the sphere
      grad -= (grad.cwiseProduct(W).sum()) * W;
      const double gn = grad.norm();
      if (gn <= 1e-300) break;
      bool moved = false;
      for (int bt = 0; bt < 40; ++bt) {
        Eigen::MatrixXd Wn = W - (step / gn) * grad;
        Wn /= Wn.norm();
        const double fn = loss.value(gvals(Wn));
        if (fn < f) {
          W = Wn;
          f = fn;
          step = std::min(1.0, step * 1.5);
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (!moved) break;
    }
    if (f < best_loss) {
      best_loss = f;
      best = W;
    }
  }
  return best;
}

// minimize loss(Σ_g d_g φ_g²) over the simplex
Eigen::VectorXd search_simplex(const Eigen::MatrixXd& sq, const Loss& loss, int iterations,
                               double& f) {
  const Eigen::Index m = sq.cols();
  Eigen::VectorXd d = Eigen::VectorXd::Constant(m, 1.0 / m);
  f = loss.value(sq * d);
  double step = 1.0;
  for (int it = 0; it < iterations && f > 0.0; ++it) {
    const Eigen::VectorXd grad = sq.transpose() * loss.dual(sq * d);
    const double gn = grad.norm();
    if (gn <= 1e-300) break;
    bool moved = false;
    for (int bt = 0; bt < 40; ++bt) {
      const Eigen::VectorXd dn = project_simplex(d - (step / gn) * grad);
      const double fn = loss.value(sq * dn);
      if (fn < f) {
        d = dn;
        f = fn;
        step = std::min(1.0, step * 1.5);
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  return d;
}

}  // namespace

ELCertificate el_certificate(const GenEigenResult& res, int k, double p, Direction dir,
                             const CertificateOptions& opt) {
  const OperatorModel& op = *res.op;
  if (dir == Direction::min && k < op.k_plus)
    throw PreconditionViolation("minimization needs k >= k_plus");
  if (dir == Direction::max && k > op.k_minus)
    throw PreconditionViolation("maximization needs k <= k_minus");
  if (!(p > 1.0)) throw PreconditionViolation("certificate needs p > 1");
  if (k < res.m_beta) throw PreconditionViolation("lambda_k is -infinity");
  const ManifoldModel& model = *op.manifold;
  const Grid& grid = model.grid();

  ELCertificate cert;
  cert.direction = dir;
  cert.k = k;
  cert.p = p;
  cert.lambda_bar = res.lambda(k) * res.beta.norm(p);
  const EigenCluster c = eigencluster(res, k);
  const int r = dir == Direction::min ? k - c.i_k + 1 : c.I_k - k + 1;

  const Eigen::VectorXd& beta = res.beta.grid_values();
  Eigen::VectorXd bp(beta.size());
  for (Eigen::Index q = 0; q < beta.size(); ++q)
    bp[q] = beta[q] > 0.0 ? std::pow(beta[q], p - 1.0) : 0.0;
  const double pp = p / (p - 1.0);
  const Loss loss{grid.weights, bp, std::abs(cert.lambda_bar), pp};

  if (!model.axial()) {
    const Eigen::MatrixXd phi = cluster_grid_values(res, c);
    double f = 0.0;
    const Eigen::MatrixXd W = search_spectraplex(phi, loss, std::min<int>(r, phi.cols()), opt, f);
    const MixResult mix = mix_weights(phi, W, Eigen::VectorXd::Ones(W.cols()));
    std::vector<int> keep;
    for (Eigen::Index i = mix.d.size() - 1; i >= 0; --i)
      if (mix.d[i] > 1e-14) keep.push_back(static_cast<int>(i));
    cert.d.resize(keep.size());
    cert.family.resize(phi.rows(), keep.size());
    for (size_t i = 0; i < keep.size(); ++i) {
      cert.d[i] = mix.d[keep[i]];
      cert.family.col(i) = mix.family.col(keep[i]);
    }
    cert.d /= cert.d.sum();
  } else {
    // zonal weights only see the copy average of |φ|², which is the same for every
    // unit vector of a group, so one vector per group suffices
    struct Group {
      int block, index, member;
    };
    std::vector<Group> groups;
    for (int m : c.members) {
      const EigenEntry& e = res.entries[m - 1];
      auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
        return g.block == e.block && g.index == e.index;
      });
      if (it == groups.end()) groups.push_back(Group{e.block, e.index, m});
    }
    const int ng = static_cast<int>(groups.size());
    if (ng > 16) throw NumericalFailure("cluster too large for the axial certificate search");
    Eigen::MatrixXd prof(grid.weights.size(), ng);
    for (int g = 0; g < ng; ++g) prof.col(g) = res.grid_values(groups[g].member);
    const Eigen::MatrixXd sq = prof.array().square().matrix();
    double best = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_d;
    std::vector<int> best_set;
    for (int mask = 1; mask < (1 << ng); ++mask) {
      int total = 0;
      std::vector<int> set;
      for (int g = 0; g < ng; ++g)
        if (mask & (1 << g)) {
          ++total;
          set.push_back(g);
        }
      if (total > r) continue;
      Eigen::MatrixXd sub(sq.rows(), set.size());
      for (size_t i = 0; i < set.size(); ++i) sub.col(i) = sq.col(set[i]);
      double f = 0.0;
      const Eigen::VectorXd d = search_simplex(sub, loss, opt.iterations, f);
      if (f < best) {
        best = f;
        best_d = d;
        best_set = set;
      }
    }
    if (best_set.empty()) throw NumericalFailure("no admissible axial family in the cluster");
    std::vector<int> keep;
    for (size_t i = 0; i < best_set.size(); ++i)
      if (best_d[i] > 1e-14) keep.push_back(static_cast<int>(i));
    cert.d.resize(keep.size());
    cert.family.resize(prof.rows(), keep.size());
    for (size_t i = 0; i < keep.size(); ++i) {
      cert.d[i] = best_d[keep[i]];
      cert.family.col(i) = prof.col(best_set[keep[i]]);
    }
    cert.d /= cert.d.sum();
  }

  const int used = static_cast<int>(cert.d.size());
  cert.r_or_s = dir == Direction::min ? k - used + 1 : k + used - 1;
  cert.combination = cert.family.array().square().matrix() * cert.d;
  cert.residual_field = cert.lambda_bar * (bp - cert.combination);
  cert.residual_norm = std::pow(loss.value(cert.combination), 1.0 / pp);

  const Eigen::VectorXd wb = grid.weights.cwiseProduct(beta);
  const Eigen::MatrixXd Q = cert.family.transpose() * wb.asDiagonal() * cert.family;
  double orth = 0.0;
  for (Eigen::Index i = 0; i < Q.rows(); ++i)
    for (Eigen::Index j = 0; j < Q.cols(); ++j) {
      // distinct axial profiles from different blocks are orthogonal through the harmonic factor
      if (model.axial() && i != j) continue;
      orth = std::max(orth, std::abs(Q(i, j) - (i == j ? 1.0 : 0.0)));
    }
  cert.orth_error = orth;
  return cert;
}

ELCertificate el_certificate(const OperatorPtr& op, const Weight& beta, int k, double p,
                             Direction dir, const CertificateOptions& opt) {
  return el_certificate(solve_pencil(op, beta, k), k, p, dir, opt);
}

}  // namespace confspec
