#include "confspec/geneig.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "confspec/errors.hpp"

namespace confspec {

namespace {

bool try_cholesky(const Eigen::MatrixXd& M, Eigen::LLT<Eigen::MatrixXd>& llt) {
  llt.compute(M);
  if (llt.info() != Eigen::Success) return false;
  const Eigen::VectorXd d = llt.matrixL().toDenseMatrix().diagonal();
  return d.minCoeff() > 1e-7 * d.maxCoeff();
}

DensePencil shifted_path(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                         const Eigen::LLT<Eigen::MatrixXd>& llt, double shift, int max_vectors,
                         double rank_tol) {
  const Eigen::Index N = A.rows();
  // C = L^{-1} B L^{-T}
  Eigen::MatrixXd C = llt.matrixL().solve(B);
  C = llt.matrixL().solve(C.transpose().eval());
  C = 0.5 * (C + C.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
  if (es.info() != Eigen::Success) throw NumericalFailure("pencil eigensolve failed");
  const Eigen::VectorXd& nu = es.eigenvalues();
  const double nu_max = nu[N - 1];
  DensePencil out;
  out.path = "shifted";
  out.shift = shift;
  if (!(nu_max > 0.0)) throw NumericalFailure("pencil is degenerate (B = 0)");
  int finite = 0;
  for (Eigen::Index i = N - 1; i >= 0 && nu[i] > rank_tol * nu_max; --i) ++finite;
  out.rank_b = finite;
  out.values.resize(finite);
  const int nv = max_vectors < 0 ? finite : std::min(finite, max_vectors);
  out.vectors.resize(N, nv);
  for (int k = 0; k < finite; ++k) {
    const Eigen::Index i = N - 1 - k;
    out.values[k] = 1.0 / nu[i] - shift;
    if (k < nv)
      out.vectors.col(k) =
          llt.matrixL().transpose().solve(es.eigenvectors().col(i)) / std::sqrt(nu[i]);
  }
  return out;
}

DensePencil schur_path(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, int max_vectors,
                       double rank_tol) {
  const Eigen::Index N = A.rows();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eb(B);
  const Eigen::VectorXd& sig = eb.eigenvalues();
  const double smax = sig[N - 1];
  if (!(smax > 0.0)) throw NumericalFailure("pencil is degenerate (B = 0)");
  int r = 0;
  for (Eigen::Index i = 0; i < N; ++i) r += sig[i] > rank_tol * smax;
  const int kdim = static_cast<int>(N) - r;
  const Eigen::MatrixXd UK = eb.eigenvectors().leftCols(kdim);
  const Eigen::MatrixXd UH = eb.eigenvectors().rightCols(r);
  const Eigen::VectorXd sH = sig.tail(r);
  const Eigen::MatrixXd AHH = UH.transpose() * A * UH;
  const Eigen::MatrixXd AHK = UH.transpose() * A * UK;
  Eigen::MatrixXd AKK = UK.transpose() * A * UK;
  AKK = 0.5 * (AKK + AKK.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ek(AKK);
  const double anorm = std::max(A.cwiseAbs().maxCoeff(), 1e-300);
  const double atol = 1e-10 * anorm;

  DensePencil out;
  out.path = "schur";
  out.rank_b = r;
  Eigen::MatrixXd S = AHH;
  Eigen::MatrixXd elim = Eigen::MatrixXd::Zero(kdim, r);  // z = elim * h
  std::vector<Eigen::VectorXd> coupled_b, coupled_z;
  int neg = 0;
  for (int i = 0; i < kdim; ++i) {
    const double kap = ek.eigenvalues()[i];
    const Eigen::VectorXd z = ek.eigenvectors().col(i);
    const Eigen::VectorXd bz = AHK * z;
    if (std::abs(kap) <= atol) {
      if (bz.norm() > atol) {
        coupled_b.push_back(bz);
        coupled_z.push_back(z);
      } else {
        ++out.decoupled_zeros;
      }
      continue;
    }
    if (kap < 0.0) ++neg;
    S -= bz * bz.transpose() / kap;
    elim -= z * bz.transpose() / kap;
  }
  out.coupled_zeros = static_cast<int>(coupled_b.size());
  out.neg_count = neg + out.coupled_zeros;
  S = 0.5 * (S + S.transpose());

  // restrict h to the Euclidean complement of the coupled directions
  Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(r, r);
  Eigen::MatrixXd Bc;
  if (!coupled_b.empty()) {
    Bc.resize(r, coupled_b.size());
    for (size_t i = 0; i < coupled_b.size(); ++i) Bc.col(i) = coupled_b[i];
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Bc, Eigen::ComputeFullU);
    int rb = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
      rb += svd.singularValues()[i] > atol;
    Q = svd.matrixU().rightCols(r - rb);
  }
  const Eigen::Index rq = Q.cols();
  const int finite = std::max(0, r - out.neg_count);
  out.values.resize(finite);
  const int nv = max_vectors < 0 ? finite : std::min(finite, max_vectors);
  out.vectors.resize(N, nv);
  if (finite == 0 || rq == 0) {
    out.values.resize(0);
    out.vectors.resize(N, 0);
    return out;
  }
  const Eigen::MatrixXd SQ = Q.transpose() * S * Q;
  const Eigen::MatrixXd BQ = Q.transpose() * sH.asDiagonal() * Q;
  Eigen::LLT<Eigen::MatrixXd> lb(BQ);
  if (lb.info() != Eigen::Success) throw NumericalFailure("restricted B is not definite");
  Eigen::MatrixXd C = lb.matrixL().solve(SQ);
  C = lb.matrixL().solve(C.transpose().eval());
  C = 0.5 * (C + C.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
  for (int k = 0; k < finite && k < rq; ++k) {
    out.values[k] = es.eigenvalues()[k];
    if (k >= nv) continue;
    const Eigen::VectorXd g = lb.matrixL().transpose().solve(es.eigenvectors().col(k));
    const Eigen::VectorXd h = Q * g;
    Eigen::VectorXd z = elim * h;
    if (!coupled_b.empty()) {
      // Lagrange multipliers: Σ t_i b_i = λ B_HH h - S h
      const Eigen::VectorXd rhs = out.values[k] * sH.cwiseProduct(h) - S * h;
      const Eigen::VectorXd t = Bc.colPivHouseholderQr().solve(rhs);
      for (size_t i = 0; i < coupled_z.size(); ++i) z += t[i] * coupled_z[i];
    }
    out.vectors.col(k) = UH * h + UK * z;
  }
  return out;
}

}  // namespace

DensePencil solve_dense_pencil(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                               int max_vectors, double rank_tol) {
  if (A.rows() != A.cols() || B.rows() != B.cols() || A.rows() != B.rows())
    throw ModelMismatch("pencil matrices must be square and of equal size");
  const Eigen::Index N = A.rows();
  Eigen::LLT<Eigen::MatrixXd> llt;
  if (try_cholesky(A, llt)) return shifted_path(A, B, llt, 0.0, max_vectors, rank_tol);
  const double bscale = B.diagonal().maxCoeff();
  if (!(bscale > 0.0)) throw NumericalFailure("pencil is degenerate (B = 0)");
  double est = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < N; ++i)
    if (B(i, i) > rank_tol * bscale) est = std::min(est, A(i, i) / B(i, i));
  if (!std::isfinite(est)) est = 0.0;
  double shift = std::max(0.0, -est) + 1.0;
  for (int attempt = 0; attempt < 40; ++attempt, shift *= 2.0) {
    if (try_cholesky(A + shift * B, llt))
      return shifted_path(A, B, llt, shift, max_vectors, rank_tol);
  }
  return schur_path(A, B, max_vectors, rank_tol);
}

double GenEigenResult::lambda(int k) const {
  if (k < 1 || k > count()) throw PreconditionViolation("eigenvalue index out of range");
  return eigenvalues[k - 1];
}

Eigen::VectorXd GenEigenResult::vector(int k) const {
  const EigenEntry& e = entries.at(k - 1);
  if (e.block < 0) throw PreconditionViolation("no eigenvector below m(beta)");
  if (e.index >= block_vectors[e.block].cols())
    throw PreconditionViolation("eigenvector beyond the computed range");
  return block_vectors[e.block].col(e.index);
}

Eigen::VectorXd GenEigenResult::grid_values(int k) const {
  const EigenEntry& e = entries.at(k - 1);
  return op->manifold->grid().phi[e.block] * vector(k);
}

namespace {

struct BlockRun {
  DensePencil pencil;
  double mult = 1.0;
  Eigen::MatrixXd B;  // empty for constant weights
};

BlockRun run_block(const OperatorModel& op, const Weight& beta, int b, int max_vectors,
                   double rank_tol) {
  BlockRun br;
  br.mult = op.manifold->blocks()[b].multiplicity;
  const Eigen::VectorXd& a = op.multiplier[b];
  if (beta.is_constant()) {
    const double c = beta.constant_value;
    std::vector<int> order(a.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return a[i] < a[j]; });
    DensePencil& p = br.pencil;
    p.path = "constant";
    p.rank_b = static_cast<int>(a.size());
    p.values.resize(a.size());
    const int nv = max_vectors < 0 ? static_cast<int>(a.size())
                                   : std::min<int>(max_vectors, static_cast<int>(a.size()));
    p.vectors = Eigen::MatrixXd::Zero(a.size(), nv);
    for (Eigen::Index k = 0; k < a.size(); ++k) {
      p.values[k] = a[order[k]] / c;
      if (k < nv) p.vectors(order[k], k) = 1.0 / std::sqrt(c);
    }
    return br;
  }
  br.B = weighted_gram(beta, b);
  br.pencil = solve_dense_pencil(a.asDiagonal().toDenseMatrix(), br.B, max_vectors, rank_tol);
  return br;
}

double dual_residual(const Eigen::VectorXd& a, const Eigen::VectorXd& lap, int s,
                     const Eigen::MatrixXd& B, const Eigen::VectorXd& c, double lam) {
  const Eigen::VectorXd Ac = a.cwiseProduct(c);
  const Eigen::VectorXd Bc = B * c;
  const Eigen::VectorXd w = (1.0 + lap.array()).pow(-0.5 * s);
  const double num = (Ac - lam * Bc).cwiseProduct(w).norm();
  const double den = Ac.cwiseProduct(w).norm() + std::abs(lam) * Bc.cwiseProduct(w).norm();
  return den > 0.0 ? num / den : num;
}

}  // namespace

GenEigenResult solve_pencil(const OperatorPtr& op, const Weight& beta, const SolveOptions& opt) {
  if (opt.k_max < 1) throw PreconditionViolation("k_max must be >= 1");
  if (beta.model != op->manifold) throw ModelMismatch("weight and operator use different models");
  const ManifoldModel& model = *op->manifold;
  GenEigenResult res;
  res.beta = beta;
  res.op = op;
  const int nblocks = model.block_count();
  std::vector<BlockRun> runs;
  const int want_vectors = opt.k_max + 8;

  double neg_total = 0.0;
  for (int b = 0; b < nblocks; ++b) {
    runs.push_back(run_block(*op, beta, b, want_vectors, opt.rank_tol));
    const BlockRun& br = runs.back();
    neg_total += br.mult * br.pencil.neg_count;
    if (opt.all_blocks || !model.axial() || b == 0) continue;
    // adaptive stop: current k_max-th value (with multiplicities) below this block's minimum
    std::vector<std::pair<double, double>> vals;
    for (const auto& r : runs)
      for (Eigen::Index i = 0; i < r.pencil.values.size(); ++i)
        vals.emplace_back(r.pencil.values[i], r.mult);
    std::sort(vals.begin(), vals.end());
    double count = neg_total, kth = std::numeric_limits<double>::infinity();
    for (const auto& [v, m] : vals) {
      count += m;
      if (count >= opt.k_max + 1) {
        kth = v;
        break;
      }
    }
    const double bmin = br.pencil.values.size() ? br.pencil.values[0]
                                                : std::numeric_limits<double>::infinity();
    if (bmin > kth * (1 + 10 * opt.cluster_tol) + 10 * opt.cluster_tol) break;
  }
  res.cond.blocks_computed = static_cast<int>(runs.size());

  // merge
  std::vector<EigenEntry> finite;
  for (int b = 0; b < static_cast<int>(runs.size()); ++b) {
    const DensePencil& p = runs[b].pencil;
    res.cond.block_paths.push_back(p.path);
    res.cond.max_shift = std::max(res.cond.max_shift, p.shift);
    res.cond.coupled_zeros += static_cast<int>(runs[b].mult) * p.coupled_zeros;
    res.cond.decoupled_zeros += static_cast<int>(runs[b].mult) * p.decoupled_zeros;
    res.rank_b += runs[b].mult * p.rank_b;
    for (Eigen::Index i = 0; i < p.values.size(); ++i) {
      if (i >= p.vectors.cols()) break;
      for (int c = 0; c < runs[b].mult; ++c)
        finite.push_back(EigenEntry{p.values[i], b, static_cast<int>(i), c});
    }
  }
  std::stable_sort(finite.begin(), finite.end(), [](const EigenEntry& x, const EigenEntry& y) {
    if (x.value != y.value) return x.value < y.value;
    if (x.block != y.block) return x.block < y.block;
    if (x.index != y.index) return x.index < y.index;
    return x.copy < y.copy;
  });
  res.null_a_on_ker_b = neg_total;
  res.m_beta = static_cast<int>(neg_total) + 1;
  const int total_needed = opt.k_max;
  for (int i = 0; i < res.m_beta - 1; ++i) {
    res.eigenvalues.push_back(kMinusInfinity);
    res.entries.push_back(EigenEntry{kMinusInfinity, -1, -1, 0});
  }
  size_t pos = 0;
  while (pos < finite.size()) {
    const int k = static_cast<int>(res.eigenvalues.size()) + 1;
    if (k > total_needed) {
      // extend through the cluster of λ_{k_max} plus one more value
      const double last = res.eigenvalues.back();
      const bool same = std::isfinite(last) &&
                        std::abs(finite[pos].value - last) <= opt.cluster_tol * (1 + std::abs(last));
      if (!same) {
        res.eigenvalues.push_back(finite[pos].value);
        res.entries.push_back(finite[pos]);
        break;
      }
    }
    res.eigenvalues.push_back(finite[pos].value);
    res.entries.push_back(finite[pos]);
    ++pos;
  }
  for (const auto& r : runs) res.block_vectors.push_back(r.pencil.vectors);

  // diagnostics on the reported pairs
  for (int k = res.m_beta; k <= res.count(); ++k) {
    const EigenEntry& e = res.entries[k - 1];
    if (e.copy != 0) continue;
    const Eigen::VectorXd c = res.vector(k);
    const Eigen::MatrixXd B = beta.is_constant()
                                  ? Eigen::MatrixXd(beta.constant_value *
                                                    Eigen::MatrixXd::Identity(c.size(), c.size()))
                                  : runs[e.block].B;
    res.cond.orth_error = std::max(res.cond.orth_error, std::abs(c.dot(B * c) - 1.0));
    res.cond.max_residual =
        std::max(res.cond.max_residual, dual_residual(op->multiplier[e.block],
                                                      model.blocks()[e.block].laplace,
                                                      op->dims.s, B, c, e.value));
    if (k - res.m_beta > 6) break;
  }
  if (res.cond.orth_error > 1e-7)
    throw NumericalFailure("B-orthonormalization error " + std::to_string(res.cond.orth_error));
  return res;
}

GenEigenResult solve_pencil(const OperatorPtr& op, const Weight& beta, int k_max) {
  SolveOptions opt;
  opt.k_max = k_max;
  return solve_pencil(op, beta, opt);
}

int detect_m(const OperatorPtr& op, const Weight& beta, double rank_tol) {
  if (beta.is_constant()) return 1;
  double neg = 0.0;
  for (int b = 0; b < op->manifold->block_count(); ++b) {
    const Eigen::MatrixXd B = weighted_gram(beta, b);
    const DensePencil p =
        solve_dense_pencil(op->multiplier[b].asDiagonal().toDenseMatrix(), B, 0, rank_tol);
    neg += op->manifold->blocks()[b].multiplicity * p.neg_count;
  }
  return static_cast<int>(neg) + 1;
}

EigenCluster eigencluster(const GenEigenResult& res, int k, double cluster_tol) {
  if (k < res.m_beta || k > res.count()) throw PreconditionViolation("k out of range for cluster");
  const double lk = res.lambda(k);
  auto same = [&](int i) {
    return std::abs(res.lambda(i) - lk) <= cluster_tol * (1.0 + std::abs(lk));
  };
  EigenCluster c;
  c.k = k;
  c.i_k = k;
  while (c.i_k - 1 >= res.m_beta && same(c.i_k - 1)) --c.i_k;
  c.I_k = k;
  while (c.I_k + 1 <= res.count() && same(c.I_k + 1)) ++c.I_k;
  for (int i = c.i_k; i <= c.I_k; ++i) c.members.push_back(i);
  return c;
}

Eigen::MatrixXd cluster_grid_values(const GenEigenResult& res, const EigenCluster& c) {
  const int nq = res.op->manifold->node_count();
  Eigen::MatrixXd out(nq, c.members.size());
  for (size_t i = 0; i < c.members.size(); ++i) out.col(i) = res.grid_values(c.members[i]);
  return out;
}

}  // namespace confspec
