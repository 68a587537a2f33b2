#include "confspec/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "confspec/concentration.hpp"
#include "confspec/errors.hpp"

namespace confspec {

std::string to_string(StageStatus s) {
  switch (s) {
    case StageStatus::converged: return "converged";
    case StageStatus::stalled: return "stalled";
    case StageStatus::blowup_suspected: return "blowup-suspected";
    case StageStatus::max_iters: return "max-iters";
  }
  return "?";
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::attained: return "attained";
    case Verdict::not_attained_bubbling: return "not-attained-bubbling";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

void validate(const OptimizerConfig& cfg, const OperatorModel& op) {
  if (cfg.k < 1) throw InvalidConfig("k must be >= 1");
  if (cfg.p_schedule.empty()) throw InvalidConfig("empty p schedule");
  const double pc = op.dims.n / (2.0 * op.dims.s);
  for (size_t i = 0; i < cfg.p_schedule.size(); ++i) {
    const double p = cfg.p_schedule[i];
    if (!(p > 1.0) || p < pc) throw InvalidConfig("every p must satisfy p >= n/(2s) and p > 1");
    if (i > 0 && !(p < cfg.p_schedule[i - 1]))
      throw InvalidConfig("p schedule must be strictly decreasing");
  }
  if (!(cfg.theta > 0.0 && cfg.theta <= 1.0)) throw InvalidConfig("theta must lie in (0, 1]");
  if (!(cfg.tol_fun > 0.0 && cfg.tol_residual > 0.0)) throw InvalidConfig("tolerances must be > 0");
  if (cfg.max_iters < 1) throw InvalidConfig("max_iters must be >= 1");
  if (cfg.floor_eps < 0.0) throw InvalidConfig("floor_eps must be >= 0");
  if (cfg.direction == Direction::min && cfg.k < op.k_plus)
    throw InvalidConfig("minimization needs k >= k_plus");
  if (cfg.direction == Direction::max && cfg.k > op.k_minus)
    throw InvalidConfig("maximization needs k <= k_minus");
}

Weight normalize_weight(const Weight& beta, double p, double floor_eps) {
  if (beta.is_constant()) {
    return constant_weight(beta.model, std::pow(beta.model->volume(), -1.0 / p));
  }
  Eigen::VectorXd v = beta.values;
  if (floor_eps > 0.0) v.array() += floor_eps * v.maxCoeff();
  Weight w = grid_weight(beta.model, std::move(v), Provenance::iterate);
  return w.scaled(1.0 / w.norm(p));
}

Weight seed_weight(const OperatorModel& op, const OptimizerConfig& cfg) {
  const ModelPtr& m = op.manifold;
  if (cfg.seed_values) return grid_weight(m, *cfg.seed_values, Provenance::iterate);
  if (cfg.seed_amplitude == 0.0) return constant_weight(m, 1.0);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd v(m->node_count());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = 1.0 + cfg.seed_amplitude * u(rng);
  return grid_weight(m, std::move(v), Provenance::iterate);
}

namespace {

GenEigenResult solve_for(const OperatorPtr& op, const Weight& beta, int k) {
  return solve_pencil(op, beta, k);
}

void check_sign(const OptimizerConfig& cfg, double lam) {
  if (cfg.direction == Direction::min && !(lam > 0.0))
    throw PreconditionViolation("minimization needs lambda_k > 0 at the iterate");
  if (cfg.direction == Direction::max && !(lam < 0.0))
    throw PreconditionViolation("maximization needs lambda_k < 0 at the iterate");
}

std::vector<double> cluster_values(const GenEigenResult& res, int k) {
  const EigenCluster c = eigencluster(res, k);
  std::vector<double> out;
  for (int m : c.members) out.push_back(res.lambda(m));
  return out;
}

}  // namespace

OptimizerState initial_state(const OperatorPtr& op, const OptimizerConfig& cfg, double p,
                             const Weight& beta0) {
  OptimizerState st;
  st.p = p;
  st.theta = cfg.theta;
  st.beta = normalize_weight(beta0, p, cfg.floor_eps);
  st.solution = solve_for(op, st.beta, cfg.k);
  if (cfg.k < st.solution->m_beta) throw PreconditionViolation("lambda_k(beta0) is -infinity");
  st.lambda_bar = st.solution->lambda(cfg.k);
  check_sign(cfg, st.lambda_bar);
  st.history.push_back(st.lambda_bar);
  st.cluster = cluster_values(*st.solution, cfg.k);
  return st;
}

bool el_step(const OperatorPtr& op, const OptimizerConfig& cfg, OptimizerState& st) {
  if (!st.solution) st.solution = solve_for(op, st.beta, cfg.k);
  const double p = st.p;
  const ELCertificate cert =
      el_certificate(*st.solution, cfg.k, p, cfg.direction, cfg.step_certificate);
  st.residual_history.push_back(cert.residual_norm);
  const Eigen::VectorXd& beta = st.beta.grid_values();
  Eigen::VectorXd next(beta.size());
  for (Eigen::Index q = 0; q < beta.size(); ++q) {
    const double bp = beta[q] > 0.0 ? std::pow(beta[q], p - 1.0) : 0.0;
    const double mix = (1.0 - st.theta) * bp + st.theta * cert.combination[q];
    next[q] = mix > 0.0 ? std::pow(mix, 1.0 / (p - 1.0)) : 0.0;
  }
  ++st.iterations;
  Weight cand = normalize_weight(grid_weight(st.beta.model, std::move(next), Provenance::iterate),
                                 p, cfg.floor_eps);
  GenEigenResult res = solve_for(op, cand, cfg.k);
  const bool finite = cfg.k >= res.m_beta;
  const double f = finite ? res.lambda(cfg.k) : kMinusInfinity;
  const bool better = finite && (cfg.direction == Direction::min ? f < st.lambda_bar
                                                                  : f > st.lambda_bar);
  if (better) {
    const double gain = std::abs(f - st.lambda_bar);
    st.beta = std::move(cand);
    st.lambda_bar = f;
    st.history.push_back(f);
    st.cluster = cluster_values(res, cfg.k);
    st.solution = std::move(res);
    st.theta = std::min(1.0, 1.5 * st.theta);
    if (gain <= cfg.tol_fun * std::abs(f)) {
      st.status = StageStatus::converged;
      st.done = true;
    }
    return true;
  }
  ++st.rejections;
  st.theta *= 0.5;
  if (st.theta < 1e-12) {
    st.status = StageStatus::stalled;
    st.done = true;
  }
  return false;
}

void optimize_at(const OperatorPtr& op, const OptimizerConfig& cfg, OptimizerState& st) {
  st.done = false;
  st.status = StageStatus::max_iters;
  const int start = st.iterations;
  while (!st.done && st.iterations - start < cfg.max_iters) el_step(op, cfg, st);
  const double peak =
      st.beta.is_constant() ? st.beta.constant_value : st.beta.values.maxCoeff();
  if (st.status != StageStatus::converged &&
      peak * std::pow(st.beta.model->volume(), 1.0 / st.p) > 50.0)
    st.status = StageStatus::blowup_suspected;
}

Extrapolation extrapolate(const std::vector<double>& p, const std::vector<double>& v, double p0,
                          int points) {
  Extrapolation e;
  const int n = std::min<int>(points, static_cast<int>(p.size()));
  e.points = n;
  if (n == 0) return e;
  if (n == 1) {
    e.value = v.back();
    return e;
  }
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    const size_t j = p.size() - n + i;
    X(i, 0) = 1.0;
    X(i, 1) = p[j] - p0;
    y[i] = v[j];
  }
  const Eigen::Vector2d c = X.colPivHouseholderQr().solve(y);
  e.value = c[0];
  e.slope = c[1];
  e.fit_residual = (X * c - y).norm() / std::sqrt(static_cast<double>(n));
  return e;
}

ContinuationResult continuation(const OperatorPtr& op, const OptimizerConfig& cfg) {
  validate(cfg, *op);
  ContinuationResult out;
  const double vol = op->manifold->volume();
  const double pc = op->dims.n / (2.0 * op->dims.s);
  Weight beta = seed_weight(*op, cfg);
  std::vector<double> ps, vals;
  for (double p : cfg.p_schedule) {
    OptimizerState st = initial_state(op, cfg, p, beta);
    optimize_at(op, cfg, st);
    const ELCertificate cert = el_certificate(*st.solution, cfg.k, p, cfg.direction);
    StageRecord rec;
    rec.p = p;
    rec.lambda_bar = st.lambda_bar;
    rec.lambda = st.solution->lambda(cfg.k);
    rec.residual = cert.residual_norm;
    rec.iterations = st.iterations;
    rec.rejections = st.rejections;
    rec.status = st.status;
    rec.cluster = st.cluster;
    rec.history = st.history;
    for (size_t i = 1; i < st.history.size(); ++i) {
      const bool ok = cfg.direction == Direction::min ? st.history[i] <= st.history[i - 1]
                                                      : st.history[i] >= st.history[i - 1];
      out.monotone_iterates = out.monotone_iterates && ok;
    }
    out.stages.push_back(rec);
    out.tail.push_back(Snapshot{p, rec.lambda, st.beta});
    if (static_cast<int>(out.tail.size()) > cfg.snapshots) out.tail.erase(out.tail.begin());
    ps.push_back(p);
    vals.push_back(st.lambda_bar);
    beta = st.beta;
    out.final_certificate = cert;
    out.final_state = std::move(st);
  }
  out.extrapolation = extrapolate(ps, vals, pc, 3);
  // Λ^p Vol^{-1/p} is monotone in p by Hölder
  for (size_t i = 1; i < ps.size(); ++i) {
    const double a = vals[i - 1] * std::pow(vol, -1.0 / ps[i - 1]);
    const double b = vals[i] * std::pow(vol, -1.0 / ps[i]);
    const double tol = 1e-6 * std::abs(a);
    const bool ok = cfg.direction == Direction::min ? b <= a + tol : b >= a - tol;
    out.holder_consistent = out.holder_consistent && ok;
  }
  return out;
}

VerdictReport attainment_verdict(const ContinuationResult& run, const ConcentrationReport& conc,
                                 double tol_residual, double reference, double reference_tol) {
  VerdictReport v;
  v.residual = run.final_certificate.residual_norm;
  v.flags = conc.flag_count();
  v.reference = reference;
  if (reference != 0.0)
    v.relative_gap = (run.extrapolation.value - reference) / std::abs(reference);
  if (v.flags == 0 && v.residual < tol_residual) {
    v.verdict = Verdict::attained;
  } else if (v.flags > 0 && (reference == 0.0 || std::abs(v.relative_gap) <= reference_tol)) {
    v.verdict = Verdict::not_attained_bubbling;
  } else {
    v.verdict = Verdict::inconclusive;
  }
  return v;
}

Eigen::MatrixXd spread_points(int dim, int k, unsigned long long seed) {
  if (dim < 1 || k < 1) throw PreconditionViolation("spread_points needs dim >= 1 and k >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd P(k, dim);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < dim; ++j) P(i, j) = g(rng);
    P.row(i).normalize();
  }
  for (int it = 0; it < 2000; ++it) {
    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(k, dim);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) {
        if (i == j) continue;
        const Eigen::RowVectorXd d = P.row(i) - P.row(j);
        F.row(i) += d / std::pow(d.squaredNorm() + 1e-12, 1.5);
      }
    for (int i = 0; i < k; ++i) {
      const Eigen::RowVectorXd x = P.row(i);
      const Eigen::RowVectorXd f = F.row(i) - F.row(i).dot(x) * x;
      P.row(i) = (x + 0.01 * f).normalized();
    }
  }
  return P;
}

Eigen::VectorXd bump_seed(const ManifoldModel& m, const Eigen::MatrixXd& points, double width,
                          double floor) {
  if (m.kind() != ManifoldKind::sphere || m.axial())
    throw PreconditionViolation("bump seeds need a full sphere model");
  const Grid& g = m.grid();
  if (points.cols() != g.coords.cols()) throw ModelMismatch("point dimension does not match");
  Eigen::VectorXd v = Eigen::VectorXd::Constant(g.weights.size(), floor);
  for (Eigen::Index q = 0; q < v.size(); ++q)
    for (Eigen::Index i = 0; i < points.rows(); ++i)
      v[q] += std::exp(-(g.coords.row(q) - points.row(i)).squaredNorm() / (width * width));
  return v;
}

InvariantEstimate estimate_sphere_invariant(const OperatorPtr& op, int k,
                                            const EstimateOptions& opt) {
  const ManifoldModel& m = *op->manifold;
  const double pc = op->dims.n / (2.0 * op->dims.s);
  OptimizerConfig cfg;
  cfg.k = k;
  cfg.max_iters = opt.iters;
  cfg.seed = opt.seed;
  for (double o : opt.offsets) cfg.p_schedule.push_back(pc + o);
  cfg.seed_values = bump_seed(m, spread_points(m.n() + 1, k, opt.seed), opt.bump_width);
  const ContinuationResult run = continuation(op, cfg);
  InvariantEstimate est;
  est.k = k;
  est.value = run.extrapolation.value;
  est.last_stage = run.stages.back().lambda_bar;
  est.residual = run.final_certificate.residual_norm;
  est.converged = std::all_of(run.stages.begin(), run.stages.end(), [](const StageRecord& r) {
    return r.status == StageStatus::converged;
  });
  std::vector<ScaledWeight> seq;
  for (const Snapshot& sn : run.tail) seq.push_back({sn.lambda, sn.beta});
  est.delta = std::min(4.0 * m.grid_spacing(), 0.5 * m.injectivity_radius());
  est.flags = detect_concentration(seq, op->dims.s, est.delta).flag_count();
  return est;
}

}  // namespace confspec
