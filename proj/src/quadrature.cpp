#include "confspec/quadrature.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "confspec/errors.hpp"

namespace confspec {

namespace {

// off-diagonal Jacobi coefficient for the symmetric weight (1-t^2)^a
double jacobi_b(int m, double a) {
  const double q = 2.0 * m + 2.0 * a;
  return std::sqrt(m * (m + 2.0 * a) / ((q + 1.0) * (q - 1.0)));
}

}  // namespace

double gegenbauer_mass(double a) {
  return std::sqrt(std::numbers::pi) * std::exp(std::lgamma(a + 1.0) - std::lgamma(a + 1.5));
}

void orthonormal_gegenbauer(int m, double a, double t, double* out) {
  out[0] = 1.0 / std::sqrt(gegenbauer_mass(a));
  if (m == 0) return;
  double b_prev = 0.0;
  for (int k = 0; k < m; ++k) {
    const double b_next = jacobi_b(k + 1, a);
    const double prev = k > 0 ? out[k - 1] : 0.0;
    out[k + 1] = (t * out[k] - b_prev * prev) / b_next;
    b_prev = b_next;
  }
}

Rule gauss_gegenbauer(int npts, double a) {
  if (npts < 1 || a <= -1.0) throw InvalidConfig("bad Gauss-Gegenbauer request");
  Rule r;
  r.x.resize(npts);
  r.w.resize(npts);
  if (npts == 1) {
    r.x[0] = 0.0;
    r.w[0] = gegenbauer_mass(a);
    return r;
  }
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(npts);
  Eigen::VectorXd sub(npts - 1);
  for (int k = 1; k < npts; ++k) sub[k - 1] = jacobi_b(k, a);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) throw NumericalFailure("Golub-Welsch eigensolve failed");
  const double mu0 = gegenbauer_mass(a);
  for (int i = 0; i < npts; ++i) {
    r.x[i] = es.eigenvalues()[i];
    const double v = es.eigenvectors()(0, i);
    r.w[i] = mu0 * v * v;
  }
  // symmetrize: the rule is exactly symmetric for an even weight
  for (int i = 0; i < npts / 2; ++i) {
    const int j = npts - 1 - i;
    const double x = 0.5 * (r.x[j] - r.x[i]);
    const double w = 0.5 * (r.w[i] + r.w[j]);
    r.x[i] = -x;
    r.x[j] = x;
    r.w[i] = r.w[j] = w;
  }
  if (npts % 2 == 1) r.x[npts / 2] = 0.0;
  return r;
}

Rule periodic_trapezoid(int npts) {
  Rule r;
  r.x.resize(npts);
  r.w.assign(npts, 2.0 * std::numbers::pi / npts);
  for (int i = 0; i < npts; ++i) r.x[i] = 2.0 * std::numbers::pi * i / npts;
  return r;
}

}  // namespace confspec
