#include "oracles.hpp"

#include <cmath>
#include <functional>
#include <limits>

namespace oracle {

double sphere_eigenvalue(int n, int s, int l) {
  double v = 1.0;
  for (int j = 1; j <= s; ++j) v *= (l + 0.5 * n + j - 1.0) * (l + 0.5 * n - j);
  return v;
}

namespace {

long long binom(int a, int b) {
  if (b < 0 || a < b) return 0;
  long long r = 1;
  for (int i = 1; i <= b; ++i) r = r * (a - b + i) / i;
  return r;
}

}  // namespace

long long harmonic_multiplicity(int n, int l) { return binom(l + n, n) - binom(l + n - 2, n); }

Pencil dense_pencil(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double rank_tol) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eb(B);
  const Eigen::VectorXd& mu = eb.eigenvalues();
  const double cut = rank_tol * std::max(mu.cwiseAbs().maxCoeff(), 1e-300);
  std::vector<int> range, kernel;
  for (int i = 0; i < mu.size(); ++i) (mu[i] > cut ? range : kernel).push_back(i);
  const int r = static_cast<int>(range.size()), z = static_cast<int>(kernel.size());
  Eigen::MatrixXd U(A.rows(), r), Z(A.rows(), z);
  Eigen::VectorXd sigma(r);
  for (int i = 0; i < r; ++i) {
    U.col(i) = eb.eigenvectors().col(range[i]);
    sigma[i] = mu[range[i]];
  }
  for (int i = 0; i < z; ++i) Z.col(i) = eb.eigenvectors().col(kernel[i]);

  Pencil out;
  out.rank_b = r;
  Eigen::MatrixXd S = U.transpose() * A * U;
  if (z > 0) {
    const Eigen::MatrixXd azz = Z.transpose() * A * Z;
    const Eigen::MatrixXd auz = U.transpose() * A * Z;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ez(azz);
    for (int i = 0; i < z; ++i) out.negative_kernel += ez.eigenvalues()[i] < 0.0;
    S -= auz * ez.eigenvectors() * ez.eigenvalues().cwiseInverse().asDiagonal() *
         ez.eigenvectors().transpose() * auz.transpose();
  }
  // S v = λ Σ v with Σ diagonal and positive
  const Eigen::VectorXd isq = sigma.cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd C = isq.asDiagonal() * S * isq.asDiagonal();
  C = 0.5 * (C + C.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ec(C);
  for (int i = 0; i < r - out.negative_kernel; ++i) out.values.push_back(ec.eigenvalues()[i]);
  return out;
}

Thresholds brute_force_xy(const confspec::InvariantTable& t, int k) {
  const double e = t.dims.n / (2.0 * t.dims.s);
  const double inf = std::numeric_limits<double>::infinity();
  Thresholds out{inf, inf};
  // every ordered tuple of positive parts summing to `target`
  std::vector<int> parts;
  std::function<void(int, double, bool)> walk = [&](int left, double base, bool all_attained) {
    if (left == 0) {
      if (parts.empty()) return;
      out.Y_pow = std::min(out.Y_pow, base);
      if (all_attained) out.X_pow = std::min(out.X_pow, base);
      return;
    }
    for (int l = 1; l <= left; ++l) {
      const confspec::InvariantEntry& s = t.sphere[l - 1];
      parts.push_back(l);
      walk(left - l, base + std::pow(s.value, e), all_attained && s.attained);
      parts.pop_back();
    }
  };
  walk(k - t.k_plus + 1, 0.0, true);
  for (int l0 = t.k_plus; l0 <= k - 1; ++l0) {
    const confspec::InvariantEntry& m = t.manifold[l0 - 1];
    walk(k - l0, std::pow(m.value, e), m.attained);
  }
  return out;
}

}  // namespace oracle
