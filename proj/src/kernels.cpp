#include "confspec/kernels.hpp"

#include <cstdlib>
#include <string>

#include <omp.h>

#include "confspec/errors.hpp"

namespace confspec::kernels {

namespace {
constexpr Eigen::Index kColumnBlock = 64;
}

int configured_threads() {
  if (const char* env = std::getenv("CONFSPEC_THREADS")) {
    char* end = nullptr;
    const long t = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || t < 1 || t > 4096)
      throw InvalidConfig("CONFSPEC_THREADS must be a positive integer");
    return static_cast<int>(t);
  }
  return omp_get_max_threads();
}

void apply_thread_env() { omp_set_num_threads(configured_threads()); }

Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd& phi, const Eigen::VectorXd& w) {
  const Eigen::Index nq = phi.rows(), nb = phi.cols();
  Eigen::MatrixXd scaled(nq, nb);
#pragma omp parallel for
  for (Eigen::Index j = 0; j < nb; ++j) scaled.col(j) = phi.col(j).cwiseProduct(w);
  Eigen::MatrixXd out(nb, nb);
  const Eigen::Index blocks = (nb + kColumnBlock - 1) / kColumnBlock;
  // fixed column blocks keep the result independent of the thread count
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index b = 0; b < blocks; ++b) {
    const Eigen::Index j0 = b * kColumnBlock;
    const Eigen::Index len = std::min(kColumnBlock, nb - j0);
    out.middleCols(j0, len).noalias() = phi.transpose() * scaled.middleCols(j0, len);
  }
  Eigen::MatrixXd sym = 0.5 * (out + out.transpose());
  return sym;
}

Eigen::MatrixXd weighted_gram_serial(const Eigen::MatrixXd& phi, const Eigen::VectorXd& w) {
  const Eigen::Index nq = phi.rows(), nb = phi.cols();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(nb, nb);
  for (Eigen::Index i = 0; i < nb; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      double acc = 0.0;
      for (Eigen::Index q = 0; q < nq; ++q) acc += phi(q, i) * w[q] * phi(q, j);
      out(i, j) = out(j, i) = acc;
    }
  return out;
}

Eigen::VectorXd project(const Eigen::MatrixXd& phi, const Eigen::VectorXd& w,
                        const Eigen::VectorXd& f) {
  const Eigen::VectorXd wf = w.cwiseProduct(f);
  Eigen::VectorXd c(phi.cols());
#pragma omp parallel for
  for (Eigen::Index j = 0; j < phi.cols(); ++j) c[j] = phi.col(j).dot(wf);
  return c;
}

Eigen::VectorXd project_serial(const Eigen::MatrixXd& phi, const Eigen::VectorXd& w,
                               const Eigen::VectorXd& f) {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(phi.cols());
  for (Eigen::Index j = 0; j < phi.cols(); ++j)
    for (Eigen::Index q = 0; q < phi.rows(); ++q) c[j] += phi(q, j) * w[q] * f[q];
  return c;
}

Eigen::VectorXd expand(const Eigen::MatrixXd& phi, const Eigen::VectorXd& c) {
  Eigen::VectorXd f(phi.rows());
#pragma omp parallel for
  for (Eigen::Index q = 0; q < phi.rows(); ++q) f[q] = phi.row(q).dot(c);
  return f;
}

Eigen::VectorXd expand_serial(const Eigen::MatrixXd& phi, const Eigen::VectorXd& c) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(phi.rows());
  for (Eigen::Index q = 0; q < phi.rows(); ++q)
    for (Eigen::Index j = 0; j < phi.cols(); ++j) f[q] += phi(q, j) * c[j];
  return f;
}

}  // namespace confspec::kernels
