#pragma once

#include <Eigen/Dense>

namespace confspec::kernels {

// Thread count from CONFSPEC_THREADS when set (InvalidConfig if malformed), otherwise
// the OpenMP default.
int configured_threads();
void apply_thread_env();

// B = Φᵀ diag(w) Φ
Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd& phi, const Eigen::VectorXd& w);
Eigen::MatrixXd weighted_gram_serial(const Eigen::MatrixXd& phi, const Eigen::VectorXd& w);

// c = Φᵀ (w ∘ f)
Eigen::VectorXd project(const Eigen::MatrixXd& phi, const Eigen::VectorXd& w,
                        const Eigen::VectorXd& f);
Eigen::VectorXd project_serial(const Eigen::MatrixXd& phi, const Eigen::VectorXd& w,
                               const Eigen::VectorXd& f);

// f = Φ c
Eigen::VectorXd expand(const Eigen::MatrixXd& phi, const Eigen::VectorXd& c);
Eigen::VectorXd expand_serial(const Eigen::MatrixXd& phi, const Eigen::VectorXd& c);

// mass[i] = Σ_q w_q g_q overlap(i, q) for every center i
template <class Overlap>
Eigen::VectorXd local_masses(int centers, const Eigen::VectorXd& wg, Overlap overlap) {
  Eigen::VectorXd mass(centers);
#pragma omp parallel for schedule(dynamic, 4)
  for (int i = 0; i < centers; ++i) {
    double acc = 0.0;
    for (Eigen::Index q = 0; q < wg.size(); ++q) {
      if (wg[q] == 0.0) continue;
      const double f = overlap(i, q);
      if (f > 0.0) acc += f * wg[q];
    }
    mass[i] = acc;
  }
  return mass;
}

template <class Overlap>
Eigen::VectorXd local_masses_serial(int centers, const Eigen::VectorXd& wg, Overlap overlap) {
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(centers);
  for (int i = 0; i < centers; ++i)
    for (Eigen::Index q = 0; q < wg.size(); ++q) mass[i] += overlap(i, q) * wg[q];
  return mass;
}

}  // namespace confspec::kernels
