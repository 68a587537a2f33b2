#pragma once

#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "confspec/discretization.hpp"
#include "confspec/operator.hpp"

namespace confspec {

constexpr double kMinusInfinity = -std::numeric_limits<double>::infinity();

// Result of the symmetric pencil (A, B) with A symmetric, B positive semidefinite.
struct DensePencil {
  int neg_count = 0;       // directions forcing λ = -∞ (index m = neg_count + 1)
  int rank_b = 0;
  int coupled_zeros = 0;   // null directions of A on ker B coupled to range B
  int decoupled_zeros = 0; // 0/0 directions, dropped
  Eigen::VectorXd values;  // finite min-max values λ_m, λ_{m+1}, ... ascending
  Eigen::MatrixXd vectors; // B-orthonormal columns
  std::string path;        // "constant", "shifted", "schur"
  double shift = 0.0;
};

DensePencil solve_dense_pencil(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                               int max_vectors = -1, double rank_tol = 1e-10);

struct EigenEntry {
  double value = 0.0;
  int block = -1;  // -1 for -∞ sentinels
  int index = -1;  // column in the block's eigenvector matrix
  int copy = 0;    // copy of an axial block
};

struct Conditioning {
  std::vector<std::string> block_paths;
  double max_shift = 0.0;
  double orth_error = 0.0;
  double max_residual = 0.0;
  int blocks_computed = 0;
  int coupled_zeros = 0;
  int decoupled_zeros = 0;
};

struct GenEigenResult {
  Weight beta;
  OperatorPtr op;
  int m_beta = 1;
  std::vector<double> eigenvalues;  // λ_1, λ_2, ... (−∞ below m_beta)
  std::vector<EigenEntry> entries;
  std::vector<Eigen::MatrixXd> block_vectors;
  double rank_b = 0;
  double null_a_on_ker_b = 0;
  Conditioning cond;

  int count() const { return static_cast<int>(eigenvalues.size()); }
  double lambda(int k) const;  // 1-based
  Eigen::VectorXd vector(int k) const;
  // Grid values of the k-th eigenfunction (orbit representative in axial models).
  Eigen::VectorXd grid_values(int k) const;
};

struct SolveOptions {
  int k_max = 1;
  double rank_tol = 1e-10;
  double cluster_tol = 1e-6;
  bool all_blocks = false;  // axial models: skip the adaptive block stop
};

GenEigenResult solve_pencil(const OperatorPtr& op, const Weight& beta, const SolveOptions& opt);
GenEigenResult solve_pencil(const OperatorPtr& op, const Weight& beta, int k_max);

int detect_m(const OperatorPtr& op, const Weight& beta, double rank_tol = 1e-10);

struct EigenCluster {
  int k = 0;
  int i_k = 0;
  int I_k = 0;
  std::vector<int> members;  // 1-based indices i_k..I_k
};

EigenCluster eigencluster(const GenEigenResult& res, int k, double cluster_tol = 1e-6);

// Grid values of the cluster basis, one column per member.
Eigen::MatrixXd cluster_grid_values(const GenEigenResult& res, const EigenCluster& c);

}  // namespace confspec
