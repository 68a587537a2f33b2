#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace confspec {

enum class ManifoldKind { sphere, torus };

std::string to_string(ManifoldKind k);
ManifoldKind manifold_kind_from_string(const std::string& s);

struct ModelSpec {
  ManifoldKind kind = ManifoldKind::sphere;
  int n = 3;
  int truncation = 4;         // max degree L (sphere) or max lattice norm (torus)
  double quad_density = 1.0;  // oversampling factor >= 1
  bool axial = false;         // sphere only: reduction to weights depending on the polar angle
};

// A set of basis profiles sharing one weighted Gram matrix. Full sphere and
// torus models have a single block; the axial sphere model has one block per
// degree j of the S^{n-1} harmonic, each repeated `multiplicity` times.
struct Block {
  int index = 0;
  double multiplicity = 1.0;
  std::vector<int> degree;
  Eigen::VectorXd laplace;
};

struct Grid {
  Eigen::MatrixXd coords;  // sphere: points of R^{n+1}; torus: angles in [0, 2π)^n
  Eigen::VectorXd weights;
  std::vector<Eigen::MatrixXd> phi;  // per block, nodes x profiles
};

class ManifoldModel {
 public:
  static std::shared_ptr<const ManifoldModel> build(const ModelSpec& spec);

  const ModelSpec& spec() const { return spec_; }
  ManifoldKind kind() const { return spec_.kind; }
  int n() const { return spec_.n; }
  bool axial() const { return spec_.axial; }
  int truncation() const { return spec_.truncation; }
  double volume() const { return volume_; }

  const std::vector<Block>& blocks() const { return blocks_; }
  int block_count() const { return static_cast<int>(blocks_.size()); }
  int block_size(int b) const { return static_cast<int>(blocks_[b].degree.size()); }
  double basis_size() const;

  // Built on first use; safe to call concurrently.
  const Grid& grid() const;
  bool grid_built() const { return grid_ready_; }
  int node_count() const;

  // Profiles of block b at arbitrary points (rows in the coordinate convention of Grid).
  Eigen::MatrixXd evaluate_block(int b, const Eigen::MatrixXd& points, bool parallel = true) const;

  // Geodesic distance between two coordinate rows (full sphere, axial meridian, torus).
  double distance(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                  const Eigen::Ref<const Eigen::RowVectorXd>& b) const;
  double injectivity_radius() const;
  double grid_spacing() const;

  // Torus lattice data for block 0: mode vectors and kind (0 const, 1 cos, 2 sin).
  const std::vector<std::vector<int>>& torus_modes() const { return modes_; }
  const std::vector<int>& torus_mode_kind() const { return mode_kind_; }
  // Full-sphere index tuples (m_0..m_{n-1}) and trig kind (1 cos, 2 sin) for block 0.
  const std::vector<std::vector<int>>& sphere_tuples() const { return tuples_; }
  const std::vector<int>& sphere_trig() const { return trig_; }

  ManifoldModel(const ManifoldModel&) = delete;
  ManifoldModel& operator=(const ManifoldModel&) = delete;

 private:
  explicit ManifoldModel(const ModelSpec& spec);
  void build_grid() const;
  Eigen::MatrixXd eval_sphere(const Eigen::MatrixXd& pts, bool parallel) const;
  Eigen::MatrixXd eval_axial(int b, const Eigen::MatrixXd& pts, bool parallel) const;
  Eigen::MatrixXd eval_torus(const Eigen::MatrixXd& pts, bool parallel) const;

  ModelSpec spec_;
  double volume_ = 0.0;
  std::vector<Block> blocks_;
  std::vector<std::vector<int>> modes_;
  std::vector<int> mode_kind_;
  std::vector<std::vector<int>> tuples_;
  std::vector<int> trig_;

  mutable std::once_flag grid_once_;
  mutable std::unique_ptr<Grid> grid_;
  mutable bool grid_ready_ = false;
};

using ModelPtr = std::shared_ptr<const ManifoldModel>;

struct GridFunction {
  ModelPtr model;
  Eigen::VectorXd values;
};

struct CoefVector {
  ModelPtr model;
  int block = 0;
  Eigen::VectorXd coef;
};

enum class Provenance { constant, iterate, singular_family, user };
std::string to_string(Provenance p);

// Nonnegative weight on the quadrature grid. Constant weights keep their value
// symbolically so that the grid is never needed for them.
struct Weight {
  ModelPtr model;
  Provenance provenance = Provenance::user;
  double constant_value = 0.0;
  Eigen::VectorXd values;

  bool is_constant() const { return provenance == Provenance::constant; }
  const Eigen::VectorXd& grid_values() const;
  double norm(double p) const;
  double integral_power(double q) const;  // ∫ β^q
  Weight scaled(double mu) const;

 private:
  mutable Eigen::VectorXd expanded_;
};

Weight constant_weight(const ModelPtr& model, double c);
Weight grid_weight(const ModelPtr& model, Eigen::VectorXd values,
                   Provenance prov = Provenance::user);

CoefVector analyze(const GridFunction& f, int block = 0);
GridFunction synthesize(const CoefVector& c);
double aliasing_residual(const GridFunction& f);
double lp_norm(const GridFunction& f, double p);

// B_ij = Σ_q w_q β(q) φ_i(q) φ_j(q) for the given block
Eigen::MatrixXd weighted_gram(const Weight& beta, int block = 0);

double gram_identity_error(const ManifoldModel& m);

}  // namespace confspec
