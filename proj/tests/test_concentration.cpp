#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "confspec/concentration.hpp"
#include "confspec/constants.hpp"
#include "confspec/discretization.hpp"
#include "confspec/errors.hpp"
#include "confspec/operator.hpp"

using namespace confspec;

TEST(Concentration, Threshold) {
  EXPECT_NEAR(concentration_threshold({3, 1}), 0.5 * std::pow(sobolev_constant_sq_inv({3, 1}), 1.5),
              1e-12);
  EXPECT_NEAR(concentration_threshold({2, 1}), 4.0 * std::numbers::pi, 1e-12);
}

TEST(Concentration, OrbitBallFraction) {
  const double h = std::numbers::pi / 2;
  EXPECT_NEAR(orbit_ball_fraction(3, h, h, h), 0.5, 1e-12);
  EXPECT_NEAR(orbit_ball_fraction(5, h, h, h), 0.5, 1e-12);
  EXPECT_EQ(orbit_ball_fraction(3, 0.0, 0.2, 0.3), 1.0);
  EXPECT_EQ(orbit_ball_fraction(3, 0.0, 0.4, 0.3), 0.0);
  EXPECT_EQ(orbit_ball_fraction(3, 1.0, 1.1, 2.5), 1.0);
  EXPECT_EQ(orbit_ball_fraction(3, 0.5, 1.5, 0.3), 0.0);
}

namespace {

Weight pole_bump(const ModelPtr& m, double width) {
  const Eigen::VectorXd t = m->grid().coords.col(0);
  Eigen::VectorXd v = (-(1.0 - t.array()) / width).exp() / std::pow(width, 2.0 / 1.5);
  v.array() += 1e-3;
  return grid_weight(m, v);
}

}  // namespace

TEST(Concentration, FlagsAxialBump) {
  auto m = ManifoldModel::build({ManifoldKind::sphere, 3, 40, 2.0, true});
  const Weight b = pole_bump(m, 0.01);
  const double mass = b.integral_power(1.5);
  const double lam = std::pow(3.0 * concentration_threshold({3, 1}) / mass, 1.0 / 1.5);
  const ConcentrationReport r = detect_concentration({{lam, b}}, 1, 0.4);
  ASSERT_EQ(r.flag_count(), 1);
  EXPECT_GT(r.flagged_points(0, 0), std::cos(0.4));
  EXPECT_NEAR(r.total_mass, 3.0 * r.threshold, 1e-9 * r.total_mass);
  const ConcentrationReport s = detect_concentration_serial({{lam, b}}, 1, 0.4);
  EXPECT_LT((r.local_masses - s.local_masses).cwiseAbs().maxCoeff(), 1e-12 * r.total_mass);
}

TEST(Concentration, FlatWeightIsNotFlagged) {
  auto m = ManifoldModel::build({ManifoldKind::sphere, 3, 6, 1.0, false});
  const Weight b = constant_weight(m, 1.0);
  // total mass 2·threshold spread evenly
  const double lam = std::pow(2.0 * concentration_threshold({3, 1}) / m->volume(), 1.0 / 1.5);
  const ConcentrationReport r = detect_concentration({{lam, b}}, 1, 0.5);
  EXPECT_EQ(r.flag_count(), 0);
  EXPECT_THROW(detect_concentration({{lam, b}}, 1, 3.5), PreconditionViolation);
}

TEST(Concentration, TwoPolesOnTorus) {
  auto m = ManifoldModel::build({ManifoldKind::torus, 2, 8, 2.0, false});
  const Grid& g = m->grid();
  Eigen::VectorXd v(m->node_count());
  for (Eigen::Index q = 0; q < v.size(); ++q) {
    Eigen::RowVectorXd a(2), b(2);
    a << 1.0, 1.0;
    b << 4.0, 4.0;
    v[q] = 1e-3 + 200.0 * std::exp(-std::pow(m->distance(g.coords.row(q), a) / 0.2, 2)) +
           200.0 * std::exp(-std::pow(m->distance(g.coords.row(q), b) / 0.2, 2));
  }
  const ConcentrationReport r = detect_concentration({{1.0, grid_weight(m, v)}}, 1, 0.6);
  EXPECT_EQ(r.flag_count(), 2);
}

TEST(Concentration, SphereXY) {
  const DimPair d{3, 1};
  const InvariantTable t = sphere_invariant_table(d, {{12.0, false}, {14.0, false}});
  const double l1 = sobolev_constant_sq_inv(d);
  const XYResult r1 = compute_X_Y(t, 1);
  EXPECT_NEAR(r1.X, l1, 1e-12);
  const XYResult r2 = compute_X_Y(t, 2);
  EXPECT_NEAR(r2.X_pow, 2.0 * std::pow(l1, 1.5), 1e-10);
  EXPECT_LE(r2.Y, r2.X + 1e-12);
  EXPECT_EQ(r2.x_partition.sphere_parts, (std::vector<int>{1, 1}));
  EXPECT_THROW(compute_X_Y(t, 9), PreconditionViolation);
}

TEST(Concentration, KernelEscape) {
  auto m = ManifoldModel::build({ManifoldKind::torus, 2, 3, 1.0, false});
  auto op = make_operator(m, 1);
  ASSERT_EQ(op->kernel_indices.size(), 1u);
  const int ker = op->kernel_indices[0].second;
  std::vector<Eigen::VectorXd> seq;
  for (double a : {1.0, 3.0, 10.0}) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(m->block_size(0));
    c[ker] = a;
    c[(ker + 1) % c.size()] = 0.1;
    seq.push_back(c);
  }
  const KernelEscapeReport r = kernel_escape_diagnostic(*op, seq);
  EXPECT_FALSE(r.kernel_trivial);
  EXPECT_TRUE(r.unbounded_regime);
  auto s = ManifoldModel::build({ManifoldKind::sphere, 3, 3, 1.0, false});
  EXPECT_TRUE(kernel_escape_diagnostic(*make_operator(s, 1), {}).kernel_trivial);
}
