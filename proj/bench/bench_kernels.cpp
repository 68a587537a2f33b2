#include <benchmark/benchmark.h>

#include <map>
#include <random>

#include "confspec/discretization.hpp"
#include "confspec/kernels.hpp"

using namespace confspec;

namespace {

struct Fixture {
  Eigen::MatrixXd phi;
  Eigen::VectorXd w, f, c;
  Eigen::MatrixXd pts;
};

const Fixture& fixture(int L) {
  static std::map<int, Fixture> cache;
  auto it = cache.find(L);
  if (it != cache.end()) return it->second;
  auto m = ManifoldModel::build({ManifoldKind::sphere, 3, L, 1.0, false});
  const Grid& g = m->grid();
  Fixture fx;
  fx.phi = g.phi[0];
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  fx.w = g.weights;
  fx.f = Eigen::VectorXd::NullaryExpr(fx.phi.rows(), [&] { return u(rng); });
  fx.c = Eigen::VectorXd::NullaryExpr(fx.phi.cols(), [&] { return u(rng); });
  fx.pts = g.coords;
  return cache.emplace(L, std::move(fx)).first->second;
}

template <bool Parallel>
void BM_WeightedGram(benchmark::State& st) {
  const Fixture& fx = fixture(static_cast<int>(st.range(0)));
  const Eigen::VectorXd wf = fx.w.cwiseProduct(fx.f);
  for (auto _ : st)
    benchmark::DoNotOptimize(Parallel ? kernels::weighted_gram(fx.phi, wf)
                                      : kernels::weighted_gram_serial(fx.phi, wf));
}

template <bool Parallel>
void BM_Project(benchmark::State& st) {
  const Fixture& fx = fixture(static_cast<int>(st.range(0)));
  for (auto _ : st)
    benchmark::DoNotOptimize(Parallel ? kernels::project(fx.phi, fx.w, fx.f)
                                      : kernels::project_serial(fx.phi, fx.w, fx.f));
}

template <bool Parallel>
void BM_Expand(benchmark::State& st) {
  const Fixture& fx = fixture(static_cast<int>(st.range(0)));
  for (auto _ : st)
    benchmark::DoNotOptimize(Parallel ? kernels::expand(fx.phi, fx.c)
                                      : kernels::expand_serial(fx.phi, fx.c));
}

template <bool Parallel>
void BM_LocalMasses(benchmark::State& st) {
  const Fixture& fx = fixture(static_cast<int>(st.range(0)));
  const Eigen::VectorXd wg = fx.w.cwiseProduct(fx.f);
  const double cos_delta = std::cos(0.3);
  auto overlap = [&](int i, Eigen::Index q) {
    return fx.pts.row(i).dot(fx.pts.row(q)) > cos_delta ? 1.0 : 0.0;
  };
  const int centers = static_cast<int>(fx.pts.rows());
  for (auto _ : st)
    benchmark::DoNotOptimize(Parallel ? kernels::local_masses(centers, wg, overlap)
                                      : kernels::local_masses_serial(centers, wg, overlap));
}

}  // namespace

BENCHMARK(BM_WeightedGram<false>)->Arg(4)->Arg(8);
BENCHMARK(BM_WeightedGram<true>)->Arg(4)->Arg(8);
BENCHMARK(BM_Project<false>)->Arg(4)->Arg(8);
BENCHMARK(BM_Project<true>)->Arg(4)->Arg(8);
BENCHMARK(BM_Expand<false>)->Arg(4)->Arg(8);
BENCHMARK(BM_Expand<true>)->Arg(4)->Arg(8);
BENCHMARK(BM_LocalMasses<false>)->Arg(4);
BENCHMARK(BM_LocalMasses<true>)->Arg(4);

BENCHMARK_MAIN();
