// Serial reference kernels against their OpenMP versions.
#include <benchmark/benchmark.h>

#include "l96/chaos.hpp"
#include "l96/dictionary.hpp"
#include "l96/enkf.hpp"
#include "l96/regression.hpp"
#include "l96/stats.hpp"

using namespace l96;

namespace {

Exec exec_of(const benchmark::State& st) { return st.range(0) ? Exec::parallel : Exec::serial; }

void label(benchmark::State& st) { st.SetLabel(st.range(0) ? "parallel" : "serial"); }

void BM_FullRhs(benchmark::State& st) {
  ModelParams p;
  p.J = static_cast<int>(st.range(1));
  Rng rng(1);
  const Eigen::VectorXd x = random_initial_state(p, rng).packed();
  Eigen::VectorXd out(p.full_dim());
  for (auto _ : st) {
    full_rhs(x, p, out, exec_of(st));
    benchmark::DoNotOptimize(out.data());
  }
  label(st);
}
BENCHMARK(BM_FullRhs)->ArgsProduct({{0, 1}, {10, 100}});

void BM_TangentApply(benchmark::State& st) {
  ModelParams p;
  Rng rng(2);
  std::normal_distribution<double> n(0, 1);
  Eigen::VectorXd X(p.K);
  for (auto& v : X) v = n(rng);
  RowMatrixXd V = RowMatrixXd::Random(p.K, p.K), out;
  for (auto _ : st) {
    slow_jacobian_apply(X, V, out, exec_of(st));
    benchmark::DoNotOptimize(out.data());
  }
  label(st);
}
BENCHMARK(BM_TangentApply)->Args({0})->Args({1});

void BM_Kde(benchmark::State& st) {
  Rng rng(3);
  std::normal_distribution<double> n(0, 3);
  Eigen::VectorXd s(10000);
  for (auto& v : s) v = n(rng);
  const Eigen::VectorXd grid = uniform_grid(-15, 15, 512);
  for (auto _ : st) benchmark::DoNotOptimize(kde(s, grid, 0.3, exec_of(st)).density.data());
  label(st);
}
BENCHMARK(BM_Kde)->Args({0})->Args({1})->Unit(benchmark::kMillisecond);

void BM_AverageKl(benchmark::State& st) {
  Rng rng(4);
  std::normal_distribution<double> n(0, 3);
  Eigen::MatrixXd a(5000, 40), b(5000, 40);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    a.data()[i] = n(rng);
    b.data()[i] = n(rng);
  }
  for (auto _ : st) benchmark::DoNotOptimize(average_kl(a, b, {}, exec_of(st)));
  label(st);
}
BENCHMARK(BM_AverageKl)->Args({0})->Args({1})->Unit(benchmark::kMillisecond);

void BM_Dictionary(benchmark::State& st) {
  Rng rng(5);
  std::normal_distribution<double> n(0, 3);
  Eigen::MatrixXd X(2000, 40);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = n(rng);
  const auto cols = enumerate_monomials(40, 2, DegreeMode::up_to);
  for (auto _ : st) benchmark::DoNotOptimize(build_dictionary(X, cols, true, exec_of(st)).matrix.data());
  label(st);
}
BENCHMARK(BM_Dictionary)->Args({0})->Args({1})->Unit(benchmark::kMillisecond);

void BM_EnsembleForecast(benchmark::State& st) {
  ModelParams p;
  const ReducedModel m{p, WilksModel{{0.0, -0.47, 0.003, 0.005, -0.0003}}.closure(), {make_ar_model(0.95, 0.17)}};
  const ReducedPropagator prop(m);
  const EnsembleState start = make_ensemble(Eigen::VectorXd::Constant(p.K, 2.0), 40, 0.5, 6);
  for (auto _ : st) {
    EnsembleState e = start;
    benchmark::DoNotOptimize(forecast(e, prop, 20, NoiseSpec::none(), exec_of(st)).mean.data());
  }
  label(st);
}
BENCHMARK(BM_EnsembleForecast)->Args({0})->Args({1})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
