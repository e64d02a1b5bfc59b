#include <benchmark/benchmark.h>

#include <random>

#include "lsat/dense_ls.hpp"
#include "lsat/eq_ls.hpp"
#include "lsat/featurize.hpp"
#include "lsat/sparse_ls.hpp"

namespace {

lsat::DenseMatrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  lsat::DenseMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

// Args: k, n, m.
void BM_DenseSolve(benchmark::State& state) {
  const lsat::DenseMatrix a = random_matrix(state.range(0), state.range(1), 1);
  const lsat::DenseMatrix b = random_matrix(state.range(0), state.range(2), 2);
  for (auto _ : state) benchmark::DoNotOptimize(lsat::dense::solve(a, b).theta().data());
}
BENCHMARK(BM_DenseSolve)->Args({1000, 50, 10})->Args({5000, 200, 10})->Args({20000, 500, 10})
    ->Unit(benchmark::kMillisecond);

void BM_DenseBackward(benchmark::State& state) {
  const auto f = lsat::dense::solve(random_matrix(state.range(0), state.range(1), 1),
                                    random_matrix(state.range(0), state.range(2), 2));
  const lsat::DenseMatrix d_theta = lsat::DenseMatrix::Ones(state.range(1), state.range(2));
  for (auto _ : state) benchmark::DoNotOptimize(lsat::dense::backward(f, d_theta).d_a.data());
}
BENCHMARK(BM_DenseBackward)->Args({1000, 50, 10})->Args({5000, 200, 10})->Args({20000, 500, 10})
    ->Unit(benchmark::kMillisecond);

void BM_SparseSolve(benchmark::State& state) {
  const Eigen::Index k = state.range(0), n = state.range(1);
  lsat::DenseMatrix a = random_matrix(k, n, 3);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unit;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (unit(rng) > 0.02) a.data()[i] = 0.0;
  }
  for (Eigen::Index j = 0; j < n; ++j) a(j, j) += 1.0;
  const lsat::sparse::SparseMatrix sa = a.sparseView();
  const auto op = lsat::sparse::make_operator(sa);
  const lsat::DenseMatrix b = random_matrix(k, 1, 5);
  for (auto _ : state) benchmark::DoNotOptimize(lsat::sparse::solve_cg(op, b).theta.data());
}
BENCHMARK(BM_SparseSolve)->Args({5000, 500})->Args({20000, 2000})->Unit(benchmark::kMillisecond);

void BM_KktSolve(benchmark::State& state) {
  const Eigen::Index k = state.range(0), n = state.range(1), p = n / 4;
  const lsat::DenseMatrix a = random_matrix(k, n, 6), b = random_matrix(k, 5, 7);
  const lsat::DenseMatrix c = random_matrix(p, n, 8), d = random_matrix(p, 5, 9);
  for (auto _ : state) benchmark::DoNotOptimize(lsat::eq::solve_kkt(a, b, c, d).theta().data());
}
BENCHMARK(BM_KktSolve)->Args({1000, 50})->Args({5000, 200})->Unit(benchmark::kMillisecond);

void BM_ArchetypeSoftmax(benchmark::State& state) {
  const Eigen::Index rows = state.range(0);
  const lsat::feat::ArchetypeSoftmax f(lsat::feat::ArchetypeSet{random_matrix(50, 784, 10), 5});
  const lsat::DenseMatrix x = random_matrix(rows, 784, 11);
  const lsat::Vector params = lsat::Vector::Constant(1, 3.0);
  for (auto _ : state) benchmark::DoNotOptimize(f.map(x, params).data());
}
BENCHMARK(BM_ArchetypeSoftmax)->Arg(3500)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
