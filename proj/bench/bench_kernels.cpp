#include <benchmark/benchmark.h>

#include <random>

#include "qlqr/kernels.hpp"

using namespace qlqr;

namespace {

struct Problem {
  Mat X, Znext, Q, R, H, F;
  Vec y;
};

Problem make(int N, int nx, int nu) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> g;
  const int n = nx + nu;
  Problem p;
  p.X = Mat::NullaryExpr(N, n, [&] { return g(rng); });
  p.Znext = Mat::NullaryExpr(N, n, [&] { return g(rng); });
  p.Q = Mat::Identity(nx, nx);
  p.R = Mat::Identity(nu, nu);
  const Mat S = Mat::NullaryExpr(n, n, [&] { return g(rng); });
  p.H = S * S.transpose();
  p.F = kernels::serial::quadratic_design(p.X);
  p.y = Vec::NullaryExpr(N, [&] { return g(rng); });
  return p;
}

template <class Fn>
void run(benchmark::State& st, Fn fn) {
  const Problem p = make(static_cast<int>(st.range(0)), static_cast<int>(st.range(1)), 1);
  for (auto _ : st) benchmark::DoNotOptimize(fn(p));
}

}  // namespace

#define PAIR(name, expr)                                                     \
  static void BM_serial_##name(benchmark::State& st) {                       \
    run(st, [](const Problem& p) { using namespace kernels::serial; return expr; }); \
  }                                                                          \
  static void BM_omp_##name(benchmark::State& st) {                          \
    run(st, [](const Problem& p) { using namespace kernels::omp; return expr; });    \
  }                                                                          \
  BENCHMARK(BM_serial_##name)->Args({100, 4})->Args({2000, 4})->Args({2000, 10}); \
  BENCHMARK(BM_omp_##name)->Args({100, 4})->Args({2000, 4})->Args({2000, 10})

PAIR(design, quadratic_design(p.X));
PAIR(labels, bellman_labels({p.X, p.Znext, p.Q, p.R, 0.95, p.H}));
PAIR(gram, gram(p.F));
PAIR(gram_rhs, gram_rhs(p.F, p.y));

BENCHMARK_MAIN();
