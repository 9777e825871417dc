#include <benchmark/benchmark.h>

#include "drrho/kernels.hpp"
#include "drrho/rng.hpp"

using namespace drrho;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (std::size_t k = 0; k < m.size(); ++k) m.data()[k] = rng.normal();
  return m;
}

struct Inputs {
  Matrix w1, w2, x, y, e1, e2, s, g1, g2;
  std::vector<double> n1, n2;

  explicit Inputs(std::size_t b, std::size_t d = 16, std::size_t dx = 32)
      : w1(random_matrix(d, dx, 1)), w2(random_matrix(d, dx, 2)), x(random_matrix(b, dx, 3)),
        y(random_matrix(b, dx, 4)), e1(b, d), e2(b, d), s(random_matrix(b, b, 5)), g1(d, dx), g2(d, dx) {
    kernels::kSerial.embed(w1, x, e1, n1);
    kernels::kSerial.embed(w2, y, e2, n2);
  }
};

void embed(benchmark::State& state, const kernels::KernelSet& k) {
  Inputs in(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    k.embed(in.w1, in.x, in.e1, in.n1);
    benchmark::DoNotOptimize(in.e1.data());
  }
}

void gram(benchmark::State& state, const kernels::KernelSet& k) {
  Inputs in(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    k.gram(in.e1, in.e2, in.s);
    benchmark::DoNotOptimize(in.s.data());
  }
}

void backward(benchmark::State& state, const kernels::KernelSet& k) {
  Inputs in(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    k.backward(in.s, in.x, in.y, in.e1, in.e2, in.n1, in.n2, in.g1, in.g2);
    benchmark::DoNotOptimize(in.g1.data());
  }
}

}  // namespace

BENCHMARK_CAPTURE(embed, serial, kernels::kSerial)->Arg(256)->Arg(1024);
BENCHMARK_CAPTURE(embed, parallel, kernels::kParallel)->Arg(256)->Arg(1024);
BENCHMARK_CAPTURE(gram, serial, kernels::kSerial)->Arg(256)->Arg(1024);
BENCHMARK_CAPTURE(gram, parallel, kernels::kParallel)->Arg(256)->Arg(1024);
BENCHMARK_CAPTURE(backward, serial, kernels::kSerial)->Arg(256)->Arg(1024);
BENCHMARK_CAPTURE(backward, parallel, kernels::kParallel)->Arg(256)->Arg(1024);

BENCHMARK_MAIN();
