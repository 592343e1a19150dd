#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "tpp/gemm.hpp"
#include "tpp/kernels.hpp"
#include "tpp/reference.hpp"

namespace {

std::vector<float> random_floats(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> d(0.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

struct BrgemmCase {
  std::int64_t mnk, n;
  std::vector<float> a, b, c;
  explicit BrgemmCase(const benchmark::State& st)
      : mnk(st.range(0)),
        n(st.range(1)),
        a(random_floats(static_cast<std::size_t>(mnk * mnk * n), 1)),
        b(random_floats(static_cast<std::size_t>(mnk * mnk * n), 2)),
        c(static_cast<std::size_t>(mnk * mnk)) {}
  tpp::BrgemmBatch batch() const { return tpp::BatchStride{a.data(), b.data(), mnk * mnk, mnk * mnk, n}; }
  double flops() const { return 2.0 * static_cast<double>(mnk * mnk * mnk * n); }
};

void BM_brgemm_openmp(benchmark::State& st) {
  BrgemmCase k(st);
  const auto spec = tpp::GemmSpec::plain(k.mnk, k.mnk, k.mnk);
  const auto batch = k.batch();
  for (auto _ : st) {
    tpp::brgemm(spec, batch, k.c.data());
    benchmark::DoNotOptimize(k.c.data());
  }
  st.counters["FLOPS"] = benchmark::Counter(k.flops(), benchmark::Counter::kIsIterationInvariantRate);
}

void BM_brgemm_reference(benchmark::State& st) {
  BrgemmCase k(st);
  const auto spec = tpp::GemmSpec::plain(k.mnk, k.mnk, k.mnk);
  const auto batch = k.batch();
  for (auto _ : st) {
    tpp::reference::brgemm(spec, batch, k.c.data());
    benchmark::DoNotOptimize(k.c.data());
  }
  st.counters["FLOPS"] = benchmark::Counter(k.flops(), benchmark::Counter::kIsIterationInvariantRate);
}

// Square FC: range(0) blocks per dimension of edge range(1).
template <bool Reference>
void BM_fc(benchmark::State& st) {
  const std::int64_t nb = st.range(0), b = st.range(1), e = nb * b;
  const auto A = random_floats(static_cast<std::size_t>(e * e), 3);
  const auto B = random_floats(static_cast<std::size_t>(e * e), 4);
  std::vector<float> C(static_cast<std::size_t>(e * e));
  const tpp::kernels::FcSpec spec{nb, nb, nb, b, b, b, std::nullopt};
  for (auto _ : st) {
    if constexpr (Reference)
      tpp::reference::fc_forward(nb, nb, nb, b, b, b, A.data(), B.data(), C.data());
    else
      tpp::kernels::fc_forward(spec, A.data(), B.data(), C.data());
    benchmark::DoNotOptimize(C.data());
  }
  st.counters["FLOPS"] =
      benchmark::Counter(2.0 * static_cast<double>(e * e * e), benchmark::Counter::kIsIterationInvariantRate);
}

void BM_softmax(benchmark::State& st) {
  const tpp::kernels::SoftmaxSpec s{st.range(0), st.range(1), st.range(2)};
  const std::int64_t rows = s.S2 * s.S3;
  tpp::Tensor X(rows, s.S1), Y(rows, s.S1);
  const auto v = random_floats(static_cast<std::size_t>(rows * s.S1), 5);
  std::copy(v.begin(), v.end(), X.data<float>());
  for (auto _ : st) {
    tpp::kernels::softmax(s, X.view(), Y.view());
    benchmark::DoNotOptimize(Y.data<float>());
  }
}

}  // namespace

BENCHMARK(BM_brgemm_openmp)->Args({32, 16})->Args({64, 16});
BENCHMARK(BM_brgemm_reference)->Args({32, 16})->Args({64, 16});
BENCHMARK(BM_fc<false>)->Name("BM_fc_openmp")->Args({4, 32})->Args({4, 64});
BENCHMARK(BM_fc<true>)->Name("BM_fc_reference")->Args({4, 32})->Args({4, 64});
BENCHMARK(BM_softmax)->Args({64, 32, 16})->Args({256, 64, 8});

BENCHMARK_MAIN();
