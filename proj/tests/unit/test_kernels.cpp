#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tpp/error.hpp"
#include "tpp/kernels.hpp"
#include "tpp/reference.hpp"
#include "util.hpp"

using namespace tpp;
using testutil::mat;
using testutil::values;

TEST_SUITE("kernels") {

TEST_CASE("softmax of a constant slice is uniform") {
  const kernels::SoftmaxSpec s{4, 3, 8};
  Tensor X = Tensor::filled(s.S2 * s.S3, s.S1, 2.5), Y(s.S2 * s.S3, s.S1), H(s.S2 * s.S3, s.S1);
  kernels::softmax(s, X.view(), Y.view());
  for (double v : values(Y)) CHECK(v == doctest::Approx(1.0 / 32.0).epsilon(1e-6));
  kernels::softmax(s, X.view(), H.view(), eq::Hybrid{4, 4});
  CHECK(values(H) == values(Y));
}

TEST_CASE("softmax slices are independent") {
  // S1 = 1, S3 = 2: two instances, each a column pair.
  const kernels::SoftmaxSpec s{1, 2, 2};
  const Tensor X = mat(4, 1, {0, 0, 1, 1 + std::log(3.0)});
  Tensor Y(4, 1);
  kernels::softmax(s, X.view(), Y.view());
  const auto v = values(Y);
  CHECK(v[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(v[1] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(v[2] == doctest::Approx(0.25).epsilon(1e-5));
  CHECK(v[3] == doctest::Approx(0.75).epsilon(1e-5));
}

TEST_CASE("softmax rejects tile fusion") {
  const kernels::SoftmaxSpec s{2, 1, 2};
  Tensor X(2, 2), Y(2, 2);
  CHECK_THROWS_AS(kernels::softmax(s, X.view(), Y.view(), eq::TileFused{2, 2}), Error);
}

TEST_CASE("layernorm of a constant column returns the shift") {
  const std::int64_t F = 16;
  Tensor X = Tensor::filled(F, 2, 2.0), out(F, 2), G = Tensor::filled(F, 1, 3.0), B(F, 1);
  for (std::int64_t i = 0; i < F; ++i) B.set(i, 0, 0.25 * static_cast<double>(i));
  const auto res = kernels::layernorm(X.view(), G.view(), B.view(), 1e-5f, out.view());
  for (std::int64_t j = 0; j < 2; ++j) {
    CHECK(res.mean.at(0, j) == 2.0);
    CHECK(res.var.at(0, j) == 0.0);
    for (std::int64_t i = 0; i < F; ++i) CHECK(out.at(i, j) == B.at(i, 0));
  }
}

TEST_CASE("layernorm two-point example") {
  // Features {1, 3}: mean 2, variance 1.
  const Tensor X = mat(2, 1, {1, 3});
  Tensor out(2, 1), G = Tensor::filled(2, 1, 1.0), B(2, 1);
  const auto res = kernels::layernorm(X.view(), G.view(), B.view(), 1e-5f, out.view());
  CHECK(res.mean.at(0, 0) == 2.0);
  CHECK(res.var.at(0, 0) == 1.0);
  const double s = 1.0 / std::sqrt(1.0 + 1e-5);
  CHECK(out.at(0, 0) == doctest::Approx(-s).epsilon(1e-6));
  CHECK(out.at(1, 0) == doctest::Approx(s).epsilon(1e-6));
}

TEST_CASE("layernorm argument checks") {
  Tensor X(4, 2), out(4, 2), G(4, 1), B(4, 1), bad(3, 1);
  CHECK_THROWS_AS(kernels::layernorm(X.view(), G.view(), B.view(), 0.0f, out.view()), Error);
  CHECK_THROWS_AS(kernels::layernorm(X.view(), bad.view(), B.view(), 1e-5f, out.view()), Error);
}

TEST_CASE("batchnorm scaling with unit parameters is the identity") {
  kernels::NormSpec s;
  s.N = 2, s.C = 3, s.H = 2, s.W = 2;
  const std::int64_t total = s.N * s.C * s.H * s.W;
  Tensor X(total, 1), Y(total, 1);
  for (std::int64_t i = 0; i < total; ++i) X.set(i, 0, 0.5 * static_cast<double>(i) - 3.0);
  const Tensor one = Tensor::filled(s.C, 1, 1.0), zero(s.C, 1);
  kernels::norm_scaling(s, X.view(), one.view(), zero.view(), one.view(), zero.view(), Y.view());
  CHECK(values(Y) == values(X));
}

TEST_CASE("groupnorm with one channel per group is instance norm") {
  kernels::NormSpec s;
  s.N = 2, s.C = 4, s.H = 3, s.W = 2;
  s.mode = kernels::NormMode::GroupNorm;
  s.groups = s.C;
  const std::int64_t HW = s.H * s.W, total = s.N * s.C * HW;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd(1.0, 2.0);
  Tensor X(total, 1), Y(total, 1), G(s.C, 1), B(s.C, 1), unused(s.C, 1);
  for (std::int64_t i = 0; i < total; ++i) X.set(i, 0, nd(rng));
  for (std::int64_t c = 0; c < s.C; ++c) G.set(c, 0, nd(rng)), B.set(c, 0, nd(rng));
  kernels::norm_scaling(s, X.view(), unused.view(), unused.view(), G.view(), B.view(), Y.view());
  for (std::int64_t n = 0; n < s.N; ++n)
    for (std::int64_t c = 0; c < s.C; ++c) {
      const std::int64_t base = (n * s.C + c) * HW;
      double m = 0, v = 0;
      for (std::int64_t p = 0; p < HW; ++p) m += X.at(base + p, 0);
      m /= static_cast<double>(HW);
      for (std::int64_t p = 0; p < HW; ++p) v += (X.at(base + p, 0) - m) * (X.at(base + p, 0) - m);
      v /= static_cast<double>(HW);
      const double rs = 1.0 / std::sqrt(v + 1e-5);
      for (std::int64_t p = 0; p < HW; ++p) {
        const double want = (X.at(base + p, 0) - m) * rs * G.at(c, 0) + B.at(c, 0);
        CHECK(Y.at(base + p, 0) == doctest::Approx(want).epsilon(1e-5).scale(1.0));
      }
    }
}

TEST_CASE("groupnorm requires the group count to divide channels") {
  kernels::NormSpec s;
  s.C = 4, s.mode = kernels::NormMode::GroupNorm, s.groups = 3;
  Tensor X(4, 1), Y(4, 1), v(4, 1);
  CHECK_THROWS_AS(kernels::norm_scaling(s, X.view(), v.view(), v.view(), v.view(), v.view(), Y.view()), Error);
}

TEST_CASE("split sgd with zero learning rate keeps every bit") {
  const Tensor W = mat(2, 3, {1.0000001, -2.5, 3.1415926, 1e-30, -0.0, 65504.0});
  SplitTensor s = split_fp32(W.view());
  const Tensor grad = Tensor::filled(2, 3, 7.0);
  kernels::split_sgd_step(s, grad.view(), 0.0f);
  const Tensor back = pack_fp32(s);
  for (std::int64_t i = 0; i < 2; ++i)
    for (std::int64_t j = 0; j < 3; ++j) {
      CHECK(back.at(i, j) == W.at(i, j));
      CHECK(std::signbit(back.at(i, j)) == std::signbit(W.at(i, j)));
    }
}

TEST_CASE("split sgd step reaching zero") {
  const Tensor W = mat(1, 3, {1.0000001, -2.5, 3.1415926});
  SplitTensor s = split_fp32(W.view());
  Tensor grad(1, 3);
  for (std::int64_t j = 0; j < 3; ++j) grad.set(0, j, 2.0 * W.at(0, j));
  kernels::split_sgd_step(s, grad.view(), 0.5f);
  for (double v : values(pack_fp32(s))) CHECK(v == 0.0);
}

TEST_CASE("split sgd keeps precision bf16 alone would lose") {
  const Tensor W = Tensor::filled(1, 1, 1.0);
  SplitTensor s = split_fp32(W.view());
  const Tensor grad = Tensor::filled(1, 1, 1.0);
  for (int i = 0; i < 16; ++i) kernels::split_sgd_step(s, grad.view(), 1.0f / 4096.0f);
  CHECK(pack_fp32(s).at(0, 0) == 1.0 - 16.0 / 4096.0);
}

TEST_CASE("embedding gather reduce") {
  const Tensor W = mat(2, 4, {1, 2, 3, 4, 10, 20, 30, 40});
  Tensor out(2, 1);
  kernels::embedding_gather_reduce(W.view(), {2}, out.view());
  CHECK(values(out) == std::vector<double>{3, 30});
  kernels::embedding_gather_reduce(W.view(), {1, 1, 3}, out.view());
  CHECK(values(out) == std::vector<double>{8, 80});
  CHECK_THROWS_AS(kernels::embedding_gather_reduce(W.view(), {4}, out.view()), Error);
}

TEST_CASE("fc with a single block is a small gemm") {
  kernels::FcSpec s;
  s.bm = 2, s.bn = 2, s.bk = 2;
  // A[bk][bm], B[bn][bk], C[bn][bm]: C(m, n) = sum_k A[k][m] * B[n][k].
  const float A[] = {1, 2, 3, 4};  // A(m=0,k=0)=1, A(1,0)=2, A(0,1)=3, A(1,1)=4
  const float B[] = {5, 6, 7, 8};  // B(k=0,n=0)=5, B(1,0)=6, B(0,1)=7, B(1,1)=8
  float C[4] = {};
  kernels::fc_forward(s, A, B, C);
  CHECK(C[0] == 1 * 5 + 3 * 6);
  CHECK(C[1] == 2 * 5 + 4 * 6);
  CHECK(C[2] == 1 * 7 + 3 * 8);
  CHECK(C[3] == 2 * 7 + 4 * 8);
}

TEST_CASE("fc relu matches the serial reference") {
  kernels::FcSpec s;
  s.Mb = 2, s.Nb = 3, s.Kb = 2, s.bm = 4, s.bn = 3, s.bk = 5;
  s.activation = UnaryKind::RELU;
  std::mt19937_64 rng(5);
  std::normal_distribution<float> nd;
  std::vector<float> A(static_cast<std::size_t>(s.Mb * s.Kb * s.bk * s.bm)), B(static_cast<std::size_t>(s.Nb * s.Kb * s.bn * s.bk));
  for (auto& v : A) v = nd(rng);
  for (auto& v : B) v = nd(rng);
  std::vector<float> C(static_cast<std::size_t>(s.Nb * s.Mb * s.bn * s.bm)), R(C.size());
  kernels::fc_forward(s, A.data(), B.data(), C.data());
  reference::fc_forward(s.Mb, s.Nb, s.Kb, s.bm, s.bn, s.bk, A.data(), B.data(), R.data());
  int clipped = 0;
  for (std::size_t i = 0; i < C.size(); ++i) {
    CHECK(C[i] == (R[i] > 0 ? R[i] : 0.0f));
    clipped += R[i] <= 0;
  }
  CHECK(clipped > 0);
}

TEST_CASE("pointwise conv is a channel mix") {
  kernels::DilatedConvSpec s{2, 3, 4, 4, 1, 1, 2};
  const float I[] = {1, 2, 3, 4, 5, 6, 7, 8};   // C x W, ld C
  const float Wt[] = {1, 0, 0, 1, 1, -1};       // [K][C][1]
  float O[12] = {};
  kernels::dilated_conv1d_forward(s, I, Wt, O);
  for (int q = 0; q < 4; ++q) {
    CHECK(O[q * 3 + 0] == I[q * 2]);
    CHECK(O[q * 3 + 1] == I[q * 2 + 1]);
    CHECK(O[q * 3 + 2] == I[q * 2] - I[q * 2 + 1]);
  }
}

TEST_CASE("dilated conv impulse response") {
  kernels::DilatedConvSpec s{1, 2, 9, 5, 3, 2, 2};  // W = Q + (S-1)d
  std::vector<float> I(9, 0.0f), O(10, -1.0f);
  I[4] = 1.0f;
  const float Wt[] = {1, 2, 3, 10, 20, 30};
  kernels::dilated_conv1d_forward(s, I.data(), Wt, O.data());
  for (int q = 0; q < 5; ++q)
    for (int k = 0; k < 2; ++k) {
      float want = 0.0f;
      for (int t = 0; t < 3; ++t)
        if (q + t * 2 == 4) want = Wt[k * 3 + t];
      CHECK(O[static_cast<std::size_t>(q * 2 + k)] == want);
    }
}

TEST_CASE("binary reduce aggregate examples") {
  const Tensor t0 = mat(2, 3, {1, 2, 3, 4, 5, 6});
  const Tensor t1 = mat(2, 2, {10, 20, 30, 40});
  Tensor out(2, 1);
  kernels::binary_reduce_aggregate(t0.view(), t1.view(), {0, 2}, {1, 1}, BinaryKind::MUL, ReduceOp::Sum, out.view());
  CHECK(values(out) == std::vector<double>{1 * 20 + 3 * 20, 4 * 40 + 6 * 40});
  kernels::binary_reduce_aggregate(t0.view(), t1.view(), {0, 1, 2}, {0, 1, 0}, BinaryKind::ADD, ReduceOp::Max,
                                   out.view());
  CHECK(values(out) == std::vector<double>{22, 45});
  kernels::binary_reduce_aggregate(t0.view(), t1.view(), {0, 1}, {0, 1}, BinaryKind::SUB, ReduceOp::Min, out.view());
  CHECK(values(out) == std::vector<double>{-18, -35});
  CHECK_THROWS_AS(kernels::binary_reduce_aggregate(t0.view(), t1.view(), {0}, {0, 1}, BinaryKind::ADD,
                                                   ReduceOp::Sum, out.view()),
                  Error);
}

TEST_CASE("composite kernels use only primitives") {
  const char* forbidden[] = {".at(", ".set(", "load_element", "store_element", "data<", "as<", "raw()"};
  int files = 0;
  for (const auto& e : std::filesystem::directory_iterator(std::string(TPP_SOURCE_DIR) + "/src/kernels")) {
    if (e.path().extension() != ".cpp") continue;
    ++files;
    std::ifstream f(e.path());
    std::stringstream ss;
    ss << f.rdbuf();
    const std::string src = ss.str();
    for (const char* tok : forbidden) {
      CAPTURE(e.path().string());
      CAPTURE(tok);
      CHECK(src.find(tok) == std::string::npos);
    }
  }
  CHECK(files >= 5);
}

}  // TEST_SUITE
