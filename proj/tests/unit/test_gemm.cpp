#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <vector>

#include "doctest.h"
#include "tpp/gemm.hpp"
#include "tpp/reference.hpp"
#include "util.hpp"

using namespace tpp;

namespace {

std::vector<double> randn(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

std::vector<float> to_float(const std::vector<double>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST_SUITE("gemm-engine") {
  TEST_CASE("identity times X") {
    const float I[] = {1, 0, 0, 1}, X[] = {1, 2, 3, 4};
    float C[4] = {9, 9, 9, 9};
    gemm(GemmSpec::plain(2, 2, 2), I, X, C);
    CHECK(std::memcmp(C, X, sizeof C) == 0);
  }

  TEST_CASE("fp64 gemm equals the ordered triple loop bitwise") {
    const auto A = randn(9, 1), B = randn(9, 2);
    double C[9], R[9];
    gemm(GemmSpec::plain(3, 3, 3, DType::FP64), A.data(), B.data(), C);
    for (int j = 0; j < 3; ++j)
      for (int i = 0; i < 3; ++i) {
        double acc = 0.0;
        for (int k = 0; k < 3; ++k) acc += A[static_cast<std::size_t>(i + 3 * k)] * B[static_cast<std::size_t>(k + 3 * j)];
        R[i + 3 * j] = acc;
      }
    CHECK(std::memcmp(C, R, sizeof C) == 0);
  }

  TEST_CASE("beta one accumulates into C") {
    const float A[] = {1, 2, 3, 4}, B[] = {1, 0, 0, 1};
    float C[] = {1, 1, 1, 1};
    auto s = GemmSpec::plain(2, 2, 2);
    s.beta = 1.0f;
    gemm(s, A, B, C);
    CHECK(C[0] == 2);
    CHECK(C[3] == 5);
  }

  TEST_CASE("single-entry brgemm with beta one equals gemm") {
    const auto A = to_float(randn(35, 3)), B = to_float(randn(56, 4));
    auto s = GemmSpec::plain(5, 8, 7);
    s.beta = 1.0f;
    std::vector<float> C1(40, 0.5f), C2(40, 0.5f);
    gemm(s, A.data(), B.data(), C1.data());
    brgemm(s, BatchAddress{{A.data()}, {B.data()}}, C2.data());
    CHECK(C1 == C2);
  }

  TEST_CASE("stride batch over blocked storage equals the address batch") {
    const std::int64_t bm = 4, bk = 3, bn = 5, n = 6;
    const auto A = to_float(randn(static_cast<std::size_t>(bm * bk * n), 5));
    const auto B = to_float(randn(static_cast<std::size_t>(bk * bn * n), 6));
    const auto s = GemmSpec::plain(bm, bn, bk);
    BatchAddress addr;
    for (std::int64_t i = 0; i < n; ++i) {
      addr.a.push_back(A.data() + i * bm * bk);
      addr.b.push_back(B.data() + i * bk * bn);
    }
    std::vector<float> C1(static_cast<std::size_t>(bm * bn)), C2(C1.size()), C3(C1.size());
    brgemm(s, addr, C1.data());
    brgemm(s, BatchStride{A.data(), B.data(), bm * bk, bk * bn, n}, C2.data());
    BatchOffset off{A.data(), B.data(), {}, {}};
    for (std::int64_t i = 0; i < n; ++i) {
      off.a_offsets.push_back(i * bm * bk);
      off.b_offsets.push_back(i * bk * bn);
    }
    brgemm(s, off, C3.data());
    CHECK(std::memcmp(C1.data(), C2.data(), C1.size() * 4) == 0);
    CHECK(std::memcmp(C1.data(), C3.data(), C1.size() * 4) == 0);
  }

  TEST_CASE("negated pair cancels exactly in fp64") {
    const auto A0 = randn(16, 7), B = randn(16, 8);
    std::vector<double> A1(A0.size());
    for (std::size_t i = 0; i < A0.size(); ++i) A1[i] = -A0[i];
    std::vector<double> C(16, 3.0);
    brgemm(GemmSpec::plain(4, 4, 4, DType::FP64), BatchAddress{{A0.data(), A1.data()}, {B.data(), B.data()}}, C.data());
    for (double c : C) CHECK(c == 0.0);
  }

  TEST_CASE("repeated pair doubles gemm exactly in fp64") {
    const auto A = randn(35, 11), B = randn(42, 12);
    std::vector<double> G(30), C(30);
    gemm(GemmSpec::plain(5, 6, 7, DType::FP64), A.data(), B.data(), G.data());
    brgemm(GemmSpec::plain(5, 6, 7, DType::FP64), BatchAddress{{A.data(), A.data()}, {B.data(), B.data()}}, C.data());
    for (std::size_t i = 0; i < C.size(); ++i) CHECK(C[i] == 2.0 * G[i]);
  }

  TEST_CASE("empty batch") {
    std::vector<float> C{1, 2, 3, 4};
    auto s = GemmSpec::plain(2, 2, 2);
    s.beta = 1.0f;
    brgemm(s, BatchStride{nullptr, nullptr, 0, 0, 0}, C.data());
    CHECK(C == std::vector<float>{1, 2, 3, 4});
    s.beta = 0.0f;
    brgemm(s, BatchStride{nullptr, nullptr, 0, 0, 0}, C.data());
    CHECK(C == std::vector<float>{0, 0, 0, 0});
  }

  TEST_CASE("beta zero overwrites NaN in C") {
    const float A[] = {1, 2, 3, 4}, B[] = {1, 0, 0, 1};
    float C[] = {NAN, NAN, NAN, NAN};
    gemm(GemmSpec::plain(2, 2, 2), A, B, C);
    CHECK(C[0] == 1);
    CHECK(C[3] == 4);
  }

  TEST_CASE("int8 accumulates in int32 without saturation") {
    std::vector<std::int8_t> A(64, 127), B(64, 127);
    std::vector<std::int32_t> C(1);
    gemm(GemmSpec::plain(1, 1, 64, DType::INT8), A.data(), B.data(), C.data());
    CHECK(C[0] == 64 * 127 * 127);
  }

  TEST_CASE("engine matches the serial reference for every dtype") {
    std::mt19937 rng(12);
    for (DType dt : {DType::FP64, DType::FP32, DType::BF16, DType::INT8}) {
      auto s = GemmSpec::plain(17, 9, 13, dt);
      if (dt == DType::BF16) s.out_dtype = DType::BF16;
      const std::size_t w = byte_width(dt);
      std::vector<std::byte> A(17 * 13 * 3 * w), B(13 * 9 * 3 * w);
      for (auto& b : A) b = static_cast<std::byte>(rng() & 0x3F);  // small finite values
      for (auto& b : B) b = static_cast<std::byte>(rng() & 0x3F);
      const BrgemmBatch batch = BatchStride{A.data(), B.data(), 17 * 13, 13 * 9, 3};
      const std::size_t ow = byte_width(s.out_dtype);
      std::vector<std::byte> C(17 * 9 * ow), R(C.size());
      brgemm(s, batch, C.data(), {2});
      reference::brgemm(s, batch, R.data());
      INFO(to_string(dt));
      CHECK(C == R);
    }
  }

  TEST_CASE("accumulation dtypes and vnni widths") {
    CHECK(accumulation_dtype(DType::BF16) == DType::FP32);
    CHECK(accumulation_dtype(DType::INT8) == DType::INT32);
    CHECK(accumulation_dtype(DType::FP64) == DType::FP64);
    CHECK(vnni_alpha(DType::BF16) == 2);
    CHECK(vnni_alpha(DType::INT8) == 4);
  }

  TEST_CASE("vnni pack of a single group") {
    Tensor A(3, 2, DType::BF16);
    for (std::uint16_t k = 0; k < 6; ++k) A.data<std::uint16_t>()[k] = k;
    const Tensor P = vnni_pack_a(A.view(), 2);
    // (m, k) -> [k/2][m][k%2]: pairs (k=0, k=1) of each row become adjacent.
    const std::vector<std::uint16_t> expect{0, 3, 1, 4, 2, 5};
    CHECK(std::vector<std::uint16_t>(P.data<std::uint16_t>(), P.data<std::uint16_t>() + 6) == expect);
    CHECK(vnni_unpack_a(P.view(), 3, 2, 2).bitwise_equal(A));
  }

  TEST_CASE("gemm on vnni-packed A equals plain A") {
    std::mt19937 rng(2);
    for (int alpha : {2, 4}) {
      const DType dt = alpha == 2 ? DType::BF16 : DType::INT8;
      const std::int64_t M = 6, N = 5, K = 7;
      Tensor A(M, K, dt), B(K, N, dt);
      for (auto& b : A.raw()) b = static_cast<std::byte>(rng() & 0x3F);
      for (auto& b : B.raw()) b = static_cast<std::byte>(rng() & 0x3F);
      const Tensor P = vnni_pack_a(A.view(), alpha);
      auto s = GemmSpec::plain(M, N, K, dt);
      const std::size_t ow = byte_width(s.out_dtype);
      std::vector<std::byte> C1(static_cast<std::size_t>(M * N) * ow), C2(C1.size());
      gemm(s, A.view().data, B.view().data, C1.data());
      s.a_layout = Layout::Vnni;
      gemm(s, P.view().data, B.view().data, C2.data());
      CHECK(C1 == C2);
    }
  }

  TEST_CASE("bf16 emulated split on a single element") {
    const bf16_t a = fp32_to_bf16(1.5f), b = fp32_to_bf16(2.0f);
    auto s = GemmSpec::plain(1, 1, 1, DType::BF16);
    float c1 = 0, c2 = 0;
    gemm(s, &a, &b, &c1);
    s.compute_path = ComputePath::EmulatedSplit;
    gemm(s, &a, &b, &c2);
    CHECK(c1 == 3.0f);
    CHECK(c2 == 3.0f);
  }

  TEST_CASE("bf16 emulated split agrees with native on subnormal inputs") {
    std::mt19937 rng(8);
    const std::int64_t n = 8;
    std::vector<bf16_t> A(n * n), B(n * n);
    for (auto& v : A) v = static_cast<bf16_t>((rng() & 0x807F) | (rng() & 1 ? 0x0000 : 0x0080));
    for (auto& v : B) v = static_cast<bf16_t>(rng() & 0xBFFF);
    auto s = GemmSpec::plain(n, n, n, DType::BF16);
    std::vector<float> C1(n * n), C2(n * n);
    gemm(s, A.data(), B.data(), C1.data());
    s.compute_path = ComputePath::EmulatedSplit;
    gemm(s, A.data(), B.data(), C2.data());
    CHECK(std::memcmp(C1.data(), C2.data(), C1.size() * 4) == 0);
  }

  TEST_CASE("emulated split is only valid for bf16") {
    auto s = GemmSpec::plain(2, 2, 2);
    s.compute_path = ComputePath::EmulatedSplit;
    float A[4] = {}, B[4] = {}, C[4] = {};
    CHECK_THROWS_AS(gemm(s, A, B, C), Error);
  }

  TEST_CASE("blocking choices do not change the result") {
    const auto A = to_float(randn(40 * 33 * 2, 9)), B = to_float(randn(33 * 21 * 2, 10));
    auto s = GemmSpec::plain(40, 21, 33);
    const BrgemmBatch batch = BatchStride{A.data(), B.data(), 40 * 33, 33 * 21, 2};
    std::vector<float> base(40 * 21), C(base.size());
    brgemm(s, batch, base.data(), {1});
    for (const BlockingParams bp : {BlockingParams{8, 3, 5}, BlockingParams{1, 1, 1}, BlockingParams{64, 64, 64},
                                    BlockingParams{16, 7, 33}})
      for (int t : {1, 4}) {
        s.blocking = bp;
        brgemm(s, batch, C.data(), {t});
        CHECK(C == base);
      }
  }

  TEST_CASE("invalid specs") {
    float A[4] = {}, B[4] = {}, C[4] = {};
    auto s = GemmSpec::plain(2, 2, 2);
    s.lda = 1;
    CHECK_THROWS_AS(gemm(s, A, B, C), Error);
    auto t = GemmSpec::plain(2, 2, 2);
    t.out_dtype = DType::INT32;
    CHECK_THROWS_AS(gemm(t, A, B, C), Error);
    auto u = GemmSpec::plain(2, 2, 2);
    CHECK_THROWS_AS(brgemm(u, BatchAddress{{A}, {}}, C), Error);
  }
}
