#include <cmath>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"
#include "tpp/ops.hpp"
#include "util.hpp"

using namespace tpp;
using testutil::mat;
using testutil::values;
using V = std::vector<double>;

TEST_SUITE("primitive-ops") {
  TEST_CASE("dispatch builds an elementwise sum kernel") {
    const TensorDesc d = TensorDesc::dense(4, 4);
    const KernelPtr k = dispatch(KernelSpec{BinaryKind::ADD, {InputSpec{d}, InputSpec{d}}, {}});
    Tensor a = Tensor::filled(4, 4, 1.5), b = Tensor::filled(4, 4, 2.0), c(4, 4);
    (*k)(a.view(), b.view(), c.view());
    CHECK(c.at(3, 3) == 3.5);
    CHECK(k->output_desc() == d);
  }

  TEST_CASE("dispatch caches by spec and separates approximation flags") {
    const TensorDesc d = TensorDesc::dense(4, 4);
    OpFlags pade, minimax;
    pade.approx = Approx::Pade;
    minimax.approx = Approx::Minimax;
    const auto k1 = dispatch(KernelSpec{UnaryKind::TANH, {InputSpec{d}}, pade});
    const auto k2 = dispatch(KernelSpec{UnaryKind::TANH, {InputSpec{d}}, minimax});
    const auto k3 = dispatch(KernelSpec{UnaryKind::TANH, {InputSpec{d}}, pade});
    CHECK(k1 != k2);
    CHECK(k1 == k3);
    CHECK(spec_key(k1->spec()) != spec_key(k2->spec()));
  }

  TEST_CASE("gather without an index companion is rejected") {
    const TensorDesc d = TensorDesc::dense(3, 3);
    try {
      dispatch(KernelSpec{UnaryKind::GATHER, {InputSpec{d}}, {}});
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::missing_companion);
    }
  }

  TEST_CASE("flags that do not apply are rejected") {
    const TensorDesc d = TensorDesc::dense(2, 2);
    OpFlags f;
    f.approx = Approx::Pade;
    CHECK_THROWS_AS(dispatch(KernelSpec{UnaryKind::SQUARE, {InputSpec{d}}, f}), Error);
    OpFlags g;
    g.approx = Approx::Taylor;
    CHECK_THROWS_AS(dispatch(KernelSpec{UnaryKind::TANH, {InputSpec{d}}, g}), Error);
  }

  TEST_CASE("square") {
    Tensor x = mat(2, 2, {1, -2, 3, 0}), y(2, 2);
    apply_unary(UnaryKind::SQUARE, {}, x.view(), y.view());
    CHECK(values(y) == V{1, 4, 9, 0});
  }

  TEST_CASE("relu records its mask") {
    Tensor x = mat(1, 2, {-1, 2}), y(1, 2);
    Bitmask m(1, 2);
    TensorView out = y.view();
    out.secondary = m.companion();
    OpFlags f;
    f.bitmask_out = true;
    apply_unary(UnaryKind::RELU, f, x.view(), out);
    CHECK(values(y) == V{0, 2});
    CHECK_FALSE(m.get(0, 0));
    CHECK(m.get(0, 1));

    // RELU_INV passes the gradient where the mask is set.
    Tensor g = mat(1, 2, {5, 7}), dx(1, 2);
    TensorView gin = g.view();
    gin.secondary = m.companion();
    apply_unary(UnaryKind::RELU_INV, {}, gin, dx.view());
    CHECK(values(dx) == V{0, 7});
  }

  TEST_CASE("exp at one") {
    Tensor x = Tensor::filled(1, 1, 1.0), y(1, 1);
    apply_unary(UnaryKind::EXP, {}, x.view(), y.view());
    CHECK(std::fabs(y.at(0, 0) - std::exp(1.0)) / std::exp(1.0) <= 3e-4);
    OpFlags exact;
    exact.approx = Approx::Exact;
    apply_unary(UnaryKind::EXP, exact, x.view(), y.view());
    CHECK(y.at(0, 0) == static_cast<double>(std::exp(1.0f)));
  }

  TEST_CASE("dropout with p = 0 keeps everything") {
    Tensor x = mat(2, 3, {1, 2, 3, 4, 5, 6}), y(2, 3);
    Bitmask m(2, 3);
    TensorView in = x.view();
    in.tertiary.seed = 42;
    TensorView out = y.view();
    out.secondary = m.companion();
    apply_unary(UnaryKind::DROPOUT, {}, in, out);
    CHECK(values(y) == values(x));
    CHECK(m.popcount() == 6);
  }

  TEST_CASE("dropout needs a seed") {
    Tensor x(2, 2), y(2, 2);
    OpFlags f;
    f.dropout_p = 0.5f;
    CHECK_THROWS_AS(apply_unary(UnaryKind::DROPOUT, f, x.view(), y.view()), Error);
  }

  TEST_CASE("dropout scales survivors and its inverse reuses the mask") {
    Tensor x = Tensor::filled(64, 8, 1.0), y(64, 8), dx(64, 8);
    Bitmask m(64, 8);
    OpFlags f;
    f.dropout_p = 0.25f;
    TensorView in = x.view();
    in.tertiary.seed = 9;
    TensorView out = y.view();
    out.secondary = m.companion();
    apply_unary(UnaryKind::DROPOUT, f, in, out);
    Tensor g = Tensor::filled(64, 8, 1.0);
    TensorView gin = g.view();
    gin.secondary = m.companion();
    apply_unary(UnaryKind::DROPOUT_INV, f, gin, dx.view());
    for (std::int64_t j = 0; j < 8; ++j)
      for (std::int64_t i = 0; i < 64; ++i) {
        const double expect = m.get(i, j) ? 1.0 / 0.75 : 0.0;
        REQUIRE(y.at(i, j) == doctest::Approx(expect));
        REQUIRE(dx.at(i, j) == y.at(i, j));
      }
  }

  TEST_CASE("reduce") {
    Tensor ones = Tensor::filled(2, 2, 1.0), s(1, 1);
    reduce(ones.view(), {ReduceAxis::All, ReduceOp::Sum, false}, s.view());
    CHECK(s.at(0, 0) == 4.0);

    // Cols reduces over rows, leaving one value per column.
    Tensor x = mat(2, 2, {1, 5, 3, 2}), m(1, 2);
    reduce(x.view(), {ReduceAxis::Cols, ReduceOp::Max, false}, m.view());
    CHECK(values(m) == V{3, 5});

    Tensor v = mat(3, 1, {1, 2, 3}), q(1, 1);
    reduce(v.view(), {ReduceAxis::Cols, ReduceOp::Sum, true}, q.view());
    CHECK(q.at(0, 0) == 14.0);

    Tensor r(2, 1);
    reduce(x.view(), {ReduceAxis::Rows, ReduceOp::Min, false}, r.view());
    CHECK(values(r) == V{1, 2});
  }

  TEST_CASE("transpose") {
    Tensor x = mat(2, 3, {1, 2, 3, 4, 5, 6}), y(3, 2);
    transform(x.view(), {TransformKind::Transpose, 0, 0, 0}, y.view());
    CHECK(values(y) == V{1, 4, 2, 5, 3, 6});
  }

  TEST_CASE("vnni formatting puts column pairs innermost") {
    // Element (r, c) of an R x C tensor lands at flat position [c/2][r][c%2].
    Tensor x(4, 2, DType::BF16);
    for (std::uint16_t k = 0; k < 8; ++k) x.data<std::uint16_t>()[k] = static_cast<std::uint16_t>(0x3F80 + k);
    Tensor p(8, 1, DType::BF16);
    transform(x.view(), {TransformKind::Vnni, 2, 0, 0}, p.view());
    const auto* src = x.data<std::uint16_t>();
    const auto* dst = p.data<std::uint16_t>();
    for (int c = 0; c < 2; ++c)
      for (int r = 0; r < 4; ++r) CHECK(dst[r * 2 + c] == src[r + 4 * c]);
  }

  TEST_CASE("vnni pads the tail group and inverts by index formula") {
    std::mt19937 rng(5);
    for (int alpha : {2, 4}) {
      const DType dt = alpha == 2 ? DType::BF16 : DType::INT8;
      const std::int64_t R = 5, C = 7, G = (C + alpha - 1) / alpha;
      Tensor x(R, C, dt), p(R * alpha, G, dt);
      for (auto& b : x.raw()) b = static_cast<std::byte>(rng());
      transform(x.view(), {TransformKind::Vnni, alpha, 0, 0}, p.view());
      const std::size_t w = byte_width(dt);
      Tensor back(R, C, dt);
      for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t r = 0; r < R; ++r)
          std::memcpy(back.raw().data() + (r + c * R) * w, p.raw().data() + ((c / alpha) * R * alpha + r * alpha + c % alpha) * w, w);
      CHECK(back.bitwise_equal(x));
      // Padding lanes of the last group are zero.
      for (std::int64_t c = C; c < G * alpha; ++c)
        for (std::int64_t r = 0; r < R; ++r)
          for (std::size_t k = 0; k < w; ++k)
            CHECK(p.raw()[((c / alpha) * R * alpha + r * alpha + c % alpha) * w + k] == std::byte{0});
    }
  }

  TEST_CASE("vnni to transposed vnni equals transpose then vnni") {
    std::mt19937 rng(6);
    const std::int64_t R = 6, C = 5;
    Tensor x(R, C, DType::BF16);
    for (auto& b : x.raw()) b = static_cast<std::byte>(rng());
    Tensor v(R * 2, 3, DType::BF16), vt(C * 2, 3, DType::BF16);
    transform(x.view(), {TransformKind::Vnni, 2, 0, 0}, v.view());
    transform(v.view(), {TransformKind::VnniToVnniT, 2, 2, C}, vt.view());
    Tensor t(C, R, DType::BF16), tv(C * 2, 3, DType::BF16);
    transform(x.view(), {TransformKind::Transpose, 0, 0, 0}, t.view());
    transform(t.view(), {TransformKind::Vnni, 2, 0, 0}, tv.view());
    CHECK(vt.bitwise_equal(tv));
  }

  TEST_CASE("vnni alpha must match the dtype width") {
    Tensor x(4, 4, DType::BF16), p(16, 1, DType::BF16);
    try {
      transform(x.view(), {TransformKind::Vnni, 4, 0, 0}, p.view());
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::flag_conflict);
    }
  }

  TEST_CASE("shuffle network matches direct transpose") {
    std::mt19937 rng(3);
    for (int n : {4, 8, 16}) {
      std::vector<std::uint32_t> in(static_cast<std::size_t>(n * n)), out(in.size());
      for (auto& v : in) v = rng();
      shuffle_network_transpose(in.data(), out.data(), n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) REQUIRE(out[static_cast<std::size_t>(i + j * n)] == in[static_cast<std::size_t>(j + i * n)]);
    }
  }

  TEST_CASE("shuffle network on the identity") {
    std::vector<std::uint32_t> id(16, 0), out(16);
    for (int i = 0; i < 4; ++i) id[static_cast<std::size_t>(i * 5)] = 1;
    shuffle_network_transpose(id.data(), out.data(), 4);
    CHECK(out == id);
  }

  TEST_CASE("shuffle network 16x16 counter tile") {
    std::vector<std::uint32_t> in(256), out(256), direct(256);
    for (std::uint32_t i = 0; i < 16; ++i)
      for (std::uint32_t j = 0; j < 16; ++j) in[i + 16 * j] = 16 * i + j;
    shuffle_network_transpose(in.data(), out.data(), 16);
    Tensor a(16, 16, DType::INT32), b(16, 16, DType::INT32);
    std::copy(in.begin(), in.end(), a.data<std::uint32_t>());
    transform(a.view(), {TransformKind::Transpose, 0, 0, 0}, b.view());
    std::copy(b.data<std::uint32_t>(), b.data<std::uint32_t>() + 256, direct.begin());
    CHECK(out == direct);
  }

  TEST_CASE("shuffle network 4x4 stage trace") {
    // Registers are columns: r0 = {0,1,2,3}, r1 = {4,5,6,7}, ...
    std::vector<std::uint32_t> in(16), out(16);
    std::iota(in.begin(), in.end(), 0u);
    std::vector<std::vector<std::uint32_t>> trace;
    shuffle_network_transpose(in.data(), out.data(), 4, &trace);
    REQUIRE(trace.size() == 2);
    // 32-bit unpack lo/hi of (r0, r1) and (r2, r3).
    CHECK(trace[0] == std::vector<std::uint32_t>{0, 4, 1, 5, 2, 6, 3, 7, 8, 12, 9, 13, 10, 14, 11, 15});
    // 64-bit unpack lo/hi of (r0', r2') and (r1', r3').
    CHECK(trace[1] == std::vector<std::uint32_t>{0, 4, 8, 12, 1, 5, 9, 13, 2, 6, 10, 14, 3, 7, 11, 15});
    CHECK(out == trace[1]);
  }

  TEST_CASE("shuffle network rejects other sizes") {
    std::vector<std::uint32_t> in(9), out(9);
    CHECK_THROWS_AS(shuffle_network_transpose(in.data(), out.data(), 3), Error);
  }

  TEST_CASE("gather columns") {
    Tensor x = mat(2, 3, {1, 2, 3, 4, 5, 6}), y(2, 2);
    const std::int64_t idx[] = {2, 0};
    TensorView in = x.view();
    in.secondary = Companion::indices(idx, 2);
    gather_scatter(in, GatherMode::GatherCols, y.view());
    CHECK(values(y) == V{3, 1, 6, 4});
  }

  TEST_CASE("scatter then gather with the same permutation is the identity") {
    Tensor x = mat(2, 4, {1, 2, 3, 4, 5, 6, 7, 8}), s(2, 4), g(2, 4);
    const std::int64_t perm[] = {3, 1, 0, 2};
    TensorView in = x.view();
    in.secondary = Companion::indices(perm, 4);
    gather_scatter(in, GatherMode::ScatterCols, s.view());
    TensorView sv = s.view();
    sv.secondary = Companion::indices(perm, 4);
    gather_scatter(sv, GatherMode::GatherCols, g.view());
    CHECK(g.bitwise_equal(x));
  }

  TEST_CASE("gather rows") {
    Tensor x = mat(3, 2, {1, 2, 3, 4, 5, 6}), y(2, 2);
    const std::int64_t idx[] = {1, 1};
    TensorView in = x.view();
    in.secondary = Companion::indices(idx, 2);
    gather_scatter(in, GatherMode::GatherRows, y.view());
    CHECK(values(y) == V{3, 4, 3, 4});
  }

  TEST_CASE("gather2d picks offset pairs") {
    Tensor x = mat(2, 2, {1, 2, 3, 4}), y(2, 1);
    const std::int64_t off[] = {0, 0, 1, 1};
    TensorView in = x.view();
    in.secondary = Companion::offsets2d(off, 2);
    gather_scatter(in, GatherMode::Gather2D, y.view());
    CHECK(values(y) == V{1, 4});
  }

  TEST_CASE("gather index out of range") {
    Tensor x(2, 2), y(2, 1);
    const std::int64_t idx[] = {5};
    TensorView in = x.view();
    in.secondary = Companion::indices(idx, 1);
    try {
      gather_scatter(in, GatherMode::GatherCols, y.view());
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::out_of_bounds);
    }
  }

  TEST_CASE("binary elementwise") {
    Tensor a = mat(1, 2, {5, 5}), b = mat(1, 2, {2, 3}), c(1, 2);
    apply_binary(BinaryKind::SUB, {}, a.view(), b.view(), c.view());
    CHECK(values(c) == V{3, 2});

    Tensor x = mat(2, 2, {1, 2, 3, 4}), two = Tensor::filled(1, 1, 2.0), y(2, 2);
    apply_binary(BinaryKind::MUL, {}, x.view(), two.view().broadcast_to(2, 2), y.view());
    CHECK(values(y) == V{2, 4, 6, 8});
  }

  TEST_CASE("compare writes a bitmask") {
    Tensor a = mat(1, 2, {1, 4}), b = mat(1, 2, {2, 3});
    Bitmask m(1, 2);
    TensorView out{TensorDesc{1, 2, 1, DType::BIT, Bcast::None}, m.companion().data, m.companion(), {}};
    OpFlags f;
    f.cmp = CmpOp::GT;
    apply_binary(BinaryKind::COMPARE, f, a.view(), b.view(), out);
    CHECK_FALSE(m.get(0, 0));
    CHECK(m.get(0, 1));
  }

  TEST_CASE("ternary elementwise") {
    Tensor a = mat(1, 2, {1, 2}), b = mat(1, 2, {3, 4}), c = mat(1, 2, {10, 10}), y(1, 2);
    apply_ternary(TernaryKind::MULADD, {}, a.view(), b.view(), c.view(), y.view());
    CHECK(values(y) == V{13, 18});
    apply_ternary(TernaryKind::NMULADD, {}, a.view(), b.view(), c.view(), y.view());
    CHECK(values(y) == V{7, 2});

    Bitmask m(1, 2);
    m.set(0, 0, true);
    TensorView cv = c.view();
    cv.secondary = m.companion();
    apply_ternary(TernaryKind::BLEND, {}, a.view(), b.view(), cv, y.view());
    CHECK(values(y) == V{1, 4});
  }

  TEST_CASE("replicate columns") {
    Tensor x = mat(2, 1, {1, 2}), y(2, 3), z(2, 1), w(2, 3);
    replicate_cols(x.view(), 3, y.view());
    CHECK(values(y) == V{1, 1, 1, 2, 2, 2});
    replicate_cols(x.view(), 1, z.view());
    CHECK(z.bitwise_equal(x));
    apply_unary(UnaryKind::IDENTITY, {}, x.view().broadcast_to(2, 3), w.view());
    CHECK(w.bitwise_equal(y));
  }

  TEST_CASE("shape mismatch is reported") {
    Tensor a(2, 2), b(3, 2), c(2, 2);
    try {
      apply_binary(BinaryKind::ADD, {}, a.view(), b.view(), c.view());
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::shape_mismatch);
    }
  }

  TEST_CASE("gather-reduce sums selected columns in order") {
    Tensor x = mat(2, 3, {1, 2, 3, 4, 5, 6}), y(2, 1);
    const std::int64_t idx[] = {2, 2, 0};
    TensorView in = x.view();
    in.secondary = Companion::indices(idx, 3);
    gather_reduce_cols(in, y.view());
    CHECK(values(y) == V{7, 16});
  }
}
