#include <bit>
#include <cmath>
#include <cstdint>
#include <ios>
#include <random>

#include "doctest.h"
#include "tpp/tensor.hpp"

using namespace tpp;

namespace {

std::uint32_t bits(float f) { return std::bit_cast<std::uint32_t>(f); }
float from_bits(std::uint32_t b) { return std::bit_cast<float>(b); }

// Nearest same-sign BF16 by brute force over all 2^16 candidates, ties to even.
bf16_t nearest_bf16(float x) {
  const double v = x;
  const std::uint32_t sign = std::signbit(x) ? 1u : 0u;
  bf16_t best = 0;
  double best_d = INFINITY;
  for (std::uint32_t c = 0; c < 0x10000; ++c) {
    const float w = bf16_to_fp32(static_cast<bf16_t>(c));
    if (!std::isfinite(w) || (c >> 15) != sign) continue;
    const double d = std::fabs(static_cast<double>(w) - v);
    if (d < best_d || (d == best_d && (c & 1) == 0)) {
      best_d = d;
      best = static_cast<bf16_t>(c);
    }
  }
  return best;
}

Tensor mat4() {
  Tensor t(2, 2);
  t.data<float>()[0] = 1.0f;
  t.data<float>()[1] = -4.0f;
  t.data<float>()[2] = 0.5f;
  t.data<float>()[3] = 0.0f;
  return t;
}

}  // namespace

TEST_SUITE("core-tensor") {
  TEST_CASE("descriptor offsets and extents") {
    const TensorDesc d{3, 4, 5, DType::FP32, Bcast::None};
    CHECK(d.offset(2, 3) == 17);
    CHECK(d.extent() == 5 * 3 + 3);
    CHECK(d.bytes() == 18 * 4);

    const TensorDesc row{3, 4, 1, DType::FP32, Bcast::Row};
    CHECK(row.phys_rows() == 1);
    CHECK(row.phys_cols() == 4);
    CHECK(row.offset(2, 3) == 3);
    const TensorDesc col{3, 4, 3, DType::FP32, Bcast::Col};
    CHECK(col.offset(2, 3) == 2);
    const TensorDesc sc{3, 4, 1, DType::FP32, Bcast::Scalar};
    CHECK(sc.offset(2, 3) == 0);
    CHECK(sc.extent() == 1);
  }

  TEST_CASE("descriptor validation") {
    CHECK_NOTHROW(TensorDesc::dense(2, 2).validate());
    CHECK_THROWS_AS(TensorDesc({2, 2, 1, DType::FP32, Bcast::None}).validate(), Error);
    CHECK_THROWS_AS(TensorDesc({-1, 2, 1, DType::FP32, Bcast::None}).validate(), Error);
  }

  TEST_CASE("element access through broadcast views") {
    Tensor t(2, 3);
    for (int j = 0; j < 3; ++j)
      for (int i = 0; i < 2; ++i) t.set(i, j, 10 * i + j);
    CHECK(t.at(1, 2) == 12);
    const TensorView b = t.view().block(1, 1, 1, 2);
    CHECK(load_element(b, 0, 0) == 11);
    CHECK(load_element(b, 0, 1) == 12);

    Tensor s = Tensor::filled(1, 1, 7.0);
    const TensorView bs = s.view().broadcast_to(4, 5);
    CHECK(bs.desc.rows == 4);
    CHECK(bs.desc.cols == 5);
    CHECK(load_element(bs, 3, 4) == 7.0);
  }

  TEST_CASE("bf16 round trip of representable values") {
    CHECK(fp32_to_bf16(1.0f) == 0x3F80);
    CHECK(bf16_to_fp32(0x3F80) == 1.0f);
  }

  TEST_CASE("bf16 rounds to nearest even") {
    CHECK(fp32_to_bf16(from_bits(0x3F800001u)) == 0x3F80);
    CHECK(fp32_to_bf16(from_bits(0x3F808000u)) == 0x3F80);  // tie, even stays
    CHECK(fp32_to_bf16(from_bits(0x3F818000u)) == 0x3F82);  // tie, odd rounds up
    CHECK(fp32_to_bf16(from_bits(0x3F808001u)) == 0x3F81);
    CHECK(fp32_to_bf16(from_bits(0x7F7FFFFFu)) == 0x7F80);  // overflow to inf
  }

  TEST_CASE("bf16 rounding agrees with brute-force nearest on sampled values") {
    std::mt19937 rng(7);
    std::uniform_int_distribution<std::uint32_t> d;
    for (int n = 0; n < 200; ++n) {
      std::uint32_t b = d(rng);
      if ((b & 0x7F800000u) == 0x7F800000u) b &= 0xBFFFFFFFu;  // keep finite
      const float x = from_bits(b);
      if (std::fabs(x) > 3.0e38f) continue;
      INFO("pattern " << std::hex << b);
      CHECK(fp32_to_bf16(x) == nearest_bf16(x));
    }
  }

  TEST_CASE("bf16 widen then narrow is the identity on all 2^16 patterns") {
    int bad = 0;
    for (std::uint32_t c = 0; c < 0x10000; ++c) {
      const auto h = static_cast<bf16_t>(c);
      if (fp32_to_bf16(bf16_to_fp32(h)) != h) ++bad;
    }
    CHECK(bad == 0);
  }

  TEST_CASE("bf16 NaN stays NaN after truncation") {
    const float nan_low_payload = from_bits(0x7F800001u);
    const bf16_t h = fp32_to_bf16(nan_low_payload);
    CHECK(std::isnan(bf16_to_fp32(h)));
  }

  TEST_CASE("convert between fp32, bf16 and fp64") {
    Tensor t(2, 2);
    t.set(0, 0, 1.0);
    t.set(1, 0, -2.5);
    t.set(0, 1, 3.140625);
    t.set(1, 1, from_bits(0x3F800001u));
    const Tensor h = convert(t.view(), DType::BF16);
    CHECK(h.desc().dtype == DType::BF16);
    CHECK(h.data<bf16_t>()[3] == 0x3F80);
    const Tensor back = convert(h.view(), DType::FP32);
    CHECK(back.at(1, 0) == -2.5);
    CHECK(back.at(1, 1) == 1.0);
    const Tensor d = convert(t.view(), DType::FP64);
    CHECK(d.data<double>()[2] == 3.140625);
  }

  TEST_CASE("split fp32 into halves") {
    Tensor t(2, 1);
    t.data<float>()[0] = 1.0f;
    t.data<float>()[1] = from_bits(0x40490FDBu);
    const SplitTensor s = split_fp32(t.view());
    CHECK(s.hi.desc().dtype == DType::BF16);
    CHECK(s.lo.desc().dtype == DType::INT16);
    CHECK(s.hi.data<std::uint16_t>()[0] == 0x3F80);
    CHECK(s.lo.data<std::uint16_t>()[0] == 0x0000);
    CHECK(s.hi.data<std::uint16_t>()[1] == 0x4049);
    CHECK(s.lo.data<std::uint16_t>()[1] == 0x0FDB);
  }

  TEST_CASE("pack fp32 from halves") {
    SplitTensor s{Tensor(2, 1, DType::BF16), Tensor(2, 1, DType::INT16)};
    s.hi.data<std::uint16_t>()[0] = 0x3F80;
    s.lo.data<std::uint16_t>()[0] = 0x0000;
    s.hi.data<std::uint16_t>()[1] = 0x0000;
    s.lo.data<std::uint16_t>()[1] = 0x0000;
    const Tensor p = pack_fp32(s);
    CHECK(p.data<float>()[0] == 1.0f);
    CHECK(bits(p.data<float>()[1]) == 0u);
  }

  TEST_CASE("pack after split is the identity on random bit patterns") {
    std::mt19937 rng(11);
    Tensor t(1000, 1000);
    auto* p = t.data<std::uint32_t>();
    for (std::int64_t i = 0; i < 1000 * 1000; ++i) p[i] = rng();
    const Tensor back = pack_fp32(split_fp32(t.view()));
    CHECK(back.bitwise_equal(t));
  }

  TEST_CASE("bitmask layout is byte padded per column") {
    Bitmask m(10, 3);
    CHECK(m.bytes().size() == 6);
    m.set(9, 2, true);
    CHECK(m.get(9, 2));
    CHECK(m.bytes()[5] == 0x02);
    CHECK(m.popcount() == 1);
    const Companion c = m.companion();
    CHECK(c.kind == CompanionKind::Bitmask);
    CHECK(c.desc.rows == 10);
  }

  TEST_CASE("int8 quantization") {
    Tensor t = mat4();
    const Tensor q = convert(t.view(), DType::INT8, 1.0f / 64.0f);
    CHECK(q.data<std::int8_t>()[0] == 64);
    CHECK(q.data<std::int8_t>()[1] == -127);  // clamped
    // Without a scale the absolute maximum maps to 127.
    const Tensor a = convert(t.view(), DType::INT8);
    CHECK(a.data<std::int8_t>()[1] == -127);
    CHECK(a.data<std::int8_t>()[0] == 32);
    const Tensor back = convert(q.view(), DType::FP32, 1.0f / 64.0f);
    CHECK(back.at(0, 0) == 1.0);
    CHECK_THROWS_AS(convert(q.view(), DType::FP32), Error);
  }
}
