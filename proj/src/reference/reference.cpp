#include "tpp/reference.hpp"

#include <cstring>
#include <vector>

namespace tpp::reference {

namespace {

template <class Acc>
Acc elem(const std::byte* p, DType dt, std::int64_t o) {
  switch (dt) {
    case DType::FP64: {
      double v;
      std::memcpy(&v, p + o * 8, 8);
      return static_cast<Acc>(v);
    }
    case DType::FP32: {
      float v;
      std::memcpy(&v, p + o * 4, 4);
      return static_cast<Acc>(v);
    }
    case DType::BF16: {
      std::uint16_t v;
      std::memcpy(&v, p + o * 2, 2);
      return static_cast<Acc>(bf16_to_fp32(v));
    }
    case DType::INT8: return static_cast<Acc>(reinterpret_cast<const std::int8_t*>(p)[o]);
    case DType::INT32: {
      std::int32_t v;
      std::memcpy(&v, p + o * 4, 4);
      return static_cast<Acc>(v);
    }
    default: return Acc(0);
  }
}

template <class Acc>
void put(std::byte* p, DType dt, std::int64_t o, Acc v) {
  switch (dt) {
    case DType::FP64: {
      const double x = static_cast<double>(v);
      std::memcpy(p + o * 8, &x, 8);
      return;
    }
    case DType::FP32: {
      const float x = static_cast<float>(v);
      std::memcpy(p + o * 4, &x, 4);
      return;
    }
    case DType::BF16: {
      const std::uint16_t x = fp32_to_bf16(static_cast<float>(v));
      std::memcpy(p + o * 2, &x, 2);
      return;
    }
    case DType::INT32: {
      const auto x = static_cast<std::int32_t>(v);
      std::memcpy(p + o * 4, &x, 4);
      return;
    }
    default: return;
  }
}

template <class Acc>
void run(const GemmSpec& s, const std::vector<const std::byte*>& A, const std::vector<const std::byte*>& B,
         std::byte* C) {
  const int alpha = s.a_layout == Layout::Vnni ? vnni_alpha(s.in_dtype) : 1;
  for (std::int64_t n = 0; n < s.N; ++n)
    for (std::int64_t m = 0; m < s.M; ++m) {
      Acc acc = Acc(0);
      if (s.beta != 0.0f) {
        acc = elem<Acc>(C, s.out_dtype, m + n * s.ldc);
        if (s.beta != 1.0f) acc = static_cast<Acc>(s.beta) * acc;
      }
      for (std::size_t i = 0; i < A.size(); ++i) {
        Acc part = Acc(0);
        for (std::int64_t k = 0; k < s.K; ++k) {
          const std::int64_t ao =
              s.a_layout == Layout::Vnni ? (k / alpha) * s.lda * alpha + m * alpha + k % alpha : m + k * s.lda;
          const Acc a = elem<Acc>(A[i], s.in_dtype, ao);
          const Acc b = elem<Acc>(B[i], s.in_dtype, k + n * s.ldb);
          if constexpr (std::is_same_v<Acc, std::int32_t>)
            part = static_cast<std::int32_t>(static_cast<std::uint32_t>(part) + static_cast<std::uint32_t>(a * b));
          else
            part = part + a * b;
        }
        if constexpr (std::is_same_v<Acc, std::int32_t>)
          acc = static_cast<std::int32_t>(static_cast<std::uint32_t>(acc) + static_cast<std::uint32_t>(part));
        else
          acc = acc + part;
      }
      put<Acc>(C, s.out_dtype, m + n * s.ldc, acc);
    }
}

}  // namespace

void brgemm(const GemmSpec& s, const BrgemmBatch& batch, void* C) {
  const std::int64_t n = batch_count(batch);
  const std::size_t w = byte_width(s.in_dtype);
  std::vector<const std::byte*> A(static_cast<std::size_t>(n)), B(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    if (const auto* a = std::get_if<BatchAddress>(&batch)) {
      A[u] = static_cast<const std::byte*>(a->a[u]);
      B[u] = static_cast<const std::byte*>(a->b[u]);
    } else if (const auto* o = std::get_if<BatchOffset>(&batch)) {
      A[u] = static_cast<const std::byte*>(o->a_base) + o->a_offsets[u] * static_cast<std::int64_t>(w);
      B[u] = static_cast<const std::byte*>(o->b_base) + o->b_offsets[u] * static_cast<std::int64_t>(w);
    } else {
      const auto& st = std::get<BatchStride>(batch);
      A[u] = static_cast<const std::byte*>(st.a_base) + i * st.stride_a * static_cast<std::int64_t>(w);
      B[u] = static_cast<const std::byte*>(st.b_base) + i * st.stride_b * static_cast<std::int64_t>(w);
    }
  }
  auto* c = static_cast<std::byte*>(C);
  switch (accumulation_dtype(s.in_dtype)) {
    case DType::FP64: return run<double>(s, A, B, c);
    case DType::INT32: return run<std::int32_t>(s, A, B, c);
    default: return run<float>(s, A, B, c);
  }
}

void fc_forward(std::int64_t Mb, std::int64_t Nb, std::int64_t Kb, std::int64_t bm, std::int64_t bn, std::int64_t bk,
                const float* A, const float* B, float* C) {
  for (std::int64_t in = 0; in < Nb; ++in)
    for (std::int64_t im = 0; im < Mb; ++im) {
      float* c = C + (in * Mb + im) * bn * bm;
      for (std::int64_t n = 0; n < bn; ++n)
        for (std::int64_t m = 0; m < bm; ++m) {
          float acc = 0.0f;
          for (std::int64_t ik = 0; ik < Kb; ++ik) {
            const float* a = A + (im * Kb + ik) * bk * bm;
            const float* b = B + (in * Kb + ik) * bn * bk;
            float part = 0.0f;
            for (std::int64_t k = 0; k < bk; ++k) part = part + a[m + k * bm] * b[k + n * bk];
            acc = acc + part;
          }
          c[m + n * bm] = acc;
        }
    }
}

}  // namespace tpp::reference
