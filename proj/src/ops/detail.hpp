#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <cstring>
#include <type_traits>

#include "tpp/dtype.hpp"
#include "tpp/ops.hpp"
#include "tpp/tensor.hpp"

namespace tpp::detail {

// Rows processed per register block in the generic blueprint loops.
inline constexpr std::int64_t kBlockRows = 256;
// Below this many elements elementwise loops stay serial.
inline constexpr std::int64_t kParallelThreshold = 1 << 15;

extern std::atomic<bool> g_reverse_reduce;

template <class T>
inline T widen(const void* p, DType dt, std::int64_t o) {
  switch (dt) {
    case DType::FP64: return static_cast<T>(static_cast<const double*>(p)[o]);
    case DType::FP32: return static_cast<T>(static_cast<const float*>(p)[o]);
    case DType::BF16: return static_cast<T>(bf16_to_fp32(static_cast<const bf16_t*>(p)[o]));
    case DType::INT32: return static_cast<T>(static_cast<const std::int32_t*>(p)[o]);
    case DType::INT16: return static_cast<T>(static_cast<const std::int16_t*>(p)[o]);
    case DType::INT8: return static_cast<T>(static_cast<const std::int8_t*>(p)[o]);
    case DType::BIT: break;
  }
  return T(0);
}

// Logical rows [i0, i0 + n) of column j, converted to T.
template <class T>
inline void load_col(const TensorView& v, std::int64_t i0, std::int64_t j, std::int64_t n, T* dst) {
  const std::int64_t base = v.desc.offset(i0, j);
  const DType dt = v.desc.dtype;
  if (v.desc.phys_rows() == 1 && v.desc.rows > 1) {
    const T x = widen<T>(v.data, dt, base);
    std::fill(dst, dst + n, x);
    return;
  }
  if ((dt == DType::FP32 && std::is_same_v<T, float>) || (dt == DType::FP64 && std::is_same_v<T, double>)) {
    std::memcpy(dst, static_cast<const std::byte*>(v.data) + base * static_cast<std::int64_t>(sizeof(T)),
                static_cast<std::size_t>(n) * sizeof(T));
    return;
  }
  for (std::int64_t i = 0; i < n; ++i) dst[i] = widen<T>(v.data, dt, base + i);
}

template <class T>
inline void narrow(void* p, DType dt, std::int64_t o, T x) {
  switch (dt) {
    case DType::FP64: static_cast<double*>(p)[o] = static_cast<double>(x); return;
    case DType::FP32: static_cast<float*>(p)[o] = static_cast<float>(x); return;
    case DType::BF16: static_cast<bf16_t*>(p)[o] = fp32_to_bf16(static_cast<float>(x)); return;
    case DType::INT32: static_cast<std::int32_t*>(p)[o] = static_cast<std::int32_t>(x); return;
    case DType::INT16: static_cast<std::int16_t*>(p)[o] = static_cast<std::int16_t>(x); return;
    case DType::INT8: static_cast<std::int8_t*>(p)[o] = static_cast<std::int8_t>(x); return;
    case DType::BIT: return;
  }
}

template <class T>
inline void store_col(const TensorView& v, std::int64_t i0, std::int64_t j, std::int64_t n, const T* src) {
  const std::int64_t base = v.desc.offset(i0, j);
  const DType dt = v.desc.dtype;
  if ((dt == DType::FP32 && std::is_same_v<T, float>) || (dt == DType::FP64 && std::is_same_v<T, double>)) {
    std::memcpy(static_cast<std::byte*>(v.data) + base * static_cast<std::int64_t>(sizeof(T)), src,
                static_cast<std::size_t>(n) * sizeof(T));
    return;
  }
  for (std::int64_t i = 0; i < n; ++i) narrow<T>(v.data, dt, base + i, src[i]);
}

inline TensorView companion_view(const Companion& c) { return TensorView{c.desc, c.data, {}, {}}; }

// Generic blueprint: for each column, for each row block, load the operand
// blocks, apply `body(in_ptrs, out_ptr, n, i0, j)`, store. Columns run in
// parallel; every element is computed independently of the partition.
template <class T, int N, class Body>
void blocked_map(const std::array<TensorView, N>& ins, const TensorView& out, Body&& body) {
  const std::int64_t M = out.desc.rows, Ncols = out.desc.cols;
  const bool par = M * Ncols >= kParallelThreshold && Ncols > 1;
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t j = 0; j < Ncols; ++j) {
    alignas(64) T buf[N > 0 ? N : 1][kBlockRows];
    alignas(64) T res[kBlockRows];
    const T* ptrs[N > 0 ? N : 1];
    for (std::int64_t i0 = 0; i0 < M; i0 += kBlockRows) {
      const std::int64_t n = std::min(kBlockRows, M - i0);
      for (int k = 0; k < N; ++k) {
        load_col<T>(ins[static_cast<std::size_t>(k)], i0, j, n, buf[k]);
        ptrs[k] = buf[k];
      }
      body(ptrs, res, n, i0, j);
      store_col<T>(out, i0, j, n, res);
    }
  }
}

// Element byte copy for dtype-agnostic data movement.
inline void copy_elem(const TensorView& src, std::int64_t si, std::int64_t sj, const TensorView& dst, std::int64_t di,
                      std::int64_t dj) {
  const std::size_t w = byte_width(src.desc.dtype);
  std::memcpy(dst.bytes() + static_cast<std::size_t>(dst.desc.offset(di, dj)) * w,
              src.bytes() + static_cast<std::size_t>(src.desc.offset(si, sj)) * w, w);
}

bool ranges_overlap(const TensorView& a, const TensorView& b);

}  // namespace tpp::detail
