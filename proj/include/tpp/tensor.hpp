#pragma once

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "tpp/dtype.hpp"
#include "tpp/error.hpp"

namespace tpp {

enum class Bcast : std::uint8_t { None, Row, Col, Scalar };

std::string_view to_string(Bcast b) noexcept;
std::optional<Bcast> parse_bcast(std::string_view name) noexcept;

// Column-major 2D descriptor. rows/cols are the logical extents; under
// broadcast the physical extent shrinks to 1xN (Row), Mx1 (Col) or 1x1.
struct TensorDesc {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::int64_t ld = 0;
  DType dtype = DType::FP32;
  Bcast bcast = Bcast::None;

  static TensorDesc dense(std::int64_t rows, std::int64_t cols, DType dtype = DType::FP32) {
    return TensorDesc{rows, cols, rows, dtype, Bcast::None};
  }

  std::int64_t phys_rows() const noexcept {
    return (bcast == Bcast::Row || bcast == Bcast::Scalar) ? 1 : rows;
  }
  std::int64_t phys_cols() const noexcept {
    return (bcast == Bcast::Col || bcast == Bcast::Scalar) ? 1 : cols;
  }

  // Physical element offset of logical (i, j).
  std::int64_t offset(std::int64_t i, std::int64_t j) const noexcept {
    switch (bcast) {
      case Bcast::None: return i + j * ld;
      case Bcast::Row: return j * ld;
      case Bcast::Col: return i;
      case Bcast::Scalar: return 0;
    }
    return 0;
  }

  // Minimum primary buffer length in elements.
  std::int64_t extent() const noexcept {
    if (rows <= 0 || cols <= 0) return 0;
    return ld * (phys_cols() - 1) + phys_rows();
  }
  std::size_t bytes() const noexcept {
    return static_cast<std::size_t>(extent()) * byte_width(dtype);
  }

  bool same_shape(const TensorDesc& o) const noexcept { return rows == o.rows && cols == o.cols; }

  void validate() const;  // throws tpp::Error

  bool operator==(const TensorDesc&) const = default;
};

// Bitmask companion layout: one bit per logical element, bit i of column j
// at byte j*ceil(rows/8) + i/8, bit position i%8. Columns are byte padded.
namespace bitmask {
constexpr std::int64_t bytes_per_col(std::int64_t rows) noexcept { return (rows + 7) / 8; }
constexpr std::int64_t bytes(std::int64_t rows, std::int64_t cols) noexcept {
  return bytes_per_col(rows) * cols;
}
inline bool get(const std::uint8_t* m, std::int64_t rows, std::int64_t i, std::int64_t j) noexcept {
  return (m[j * bytes_per_col(rows) + i / 8] >> (i % 8)) & 1u;
}
inline void set(std::uint8_t* m, std::int64_t rows, std::int64_t i, std::int64_t j, bool v) noexcept {
  std::uint8_t& byte = m[j * bytes_per_col(rows) + i / 8];
  const auto bit = static_cast<std::uint8_t>(1u << (i % 8));
  byte = v ? static_cast<std::uint8_t>(byte | bit) : static_cast<std::uint8_t>(byte & ~bit);
}
}  // namespace bitmask

enum class CompanionKind : std::uint8_t { None, Bitmask, Indices, Offsets2D, Tensor };

std::string_view to_string(CompanionKind k) noexcept;

// Secondary payload. Indices are int64; Offsets2D are (row, col) int64 pairs
// with `count` pairs; Bitmask uses `desc.rows/cols` as its logical shape;
// Tensor carries a full descriptor (used for lo-bits halves and *_INV inputs).
struct Companion {
  CompanionKind kind = CompanionKind::None;
  void* data = nullptr;
  std::int64_t count = 0;
  TensorDesc desc{};

  static Companion mask(std::uint8_t* bits, std::int64_t rows, std::int64_t cols) {
    return Companion{CompanionKind::Bitmask, bits, rows * cols, TensorDesc{rows, cols, rows, DType::BIT}};
  }
  static Companion indices(const std::int64_t* idx, std::int64_t count) {
    return Companion{CompanionKind::Indices, const_cast<std::int64_t*>(idx), count, {}};
  }
  static Companion offsets2d(const std::int64_t* pairs, std::int64_t count) {
    return Companion{CompanionKind::Offsets2D, const_cast<std::int64_t*>(pairs), count, {}};
  }
  static Companion tensor(void* data, const TensorDesc& d) {
    return Companion{CompanionKind::Tensor, data, d.rows * d.cols, d};
  }

  const std::int64_t* index_data() const noexcept { return static_cast<const std::int64_t*>(data); }
  std::uint8_t* mask_data() const noexcept { return static_cast<std::uint8_t*>(data); }
};

// Auxiliary scalars: quantization scale, PRNG seed, dynamic extents.
struct Tertiary {
  std::optional<float> scale;
  std::optional<std::uint64_t> seed;
  std::optional<std::pair<std::int64_t, std::int64_t>> extents;
};

struct TensorView {
  TensorDesc desc{};
  void* data = nullptr;
  Companion secondary{};
  Tertiary tertiary{};

  template <class T>
  T* as() const noexcept {
    return static_cast<T*>(data);
  }
  std::byte* bytes() const noexcept { return static_cast<std::byte*>(data); }

  // Logical sub-block; broadcast axes keep pointing at their single row/col.
  TensorView block(std::int64_t i0, std::int64_t j0, std::int64_t rows, std::int64_t cols) const;

  // Same storage read as rows x cols; unit extents are broadcast.
  TensorView broadcast_to(std::int64_t rows, std::int64_t cols) const;

  // Applies tertiary dynamic extents, if any, to the logical shape.
  TensorView effective() const;
};

// Generic scalar access, for tests, oracles and slow paths. Composite kernels
// never call these.
double load_element(const TensorView& v, std::int64_t i, std::int64_t j);
void store_element(const TensorView& v, std::int64_t i, std::int64_t j, double x);

// Owning column-major storage.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(const TensorDesc& desc);
  Tensor(std::int64_t rows, std::int64_t cols, DType dtype = DType::FP32)
      : Tensor(TensorDesc::dense(rows, cols, dtype)) {}
  // Dense tensor with every element equal to value.
  static Tensor filled(std::int64_t rows, std::int64_t cols, double value, DType dtype = DType::FP32);

  const TensorDesc& desc() const noexcept { return desc_; }
  std::int64_t rows() const noexcept { return desc_.rows; }
  std::int64_t cols() const noexcept { return desc_.cols; }

  TensorView view() { return TensorView{desc_, storage_.data(), {}, {}}; }
  TensorView view() const { return TensorView{desc_, const_cast<std::byte*>(storage_.data()), {}, {}}; }

  template <class T>
  T* data() noexcept {
    return reinterpret_cast<T*>(storage_.data());
  }
  template <class T>
  const T* data() const noexcept {
    return reinterpret_cast<const T*>(storage_.data());
  }
  std::span<const std::byte> raw() const noexcept { return storage_; }
  std::span<std::byte> raw() noexcept { return storage_; }

  double at(std::int64_t i, std::int64_t j) const { return load_element(view(), i, j); }
  void set(std::int64_t i, std::int64_t j, double x) { store_element(view(), i, j, x); }

  bool bitwise_equal(const Tensor& o) const;

 private:
  TensorDesc desc_{};
  std::vector<std::byte> storage_;
};

class Bitmask {
 public:
  Bitmask() = default;
  Bitmask(std::int64_t rows, std::int64_t cols)
      : rows_(rows), cols_(cols), bits_(static_cast<std::size_t>(bitmask::bytes(rows, cols)), 0) {}

  std::int64_t rows() const noexcept { return rows_; }
  std::int64_t cols() const noexcept { return cols_; }
  bool get(std::int64_t i, std::int64_t j) const noexcept { return bitmask::get(bits_.data(), rows_, i, j); }
  void set(std::int64_t i, std::int64_t j, bool v) noexcept { bitmask::set(bits_.data(), rows_, i, j, v); }
  std::int64_t popcount() const noexcept;
  Companion companion() { return Companion::mask(bits_.data(), rows_, cols_); }
  const std::vector<std::uint8_t>& bytes() const noexcept { return bits_; }
  bool operator==(const Bitmask&) const = default;

 private:
  std::int64_t rows_ = 0;
  std::int64_t cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

// FP32 tensor held as two 16-bit halves: hi is a valid BF16 tensor.
struct SplitTensor {
  Tensor hi;  // BF16
  Tensor lo;  // INT16 bit patterns
};

// IDENTITY with dtype change. Supported: FP32<->BF16, FP32<->FP64,
// BF16->FP32, FP32<->INT8 (requires tertiary scale, quantize path).
Tensor convert(const TensorView& src, DType dst, std::optional<float> scale = std::nullopt);

SplitTensor split_fp32(const TensorView& src);
Tensor pack_fp32(const SplitTensor& split);

}  // namespace tpp
