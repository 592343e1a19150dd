#include <algorithm>
#include <bit>
#include <cstring>
#include <string>

#include "tpp/dtype.hpp"
#include "tpp/error.hpp"
#include "tpp/tensor.hpp"

namespace tpp {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_spec: return "invalid-spec";
    case Errc::shape_mismatch: return "shape-mismatch";
    case Errc::dtype_mismatch: return "dtype-mismatch";
    case Errc::unsupported: return "unsupported";
    case Errc::out_of_bounds: return "out-of-bounds";
    case Errc::flag_conflict: return "flag-conflict";
    case Errc::missing_companion: return "missing-companion";
    case Errc::aliasing: return "aliasing";
    case Errc::parse_error: return "parse-error";
    case Errc::strategy_illegal: return "strategy-illegal";
  }
  return "unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(Errc code, const std::string& what) { throw Error(code, what); }

std::string_view to_string(DType t) noexcept {
  switch (t) {
    case DType::FP64: return "fp64";
    case DType::FP32: return "fp32";
    case DType::BF16: return "bf16";
    case DType::INT32: return "int32";
    case DType::INT16: return "int16";
    case DType::INT8: return "int8";
    case DType::BIT: return "bit";
  }
  return "?";
}

std::optional<DType> parse_dtype(std::string_view n) noexcept {
  for (DType t : {DType::FP64, DType::FP32, DType::BF16, DType::INT32, DType::INT16, DType::INT8, DType::BIT})
    if (to_string(t) == n) return t;
  return std::nullopt;
}

std::string_view to_string(Bcast b) noexcept {
  switch (b) {
    case Bcast::None: return "none";
    case Bcast::Row: return "row";
    case Bcast::Col: return "col";
    case Bcast::Scalar: return "scalar";
  }
  return "?";
}

std::optional<Bcast> parse_bcast(std::string_view n) noexcept {
  for (Bcast b : {Bcast::None, Bcast::Row, Bcast::Col, Bcast::Scalar})
    if (to_string(b) == n) return b;
  return std::nullopt;
}

std::string_view to_string(CompanionKind k) noexcept {
  switch (k) {
    case CompanionKind::None: return "none";
    case CompanionKind::Bitmask: return "bitmask";
    case CompanionKind::Indices: return "indices";
    case CompanionKind::Offsets2D: return "offsets2d";
    case CompanionKind::Tensor: return "tensor";
  }
  return "?";
}

void TensorDesc::validate() const {
  if (rows <= 0 || cols <= 0) fail(Errc::shape_mismatch, "tensor extents must be positive");
  if (dtype == DType::BIT) fail(Errc::dtype_mismatch, "BIT tensors exist only as bitmask companions");
  if (ld < phys_rows() || ld <= 0) fail(Errc::shape_mismatch, "leading dimension smaller than physical rows");
}

TensorView TensorView::block(std::int64_t i0, std::int64_t j0, std::int64_t r, std::int64_t c) const {
  if (i0 < 0 || j0 < 0 || r <= 0 || c <= 0 || i0 + r > desc.rows || j0 + c > desc.cols)
    fail(Errc::out_of_bounds, "block outside tensor");
  TensorView v = *this;
  const std::int64_t bi = desc.phys_rows() == 1 ? 0 : i0;
  const std::int64_t bj = desc.phys_cols() == 1 ? 0 : j0;
  v.data = bytes() + static_cast<std::size_t>(bi + bj * desc.ld) * byte_width(desc.dtype);
  v.desc.rows = r;
  v.desc.cols = c;
  // A block of a broadcast view keeps the broadcast axes; unit axes inside
  // a non-broadcast view stay plain.
  return v;
}

TensorView TensorView::broadcast_to(std::int64_t r, std::int64_t c) const {
  const bool rows_ok = desc.rows == r || desc.phys_rows() == 1;
  const bool cols_ok = desc.cols == c || desc.phys_cols() == 1;
  if (r <= 0 || c <= 0 || !rows_ok || !cols_ok)
    fail(Errc::shape_mismatch, "cannot broadcast " + std::to_string(desc.rows) + "x" + std::to_string(desc.cols) +
                                   " to " + std::to_string(r) + "x" + std::to_string(c));
  TensorView v = *this;
  v.desc.rows = r;
  v.desc.cols = c;
  const bool rb = desc.phys_rows() == 1 && r > 1;
  const bool cb = desc.phys_cols() == 1 && c > 1;
  v.desc.bcast = rb && cb ? Bcast::Scalar : rb ? Bcast::Row : cb ? Bcast::Col : Bcast::None;
  return v;
}

TensorView TensorView::effective() const {
  if (!tertiary.extents) return *this;
  const auto [r, c] = *tertiary.extents;
  if (r <= 0 || c <= 0 || r > desc.rows || c > desc.cols)
    fail(Errc::shape_mismatch, "dynamic extents exceed descriptor");
  TensorView v = *this;
  v.desc.rows = r;
  v.desc.cols = c;
  v.tertiary.extents.reset();
  return v;
}

double load_element(const TensorView& v, std::int64_t i, std::int64_t j) {
  const std::int64_t o = v.desc.offset(i, j);
  switch (v.desc.dtype) {
    case DType::FP64: return v.as<const double>()[o];
    case DType::FP32: return v.as<const float>()[o];
    case DType::BF16: return bf16_to_fp32(v.as<const bf16_t>()[o]);
    case DType::INT32: return v.as<const std::int32_t>()[o];
    case DType::INT16: return v.as<const std::int16_t>()[o];
    case DType::INT8: return v.as<const std::int8_t>()[o];
    case DType::BIT: break;
  }
  fail(Errc::dtype_mismatch, "element access on BIT tensor");
}

void store_element(const TensorView& v, std::int64_t i, std::int64_t j, double x) {
  const std::int64_t o = v.desc.offset(i, j);
  switch (v.desc.dtype) {
    case DType::FP64: v.as<double>()[o] = x; return;
    case DType::FP32: v.as<float>()[o] = static_cast<float>(x); return;
    case DType::BF16: v.as<bf16_t>()[o] = fp32_to_bf16(static_cast<float>(x)); return;
    case DType::INT32: v.as<std::int32_t>()[o] = static_cast<std::int32_t>(x); return;
    case DType::INT16: v.as<std::int16_t>()[o] = static_cast<std::int16_t>(x); return;
    case DType::INT8: v.as<std::int8_t>()[o] = static_cast<std::int8_t>(x); return;
    case DType::BIT: break;
  }
  fail(Errc::dtype_mismatch, "element access on BIT tensor");
}

Tensor::Tensor(const TensorDesc& desc) : desc_(desc) {
  desc_.validate();
  storage_.assign(desc_.bytes(), std::byte{0});
}

Tensor Tensor::filled(std::int64_t rows, std::int64_t cols, double value, DType dtype) {
  Tensor t(rows, cols, dtype);
  for (std::int64_t j = 0; j < cols; ++j)
    for (std::int64_t i = 0; i < rows; ++i) t.set(i, j, value);
  return t;
}

bool Tensor::bitwise_equal(const Tensor& o) const {
  if (!desc_.same_shape(o.desc_) || desc_.dtype != o.desc_.dtype) return false;
  const std::size_t w = byte_width(desc_.dtype);
  for (std::int64_t j = 0; j < desc_.phys_cols(); ++j) {
    const auto* a = storage_.data() + static_cast<std::size_t>(j * desc_.ld) * w;
    const auto* b = o.storage_.data() + static_cast<std::size_t>(j * o.desc_.ld) * w;
    if (std::memcmp(a, b, static_cast<std::size_t>(desc_.phys_rows()) * w) != 0) return false;
  }
  return true;
}

std::int64_t Bitmask::popcount() const noexcept {
  std::int64_t n = 0;
  for (std::int64_t j = 0; j < cols_; ++j)
    for (std::int64_t i = 0; i < rows_; ++i) n += get(i, j) ? 1 : 0;
  return n;
}

}  // namespace tpp
