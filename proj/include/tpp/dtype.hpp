#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace tpp {

enum class DType : std::uint8_t { FP64, FP32, BF16, INT32, INT16, INT8, BIT };

constexpr int bit_width(DType t) noexcept {
  switch (t) {
    case DType::FP64: return 64;
    case DType::FP32: return 32;
    case DType::BF16: return 16;
    case DType::INT32: return 32;
    case DType::INT16: return 16;
    case DType::INT8: return 8;
    case DType::BIT: return 1;
  }
  return 0;
}

// Bytes per element; BIT tensors only exist as packed bitmask companions.
constexpr std::size_t byte_width(DType t) noexcept {
  return t == DType::BIT ? 0 : static_cast<std::size_t>(bit_width(t) / 8);
}

constexpr bool is_floating(DType t) noexcept {
  return t == DType::FP64 || t == DType::FP32 || t == DType::BF16;
}

std::string_view to_string(DType t) noexcept;
std::optional<DType> parse_dtype(std::string_view name) noexcept;

using bf16_t = std::uint16_t;

constexpr float bf16_to_fp32(bf16_t v) noexcept {
  return std::bit_cast<float>(static_cast<std::uint32_t>(v) << 16);
}

// Round-to-nearest-even on the 16 dropped bits. NaNs are truncated; a NaN
// whose surviving mantissa bits are all zero gets the quiet bit so it stays NaN.
constexpr bf16_t fp32_to_bf16(float f) noexcept {
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
  if ((bits & 0x7F800000u) == 0x7F800000u && (bits & 0x007FFFFFu) != 0) {
    auto hi = static_cast<bf16_t>(bits >> 16);
    if ((hi & 0x7F) == 0) hi |= 0x40;
    return hi;
  }
  const std::uint32_t lsb = (bits >> 16) & 1u;
  return static_cast<bf16_t>((bits + 0x7FFFu + lsb) >> 16);
}

constexpr std::uint16_t fp32_hi(float f) noexcept {
  return static_cast<std::uint16_t>(std::bit_cast<std::uint32_t>(f) >> 16);
}
constexpr std::uint16_t fp32_lo(float f) noexcept {
  return static_cast<std::uint16_t>(std::bit_cast<std::uint32_t>(f) & 0xFFFFu);
}
constexpr float fp32_from_halves(std::uint16_t hi, std::uint16_t lo) noexcept {
  return std::bit_cast<float>((static_cast<std::uint32_t>(hi) << 16) | lo);
}

}  // namespace tpp
