#include "tpp/ops.hpp"
#include "tpp/prng.hpp"
#include "tpp/tensor.hpp"

namespace tpp {

Tensor convert(const TensorView& src, DType dst, std::optional<float> scale) {
  if (src.desc.bcast != Bcast::None) fail(Errc::invalid_spec, "convert expects a non-broadcast source");
  Tensor out(src.desc.rows, src.desc.cols, dst);
  OpFlags f;
  f.out_dtype = dst;
  if (dst == DType::INT8) {
    if (src.desc.dtype != DType::FP32) fail(Errc::unsupported, "int8 conversion is defined from fp32 only");
    TensorView o = out.view();
    o.tertiary.scale = scale.value_or(int8_scale_for(src));
    apply_unary(UnaryKind::QUANTIZE, f, src, o);
    return out;
  }
  if (src.desc.dtype == DType::INT8) {
    if (dst != DType::FP32) fail(Errc::unsupported, "int8 conversion is defined to fp32 only");
    if (!scale && !src.tertiary.scale) fail(Errc::missing_companion, "int8 source needs a scale");
    TensorView s = src;
    if (scale) s.tertiary.scale = scale;
    apply_unary(UnaryKind::DEQUANTIZE, f, s, out.view());
    return out;
  }
  apply_unary(UnaryKind::IDENTITY, f, src, out.view());
  return out;
}

SplitTensor split_fp32(const TensorView& src) {
  if (src.desc.dtype != DType::FP32) fail(Errc::dtype_mismatch, "split_fp32 expects fp32");
  SplitTensor s{Tensor(src.desc.rows, src.desc.cols, DType::BF16), Tensor(src.desc.rows, src.desc.cols, DType::INT16)};
  TensorView hi = s.hi.view();
  hi.secondary = Companion::tensor(s.lo.data<std::int16_t>(), s.lo.desc());
  apply_unary(UnaryKind::UNPACK, {}, src, hi);
  return s;
}

Tensor pack_fp32(const SplitTensor& split) {
  if (!split.hi.desc().same_shape(split.lo.desc())) fail(Errc::shape_mismatch, "pack_fp32: hi/lo shapes differ");
  Tensor out(split.hi.rows(), split.hi.cols(), DType::FP32);
  apply_binary(BinaryKind::PACK, {}, split.hi.view(), split.lo.view(), out.view());
  return out;
}

PrngState PrngState::for_stream(std::uint64_t seed, std::uint64_t stream) noexcept {
  // splitmix64 expansion of seed ^ stream into four non-zero words.
  std::uint64_t z = seed ^ stream;
  auto mix = [&z]() {
    z += 0x9E3779B97F4A7C15ull;
    std::uint64_t r = z;
    r = (r ^ (r >> 30)) * 0xBF58476D1CE4E5B9ull;
    r = (r ^ (r >> 27)) * 0x94D049BB133111EBull;
    return r ^ (r >> 31);
  };
  PrngState st;
  st.seed = seed;
  const std::uint64_t a = mix(), b = mix();
  st.s = {static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32), static_cast<std::uint32_t>(b),
          static_cast<std::uint32_t>(b >> 32)};
  if ((st.s[0] | st.s[1] | st.s[2] | st.s[3]) == 0) st.s[0] = 0x6C078965u;
  return st;
}

}  // namespace tpp
