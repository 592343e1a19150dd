#include <array>
#include <mutex>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <unordered_map>

#include "tpp/ops.hpp"

namespace tpp {

namespace {

constexpr std::array<std::pair<UnaryKind, std::string_view>, 32> kUnaryNames{{
    {UnaryKind::IDENTITY, "identity"},     {UnaryKind::ZERO, "zero"},
    {UnaryKind::SQUARE, "square"},         {UnaryKind::INC, "inc"},
    {UnaryKind::DEC, "dec"},               {UnaryKind::SQRT, "sqrt"},
    {UnaryKind::RECIPROCAL, "reciprocal"}, {UnaryKind::RSQRT, "rsqrt"},
    {UnaryKind::EXP, "exp"},               {UnaryKind::PRNG, "prng"},
    {UnaryKind::QUANTIZE, "quantize"},     {UnaryKind::DEQUANTIZE, "dequantize"},
    {UnaryKind::REDUCE, "reduce"},         {UnaryKind::TRANSFORM, "transform"},
    {UnaryKind::UNPACK, "unpack"},         {UnaryKind::REPLICATE_COLS, "replicate_cols"},
    {UnaryKind::GATHER, "gather"},         {UnaryKind::SCATTER, "scatter"},
    {UnaryKind::GATHER2D, "gather2d"},     {UnaryKind::SCATTER2D, "scatter2d"},
    {UnaryKind::STRIDED_LOAD, "strided_load"}, {UnaryKind::STRIDED_STORE, "strided_store"},
    {UnaryKind::TANH, "tanh"},             {UnaryKind::TANH_INV, "tanh_inv"},
    {UnaryKind::RELU, "relu"},             {UnaryKind::RELU_INV, "relu_inv"},
    {UnaryKind::SIGMOID, "sigmoid"},       {UnaryKind::SIGMOID_INV, "sigmoid_inv"},
    {UnaryKind::GELU, "gelu"},             {UnaryKind::GELU_INV, "gelu_inv"},
    {UnaryKind::DROPOUT, "dropout"},       {UnaryKind::DROPOUT_INV, "dropout_inv"},
}};

constexpr std::array<std::pair<BinaryKind, std::string_view>, 9> kBinaryNames{{
    {BinaryKind::ADD, "add"}, {BinaryKind::SUB, "sub"}, {BinaryKind::MUL, "mul"},
    {BinaryKind::DIV, "div"}, {BinaryKind::MAX, "max"}, {BinaryKind::MIN, "min"},
    {BinaryKind::MATMUL, "matmul"}, {BinaryKind::PACK, "pack"}, {BinaryKind::COMPARE, "compare"},
}};

constexpr std::array<std::pair<TernaryKind, std::string_view>, 5> kTernaryNames{{
    {TernaryKind::GEMM, "gemm"}, {TernaryKind::BRGEMM, "brgemm"}, {TernaryKind::MULADD, "muladd"},
    {TernaryKind::NMULADD, "nmuladd"}, {TernaryKind::BLEND, "blend"},
}};

template <class E, std::size_t N>
std::string_view lookup(const std::array<std::pair<E, std::string_view>, N>& table, E e) noexcept {
  for (const auto& [k, n] : table)
    if (k == e) return n;
  return "?";
}

template <class E, std::size_t N>
std::optional<E> rlookup(const std::array<std::pair<E, std::string_view>, N>& table, std::string_view s) noexcept {
  for (const auto& [k, n] : table)
    if (n == s) return k;
  return std::nullopt;
}

constexpr std::array<std::pair<CmpOp, std::string_view>, 6> kCmp{
    {{CmpOp::EQ, "eq"}, {CmpOp::NE, "ne"}, {CmpOp::LT, "lt"}, {CmpOp::LE, "le"}, {CmpOp::GT, "gt"}, {CmpOp::GE, "ge"}}};
constexpr std::array<std::pair<Approx, std::string_view>, 5> kApprox{{{Approx::Default, "default"},
                                                                     {Approx::Exact, "exact"},
                                                                     {Approx::Pade, "pade"},
                                                                     {Approx::Minimax, "minimax"},
                                                                     {Approx::Taylor, "taylor"}}};
constexpr std::array<std::pair<ReduceAxis, std::string_view>, 3> kAxis{
    {{ReduceAxis::Rows, "rows"}, {ReduceAxis::Cols, "cols"}, {ReduceAxis::All, "all"}}};
constexpr std::array<std::pair<ReduceOp, std::string_view>, 4> kRop{
    {{ReduceOp::Sum, "sum"}, {ReduceOp::Mul, "mul"}, {ReduceOp::Min, "min"}, {ReduceOp::Max, "max"}}};
constexpr std::array<std::pair<TransformKind, std::string_view>, 3> kTr{{{TransformKind::Transpose, "transpose"},
                                                                        {TransformKind::Vnni, "vnni"},
                                                                        {TransformKind::VnniToVnniT, "vnni_to_vnnit"}}};

std::string shape_str(const TensorDesc& d) {
  return std::to_string(d.rows) + "x" + std::to_string(d.cols) + ":" + std::string(to_string(d.dtype));
}

DType join_float(const std::vector<InputSpec>& in, std::size_t n) {
  bool f64 = false, f32 = false;
  for (std::size_t i = 0; i < n; ++i) {
    f64 |= in[i].desc.dtype == DType::FP64;
    f32 |= in[i].desc.dtype == DType::FP32;
  }
  return f64 ? DType::FP64 : f32 ? DType::FP32 : DType::BF16;
}

void require_float(const TensorDesc& d, const char* what) {
  if (!is_floating(d.dtype)) fail(Errc::dtype_mismatch, std::string(what) + " requires a floating dtype, got " + shape_str(d));
}

void require_dense(const TensorDesc& d, const char* what) {
  if (d.bcast != Bcast::None) fail(Errc::invalid_spec, std::string(what) + " does not accept broadcast inputs");
}

void check_desc(const TensorDesc& d) {
  if (d.dtype == DType::BIT) {
    if (d.rows <= 0 || d.cols <= 0) fail(Errc::shape_mismatch, "bitmask extents must be positive");
    return;
  }
  d.validate();
}

bool approx_allowed(UnaryKind k, Approx a) {
  if (a == Approx::Default) return true;
  switch (k) {
    case UnaryKind::TANH:
    case UnaryKind::TANH_INV:
    case UnaryKind::SIGMOID:
    case UnaryKind::SIGMOID_INV: return a == Approx::Exact || a == Approx::Pade || a == Approx::Minimax;
    case UnaryKind::GELU:
    case UnaryKind::GELU_INV: return a == Approx::Exact || a == Approx::Minimax;
    case UnaryKind::EXP: return a == Approx::Exact || a == Approx::Taylor;
    default: return false;
  }
}

bool is_math_unary(UnaryKind k) {
  switch (k) {
    case UnaryKind::SQUARE: case UnaryKind::INC: case UnaryKind::DEC: case UnaryKind::SQRT:
    case UnaryKind::RECIPROCAL: case UnaryKind::RSQRT: case UnaryKind::EXP: case UnaryKind::TANH:
    case UnaryKind::TANH_INV: case UnaryKind::RELU: case UnaryKind::RELU_INV: case UnaryKind::SIGMOID:
    case UnaryKind::SIGMOID_INV: case UnaryKind::GELU: case UnaryKind::GELU_INV: case UnaryKind::DROPOUT:
    case UnaryKind::DROPOUT_INV:
      return true;
    default: return false;
  }
}

TensorDesc infer_unary(UnaryKind k, const InputSpec& in, const OpFlags& f) {
  const TensorDesc& d = in.desc;
  if (!approx_allowed(k, f.approx))
    fail(Errc::flag_conflict, "approximation '" + std::string(to_string(f.approx)) + "' not valid for " +
                                  std::string(to_string(k)));
  if (f.bitmask_out && k != UnaryKind::RELU)
    fail(Errc::flag_conflict, "bitmask output only applies to relu");
  const DType out_dt = f.out_dtype.value_or(d.dtype);
  switch (k) {
    case UnaryKind::IDENTITY: {
      const DType s = d.dtype, t = out_dt;
      const bool ok = s == t || (s == DType::FP32 && (t == DType::BF16 || t == DType::FP64)) ||
                      (t == DType::FP32 && (s == DType::BF16 || s == DType::FP64));
      if (!ok)
        fail(Errc::unsupported, "identity conversion " + std::string(to_string(s)) + "->" +
                                    std::string(to_string(t)) + " (int8 goes through quantize/dequantize)");
      return TensorDesc::dense(d.rows, d.cols, t);
    }
    case UnaryKind::ZERO: return TensorDesc::dense(d.rows, d.cols, out_dt);
    case UnaryKind::PRNG: {
      const DType t = f.out_dtype.value_or(DType::FP32);
      if (!is_floating(t)) fail(Errc::dtype_mismatch, "prng output must be floating");
      return TensorDesc::dense(d.rows, d.cols, t);
    }
    case UnaryKind::QUANTIZE:
      require_float(d, "quantize");
      if (f.out_dtype && *f.out_dtype != DType::INT8) fail(Errc::dtype_mismatch, "quantize produces int8");
      return TensorDesc::dense(d.rows, d.cols, DType::INT8);
    case UnaryKind::DEQUANTIZE: {
      if (d.dtype != DType::INT8) fail(Errc::dtype_mismatch, "dequantize expects int8 input");
      const DType t = f.out_dtype.value_or(DType::FP32);
      if (!is_floating(t)) fail(Errc::dtype_mismatch, "dequantize output must be floating");
      return TensorDesc::dense(d.rows, d.cols, t);
    }
    case UnaryKind::REDUCE: {
      require_float(d, "reduce");
      const DType acc = d.dtype == DType::FP64 ? DType::FP64 : DType::FP32;
      const DType t = f.out_dtype.value_or(acc);
      if (!is_floating(t)) fail(Errc::dtype_mismatch, "reduce output must be floating");
      switch (f.reduce.axis) {
        case ReduceAxis::Rows: return TensorDesc::dense(d.rows, 1, t);
        case ReduceAxis::Cols: return TensorDesc::dense(1, d.cols, t);
        case ReduceAxis::All: return TensorDesc::dense(1, 1, t);
      }
      break;
    }
    case UnaryKind::TRANSFORM: {
      require_dense(d, "transform");
      const auto& t = f.transform;
      switch (t.kind) {
        case TransformKind::Transpose:
          if (d.dtype == DType::BIT) fail(Errc::dtype_mismatch, "transpose of BIT");
          return TensorDesc::dense(d.cols, d.rows, d.dtype);
        case TransformKind::Vnni: {
          const int want = bit_width(d.dtype) == 16 ? 2 : bit_width(d.dtype) == 8 ? 4 : 0;
          if (want == 0 || t.alpha0 != want)
            fail(Errc::flag_conflict, "vnni alpha must be 2 for 16-bit and 4 for 8-bit dtypes");
          return TensorDesc::dense(d.rows * want, (d.cols + want - 1) / want, d.dtype);
        }
        case TransformKind::VnniToVnniT: {
          const int want = bit_width(d.dtype) == 16 ? 2 : bit_width(d.dtype) == 8 ? 4 : 0;
          if (want == 0 || t.alpha0 != want || t.alpha1 != want)
            fail(Errc::flag_conflict, "vnni_to_vnnit alphas must match the dtype width");
          if (d.rows % t.alpha1 != 0) fail(Errc::shape_mismatch, "vnni rows must be a multiple of alpha");
          const std::int64_t R = d.rows / t.alpha1;
          const std::int64_t C = t.logical_cols;
          if (C <= 0 || (C + t.alpha1 - 1) / t.alpha1 != d.cols)
            fail(Errc::shape_mismatch, "vnni_to_vnnit logical column count inconsistent with input");
          return TensorDesc::dense(C * t.alpha0, (R + t.alpha0 - 1) / t.alpha0, d.dtype);
        }
      }
      break;
    }
    case UnaryKind::UNPACK:
      require_dense(d, "unpack");
      if (d.dtype != DType::FP32) fail(Errc::unsupported, "unpack splits fp32 only");
      return TensorDesc::dense(d.rows, d.cols, DType::BF16);
    case UnaryKind::REPLICATE_COLS:
      if (d.phys_cols() != 1) fail(Errc::shape_mismatch, "replicate_cols expects an Mx1 input");
      if (f.out_cols < 1) fail(Errc::invalid_spec, "replicate_cols needs out_cols >= 1");
      return TensorDesc::dense(d.rows, f.out_cols, d.dtype);
    case UnaryKind::GATHER:
      require_dense(d, "gather");
      if (in.companion != CompanionKind::Indices) fail(Errc::missing_companion, "gather needs an index companion");
      if (in.companion_count < 1) fail(Errc::invalid_spec, "gather needs at least one index");
      return f.index_axis == IndexAxis::Rows ? TensorDesc::dense(in.companion_count, d.cols, d.dtype)
                                             : TensorDesc::dense(d.rows, in.companion_count, d.dtype);
    case UnaryKind::SCATTER:
      require_dense(d, "scatter");
      if (in.companion != CompanionKind::Indices) fail(Errc::missing_companion, "scatter needs an index companion");
      if (f.index_axis == IndexAxis::Rows) {
        if (in.companion_count != d.rows) fail(Errc::shape_mismatch, "scatter rows: one index per input row");
        if (f.out_rows < 1) fail(Errc::invalid_spec, "scatter rows needs out_rows");
        return TensorDesc::dense(f.out_rows, d.cols, d.dtype);
      } else {
        if (in.companion_count != d.cols) fail(Errc::shape_mismatch, "scatter cols: one index per input column");
        if (f.out_cols < 1) fail(Errc::invalid_spec, "scatter cols needs out_cols");
        return TensorDesc::dense(d.rows, f.out_cols, d.dtype);
      }
    case UnaryKind::GATHER2D: {
      require_dense(d, "gather2d");
      if (in.companion != CompanionKind::Offsets2D) fail(Errc::missing_companion, "gather2d needs offset pairs");
      const std::int64_t k = in.companion_count;
      if (k < 1) fail(Errc::invalid_spec, "gather2d needs at least one offset");
      if (f.out_rows > 0 || f.out_cols > 0) {
        if (f.out_rows * f.out_cols != k) fail(Errc::shape_mismatch, "gather2d output extent != offset count");
        return TensorDesc::dense(f.out_rows, f.out_cols, d.dtype);
      }
      return TensorDesc::dense(k, 1, d.dtype);
    }
    case UnaryKind::SCATTER2D:
      require_dense(d, "scatter2d");
      if (in.companion != CompanionKind::Offsets2D) fail(Errc::missing_companion, "scatter2d needs offset pairs");
      if (in.companion_count != d.rows * d.cols) fail(Errc::shape_mismatch, "scatter2d: one offset per element");
      if (f.out_rows < 1 || f.out_cols < 1) fail(Errc::invalid_spec, "scatter2d needs out_rows/out_cols");
      return TensorDesc::dense(f.out_rows, f.out_cols, d.dtype);
    case UnaryKind::STRIDED_LOAD: {
      require_dense(d, "strided_load");
      if (f.out_rows < 1 || f.out_cols < 1) fail(Errc::invalid_spec, "strided_load needs out_rows/out_cols");
      const auto& s = f.strided;
      const std::int64_t rmax = s.row0 + (f.out_rows - 1) * s.row_stride;
      const std::int64_t cmax = s.col0 + (f.out_cols - 1) * s.col_stride;
      if (s.row0 < 0 || s.col0 < 0 || s.row_stride < 0 || s.col_stride < 0 || rmax >= d.rows || cmax >= d.cols)
        fail(Errc::out_of_bounds, "strided_load pattern leaves the source");
      return TensorDesc::dense(f.out_rows, f.out_cols, d.dtype);
    }
    case UnaryKind::STRIDED_STORE: {
      require_dense(d, "strided_store");
      if (f.out_rows < 1 || f.out_cols < 1) fail(Errc::invalid_spec, "strided_store needs out_rows/out_cols");
      const auto& s = f.strided;
      const std::int64_t rmax = s.row0 + (d.rows - 1) * s.row_stride;
      const std::int64_t cmax = s.col0 + (d.cols - 1) * s.col_stride;
      if (s.row0 < 0 || s.col0 < 0 || s.row_stride < 0 || s.col_stride < 0 || rmax >= f.out_rows ||
          cmax >= f.out_cols)
        fail(Errc::out_of_bounds, "strided_store pattern leaves the target");
      return TensorDesc::dense(f.out_rows, f.out_cols, d.dtype);
    }
    default: break;
  }
  if (is_math_unary(k)) {
    require_float(d, to_string(k).data());
    if (!is_floating(out_dt)) fail(Errc::dtype_mismatch, "output dtype must be floating");
    if (k == UnaryKind::RELU_INV || k == UnaryKind::DROPOUT_INV) {
      if (in.companion != CompanionKind::Bitmask)
        fail(Errc::missing_companion, std::string(to_string(k)) + " needs the recorded bitmask");
    }
    if (k == UnaryKind::TANH_INV || k == UnaryKind::SIGMOID_INV || k == UnaryKind::GELU_INV) {
      if (in.companion != CompanionKind::Tensor)
        fail(Errc::missing_companion, std::string(to_string(k)) + " needs the forward input tensor");
    }
    if ((k == UnaryKind::DROPOUT || k == UnaryKind::DROPOUT_INV) && !(f.dropout_p >= 0.0f && f.dropout_p <= 1.0f))
      fail(Errc::invalid_spec, "dropout probability outside [0, 1]");
    return TensorDesc::dense(d.rows, d.cols, out_dt);
  }
  fail(Errc::invalid_spec, "unknown unary kind");
}

void require_same_shape(const std::vector<InputSpec>& in, std::size_t n, const char* what) {
  for (std::size_t i = 1; i < n; ++i)
    if (!in[i].desc.same_shape(in[0].desc))
      fail(Errc::shape_mismatch, std::string(what) + ": input shapes differ after broadcast (" +
                                     shape_str(in[0].desc) + " vs " + shape_str(in[i].desc) + ")");
}

TensorDesc infer_matmul(const TensorDesc& a, const TensorDesc& b, const OpFlags& f) {
  require_dense(a, "matmul");
  require_dense(b, "matmul");
  if (a.cols != b.rows)
    fail(Errc::shape_mismatch, "matmul inner dimensions differ: " + shape_str(a) + " x " + shape_str(b));
  if (a.dtype != b.dtype) fail(Errc::dtype_mismatch, "matmul operands must share a dtype");
  if (!is_floating(a.dtype)) fail(Errc::dtype_mismatch, "matmul supports fp64/fp32/bf16 (int8 via gemm)");
  const DType acc = a.dtype == DType::FP64 ? DType::FP64 : DType::FP32;
  const DType t = f.out_dtype.value_or(acc);
  if (acc == DType::FP64 ? t != DType::FP64 : (t != DType::FP32 && t != DType::BF16))
    fail(Errc::dtype_mismatch, "matmul output dtype incompatible with accumulation");
  return TensorDesc::dense(a.rows, b.cols, t);
}

TensorDesc infer_binary(BinaryKind k, const std::vector<InputSpec>& in, const OpFlags& f) {
  if (f.approx != Approx::Default) fail(Errc::flag_conflict, "approximation flag on a binary op");
  const TensorDesc& a = in[0].desc;
  const TensorDesc& b = in[1].desc;
  switch (k) {
    case BinaryKind::MATMUL: return infer_matmul(a, b, f);
    case BinaryKind::PACK:
      require_dense(a, "pack");
      require_dense(b, "pack");
      if (bit_width(a.dtype) != 16 || bit_width(b.dtype) != 16) fail(Errc::dtype_mismatch, "pack joins 16-bit halves");
      require_same_shape(in, 2, "pack");
      return TensorDesc::dense(a.rows, a.cols, DType::FP32);
    case BinaryKind::COMPARE:
      require_float(a, "compare");
      require_float(b, "compare");
      require_same_shape(in, 2, "compare");
      return TensorDesc{a.rows, a.cols, a.rows, DType::BIT, Bcast::None};
    default: {
      require_float(a, to_string(k).data());
      require_float(b, to_string(k).data());
      require_same_shape(in, 2, to_string(k).data());
      const DType t = f.out_dtype.value_or(join_float(in, 2));
      if (!is_floating(t)) fail(Errc::dtype_mismatch, "output dtype must be floating");
      return TensorDesc::dense(a.rows, a.cols, t);
    }
  }
}

TensorDesc infer_ternary(TernaryKind k, const std::vector<InputSpec>& in, const OpFlags& f) {
  if (f.approx != Approx::Default) fail(Errc::flag_conflict, "approximation flag on a ternary op");
  switch (k) {
    case TernaryKind::BRGEMM:
      fail(Errc::unsupported, "brgemm takes a batch descriptor; call tpp::brgemm");
    case TernaryKind::GEMM: {
      const TensorDesc o = infer_matmul(in[0].desc, in[1].desc, f);
      const TensorDesc& c = in[2].desc;
      require_dense(c, "gemm");
      if (!c.same_shape(o)) fail(Errc::shape_mismatch, "gemm C shape differs from A x B");
      if (c.dtype != o.dtype) fail(Errc::dtype_mismatch, "gemm C dtype must equal the output dtype");
      return o;
    }
    case TernaryKind::BLEND: {
      if (in[2].companion != CompanionKind::Bitmask) fail(Errc::missing_companion, "blend needs a bitmask");
      require_float(in[0].desc, "blend");
      require_float(in[1].desc, "blend");
      require_same_shape(in, 3, "blend");
      const DType t = f.out_dtype.value_or(join_float(in, 2));
      return TensorDesc::dense(in[0].desc.rows, in[0].desc.cols, t);
    }
    case TernaryKind::MULADD:
    case TernaryKind::NMULADD: {
      for (int i = 0; i < 3; ++i) require_float(in[static_cast<std::size_t>(i)].desc, "muladd");
      require_same_shape(in, 3, "muladd");
      const DType t = f.out_dtype.value_or(join_float(in, 3));
      if (!is_floating(t)) fail(Errc::dtype_mismatch, "output dtype must be floating");
      return TensorDesc::dense(in[0].desc.rows, in[0].desc.cols, t);
    }
  }
  fail(Errc::invalid_spec, "unknown ternary kind");
}

}  // namespace

std::string_view to_string(UnaryKind k) noexcept { return lookup(kUnaryNames, k); }
std::string_view to_string(BinaryKind k) noexcept { return lookup(kBinaryNames, k); }
std::string_view to_string(TernaryKind k) noexcept { return lookup(kTernaryNames, k); }
std::string_view to_string(CmpOp c) noexcept { return lookup(kCmp, c); }
std::string_view to_string(Approx a) noexcept { return lookup(kApprox, a); }
std::string_view to_string(ReduceAxis a) noexcept { return lookup(kAxis, a); }
std::string_view to_string(ReduceOp o) noexcept { return lookup(kRop, o); }
std::string_view to_string(TransformKind t) noexcept { return lookup(kTr, t); }

std::string to_string(const OpKind& k) {
  return std::visit([](auto v) { return std::string(to_string(v)); }, k);
}

std::optional<OpKind> parse_op_kind(std::string_view name) noexcept {
  if (auto u = rlookup(kUnaryNames, name)) return OpKind{*u};
  if (auto b = rlookup(kBinaryNames, name)) return OpKind{*b};
  if (auto t = rlookup(kTernaryNames, name)) return OpKind{*t};
  return std::nullopt;
}
std::optional<CmpOp> parse_cmp(std::string_view n) noexcept { return rlookup(kCmp, n); }
std::optional<Approx> parse_approx(std::string_view n) noexcept { return rlookup(kApprox, n); }
std::optional<ReduceAxis> parse_reduce_axis(std::string_view n) noexcept { return rlookup(kAxis, n); }
std::optional<ReduceOp> parse_reduce_op(std::string_view n) noexcept { return rlookup(kRop, n); }
std::optional<TransformKind> parse_transform(std::string_view n) noexcept { return rlookup(kTr, n); }

int arity(const OpKind& k) noexcept { return static_cast<int>(k.index()) + 1; }

bool is_elementwise(const OpKind& k) noexcept {
  if (const auto* u = std::get_if<UnaryKind>(&k)) {
    switch (*u) {
      case UnaryKind::IDENTITY: case UnaryKind::ZERO: case UnaryKind::SQUARE: case UnaryKind::INC:
      case UnaryKind::DEC: case UnaryKind::SQRT: case UnaryKind::RECIPROCAL: case UnaryKind::RSQRT:
      case UnaryKind::EXP: case UnaryKind::TANH: case UnaryKind::RELU: case UnaryKind::SIGMOID:
      case UnaryKind::GELU:
        return true;
      default: return false;
    }
  }
  if (const auto* b = std::get_if<BinaryKind>(&k)) {
    switch (*b) {
      case BinaryKind::ADD: case BinaryKind::SUB: case BinaryKind::MUL: case BinaryKind::DIV:
      case BinaryKind::MAX: case BinaryKind::MIN:
        return true;
      default: return false;
    }
  }
  const auto t = std::get<TernaryKind>(k);
  return t == TernaryKind::MULADD || t == TernaryKind::NMULADD;
}

TensorDesc infer_output(const KernelSpec& spec) {
  const int n = arity(spec.kind);
  if (static_cast<int>(spec.inputs.size()) != n)
    fail(Errc::invalid_spec, "expected " + std::to_string(n) + " inputs for " + to_string(spec.kind));
  for (const auto& in : spec.inputs) check_desc(in.desc);
  if (const auto* u = std::get_if<UnaryKind>(&spec.kind)) return infer_unary(*u, spec.inputs[0], spec.flags);
  if (const auto* b = std::get_if<BinaryKind>(&spec.kind)) return infer_binary(*b, spec.inputs, spec.flags);
  return infer_ternary(std::get<TernaryKind>(spec.kind), spec.inputs, spec.flags);
}

std::string spec_key(const KernelSpec& s) {
  std::ostringstream o;
  o << to_string(s.kind);
  for (const auto& in : s.inputs) {
    const auto& d = in.desc;
    o << '|' << d.rows << ',' << d.cols << ',' << d.ld << ',' << to_string(d.dtype) << ',' << to_string(d.bcast)
      << ',' << to_string(in.companion) << ',' << in.companion_count;
  }
  const auto& f = s.flags;
  o << "|a=" << to_string(f.approx) << ";r=" << to_string(f.reduce.axis) << ',' << to_string(f.reduce.op) << ','
    << f.reduce.squared << ";t=" << to_string(f.transform.kind) << ',' << f.transform.alpha0 << ','
    << f.transform.alpha1 << ',' << f.transform.logical_cols << ";ix=" << static_cast<int>(f.index_axis)
    << ";st=" << f.strided.row0 << ',' << f.strided.col0 << ',' << f.strided.row_stride << ','
    << f.strided.col_stride << ";c=" << to_string(f.cmp) << ";m=" << f.bitmask_out << ";p=" << f.dropout_p
    << ";o=" << (f.out_dtype ? to_string(*f.out_dtype) : "-") << ";e=" << f.out_rows << ',' << f.out_cols;
  return o.str();
}

Kernel::Kernel(KernelSpec spec, TensorDesc out) : spec_(std::move(spec)), out_(out) {}

void Kernel::operator()(std::span<const TensorView> inputs, const TensorView& out) const {
  if (inputs.size() != spec_.inputs.size()) fail(Errc::invalid_spec, "kernel input count mismatch");
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& want = spec_.inputs[i].desc;
    const auto& got = inputs[i].desc;
    if (!got.same_shape(want) || got.dtype != want.dtype || got.bcast != want.bcast)
      fail(Errc::shape_mismatch, "kernel input " + std::to_string(i) + " does not match the dispatched spec");
  }
  if (!out.desc.same_shape(out_) || out.desc.dtype != out_.dtype)
    fail(Errc::shape_mismatch, "kernel output does not match the dispatched spec");
  execute(spec_.kind, spec_.flags, inputs, out);
}

void Kernel::operator()(const TensorView& in, const TensorView& out) const {
  const TensorView v[1] = {in};
  (*this)(std::span<const TensorView>(v), out);
}
void Kernel::operator()(const TensorView& a, const TensorView& b, const TensorView& out) const {
  const TensorView v[2] = {a, b};
  (*this)(std::span<const TensorView>(v), out);
}
void Kernel::operator()(const TensorView& a, const TensorView& b, const TensorView& c, const TensorView& out) const {
  const TensorView v[3] = {a, b, c};
  (*this)(std::span<const TensorView>(v), out);
}

namespace {
struct DispatchCache {
  std::shared_mutex mu;
  std::unordered_map<std::string, KernelPtr> map;
};
DispatchCache& cache() {
  static DispatchCache c;
  return c;
}
}  // namespace

KernelPtr dispatch(const KernelSpec& spec) {
  const std::string key = spec_key(spec);
  auto& c = cache();
  {
    std::shared_lock lock(c.mu);
    if (auto it = c.map.find(key); it != c.map.end()) return it->second;
  }
  const TensorDesc out = infer_output(spec);
  auto k = std::make_shared<const Kernel>(spec, out);
  std::unique_lock lock(c.mu);
  auto [it, inserted] = c.map.emplace(key, std::move(k));
  return it->second;
}

std::size_t dispatch_cache_size() {
  auto& c = cache();
  std::shared_lock lock(c.mu);
  return c.map.size();
}

}  // namespace tpp
