#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tpp/tensor.hpp"

namespace tpp {

enum class UnaryKind : std::uint8_t {
  IDENTITY, ZERO, SQUARE, INC, DEC, SQRT, RECIPROCAL, RSQRT, EXP, PRNG,
  QUANTIZE, DEQUANTIZE, REDUCE, TRANSFORM, UNPACK, REPLICATE_COLS,
  GATHER, SCATTER, GATHER2D, SCATTER2D, STRIDED_LOAD, STRIDED_STORE,
  TANH, TANH_INV, RELU, RELU_INV, SIGMOID, SIGMOID_INV, GELU, GELU_INV,
  DROPOUT, DROPOUT_INV,
};
enum class BinaryKind : std::uint8_t { ADD, SUB, MUL, DIV, MAX, MIN, MATMUL, PACK, COMPARE };
enum class TernaryKind : std::uint8_t { GEMM, BRGEMM, MULADD, NMULADD, BLEND };

using OpKind = std::variant<UnaryKind, BinaryKind, TernaryKind>;

enum class CmpOp : std::uint8_t { EQ, NE, LT, LE, GT, GE };
enum class Approx : std::uint8_t { Default, Exact, Pade, Minimax, Taylor };
enum class ReduceAxis : std::uint8_t { Rows, Cols, All };
enum class ReduceOp : std::uint8_t { Sum, Mul, Min, Max };
enum class TransformKind : std::uint8_t { Transpose, Vnni, VnniToVnniT };
enum class IndexAxis : std::uint8_t { Rows, Cols };

struct ReduceSpec {
  ReduceAxis axis = ReduceAxis::Rows;
  ReduceOp op = ReduceOp::Sum;
  bool squared = false;
  bool operator==(const ReduceSpec&) const = default;
};

struct TransformSpec {
  TransformKind kind = TransformKind::Transpose;
  int alpha0 = 0;              // VNNI: group size; VNNI_TO_VNNIT: target group size
  int alpha1 = 0;              // VNNI_TO_VNNIT: source group size
  std::int64_t logical_cols = 0;  // VNNI_TO_VNNIT: unpadded source column count
  bool operator==(const TransformSpec&) const = default;
};

// Affine offset generator for strided loads/stores: element (i, j) of the
// dense side maps to (row0 + i*row_stride, col0 + j*col_stride).
struct StridedSpec {
  std::int64_t row0 = 0, col0 = 0, row_stride = 1, col_stride = 1;
  bool operator==(const StridedSpec&) const = default;
};

struct OpFlags {
  Approx approx = Approx::Default;
  ReduceSpec reduce{};
  TransformSpec transform{};
  IndexAxis index_axis = IndexAxis::Cols;
  StridedSpec strided{};
  CmpOp cmp = CmpOp::EQ;
  bool bitmask_out = false;
  float dropout_p = 0.0f;
  std::optional<DType> out_dtype;
  // Output extents for kinds whose output shape is not implied by the input
  // (scatter targets, replicate count, strided stores).
  std::int64_t out_rows = 0;
  std::int64_t out_cols = 0;
  bool operator==(const OpFlags&) const = default;
};

std::string_view to_string(UnaryKind k) noexcept;
std::string_view to_string(BinaryKind k) noexcept;
std::string_view to_string(TernaryKind k) noexcept;
std::string_view to_string(CmpOp c) noexcept;
std::string_view to_string(Approx a) noexcept;
std::string_view to_string(ReduceAxis a) noexcept;
std::string_view to_string(ReduceOp o) noexcept;
std::string_view to_string(TransformKind t) noexcept;
std::string to_string(const OpKind& k);
std::optional<OpKind> parse_op_kind(std::string_view name) noexcept;
std::optional<CmpOp> parse_cmp(std::string_view name) noexcept;
std::optional<Approx> parse_approx(std::string_view name) noexcept;
std::optional<ReduceAxis> parse_reduce_axis(std::string_view name) noexcept;
std::optional<ReduceOp> parse_reduce_op(std::string_view name) noexcept;
std::optional<TransformKind> parse_transform(std::string_view name) noexcept;

int arity(const OpKind& k) noexcept;
// Pure elementwise map (possibly with broadcast inputs); these are the kinds
// legal inside a tile-fused region.
bool is_elementwise(const OpKind& k) noexcept;

struct InputSpec {
  TensorDesc desc{};
  CompanionKind companion = CompanionKind::None;
  std::int64_t companion_count = 0;
  bool operator==(const InputSpec&) const = default;
};

struct KernelSpec {
  OpKind kind = UnaryKind::IDENTITY;
  std::vector<InputSpec> inputs;
  OpFlags flags{};
  bool operator==(const KernelSpec&) const = default;
};

// Shape and dtype inference; throws tpp::Error with a reason code when the
// spec is not well formed.
TensorDesc infer_output(const KernelSpec& spec);

// Canonical text key for a spec; equal specs give equal keys.
std::string spec_key(const KernelSpec& spec);

class Kernel {
 public:
  Kernel(KernelSpec spec, TensorDesc out);
  const KernelSpec& spec() const noexcept { return spec_; }
  const TensorDesc& output_desc() const noexcept { return out_; }
  // Runs on views whose descriptors match the KernelSpec (ld may differ).
  void operator()(std::span<const TensorView> inputs, const TensorView& out) const;
  void operator()(const TensorView& in, const TensorView& out) const;
  void operator()(const TensorView& a, const TensorView& b, const TensorView& out) const;
  void operator()(const TensorView& a, const TensorView& b, const TensorView& c, const TensorView& out) const;

 private:
  KernelSpec spec_;
  TensorDesc out_;
};

using KernelPtr = std::shared_ptr<const Kernel>;

// Cached: equal specs return the same kernel object.
KernelPtr dispatch(const KernelSpec& spec);
std::size_t dispatch_cache_size();

// Validated execution of one primitive on concrete views.
void execute(const OpKind& kind, const OpFlags& flags, std::span<const TensorView> inputs,
             const TensorView& out);

void apply_unary(UnaryKind kind, const OpFlags& flags, const TensorView& in, const TensorView& out);
void apply_binary(BinaryKind kind, const OpFlags& flags, const TensorView& a, const TensorView& b,
                  const TensorView& out);
void apply_ternary(TernaryKind kind, const OpFlags& flags, const TensorView& a, const TensorView& b,
                   const TensorView& c, const TensorView& out);

void reduce(const TensorView& in, const ReduceSpec& spec, const TensorView& out);
void transform(const TensorView& in, const TransformSpec& spec, const TensorView& out);
void replicate_cols(const TensorView& in, std::int64_t times, const TensorView& out);

enum class GatherMode : std::uint8_t { GatherRows, GatherCols, ScatterRows, ScatterCols, Gather2D, Scatter2D };
void gather_scatter(const TensorView& in, GatherMode mode, const TensorView& out);

// Column-sum of gathered columns without materializing them:
// out(:, 0) = sum over p of in(:, idx[p]), p ascending. Indices come from
// in.secondary.
void gather_reduce_cols(const TensorView& in, const TensorView& out);

// Running reduce over p of binary(a(:, ia[p]), b(:, ib[p])). Index lists come
// from a.secondary and b.secondary; equal lengths required.
void binary_reduce_cols(BinaryKind binary, ReduceOp op, const TensorView& a, const TensorView& b,
                        const TensorView& out);

// Staged interleave transpose on an n x n 32-bit tile, n in {4, 8, 16}.
// Registers are the tile's columns; stage s interleaves element groups of
// width 2^s. The optional trace receives the tile after every stage.
void shuffle_network_transpose(const std::uint32_t* in, std::uint32_t* out, int n,
                               std::vector<std::vector<std::uint32_t>>* trace = nullptr);

// Symmetric per-tensor INT8: q = clamp(nearbyint(x / scale), -127, 127).
float int8_scale_for(const TensorView& in);

}  // namespace tpp
