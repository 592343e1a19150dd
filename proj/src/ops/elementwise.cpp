#include <cmath>
#include <limits>
#include <string>

#include "detail.hpp"
#include "tpp/approx.hpp"
#include "tpp/gemm.hpp"
#include "tpp/prng.hpp"

namespace tpp {

namespace detail {
void run_movement(UnaryKind kind, const OpFlags& flags, const TensorView& in, const TensorView& out);
void run_reduce(const TensorView& in, const ReduceSpec& spec, const TensorView& out);
}  // namespace detail

namespace {

using detail::blocked_map;
using detail::companion_view;

bool wants_fp64(std::span<const TensorView> ins, const TensorView& out) {
  if (out.desc.dtype == DType::FP64) return true;
  for (const auto& v : ins)
    if (v.desc.dtype == DType::FP64) return true;
  return false;
}

template <class T>
T tanh_sel(T x, Approx a) {
  switch (a) {
    case Approx::Exact: return std::tanh(x);
    case Approx::Minimax: return approx::tanh_minimax(x);
    default: return approx::tanh_pade78(x);
  }
}

template <class T>
T sigmoid_sel(T x, Approx a) {
  if (a == Approx::Exact) return T(1) / (T(1) + std::exp(-x));
  return approx::sigmoid_from_tanh(tanh_sel(x * T(0.5), a));
}

template <class T>
T exp_sel(T x, Approx a) {
  return a == Approx::Exact ? std::exp(x) : approx::exp_taylor(x);
}

template <class T>
T gelu_sel(T x, Approx a) {
  return a == Approx::Minimax ? approx::gelu_minimax(x) : approx::gelu_exact(x);
}

template <class T, class F>
void map1(const TensorView& in, const TensorView& out, F f) {
  blocked_map<T, 1>({in}, out, [&](const T* const* p, T* r, std::int64_t n, std::int64_t, std::int64_t) {
    const T* x = p[0];
    for (std::int64_t i = 0; i < n; ++i) r[i] = f(x[i]);
  });
}

template <class T, class F>
void map2(const TensorView& a, const TensorView& b, const TensorView& out, F f) {
  blocked_map<T, 2>({a, b}, out, [&](const T* const* p, T* r, std::int64_t n, std::int64_t, std::int64_t) {
    const T* x = p[0];
    const T* y = p[1];
    for (std::int64_t i = 0; i < n; ++i) r[i] = f(x[i], y[i]);
  });
}

template <class T, class F>
void map3(const TensorView& a, const TensorView& b, const TensorView& c, const TensorView& out, F f) {
  blocked_map<T, 3>({a, b, c}, out, [&](const T* const* p, T* r, std::int64_t n, std::int64_t, std::int64_t) {
    const T* x = p[0];
    const T* y = p[1];
    const T* z = p[2];
    for (std::int64_t i = 0; i < n; ++i) r[i] = f(x[i], y[i], z[i]);
  });
}

const std::uint8_t* require_mask(const Companion& c, std::int64_t rows, std::int64_t cols, const char* what) {
  if (c.kind != CompanionKind::Bitmask || c.data == nullptr)
    fail(Errc::missing_companion, std::string(what) + " needs a bitmask companion");
  if (c.desc.rows != rows || c.desc.cols != cols) fail(Errc::shape_mismatch, std::string(what) + ": bitmask shape");
  return c.mask_data();
}

TensorView require_x(const TensorView& in, const char* what) {
  const Companion& c = in.secondary;
  if (c.kind != CompanionKind::Tensor || c.data == nullptr)
    fail(Errc::missing_companion, std::string(what) + " needs the forward input as a tensor companion");
  TensorView x = companion_view(c);
  if (!is_floating(x.desc.dtype)) fail(Errc::dtype_mismatch, std::string(what) + ": companion must be floating");
  return x.broadcast_to(in.desc.rows, in.desc.cols);
}

template <class T>
void run_dropout(const TensorView& in, const OpFlags& f, const TensorView& out) {
  if (!in.tertiary.seed) fail(Errc::missing_companion, "dropout needs a PRNG seed in the input tertiary");
  const std::uint64_t seed = *in.tertiary.seed;
  const float p = f.dropout_p;
  const T scale = p < 1.0f ? T(1) / (T(1) - static_cast<T>(p)) : T(0);
  std::uint8_t* mask = nullptr;
  if (out.secondary.kind == CompanionKind::Bitmask)
    mask = const_cast<std::uint8_t*>(require_mask(out.secondary, out.desc.rows, out.desc.cols, "dropout"));
  const std::int64_t M = out.desc.rows, N = out.desc.cols;
  const bool par = M * N >= detail::kParallelThreshold && N > 1;
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t j = 0; j < N; ++j) {
    PrngState st = PrngState::for_stream(seed, static_cast<std::uint64_t>(j));
    alignas(64) T x[detail::kBlockRows];
    alignas(64) T r[detail::kBlockRows];
    for (std::int64_t i0 = 0; i0 < M; i0 += detail::kBlockRows) {
      const std::int64_t n = std::min(detail::kBlockRows, M - i0);
      detail::load_col<T>(in, i0, j, n, x);
      for (std::int64_t i = 0; i < n; ++i) {
        const bool keep = st.uniform() >= p;
        r[i] = keep ? x[i] * scale : T(0);
        if (mask) bitmask::set(mask, M, i0 + i, j, keep);
      }
      detail::store_col<T>(out, i0, j, n, r);
    }
  }
}

template <class T>
void run_prng(const TensorView& in, const TensorView& out) {
  const auto seed = in.tertiary.seed ? in.tertiary.seed : out.tertiary.seed;
  if (!seed) fail(Errc::missing_companion, "prng needs a seed in the tertiary field");
  const std::int64_t M = out.desc.rows, N = out.desc.cols;
#pragma omp parallel for schedule(static) if (M * N >= detail::kParallelThreshold && N > 1)
  for (std::int64_t j = 0; j < N; ++j) {
    PrngState st = PrngState::for_stream(*seed, static_cast<std::uint64_t>(j));
    alignas(64) T r[detail::kBlockRows];
    for (std::int64_t i0 = 0; i0 < M; i0 += detail::kBlockRows) {
      const std::int64_t n = std::min(detail::kBlockRows, M - i0);
      for (std::int64_t i = 0; i < n; ++i) r[i] = static_cast<T>(st.uniform());
      detail::store_col<T>(out, i0, j, n, r);
    }
  }
}

template <class T>
void run_unary_math(UnaryKind k, const OpFlags& f, const TensorView& in, const TensorView& out) {
  const Approx a = f.approx;
  switch (k) {
    case UnaryKind::SQUARE: return map1<T>(in, out, [](T x) { return x * x; });
    case UnaryKind::INC: return map1<T>(in, out, [](T x) { return x + T(1); });
    case UnaryKind::DEC: return map1<T>(in, out, [](T x) { return x - T(1); });
    case UnaryKind::SQRT: return map1<T>(in, out, [](T x) { return std::sqrt(x); });
    case UnaryKind::RECIPROCAL: return map1<T>(in, out, [](T x) { return T(1) / x; });
    case UnaryKind::RSQRT: return map1<T>(in, out, [](T x) { return T(1) / std::sqrt(x); });
    case UnaryKind::EXP: return map1<T>(in, out, [a](T x) { return exp_sel(x, a); });
    case UnaryKind::TANH: return map1<T>(in, out, [a](T x) { return tanh_sel(x, a); });
    case UnaryKind::SIGMOID: return map1<T>(in, out, [a](T x) { return sigmoid_sel(x, a); });
    case UnaryKind::GELU: return map1<T>(in, out, [a](T x) { return gelu_sel(x, a); });
    case UnaryKind::TANH_INV:
      return map2<T>(in, require_x(in, "tanh_inv"), out, [a](T dy, T x) {
        const T t = tanh_sel(x, a);
        return dy * (T(1) - t * t);
      });
    case UnaryKind::SIGMOID_INV:
      return map2<T>(in, require_x(in, "sigmoid_inv"), out, [a](T dy, T x) {
        const T s = sigmoid_sel(x, a);
        return dy * (s * (T(1) - s));
      });
    case UnaryKind::GELU_INV:
      return map2<T>(in, require_x(in, "gelu_inv"), out, [](T dy, T x) { return dy * approx::gelu_grad(x); });
    case UnaryKind::RELU: {
      std::uint8_t* mask = nullptr;
      if (f.bitmask_out)
        mask = const_cast<std::uint8_t*>(require_mask(out.secondary, out.desc.rows, out.desc.cols, "relu"));
      const std::int64_t M = out.desc.rows;
      blocked_map<T, 1>({in}, out, [&](const T* const* p, T* r, std::int64_t n, std::int64_t i0, std::int64_t j) {
        const T* x = p[0];
        for (std::int64_t i = 0; i < n; ++i) {
          const bool pos = x[i] > T(0);
          r[i] = pos ? x[i] : T(0);
          if (mask) bitmask::set(mask, M, i0 + i, j, pos);
        }
      });
      return;
    }
    case UnaryKind::RELU_INV:
    case UnaryKind::DROPOUT_INV: {
      const std::uint8_t* mask = require_mask(in.secondary, in.desc.rows, in.desc.cols, to_string(k).data());
      const float p = f.dropout_p;
      const T scale = k == UnaryKind::RELU_INV ? T(1) : (p < 1.0f ? T(1) / (T(1) - static_cast<T>(p)) : T(0));
      const std::int64_t M = in.desc.rows;
      const bool relu = k == UnaryKind::RELU_INV;
      blocked_map<T, 1>({in}, out, [&](const T* const* pp, T* r, std::int64_t n, std::int64_t i0, std::int64_t j) {
        const T* dy = pp[0];
        for (std::int64_t i = 0; i < n; ++i) {
          const bool keep = bitmask::get(mask, M, i0 + i, j);
          r[i] = keep ? (relu ? dy[i] : dy[i] * scale) : T(0);
        }
      });
      return;
    }
    case UnaryKind::DROPOUT: return run_dropout<T>(in, f, out);
    default: fail(Errc::invalid_spec, "not a math unary");
  }
}

void run_identity(const TensorView& in, const TensorView& out) {
  if (in.desc.dtype == out.desc.dtype) {
    const std::size_t w = byte_width(in.desc.dtype);
    const std::int64_t M = out.desc.rows, N = out.desc.cols;
    if (in.desc.phys_rows() == M) {
      for (std::int64_t j = 0; j < N; ++j)
        std::memmove(out.bytes() + static_cast<std::size_t>(out.desc.offset(0, j)) * w,
                     in.bytes() + static_cast<std::size_t>(in.desc.offset(0, j)) * w, static_cast<std::size_t>(M) * w);
    } else {
      for (std::int64_t j = 0; j < N; ++j)
        for (std::int64_t i = 0; i < M; ++i) detail::copy_elem(in, i, j, out, i, j);
    }
    return;
  }
  if (in.desc.dtype == DType::FP64 || out.desc.dtype == DType::FP64)
    return map1<double>(in, out, [](double x) { return x; });
  // FP32 <-> BF16: widening is exact, narrowing rounds to nearest even on store.
  map1<float>(in, out, [](float x) { return x; });
}

void run_zero(const TensorView& out) {
  const std::size_t w = byte_width(out.desc.dtype);
  for (std::int64_t j = 0; j < out.desc.cols; ++j)
    std::memset(out.bytes() + static_cast<std::size_t>(j * out.desc.ld) * w, 0,
                static_cast<std::size_t>(out.desc.rows) * w);
}

template <class T>
void run_quantize(const TensorView& in, const TensorView& out) {
  if (!out.tertiary.scale) fail(Errc::missing_companion, "quantize needs a scale in the output tertiary");
  const T inv = T(1) / static_cast<T>(*out.tertiary.scale);
  const std::int64_t M = in.desc.rows;
  alignas(64) T x[detail::kBlockRows];
  for (std::int64_t j = 0; j < in.desc.cols; ++j)
    for (std::int64_t i0 = 0; i0 < M; i0 += detail::kBlockRows) {
      const std::int64_t n = std::min(detail::kBlockRows, M - i0);
      detail::load_col<T>(in, i0, j, n, x);
      auto* q = out.as<std::int8_t>() + out.desc.offset(i0, j);
      for (std::int64_t i = 0; i < n; ++i) {
        const T r = std::nearbyint(x[i] * inv);
        q[i] = static_cast<std::int8_t>(std::clamp(r, T(-127), T(127)));
      }
    }
}

template <class T>
void run_dequantize(const TensorView& in, const TensorView& out) {
  if (!in.tertiary.scale) fail(Errc::missing_companion, "dequantize needs a scale in the input tertiary");
  const T s = static_cast<T>(*in.tertiary.scale);
  map1<T>(in, out, [s](T q) { return q * s; });
}

void run_unpack(const TensorView& in, const TensorView& out) {
  const Companion& lo = out.secondary;
  if (lo.kind != CompanionKind::Tensor || lo.data == nullptr)
    fail(Errc::missing_companion, "unpack writes the low halves into a tensor companion");
  if (!lo.desc.same_shape(out.desc) || bit_width(lo.desc.dtype) != 16)
    fail(Errc::shape_mismatch, "unpack low-half companion must be a 16-bit tensor of the same shape");
  const TensorView lov = companion_view(lo);
  for (std::int64_t j = 0; j < in.desc.cols; ++j) {
    const float* x = in.as<const float>() + in.desc.offset(0, j);
    auto* hi = out.as<std::uint16_t>() + out.desc.offset(0, j);
    auto* lw = lov.as<std::uint16_t>() + lov.desc.offset(0, j);
    for (std::int64_t i = 0; i < in.desc.rows; ++i) {
      hi[i] = fp32_hi(x[i]);
      lw[i] = fp32_lo(x[i]);
    }
  }
}

void run_pack(const TensorView& hi, const TensorView& lo, const TensorView& out) {
  for (std::int64_t j = 0; j < out.desc.cols; ++j) {
    const auto* h = hi.as<const std::uint16_t>() + hi.desc.offset(0, j);
    const auto* l = lo.as<const std::uint16_t>() + lo.desc.offset(0, j);
    float* o = out.as<float>() + out.desc.offset(0, j);
    for (std::int64_t i = 0; i < out.desc.rows; ++i) o[i] = fp32_from_halves(h[i], l[i]);
  }
}

template <class T>
void run_compare(CmpOp c, const TensorView& a, const TensorView& b, const TensorView& out) {
  std::uint8_t* mask = const_cast<std::uint8_t*>(require_mask(out.secondary, a.desc.rows, a.desc.cols, "compare"));
  const std::int64_t M = a.desc.rows;
  alignas(64) T x[detail::kBlockRows];
  alignas(64) T y[detail::kBlockRows];
  for (std::int64_t j = 0; j < a.desc.cols; ++j)
    for (std::int64_t i0 = 0; i0 < M; i0 += detail::kBlockRows) {
      const std::int64_t n = std::min(detail::kBlockRows, M - i0);
      detail::load_col<T>(a, i0, j, n, x);
      detail::load_col<T>(b, i0, j, n, y);
      for (std::int64_t i = 0; i < n; ++i) {
        bool r = false;
        switch (c) {
          case CmpOp::EQ: r = x[i] == y[i]; break;
          case CmpOp::NE: r = x[i] != y[i]; break;
          case CmpOp::LT: r = x[i] < y[i]; break;
          case CmpOp::LE: r = x[i] <= y[i]; break;
          case CmpOp::GT: r = x[i] > y[i]; break;
          case CmpOp::GE: r = x[i] >= y[i]; break;
        }
        bitmask::set(mask, M, i0 + i, j, r);
      }
    }
}

template <class T>
void run_binary(BinaryKind k, const TensorView& a, const TensorView& b, const TensorView& out) {
  switch (k) {
    case BinaryKind::ADD: return map2<T>(a, b, out, [](T x, T y) { return x + y; });
    case BinaryKind::SUB: return map2<T>(a, b, out, [](T x, T y) { return x - y; });
    case BinaryKind::MUL: return map2<T>(a, b, out, [](T x, T y) { return x * y; });
    case BinaryKind::DIV: return map2<T>(a, b, out, [](T x, T y) { return x / y; });
    case BinaryKind::MAX: return map2<T>(a, b, out, [](T x, T y) { return x > y ? x : y; });
    case BinaryKind::MIN: return map2<T>(a, b, out, [](T x, T y) { return x < y ? x : y; });
    default: fail(Errc::invalid_spec, "not an elementwise binary");
  }
}

template <class T>
void run_blend(const TensorView& a, const TensorView& b, const TensorView& c, const TensorView& out) {
  const std::uint8_t* mask = require_mask(c.secondary, a.desc.rows, a.desc.cols, "blend");
  const std::int64_t M = a.desc.rows;
  blocked_map<T, 2>({a, b}, out, [&](const T* const* p, T* r, std::int64_t n, std::int64_t i0, std::int64_t j) {
    for (std::int64_t i = 0; i < n; ++i) r[i] = bitmask::get(mask, M, i0 + i, j) ? p[0][i] : p[1][i];
  });
}

void run_matmul(const TensorView& a, const TensorView& b, const TensorView* c, const TensorView& out) {
  GemmSpec s;
  s.M = a.desc.rows;
  s.N = b.desc.cols;
  s.K = a.desc.cols;
  s.lda = a.desc.ld;
  s.ldb = b.desc.ld;
  s.ldc = out.desc.ld;
  s.in_dtype = a.desc.dtype;
  s.out_dtype = out.desc.dtype;
  s.beta = 0.0f;
  if (c) {
    // out = C + A x B: seed the accumulator from C, then accumulate.
    if (c->data != out.data) run_identity(*c, out);
    s.beta = 1.0f;
  }
  gemm(s, a.data, b.data, out.data);
}

TensorView apply_extents(const TensorView& v) { return v.effective(); }

}  // namespace

namespace detail {
std::atomic<bool> g_reverse_reduce{false};
}

void execute(const OpKind& kind, const OpFlags& flags, std::span<const TensorView> raw_inputs,
             const TensorView& raw_out) {
  const int n = arity(kind);
  if (static_cast<int>(raw_inputs.size()) != n)
    fail(Errc::invalid_spec, "expected " + std::to_string(n) + " inputs for " + to_string(kind));
  std::array<TensorView, 3> ins{};
  KernelSpec spec{kind, {}, flags};
  for (int i = 0; i < n; ++i) {
    ins[static_cast<std::size_t>(i)] = apply_extents(raw_inputs[static_cast<std::size_t>(i)]);
    const auto& v = ins[static_cast<std::size_t>(i)];
    spec.inputs.push_back(InputSpec{v.desc, v.secondary.kind, v.secondary.count});
  }
  const TensorView out = apply_extents(raw_out);
  const TensorDesc want = infer_output(spec);
  if (!out.desc.same_shape(want) || out.desc.dtype != want.dtype)
    fail(Errc::shape_mismatch, "output " + std::to_string(out.desc.rows) + "x" + std::to_string(out.desc.cols) + ":" +
                                   std::string(to_string(out.desc.dtype)) + " but " + to_string(kind) + " produces " +
                                   std::to_string(want.rows) + "x" + std::to_string(want.cols) + ":" +
                                   std::string(to_string(want.dtype)));
  if (out.desc.bcast != Bcast::None) fail(Errc::invalid_spec, "outputs cannot be broadcast");
  if (want.dtype != DType::BIT) {
    out.desc.validate();
    for (int i = 0; i < n; ++i)
      if (ins[static_cast<std::size_t>(i)].data == nullptr && !(std::holds_alternative<UnaryKind>(kind) &&
                                                               (std::get<UnaryKind>(kind) == UnaryKind::ZERO ||
                                                                std::get<UnaryKind>(kind) == UnaryKind::PRNG)))
        fail(Errc::invalid_spec, "null input buffer");
    if (out.data == nullptr) fail(Errc::invalid_spec, "null output buffer");
  }
  const bool f64 = wants_fp64(std::span<const TensorView>(ins.data(), static_cast<std::size_t>(n)), out);

  if (const auto* u = std::get_if<UnaryKind>(&kind)) {
    const TensorView& in = ins[0];
    switch (*u) {
      case UnaryKind::IDENTITY: return run_identity(in, out);
      case UnaryKind::ZERO: return run_zero(out);
      case UnaryKind::PRNG: return f64 ? run_prng<double>(in, out) : run_prng<float>(in, out);
      case UnaryKind::QUANTIZE: return f64 ? run_quantize<double>(in, out) : run_quantize<float>(in, out);
      case UnaryKind::DEQUANTIZE: return f64 ? run_dequantize<double>(in, out) : run_dequantize<float>(in, out);
      case UnaryKind::REDUCE: return detail::run_reduce(in, flags.reduce, out);
      case UnaryKind::UNPACK: return run_unpack(in, out);
      case UnaryKind::TRANSFORM:
      case UnaryKind::REPLICATE_COLS:
      case UnaryKind::GATHER:
      case UnaryKind::SCATTER:
      case UnaryKind::GATHER2D:
      case UnaryKind::SCATTER2D:
      case UnaryKind::STRIDED_LOAD:
      case UnaryKind::STRIDED_STORE: return detail::run_movement(*u, flags, in, out);
      default: return f64 ? run_unary_math<double>(*u, flags, in, out) : run_unary_math<float>(*u, flags, in, out);
    }
  }
  if (const auto* b = std::get_if<BinaryKind>(&kind)) {
    switch (*b) {
      case BinaryKind::MATMUL: return run_matmul(ins[0], ins[1], nullptr, out);
      case BinaryKind::PACK: return run_pack(ins[0], ins[1], out);
      case BinaryKind::COMPARE:
        return f64 ? run_compare<double>(flags.cmp, ins[0], ins[1], out)
                   : run_compare<float>(flags.cmp, ins[0], ins[1], out);
      default: return f64 ? run_binary<double>(*b, ins[0], ins[1], out) : run_binary<float>(*b, ins[0], ins[1], out);
    }
  }
  switch (std::get<TernaryKind>(kind)) {
    case TernaryKind::GEMM: return run_matmul(ins[0], ins[1], &ins[2], out);
    case TernaryKind::MULADD:
      if (f64) return map3<double>(ins[0], ins[1], ins[2], out, [](double a, double b, double c) { return c + a * b; });
      return map3<float>(ins[0], ins[1], ins[2], out, [](float a, float b, float c) { return c + a * b; });
    case TernaryKind::NMULADD:
      if (f64) return map3<double>(ins[0], ins[1], ins[2], out, [](double a, double b, double c) { return c - a * b; });
      return map3<float>(ins[0], ins[1], ins[2], out, [](float a, float b, float c) { return c - a * b; });
    case TernaryKind::BLEND:
      return f64 ? run_blend<double>(ins[0], ins[1], ins[2], out) : run_blend<float>(ins[0], ins[1], ins[2], out);
    case TernaryKind::BRGEMM: break;
  }
  fail(Errc::unsupported, "brgemm takes a batch descriptor; call tpp::brgemm");
}

void apply_unary(UnaryKind kind, const OpFlags& flags, const TensorView& in, const TensorView& out) {
  const TensorView v[1] = {in};
  execute(kind, flags, v, out);
}
void apply_binary(BinaryKind kind, const OpFlags& flags, const TensorView& a, const TensorView& b,
                  const TensorView& out) {
  const TensorView v[2] = {a, b};
  execute(kind, flags, v, out);
}
void apply_ternary(TernaryKind kind, const OpFlags& flags, const TensorView& a, const TensorView& b,
                   const TensorView& c, const TensorView& out) {
  const TensorView v[3] = {a, b, c};
  execute(kind, flags, v, out);
}

float int8_scale_for(const TensorView& in) {
  double amax = 0.0;
  for (std::int64_t j = 0; j < in.desc.cols; ++j)
    for (std::int64_t i = 0; i < in.desc.rows; ++i) amax = std::max(amax, std::fabs(load_element(in, i, j)));
  return amax > 0.0 ? static_cast<float>(amax / 127.0) : 1.0f;
}

}  // namespace tpp
