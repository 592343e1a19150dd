#include <algorithm>
#include <cstring>
#include <string>
#include <vector>

#include "tpp/gemm.hpp"
#include "tpp/ops.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tpp {

BlockingParams default_blocking(DType in) noexcept {
  const int w = bit_width(in) > 0 ? bit_width(in) : 32;
  return BlockingParams{64 * 32 / w, 6, 64};
}

GemmSpec GemmSpec::plain(std::int64_t M, std::int64_t N, std::int64_t K, DType in) {
  GemmSpec s;
  s.M = M;
  s.N = N;
  s.K = K;
  s.lda = M;
  s.ldb = K;
  s.ldc = M;
  s.in_dtype = in;
  s.out_dtype = accumulation_dtype(in);
  return s;
}

DType accumulation_dtype(DType in) {
  switch (in) {
    case DType::FP64: return DType::FP64;
    case DType::FP32:
    case DType::BF16: return DType::FP32;
    case DType::INT8: return DType::INT32;
    default: fail(Errc::dtype_mismatch, "gemm input dtype must be fp64, fp32, bf16 or int8");
  }
}

int vnni_alpha(DType dtype) {
  switch (bit_width(dtype)) {
    case 16: return 2;
    case 8: return 4;
    default: fail(Errc::dtype_mismatch, "vnni layout needs a 16-bit or 8-bit dtype");
  }
}

std::int64_t batch_count(const BrgemmBatch& batch) {
  return std::visit(
      [](const auto& b) -> std::int64_t {
        using B = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<B, BatchAddress>) {
          if (b.a.size() != b.b.size()) fail(Errc::invalid_spec, "address batch: A and B lists differ in length");
          return static_cast<std::int64_t>(b.a.size());
        } else if constexpr (std::is_same_v<B, BatchOffset>) {
          if (b.a_offsets.size() != b.b_offsets.size())
            fail(Errc::invalid_spec, "offset batch: A and B offset lists differ in length");
          return static_cast<std::int64_t>(b.a_offsets.size());
        } else {
          if (b.count < 0) fail(Errc::invalid_spec, "stride batch: negative count");
          return b.count;
        }
      },
      batch);
}

namespace {

struct Resolved {
  std::vector<const std::byte*> a, b;
};

Resolved resolve(const BrgemmBatch& batch, std::size_t w) {
  Resolved r;
  const std::int64_t n = batch_count(batch);
  r.a.resize(static_cast<std::size_t>(n));
  r.b.resize(static_cast<std::size_t>(n));
  std::visit(
      [&](const auto& b) {
        using B = std::decay_t<decltype(b)>;
        for (std::int64_t i = 0; i < n; ++i) {
          const auto u = static_cast<std::size_t>(i);
          if constexpr (std::is_same_v<B, BatchAddress>) {
            r.a[u] = static_cast<const std::byte*>(b.a[u]);
            r.b[u] = static_cast<const std::byte*>(b.b[u]);
          } else if constexpr (std::is_same_v<B, BatchOffset>) {
            r.a[u] = static_cast<const std::byte*>(b.a_base) + b.a_offsets[u] * static_cast<std::int64_t>(w);
            r.b[u] = static_cast<const std::byte*>(b.b_base) + b.b_offsets[u] * static_cast<std::int64_t>(w);
          } else {
            r.a[u] = static_cast<const std::byte*>(b.a_base) + i * b.stride_a * static_cast<std::int64_t>(w);
            r.b[u] = static_cast<const std::byte*>(b.b_base) + i * b.stride_b * static_cast<std::int64_t>(w);
          }
          if (r.a[u] == nullptr || r.b[u] == nullptr) fail(Errc::invalid_spec, "null block in batch");
        }
      },
      batch);
  return r;
}

std::int64_t a_extent(const GemmSpec& s) {
  if (s.a_layout == Layout::Vnni) {
    const int al = vnni_alpha(s.in_dtype);
    return ((s.K + al - 1) / al) * s.lda * al;
  }
  return s.lda * (s.K - 1) + s.M;
}

void validate(const GemmSpec& s) {
  if (s.M < 1 || s.N < 1 || s.K < 1) fail(Errc::shape_mismatch, "gemm extents must be positive");
  if (s.ldb < s.K || s.ldc < s.M) fail(Errc::shape_mismatch, "gemm leading dimension too small");
  if (s.lda < s.M) fail(Errc::shape_mismatch, "gemm lda smaller than M");
  const DType acc = accumulation_dtype(s.in_dtype);
  const bool out_ok = s.out_dtype == acc || (s.in_dtype == DType::BF16 && s.out_dtype == DType::BF16);
  if (!out_ok) fail(Errc::dtype_mismatch, "gemm output dtype incompatible with the accumulation dtype");
  if (s.a_layout == Layout::Vnni) (void)vnni_alpha(s.in_dtype);
  if (s.compute_path == ComputePath::EmulatedSplit && s.in_dtype != DType::BF16)
    fail(Errc::flag_conflict, "emulated split path is defined for bf16 only");
  const auto& b = s.blocking;
  if (b.m_b < 0 || b.n_b < 0 || b.k_b < 0) fail(Errc::invalid_spec, "negative blocking factor");
}

void check_alias(const GemmSpec& s, const Resolved& r, const void* C) {
  const std::size_t wi = byte_width(s.in_dtype), wo = byte_width(s.out_dtype);
  const auto* c0 = static_cast<const std::byte*>(C);
  const auto* c1 = c0 + static_cast<std::size_t>(s.ldc * (s.N - 1) + s.M) * wo;
  const auto ae = static_cast<std::size_t>(a_extent(s)) * wi;
  const auto be = static_cast<std::size_t>(s.ldb * (s.N - 1) + s.K) * wi;
  for (std::size_t i = 0; i < r.a.size(); ++i) {
    if (r.a[i] < c1 && c0 < r.a[i] + ae) fail(Errc::aliasing, "C overlaps an A block");
    if (r.b[i] < c1 && c0 < r.b[i] + be) fail(Errc::aliasing, "C overlaps a B block");
  }
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline float madd(float acc, float a, float b) { return acc + a * b; }
inline double madd(double acc, double a, double b) { return acc + a * b; }
inline std::int32_t madd(std::int32_t acc, std::int32_t a, std::int32_t b) {
  // int32 accumulation wraps; no saturation before the final store.
  return static_cast<std::int32_t>(static_cast<std::uint32_t>(acc) + static_cast<std::uint32_t>(a * b));
}

template <class Acc>
Acc load_c(const void* C, DType dt, std::int64_t o) {
  switch (dt) {
    case DType::FP64: return static_cast<Acc>(static_cast<const double*>(C)[o]);
    case DType::FP32: return static_cast<Acc>(static_cast<const float*>(C)[o]);
    case DType::BF16: return static_cast<Acc>(bf16_to_fp32(static_cast<const bf16_t*>(C)[o]));
    case DType::INT32: return static_cast<Acc>(static_cast<const std::int32_t*>(C)[o]);
    default: return Acc(0);
  }
}

template <class Acc>
void store_c(void* C, DType dt, std::int64_t o, Acc v) {
  switch (dt) {
    case DType::FP64: static_cast<double*>(C)[o] = static_cast<double>(v); return;
    case DType::FP32: static_cast<float*>(C)[o] = static_cast<float>(v); return;
    case DType::BF16: static_cast<bf16_t*>(C)[o] = fp32_to_bf16(static_cast<float>(v)); return;
    case DType::INT32: static_cast<std::int32_t*>(C)[o] = static_cast<std::int32_t>(v); return;
    default: return;
  }
}

// Widens one element of a 16/8-bit operand.
template <class Acc>
inline Acc widen_native(const std::byte* p, DType dt, std::int64_t o) {
  if (dt == DType::BF16) {
    bf16_t v;
    std::memcpy(&v, p + o * 2, 2);
    return static_cast<Acc>(bf16_to_fp32(v));
  }
  return static_cast<Acc>(reinterpret_cast<const std::int8_t*>(p)[o]);
}

// Emulated split widening: read the aligned 32-bit word holding the element
// pair; the even lane is word << 16, the odd lane is word & 0xFFFF0000.
// `pair_ok` says the partner element of an even lane lies inside the operand.
inline float widen_split(const std::byte* p, std::int64_t o, bool pair_ok) {
  std::uint32_t word;
  if (o % 2 == 0) {
    if (pair_ok) {
      std::memcpy(&word, p + o * 2, 4);
    } else {
      std::uint16_t h;
      std::memcpy(&h, p + o * 2, 2);
      word = h;
    }
    return std::bit_cast<float>(word << 16);
  }
  std::memcpy(&word, p + (o - 1) * 2, 4);
  return std::bit_cast<float>(word & 0xFFFF0000u);
}

struct Operands {
  const GemmSpec& s;
  int alpha = 1;
  std::int64_t a_index(std::int64_t m, std::int64_t k) const {
    if (s.a_layout == Layout::Vnni) return (k / alpha) * s.lda * alpha + m * alpha + k % alpha;
    return m + k * s.lda;
  }
  // Whether element index o+1 is inside A (for even-lane pair reads).
  bool a_pair_ok(std::int64_t m, std::int64_t k) const {
    if (s.a_layout == Layout::Vnni) return true;  // groups are padded to alpha
    return m + 1 < s.M || k + 1 < s.K;
  }
};

template <class Acc, bool Direct>
void run_tiles(const GemmSpec& s, const BlockingParams& bp, const Resolved& r, void* C, int threads) {
  const std::int64_t M = s.M, N = s.N, K = s.K;
  const std::int64_t mb = bp.m_b, nb = bp.n_b, kb = bp.k_b;
  const std::int64_t mt = (M + mb - 1) / mb, nt = (N + nb - 1) / nb;
  const std::int64_t nbatch = static_cast<std::int64_t>(r.a.size());
  const Operands ops{s, s.a_layout == Layout::Vnni ? vnni_alpha(s.in_dtype) : 1};
  const bool split = s.compute_path == ComputePath::EmulatedSplit;
  const int team = threads > 0 ? threads : max_threads();

#pragma omp parallel num_threads(team) if (mt * nt > 1)
  {
    std::vector<Acc> acc(static_cast<std::size_t>(mb * nb)), part(acc.size());
    std::vector<Acc> apanel, bpanel;
    if constexpr (!Direct) {
      apanel.resize(static_cast<std::size_t>(mb * kb));
      bpanel.resize(static_cast<std::size_t>(kb * nb));
    }
#pragma omp for collapse(2) schedule(static)
    for (std::int64_t tn = 0; tn < nt; ++tn)
      for (std::int64_t tm = 0; tm < mt; ++tm) {
        const std::int64_t m0 = tm * mb, n0 = tn * nb;
        const std::int64_t mr = std::min(mb, M - m0), nr = std::min(nb, N - n0);
        for (std::int64_t n = 0; n < nr; ++n)
          for (std::int64_t m = 0; m < mr; ++m) {
            Acc v = Acc(0);
            if (s.beta != 0.0f) {
              v = load_c<Acc>(C, s.out_dtype, (m0 + m) + (n0 + n) * s.ldc);
              if (s.beta != 1.0f) v = static_cast<Acc>(s.beta) * v;
            }
            acc[static_cast<std::size_t>(m + n * mb)] = v;
          }
        for (std::int64_t i = 0; i < nbatch; ++i) {
          const std::byte* A = r.a[static_cast<std::size_t>(i)];
          const std::byte* B = r.b[static_cast<std::size_t>(i)];
          std::fill(part.begin(), part.end(), Acc(0));
          for (std::int64_t k0 = 0; k0 < K; k0 += kb) {
            const std::int64_t kr = std::min(kb, K - k0);
            if constexpr (Direct) {
              const Acc* Ap = reinterpret_cast<const Acc*>(A);
              const Acc* Bp = reinterpret_cast<const Acc*>(B);
              for (std::int64_t n = 0; n < nr; ++n) {
                Acc* c = part.data() + n * mb;
                const Acc* bcol = Bp + (n0 + n) * s.ldb;
                for (std::int64_t k = k0; k < k0 + kr; ++k) {
                  const Acc b = bcol[k];
                  const Acc* a = Ap + m0 + k * s.lda;
                  for (std::int64_t m = 0; m < mr; ++m) c[m] = madd(c[m], a[m], b);
                }
              }
            } else {
              for (std::int64_t k = 0; k < kr; ++k)
                for (std::int64_t m = 0; m < mr; ++m) {
                  const std::int64_t o = ops.a_index(m0 + m, k0 + k);
                  apanel[static_cast<std::size_t>(m + k * mb)] =
                      split ? static_cast<Acc>(widen_split(A, o, ops.a_pair_ok(m0 + m, k0 + k)))
                            : widen_native<Acc>(A, s.in_dtype, o);
                }
              for (std::int64_t n = 0; n < nr; ++n)
                for (std::int64_t k = 0; k < kr; ++k) {
                  const std::int64_t o = (k0 + k) + (n0 + n) * s.ldb;
                  bpanel[static_cast<std::size_t>(k + n * kb)] =
                      split ? static_cast<Acc>(widen_split(B, o, k0 + k + 1 < K || n0 + n + 1 < N))
                            : widen_native<Acc>(B, s.in_dtype, o);
                }
              for (std::int64_t n = 0; n < nr; ++n) {
                Acc* c = part.data() + n * mb;
                for (std::int64_t k = 0; k < kr; ++k) {
                  const Acc b = bpanel[static_cast<std::size_t>(k + n * kb)];
                  const Acc* a = apanel.data() + k * mb;
                  for (std::int64_t m = 0; m < mr; ++m) c[m] = madd(c[m], a[m], b);
                }
              }
            }
          }
          for (std::int64_t n = 0; n < nr; ++n)
            for (std::int64_t m = 0; m < mr; ++m) {
              const auto u = static_cast<std::size_t>(m + n * mb);
              acc[u] = madd(acc[u], part[u], Acc(1));
            }
        }
        for (std::int64_t n = 0; n < nr; ++n)
          for (std::int64_t m = 0; m < mr; ++m)
            store_c<Acc>(C, s.out_dtype, (m0 + m) + (n0 + n) * s.ldc, acc[static_cast<std::size_t>(m + n * mb)]);
      }
  }
}

}  // namespace

void brgemm(const GemmSpec& spec, const BrgemmBatch& batch, void* C, const ExecOptions& opts) {
  validate(spec);
  if (C == nullptr) fail(Errc::invalid_spec, "null C");
  const Resolved r = resolve(batch, byte_width(spec.in_dtype));
  check_alias(spec, r, C);
  const BlockingParams def = default_blocking(spec.in_dtype);
  BlockingParams bp{spec.blocking.m_b ? spec.blocking.m_b : def.m_b, spec.blocking.n_b ? spec.blocking.n_b : def.n_b,
                    spec.blocking.k_b ? spec.blocking.k_b : def.k_b};
  bp.m_b = std::min(bp.m_b, spec.M);
  bp.n_b = std::min(bp.n_b, spec.N);
  bp.k_b = std::min(bp.k_b, spec.K);
  switch (spec.in_dtype) {
    case DType::FP64:
      if (spec.a_layout != Layout::Plain) fail(Errc::unsupported, "fp64 gemm uses plain A");
      return run_tiles<double, true>(spec, bp, r, C, opts.threads);
    case DType::FP32:
      if (spec.a_layout != Layout::Plain) fail(Errc::unsupported, "fp32 gemm uses plain A");
      return run_tiles<float, true>(spec, bp, r, C, opts.threads);
    case DType::BF16:
      return run_tiles<float, false>(spec, bp, r, C, opts.threads);
    case DType::INT8: return run_tiles<std::int32_t, false>(spec, bp, r, C, opts.threads);
    default: fail(Errc::dtype_mismatch, "unsupported gemm input dtype");
  }
}

void gemm(const GemmSpec& spec, const void* A, const void* B, void* C, const ExecOptions& opts) {
  brgemm(spec, BatchAddress{{A}, {B}}, C, opts);
}

Tensor vnni_pack_a(const TensorView& A, int alpha) {
  OpFlags f;
  f.transform = TransformSpec{TransformKind::Vnni, alpha, 0, 0};
  KernelSpec ks{UnaryKind::TRANSFORM, {InputSpec{A.desc}}, f};
  Tensor out(infer_output(ks));
  apply_unary(UnaryKind::TRANSFORM, f, A, out.view());
  return out;
}

Tensor vnni_unpack_a(const TensorView& packed, std::int64_t M, std::int64_t K, int alpha) {
  if (packed.desc.rows != M * alpha || packed.desc.cols != (K + alpha - 1) / alpha)
    fail(Errc::shape_mismatch, "vnni_unpack_a: packed shape does not match M, K, alpha");
  if (vnni_alpha(packed.desc.dtype) != alpha) fail(Errc::flag_conflict, "alpha does not match dtype width");
  Tensor out(M, K, packed.desc.dtype);
  const std::size_t w = byte_width(packed.desc.dtype);
  for (std::int64_t k = 0; k < K; ++k)
    for (std::int64_t m = 0; m < M; ++m)
      std::memcpy(out.view().bytes() + static_cast<std::size_t>(m + k * M) * w,
                  packed.bytes() + static_cast<std::size_t>((k / alpha) * packed.desc.ld + m * alpha + k % alpha) * w,
                  w);
  return out;
}

}  // namespace tpp
