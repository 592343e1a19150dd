#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "tpp/tensor.hpp"

namespace tpp {

enum class Layout : std::uint8_t { Plain, Vnni };
enum class ComputePath : std::uint8_t { Native, EmulatedSplit };

struct BlockingParams {
  std::int64_t m_b = 0, n_b = 0, k_b = 0;  // 0 selects the dtype default
  bool operator==(const BlockingParams&) const = default;
};

// FP32 (64, 6, 64); m_b scales by 32 / element width for other dtypes.
BlockingParams default_blocking(DType in_dtype) noexcept;

// All matrices column-major. A is M x K (ld lda), B is K x N (ldb), C is M x N
// (ldc). With a_layout = Vnni, A is stored as [ceil(K/alpha)][lda][alpha] and
// lda counts rows (lda >= M).
struct GemmSpec {
  std::int64_t M = 0, N = 0, K = 0;
  std::int64_t lda = 0, ldb = 0, ldc = 0;
  DType in_dtype = DType::FP32;
  DType out_dtype = DType::FP32;
  float beta = 0.0f;
  Layout a_layout = Layout::Plain;
  ComputePath compute_path = ComputePath::Native;
  BlockingParams blocking{};
  bool operator==(const GemmSpec&) const = default;

  static GemmSpec plain(std::int64_t M, std::int64_t N, std::int64_t K, DType in = DType::FP32);
};

DType accumulation_dtype(DType in_dtype);
int vnni_alpha(DType dtype);  // 2 for 16-bit, 4 for 8-bit

struct BatchAddress {
  std::vector<const void*> a;
  std::vector<const void*> b;
};
struct BatchOffset {
  const void* a_base = nullptr;
  const void* b_base = nullptr;
  std::vector<std::int64_t> a_offsets;  // elements
  std::vector<std::int64_t> b_offsets;
};
struct BatchStride {
  const void* a_base = nullptr;
  const void* b_base = nullptr;
  std::int64_t stride_a = 0;  // elements
  std::int64_t stride_b = 0;
  std::int64_t count = 0;
};
using BrgemmBatch = std::variant<BatchAddress, BatchOffset, BatchStride>;

std::int64_t batch_count(const BrgemmBatch& batch);

struct ExecOptions {
  int threads = 0;  // 0: OpenMP default
};

// C = beta*C + sum_i A_i x B_i. Per output element the accumulator starts at
// beta*C (exactly 0 when beta == 0). For each batch entry in ascending i, a
// partial sum over ascending k starts from 0 and is then added to it.
void brgemm(const GemmSpec& spec, const BrgemmBatch& batch, void* C, const ExecOptions& opts = {});
void gemm(const GemmSpec& spec, const void* A, const void* B, void* C, const ExecOptions& opts = {});

// Elements of A (M x K, ld lda) in VNNI order: (m, k) -> [k/alpha][m][k%alpha],
// tail group zero padded. Output has ceil(K/alpha)*M*alpha elements.
Tensor vnni_pack_a(const TensorView& A, int alpha);
Tensor vnni_unpack_a(const TensorView& packed, std::int64_t M, std::int64_t K, int alpha);

}  // namespace tpp
