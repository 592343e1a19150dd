#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "tpp/equation.hpp"
#include "tpp/gemm.hpp"
#include "tpp/ops.hpp"
#include "tpp/tensor.hpp"

namespace tpp::kernels {

// X and Y hold S2 independent instances; instance s2 is the S3 x S1 column
// major slice starting at element s2*S3 with leading dimension S2*S3, i.e.
// the blocked tensor [S1][S2][S3].
struct SoftmaxSpec {
  std::int64_t S1 = 1, S2 = 1, S3 = 1;
};
void softmax(const SoftmaxSpec& spec, const TensorView& X, const TensorView& Y,
             const eq::EvalStrategy& strategy = eq::Buffered{});

// Equations used by softmax, exposed for inspection.
eq::ExecPlan softmax_max_plan(std::int64_t rows, std::int64_t cols, DType dtype);
eq::ExecPlan softmax_norm_plan(std::int64_t rows, std::int64_t cols, DType dtype);

// X is features x batch (column j is one sample). G and B are features x 1.
// mean and var receive one value per sample (1 x batch).
struct LayernormOut {
  Tensor mean;
  Tensor var;
};
LayernormOut layernorm(const TensorView& X, const TensorView& G, const TensorView& B, float eps,
                       const TensorView& out);
eq::ExecPlan layernorm_stats_plan(std::int64_t features, std::int64_t batch, bool squared, DType dtype);
eq::ExecPlan layernorm_scale_plan(std::int64_t features, std::int64_t batch, DType dtype);

// NCHW tensor stored as N*C*H*W contiguous elements; per-channel vectors of
// length C. For GroupNorm, m' and v' are derived from group statistics of
// each sample and the per-channel ones are ignored.
enum class NormMode : std::uint8_t { BatchNorm, GroupNorm };
struct NormSpec {
  std::int64_t N = 1, C = 1, H = 1, W = 1;
  NormMode mode = NormMode::BatchNorm;
  std::int64_t groups = 1;
  float eps = 1e-5f;
};
// BatchNorm: Y = (m' * X + v') * G + B with m', v' given per channel.
void norm_scaling(const NormSpec& spec, const TensorView& X, const TensorView& m_prime, const TensorView& v_prime,
                  const TensorView& G, const TensorView& B, const TensorView& Y);

// W <- W - lr * grad on the packed FP32 weights; hi/lo updated in place.
void split_sgd_step(SplitTensor& weights, const TensorView& grad, float lr);

// W is E x M column major (column r is embedding row r, E contiguous).
// out (E x 1) = sum over p ascending of W(:, indices[p]).
void embedding_gather_reduce(const TensorView& W, const std::vector<std::int64_t>& indices, const TensorView& out);

struct FcSpec {
  std::int64_t Mb = 1, Nb = 1, Kb = 1;
  std::int64_t bm = 1, bn = 1, bk = 1;
  std::optional<UnaryKind> activation;
};
// A[Mb][Kb][bk][bm], B[Nb][Kb][bn][bk], C[Nb][Mb][bn][bm], FP32.
void fc_forward(const FcSpec& spec, const float* A, const float* B, float* C, const ExecOptions& opts = {});

struct DilatedConvSpec {
  std::int64_t C = 1, K = 1, W = 1, Q = 1, S = 1, d = 1, bq = 1;
};
// I: C x W column major (ld C). Wt: [K][C][S]. O: K x Q column major (ld K).
void dilated_conv1d_forward(const DilatedConvSpec& spec, const float* I, const float* Wt, float* O,
                            const ExecOptions& opts = {});

// out (F x 1) = reduce over p of binary(t0(:, idx0[p]), t1(:, idx1[p])).
void binary_reduce_aggregate(const TensorView& t0, const TensorView& t1, const std::vector<std::int64_t>& idx0,
                             const std::vector<std::int64_t>& idx1, BinaryKind binary, ReduceOp reduce,
                             const TensorView& out);

}  // namespace tpp::kernels
