#include <omp.h>

#include "tpp/error.hpp"
#include "tpp/kernels.hpp"

namespace tpp::kernels {

namespace {

OpFlags reduce_all(ReduceOp op) {
  OpFlags f;
  f.reduce = {ReduceAxis::All, op, false};
  return f;
}

}  // namespace

// X' = exp(X - max(X)), the max broadcast from a 1x1 result.
eq::ExecPlan softmax_max_plan(std::int64_t rows, std::int64_t cols, DType dtype) {
  eq::TreeBuilder b({InputSpec{TensorDesc::dense(rows, cols, dtype)}});
  const int mx = b.unary(UnaryKind::REDUCE, b.leaf(0), reduce_all(ReduceOp::Max));
  const int d = b.binary(BinaryKind::SUB, b.leaf(0), mx);
  return eq::compile(b.build(b.unary(UnaryKind::EXP, d)));
}

// Y = X' * (1 / sum(X')).
eq::ExecPlan softmax_norm_plan(std::int64_t rows, std::int64_t cols, DType dtype) {
  eq::TreeBuilder b({InputSpec{TensorDesc::dense(rows, cols, dtype)}});
  const int s = b.unary(UnaryKind::REDUCE, b.leaf(0), reduce_all(ReduceOp::Sum));
  const int r = b.unary(UnaryKind::RECIPROCAL, s);
  return eq::compile(b.build(b.binary(BinaryKind::MUL, b.leaf(0), r)));
}

void softmax(const SoftmaxSpec& spec, const TensorView& X, const TensorView& Y, const eq::EvalStrategy& strategy) {
  if (spec.S1 <= 0 || spec.S2 <= 0 || spec.S3 <= 0) fail(Errc::invalid_spec, "softmax extents must be positive");
  const std::int64_t rows = spec.S2 * spec.S3;
  for (const auto* v : {&X, &Y})
    if (v->desc.rows != rows || v->desc.cols != spec.S1 || v->desc.bcast != Bcast::None)
      fail(Errc::shape_mismatch, "softmax tensors must be (S2*S3) x S1");
  if (X.desc.dtype != Y.desc.dtype || !is_floating(X.desc.dtype))
    fail(Errc::dtype_mismatch, "softmax needs matching floating dtypes");
  const DType dt = X.desc.dtype;
  const auto p1 = softmax_max_plan(spec.S3, spec.S1, dt);
  const auto p2 = softmax_norm_plan(spec.S3, spec.S1, dt);
  std::exception_ptr err;
#pragma omp parallel if (spec.S2 > 1)
  {
    Tensor xp(spec.S3, spec.S1, dt);
    const eq::EvalOptions opts{false, 1};
#pragma omp for schedule(static)
    for (std::int64_t s2 = 0; s2 < spec.S2; ++s2) {
      if (err) continue;
      try {
        const TensorView x = X.block(s2 * spec.S3, 0, spec.S3, spec.S1);
        const TensorView y = Y.block(s2 * spec.S3, 0, spec.S3, spec.S1);
        eq::evaluate(p1, strategy, std::span<const TensorView>(&x, 1), xp.view(), opts);
        const TensorView xv = xp.view();
        eq::evaluate(p2, strategy, std::span<const TensorView>(&xv, 1), y, opts);
      } catch (...) {
#pragma omp critical
        if (!err) err = std::current_exception();
      }
    }
  }
  if (err) std::rethrow_exception(err);
}

}  // namespace tpp::kernels
