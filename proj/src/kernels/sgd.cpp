#include "tpp/error.hpp"
#include "tpp/kernels.hpp"

namespace tpp::kernels {

namespace {

// W' = W - lr * grad with W = pack(hi, lo).
eq::ExecPlan sgd_plan(const TensorDesc& hi, const TensorDesc& lo, const TensorDesc& grad) {
  eq::TreeBuilder b({InputSpec{TensorDesc::dense(1, 1, DType::FP32)}, InputSpec{grad}, InputSpec{hi}, InputSpec{lo}});
  const int w = b.binary(BinaryKind::PACK, b.leaf(2), b.leaf(3));
  return eq::compile(b.build(b.ternary(TernaryKind::NMULADD, b.leaf(0), b.leaf(1), w)));
}

}  // namespace

void split_sgd_step(SplitTensor& weights, const TensorView& grad, float lr) {
  const TensorDesc& hd = weights.hi.desc();
  if (hd.dtype != DType::BF16 || weights.lo.desc().dtype != DType::INT16 || !hd.same_shape(weights.lo.desc()))
    fail(Errc::dtype_mismatch, "split weights must be a bf16 hi half and an int16 lo half of one shape");
  if (!grad.desc.same_shape(hd) || grad.desc.dtype != DType::FP32)
    fail(Errc::shape_mismatch, "gradient must be fp32 with the weight shape");

  const Tensor lr_t = Tensor::filled(1, 1, lr, DType::FP32);
  Tensor w(hd.rows, hd.cols, DType::FP32);
  const TensorView args[] = {lr_t.view(), grad, weights.hi.view(), weights.lo.view()};
  eq::evaluate(sgd_plan(hd, weights.lo.desc(), grad.desc), eq::Buffered{}, args, w.view());

  TensorView hi = weights.hi.view();
  hi.secondary = Companion::tensor(weights.lo.view().data, weights.lo.desc());
  apply_unary(UnaryKind::UNPACK, {}, w.view(), hi);
}

}  // namespace tpp::kernels
