#include "tpp/error.hpp"
#include "tpp/kernels.hpp"

namespace tpp::kernels {

void embedding_gather_reduce(const TensorView& W, const std::vector<std::int64_t>& indices, const TensorView& out) {
  if (indices.empty()) fail(Errc::invalid_spec, "embedding bag needs at least one index");
  const std::int64_t E = W.desc.rows;
  if (out.desc.rows != E || out.desc.cols != 1) fail(Errc::shape_mismatch, "embedding output must be E x 1");
  const auto count = static_cast<std::int64_t>(indices.size());

  InputSpec table{W.desc, CompanionKind::Indices, count};
  eq::TreeBuilder b({table});
  OpFlags g;
  g.index_axis = IndexAxis::Cols;
  OpFlags r;
  r.reduce = {ReduceAxis::Rows, ReduceOp::Sum, false};
  const int gathered = b.unary(UnaryKind::GATHER, b.leaf(0), g);
  const auto plan = eq::compile(b.build(b.unary(UnaryKind::REDUCE, gathered, r)));

  TensorView w = W;
  w.secondary = Companion::indices(indices.data(), count);
  eq::evaluate(plan, eq::Buffered{}, std::span<const TensorView>(&w, 1), out);
}

void binary_reduce_aggregate(const TensorView& t0, const TensorView& t1, const std::vector<std::int64_t>& idx0,
                             const std::vector<std::int64_t>& idx1, BinaryKind binary, ReduceOp reduce,
                             const TensorView& out) {
  if (idx0.size() != idx1.size()) fail(Errc::shape_mismatch, "index lists must have equal length");
  TensorView a = t0, b = t1;
  a.secondary = Companion::indices(idx0.data(), static_cast<std::int64_t>(idx0.size()));
  b.secondary = Companion::indices(idx1.data(), static_cast<std::int64_t>(idx1.size()));
  binary_reduce_cols(binary, reduce, a, b, out);
}

}  // namespace tpp::kernels
