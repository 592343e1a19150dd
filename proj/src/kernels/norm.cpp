#include "tpp/error.hpp"
#include "tpp/kernels.hpp"

namespace tpp::kernels {

namespace {

OpFlags reduce_flags(ReduceAxis axis, bool squared) {
  OpFlags f;
  f.reduce = {axis, ReduceOp::Sum, squared};
  return f;
}

// (X * a + b) * G + B as two chained muladds.
eq::ExecPlan scale_plan(const TensorDesc& x, const TensorDesc& a, const TensorDesc& b, const TensorDesc& g,
                        const TensorDesc& beta) {
  eq::TreeBuilder tb({InputSpec{x}, InputSpec{a}, InputSpec{b}, InputSpec{g}, InputSpec{beta}});
  const int inner = tb.ternary(TernaryKind::MULADD, tb.leaf(0), tb.leaf(1), tb.leaf(2));
  return eq::compile(tb.build(tb.ternary(TernaryKind::MULADD, inner, tb.leaf(3), tb.leaf(4))));
}

void run(const eq::ExecPlan& p, std::initializer_list<TensorView> args, const TensorView& out) {
  eq::evaluate(p, eq::Buffered{}, std::span<const TensorView>(args.begin(), args.size()), out);
}

// A vector of n contiguous elements viewed as 1 x n.
TensorView as_row(const TensorView& v, std::int64_t n, const char* what) {
  const bool col = v.desc.cols == 1 && v.desc.rows == n;
  const bool row = v.desc.rows == 1 && v.desc.cols == n && (n == 1 || v.desc.ld == 1);
  if (v.desc.bcast != Bcast::None || !(col || row))
    fail(Errc::shape_mismatch, std::string(what) + " must hold " + std::to_string(n) + " contiguous elements");
  TensorView r = v;
  r.desc = TensorDesc{1, n, 1, v.desc.dtype, Bcast::None};
  return r;
}

struct Stats {
  Tensor mean, rstd_scale, shift;  // m' = rstd, v' = -mean * rstd
};

// From sums s and squared sums q (1 x n) over `count` elements each.
Stats combine(const TensorView& s, const TensorView& q, double count, float eps, DType dt, Tensor* var_out) {
  const std::int64_t n = s.desc.cols;
  const Tensor cnt = Tensor::filled(1, 1, count, dt);
  const Tensor e = Tensor::filled(1, 1, eps, dt);
  const Tensor zero(1, n, dt);
  Stats st{Tensor(1, n, dt), Tensor(1, n, dt), Tensor(1, n, dt)};
  Tensor ex2(1, n, dt), var(1, n, dt), vpe(1, n, dt);
  apply_binary(BinaryKind::DIV, {}, s, cnt.view().broadcast_to(1, n), st.mean.view());
  apply_binary(BinaryKind::DIV, {}, q, cnt.view().broadcast_to(1, n), ex2.view());
  apply_ternary(TernaryKind::NMULADD, {}, st.mean.view(), st.mean.view(), ex2.view(), var.view());
  apply_binary(BinaryKind::ADD, {}, var.view(), e.view().broadcast_to(1, n), vpe.view());
  apply_unary(UnaryKind::RSQRT, {}, vpe.view(), st.rstd_scale.view());
  apply_ternary(TernaryKind::NMULADD, {}, st.mean.view(), st.rstd_scale.view(), zero.view(), st.shift.view());
  if (var_out) *var_out = std::move(var);
  return st;
}

}  // namespace

eq::ExecPlan layernorm_stats_plan(std::int64_t features, std::int64_t batch, bool squared, DType dtype) {
  eq::TreeBuilder b({InputSpec{TensorDesc::dense(features, batch, dtype)}});
  return eq::compile(b.build(b.unary(UnaryKind::REDUCE, b.leaf(0), reduce_flags(ReduceAxis::Cols, squared))));
}

eq::ExecPlan layernorm_scale_plan(std::int64_t features, std::int64_t batch, DType dtype) {
  return scale_plan(TensorDesc::dense(features, batch, dtype), TensorDesc::dense(1, batch, dtype),
                    TensorDesc::dense(1, batch, dtype), TensorDesc::dense(features, 1, dtype),
                    TensorDesc::dense(features, 1, dtype));
}

LayernormOut layernorm(const TensorView& X, const TensorView& G, const TensorView& B, float eps,
                       const TensorView& out) {
  if (!(eps > 0.0f)) fail(Errc::invalid_spec, "layernorm eps must be positive");
  const std::int64_t f = X.desc.rows, n = X.desc.cols;
  const DType dt = X.desc.dtype;
  if (f < 2) fail(Errc::shape_mismatch, "layernorm needs at least two features");
  if (!is_floating(dt) || dt == DType::BF16) fail(Errc::dtype_mismatch, "layernorm supports fp32 and fp64");
  for (const auto* v : {&G, &B})
    if (v->desc.rows != f || v->desc.cols != 1 || v->desc.dtype != dt)
      fail(Errc::shape_mismatch, "layernorm G and B must be features x 1");
  if (!out.desc.same_shape(X.desc) || out.desc.dtype != dt) fail(Errc::shape_mismatch, "layernorm output shape");

  Tensor m(1, n, dt), v(1, n, dt);
  run(layernorm_stats_plan(f, n, false, dt), {X}, m.view());
  run(layernorm_stats_plan(f, n, true, dt), {X}, v.view());
  LayernormOut res;
  Stats st = combine(m.view(), v.view(), static_cast<double>(f), eps, dt, &res.var);
  run(layernorm_scale_plan(f, n, dt), {X, st.rstd_scale.view(), st.shift.view(), G, B}, out);
  res.mean = std::move(st.mean);
  return res;
}

void norm_scaling(const NormSpec& spec, const TensorView& X, const TensorView& m_prime, const TensorView& v_prime,
                  const TensorView& G, const TensorView& B, const TensorView& Y) {
  const std::int64_t N = spec.N, C = spec.C, HW = spec.H * spec.W;
  if (N <= 0 || C <= 0 || HW <= 0) fail(Errc::invalid_spec, "norm extents must be positive");
  const DType dt = X.desc.dtype;
  if (!is_floating(dt) || dt == DType::BF16) fail(Errc::dtype_mismatch, "norm scaling supports fp32 and fp64");
  for (const auto* v : {&X, &Y})
    if (v->desc.rows * v->desc.cols != N * C * HW || v->desc.ld != v->desc.rows || v->desc.dtype != dt)
      fail(Errc::shape_mismatch, "norm tensors must be dense N*C*H*W");
  const TensorView g = as_row(G, C, "G"), b = as_row(B, C, "B");

  // Sample n is the HW x C matrix at offset n*C*HW; channels are columns.
  const std::size_t w = byte_width(dt);
  auto sample = [&](const TensorView& t, std::int64_t n) {
    return TensorView{TensorDesc::dense(HW, C, dt), t.bytes() + static_cast<std::size_t>(n * C * HW) * w, {}, {}};
  };
  const TensorDesc row = TensorDesc::dense(1, C, dt);
  const auto plan = scale_plan(TensorDesc::dense(HW, C, dt), row, row, row, row);

  if (spec.mode == NormMode::BatchNorm) {
    const TensorView mp = as_row(m_prime, C, "m'"), vp = as_row(v_prime, C, "v'");
    for (std::int64_t n = 0; n < N; ++n) run(plan, {sample(X, n), mp, vp, g, b}, sample(Y, n));
    return;
  }

  const std::int64_t groups = spec.groups;
  if (groups <= 0 || C % groups != 0) fail(Errc::invalid_spec, "group count must divide the channel count");
  if (!(spec.eps > 0.0f)) fail(Errc::invalid_spec, "groupnorm eps must be positive");
  const std::int64_t per = C / groups;
  for (std::int64_t n = 0; n < N; ++n) {
    const TensorView x = sample(X, n);
    Tensor cs(1, C, dt), cq(1, C, dt);
    reduce(x, {ReduceAxis::Cols, ReduceOp::Sum, false}, cs.view());
    reduce(x, {ReduceAxis::Cols, ReduceOp::Sum, true}, cq.view());
    // Channel sums as per x groups: column k holds group k.
    auto grouped = [&](Tensor& t) { return TensorView{TensorDesc::dense(per, groups, dt), t.view().data, {}, {}}; };
    Tensor gs(1, groups, dt), gq(1, groups, dt);
    reduce(grouped(cs), {ReduceAxis::Cols, ReduceOp::Sum, false}, gs.view());
    reduce(grouped(cq), {ReduceAxis::Cols, ReduceOp::Sum, false}, gq.view());
    Stats st = combine(gs.view(), gq.view(), static_cast<double>(per * HW), spec.eps, dt, nullptr);
    Tensor mp(1, C, dt), vp(1, C, dt);
    apply_unary(UnaryKind::IDENTITY, {}, st.rstd_scale.view().broadcast_to(per, groups), grouped(mp));
    apply_unary(UnaryKind::IDENTITY, {}, st.shift.view().broadcast_to(per, groups), grouped(vp));
    run(plan, {x, mp.view(), vp.view(), g, b}, sample(Y, n));
  }
}

}  // namespace tpp::kernels
