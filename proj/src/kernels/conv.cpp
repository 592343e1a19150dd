#include <omp.h>

#include <exception>

#include "tpp/error.hpp"
#include "tpp/kernels.hpp"

namespace tpp::kernels {

namespace {

template <class F>
void parallel_for2(std::int64_t n0, std::int64_t n1, int threads, F&& body) {
  std::exception_ptr err;
  const int nt = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for collapse(2) schedule(static) num_threads(nt) if (nt > 1 && n0 * n1 > 1)
  for (std::int64_t a = 0; a < n0; ++a)
    for (std::int64_t b = 0; b < n1; ++b) {
      if (err) continue;
      try {
        body(a, b);
      } catch (...) {
#pragma omp critical
        if (!err) err = std::current_exception();
      }
    }
  if (err) std::rethrow_exception(err);
}

}  // namespace

void fc_forward(const FcSpec& s, const float* A, const float* B, float* C, const ExecOptions& opts) {
  if (s.Mb <= 0 || s.Nb <= 0 || s.Kb <= 0 || s.bm <= 0 || s.bn <= 0 || s.bk <= 0)
    fail(Errc::invalid_spec, "fc extents must be positive");
  if (!A || !B || !C) fail(Errc::invalid_spec, "fc buffers must be non-null");
  GemmSpec g = GemmSpec::plain(s.bm, s.bn, s.bk);
  g.lda = s.bm;
  g.ldb = s.bk;
  g.ldc = s.bm;
  KernelPtr act;
  const TensorDesc blk = TensorDesc::dense(s.bm, s.bn, DType::FP32);
  if (s.activation) act = dispatch(KernelSpec{*s.activation, {InputSpec{blk}}, {}});

  parallel_for2(s.Nb, s.Mb, opts.threads, [&](std::int64_t in, std::int64_t im) {
    BatchStride batch;
    batch.a_base = A + im * s.Kb * s.bk * s.bm;
    batch.b_base = B + in * s.Kb * s.bn * s.bk;
    batch.stride_a = s.bk * s.bm;
    batch.stride_b = s.bn * s.bk;
    batch.count = s.Kb;
    float* c = C + (in * s.Mb + im) * s.bn * s.bm;
    brgemm(g, batch, c, ExecOptions{1});
    if (act) {
      const TensorView v{blk, c, {}, {}};
      (*act)(v, v);
    }
  });
}

void dilated_conv1d_forward(const DilatedConvSpec& s, const float* I, const float* Wt, float* O,
                            const ExecOptions& opts) {
  if (s.C <= 0 || s.K <= 0 || s.W <= 0 || s.Q <= 0 || s.S <= 0 || s.d <= 0 || s.bq <= 0)
    fail(Errc::invalid_spec, "conv extents must be positive");
  if (s.Q + (s.S - 1) * s.d > s.W) fail(Errc::out_of_bounds, "conv output width exceeds the dilated input");
  if (!I || !Wt || !O) fail(Errc::invalid_spec, "conv buffers must be non-null");

  // Wt[k][c][s] is the (C*S) x K matrix with element (c*S + s, k); its
  // transpose WT has tap s at rows [s*K, s*K + K) viewed with ld S*K.
  const TensorView wt{TensorDesc::dense(s.C * s.S, s.K), const_cast<float*>(Wt), {}, {}};
  Tensor WT(s.K, s.C * s.S);
  OpFlags tf;
  tf.transform = {TransformKind::Transpose};
  apply_unary(UnaryKind::TRANSFORM, tf, wt, WT.view());
  const auto* wt_base = static_cast<const float*>(WT.view().data);

  const std::int64_t blocks = (s.Q + s.bq - 1) / s.bq;
  parallel_for2(blocks, 1, opts.threads, [&](std::int64_t blk, std::int64_t) {
    const std::int64_t pos = blk * s.bq;
    GemmSpec g = GemmSpec::plain(s.K, std::min(s.bq, s.Q - pos), s.C);
    g.lda = s.S * s.K;
    g.ldb = s.C;
    g.ldc = s.K;
    BatchAddress batch;
    for (std::int64_t t = 0; t < s.S; ++t) {
      batch.a.push_back(wt_base + t * s.K);
      batch.b.push_back(I + (pos + t * s.d) * s.C);
    }
    brgemm(g, batch, O + pos * s.K, ExecOptions{1});
  });
}

}  // namespace tpp::kernels
