#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <sstream>

#include "tpp/approx.hpp"
#include "tpp/error.hpp"
#include "tpp/gemm.hpp"
#include "tpp/kernels.hpp"
#include "tpp/reference.hpp"
#include "tpp/verify.hpp"

namespace tpp::verify {

namespace {

int uniform(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

bool same_bits(const Tensor& a, const Tensor& b) { return a.desc() == b.desc() && a.bitwise_equal(b); }

// Seed of a sub-suite, so suites stay independent of each other's draws.
Rng rng_for(const Config& cfg, std::uint64_t salt) { return Rng(cfg.seed * 0x9E3779B97F4A7C15ull + salt); }

// Running record of a suite's checks.
struct Tally {
  std::size_t cases = 0;
  std::size_t failures = 0;
  std::string first;
  void check(bool ok, const std::string& what) {
    ++cases;
    if (!ok && failures++ == 0) first = what;
  }
  std::string detail() const {
    std::string d = std::to_string(cases - failures) + "/" + std::to_string(cases) + " cases";
    if (failures) d += "; first failure: " + first;
    return d;
  }
};

Result mismatches(const Tally& t) {
  Result r;
  r.measured = static_cast<double>(t.failures);
  r.budget = 0.0;
  r.metric = "mismatches";
  r.pass = t.failures == 0 && t.cases > 0;
  r.detail = t.detail();
  return r;
}

// ---- 1: worked example ----

Result worked_example(const Config&) {
  std::vector<InputSpec> args(5, InputSpec{TensorDesc::dense(16, 16)});
  const auto plan = eq::compile(eq::parse_equation("tanh(T0) + (T1 matmul T2) / (T3 - T4)", args));
  const int score = plan.tree.node(plan.tree.root).score;
  Result r;
  r.metric = "temp_count";
  r.measured = plan.temp_count;
  r.budget = 2;
  const std::string valid = validate_plan(plan);
  r.pass = score == 2 && plan.temp_count == 2 && plan.tree.internal_count() == 5 && valid.empty();
  r.detail = "root score " + std::to_string(score) + ", temp_count " + std::to_string(plan.temp_count) + ", " +
             std::to_string(plan.tree.internal_count()) + " internal nodes" + (valid.empty() ? "" : "; " + valid);
  return r;
}

// ---- 2: planner minimality ----

Result minimality(const Config& cfg) {
  Rng rng = rng_for(cfg, 2);
  Tally t;
  std::size_t binary_only = 0;
  const int trees = 1000;
  for (int i = 0; i < trees; ++i) {
    const int internal = uniform(rng, 1, std::max(1, cfg.max_nodes));
    const bool ternary = i % 4 != 3;
    eq::EqTree tree = random_tree(rng, internal, ternary);
    const auto plan = eq::compile(tree);
    const int best = brute_force_min_temps(plan.tree);
    const std::string valid = validate_plan(plan);
    t.check(plan.temp_count == best && valid.empty(),
            "tree " + std::to_string(i) + ": temp_count " + std::to_string(plan.temp_count) + " vs minimum " +
                std::to_string(best) + (valid.empty() ? "" : " (" + valid + ")"));
    const int rs = recursive_score(plan.tree, plan.tree.root);
    t.check(rs == plan.tree.node(plan.tree.root).score, "tree " + std::to_string(i) + ": score recursion differs");
    if (!ternary) {
      ++binary_only;
      t.check(rs == best, "tree " + std::to_string(i) + ": unary/binary score differs from minimum");
    }
  }
  Result r = mismatches(t);
  r.detail += "; " + std::to_string(trees) + " trees (" + std::to_string(binary_only) +
              " unary/binary only), max internal " + std::to_string(cfg.max_nodes);
  return r;
}

// ---- 3: fusion fidelity ----

Result fusion_fidelity(const Config& cfg) {
  Rng rng = rng_for(cfg, 3);
  Tally t;
  int fused_cases = 0;
  const eq::EvalOptions opts{true, cfg.threads};
  for (int i = 0; i < 1000; ++i) {
    EquationShape shape;
    shape.dtype = i % 2 ? DType::FP64 : DType::FP32;
    shape.elementwise_only = i % 3 != 0;
    shape.mixed_dtypes = shape.elementwise_only && i % 5 == 0;
    shape.max_internal = 9;
    RandomEquation e = random_equation(rng, shape);
    const auto plan = eq::compile(e.tree);
    const auto args = e.views();
    const Tensor naive = interpret(plan.tree, args);
    const TensorDesc od = plan.tree.node(plan.tree.root).out;
    const std::string tag = "equation " + std::to_string(i) + " (" + std::string(to_string(shape.dtype)) + ")";

    Tensor buffered(od);
    eq::evaluate(plan, eq::Buffered{}, args, buffered.view(), opts);
    t.check(same_bits(buffered, naive), tag + ": buffered differs from naive");

    const std::int64_t tm = uniform(rng, 1, 9), tn = uniform(rng, 1, 9);
    Tensor hybrid(od);
    eq::evaluate(plan, eq::Hybrid{tm, tn}, args, hybrid.view(), opts);
    t.check(same_bits(hybrid, naive), tag + ": hybrid differs from naive");

    if (eq::tile_fusable(plan)) {
      ++fused_cases;
      Tensor fused(od);
      eq::evaluate(plan, eq::TileFused{tm, tn}, args, fused.view(), opts);
      t.check(same_bits(fused, naive), tag + ": tile-fused differs from naive");
    }
  }
  Result r = mismatches(t);
  r.detail += "; " + std::to_string(fused_cases) + " tile-fusable";
  return r;
}

// ---- BRGEMM helpers ----

Tensor random_buffer(Rng& rng, std::int64_t n, DType dt) {
  Tensor b(std::max<std::int64_t>(n, 1), 1, dt);
  const TensorView v = b.view();
  std::normal_distribution<double> nd;
  for (std::int64_t i = 0; i < n; ++i) {
    double x = 0;
    switch (dt) {
      case DType::INT8: x = uniform(rng, -128, 127); break;
      case DType::INT32: x = uniform(rng, -1000, 1000); break;
      default: x = nd(rng); break;
    }
    store_element(v, i, 0, x);
  }
  return b;
}

struct GemmCase {
  GemmSpec spec;
  std::int64_t n = 1;
  std::int64_t a_block = 0, b_block = 0;  // elements per block
  Tensor A, B, C0;
  std::vector<int> perm;  // storage position of batch entry i in the permuted copies
  Tensor Ap, Bp;
};

DType out_for(Rng& rng, DType in) {
  switch (in) {
    case DType::FP64: return DType::FP64;
    case DType::INT8: return DType::INT32;
    case DType::BF16: return uniform(rng, 0, 1) ? DType::BF16 : DType::FP32;
    default: return DType::FP32;
  }
}

GemmCase make_case(Rng& rng, DType in, int max_dim, int max_n) {
  GemmCase g;
  GemmSpec& s = g.spec;
  s = GemmSpec::plain(uniform(rng, 1, max_dim), uniform(rng, 1, max_dim), uniform(rng, 1, max_dim), in);
  s.lda = s.M + uniform(rng, 0, 3);
  s.ldb = s.K + uniform(rng, 0, 3);
  s.ldc = s.M + uniform(rng, 0, 3);
  s.out_dtype = out_for(rng, in);
  const float betas[] = {0.0f, 1.0f, 0.5f, -2.0f};
  s.beta = in == DType::INT8 ? static_cast<float>(uniform(rng, 0, 1)) : betas[uniform(rng, 0, 3)];
  g.n = uniform(rng, 1, max_n);
  g.a_block = s.lda * s.K;
  g.b_block = s.ldb * s.N;
  g.A = random_buffer(rng, g.a_block * g.n, in);
  g.B = random_buffer(rng, g.b_block * g.n, in);
  g.C0 = random_buffer(rng, s.ldc * s.N, s.out_dtype);
  g.perm.resize(static_cast<std::size_t>(g.n));
  for (int i = 0; i < g.n; ++i) g.perm[static_cast<std::size_t>(i)] = i;
  std::shuffle(g.perm.begin(), g.perm.end(), rng);
  g.Ap = Tensor(g.A.desc());
  g.Bp = Tensor(g.B.desc());
  const std::size_t w = byte_width(in);
  for (int i = 0; i < g.n; ++i) {
    const auto p = static_cast<std::size_t>(g.perm[static_cast<std::size_t>(i)]);
    std::memcpy(g.Ap.raw().data() + p * static_cast<std::size_t>(g.a_block) * w,
                g.A.raw().data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(g.a_block) * w,
                static_cast<std::size_t>(g.a_block) * w);
    std::memcpy(g.Bp.raw().data() + p * static_cast<std::size_t>(g.b_block) * w,
                g.B.raw().data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(g.b_block) * w,
                static_cast<std::size_t>(g.b_block) * w);
  }
  return g;
}

BatchStride stride_batch(const GemmCase& g) {
  return BatchStride{g.A.raw().data(), g.B.raw().data(), g.a_block, g.b_block, g.n};
}

BatchAddress address_batch(const GemmCase& g) {
  BatchAddress b;
  const std::size_t w = byte_width(g.spec.in_dtype);
  for (int i = 0; i < g.n; ++i) {
    const auto p = static_cast<std::size_t>(g.perm[static_cast<std::size_t>(i)]);
    b.a.push_back(g.Ap.raw().data() + p * static_cast<std::size_t>(g.a_block) * w);
    b.b.push_back(g.Bp.raw().data() + p * static_cast<std::size_t>(g.b_block) * w);
  }
  return b;
}

BatchOffset offset_batch(const GemmCase& g) {
  BatchOffset b{g.Ap.raw().data(), g.Bp.raw().data(), {}, {}};
  for (int i = 0; i < g.n; ++i) {
    const auto p = static_cast<std::int64_t>(g.perm[static_cast<std::size_t>(i)]);
    b.a_offsets.push_back(p * g.a_block);
    b.b_offsets.push_back(p * g.b_block);
  }
  return b;
}

Tensor run_brgemm(const GemmCase& g, const GemmSpec& s, const BrgemmBatch& batch, int threads) {
  Tensor C = g.C0;
  brgemm(s, batch, C.raw().data(), ExecOptions{threads});
  return C;
}

std::string case_tag(const GemmCase& g, int i) {
  std::ostringstream o;
  o << to_string(g.spec.in_dtype) << " case " << i << " (M=" << g.spec.M << " N=" << g.spec.N << " K=" << g.spec.K
    << " n=" << g.n << " beta=" << g.spec.beta << ")";
  return o.str();
}

const DType kGemmTypes[] = {DType::FP64, DType::FP32, DType::BF16, DType::INT8};

// ---- 4: variant equivalence ----

Result brgemm_variants(const Config& cfg) {
  Rng rng = rng_for(cfg, 4);
  Tally t;
  for (DType dt : kGemmTypes)
    for (int i = 0; i < 200; ++i) {
      const GemmCase g = make_case(rng, dt, 32, 8);
      const std::string tag = case_tag(g, i);
      const Tensor cs = run_brgemm(g, g.spec, stride_batch(g), cfg.threads);
      const Tensor ca = run_brgemm(g, g.spec, address_batch(g), cfg.threads);
      const Tensor co = run_brgemm(g, g.spec, offset_batch(g), cfg.threads);
      t.check(same_bits(cs, ca), tag + ": ADDRESS differs from STRIDE");
      t.check(same_bits(cs, co), tag + ": OFFSET differs from STRIDE");
      Tensor cr = g.C0;
      reference::brgemm(g.spec, stride_batch(g), cr.raw().data());
      t.check(same_bits(cs, cr), tag + ": differs from the serial reference");

      // One batch entry with beta = 1 is a plain accumulate-into-C GEMM.
      GemmSpec s1 = g.spec;
      s1.beta = 1.0f;
      BatchStride one = stride_batch(g);
      one.count = 1;
      const Tensor cb = run_brgemm(g, s1, one, cfg.threads);
      Tensor cg = g.C0;
      gemm(s1, g.A.raw().data(), g.B.raw().data(), cg.raw().data(), ExecOptions{cfg.threads});
      t.check(same_bits(cb, cg), tag + ": n=1, beta=1 differs from gemm");
    }
  return mismatches(t);
}

// ---- 5: tiling invariance ----

Result tiling_invariance(const Config& cfg) {
  Rng rng = rng_for(cfg, 5);
  Tally t;
  const BlockingParams choices[] = {{0, 0, 0}, {1, 1, 1}, {8, 3, 5}, {16, 16, 16}, {5, 7, 2}, {64, 64, 64}, {3, 1, 33}};
  for (DType dt : kGemmTypes)
    for (int i = 0; i < 40; ++i) {
      const GemmCase g = make_case(rng, dt, 48, 4);
      const std::string tag = case_tag(g, i);
      Tensor first;
      bool have = false;
      for (const auto& bp : choices)
        for (int threads : {1, 4}) {
          GemmSpec s = g.spec;
          s.blocking = bp;
          const Tensor c = run_brgemm(g, s, stride_batch(g), threads);
          if (!have) {
            first = c;
            have = true;
            continue;
          }
          t.check(same_bits(first, c), tag + ": blocking (" + std::to_string(bp.m_b) + "," + std::to_string(bp.n_b) +
                                           "," + std::to_string(bp.k_b) + ") threads " + std::to_string(threads) +
                                           " differs");
        }
    }
  Result r = mismatches(t);
  r.detail += "; 7 blockings x threads {1, 4}";
  return r;
}

// ---- 6: BF16 split emulation ----

std::uint16_t special_bf16(Rng& rng) {
  const std::uint16_t pats[] = {0x0001, 0x0040, 0x007F, 0x8001, 0x7FC1, 0xFF81, 0x7F81, 0x7F80,
                                0xFF80, 0x8000, 0x0000, 0x7F7F, 0xFF7F, 0x0080, 0x3F80};
  return pats[uniform(rng, 0, static_cast<int>(std::size(pats)) - 1)];
}

Result bf16_emulation(const Config& cfg) {
  Rng rng = rng_for(cfg, 6);
  Tally t;
  for (int i = 0; i < 200; ++i) {
    GemmCase g = make_case(rng, DType::BF16, 32, 8);
    const double p_special = i < 20 ? 0.0 : (i % 4 == 0 ? 0.5 : 0.05);
    for (Tensor* buf : {&g.A, &g.B}) {
      auto* u = reinterpret_cast<std::uint16_t*>(buf->raw().data());
      const std::size_t n = buf->raw().size() / 2;
      for (std::size_t k = 0; k < n; ++k)
        if (std::bernoulli_distribution(p_special)(rng)) u[k] = special_bf16(rng);
    }
    GemmSpec native = g.spec, split = g.spec;
    native.compute_path = ComputePath::Native;
    split.compute_path = ComputePath::EmulatedSplit;
    const Tensor a = run_brgemm(g, native, stride_batch(g), cfg.threads);
    const Tensor b = run_brgemm(g, split, stride_batch(g), cfg.threads);
    t.check(same_bits(a, b), case_tag(g, i) + ": emulated split differs from native");
  }
  Result r = mismatches(t);
  r.detail += "; subnormal, NaN, Inf and signed-zero operands mixed in";
  return r;
}

// ---- 7: VNNI ----

Result vnni(const Config& cfg) {
  Rng rng = rng_for(cfg, 7);
  Tally t;
  for (DType dt : {DType::BF16, DType::INT8}) {
    const int alpha = vnni_alpha(dt);
    for (int i = 0; i < 100; ++i) {
      const std::int64_t M = uniform(rng, 1, 24), N = uniform(rng, 1, 24), K = uniform(rng, 1, 24);
      const std::string tag = std::string(to_string(dt)) + " case " + std::to_string(i);
      Tensor A = random_buffer(rng, M * K, dt);
      const TensorView av{TensorDesc::dense(M, K, dt), A.raw().data(), {}, {}};
      const Tensor packed = vnni_pack_a(av, alpha);
      const Tensor back = vnni_unpack_a(packed.view(), M, K, alpha);
      t.check(std::memcmp(back.raw().data(), A.raw().data(), static_cast<std::size_t>(M * K) * byte_width(dt)) == 0,
              tag + ": unpack(pack(A)) != A");
      const Tensor again = vnni_pack_a(back.view(), alpha);
      t.check(same_bits(again, packed), tag + ": pack(unpack(P)) != P");

      Tensor B = random_buffer(rng, K * N, dt);
      GemmSpec s = GemmSpec::plain(M, N, K, dt);
      s.out_dtype = dt == DType::INT8 ? DType::INT32 : DType::FP32;
      Tensor c_plain = random_buffer(rng, M * N, s.out_dtype);
      Tensor c_vnni = c_plain;
      s.beta = static_cast<float>(uniform(rng, 0, 1));
      gemm(s, A.raw().data(), B.raw().data(), c_plain.raw().data(), ExecOptions{cfg.threads});
      GemmSpec sv = s;
      sv.a_layout = Layout::Vnni;
      sv.lda = M;
      gemm(sv, packed.raw().data(), B.raw().data(), c_vnni.raw().data(), ExecOptions{cfg.threads});
      t.check(same_bits(c_plain, c_vnni), tag + ": VNNI gemm differs from plain");
    }
  }
  return mismatches(t);
}

// ---- 8: split SGD ----

Result split_sgd(const Config& cfg) {
  Rng rng = rng_for(cfg, 8);
  Tally t;
  const std::int64_t R = 37, C = 23;
  Tensor w(R, C);
  fill_normal(rng, w.view());
  SplitTensor split = split_fp32(w.view());
  std::vector<float> ref(static_cast<std::size_t>(R * C));
  std::memcpy(ref.data(), w.raw().data(), ref.size() * sizeof(float));
  const float lrs[] = {0.01f, 0.1f, 0.5f, 1e-3f};
  int step_fail = -1;
  for (int step = 0; step < 100; ++step) {
    Tensor g(R, C);
    fill_normal(rng, g.view(), 0.0, step % 10 == 9 ? 100.0 : 0.1);
    const float lr = lrs[step % 4];
    kernels::split_sgd_step(split, g.view(), lr);
    const float* gp = reinterpret_cast<const float*>(g.raw().data());
    for (std::size_t k = 0; k < ref.size(); ++k) ref[k] = ref[k] - lr * gp[k];
    const Tensor packed = pack_fp32(split);
    const bool ok = std::memcmp(packed.raw().data(), ref.data(), ref.size() * sizeof(float)) == 0;
    if (!ok && step_fail < 0) step_fail = step;
  }
  t.check(step_fail < 0, "trajectory diverges at step " + std::to_string(step_fail));

  // pack(split(x)) == x for arbitrary bit patterns, NaNs included.
  const std::int64_t n = 1000000;
  Tensor bits(n, 1);
  auto* u = reinterpret_cast<std::uint32_t*>(bits.raw().data());
  std::uniform_int_distribution<std::uint32_t> ud;
  for (std::int64_t k = 0; k < n; ++k) u[k] = ud(rng);
  const Tensor round = pack_fp32(split_fp32(bits.view()));
  t.check(same_bits(round, bits), "pack(split(x)) != x");
  Result r = mismatches(t);
  r.detail += "; 100-step trajectory on 37x23, 10^6 bit patterns";
  return r;
}

// ---- 9: approximations ----

Tensor grid(double a, double b, std::int64_t n, DType dt) {
  Tensor g(n, 1, dt);
  for (std::int64_t i = 0; i < n; ++i) store_element(g.view(), i, 0, a + (b - a) * static_cast<double>(i) / (n - 1));
  return g;
}

struct ErrStats {
  double max_abs = 0, max_rel = 0;
};

template <class F>
ErrStats measure(const Tensor& x, const Tensor& y, F exact) {
  ErrStats e;
  for (std::int64_t i = 0; i < x.rows(); ++i) {
    const double xv = x.at(i, 0), ref = exact(xv), d = std::fabs(y.at(i, 0) - ref);
    e.max_abs = std::max(e.max_abs, d);
    if (ref != 0) e.max_rel = std::max(e.max_rel, d / std::fabs(ref));
  }
  return e;
}

ErrStats unary_error(UnaryKind k, Approx a, double lo, double hi, double (*exact)(double)) {
  constexpr std::int64_t kPoints = 1000000;
  ErrStats worst;
  for (DType dt : {DType::FP32, DType::FP64}) {
    const Tensor x = grid(lo, hi, kPoints, dt);
    Tensor y(kPoints, 1, dt);
    OpFlags f;
    f.approx = a;
    apply_unary(k, f, x.view(), y.view());
    const ErrStats e = measure(x, y, exact);
    worst.max_abs = std::max(worst.max_abs, e.max_abs);
    worst.max_rel = std::max(worst.max_rel, e.max_rel);
  }
  return worst;
}

double sigmoid_exact(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double tanh_exact(double x) { return std::tanh(x); }
double exp_exact(double x) { return std::exp(x); }

// Worst relative gap between the backward primitive and a central difference
// of the forward primitive, FP64, probes on [-3, 3]. The denominator is floored
// at the step so probes next to a root of the derivative stay meaningful.
double backward_gap(UnaryKind fwd, UnaryKind inv) {
  constexpr std::int64_t kProbes = 6001;
  constexpr double h = 1e-3;
  const Tensor x = grid(-3, 3, kProbes, DType::FP64);
  Tensor xp(kProbes, 1, DType::FP64), xm(kProbes, 1, DType::FP64);
  for (std::int64_t i = 0; i < kProbes; ++i) {
    xp.set(i, 0, x.at(i, 0) + h);
    xm.set(i, 0, x.at(i, 0) - h);
  }
  Tensor fp(kProbes, 1, DType::FP64), fm(kProbes, 1, DType::FP64), g(kProbes, 1, DType::FP64);
  apply_unary(fwd, {}, xp.view(), fp.view());
  apply_unary(fwd, {}, xm.view(), fm.view());
  const Tensor dy = Tensor::filled(kProbes, 1, 1.0, DType::FP64);
  TensorView dv = dy.view();
  dv.secondary = Companion::tensor(x.view().data, x.desc());
  apply_unary(inv, {}, dv, g.view());
  double worst = 0;
  for (std::int64_t i = 0; i < kProbes; ++i) {
    const double fd = (fp.at(i, 0) - fm.at(i, 0)) / (2 * h);
    worst = std::max(worst, std::fabs(g.at(i, 0) - fd) / std::max(std::fabs(fd), h));
  }
  return worst;
}

Result approximations(const Config&) {
  struct Item {
    std::string name;
    double measured, budget;
  };
  std::vector<Item> items;
  const ErrStats pade = unary_error(UnaryKind::TANH, Approx::Pade, -5, 5, tanh_exact);
  items.push_back({"tanh pade [-5,5] abs", pade.max_abs, 1e-5});
  const ErrStats mm = unary_error(UnaryKind::TANH, Approx::Minimax, -4, 4, tanh_exact);
  items.push_back({"tanh minimax [-4,4] abs", mm.max_abs, 2e-3});
  const ErrStats ex = unary_error(UnaryKind::EXP, Approx::Taylor, -10, 10, exp_exact);
  items.push_back({"exp [-10,10] rel", ex.max_rel, 3e-4});
  const ErrStats sp = unary_error(UnaryKind::SIGMOID, Approx::Pade, -10, 10, sigmoid_exact);
  items.push_back({"sigmoid pade [-10,10] abs", sp.max_abs, 1.1 * 1e-5});
  const ErrStats sm = unary_error(UnaryKind::SIGMOID, Approx::Minimax, -8, 8, sigmoid_exact);
  items.push_back({"sigmoid minimax [-8,8] abs", sm.max_abs, 1.1 * 2e-3});
  items.push_back({"tanh_inv vs central difference rel", backward_gap(UnaryKind::TANH, UnaryKind::TANH_INV), 1e-3});
  items.push_back(
      {"sigmoid_inv vs central difference rel", backward_gap(UnaryKind::SIGMOID, UnaryKind::SIGMOID_INV), 1e-3});
  items.push_back({"gelu_inv vs central difference rel", backward_gap(UnaryKind::GELU, UnaryKind::GELU_INV), 1e-3});

  Result r;
  r.metric = "worst error / budget";
  r.budget = 1.0;
  r.pass = true;
  std::ostringstream d;
  d.precision(3);
  for (const auto& it : items) {
    const bool ok = it.measured <= it.budget;
    r.pass = r.pass && ok;
    r.measured = std::max(r.measured, it.measured / it.budget);
    d << it.name << " " << it.measured << (ok ? " <= " : " > ") << it.budget << "; ";
  }
  r.detail = d.str();
  r.detail.resize(r.detail.size() - 2);
  return r;
}

// ---- 10: shuffle network ----

Result shuffle_transpose(const Config& cfg) {
  Rng rng = rng_for(cfg, 10);
  Tally t;
  std::uniform_int_distribution<std::uint32_t> ud;
  for (int n : {4, 8, 16})
    for (int i = 0; i < 200; ++i) {
      std::vector<std::uint32_t> in(static_cast<std::size_t>(n * n)), out(in.size()), want(in.size());
      for (auto& v : in) v = ud(rng);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
          want[static_cast<std::size_t>(c + r * n)] = in[static_cast<std::size_t>(r + c * n)];
      shuffle_network_transpose(in.data(), out.data(), n);
      t.check(out == want, std::to_string(n) + "x" + std::to_string(n) + " tile " + std::to_string(i));
    }
  return mismatches(t);
}

// ---- 11: kernel oracles ----

// Two-pass FP64 softmax of one S3 x S1 instance with the same exp approximation.
std::vector<double> softmax_ref(const TensorView& x) {
  double mx = -INFINITY;
  for (std::int64_t j = 0; j < x.desc.cols; ++j)
    for (std::int64_t i = 0; i < x.desc.rows; ++i) mx = std::max(mx, load_element(x, i, j));
  std::vector<double> e;
  double s = 0;
  for (std::int64_t j = 0; j < x.desc.cols; ++j)
    for (std::int64_t i = 0; i < x.desc.rows; ++i) {
      e.push_back(approx::exp_taylor(load_element(x, i, j) - mx));
      s += e.back();
    }
  for (auto& v : e) v /= s;
  return e;
}

struct KernelTally {
  Tally t;
  double softmax_sum = 0, softmax_ref = 0, ln_mean = 0, ln_var = 0, ln_ref = 0, bn_ref = 0;
};

void check_softmax(Rng& rng, KernelTally& k, int i) {
  const kernels::SoftmaxSpec s{uniform(rng, 1, 16), uniform(rng, 1, 4), uniform(rng, 1, 16)};
  const std::int64_t rows = s.S2 * s.S3;
  Tensor X(rows, s.S1), Y(rows, s.S1), Y2(rows, s.S1);
  fill_normal(rng, X.view(), 0.0, 3.0);
  kernels::softmax(s, X.view(), Y.view(), eq::Buffered{});
  kernels::softmax(s, X.view(), Y2.view(), eq::Hybrid{4, 4});
  k.t.check(same_bits(Y, Y2), "softmax " + std::to_string(i) + ": hybrid differs from buffered");
  for (std::int64_t b = 0; b < s.S2; ++b) {
    const TensorView x = X.view().block(b * s.S3, 0, s.S3, s.S1);
    const TensorView y = Y.view().block(b * s.S3, 0, s.S3, s.S1);
    const auto ref = softmax_ref(x);
    double sum = 0;
    std::size_t p = 0;
    for (std::int64_t j = 0; j < s.S1; ++j)
      for (std::int64_t r = 0; r < s.S3; ++r, ++p) {
        const double v = load_element(y, r, j);
        sum += v;
        k.softmax_ref = std::max(k.softmax_ref, std::fabs(v - ref[p]));
      }
    k.softmax_sum = std::max(k.softmax_sum, std::fabs(sum - 1.0));
  }
}

// At least 16 features so the sample variance dwarfs eps; the output variance
// is sigma^2 / (sigma^2 + eps) exactly.
void check_layernorm(Rng& rng, KernelTally& k) {
  const std::int64_t F = uniform(rng, 16, 64), Nb = uniform(rng, 1, 8);
  Tensor X(F, Nb), out(F, Nb), G = Tensor::filled(F, 1, 1.0), B(F, 1);
  fill_normal(rng, X.view(), 0.5, 2.0);
  kernels::layernorm(X.view(), G.view(), B.view(), 1e-5f, out.view());
  for (std::int64_t j = 0; j < Nb; ++j) {
    double m = 0, v = 0;
    for (std::int64_t i = 0; i < F; ++i) m += out.at(i, j);
    m /= static_cast<double>(F);
    for (std::int64_t i = 0; i < F; ++i) v += (out.at(i, j) - m) * (out.at(i, j) - m);
    v /= static_cast<double>(F);
    k.ln_mean = std::max(k.ln_mean, std::fabs(m));
    k.ln_var = std::max(k.ln_var, std::fabs(v - 1.0));
  }
  // Random scale and shift against the direct formula.
  fill_normal(rng, G.view());
  fill_normal(rng, B.view());
  kernels::layernorm(X.view(), G.view(), B.view(), 1e-5f, out.view());
  for (std::int64_t j = 0; j < Nb; ++j) {
    double m = 0, v = 0;
    for (std::int64_t i = 0; i < F; ++i) m += X.at(i, j);
    m /= static_cast<double>(F);
    for (std::int64_t i = 0; i < F; ++i) v += (X.at(i, j) - m) * (X.at(i, j) - m);
    v /= static_cast<double>(F);
    const double rs = 1.0 / std::sqrt(v + 1e-5);
    for (std::int64_t i = 0; i < F; ++i)
      k.ln_ref = std::max(k.ln_ref, std::fabs(out.at(i, j) - ((X.at(i, j) - m) * rs * G.at(i, 0) + B.at(i, 0))));
  }
}

void check_batchnorm(Rng& rng, KernelTally& k) {
  kernels::NormSpec s;
  s.N = 2, s.C = 4, s.H = 3, s.W = 3;
  const std::int64_t HW = s.H * s.W, total = s.N * s.C * HW;
  Tensor X(total, 1), Y(total, 1), mp(s.C, 1), vp(s.C, 1), G(s.C, 1), B(s.C, 1);
  fill_normal(rng, X.view(), 1.0, 2.0);
  fill_normal(rng, G.view());
  fill_normal(rng, B.view());
  // Batch statistics per channel; m' = rstd, v' = -mean * rstd.
  for (std::int64_t c = 0; c < s.C; ++c) {
    double m = 0, v = 0;
    for (std::int64_t n = 0; n < s.N; ++n)
      for (std::int64_t p = 0; p < HW; ++p) m += X.at(n * s.C * HW + c * HW + p, 0);
    m /= static_cast<double>(s.N * HW);
    for (std::int64_t n = 0; n < s.N; ++n)
      for (std::int64_t p = 0; p < HW; ++p) {
        const double d = X.at(n * s.C * HW + c * HW + p, 0) - m;
        v += d * d;
      }
    v /= static_cast<double>(s.N * HW);
    const double rs = 1.0 / std::sqrt(v + 1e-5);
    mp.set(c, 0, rs);
    vp.set(c, 0, -m * rs);
  }
  kernels::norm_scaling(s, X.view(), mp.view(), vp.view(), G.view(), B.view(), Y.view());
  for (std::int64_t n = 0; n < s.N; ++n)
    for (std::int64_t c = 0; c < s.C; ++c)
      for (std::int64_t p = 0; p < HW; ++p) {
        const std::int64_t o = n * s.C * HW + c * HW + p;
        const double want = (mp.at(c, 0) * X.at(o, 0) + vp.at(c, 0)) * G.at(c, 0) + B.at(c, 0);
        k.bn_ref = std::max(k.bn_ref, std::fabs(Y.at(o, 0) - want));
      }
}

void check_embedding(Rng& rng, KernelTally& k, int i) {
  const std::int64_t E = uniform(rng, 1, 32), M = uniform(rng, 1, 50), n = uniform(rng, 1, 20);
  Tensor W(E, M), out(E, 1);
  fill_normal(rng, W.view());
  std::vector<std::int64_t> idx;
  for (std::int64_t p = 0; p < n; ++p) idx.push_back(uniform(rng, 0, static_cast<int>(M) - 1));
  kernels::embedding_gather_reduce(W.view(), idx, out.view());
  Tensor want(E, 1);
  for (std::int64_t r = 0; r < E; ++r) {
    float acc = 0.0f;
    for (auto c : idx) acc += static_cast<float>(W.at(r, c));
    want.set(r, 0, acc);
  }
  k.t.check(same_bits(out, want), "embedding " + std::to_string(i));
}

void check_binary_reduce(Rng& rng, KernelTally& k, int i) {
  const std::int64_t F = uniform(rng, 1, 24), M0 = uniform(rng, 1, 30), M1 = uniform(rng, 1, 30),
                     n = uniform(rng, 1, 16);
  Tensor t0(F, M0), t1(F, M1), out(F, 1);
  fill_normal(rng, t0.view());
  fill_normal(rng, t1.view());
  std::vector<std::int64_t> i0, i1;
  for (std::int64_t p = 0; p < n; ++p) {
    i0.push_back(uniform(rng, 0, static_cast<int>(M0) - 1));
    i1.push_back(uniform(rng, 0, static_cast<int>(M1) - 1));
  }
  const BinaryKind bins[] = {BinaryKind::ADD, BinaryKind::SUB, BinaryKind::MUL, BinaryKind::MAX, BinaryKind::MIN};
  const ReduceOp reds[] = {ReduceOp::Sum, ReduceOp::Max, ReduceOp::Min};
  const BinaryKind bk = bins[uniform(rng, 0, 4)];
  const ReduceOp ro = reds[uniform(rng, 0, 2)];
  kernels::binary_reduce_aggregate(t0.view(), t1.view(), i0, i1, bk, ro, out.view());
  // Materialize every binary column, then reduce in index order.
  Tensor mat(F, n);
  for (std::int64_t p = 0; p < n; ++p)
    for (std::int64_t r = 0; r < F; ++r) {
      const float a = static_cast<float>(t0.at(r, i0[static_cast<std::size_t>(p)]));
      const float b = static_cast<float>(t1.at(r, i1[static_cast<std::size_t>(p)]));
      float v = 0;
      switch (bk) {
        case BinaryKind::ADD: v = a + b; break;
        case BinaryKind::SUB: v = a - b; break;
        case BinaryKind::MUL: v = a * b; break;
        case BinaryKind::MAX: v = a > b ? a : b; break;
        default: v = a < b ? a : b; break;
      }
      mat.set(r, p, v);
    }
  Tensor want(F, 1);
  for (std::int64_t r = 0; r < F; ++r) {
    float acc = ro == ReduceOp::Sum ? 0.0f : (ro == ReduceOp::Max ? -INFINITY : INFINITY);
    for (std::int64_t p = 0; p < n; ++p) {
      const float v = static_cast<float>(mat.at(r, p));
      if (ro == ReduceOp::Sum) acc = acc + v;
      else if (ro == ReduceOp::Max) acc = v > acc ? v : acc;
      else acc = v < acc ? v : acc;
    }
    want.set(r, 0, acc);
  }
  k.t.check(same_bits(out, want), "binary-reduce " + std::to_string(i));
}

float activation_ref(UnaryKind k, float x) {
  switch (k) {
    case UnaryKind::RELU: return x > 0.0f ? x : 0.0f;
    case UnaryKind::TANH: return approx::tanh_pade78(x);
    case UnaryKind::GELU: return approx::gelu_exact(x);
    default: return (approx::tanh_pade78(x * 0.5f) + 1.0f) * 0.5f;  // sigmoid
  }
}

void check_fc(Rng& rng, KernelTally& k, int i, int threads) {
  kernels::FcSpec s;
  s.Mb = uniform(rng, 1, 3), s.Nb = uniform(rng, 1, 3), s.Kb = uniform(rng, 1, 3);
  s.bm = uniform(rng, 1, 8), s.bn = uniform(rng, 1, 8), s.bk = uniform(rng, 1, 8);
  const UnaryKind acts[] = {UnaryKind::RELU, UnaryKind::TANH, UnaryKind::GELU, UnaryKind::SIGMOID};
  if (i % 5) s.activation = acts[uniform(rng, 0, 3)];
  std::normal_distribution<float> nd;
  std::vector<float> A(static_cast<std::size_t>(s.Mb * s.Kb * s.bk * s.bm)), B(static_cast<std::size_t>(s.Nb * s.Kb * s.bn * s.bk));
  std::vector<float> C(static_cast<std::size_t>(s.Nb * s.Mb * s.bn * s.bm), NAN), R(C.size());
  for (auto& v : A) v = nd(rng);
  for (auto& v : B) v = nd(rng);
  kernels::fc_forward(s, A.data(), B.data(), C.data(), ExecOptions{threads});
  reference::fc_forward(s.Mb, s.Nb, s.Kb, s.bm, s.bn, s.bk, A.data(), B.data(), R.data());
  if (s.activation)
    for (auto& v : R) v = activation_ref(*s.activation, v);
  k.t.check(std::memcmp(C.data(), R.data(), C.size() * sizeof(float)) == 0, "fc " + std::to_string(i));
}

bool check_conv_case(Rng& rng, const kernels::DilatedConvSpec& s, int threads) {
  std::normal_distribution<float> nd;
  std::vector<float> I(static_cast<std::size_t>(s.C * s.W)), Wt(static_cast<std::size_t>(s.K * s.C * s.S));
  std::vector<float> O(static_cast<std::size_t>(s.K * s.Q), NAN), R(O.size());
  for (auto& v : I) v = nd(rng);
  for (auto& v : Wt) v = nd(rng);
  kernels::dilated_conv1d_forward(s, I.data(), Wt.data(), O.data(), ExecOptions{threads});
  for (std::int64_t q = 0; q < s.Q; ++q)
    for (std::int64_t kk = 0; kk < s.K; ++kk) {
      float acc = 0.0f;
      for (std::int64_t t = 0; t < s.S; ++t) {
        float tap = 0.0f;
        for (std::int64_t c = 0; c < s.C; ++c)
          tap += Wt[static_cast<std::size_t>((kk * s.C + c) * s.S + t)] * I[static_cast<std::size_t>((q + t * s.d) * s.C + c)];
        acc += tap;
      }
      R[static_cast<std::size_t>(q * s.K + kk)] = acc;
    }
  return std::memcmp(O.data(), R.data(), O.size() * sizeof(float)) == 0;
}

void check_conv(Rng& rng, KernelTally& k, int i, int threads) {
  kernels::DilatedConvSpec s;
  if (i == 0) {
    s = {3, 2, 28, 20, 5, 2, 8};
  } else {
    s.C = uniform(rng, 1, 6), s.K = uniform(rng, 1, 6), s.S = uniform(rng, 1, 5), s.d = uniform(rng, 1, 3);
    s.Q = uniform(rng, 1, 20), s.bq = uniform(rng, 1, 8);
    s.W = s.Q + (s.S - 1) * s.d + uniform(rng, 0, 3);
  }
  k.t.check(check_conv_case(rng, s, threads), "dilated conv " + std::to_string(i));
}

Result kernel_oracles(const Config& cfg) {
  Rng rng = rng_for(cfg, 11);
  KernelTally k;
  for (int i = 0; i < 200; ++i) check_softmax(rng, k, i);
  for (int i = 0; i < 200; ++i) check_layernorm(rng, k);
  for (int i = 0; i < 20; ++i) check_batchnorm(rng, k);
  for (int i = 0; i < 100; ++i) {
    check_embedding(rng, k, i);
    check_binary_reduce(rng, k, i);
    check_fc(rng, k, i, cfg.threads);
    check_conv(rng, k, i, cfg.threads);
  }
  struct Item {
    const char* name;
    double measured, budget;
  };
  const Item items[] = {{"softmax |sum-1|", k.softmax_sum, 1e-6},
                        {"softmax vs fp64", k.softmax_ref, 1e-5},
                        {"layernorm |mean|", k.ln_mean, 1e-6},
                        {"layernorm |var-1|", k.ln_var, 1e-4},
                        {"layernorm vs fp64", k.ln_ref, 1e-5},
                        {"batchnorm vs fp64", k.bn_ref, 1e-5}};
  Result r;
  r.metric = "worst error / budget";
  r.budget = 1.0;
  r.pass = k.t.failures == 0;
  std::ostringstream d;
  d.precision(3);
  for (const auto& it : items) {
    const bool ok = it.measured <= it.budget;
    r.pass = r.pass && ok;
    r.measured = std::max(r.measured, it.measured / it.budget);
    d << it.name << " " << it.measured << (ok ? " <= " : " > ") << it.budget << "; ";
  }
  d << "bitwise oracles " << k.t.detail();
  r.detail = d.str();
  return r;
}

// ---- 12: fusion benefit ----

Result fusion_benefit(const Config&) {
  struct Named {
    std::string name;
    eq::ExecPlan plan;
  };
  std::vector<Named> plans;
  for (auto [r, c] : {std::pair<std::int64_t, std::int64_t>{16, 16}, {64, 32}, {1, 1}, {128, 8}}) {
    const std::string shape = std::to_string(r) + "x" + std::to_string(c);
    plans.push_back({"softmax max " + shape, kernels::softmax_max_plan(r, c, DType::FP32)});
    plans.push_back({"softmax norm " + shape, kernels::softmax_norm_plan(r, c, DType::FP32)});
    plans.push_back({"layernorm stats " + shape, kernels::layernorm_stats_plan(r, c, false, DType::FP32)});
    plans.push_back({"layernorm sumsq " + shape, kernels::layernorm_stats_plan(r, c, true, DType::FP32)});
    if (r > 1) plans.push_back({"layernorm scale " + shape, kernels::layernorm_scale_plan(r, c, DType::FP32)});
  }
  const std::vector<InputSpec> x{InputSpec{TensorDesc::dense(32, 32)}};
  plans.push_back({"softmax text", eq::compile(eq::parse_equation(
                                       "exp(T0 - reduce_max_all(T0)) * reciprocal(reduce_sum_all(T0))", x))});
  Result r;
  r.metric = "worst temp_bytes / naive_bytes";
  r.budget = 1.0;
  r.pass = true;
  std::ostringstream d;
  int strict = 0;
  for (const auto& p : plans) {
    const bool recycles = p.plan.temp_count < p.plan.tree.internal_count();
    const bool ok = recycles ? p.plan.temp_bytes < p.plan.naive_bytes : p.plan.temp_bytes <= p.plan.naive_bytes;
    strict += recycles;
    r.measured = std::max(r.measured, static_cast<double>(p.plan.temp_bytes) / static_cast<double>(p.plan.naive_bytes));
    if (!ok) {
      r.pass = false;
      d << p.name << ": temp_bytes " << p.plan.temp_bytes << " vs naive " << p.plan.naive_bytes << "; ";
    }
  }
  d << plans.size() << " plans, " << strict << " with recycling (strict)";
  r.detail = d.str();
  return r;
}

// ---- 13: dropout ----

Result dropout(const Config& cfg) {
  Result r;
  r.metric = "worst |keep - n(1-p)| / sigma";
  r.budget = 3.0;
  r.pass = true;
  std::ostringstream d;
  d.precision(3);
  const std::int64_t R = 1000, C = 1000;
  const Tensor x = Tensor::filled(R, C, 1.0);
  for (float p : {0.1f, 0.5f, 0.9f}) {
    TensorView in = x.view();
    in.tertiary.seed = cfg.seed * 7919 + static_cast<std::uint64_t>(p * 100);
    OpFlags f;
    f.dropout_p = p;
    Tensor y(R, C), y2(R, C), back(R, C);
    Bitmask m(R, C), m2(R, C);
    TensorView yv = y.view();
    yv.secondary = m.companion();
    apply_unary(UnaryKind::DROPOUT, f, in, yv);
    TensorView y2v = y2.view();
    y2v.secondary = m2.companion();
    apply_unary(UnaryKind::DROPOUT, f, in, y2v);
    // Backward with dy = 1 under the forward mask.
    TensorView dy = x.view();
    dy.secondary = m.companion();
    apply_unary(UnaryKind::DROPOUT_INV, f, dy, back.view());

    const double n = static_cast<double>(R * C);
    const double keep = static_cast<double>(m.popcount());
    const double sigma = std::sqrt(n * p * (1.0 - p));
    const double z = std::fabs(keep - n * (1.0 - p)) / sigma;
    bool masks_ok = m == m2 && same_bits(y, y2);
    const float scale = 1.0f / (1.0f - p);
    std::int64_t bad = 0;
    const float* yp = reinterpret_cast<const float*>(y.raw().data());
    const float* bp = reinterpret_cast<const float*>(back.raw().data());
    for (std::int64_t j = 0; j < C; ++j)
      for (std::int64_t i = 0; i < R; ++i) {
        const bool kept = m.get(i, j);
        const float want = kept ? scale : 0.0f;
        bad += yp[i + j * R] != want || bp[i + j * R] != want || ((bp[i + j * R] != 0.0f) != kept);
      }
    masks_ok = masks_ok && bad == 0;
    r.pass = r.pass && z <= 3.0 && masks_ok;
    r.measured = std::max(r.measured, z);
    d << "p=" << p << " keep " << keep / n << " z " << z << (masks_ok ? "" : " MASK MISMATCH") << "; ";
  }
  r.detail = d.str();
  r.detail.resize(r.detail.size() - 2);
  return r;
}

// ---- extra module checks ----

Result bf16_rounding(const Config& cfg) {
  Rng rng = rng_for(cfg, 100);
  Tally t;
  // Round-half-even on the dropped 16 bits, checked against a long-hand rule.
  std::uniform_int_distribution<std::uint32_t> ud;
  for (int i = 0; i < 200000; ++i) {
    std::uint32_t b = ud(rng);
    if (i % 4 == 0) b = (b & 0xFFFF0000u) | 0x8000u;  // exact ties
    const float f = std::bit_cast<float>(b);
    const bf16_t got = fp32_to_bf16(f);
    if (std::isnan(f)) {
      t.check(std::isnan(bf16_to_fp32(got)) && (got & 0x8000) == ((b >> 16) & 0x8000), "NaN not preserved");
      continue;
    }
    const std::uint32_t hi = b >> 16, rest = b & 0xFFFFu;
    std::uint32_t want = hi;
    if (rest > 0x8000u || (rest == 0x8000u && (hi & 1u))) ++want;
    t.check(got == static_cast<bf16_t>(want), "rounding of bits " + std::to_string(b));
  }
  return mismatches(t);
}

Result plan_roundtrip(const Config& cfg) {
  Rng rng = rng_for(cfg, 101);
  Tally t;
  for (int i = 0; i < 300; ++i) {
    EquationShape shape;
    shape.elementwise_only = i % 2 == 0;
    RandomEquation e = random_equation(rng, shape);
    const auto plan = eq::compile(e.tree);
    const std::string valid = validate_plan(plan);
    t.check(valid.empty(), "equation " + std::to_string(i) + ": " + valid);
    const auto back = eq::import_plan_json(eq::export_plan(plan, eq::PlanFormat::Json));
    t.check(back == plan, "equation " + std::to_string(i) + ": JSON round trip differs");
  }
  return mismatches(t);
}

Result dispatch_cache(const Config&) {
  Tally t;
  KernelSpec a{UnaryKind::TANH, {InputSpec{TensorDesc::dense(8, 4)}}, {}};
  KernelSpec b = a;
  t.check(dispatch(a) == dispatch(b), "equal specs dispatch to different kernels");
  b.flags.approx = Approx::Minimax;
  t.check(dispatch(a) != dispatch(b), "distinct specs share a kernel");
  t.check(spec_key(a) == spec_key(KernelSpec(a)), "spec key not deterministic");
  return mismatches(t);
}

Result thread_independence(const Config& cfg) {
  Rng rng = rng_for(cfg, 102);
  Tally t;
  Tensor x(300, 257);
  fill_normal(rng, x.view());
  for (int i = 0; i < 20; ++i) {
    EquationShape shape;
    shape.max_dim = 64;
    RandomEquation e = random_equation(rng, shape);
    const auto plan = eq::compile(e.tree);
    const TensorDesc od = plan.tree.node(plan.tree.root).out;
    Tensor a(od), b(od);
    eq::evaluate(plan, eq::Hybrid{}, e.views(), a.view(), {false, 1});
    eq::evaluate(plan, eq::Hybrid{}, e.views(), b.view(), {false, 4});
    t.check(same_bits(a, b), "equation " + std::to_string(i) + " differs across thread counts");
  }
  TensorView in = x.view();
  in.tertiary.seed = cfg.seed;
  OpFlags f;
  f.dropout_p = 0.3f;
  Tensor y1(300, 257), y2(300, 257);
  apply_unary(UnaryKind::DROPOUT, f, in, y1.view());
  apply_unary(UnaryKind::DROPOUT, f, in, y2.view());
  t.check(same_bits(y1, y2), "dropout not reproducible");
  return mismatches(t);
}

}  // namespace

const std::vector<Suite>& suites() {
  static const std::vector<Suite> s = {
      {"equation-worked-example", 1, "planner on tanh(T0) + (T1 matmul T2) / (T3 - T4)", 1, worked_example},
      {"equation-minimality", 2, "temp_count equals brute-force minimum on random trees", 60, minimality},
      {"fusion-fidelity", 3, "buffered, tile-fused, hybrid and naive evaluation agree bitwise", 60, fusion_fidelity},
      {"brgemm-variants", 4, "ADDRESS, OFFSET and STRIDE batches agree bitwise", 30, brgemm_variants},
      {"brgemm-tiling", 5, "output independent of blocking and thread count", 30, tiling_invariance},
      {"bf16-emulation", 6, "split-emulated bf16 equals native bf16 bitwise", 30, bf16_emulation},
      {"vnni", 7, "VNNI pack/unpack bijection and packed-A gemm", 10, vnni},
      {"split-sgd", 8, "split-SGD trajectory and pack/split identity", 10, split_sgd},
      {"approx-budgets", 9, "approximation error budgets", 30, approximations},
      {"shuffle-transpose", 10, "shuffle-network transpose equals direct transpose", 1, shuffle_transpose},
      {"kernel-oracles", 11, "composite kernels against reference oracles", 60, kernel_oracles},
      {"fusion-benefit", 12, "planner temp_bytes against naive materialization", 1, fusion_benefit},
      {"dropout-stats", 13, "dropout keep rate and mask reproducibility", 10, dropout},
      {"bf16-rounding", 0, "fp32 to bf16 round-half-even and NaN handling", 10, bf16_rounding},
      {"plan-roundtrip", 0, "plan replay validity and JSON round trip", 30, plan_roundtrip},
      {"dispatch-cache", 0, "equal kernel specs share one dispatched kernel", 1, dispatch_cache},
      {"thread-independence", 0, "results independent of thread count", 30, thread_independence},
  };
  return s;
}

std::vector<Result> run(const Config& cfg, const std::vector<std::string>& only) {
  for (const auto& name : only) {
    const auto& all = suites();
    if (std::none_of(all.begin(), all.end(), [&](const Suite& s) { return s.name == name; }))
      fail(Errc::invalid_spec, "unknown suite '" + name + "'");
  }
  std::vector<Result> out;
  for (const auto& s : suites()) {
    if (!only.empty() && std::find(only.begin(), only.end(), s.name) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Result r;
    try {
      r = s.run(cfg);
    } catch (const std::exception& e) {
      r = Result{};
      r.pass = false;
      r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.name = s.name;
    r.criterion = s.criterion;
    r.time_limit = s.time_limit;
    if (r.seconds > s.time_limit) {
      r.pass = false;
      r.detail += "; exceeded time limit";
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace tpp::verify
