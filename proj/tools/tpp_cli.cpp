#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tpp/approx.hpp"
#include "tpp/equation.hpp"
#include "tpp/error.hpp"
#include "tpp/gemm.hpp"
#include "tpp/kernels.hpp"
#include "tpp/reference.hpp"
#include "tpp/testing.hpp"
#include "tpp/verify.hpp"

namespace {

using nlohmann::ordered_json;

enum class Format { Text, Json, Csv };

struct Common {
  std::uint64_t seed = 1;
  int threads = 0;
  Format format = Format::Text;
  std::string out;
};

// Thrown for bad option values that CLI11 cannot check on its own.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Seed for every random input")->capture_default_str();
  cmd->add_option("--threads", c.threads, "Worker threads, 0 for the OpenMP default")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  const std::map<std::string, Format> formats{{"text", Format::Text}, {"json", Format::Json}, {"csv", Format::Csv}};
  cmd->add_option("--format", c.format, "Report format: text, json or csv")
      ->transform(CLI::CheckedTransformer(formats, CLI::ignore_case));
  cmd->add_option("--out", c.out, "Write the report to a file instead of stdout");
}

void emit(const Common& c, const std::string& text) {
  if (c.out.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream f(c.out);
  if (!f) throw UsageError("cannot open '" + c.out + "' for writing");
  f << text;
  if (!text.empty() && text.back() != '\n') f << '\n';
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string r = "\"";
  for (char ch : s) r += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return r + "\"";
}

std::uint64_t fnv1a(const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 1469598103934665603ull;
  for (std::size_t i = 0; i < n; ++i) h = (h ^ p[i]) * 1099511628211ull;
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---- verify ----

struct VerifyArgs {
  std::vector<std::string> only;
  int max_nodes = 9;
  std::string fault;
  bool list = false;
};

int cmd_verify(const Common& c, const VerifyArgs& a) {
  if (a.list) {
    for (const auto& s : tpp::verify::suites())
      std::cout << s.name << (s.criterion ? "  [" + std::to_string(s.criterion) + "]" : std::string()) << "  "
                << s.description << '\n';
    return 0;
  }
  for (const auto& name : a.only) {
    const auto& all = tpp::verify::suites();
    if (std::none_of(all.begin(), all.end(), [&](const auto& s) { return s.name == name; }))
      throw UsageError("unknown suite '" + name + "' (see verify --list)");
  }
  if (a.fault == "reverse-reduce") tpp::testing::set_reverse_reduce(true);

  tpp::verify::Config cfg;
  cfg.seed = c.seed;
  cfg.threads = c.threads;
  cfg.max_nodes = a.max_nodes;
  const auto results = tpp::verify::run(cfg, a.only);
  switch (c.format) {
    case Format::Text: emit(c, tpp::verify::format_text(results)); break;
    case Format::Json: emit(c, tpp::verify::format_json(results, cfg)); break;
    case Format::Csv: emit(c, tpp::verify::format_csv(results)); break;
  }
  return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.pass; }) ? 0 : 1;
}

// ---- plan ----

struct PlanArgs {
  std::string equation;
  std::string shape = "32x32";
  std::vector<std::string> arg_shapes;  // "slot=RxC"
  std::string dtype = "fp32";
  bool dot = false;
};

std::pair<std::int64_t, std::int64_t> parse_extent(const std::string& s) {
  const auto x = s.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    std::size_t p1 = 0, p2 = 0;
    const long long r = std::stoll(s.substr(0, x), &p1), col = std::stoll(s.substr(x + 1), &p2);
    if (p1 != x || p2 != s.size() - x - 1 || r <= 0 || col <= 0) throw std::invalid_argument(s);
    return {r, col};
  } catch (const std::logic_error&) {
    throw UsageError("bad shape '" + s + "', expected ROWSxCOLS");
  }
}

int cmd_plan(const Common& c, const PlanArgs& a) {
  const auto dt = tpp::parse_dtype(a.dtype);
  if (!dt) throw UsageError("unknown dtype '" + a.dtype + "'");
  const int nargs = tpp::eq::count_arguments(a.equation);
  const auto [r, col] = parse_extent(a.shape);
  std::vector<tpp::InputSpec> args(static_cast<std::size_t>(std::max(nargs, 0)),
                                   tpp::InputSpec{tpp::TensorDesc::dense(r, col, *dt)});
  for (const auto& s : a.arg_shapes) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw UsageError("bad --arg '" + s + "', expected SLOT=ROWSxCOLS");
    std::string slot = s.substr(0, eq);
    if (!slot.empty() && slot[0] == 'T') slot.erase(0, 1);
    int k = -1;
    try {
      k = std::stoi(slot);
    } catch (const std::logic_error&) {
    }
    if (k < 0 || k >= nargs) throw UsageError("--arg slot out of range in '" + s + "'");
    const auto [rr, cc] = parse_extent(s.substr(eq + 1));
    args[static_cast<std::size_t>(k)] = tpp::InputSpec{tpp::TensorDesc::dense(rr, cc, *dt)};
  }

  const tpp::eq::ExecPlan plan = tpp::eq::compile(tpp::eq::parse_equation(a.equation, args));
  if (a.dot) {
    emit(c, tpp::eq::export_plan(plan, tpp::eq::PlanFormat::Dot));
    return 0;
  }
  const auto& tree = plan.tree;
  std::ostringstream o;
  switch (c.format) {
    case Format::Json: emit(c, tpp::eq::export_plan(plan, tpp::eq::PlanFormat::Json)); return 0;
    case Format::Csv:
      o << "timestamp,node,op,score,temp_id,rows,cols,recycled\n";
      for (const auto& s : plan.steps) {
        const auto& n = tree.node(s.node);
        std::string rec;
        for (int t : s.recycled) rec += (rec.empty() ? "" : " ") + std::to_string(t);
        o << s.timestamp << ',' << s.node << ',' << csv_field(tpp::eq::op_label(s.op)) << ',' << n.score << ','
          << s.temp_id << ',' << n.out.rows << ',' << n.out.cols << ',' << rec << '\n';
      }
      break;
    case Format::Text:
      o << "equation   " << a.equation << '\n';
      o << "root score " << tree.node(tree.root).score << '\n';
      for (const auto& s : plan.steps) {
        const auto& n = tree.node(s.node);
        o << "  t=" << s.timestamp << "  node " << s.node << "  " << tpp::eq::op_label(s.op) << "  score "
          << n.score << "  -> " << (s.output.kind == tpp::eq::Binding::Kind::Out ? "out" : "temp")
          << (s.temp_id >= 0 ? " " + std::to_string(s.temp_id) : std::string()) << "  [" << n.out.rows << 'x'
          << n.out.cols << ']';
        if (!s.recycled.empty()) {
          o << "  recycles";
          for (int t : s.recycled) o << ' ' << t;
        }
        o << '\n';
      }
      o << "temp_count " << plan.temp_count << '\n';
      o << "temp_bytes " << plan.temp_bytes << '\n';
      o << "naive_bytes " << plan.naive_bytes << '\n';
      break;
  }
  emit(c, o.str());
  return 0;
}

// ---- approx-report ----

struct ErrorRow {
  std::string function, method, dtype, metric;
  double lo, hi, measured, budget;
};

template <class T, class F, class G>
double max_error(F approx, G exact, double lo, double hi, int points, bool relative) {
  double worst = 0.0;
  for (int i = 0; i < points; ++i) {
    const T x = static_cast<T>(lo + (hi - lo) * i / (points - 1));
    const double e = exact(static_cast<double>(x));
    const double d = std::fabs(static_cast<double>(approx(x)) - e);
    worst = std::max(worst, relative ? d / std::fabs(e) : d);
  }
  return worst;
}

template <class T>
void error_rows(std::vector<ErrorRow>& rows, int points) {
  namespace ap = tpp::approx;
  const std::string dt = std::is_same_v<T, float> ? "fp32" : "fp64";
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  auto gelu = [](double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); };
  auto th = [](double x) { return std::tanh(x); };
  rows.push_back({"tanh", "pade", dt, "abs", -5, 5, max_error<T>(ap::tanh_pade78<T>, th, -5, 5, points, false), 1e-5});
  rows.push_back(
      {"tanh", "minimax", dt, "abs", -4, 4, max_error<T>(ap::tanh_minimax<T>, th, -4, 4, points, false), 2e-3});
  rows.push_back({"exp", "taylor", dt, "rel", -10, 10,
                  max_error<T>(ap::exp_taylor<T>, [](double x) { return std::exp(x); }, -10, 10, points, true), 3e-4});
  rows.push_back({"sigmoid", "pade", dt, "abs", -10, 10,
                  max_error<T>([](T x) { return ap::sigmoid_from_tanh(ap::tanh_pade78<T>(x / T(2))); }, sig, -10, 10,
                               points, false),
                  1.1e-5});
  rows.push_back({"sigmoid", "minimax", dt, "abs", -8, 8,
                  max_error<T>([](T x) { return ap::sigmoid_from_tanh(ap::tanh_minimax<T>(x / T(2))); }, sig, -8, 8,
                               points, false),
                  2.2e-3});
  rows.push_back(
      {"gelu", "minimax", dt, "abs", -6, 6, max_error<T>(ap::gelu_minimax<T>, gelu, -6, 6, points, false), 0.0});
}

int cmd_approx(const Common& c, int points) {
  if (points < 2) throw UsageError("--points must be at least 2");
  std::vector<ErrorRow> rows;
  error_rows<float>(rows, points);
  error_rows<double>(rows, points);
  std::ostringstream o;
  switch (c.format) {
    case Format::Json: {
      ordered_json j;
      j["format"] = "tpp-approx-report";
      j["version"] = 1;
      j["points"] = points;
      j["tables"] = nlohmann::json::parse(tpp::approx::tables_json());
      j["errors"] = ordered_json::array();
      for (const auto& r : rows)
        j["errors"].push_back({{"function", r.function},
                               {"method", r.method},
                               {"dtype", r.dtype},
                               {"metric", r.metric},
                               {"range", {r.lo, r.hi}},
                               {"measured", r.measured},
                               {"budget", r.budget > 0 ? ordered_json(r.budget) : ordered_json(nullptr)}});
      o << j.dump(2) << '\n';
      break;
    }
    case Format::Csv:
      o << "function,method,dtype,metric,lo,hi,measured,budget\n";
      for (const auto& r : rows)
        o << r.function << ',' << r.method << ',' << r.dtype << ',' << r.metric << ',' << r.lo << ',' << r.hi << ','
          << r.measured << ',' << (r.budget > 0 ? std::to_string(r.budget) : std::string()) << '\n';
      break;
    case Format::Text:
      for (const auto& r : rows) {
        char line[160];
        std::snprintf(line, sizeof line, "%-8s %-8s %s  %s err on [%g,%g]  %.3g", r.function.c_str(),
                      r.method.c_str(), r.dtype.c_str(), r.metric.c_str(), r.lo, r.hi, r.measured);
        o << line;
        if (r.budget > 0) o << "  (budget " << r.budget << ')';
        o << '\n';
      }
      break;
  }
  emit(c, o.str());
  return 0;
}

// ---- bench ----

struct BenchArgs {
  std::string kernel = "all";
  int reps = 10;
  std::int64_t M = 64, N = 64, K = 64, batch = 16;
  std::int64_t fc_blocks = 4, fc_block = 64;
  std::int64_t S1 = 64, S2 = 32, S3 = 16;
};

struct BenchRow {
  std::string kernel, variant, shape;
  double median_s = 0, min_s = 0, gflops = 0;
  std::size_t temp_bytes = 0, naive_bytes = 0;
  std::string checksum;
};

template <class F>
std::pair<double, double> time_it(int reps, F&& f) {
  std::vector<double> t;
  f();  // warm-up, also fills the dispatch cache
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(t.begin(), t.end());
  return {t[t.size() / 2], t.front()};
}

void fill(std::vector<float>& v, tpp::verify::Rng& rng) {
  std::normal_distribution<float> d(0.0f, 1.0f);
  for (auto& x : v) x = d(rng);
}

template <class T>
std::string checksum(const std::vector<T>& v) {
  return hex(fnv1a(v.data(), v.size() * sizeof(T)));
}

// Plan of act(A x B) over the given operand shapes.
tpp::eq::ExecPlan epilogue_plan(std::int64_t m, std::int64_t n, std::int64_t k, const char* act) {
  std::vector<tpp::InputSpec> a{tpp::InputSpec{tpp::TensorDesc::dense(m, k)},
                                tpp::InputSpec{tpp::TensorDesc::dense(k, n)}};
  return tpp::eq::compile(tpp::eq::parse_equation(std::string(act) + "(T0 matmul T1)", a));
}

void bench_brgemm(const BenchArgs& a, const Common& c, tpp::verify::Rng& rng, std::vector<BenchRow>& rows) {
  const std::int64_t M = a.M, N = a.N, K = a.K, n = a.batch;
  std::vector<float> A(static_cast<std::size_t>(M * K * n)), B(static_cast<std::size_t>(K * N * n));
  fill(A, rng);
  fill(B, rng);
  std::vector<float> C(static_cast<std::size_t>(M * N)), R(C.size());
  tpp::GemmSpec spec = tpp::GemmSpec::plain(M, N, K);
  const tpp::BrgemmBatch batch = tpp::BatchStride{A.data(), B.data(), M * K, K * N, n};
  const auto plan = epilogue_plan(M, N, K, "relu");
  const double flops = 2.0 * static_cast<double>(M * N * K * n);
  const std::string shape = std::to_string(M) + "x" + std::to_string(N) + "x" + std::to_string(K) +
                            " n=" + std::to_string(n);

  tpp::reference::brgemm(spec, batch, R.data());
  tpp::brgemm(spec, batch, C.data(), {c.threads});
  if (std::memcmp(C.data(), R.data(), C.size() * sizeof(float)) != 0)
    throw std::runtime_error("brgemm output differs from the serial reference");

  auto [med, mn] = time_it(a.reps, [&] { tpp::brgemm(spec, batch, C.data(), {c.threads}); });
  rows.push_back({"brgemm", "openmp", shape, med, mn, flops / med * 1e-9, plan.temp_bytes, plan.naive_bytes,
                  checksum(C)});
  std::tie(med, mn) = time_it(a.reps, [&] { tpp::reference::brgemm(spec, batch, R.data()); });
  rows.push_back({"brgemm", "reference", shape, med, mn, flops / med * 1e-9, plan.temp_bytes, plan.naive_bytes,
                  checksum(R)});
}

void bench_fc(const BenchArgs& a, const Common& c, tpp::verify::Rng& rng, std::vector<BenchRow>& rows) {
  tpp::kernels::FcSpec s{a.fc_blocks, a.fc_blocks, a.fc_blocks, a.fc_block, a.fc_block, a.fc_block, std::nullopt};
  const std::int64_t m = s.Mb * s.bm, n = s.Nb * s.bn, k = s.Kb * s.bk;
  std::vector<float> A(static_cast<std::size_t>(m * k)), B(static_cast<std::size_t>(k * n));
  fill(A, rng);
  fill(B, rng);
  std::vector<float> C(static_cast<std::size_t>(m * n)), R(C.size());
  const auto plan = epilogue_plan(m, n, k, "relu");
  const double flops = 2.0 * static_cast<double>(m * n * k);
  const std::string shape = std::to_string(s.Mb) + "x" + std::to_string(s.Nb) + "x" + std::to_string(s.Kb) +
                            " blocks of " + std::to_string(s.bm);

  tpp::reference::fc_forward(s.Mb, s.Nb, s.Kb, s.bm, s.bn, s.bk, A.data(), B.data(), R.data());
  tpp::kernels::fc_forward(s, A.data(), B.data(), C.data(), {c.threads});
  if (std::memcmp(C.data(), R.data(), C.size() * sizeof(float)) != 0)
    throw std::runtime_error("fc output differs from the serial reference");

  auto [med, mn] = time_it(a.reps, [&] { tpp::kernels::fc_forward(s, A.data(), B.data(), C.data(), {c.threads}); });
  rows.push_back({"fc", "openmp", shape, med, mn, flops / med * 1e-9, plan.temp_bytes, plan.naive_bytes,
                  checksum(C)});
  std::tie(med, mn) = time_it(a.reps, [&] {
    tpp::reference::fc_forward(s.Mb, s.Nb, s.Kb, s.bm, s.bn, s.bk, A.data(), B.data(), R.data());
  });
  rows.push_back({"fc", "reference", shape, med, mn, flops / med * 1e-9, plan.temp_bytes, plan.naive_bytes,
                  checksum(R)});
}

void bench_softmax(const BenchArgs& a, tpp::verify::Rng& rng, std::vector<BenchRow>& rows) {
  const tpp::kernels::SoftmaxSpec s{a.S1, a.S2, a.S3};
  const std::int64_t r = s.S2 * s.S3;
  tpp::Tensor X(r, s.S1), Y(r, s.S1), Yn(r, s.S1);
  tpp::verify::fill_normal(rng, X.view());
  const auto p1 = tpp::kernels::softmax_max_plan(s.S3, s.S1, tpp::DType::FP32);
  const auto p2 = tpp::kernels::softmax_norm_plan(s.S3, s.S1, tpp::DType::FP32);
  const std::size_t temp = p1.temp_bytes + p2.temp_bytes, naive_b = p1.naive_bytes + p2.naive_bytes;
  // About five floating-point operations per element: max, sub, exp, sum, mul.
  const double flops = 5.0 * static_cast<double>(r * s.S1);
  const std::string shape = std::to_string(s.S1) + "x" + std::to_string(s.S2) + "x" + std::to_string(s.S3);

  // Naive: every node materialized on its own by the scalar interpreter.
  auto naive = [&] {
    for (std::int64_t i = 0; i < s.S2; ++i) {
      const tpp::TensorView x = X.view().block(i * s.S3, 0, s.S3, s.S1);
      const tpp::Tensor xp = tpp::verify::interpret(p1.tree, std::span<const tpp::TensorView>(&x, 1));
      const tpp::TensorView xv = xp.view();
      const tpp::Tensor y = tpp::verify::interpret(p2.tree, std::span<const tpp::TensorView>(&xv, 1));
      tpp::apply_unary(tpp::UnaryKind::IDENTITY, {}, y.view(), Yn.view().block(i * s.S3, 0, s.S3, s.S1));
    }
  };
  naive();
  for (const auto& [name, strat] : {std::pair<std::string, tpp::eq::EvalStrategy>{"buffered", tpp::eq::Buffered{}},
                                    {"hybrid", tpp::eq::Hybrid{}}}) {
    tpp::kernels::softmax(s, X.view(), Y.view(), strat);
    if (!Y.bitwise_equal(Yn)) throw std::runtime_error("softmax " + name + " differs from naive evaluation");
    const auto [med, mn] = time_it(a.reps, [&] { tpp::kernels::softmax(s, X.view(), Y.view(), strat); });
    rows.push_back({"softmax", name, shape, med, mn, flops / med * 1e-9, temp, naive_b,
                    hex(fnv1a(Y.raw().data(), Y.raw().size()))});
  }
  const auto [med, mn] = time_it(std::max(1, a.reps / 5), naive);
  rows.push_back({"softmax", "naive", shape, med, mn, flops / med * 1e-9, naive_b, naive_b,
                  hex(fnv1a(Yn.raw().data(), Yn.raw().size()))});
}

int cmd_bench(const Common& c, const BenchArgs& a) {
  if (a.reps < 1) throw UsageError("--reps must be positive");
  if (c.threads > 0) omp_set_num_threads(c.threads);
  tpp::verify::Rng rng(c.seed);
  std::vector<BenchRow> rows;
  const bool all = a.kernel == "all";
  if (all || a.kernel == "brgemm") bench_brgemm(a, c, rng, rows);
  if (all || a.kernel == "fc") bench_fc(a, c, rng, rows);
  if (all || a.kernel == "softmax") bench_softmax(a, rng, rows);

  std::ostringstream o;
  switch (c.format) {
    case Format::Json: {
      ordered_json j;
      j["format"] = "tpp-bench";
      j["version"] = 1;
      j["seed"] = c.seed;
      j["threads"] = c.threads;
      j["results"] = ordered_json::array();
      for (const auto& r : rows)
        j["results"].push_back({{"kernel", r.kernel},
                                {"variant", r.variant},
                                {"shape", r.shape},
                                {"median_s", r.median_s},
                                {"min_s", r.min_s},
                                {"gflops", r.gflops},
                                {"temp_bytes", r.temp_bytes},
                                {"naive_bytes", r.naive_bytes},
                                {"checksum", r.checksum}});
      o << j.dump(2) << '\n';
      break;
    }
    case Format::Csv:
      o << "kernel,variant,shape,median_s,min_s,gflops,temp_bytes,naive_bytes,checksum\n";
      for (const auto& r : rows)
        o << r.kernel << ',' << r.variant << ',' << csv_field(r.shape) << ',' << r.median_s << ',' << r.min_s << ','
          << r.gflops << ',' << r.temp_bytes << ',' << r.naive_bytes << ',' << r.checksum << '\n';
      break;
    case Format::Text:
      for (const auto& r : rows) {
        char line[256];
        std::snprintf(line, sizeof line, "%-8s %-10s %-22s median %10.3e s  min %10.3e s  %8.3f GFLOPS  temp %zu / naive %zu B  %s",
                      r.kernel.c_str(), r.variant.c_str(), r.shape.c_str(), r.median_s, r.min_s, r.gflops,
                      r.temp_bytes, r.naive_bytes, r.checksum.c_str());
        o << line << '\n';
      }
      break;
  }
  emit(c, o.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tpp: conformance checks, plan inspection, approximation reports and benchmarks"};
  app.require_subcommand(1);

  Common common;
  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "Run the conformance suites");
  add_common(verify, common);
  verify->add_option("--only", va.only, "Suites to run (comma separated)")->delimiter(',');
  verify->add_option("--max-nodes", va.max_nodes, "Internal-node bound for random planner trees")
      ->check(CLI::Range(1, 20))
      ->capture_default_str();
  verify->add_option("--inject-fault", va.fault, "Test-only fault: reverse-reduce")
      ->check(CLI::IsMember({"reverse-reduce"}));
  verify->add_flag("--list", va.list, "List the suites and exit");

  PlanArgs pa;
  auto* plan = app.add_subcommand("plan", "Compile an equation and print its execution plan");
  add_common(plan, common);
  plan->add_option("equation", pa.equation, "Equation text, e.g. \"tanh(T0) + T1\"")->required();
  plan->add_option("--shape", pa.shape, "Shape of every argument, ROWSxCOLS")->capture_default_str();
  plan->add_option("--arg", pa.arg_shapes, "Per-argument shape override, SLOT=ROWSxCOLS (repeatable)");
  plan->add_option("--dtype", pa.dtype, "Argument dtype")->capture_default_str();
  plan->add_flag("--dot", pa.dot, "Print Graphviz DOT instead of the plan report");

  int points = 1000000;
  auto* approx = app.add_subcommand("approx-report", "Coefficient tables and measured approximation errors");
  add_common(approx, common);
  approx->add_option("--points", points, "Grid points per range")->capture_default_str();

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Time brgemm, fc and softmax");
  add_common(bench, common);
  bench->add_option("--kernel", ba.kernel, "brgemm, fc, softmax or all")
      ->check(CLI::IsMember({"all", "brgemm", "fc", "softmax"}))
      ->capture_default_str();
  bench->add_option("--reps", ba.reps, "Timed repetitions")->capture_default_str();
  bench->add_option("--M", ba.M, "brgemm rows")->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--N", ba.N, "brgemm columns")->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--K", ba.K, "brgemm inner extent")->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--batch", ba.batch, "brgemm batch count")->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--fc-blocks", ba.fc_blocks, "fc blocks per dimension")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  bench->add_option("--fc-block", ba.fc_block, "fc block edge")->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--S1", ba.S1, "softmax S1")->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--S2", ba.S2, "softmax S2")->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--S3", ba.S3, "softmax S3")->check(CLI::PositiveNumber)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (verify->parsed()) return cmd_verify(common, va);
    if (plan->parsed()) return cmd_plan(common, pa);
    if (approx->parsed()) return cmd_approx(common, points);
    if (bench->parsed()) return cmd_bench(common, ba);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const tpp::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    const bool usage = e.code() == tpp::Errc::parse_error || e.code() == tpp::Errc::invalid_spec ||
                       e.code() == tpp::Errc::shape_mismatch;
    return usage ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
