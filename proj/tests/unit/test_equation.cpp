#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "tpp/equation.hpp"
#include "tpp/error.hpp"
#include "tpp/verify.hpp"
#include "util.hpp"

using namespace tpp;
using namespace tpp::eq;

namespace {

const char* kWorked = "tanh(T0) + (T1 matmul T2) / (T3 - T4)";

std::vector<InputSpec> square_args(int n, std::int64_t dim) {
  return std::vector<InputSpec>(static_cast<std::size_t>(n), InputSpec{TensorDesc::dense(dim, dim)});
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected tpp::Error");
  return Errc::invalid_spec;
}

std::string read_golden(const std::string& name) {
  std::ifstream f(std::string(TPP_SOURCE_DIR) + "/tests/golden/" + name);
  REQUIRE(f.good());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string rstrip(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == ' ')) s.pop_back();
  return s;
}

bool same_bits(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (std::int64_t i = 0; i < a.rows(); ++i)
    for (std::int64_t j = 0; j < a.cols(); ++j) {
      const double x = a.at(i, j), y = b.at(i, j);
      if (std::isnan(x) && std::isnan(y)) continue;
      if (x != y || std::signbit(x) != std::signbit(y)) return false;
    }
  return true;
}

// Complete binary ADD tree of the given depth over one 2x2 argument.
EqTree balanced(int depth) {
  TreeBuilder b({InputSpec{TensorDesc::dense(2, 2)}});
  auto grow = [&](auto&& self, int d) -> int {
    if (d == 0) return b.leaf(0);
    const int l = self(self, d - 1);
    const int r = self(self, d - 1);
    return b.binary(BinaryKind::ADD, l, r);
  };
  return b.build(grow(grow, depth));
}

}  // namespace

TEST_SUITE("equation-engine") {

TEST_CASE("parser builds the worked example tree") {
  CHECK(count_arguments(kWorked) == 5);
  const EqTree t = parse_equation(kWorked, square_args(5, 16));
  CHECK(t.internal_count() == 5);
  const EqNode& root = t.node(t.root);
  REQUIRE(root.op.has_value());
  CHECK(root.op->kind == OpKind{BinaryKind::ADD});
  CHECK(root.children.size() == 2);
  CHECK(t.node(root.children[0]).op->kind == OpKind{UnaryKind::TANH});
  CHECK(t.node(root.children[1]).op->kind == OpKind{BinaryKind::DIV});
}

TEST_CASE("parser precedence and approximation suffix") {
  const EqTree t = parse_equation("T0 + T1 * T2", square_args(3, 4));
  CHECK(t.node(t.root).op->kind == OpKind{BinaryKind::ADD});
  CHECK(t.node(t.node(t.root).children[1]).op->kind == OpKind{BinaryKind::MUL});

  const EqTree a = parse_equation("tanh:minimax(T0)", square_args(1, 4));
  const EqTree d = parse_equation("tanh(T0)", square_args(1, 4));
  CHECK_FALSE(a.node(a.root).op == d.node(d.root).op);
}

TEST_CASE("parse errors report a position") {
  try {
    parse_equation("tanh(T0 +", square_args(1, 4));
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::parse_error);
    CHECK(std::string(e.what()).find("position 9") != std::string::npos);
  }
  CHECK(code_of([] { parse_equation("frobnicate(T0)", square_args(1, 4)); }) == Errc::parse_error);
  CHECK(code_of([] { parse_equation("T0 + + T1", square_args(2, 4)); }) == Errc::parse_error);
}

TEST_CASE("a bare argument is not an equation") {
  CHECK(code_of([] { parse_equation("T0", square_args(1, 4)); }) == Errc::invalid_spec);
}

TEST_CASE("matmul inner extents must agree") {
  std::vector<InputSpec> args{InputSpec{TensorDesc::dense(2, 3)}, InputSpec{TensorDesc::dense(2, 3)}};
  CHECK(code_of([&] { parse_equation("T0 matmul T1", args); }) == Errc::shape_mismatch);
  args[1].desc = TensorDesc::dense(3, 5);
  const EqTree t = parse_equation("T0 matmul T1", args);
  CHECK(t.node(t.root).out.rows == 2);
  CHECK(t.node(t.root).out.cols == 5);
}

TEST_CASE("worked example plan") {
  const ExecPlan p = compile(parse_equation(kWorked, square_args(5, 16)));
  CHECK(p.tree.node(p.tree.root).score == 2);
  CHECK(p.temp_count == 2);
  CHECK(p.temp_bytes == 2 * 16 * 16 * 4);
  CHECK(p.naive_bytes == 5 * 16 * 16 * 4);
  CHECK(verify::validate_plan(p).empty());

  struct Want {
    const char* label;
    int score;
    Binding::Kind kind;
    int temp;
  };
  const Want want[] = {{"matmul", 1, Binding::Kind::Temp, 0},
                       {"sub", 1, Binding::Kind::Temp, 1},
                       {"div", 2, Binding::Kind::Temp, 0},
                       {"tanh", 1, Binding::Kind::Temp, 1},
                       {"add", 2, Binding::Kind::Out, -1}};
  REQUIRE(p.steps.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    const PlanStep& s = p.steps[i];
    CAPTURE(i);
    CHECK(s.timestamp == static_cast<int>(i));
    CHECK(op_label(s.op) == want[i].label);
    CHECK(p.tree.node(s.node).score == want[i].score);
    CHECK(s.output.kind == want[i].kind);
    if (want[i].kind == Binding::Kind::Temp) CHECK(s.output.index == want[i].temp);
  }
  CHECK(p.steps[2].recycled == std::vector<int>{1});
  CHECK(p.steps[4].recycled == std::vector<int>{0});
}

TEST_CASE("unary chain needs one slot") {
  const ExecPlan p = compile(parse_equation("relu(exp(tanh(square(T0))))", square_args(1, 8)));
  CHECK(p.tree.node(p.tree.root).score == 1);
  CHECK(p.temp_count == 1);
  CHECK(verify::brute_force_min_temps(p.tree) == 1);
}

TEST_CASE("balanced tree score equals depth") {
  for (int d = 1; d <= 4; ++d) {
    CAPTURE(d);
    const ExecPlan p = compile(balanced(d));
    CHECK(p.tree.node(p.tree.root).score == d);
    CHECK(verify::recursive_score(p.tree, p.tree.root) == d);
    CHECK(p.temp_count == d);
    CHECK(verify::brute_force_min_temps(p.tree) == d);
    CHECK(verify::validate_plan(p).empty());
  }
}

TEST_CASE("plan export matches golden files") {
  const ExecPlan p = compile(parse_equation(kWorked, square_args(5, 16)));
  CHECK(rstrip(export_plan(p, PlanFormat::Dot)) == rstrip(read_golden("worked_example_plan.dot")));
  CHECK(rstrip(export_plan(p, PlanFormat::Json)) == rstrip(read_golden("worked_example_plan.json")));
}

TEST_CASE("dot export has one node per tree node") {
  const ExecPlan p = compile(parse_equation(kWorked, square_args(5, 16)));
  const std::string dot = export_plan(p, PlanFormat::Dot);
  std::size_t ops = 0, leaves = 0;
  for (std::size_t at = 0; (at = dot.find("shape=ellipse", at)) != std::string::npos; ++at) ++ops;
  for (std::size_t at = 0; (at = dot.find("shape=box", at)) != std::string::npos; ++at) ++leaves;
  CHECK(ops == 5);
  CHECK(leaves == 5);
}

TEST_CASE("json plan round trip") {
  const ExecPlan p = compile(parse_equation(kWorked, square_args(5, 16)));
  const ExecPlan q = import_plan_json(export_plan(p, PlanFormat::Json));
  CHECK(q == p);
  CHECK(code_of([] { import_plan_json("{\"format\": \"other\"}"); }) == Errc::parse_error);
}

TEST_CASE("strategies agree with the scalar interpreter") {
  verify::Rng rng(7);
  verify::EquationShape shape;
  shape.max_internal = 6;
  int fused = 0;
  for (int i = 0; i < 60; ++i) {
    CAPTURE(i);
    shape.elementwise_only = i % 2 == 0;
    verify::RandomEquation re = verify::random_equation(rng, shape);
    const auto views = re.views();
    const ExecPlan p = compile(re.tree);
    const Tensor want = verify::interpret(p.tree, views);
    const TensorDesc od = p.tree.node(p.tree.root).out;

    Tensor buf(TensorDesc::dense(od.rows, od.cols, od.dtype));
    evaluate(p, Buffered{}, views, buf.view());
    CHECK(same_bits(buf, want));

    Tensor poisoned(TensorDesc::dense(od.rows, od.cols, od.dtype));
    evaluate(p, Buffered{}, views, poisoned.view(), EvalOptions{true, 0});
    CHECK(same_bits(poisoned, want));

    Tensor hyb(TensorDesc::dense(od.rows, od.cols, od.dtype));
    evaluate(p, Hybrid{3, 2}, views, hyb.view());
    CHECK(same_bits(hyb, want));

    if (tile_fusable(p)) {
      ++fused;
      Tensor tf(TensorDesc::dense(od.rows, od.cols, od.dtype));
      evaluate(p, TileFused{2, 2}, views, tf.view());
      CHECK(same_bits(tf, want));
    }
  }
  CHECK(fused > 0);
}

TEST_CASE("tile fusion rejects non-elementwise plans") {
  const auto args = square_args(5, 4);
  const ExecPlan p = compile(parse_equation(kWorked, args));
  CHECK_FALSE(tile_fusable(p));
  std::vector<Tensor> ts;
  std::vector<TensorView> vs;
  for (int i = 0; i < 5; ++i) ts.push_back(Tensor::filled(4, 4, 1.0 + i));
  for (auto& t : ts) vs.push_back(t.view());
  Tensor out(4, 4);
  CHECK(code_of([&] { evaluate(p, TileFused{2, 2}, vs, out.view()); }) == Errc::strategy_illegal);

  const auto modes = hybrid_assignment(p);
  for (const auto& n : p.tree.nodes) {
    if (n.is_leaf()) CHECK(modes[static_cast<std::size_t>(n.id)] == NodeMode::Leaf);
    else if (op_label(*n.op) == "matmul") CHECK(modes[static_cast<std::size_t>(n.id)] == NodeMode::Buffered);
    else CHECK(modes[static_cast<std::size_t>(n.id)] == NodeMode::Fused);
  }
}

TEST_CASE("worked example numeric result") {
  const ExecPlan p = compile(parse_equation(kWorked, square_args(5, 2)));
  const Tensor t0 = testutil::mat(2, 2, {0, 1, -1, 0.5});
  const Tensor t1 = testutil::mat(2, 2, {1, 2, 3, 4});
  const Tensor t2 = testutil::mat(2, 2, {1, 0, 0, 1});
  const Tensor t3 = Tensor::filled(2, 2, 3.0);
  const Tensor t4 = Tensor::filled(2, 2, 1.0);
  const TensorView vs[] = {t0.view(), t1.view(), t2.view(), t3.view(), t4.view()};
  Tensor out(2, 2);
  evaluate(p, Buffered{}, vs, out.view());
  const auto v = testutil::values(out);
  const double x[] = {0, 1, -1, 0.5}, m[] = {1, 2, 3, 4};
  for (int i = 0; i < 4; ++i) CHECK(v[static_cast<std::size_t>(i)] == doctest::Approx(std::tanh(x[i]) + m[i] / 2.0).epsilon(1e-5));
}

}  // TEST_SUITE
