#include <json.hpp>

#include <sstream>

#include "tpp/equation.hpp"
#include "tpp/error.hpp"

namespace tpp::eq {

using nlohmann::json;

namespace {

template <class E, class P>
E parse_enum(const json& j, P parse, const char* what) {
  const auto s = j.get<std::string>();
  const auto v = parse(s);
  if (!v) fail(Errc::parse_error, std::string("plan json: unknown ") + what + " '" + s + "'");
  return *v;
}

json desc_json(const TensorDesc& d) {
  return {{"rows", d.rows}, {"cols", d.cols}, {"ld", d.ld}, {"dtype", to_string(d.dtype)}, {"bcast", to_string(d.bcast)}};
}

TensorDesc desc_from(const json& j) {
  TensorDesc d;
  d.rows = j.at("rows").get<std::int64_t>();
  d.cols = j.at("cols").get<std::int64_t>();
  d.ld = j.at("ld").get<std::int64_t>();
  d.dtype = parse_enum<DType>(j.at("dtype"), parse_dtype, "dtype");
  d.bcast = parse_enum<Bcast>(j.at("bcast"), parse_bcast, "broadcast mode");
  return d;
}

json flags_json(const OpFlags& f) {
  json j{{"approx", to_string(f.approx)},
         {"reduce", {{"axis", to_string(f.reduce.axis)}, {"op", to_string(f.reduce.op)}, {"squared", f.reduce.squared}}},
         {"transform",
          {{"kind", to_string(f.transform.kind)},
           {"alpha0", f.transform.alpha0},
           {"alpha1", f.transform.alpha1},
           {"logical_cols", f.transform.logical_cols}}},
         {"index_axis", f.index_axis == IndexAxis::Rows ? "rows" : "cols"},
         {"strided",
          {{"row0", f.strided.row0}, {"col0", f.strided.col0}, {"row_stride", f.strided.row_stride},
           {"col_stride", f.strided.col_stride}}},
         {"cmp", to_string(f.cmp)},
         {"bitmask_out", f.bitmask_out},
         {"dropout_p", f.dropout_p},
         {"out_dtype", f.out_dtype ? json(to_string(*f.out_dtype)) : json(nullptr)},
         {"out_rows", f.out_rows},
         {"out_cols", f.out_cols}};
  return j;
}

OpFlags flags_from(const json& j) {
  OpFlags f;
  f.approx = parse_enum<Approx>(j.at("approx"), parse_approx, "approximation");
  const auto& r = j.at("reduce");
  f.reduce.axis = parse_enum<ReduceAxis>(r.at("axis"), parse_reduce_axis, "reduce axis");
  f.reduce.op = parse_enum<ReduceOp>(r.at("op"), parse_reduce_op, "reduce op");
  f.reduce.squared = r.at("squared").get<bool>();
  const auto& t = j.at("transform");
  f.transform.kind = parse_enum<TransformKind>(t.at("kind"), parse_transform, "transform");
  f.transform.alpha0 = t.at("alpha0").get<int>();
  f.transform.alpha1 = t.at("alpha1").get<int>();
  f.transform.logical_cols = t.at("logical_cols").get<std::int64_t>();
  f.index_axis = j.at("index_axis").get<std::string>() == "rows" ? IndexAxis::Rows : IndexAxis::Cols;
  const auto& s = j.at("strided");
  f.strided = {s.at("row0").get<std::int64_t>(), s.at("col0").get<std::int64_t>(), s.at("row_stride").get<std::int64_t>(),
               s.at("col_stride").get<std::int64_t>()};
  f.cmp = parse_enum<CmpOp>(j.at("cmp"), parse_cmp, "comparison");
  f.bitmask_out = j.at("bitmask_out").get<bool>();
  f.dropout_p = j.at("dropout_p").get<float>();
  if (!j.at("out_dtype").is_null()) f.out_dtype = parse_enum<DType>(j.at("out_dtype"), parse_dtype, "dtype");
  f.out_rows = j.at("out_rows").get<std::int64_t>();
  f.out_cols = j.at("out_cols").get<std::int64_t>();
  return f;
}

const char* binding_kind(Binding::Kind k) {
  switch (k) {
    case Binding::Kind::Arg: return "arg";
    case Binding::Kind::Temp: return "temp";
    case Binding::Kind::Out: return "out";
  }
  return "arg";
}

json binding_json(const Binding& b) {
  return {{"kind", binding_kind(b.kind)}, {"index", b.index}, {"node", b.node}, {"rows", b.rows}, {"cols", b.cols}};
}

Binding binding_from(const json& j) {
  Binding b;
  const auto k = j.at("kind").get<std::string>();
  if (k == "arg") b.kind = Binding::Kind::Arg;
  else if (k == "temp") b.kind = Binding::Kind::Temp;
  else if (k == "out") b.kind = Binding::Kind::Out;
  else fail(Errc::parse_error, "plan json: unknown binding kind '" + k + "'");
  b.index = j.at("index").get<int>();
  b.node = j.at("node").get<int>();
  b.rows = j.at("rows").get<std::int64_t>();
  b.cols = j.at("cols").get<std::int64_t>();
  return b;
}

NodeOp op_from(const json& j) {
  const auto k = parse_op_kind(j.at("kind").get<std::string>());
  if (!k) fail(Errc::parse_error, "plan json: unknown op kind");
  return {*k, flags_from(j.at("flags"))};
}

std::string to_json(const ExecPlan& p) {
  json nodes = json::array();
  for (const auto& n : p.tree.nodes) {
    json j{{"id", n.id}, {"children", n.children}, {"arg_slot", n.arg_slot}, {"out", desc_json(n.out)},
           {"score", n.score}, {"timestamp", n.timestamp}, {"temp_id", n.temp_id}};
    if (n.op) {
      j["op"] = {{"kind", to_string(n.op->kind)}, {"flags", flags_json(n.op->flags)}};
      j["label"] = op_label(*n.op);
    }
    nodes.push_back(std::move(j));
  }
  json args = json::array();
  for (const auto& a : p.tree.args)
    args.push_back({{"desc", desc_json(a.desc)}, {"companion", to_string(a.companion)}, {"companion_count", a.companion_count}});
  json steps = json::array();
  for (const auto& s : p.steps) {
    json in = json::array();
    for (const auto& b : s.inputs) in.push_back(binding_json(b));
    steps.push_back({{"t", s.timestamp},
                     {"node", s.node},
                     {"op", {{"kind", to_string(s.op.kind)}, {"flags", flags_json(s.op.flags)}}},
                     {"label", op_label(s.op)},
                     {"inputs", in},
                     {"output", binding_json(s.output)},
                     {"temp_id", s.temp_id},
                     {"recycled", s.recycled},
                     {"fused_gather", s.fused_gather},
                     {"absorbed", s.absorbed}});
  }
  json j{{"format", "tpp-plan"},
         {"version", 1},
         {"root", p.tree.root},
         {"args", args},
         {"nodes", nodes},
         {"steps", steps},
         {"temp_count", p.temp_count},
         {"slot_bytes", p.slot_bytes},
         {"temp_bytes", p.temp_bytes},
         {"naive_bytes", p.naive_bytes}};
  return j.dump(2);
}

std::string dot_escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '"' || c == '\\') o += '\\';
    o += c;
  }
  return o;
}

std::string to_dot(const ExecPlan& p) {
  std::ostringstream o;
  o << "digraph equation {\n  node [fontname=\"monospace\"];\n";
  for (const auto& n : p.tree.nodes) {
    o << "  n" << n.id << " [";
    if (n.is_leaf()) {
      o << "shape=box, label=\"T" << n.arg_slot << "\\n" << n.out.rows << "x" << n.out.cols << " "
        << to_string(n.out.dtype) << "\"";
    } else {
      o << "shape=ellipse, label=\"" << dot_escape(op_label(*n.op)) << "\\nv=" << n.score << " t=" << n.timestamp
        << " tmp=" << n.temp_id << "\"";
    }
    o << "];\n";
  }
  for (const auto& n : p.tree.nodes)
    for (int c : n.children) o << "  n" << n.id << " -> n" << c << ";\n";
  o << "}\n";
  return o.str();
}

}  // namespace

std::string op_label(const NodeOp& op) {
  std::string s;
  if (const auto* u = std::get_if<UnaryKind>(&op.kind)) {
    switch (*u) {
      case UnaryKind::REDUCE:
        s = "reduce_" + std::string(op.flags.reduce.squared ? "sumsq" : to_string(op.flags.reduce.op)) + "_" +
            std::string(to_string(op.flags.reduce.axis));
        break;
      case UnaryKind::TRANSFORM: s = std::string(to_string(op.flags.transform.kind)); break;
      case UnaryKind::GATHER: s = op.flags.index_axis == IndexAxis::Cols ? "gather_cols" : "gather_rows"; break;
      default: s = std::string(to_string(*u)); break;
    }
  } else if (const auto* b = std::get_if<BinaryKind>(&op.kind)) {
    s = std::string(to_string(*b));
    if (*b == BinaryKind::COMPARE) s += "_" + std::string(to_string(op.flags.cmp));
  } else {
    s = std::string(to_string(std::get<TernaryKind>(op.kind)));
  }
  if (op.flags.approx != Approx::Default) s += ":" + std::string(to_string(op.flags.approx));
  return s;
}

std::string export_plan(const ExecPlan& plan, PlanFormat format) {
  if (plan.steps.empty()) fail(Errc::invalid_spec, "cannot export an empty plan");
  return format == PlanFormat::Json ? to_json(plan) : to_dot(plan);
}

ExecPlan import_plan_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(Errc::parse_error, std::string("plan json: ") + e.what());
  }
  try {
    if (j.value("format", "") != "tpp-plan") fail(Errc::parse_error, "plan json: missing format tag");
    ExecPlan p;
    for (const auto& a : j.at("args")) {
      InputSpec s;
      s.desc = desc_from(a.at("desc"));
      const auto ck = a.at("companion").get<std::string>();
      static constexpr CompanionKind kinds[] = {CompanionKind::None, CompanionKind::Bitmask, CompanionKind::Indices,
                                                CompanionKind::Offsets2D, CompanionKind::Tensor};
      bool found = false;
      for (auto k : kinds)
        if (to_string(k) == ck) {
          s.companion = k;
          found = true;
        }
      if (!found) fail(Errc::parse_error, "plan json: unknown companion '" + ck + "'");
      s.companion_count = a.at("companion_count").get<std::int64_t>();
      p.tree.args.push_back(s);
    }
    for (const auto& jn : j.at("nodes")) {
      EqNode n;
      n.id = jn.at("id").get<int>();
      n.children = jn.at("children").get<std::vector<int>>();
      n.arg_slot = jn.at("arg_slot").get<int>();
      n.out = desc_from(jn.at("out"));
      n.score = jn.at("score").get<int>();
      n.timestamp = jn.at("timestamp").get<int>();
      n.temp_id = jn.at("temp_id").get<int>();
      if (jn.contains("op")) n.op = op_from(jn.at("op"));
      if (n.id != static_cast<int>(p.tree.nodes.size())) fail(Errc::parse_error, "plan json: node ids must be dense");
      for (int c : n.children)
        if (c < 0 || c >= n.id) fail(Errc::parse_error, "plan json: children must precede parents");
      p.tree.nodes.push_back(std::move(n));
    }
    p.tree.root = j.at("root").get<int>();
    if (p.tree.root < 0 || p.tree.root >= static_cast<int>(p.tree.nodes.size()))
      fail(Errc::parse_error, "plan json: root out of range");
    for (const auto& js : j.at("steps")) {
      PlanStep s;
      s.timestamp = js.at("t").get<int>();
      s.node = js.at("node").get<int>();
      s.op = op_from(js.at("op"));
      for (const auto& b : js.at("inputs")) s.inputs.push_back(binding_from(b));
      s.output = binding_from(js.at("output"));
      s.temp_id = js.at("temp_id").get<int>();
      s.recycled = js.at("recycled").get<std::vector<int>>();
      s.fused_gather = js.at("fused_gather").get<bool>();
      s.absorbed = js.at("absorbed").get<bool>();
      p.steps.push_back(std::move(s));
    }
    p.temp_count = j.at("temp_count").get<int>();
    p.slot_bytes = j.at("slot_bytes").get<std::size_t>();
    p.temp_bytes = j.at("temp_bytes").get<std::size_t>();
    p.naive_bytes = j.at("naive_bytes").get<std::size_t>();
    return p;
  } catch (const json::exception& e) {
    fail(Errc::parse_error, std::string("plan json: ") + e.what());
  }
}

}  // namespace tpp::eq
