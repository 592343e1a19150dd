#include <algorithm>
#include <cctype>
#include <string>

#include "tpp/equation.hpp"
#include "tpp/error.hpp"

namespace tpp::eq {

namespace {

enum class Tok { Name, Arg, Plus, Minus, Star, Slash, LParen, RParen, Comma, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  int arg = -1;
  std::size_t pos = 0;
};

[[noreturn]] void parse_fail(std::size_t pos, const std::string& msg) {
  fail(Errc::parse_error, "parse error at position " + std::to_string(pos) + ": " + msg);
}

std::vector<Token> lex(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    Token t;
    t.pos = i;
    // U+2212 MINUS SIGN
    if (s.compare(i, 3, "\xE2\x88\x92") == 0) {
      t.kind = Tok::Minus;
      i += 3;
      out.push_back(t);
      continue;
    }
    switch (c) {
      case '+': t.kind = Tok::Plus; break;
      case '-': t.kind = Tok::Minus; break;
      case '*': t.kind = Tok::Star; break;
      case '/': t.kind = Tok::Slash; break;
      case '(': t.kind = Tok::LParen; break;
      case ')': t.kind = Tok::RParen; break;
      case ',': t.kind = Tok::Comma; break;
      default: break;
    }
    if (t.kind != Tok::End) {
      ++i;
      out.push_back(t);
      continue;
    }
    if (std::isalpha(c) || c == '_') {
      std::size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_' || s[j] == ':')) ++j;
      t.text = std::string(s.substr(i, j - i));
      const bool is_arg = t.text.size() > 1 && t.text[0] == 'T' &&
                          t.text.find_first_not_of("0123456789", 1) == std::string::npos;
      if (is_arg) {
        t.kind = Tok::Arg;
        t.arg = std::stoi(t.text.substr(1));
      } else {
        t.kind = Tok::Name;
      }
      i = j;
      out.push_back(t);
      continue;
    }
    parse_fail(i, std::string("unexpected character '") + s[i] + "'");
  }
  Token end;
  end.pos = s.size();
  out.push_back(end);
  return out;
}

class Parser {
 public:
  Parser(std::string_view text, std::vector<InputSpec> args) : toks_(lex(text)), b_(std::move(args)) {}

  EqTree run() {
    const int root = expr();
    if (peek().kind != Tok::End) parse_fail(peek().pos, "unexpected trailing input");
    return b_.build(root);
  }

 private:
  const Token& peek() const { return toks_[i_]; }
  const Token& next() { return toks_[i_++]; }
  void expect(Tok k, const char* what) {
    if (peek().kind != k) parse_fail(peek().pos, std::string("expected ") + what);
    ++i_;
  }

  int expr() {
    int lhs = term();
    while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
      const bool add = next().kind == Tok::Plus;
      const int rhs = term();
      lhs = b_.binary(add ? BinaryKind::ADD : BinaryKind::SUB, lhs, rhs);
    }
    return lhs;
  }

  int term() {
    int lhs = factor();
    for (;;) {
      const Token& t = peek();
      BinaryKind k;
      if (t.kind == Tok::Star) k = BinaryKind::MUL;
      else if (t.kind == Tok::Slash) k = BinaryKind::DIV;
      else if (t.kind == Tok::Name && t.text == "matmul") k = BinaryKind::MATMUL;
      else break;
      ++i_;
      const int rhs = factor();
      lhs = b_.binary(k, lhs, rhs);
    }
    return lhs;
  }

  int factor() {
    const Token& t = peek();
    if (t.kind == Tok::Arg) {
      ++i_;
      try {
        return b_.leaf(t.arg);
      } catch (const Error& e) {
        parse_fail(t.pos, e.what());
      }
    }
    if (t.kind == Tok::LParen) {
      ++i_;
      const int e = expr();
      expect(Tok::RParen, "')'");
      return e;
    }
    if (t.kind == Tok::Name) {
      const Token name = next();
      expect(Tok::LParen, "'(' after function name");
      std::vector<int> operands{expr()};
      while (peek().kind == Tok::Comma) {
        ++i_;
        operands.push_back(expr());
      }
      expect(Tok::RParen, "')'");
      return call(name, std::move(operands));
    }
    parse_fail(t.pos, t.kind == Tok::End ? "unexpected end of input" : "expected an operand");
  }

  int call(const Token& name, std::vector<int> operands) {
    std::string fn = name.text;
    OpFlags flags;
    if (const auto colon = fn.find(':'); colon != std::string::npos) {
      const auto a = parse_approx(fn.substr(colon + 1));
      if (!a) parse_fail(name.pos, "unknown approximation '" + fn.substr(colon + 1) + "'");
      flags.approx = *a;
      fn = fn.substr(0, colon);
    }
    std::optional<OpKind> kind;
    if (fn.rfind("reduce_", 0) == 0) {
      // reduce_<op>_<axis>
      const auto us = fn.find('_', 7);
      if (us == std::string::npos) parse_fail(name.pos, "malformed reduce name '" + fn + "'");
      std::string op = fn.substr(7, us - 7);
      const auto axis = parse_reduce_axis(fn.substr(us + 1));
      if (op == "sumsq") {
        flags.reduce.squared = true;
        op = "sum";
      }
      const auto rop = parse_reduce_op(op);
      if (!axis || !rop) parse_fail(name.pos, "malformed reduce name '" + fn + "'");
      flags.reduce.axis = *axis;
      flags.reduce.op = *rop;
      kind = UnaryKind::REDUCE;
    } else if (fn == "transpose") {
      flags.transform.kind = TransformKind::Transpose;
      kind = UnaryKind::TRANSFORM;
    } else if (fn == "gather_cols" || fn == "gather_rows") {
      flags.index_axis = fn == "gather_cols" ? IndexAxis::Cols : IndexAxis::Rows;
      kind = UnaryKind::GATHER;
    } else {
      kind = parse_op_kind(fn);
    }
    if (!kind) parse_fail(name.pos, "unknown function '" + fn + "'");
    if (static_cast<int>(operands.size()) != arity(*kind))
      parse_fail(name.pos, "'" + fn + "' takes " + std::to_string(arity(*kind)) + " operands, got " +
                               std::to_string(operands.size()));
    try {
      return b_.op({*kind, flags}, std::move(operands));
    } catch (const Error& e) {
      parse_fail(name.pos, e.what());
    }
  }

  std::vector<Token> toks_;
  std::size_t i_ = 0;
  TreeBuilder b_;
};

}  // namespace

EqTree parse_equation(std::string_view text, std::vector<InputSpec> args) {
  return Parser(text, std::move(args)).run();
}

int count_arguments(std::string_view text) {
  int n = 0;
  for (const auto& t : lex(text))
    if (t.kind == Tok::Arg) n = std::max(n, t.arg + 1);
  return n;
}

}  // namespace tpp::eq
