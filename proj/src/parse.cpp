#include "eqprior/parse.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>

#include "eqprior/errors.hpp"

namespace eqprior {
namespace {

enum class Tok { End, Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, Comma };

struct Lexeme {
  Tok kind = Tok::End;
  std::string_view text;
  std::size_t pos = 0;
  bool integer = false;
};

class Lexer {
 public:
  explicit Lexer(std::string_view s) : s_(s) {}

  std::vector<Lexeme> run() {
    std::vector<Lexeme> out;
    while (true) {
      while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
      if (i_ >= s_.size()) break;
      out.push_back(next());
    }
    out.push_back({Tok::End, {}, s_.size(), false});
    return out;
  }

 private:
  Lexeme next() {
    const std::size_t start = i_;
    const char c = s_[i_];
    auto single = [&](Tok k) {
      ++i_;
      return Lexeme{k, s_.substr(start, 1), start, false};
    };
    if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && i_ + 1 < s_.size() &&
                                                        std::isdigit(static_cast<unsigned char>(s_[i_ + 1])))) {
      bool integer = true;
      while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) ++i_;
      if (i_ < s_.size() && s_[i_] == '.') {
        integer = false;
        ++i_;
        while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) ++i_;
      }
      if (i_ < s_.size() && (s_[i_] == 'e' || s_[i_] == 'E')) {
        std::size_t j = i_ + 1;
        if (j < s_.size() && (s_[j] == '+' || s_[j] == '-')) ++j;
        if (j < s_.size() && std::isdigit(static_cast<unsigned char>(s_[j]))) {
          integer = false;
          i_ = j;
          while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) ++i_;
        }
      }
      return {Tok::Number, s_.substr(start, i_ - start), start, integer};
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (i_ < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_')) {
        ++i_;
      }
      return {Tok::Ident, s_.substr(start, i_ - start), start, false};
    }
    switch (c) {
      case '+': return single(Tok::Plus);
      case '-': return single(Tok::Minus);
      case '/': return single(Tok::Slash);
      case '^': return single(Tok::Caret);
      case '(': return single(Tok::LParen);
      case ')': return single(Tok::RParen);
      case ',': return single(Tok::Comma);
      case '*':
        if (i_ + 1 < s_.size() && s_[i_ + 1] == '*') {
          i_ += 2;
          return {Tok::Caret, s_.substr(start, 2), start, false};
        }
        return single(Tok::Star);
      default:
        throw ParseError(std::string("unexpected character '") + c + "'", start);
    }
  }

  std::string_view s_;
  std::size_t i_ = 0;
};

class Parser {
 public:
  Parser(std::string_view text, const OperatorBasis& basis, const ParseOptions& opts)
      : toks_(Lexer(text).run()), basis_(basis), opts_(opts) {}

  Term run() {
    if (peek().kind == Tok::End) throw ParseError("empty expression", 0);
    Term t = expr();
    if (peek().kind != Tok::End) {
      throw ParseError("unexpected '" + std::string(peek().text) + "'", peek().pos);
    }
    return t;
  }

  std::vector<double> hints() const {
    const bool any = std::any_of(hints_.begin(), hints_.end(), [](double v) { return !std::isnan(v); });
    if (!any || named_params_) return {};
    return hints_;
  }

 private:
  const Lexeme& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  const Lexeme& take() { return toks_[std::min(pos_++, toks_.size() - 1)]; }
  void expect(Tok k, const char* what) {
    if (peek().kind != k) {
      throw ParseError(std::string("expected ") + what, peek().pos);
    }
    ++pos_;
  }

  Term expr() {
    Term t = term();
    while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
      const Op op = take().kind == Tok::Plus ? Op::Add : Op::Sub;
      t = binary(op, t, term(), peek().pos);
    }
    return t;
  }

  Term term() {
    Term t = unary();
    while (peek().kind == Tok::Star || peek().kind == Tok::Slash) {
      const Op op = take().kind == Tok::Star ? Op::Mul : Op::Div;
      t = binary(op, t, unary(), peek().pos);
    }
    return t;
  }

  Term unary() {
    const Lexeme& l = peek();
    const bool opsym = l.kind == Tok::Plus || l.kind == Tok::Minus || l.kind == Tok::Star ||
                       l.kind == Tok::Slash || l.kind == Tok::Caret;
    if (opsym && peek(1).kind == Tok::LParen && has_top_level_comma(pos_ + 1)) {
      const Op op = l.kind == Tok::Plus    ? Op::Add
                    : l.kind == Tok::Minus ? Op::Sub
                    : l.kind == Tok::Star  ? Op::Mul
                    : l.kind == Tok::Slash ? Op::Div
                                           : Op::Pow;
      const std::size_t at = l.pos;
      ++pos_;
      auto args = call_args();
      return apply(op, std::move(args), at);
    }
    if (l.kind == Tok::Minus) {
      ++pos_;
      return make_unary(Op::Neg, unary());
    }
    if (l.kind == Tok::Plus) {
      ++pos_;
      return unary();
    }
    return power();
  }

  Term power() {
    Term base = primary();
    if (peek().kind == Tok::Caret) {
      const std::size_t at = take().pos;
      return binary(Op::Pow, base, unary(), at);
    }
    return base;
  }

  Term primary() {
    const Lexeme l = take();
    switch (l.kind) {
      case Tok::Number:
        return number(l);
      case Tok::Ident:
        if (peek().kind == Tok::LParen) {
          auto op = op_from_name(l.text);
          if (!op || arity(*op) == 0) {
            throw ParseError("unknown symbol '" + std::string(l.text) + "'", l.pos);
          }
          auto args = call_args();
          return apply(*op, std::move(args), l.pos);
        }
        return identifier(l);
      case Tok::LParen: {
        Term t = expr();
        expect(Tok::RParen, "')'");
        return t;
      }
      case Tok::End:
        throw ParseError("unexpected end of expression", l.pos);
      default:
        throw ParseError("unexpected '" + std::string(l.text) + "'", l.pos);
    }
  }

  std::vector<Term> call_args() {
    expect(Tok::LParen, "'('");
    std::vector<Term> args;
    if (peek().kind == Tok::RParen) {
      ++pos_;
      return args;
    }
    args.push_back(expr());
    while (peek().kind == Tok::Comma) {
      ++pos_;
      args.push_back(expr());
    }
    expect(Tok::RParen, "')'");
    return args;
  }

  bool has_top_level_comma(std::size_t lparen) const {
    int depth = 0;
    for (std::size_t i = lparen; i < toks_.size(); ++i) {
      switch (toks_[i].kind) {
        case Tok::LParen: ++depth; break;
        case Tok::RParen:
          if (--depth == 0) return false;
          break;
        case Tok::Comma:
          if (depth == 1) return true;
          break;
        case Tok::End: return false;
        default: break;
      }
    }
    return false;
  }

  void check_basis(Op op, std::size_t at) const {
    if (op == Op::Neg || arity(op) == 0) return;
    if (!basis_.contains(op)) {
      throw ParseError("operator '" + std::string(info(op).name) + "' is not in the basis", at);
    }
  }

  Term apply(Op op, std::vector<Term> args, std::size_t at) {
    if (static_cast<int>(args.size()) != arity(op)) {
      throw ParseError("'" + std::string(info(op).name) + "' takes " +
                           std::to_string(arity(op)) + " argument(s), got " +
                           std::to_string(args.size()),
                       at);
    }
    check_basis(op, at);
    if (args.size() == 1) return make_unary(op, std::move(args[0]));
    return make_binary(op, std::move(args[0]), std::move(args[1]));
  }

  Term binary(Op op, Term lhs, Term rhs, std::size_t at) {
    check_basis(op, at);
    return make_binary(op, std::move(lhs), std::move(rhs));
  }

  Term number(const Lexeme& l) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(l.text.data(), l.text.data() + l.text.size(), v);
    if (ec != std::errc() || p != l.text.data() + l.text.size()) {
      throw ParseError("bad number '" + std::string(l.text) + "'", l.pos);
    }
    if (l.integer && !opts_.integers_as_parameters) {
      if (v < 1.0) throw ParseError("integer constants must be >= 1", l.pos);
      if (v > static_cast<double>(std::numeric_limits<std::uint32_t>::max())) {
        throw ParseError("integer constant too large", l.pos);
      }
      return make_const(static_cast<std::uint32_t>(v));
    }
    return new_param(v);
  }

  Term new_param(double hint) {
    hints_.push_back(hint);
    return make_param();
  }

  Term identifier(const Lexeme& l) {
    const std::string name(l.text);
    if (!opts_.variables.empty()) {
      auto it = std::find(opts_.variables.begin(), opts_.variables.end(), name);
      if (it != opts_.variables.end()) {
        return make_var(static_cast<std::uint32_t>(it - opts_.variables.begin()));
      }
    } else if (name == "x") {
      return make_var(0);
    } else if (name.size() > 1 && name[0] == 'x' && all_digits(name.substr(1))) {
      const int idx = std::stoi(name.substr(1));
      if (idx > 10) throw ParseError("variable index out of range: " + name, l.pos);
      return make_var(static_cast<std::uint32_t>(idx));
    }
    if (name == "a") {
      hints_.push_back(std::numeric_limits<double>::quiet_NaN());
      return make_param();
    }
    if (name.size() > 1 && name[0] == 'a' && all_digits(name.substr(1))) {
      named_params_ = true;
      return make_param(static_cast<std::uint32_t>(std::stoul(name.substr(1))));
    }
    if (opts_.named_constants && (name == "pi" || name == "e")) {
      return new_param(name == "pi" ? std::numbers::pi : std::numbers::e);
    }
    throw ParseError("unknown symbol '" + name + "'", l.pos);
  }

  static bool all_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
  }

  std::vector<Lexeme> toks_;
  std::size_t pos_ = 0;
  const OperatorBasis& basis_;
  const ParseOptions& opts_;
  std::vector<double> hints_;
  bool named_params_ = false;
};

}  // namespace

Term parse_term(std::string_view text, const OperatorBasis& basis, const ParseOptions& opts,
                std::vector<double>* param_hints) {
  Parser p(text, basis, opts);
  Term t = p.run();
  if (param_hints) *param_hints = p.hints();
  return t;
}

ExprTree parse_expression(std::string_view text, const OperatorBasis& basis,
                          const ParseOptions& opts) {
  std::vector<double> hints;
  Term t = parse_term(text, basis, opts, &hints);
  return ExprTree::from_term(t, std::move(hints));
}

}  // namespace eqprior
