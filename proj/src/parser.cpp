#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "lfpw/error.hpp"
#include "lfpw/syntax.hpp"

namespace lfpw {

namespace {

enum class Tok { End, Ident, LParen, RParen, LBracket, RBracket, Comma, Dot, Bang, Amp, Bar, Arrow, Eq, Less };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  std::size_t pos = 0;
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\''; }
bool is_lower(const std::string& s) { return !s.empty() && (std::islower(static_cast<unsigned char>(s[0])) || s[0] == '_'); }
bool is_upper(const std::string& s) { return !s.empty() && std::isupper(static_cast<unsigned char>(s[0])); }

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    Token t;
    t.pos = i;
    if (ident_start(c)) {
      std::size_t j = i;
      while (j < text.size() && ident_char(text[j])) ++j;
      t.kind = Tok::Ident;
      t.text = std::string(text.substr(i, j - i));
      i = j;
      out.push_back(std::move(t));
      continue;
    }
    switch (c) {
      case '(': t.kind = Tok::LParen; break;
      case ')': t.kind = Tok::RParen; break;
      case '[': t.kind = Tok::LBracket; break;
      case ']': t.kind = Tok::RBracket; break;
      case ',': t.kind = Tok::Comma; break;
      case '.': t.kind = Tok::Dot; break;
      case '!': t.kind = Tok::Bang; break;
      case '&': t.kind = Tok::Amp; break;
      case '|': t.kind = Tok::Bar; break;
      case '=': t.kind = Tok::Eq; break;
      case '<': t.kind = Tok::Less; break;
      case '-':
        if (i + 1 < text.size() && text[i + 1] == '>') {
          t.kind = Tok::Arrow;
          ++i;
          break;
        }
        throw ParseError("expected '->'", i);
      default:
        throw ParseError(std::string("unexpected character '") + c + "'", i);
    }
    ++i;
    out.push_back(std::move(t));
  }
  Token end;
  end.pos = text.size();
  out.push_back(end);
  return out;
}

class Parser {
 public:
  Parser(std::string_view text, const MacroTable* macros) : toks_(tokenize(text)), macros_(macros) {}

  FormulaPtr parse_all() {
    FormulaPtr f = implication();
    if (peek().kind != Tok::End) fail("unexpected trailing input");
    return f;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    const std::size_t i = std::min(idx_ + ahead, toks_.size() - 1);
    return toks_[i];
  }
  Token next() { return toks_[idx_ < toks_.size() - 1 ? idx_++ : idx_]; }
  bool accept(Tok k) {
    if (peek().kind != k) return false;
    ++idx_;
    return true;
  }
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, peek().pos); }
  void expect(Tok k, const char* what) {
    if (!accept(k)) fail(std::string("expected ") + what);
  }

  std::string variable() {
    if (peek().kind != Tok::Ident || !is_lower(peek().text) || peek().text == "true" || peek().text == "false") {
      fail("expected a variable");
    }
    return next().text;
  }

  std::vector<std::string> varlist() {
    expect(Tok::LParen, "'('");
    std::vector<std::string> vars;
    if (accept(Tok::RParen)) return vars;
    vars.push_back(variable());
    while (accept(Tok::Comma)) vars.push_back(variable());
    expect(Tok::RParen, "')'");
    return vars;
  }

  FormulaPtr implication() {
    FormulaPtr lhs = disjunction_();
    if (accept(Tok::Arrow)) return Formula::implies(lhs, implication());
    return lhs;
  }

  FormulaPtr disjunction_() {
    FormulaPtr acc = conjunction_();
    while (accept(Tok::Bar)) acc = Formula::disj(acc, conjunction_());
    return acc;
  }

  FormulaPtr conjunction_() {
    FormulaPtr acc = unary();
    while (accept(Tok::Amp)) acc = Formula::conj(acc, unary());
    return acc;
  }

  bool at_quantifier() const {
    const Token& t = peek();
    if (t.kind != Tok::Ident || (t.text != "A" && t.text != "E")) return false;
    const Token& u = peek(1);
    return u.kind == Tok::Ident && is_lower(u.text);
  }

  FormulaPtr unary() {
    if (accept(Tok::Bang)) return Formula::negation(unary());
    if (at_quantifier()) {
      const bool universal = next().text == "A";
      std::string var = variable();
      accept(Tok::Dot);
      FormulaPtr body = implication();
      return universal ? Formula::forall(std::move(var), body) : Formula::exists(std::move(var), body);
    }
    return primary();
  }

  FormulaPtr primary() {
    const Token& t = peek();
    if (t.kind == Tok::LParen) {
      next();
      FormulaPtr f = implication();
      expect(Tok::RParen, "')'");
      return f;
    }
    if (t.kind == Tok::LBracket) return lfp_node();
    if (t.kind != Tok::Ident) fail("expected a formula");
    if (t.text == "true") {
      next();
      return Formula::truth(true);
    }
    if (t.text == "false") {
      next();
      return Formula::truth(false);
    }
    if (is_upper(t.text)) {
      std::string name = next().text;
      if (peek().kind != Tok::LParen) fail("expected '(' after relation symbol " + name);
      return Formula::atom(std::move(name), varlist());
    }
    // lowercase: macro call or variable comparison
    if (peek(1).kind == Tok::LParen) {
      const std::size_t pos = t.pos;
      std::string name = next().text;
      std::vector<std::string> args = varlist();
      if (macros_ == nullptr || macros_->find(name) == nullptr) throw ParseError("unknown macro " + name, pos);
      try {
        return macros_->expand(name, args);
      } catch (const SignatureError& e) {
        throw ParseError(e.what(), pos);
      }
    }
    std::string lhs = variable();
    if (accept(Tok::Eq)) return Formula::equal(std::move(lhs), variable());
    if (accept(Tok::Less)) return Formula::atom("<", {std::move(lhs), variable()});
    fail("expected '=' or '<' after variable " + lhs);
  }

  FormulaPtr lfp_node() {
    expect(Tok::LBracket, "'['");
    if (peek().kind != Tok::Ident || peek().text != "lfp") fail("expected 'lfp'");
    next();
    if (peek().kind != Tok::Ident || !is_upper(peek().text)) fail("expected a relation variable");
    std::string relvar = next().text;
    std::vector<std::string> bound = varlist();
    accept(Tok::Dot);
    FormulaPtr body = implication();
    expect(Tok::RBracket, "']'");
    if (peek().kind != Tok::LParen) fail("expected '(' applying the fixed point");
    std::vector<std::string> args = varlist();
    return Formula::lfp(std::move(relvar), std::move(bound), body, std::move(args));
  }

  std::vector<Token> toks_;
  std::size_t idx_ = 0;
  const MacroTable* macros_;
};

}  // namespace

FormulaPtr parse_formula(std::string_view text, const Signature& sig, const ParseOptions& options) {
  Parser p(text, options.macros);
  FormulaPtr f = p.parse_all();
  if (options.check_signature) {
    validate(f, sig, options.free_relation_variables);
  } else {
    check_lfp_nodes(f);
  }
  return f;
}

}  // namespace lfpw
