#include "parser.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>

namespace affext::detail {

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

}  // namespace

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  int depth = 0;
  std::size_t i = 0;
  auto single = [&](Tok kind) {
    out.push_back({kind, text.substr(i, 1), 0.0, i});
    ++i;
  };
  while (i < text.size()) {
    const char c = text[i];
    if (c == '#') {
      while (i < text.size() && text[i] != '\n') ++i;
      continue;
    }
    if (c == '\n') {
      if (depth == 0) out.push_back({Tok::Newline, text.substr(i, 1), 0.0, i});
      ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t j = i;
      while (j < text.size() && (std::isdigit(static_cast<unsigned char>(text[j])) || text[j] == '.')) ++j;
      if (j < text.size() && (text[j] == 'e' || text[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < text.size() && (text[k] == '+' || text[k] == '-')) ++k;
        if (k < text.size() && std::isdigit(static_cast<unsigned char>(text[k]))) {
          j = k;
          while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
        }
      }
      double value = 0.0;
      const auto* first = text.data() + i;
      const auto* last = text.data() + j;
      auto [ptr, ec] = std::from_chars(first, last, value);
      if (ec != std::errc{} || ptr != last) {
        throw ParseError(ParseError::Kind::Syntax, i,
                         "malformed number '" + std::string(text.substr(i, j - i)) + "'");
      }
      out.push_back({Tok::Number, text.substr(i, j - i), value, i});
      i = j;
      continue;
    }
    if (ident_start(c)) {
      std::size_t j = i;
      while (j < text.size() && ident_char(text[j])) ++j;
      out.push_back({Tok::Ident, text.substr(i, j - i), 0.0, i});
      i = j;
      continue;
    }
    switch (c) {
      case '+': single(Tok::Plus); break;
      case '-': single(Tok::Minus); break;
      case '*': single(Tok::Star); break;
      case '/': single(Tok::Slash); break;
      case '^': single(Tok::Caret); break;
      case '(': ++depth; single(Tok::LParen); break;
      case ')': --depth; single(Tok::RParen); break;
      case ',': single(Tok::Comma); break;
      case ';': single(Tok::Semicolon); break;
      case '=': single(Tok::Equals); break;
      default:
        throw ParseError(ParseError::Kind::Syntax, i,
                         std::string("unexpected character '") + c + "'");
    }
  }
  out.push_back({Tok::End, {}, 0.0, text.size()});
  return out;
}

Parser::Parser(std::string_view text, const SymbolTable& symbols, ParseOptions options)
    : tokens_(tokenize(text)), symbols_(symbols), options_(options) {}

Token Parser::next() {
  Token t = tokens_[cursor_];
  if (t.kind != Tok::End) ++cursor_;
  return t;
}

bool Parser::accept(Tok kind) {
  if (peek().kind != kind) return false;
  next();
  return true;
}

Token Parser::expect(Tok kind, const char* what) {
  if (peek().kind != kind) {
    fail(ParseError::Kind::Syntax, peek().pos, std::string("expected ") + what);
  }
  return next();
}

void Parser::skip_separators() {
  while (peek().kind == Tok::Semicolon || peek().kind == Tok::Newline) next();
}

void Parser::fail(ParseError::Kind kind, std::size_t pos, const std::string& message) const {
  throw ParseError(kind, pos, message);
}

Expr Parser::expression() { return sum(); }

Expr Parser::sum() {
  Expr acc = product();
  for (;;) {
    if (accept(Tok::Plus)) {
      acc = acc + product();
    } else if (accept(Tok::Minus)) {
      acc = acc - product();
    } else {
      return acc;
    }
  }
}

Expr Parser::product() {
  Expr acc = unary();
  for (;;) {
    if (accept(Tok::Star)) {
      acc = acc * unary();
    } else if (peek().kind == Tok::Slash) {
      const std::size_t pos = next().pos;
      Expr den = unary();
      if (den.is_zero()) fail(ParseError::Kind::Syntax, pos, "division by constant zero");
      acc = acc / den;
    } else {
      return acc;
    }
  }
}

Expr Parser::unary() {
  if (accept(Tok::Minus)) return -unary();
  if (accept(Tok::Plus)) return unary();
  return power();
}

Expr Parser::power() {
  Expr base = primary();
  if (peek().kind != Tok::Caret) return base;
  const std::size_t pos = next().pos;
  Expr exponent = unary();
  if (!exponent.is_constant()) {
    fail(ParseError::Kind::Syntax, pos, "exponent must be a constant expression");
  }
  return pow(base, exponent.value());
}

Expr Parser::primary() {
  const Token t = next();
  switch (t.kind) {
    case Tok::Number:
      return Expr(t.number);
    case Tok::LParen: {
      Expr inner = sum();
      expect(Tok::RParen, "')'");
      return inner;
    }
    case Tok::Ident: {
      const bool call = peek().kind == Tok::LParen;
      if (call) {
        Expr (*fn)(const Expr&) = nullptr;
        if (t.text == "sin") fn = &affext::sin;
        else if (t.text == "cos") fn = &affext::cos;
        else if (t.text == "exp") fn = &affext::exp;
        else if (t.text == "abs") {
          if (!options_.allow_abs) {
            fail(ParseError::Kind::Syntax, t.pos, "abs() is only accepted in functional evaluation");
          }
          fn = &affext::abs;
        }
        if (fn == nullptr) {
          fail(ParseError::Kind::UnknownSymbol, t.pos, "unknown function '" + std::string(t.text) + "'");
        }
        next();
        Expr arg = sum();
        expect(Tok::RParen, "')'");
        return fn(arg);
      }
      if (t.text == "pi") return Expr(std::numbers::pi);
      const auto found = symbols_.find(t.text);
      if (found.status == SymbolTable::Lookup::Found) return Expr::variable(found.slot);
      if (found.status == SymbolTable::Lookup::OutOfRange) {
        fail(ParseError::Kind::IndexOutOfRange, t.pos,
             "variable index out of range: '" + std::string(t.text) + "'");
      }
      fail(ParseError::Kind::UnknownSymbol, t.pos, "unknown symbol '" + std::string(t.text) + "'");
    }
    case Tok::End:
      fail(ParseError::Kind::Syntax, t.pos, "unexpected end of input");
    default:
      fail(ParseError::Kind::Syntax, t.pos, "unexpected token '" + std::string(t.text) + "'");
  }
}

}  // namespace affext::detail
