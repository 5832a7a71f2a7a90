#pragma once

// Recursive-descent parser shared by expressions, field sets and scenarios.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "affext/errors.hpp"
#include "affext/expr.hpp"

namespace affext::detail {

enum class Tok {
  Number, Ident, Plus, Minus, Star, Slash, Caret,
  LParen, RParen, Comma, Semicolon, Newline, Equals, End
};

struct Token {
  Tok kind;
  std::string_view text;
  double number = 0.0;
  std::size_t pos = 0;
};

/// Newlines inside parentheses are treated as whitespace.
std::vector<Token> tokenize(std::string_view text);

class Parser {
public:
  Parser(std::string_view text, const SymbolTable& symbols, ParseOptions options);

  Expr expression();

  const Token& peek() const { return tokens_[cursor_]; }
  Token next();
  bool accept(Tok kind);
  Token expect(Tok kind, const char* what);
  void skip_separators();
  bool at_end() const { return peek().kind == Tok::End; }

  [[noreturn]] void fail(ParseError::Kind kind, std::size_t pos, const std::string& message) const;

private:
  Expr sum();
  Expr product();
  Expr unary();
  Expr power();
  Expr primary();

  std::vector<Token> tokens_;
  std::size_t cursor_ = 0;
  const SymbolTable& symbols_;
  ParseOptions options_;
};

}  // namespace affext::detail
