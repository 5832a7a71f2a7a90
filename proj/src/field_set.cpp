#include "affext/field_set.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <span>

#include "affext/errors.hpp"
#include "parser.hpp"

namespace affext {

FieldSet::FieldSet(std::size_t dim, std::vector<Field> fields, std::optional<bool> declared_bounded)
    : dim_(dim), fields_(std::move(fields)), declared_bounded_(declared_bounded) {
  if (dim_ == 0) throw InvalidArgument("state dimension must be positive");
  if (fields_.empty()) throw InvalidArgument("at least one vector field is required");
  if (fields_.size() > dim_) {
    throw InvalidArgument("number of fields m = " + std::to_string(fields_.size()) +
                          " exceeds state dimension n = " + std::to_string(dim_));
  }
  const std::size_t n = dim_;
  comp_.reserve(fields_.size() * n);
  jac_.reserve(fields_.size() * n * n);
  for (const Field& f : fields_) {
    if (f.size() != n) {
      throw InvalidArgument("field has " + std::to_string(f.size()) + " components, expected " +
                            std::to_string(n));
    }
    bool constant = true;
    for (const Expr& c : f) {
      if (c.slot_bound() > n) throw InvalidArgument("field component references x beyond n");
      if (c.uses_abs()) throw NonSmoothError("vector fields must be smooth (abs is not allowed)");
      comp_.emplace_back(c);
      for (std::size_t k = 0; k < n; ++k) {
        Expr d = c.derivative(k);
        jac_nonzero_.push_back(d.is_zero() ? 0 : 1);
        constant = constant && d.is_zero();
        jac_.emplace_back(d);
      }
    }
    constant_.push_back(constant);
  }
}

const Field& FieldSet::field(std::size_t i) const {
  if (i >= fields_.size()) throw InvalidArgument("field index out of range");
  return fields_[i];
}

void FieldSet::velocity(const double* x, const double* u, double* out) const {
  const std::size_t n = dim_;
  const std::span<const double> xs(x, n);
  std::fill(out, out + n, 0.0);
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    if (u[i] == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) out[j] += u[i] * comp_[i * n + j](xs);
  }
}

void FieldSet::frame_into(const double* x, double* out) const {
  const std::size_t n = dim_;
  const std::span<const double> xs(x, n);
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = comp_[i * n + j](xs);
  }
}

void FieldSet::jacobian_into(std::size_t i, const double* x, double* out) const {
  const std::size_t n = dim_;
  const std::span<const double> xs(x, n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t idx = (i * n + j) * n + k;
      out[k * n + j] = jac_nonzero_[idx] ? jac_[idx](xs) : 0.0;
    }
  }
}

void FieldSet::combined_jacobian(const double* x, const double* u, double* out) const {
  const std::size_t n = dim_;
  const std::span<const double> xs(x, n);
  std::fill(out, out + n * n, 0.0);
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    if (u[i] == 0.0 || constant_[i]) continue;
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t idx = (i * n + j) * n + k;
        if (jac_nonzero_[idx]) out[k * n + j] += u[i] * jac_[idx](xs);
      }
    }
  }
}

namespace {

void require_finite(const Eigen::Ref<const Matrix>& m, const char* what) {
  if (!m.allFinite()) throw NonFiniteError(std::string(what) + " evaluated to a non-finite value");
}

void require_dim(const VectorRef& x, std::size_t n) {
  if (static_cast<std::size_t>(x.size()) != n) {
    throw InvalidArgument("point has dimension " + std::to_string(x.size()) + ", expected " +
                          std::to_string(n));
  }
}

}  // namespace

Vector FieldSet::eval(std::size_t i, const VectorRef& x) const {
  if (i >= fields_.size()) throw InvalidArgument("field index out of range");
  require_dim(x, dim_);
  Vector xc = x;
  Vector out(dim_);
  const std::span<const double> xs(xc.data(), dim_);
  for (std::size_t j = 0; j < dim_; ++j) out[j] = comp_[i * dim_ + j](xs);
  require_finite(out, "vector field");
  return out;
}

Matrix FieldSet::jacobian(std::size_t i, const VectorRef& x) const {
  if (i >= fields_.size()) throw InvalidArgument("field index out of range");
  require_dim(x, dim_);
  Vector xc = x;
  Matrix out(dim_, dim_);
  jacobian_into(i, xc.data(), out.data());
  require_finite(out, "field Jacobian");
  return out;
}

Matrix FieldSet::frame(const VectorRef& x) const {
  require_dim(x, dim_);
  Vector xc = x;
  Matrix out(dim_, fields_.size());
  frame_into(xc.data(), out.data());
  require_finite(out, "vector field");
  return out;
}

std::string FieldSet::to_string() const {
  const SymbolTable sym = SymbolTable::state(dim_);
  std::string out;
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    out += "X" + std::to_string(i + 1) + " = (";
    for (std::size_t j = 0; j < dim_; ++j) {
      if (j) out += ", ";
      out += fields_[i][j].to_string(sym);
    }
    out += ")\n";
  }
  return out;
}

// ---------------------------------------------------------------------------

FieldSet parse_field_set(std::string_view text, std::size_t n, std::size_t m,
                         std::optional<bool> declared_bounded) {
  using detail::Tok;
  if (n == 0 || m == 0) throw InvalidArgument("n and m must be positive");
  const SymbolTable symbols = SymbolTable::state(n);
  detail::Parser p(text, symbols, {});
  std::vector<std::optional<Field>> slots(m);

  p.skip_separators();
  while (!p.at_end()) {
    const auto name = p.expect(Tok::Ident, "field name 'Xi'");
    const std::string_view id = name.text;
    std::size_t index = 0;
    const bool shaped = id.size() > 1 && id[0] == 'X' &&
                        std::all_of(id.begin() + 1, id.end(), [](char c) { return c >= '0' && c <= '9'; });
    if (!shaped) {
      p.fail(ParseError::Kind::UnknownSymbol, name.pos,
             "expected field name 'Xi', got '" + std::string(id) + "'");
    }
    index = std::stoul(std::string(id.substr(1)));
    if (index == 0 || index > m) {
      p.fail(ParseError::Kind::IndexOutOfRange, name.pos,
             "field index out of range: '" + std::string(id) + "' with m = " + std::to_string(m));
    }
    if (slots[index - 1]) {
      p.fail(ParseError::Kind::Structure, name.pos, "field '" + std::string(id) + "' defined twice");
    }
    p.expect(Tok::Equals, "'='");
    const auto open = p.expect(Tok::LParen, "'(' opening the component tuple");
    Field f;
    f.push_back(p.expression());
    while (p.accept(Tok::Comma)) f.push_back(p.expression());
    p.expect(Tok::RParen, "')' closing the component tuple");
    if (f.size() != n) {
      p.fail(ParseError::Kind::Structure, open.pos,
             "field '" + std::string(id) + "' has " + std::to_string(f.size()) +
                 " components, expected " + std::to_string(n));
    }
    slots[index - 1] = std::move(f);
    if (!p.at_end() && p.peek().kind != Tok::Semicolon && p.peek().kind != Tok::Newline) {
      p.fail(ParseError::Kind::Syntax, p.peek().pos, "expected ';' or newline between fields");
    }
    p.skip_separators();
  }

  std::vector<Field> fields;
  for (std::size_t i = 0; i < m; ++i) {
    if (!slots[i]) {
      throw ParseError(ParseError::Kind::Structure, text.size(),
                       "missing definition of field X" + std::to_string(i + 1));
    }
    fields.push_back(std::move(*slots[i]));
  }
  return FieldSet(n, std::move(fields), declared_bounded);
}

Vector eval_field(const FieldSet& fields, std::size_t i, const VectorRef& x) {
  return fields.eval(i, x);
}

Matrix jacobian(const FieldSet& fields, std::size_t i, const VectorRef& x) {
  return fields.jacobian(i, x);
}

Field lie_bracket(const Field& x, const Field& y, std::size_t node_cap) {
  if (x.size() != y.size()) throw InvalidArgument("Lie bracket of fields of different dimension");
  const std::size_t n = x.size();
  Field out(n);
  for (std::size_t j = 0; j < n; ++j) {
    // Summing the two halves separately makes [Y,X] the exact negation of [X,Y].
    Expr along_x, along_y;
    for (std::size_t k = 0; k < n; ++k) {
      along_x = along_x + y[j].derivative(k) * x[k];
      along_y = along_y + x[j].derivative(k) * y[k];
    }
    Expr acc = along_x - along_y;
    if (acc.size() > node_cap) {
      throw ExpressionGrowthError("Lie bracket component exceeds node cap of " +
                                  std::to_string(node_cap));
    }
    out[j] = std::move(acc);
  }
  return out;
}

Vector eval_field_expr(const Field& f, const VectorRef& x) {
  Vector xc = x;
  Vector out(f.size());
  for (std::size_t j = 0; j < f.size(); ++j) out[j] = f[j].evaluate({xc.data(), static_cast<std::size_t>(xc.size())});
  if (!out.allFinite()) throw NonFiniteError("vector field evaluated to a non-finite value");
  return out;
}

std::size_t numerical_rank(const Matrix& vectors, double tol) {
  if (vectors.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(vectors);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s[0] == 0.0) return 0;
  std::size_t r = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (s[k] > tol * s[0]) ++r;
  }
  return r;
}

LieRankResult lie_rank(const FieldSet& fields, const VectorRef& x, std::size_t max_depth,
                       double tol, std::size_t node_cap) {
  if (max_depth < 1) throw InvalidArgument("max_depth must be at least 1");
  const std::size_t n = fields.dim();
  if (static_cast<std::size_t>(x.size()) != n) throw InvalidArgument("point dimension mismatch");

  LieRankResult result;
  Matrix basis(n, 0);
  auto offer = [&](const Field& f) {
    if (result.rank == n) return;
    const Vector v = eval_field_expr(f, x);
    Matrix trial(n, basis.cols() + 1);
    trial << basis, v;
    if (numerical_rank(trial, tol) > static_cast<std::size_t>(basis.cols())) {
      basis = std::move(trial);
      result.rank = static_cast<std::size_t>(basis.cols());
      result.basis.push_back(v);
    }
  };
  auto is_zero_field = [](const Field& f) {
    return std::all_of(f.begin(), f.end(), [](const Expr& e) { return e.is_zero(); });
  };

  std::vector<Field> level = fields.fields();
  for (std::size_t depth = 1; depth <= max_depth; ++depth) {
    if (depth > 1) {
      std::vector<Field> next;
      for (const Field& xi : fields.fields()) {
        for (const Field& y : level) {
          Field b = lie_bracket(xi, y, node_cap);
          if (!is_zero_field(b)) next.push_back(std::move(b));
        }
      }
      level = std::move(next);
    }
    for (const Field& f : level) offer(f);
    result.rank_by_depth.push_back(result.rank);
    result.depth = depth;
    if (result.rank == n) {
      result.full_rank = true;
      break;
    }
    if (level.empty()) break;
  }
  result.message = result.full_rank
                       ? "Hormander condition verified at depth " + std::to_string(result.depth)
                       : "Hormander unverified at depth " + std::to_string(result.depth) +
                             ": rank " + std::to_string(result.rank) + " < " + std::to_string(n);
  return result;
}

double field_bound_spot_check(const FieldSet& fields, double radius, std::size_t samples,
                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-radius, radius);
  double worst = 0.0;
  Vector x(fields.dim());
  for (std::size_t s = 0; s < samples; ++s) {
    for (Eigen::Index j = 0; j < x.size(); ++j) x[j] = dist(rng);
    for (std::size_t i = 0; i < fields.count(); ++i) worst = std::max(worst, fields.eval(i, x).norm());
  }
  return worst;
}

}  // namespace affext
