#pragma once

#include <cctype>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "paralab/parallel.hpp"
#include "paralab/paraproducts.hpp"

namespace paralab {

enum class OpKind { Pi, PiStar, Lambda, R, Theta, LeftMult, Identity, Compose, Sum, Scale, Commutator, Adjoint };

class OperatorSpec;

struct OpNode {
  OpKind kind = OpKind::Identity;
  std::string symbol_name;                      // leaves with a symbol
  std::shared_ptr<const StepFunction> symbol;   // leaves with a symbol
  cplx factor{1.0, 0.0};                        // Scale
  std::vector<OperatorSpec> children;           // combinators
};

/// Symbolic linear operator on step functions. Every leaf acts by left
/// multiplications on the matrix values, so each operator has the form
/// T (x) id on the column index of f.
class OperatorSpec {
 public:
  OperatorSpec() : node_(std::make_shared<OpNode>()) {}
  explicit OperatorSpec(std::shared_ptr<const OpNode> node) : node_(std::move(node)) {}

  const OpNode& node() const { return *node_; }
  OpKind kind() const { return node_->kind; }

 private:
  std::shared_ptr<const OpNode> node_;
};

namespace op {

inline OperatorSpec leaf(OpKind kind, std::string name, StepFunction sym) {
  auto n = std::make_shared<OpNode>();
  n->kind = kind;
  n->symbol_name = std::move(name);
  n->symbol = std::make_shared<const StepFunction>(std::move(sym));
  return OperatorSpec(std::move(n));
}
inline OperatorSpec combine(OpKind kind, std::vector<OperatorSpec> children, cplx factor = 1.0) {
  auto n = std::make_shared<OpNode>();
  n->kind = kind;
  n->children = std::move(children);
  n->factor = factor;
  return OperatorSpec(std::move(n));
}

inline OperatorSpec pi(StepFunction b, std::string name = "b") { return leaf(OpKind::Pi, std::move(name), std::move(b)); }
inline OperatorSpec pi_star(StepFunction b, std::string name = "b") { return leaf(OpKind::PiStar, std::move(name), std::move(b)); }
inline OperatorSpec lambda(StepFunction b, std::string name = "b") { return leaf(OpKind::Lambda, std::move(name), std::move(b)); }
inline OperatorSpec r(StepFunction b, std::string name = "b") { return leaf(OpKind::R, std::move(name), std::move(b)); }
inline OperatorSpec theta(StepFunction b, std::string name = "b") { return leaf(OpKind::Theta, std::move(name), std::move(b)); }
inline OperatorSpec mult(StepFunction b, std::string name = "b") { return leaf(OpKind::LeftMult, std::move(name), std::move(b)); }
inline OperatorSpec identity() { return OperatorSpec(); }

/// compose(A, B) applies B first.
inline OperatorSpec compose(OperatorSpec a, OperatorSpec b) { return combine(OpKind::Compose, {std::move(a), std::move(b)}); }
inline OperatorSpec sum(OperatorSpec a, OperatorSpec b) { return combine(OpKind::Sum, {std::move(a), std::move(b)}); }
inline OperatorSpec scale(cplx c, OperatorSpec a) { return combine(OpKind::Scale, {std::move(a)}, c); }
inline OperatorSpec commutator(OperatorSpec a, OperatorSpec b) { return combine(OpKind::Commutator, {std::move(a), std::move(b)}); }
inline OperatorSpec adjoint(OperatorSpec a) { return combine(OpKind::Adjoint, {std::move(a)}); }

}  // namespace op

// Text form.

namespace detail {

inline const char* leaf_keyword(OpKind k) {
  switch (k) {
    case OpKind::Pi: return "pi";
    case OpKind::PiStar: return "pistar";
    case OpKind::Lambda: return "lambda";
    case OpKind::R: return "r";
    case OpKind::Theta: return "theta";
    case OpKind::LeftMult: return "mult";
    case OpKind::Identity: return "id";
    case OpKind::Compose: return "compose";
    case OpKind::Sum: return "sum";
    case OpKind::Scale: return "scale";
    case OpKind::Commutator: return "commutator";
    case OpKind::Adjoint: return "adjoint";
  }
  return "?";
}

inline std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace detail

inline std::string to_string(const OperatorSpec& spec) {
  const OpNode& n = spec.node();
  switch (n.kind) {
    case OpKind::Identity: return "id";
    case OpKind::Pi: case OpKind::PiStar: case OpKind::Lambda: case OpKind::R:
    case OpKind::Theta: case OpKind::LeftMult:
      return std::string(detail::leaf_keyword(n.kind)) + "(" + n.symbol_name + ")";
    case OpKind::Scale: {
      std::string s = "scale(" + detail::format_number(n.factor.real());
      if (n.factor.imag() != 0.0) s += ", " + detail::format_number(n.factor.imag());
      return s + ", " + to_string(n.children[0]) + ")";
    }
    default: {
      std::string s = std::string(detail::leaf_keyword(n.kind)) + "(";
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        if (i) s += ", ";
        s += to_string(n.children[i]);
      }
      return s + ")";
    }
  }
}

/// Named symbols for the text form; `name*` refers to the pointwise adjoint.
using SymbolTable = std::map<std::string, StepFunction, std::less<>>;

class SpecParseError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

class SpecParser {
 public:
  SpecParser(std::string_view text, const SymbolTable& symbols) : s_(text), symbols_(symbols) {}

  OperatorSpec parse() {
    OperatorSpec out = expr();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    return out;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw SpecParseError("operator spec: " + what + " at offset " + std::to_string(pos_) + " in '" +
                         std::string(s_) + "'");
  }
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }
  std::string ident() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    if (start == pos_) fail("expected identifier");
    return std::string(s_.substr(start, pos_ - start));
  }
  double number() {
    skip_ws();
    const std::string rest(s_.substr(pos_));
    char* end = nullptr;
    const double v = std::strtod(rest.c_str(), &end);
    if (end == rest.c_str()) fail("expected number");
    pos_ += static_cast<std::size_t>(end - rest.c_str());
    return v;
  }
  std::pair<std::string, StepFunction> symbol() {
    std::string name = ident();
    const bool star = accept('*');
    const auto it = symbols_.find(name);
    if (it == symbols_.end()) fail("unknown symbol '" + name + "'");
    if (star) return {name + "*", it->second.adjoint()};
    return {name, it->second};
  }

  OperatorSpec expr() {
    std::string kw = ident();
    for (char& c : kw) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (kw == "id" || kw == "identity") {
      if (accept('(')) expect(')');
      return op::identity();
    }
    expect('(');
    OperatorSpec out;
    if (kw == "pi" || kw == "pistar" || kw == "pi_star" || kw == "lambda" || kw == "r" || kw == "theta" ||
        kw == "mult" || kw == "leftmult") {
      auto [name, sym] = symbol();
      const OpKind k = kw == "pi" ? OpKind::Pi
                       : (kw == "pistar" || kw == "pi_star") ? OpKind::PiStar
                       : kw == "lambda" ? OpKind::Lambda
                       : kw == "r" ? OpKind::R
                       : kw == "theta" ? OpKind::Theta
                                       : OpKind::LeftMult;
      out = op::leaf(k, std::move(name), std::move(sym));
    } else if (kw == "scale") {
      const double re = number();
      expect(',');
      skip_ws();
      double im = 0.0;
      if (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '-' ||
                               s_[pos_] == '+' || s_[pos_] == '.')) {
        im = number();
        expect(',');
      }
      out = op::scale({re, im}, expr());
    } else if (kw == "adjoint") {
      out = op::adjoint(expr());
    } else if (kw == "compose" || kw == "sum") {
      std::vector<OperatorSpec> items{expr()};
      while (accept(',')) items.push_back(expr());
      if (items.size() < 2) fail(kw + " needs at least two operands");
      // Fold right: compose(A, B, C) = A o (B o C).
      out = items.back();
      for (std::size_t i = items.size() - 1; i-- > 0;)
        out = kw == "compose" ? op::compose(items[i], out) : op::sum(items[i], out);
    } else if (kw == "commutator") {
      OperatorSpec a = expr();
      expect(',');
      out = op::commutator(std::move(a), expr());
    } else {
      fail("unknown operator '" + kw + "'");
    }
    expect(')');
    return out;
  }

  std::string_view s_;
  const SymbolTable& symbols_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses e.g. "commutator(pi(a), mult(b))", "theta(b)", "adjoint(pi(b*))".
inline OperatorSpec parse_operator_spec(std::string_view text, const SymbolTable& symbols) {
  return detail::SpecParser(text, symbols).parse();
}

// Evaluation.

namespace detail {

inline void collect_symbols(const OperatorSpec& s, std::vector<const StepFunction*>& out) {
  const OpNode& n = s.node();
  if (n.symbol) out.push_back(n.symbol.get());
  for (const OperatorSpec& c : n.children) collect_symbols(c, out);
}

}  // namespace detail

/// Checks that all symbols share `lattice` and are scalar or m x m.
inline void validate(const OperatorSpec& spec, const Lattice& lattice, std::size_t m) {
  std::vector<const StepFunction*> syms;
  detail::collect_symbols(spec, syms);
  for (const StepFunction* s : syms) {
    if (!(s->lattice() == lattice)) throw std::invalid_argument("operator spec: symbols live on different lattices");
    if (s->dim() != 1 && s->dim() != m)
      throw std::invalid_argument("operator spec: symbol dimension " + std::to_string(s->dim()) +
                                  " incompatible with m = " + std::to_string(m));
  }
}

/// Lattice and matrix dimension implied by the symbols (largest symbol dimension).
inline std::pair<Lattice, std::size_t> infer_shape(const OperatorSpec& spec) {
  std::vector<const StepFunction*> syms;
  detail::collect_symbols(spec, syms);
  if (syms.empty()) throw std::invalid_argument("operator spec: no symbols to infer the shape from");
  std::size_t m = 1;
  for (const StepFunction* s : syms) m = std::max(m, s->dim());
  validate(spec, syms.front()->lattice(), m);
  return {syms.front()->lattice(), m};
}

inline StepFunction apply_adjoint(const OperatorSpec& spec, const StepFunction& f);

inline StepFunction apply(const OperatorSpec& spec, const StepFunction& f) {
  const OpNode& n = spec.node();
  switch (n.kind) {
    case OpKind::Identity: return f;
    case OpKind::Pi: return pi(*n.symbol, f);
    case OpKind::PiStar: return pi_star(*n.symbol, f);
    case OpKind::Lambda: return lambda(*n.symbol, f);
    case OpKind::R: return r_op(*n.symbol, f);
    case OpKind::Theta: return theta(*n.symbol, f);
    case OpKind::LeftMult: return (*n.symbol) * f;
    case OpKind::Compose: return apply(n.children[0], apply(n.children[1], f));
    case OpKind::Sum: return apply(n.children[0], f) + apply(n.children[1], f);
    case OpKind::Scale: return apply(n.children[0], f) * n.factor;
    case OpKind::Commutator:
      return apply(n.children[0], apply(n.children[1], f)) - apply(n.children[1], apply(n.children[0], f));
    case OpKind::Adjoint: return apply_adjoint(n.children[0], f);
  }
  throw std::logic_error("apply: unknown node");
}

/// Applies the L_2(S_2^m) adjoint of `spec` using closed forms per leaf:
///   pi_b^* = pistar_b, Lambda_b^* = pi_{b*} + Lambda_{b*} - pi_b^*, R_b^* = R_{b*}, M_b^* = M_{b*}.
inline StepFunction apply_adjoint(const OperatorSpec& spec, const StepFunction& f) {
  const OpNode& n = spec.node();
  switch (n.kind) {
    case OpKind::Identity: return f;
    case OpKind::Pi: return pi_star(*n.symbol, f);
    case OpKind::PiStar: return pi(*n.symbol, f);
    case OpKind::Lambda: {
      const StepFunction bs = n.symbol->adjoint();
      return pi(bs, f) + lambda(bs, f) - pi_star(*n.symbol, f);
    }
    case OpKind::R: return r_op(n.symbol->adjoint(), f);
    case OpKind::Theta: {
      const StepFunction bs = n.symbol->adjoint();
      return pi(bs, f) + lambda(bs, f);
    }
    case OpKind::LeftMult: return n.symbol->adjoint() * f;
    case OpKind::Compose: return apply_adjoint(n.children[1], apply_adjoint(n.children[0], f));
    case OpKind::Sum: return apply_adjoint(n.children[0], f) + apply_adjoint(n.children[1], f);
    case OpKind::Scale: return apply_adjoint(n.children[0], f) * std::conj(n.factor);
    case OpKind::Commutator:
      return apply_adjoint(n.children[1], apply_adjoint(n.children[0], f)) -
             apply_adjoint(n.children[0], apply_adjoint(n.children[1], f));
    case OpKind::Adjoint: return apply(n.children[0], f);
  }
  throw std::logic_error("apply_adjoint: unknown node");
}

// Dense assembly.

/// Dense complex matrix, column-major.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), a_(rows * cols) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  cplx& operator()(std::size_t i, std::size_t j) { return a_[j * rows_ + i]; }
  const cplx& operator()(std::size_t i, std::size_t j) const { return a_[j * rows_ + i]; }
  std::span<cplx> column(std::size_t j) { return {a_.data() + j * rows_, rows_}; }
  std::span<const cplx> column(std::size_t j) const { return {a_.data() + j * rows_, rows_}; }

  std::vector<cplx> apply(std::span<const cplx> x) const {
    std::vector<cplx> y(rows_);
    for (std::size_t j = 0; j < cols_; ++j) {
      const cplx xj = x[j];
      if (xj == cplx{}) continue;
      const cplx* col = a_.data() + j * rows_;
      for (std::size_t i = 0; i < rows_; ++i) y[i] += col[i] * xj;
    }
    return y;
  }
  std::vector<cplx> apply_adjoint(std::span<const cplx> y) const {
    std::vector<cplx> x(cols_);
    for (std::size_t j = 0; j < cols_; ++j) {
      const cplx* col = a_.data() + j * rows_;
      cplx s = 0.0;
      for (std::size_t i = 0; i < rows_; ++i) s += std::conj(col[i]) * y[i];
      x[j] = s;
    }
    return x;
  }

  DenseMatrix adjoint() const {
    DenseMatrix out(cols_, rows_);
    for (std::size_t j = 0; j < cols_; ++j)
      for (std::size_t i = 0; i < rows_; ++i) out(j, i) = std::conj((*this)(i, j));
    return out;
  }

  double max_abs() const {
    double r = 0.0;
    for (const cplx& z : a_) r = std::max(r, std::abs(z));
    return r;
  }
  double frobenius() const {
    double s = 0.0;
    for (const cplx& z : a_) s += std::norm(z);
    return std::sqrt(s);
  }

  friend DenseMatrix operator-(const DenseMatrix& x, const DenseMatrix& y) {
    if (x.rows_ != y.rows_ || x.cols_ != y.cols_) throw std::invalid_argument("DenseMatrix: shape mismatch");
    DenseMatrix out = x;
    for (std::size_t i = 0; i < out.a_.size(); ++i) out.a_[i] -= y.a_[i];
    return out;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cplx> a_;
};

/// Orthonormal coordinates of f: entry (atom, p, q) -> mu^{1/2} f(atom)_{pq},
/// atoms-major, matrix units e_{pq} minor.
inline std::vector<cplx> hs_coordinates(const StepFunction& f) {
  const std::size_t m = f.dim();
  const double s = std::sqrt(f.lattice().atom_measure());
  std::vector<cplx> out;
  out.reserve(f.num_atoms() * m * m);
  for (const CMatrix& v : f.values())
    for (const cplx& z : v.data()) out.push_back(z * s);
  return out;
}

inline StepFunction from_hs_coordinates(const Lattice& lat, std::size_t m, std::span<const cplx> x) {
  if (x.size() != lat.num_atoms() * m * m) throw std::invalid_argument("from_hs_coordinates: size mismatch");
  const double s = 1.0 / std::sqrt(lat.atom_measure());
  std::vector<CMatrix> v;
  v.reserve(lat.num_atoms());
  for (std::uint64_t a = 0; a < lat.num_atoms(); ++a) {
    CMatrix c(m);
    for (std::size_t e = 0; e < m * m; ++e) c.data()[e] = x[a * m * m + e] * s;
    v.push_back(std::move(c));
  }
  return StepFunction(lat, std::move(v));
}

/// Full matrix of `spec` on L_2(S_2^m), size (d^N m^2)^2. Columns are computed
/// independently and written to disjoint slots.
inline DenseMatrix assemble(const OperatorSpec& spec, const Lattice& lat, std::size_t m) {
  validate(spec, lat, m);
  const std::size_t dim = lat.num_atoms() * m * m;
  DenseMatrix out(dim, dim);
  const double s = 1.0 / std::sqrt(lat.atom_measure());
  parallel_for(dim, [&](std::size_t c) {
    StepFunction e(lat, m);
    e[c / (m * m)].data()[c % (m * m)] = s;
    const std::vector<cplx> col = hs_coordinates(apply(spec, e));
    std::copy(col.begin(), col.end(), out.column(c).begin());
  });
  return out;
}

inline DenseMatrix assemble(const OperatorSpec& spec) {
  const auto [lat, m] = infer_shape(spec);
  return assemble(spec, lat, m);
}

/// Matrix T of size (d^N m)^2 with spec = T (x) id_m on L_2(S_2^m): the action
/// on functions whose only nonzero column is the first one. Coordinates are
/// (atom, row) pairs, atoms-major.
inline DenseMatrix assemble_columnwise(const OperatorSpec& spec, const Lattice& lat, std::size_t m) {
  validate(spec, lat, m);
  const std::size_t dim = lat.num_atoms() * m;
  DenseMatrix out(dim, dim);
  const double s = 1.0 / std::sqrt(lat.atom_measure());
  const double t = std::sqrt(lat.atom_measure());
  parallel_for(dim, [&](std::size_t c) {
    StepFunction e(lat, m);
    e[c / m](c % m, 0) = s;
    const StepFunction y = apply(spec, e);
    auto col = out.column(c);
    for (std::size_t a = 0; a < y.num_atoms(); ++a)
      for (std::size_t p = 0; p < m; ++p) col[a * m + p] = y[a](p, 0) * t;
  });
  return out;
}

}  // namespace paralab
