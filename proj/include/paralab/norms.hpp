#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "paralab/paraproducts.hpp"

namespace paralab {

enum class BmoVariant { M, so, c, r, cr };

inline const char* to_string(BmoVariant v) {
  switch (v) {
    case BmoVariant::M: return "M";
    case BmoVariant::so: return "so";
    case BmoVariant::c: return "c";
    case BmoVariant::r: return "r";
    case BmoVariant::cr: return "cr";
  }
  return "?";
}

struct NormParams {
  double p = 2.0;
  BmoVariant variant = BmoVariant::M;

  /// p' = p / (p - 1), with 1' = infinity and infinity' = 1.
  double conjugate() const {
    if (p == 1.0) return kInf;
    if (std::isinf(p)) return 1.0;
    return p / (p - 1.0);
  }
};

inline double conjugate_exponent(double p) { return NormParams{p}.conjugate(); }

/// (int tau|f|^p dmu)^{1/p}; p = infinity gives the max over atoms of the spectral norm.
inline double lp_norm(const StepFunction& f, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("lp_norm: p must be >= 1");
  std::vector<double> atom_norms;
  atom_norms.reserve(f.num_atoms());
  for (const CMatrix& v : f.values()) atom_norms.push_back(schatten_norm(v, p));
  const double top = *std::max_element(atom_norms.begin(), atom_norms.end());
  if (std::isinf(p) || top == 0.0) return top;
  const double mu = f.lattice().atom_measure();
  double acc = 0.0;
  for (double s : atom_norms) acc += mu * std::pow(s / top, p);
  return top * std::pow(acc, 1.0 / p);
}

// BMO family. Every sup over intervals includes the root [0,1).

/// sup_I ( (1/|I|) int_I ||b - b_I||_M^2 )^{1/2}
inline double bmo_M(const StepFunction& b) {
  const Lattice& lat = b.lattice();
  double best = 0.0;
  for (int n = 0; n < lat.depth(); ++n) {
    const std::vector<CMatrix> avg = level_averages(b, n);
    const std::uint64_t width = lat.num_atoms() / avg.size();
    for (std::uint64_t k = 0; k < avg.size(); ++k) {
      double acc = 0.0;
      for (std::uint64_t a = k * width; a < (k + 1) * width; ++a) {
        const double s = spectral_norm(b[a] - avg[k]);
        acc += s * s;
      }
      best = std::max(best, acc / static_cast<double>(width));
    }
  }
  return std::sqrt(best);
}

/// sup_{|x|<=1} sup_I ( (1/|I|) int_I |(b - b_I) x|^2 )^{1/2}, computed as
/// sup_I lambda_max( (1/|I|) int_I (b - b_I)^*(b - b_I) )^{1/2}.
inline double bmo_so(const StepFunction& b) {
  const Lattice& lat = b.lattice();
  double best = 0.0;
  for (int n = 0; n < lat.depth(); ++n) {
    const std::vector<CMatrix> avg = level_averages(b, n);
    const std::uint64_t width = lat.num_atoms() / avg.size();
    for (std::uint64_t k = 0; k < avg.size(); ++k) {
      CMatrix acc(b.dim());
      for (std::uint64_t a = k * width; a < (k + 1) * width; ++a) {
        const CMatrix dev = b[a] - avg[k];
        acc += adjoint_times(dev, dev);
      }
      acc *= 1.0 / static_cast<double>(width);
      best = std::max(best, psd_max_eig(acc));
    }
  }
  return std::sqrt(std::max(best, 0.0));
}

/// sup_{1<=m<=N} || E_m sum_{k=m}^N |d_k b|^2 ||_M^{1/2}
inline double bmo_column(const StepFunction& b) {
  const Lattice& lat = b.lattice();
  const auto db = martingale_differences(b);
  StepFunction tail(lat, b.dim());
  double best = 0.0;
  for (int m = lat.depth(); m >= 1; --m) {
    const StepFunction& dm = db[static_cast<std::size_t>(m)];
    tail += dm.adjoint() * dm;
    for (const CMatrix& v : level_averages(tail, m)) best = std::max(best, psd_max_eig(v));
  }
  return std::sqrt(std::max(best, 0.0));
}

inline double bmo_row(const StepFunction& b) { return bmo_column(b.adjoint()); }
inline double bmo_cr(const StepFunction& b) { return std::max(bmo_column(b), bmo_row(b)); }

inline double bmo_norm(const StepFunction& b, BmoVariant v) {
  switch (v) {
    case BmoVariant::M: return bmo_M(b);
    case BmoVariant::so: return bmo_so(b);
    case BmoVariant::c: return bmo_column(b);
    case BmoVariant::r: return bmo_row(b);
    case BmoVariant::cr: return bmo_cr(b);
  }
  throw std::logic_error("bmo_norm: unknown variant");
}

// Square functions.

/// S(g)^2 = sum_k |d_k g|^2
inline StepFunction square_fn_squared(const StepFunction& g) {
  const auto dg = martingale_differences(g);
  StepFunction out(g.lattice(), g.dim());
  for (int k = 1; k <= g.lattice().depth(); ++k) out += dg[k].adjoint() * dg[k];
  return out;
}

/// s(g)^2 = sum_k E_{k-1} |d_k g|^2
inline StepFunction cond_square_fn_squared(const StepFunction& g) {
  const auto dg = martingale_differences(g);
  StepFunction out(g.lattice(), g.dim());
  for (int k = 1; k <= g.lattice().depth(); ++k) out += cond_expect(dg[k].adjoint() * dg[k], k - 1);
  return out;
}

inline StepFunction atomwise_sqrt(const StepFunction& h) {
  std::vector<CMatrix> v;
  v.reserve(h.num_atoms());
  for (const CMatrix& x : h.values()) v.push_back(psd_sqrt(x));
  return StepFunction(h.lattice(), std::move(v));
}

/// Martingale square function S(g), PSD-valued.
inline StepFunction square_fn(const StepFunction& g) { return atomwise_sqrt(square_fn_squared(g)); }

/// Conditional square function s(g), PSD-valued.
inline StepFunction cond_square_fn(const StepFunction& g) { return atomwise_sqrt(cond_square_fn_squared(g)); }

/// ||g||_{h_{p,c}} = ||s(g)||_p
inline double hpc_norm(const StepFunction& g, double p) {
  if (!(p >= 1.0) || std::isinf(p)) throw std::invalid_argument("hpc_norm: p must lie in [1, infinity)");
  return lp_norm(cond_square_fn(g), p);
}

/// ||g||_{H_1^max} = int sup_m ||E_m g||_{S_1} dmu
inline double h1max_norm(const StepFunction& g) {
  const auto e = martingale(g);
  const double mu = g.lattice().atom_measure();
  double acc = 0.0;
  for (std::size_t a = 0; a < g.num_atoms(); ++a) {
    double best = 0.0;
    for (const StepFunction& em : e) best = std::max(best, schatten_norm(em[a], 1.0));
    acc += mu * best;
  }
  return acc;
}

/// Closed form of s((Lambda_b - (pi_{b*})^*) f)^2:
///   sum_{I,l} |C_{I,l}|^2 1_I / |I|^2,  C_{I,l} = sum_{i+j = l mod d} <h_I^i,b><h_I^j,f>.
inline StepFunction cond_square_closed_form(const StepFunction& b, const StepFunction& f) {
  detail::require_compatible(b, f, "cond_square_closed_form");
  const Lattice& lat = f.lattice();
  const int d = lat.d();
  const HaarCoefficients cb = haar_analyze(b);
  const HaarCoefficients cf = haar_analyze(f);
  StepFunction out(lat, std::max(b.dim(), f.dim()));
  for (int n = 0; n < lat.depth(); ++n) {
    const double inv_len = static_cast<double>(lat.power(n));
    for (const Interval& I : lat.intervals(n)) {
      CMatrix acc(out.dim());
      for (int l = 1; l < d; ++l) {
        CMatrix c(out.dim());
        for (int i = 1; i < d; ++i)
          for (int j = 1; j < d; ++j)
            if (remainder_1d(i + j, d) == l) c += detail::mul_bc(cb.at(I, i), cf.at(I, j));
        acc += adjoint_times(c, c);
      }
      acc *= inv_len * inv_len;
      const AtomRange r = lat.atom_range(I);
      for (std::uint64_t a = r.begin; a < r.end; ++a) out[a] += acc;
    }
  }
  return out;
}

/// Operator families indexed by (interval, i) for the sum-of-squares bound.
using OperatorFamily = std::vector<std::vector<CMatrix>>;

/// sum_I |sum_i a_{I,i} b_{I,i}|^2
inline CMatrix aibi_lhs(const OperatorFamily& a, const OperatorFamily& b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("aibi: family size mismatch");
  CMatrix out(a.front().front().dim());
  for (std::size_t I = 0; I < a.size(); ++I) {
    CMatrix s(out.dim());
    for (std::size_t i = 0; i < a[I].size(); ++i) s += a[I][i] * b[I][i];
    out += adjoint_times(s, s);
  }
  return out;
}

/// (sup_I sum_i ||a_{I,i}||^2) sum_J sum_j b_{J,j}^* b_{J,j}
inline CMatrix aibi_rhs(const OperatorFamily& a, const OperatorFamily& b) {
  double sup = 0.0;
  for (const auto& row : a) {
    double s = 0.0;
    for (const CMatrix& x : row) {
      const double n = spectral_norm(x);
      s += n * n;
    }
    sup = std::max(sup, s);
  }
  CMatrix out(b.front().front().dim());
  for (const auto& row : b)
    for (const CMatrix& x : row) out += adjoint_times(x, x);
  out *= sup;
  return out;
}

struct MaximalTailStatistic {
  double numerator = 0.0;  // || sup_m || E_m(sum_{j>m} d_j a d_j f) ||_{S_p} ||_{L_p}
  double bmo_a = 0.0;
  double f_norm = 0.0;
  double ratio = 0.0;
};

/// Maximal tail average with X = S_p^m, normalized by bmo_M(a) and the L_p norm of f. No bound is asserted.
inline MaximalTailStatistic maximal_tail_statistic(const StepFunction& a, const StepFunction& f, double p) {
  detail::require_scalar(a, "maximal_tail_statistic");
  if (!(p > 1.0) || std::isinf(p)) throw std::invalid_argument("maximal_tail_statistic: p must lie in (1, infinity)");
  const Lattice& lat = f.lattice();
  const auto da = martingale_differences(a);
  const auto df = martingale_differences(f);
  std::vector<double> sup(f.num_atoms(), 0.0);
  StepFunction tail(lat, f.dim());
  for (int m = lat.depth() - 1; m >= 0; --m) {
    tail += da[static_cast<std::size_t>(m) + 1] * df[static_cast<std::size_t>(m) + 1];
    const StepFunction em = cond_expect(tail, m);
    for (std::size_t x = 0; x < sup.size(); ++x) sup[x] = std::max(sup[x], schatten_norm(em[x], p));
  }
  MaximalTailStatistic out;
  std::vector<cplx> sv(sup.begin(), sup.end());
  out.numerator = lp_norm(StepFunction::scalar(lat, sv), p);
  out.bmo_a = bmo_M(a);
  out.f_norm = lp_norm(f, p);
  const double den = out.bmo_a * out.f_norm;
  out.ratio = den > 0.0 ? out.numerator / den : 0.0;
  return out;
}

}  // namespace paralab
