#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "paralab/stepfn.hpp"

// The paraproduct family on a finite d-adic lattice. Sums over k run over
// 1..N; the level-0 mean E_0 plays the role of the tail k -> -infinity, so
// for example  b f = pi_b f + Lambda_b f + R_b f + (E_0 b)(E_0 f).

namespace paralab {

namespace detail {

inline void require_compatible(const StepFunction& b, const StepFunction& f, const char* who) {
  if (!(b.lattice() == f.lattice())) throw std::invalid_argument(std::string(who) + ": lattice mismatch");
  if (b.dim() != f.dim() && b.dim() != 1 && f.dim() != 1)
    throw std::invalid_argument(std::string(who) + ": matrix dimension mismatch");
}

inline void require_scalar(const StepFunction& a, const char* who) {
  if (!a.is_scalar()) throw std::invalid_argument(std::string(who) + ": symbol a must be scalar-valued");
}

/// x y with scalar broadcast.
inline CMatrix mul_bc(const CMatrix& x, const CMatrix& y) {
  if (x.dim() == y.dim()) return x * y;
  if (x.dim() == 1) return y * x(0, 0);
  if (y.dim() == 1) return x * y(0, 0);
  throw std::invalid_argument("matrix dimension mismatch");
}

inline std::size_t result_dim(const StepFunction& b, const StepFunction& f) {
  return std::max(b.dim(), f.dim());
}

inline StepFunction zero_like(const StepFunction& b, const StepFunction& f) {
  return StepFunction(f.lattice(), result_dim(b, f));
}

}  // namespace detail

/// pi_b f = sum_k d_k b . f_{k-1}
inline StepFunction pi(const StepFunction& b, const StepFunction& f) {
  detail::require_compatible(b, f, "pi");
  const auto db = martingale_differences(b);
  const auto ef = martingale(f);
  StepFunction out = detail::zero_like(b, f);
  for (int k = 1; k <= f.lattice().depth(); ++k) out += db[k] * ef[k - 1];
  return out;
}

/// Haar form: sum_{I,i} h_I^i <h_I^i, b> <1_I/|I|, f>.
inline StepFunction pi_haar(const StepFunction& b, const StepFunction& f) {
  detail::require_compatible(b, f, "pi_haar");
  const Lattice& lat = f.lattice();
  const HaarCoefficients cb = haar_analyze(b);
  StepFunction out = detail::zero_like(b, f);
  for (int n = 0; n < lat.depth(); ++n) {
    for (const Interval& I : lat.intervals(n)) {
      const CMatrix avg = interval_average(f, I);
      for (int i = 1; i < lat.d(); ++i) {
        const CMatrix coef = detail::mul_bc(cb.at(I, i), avg);
        const StepFunction h = haar_function(lat, I, i);
        const AtomRange r = lat.atom_range(I);
        for (std::uint64_t a = r.begin; a < r.end; ++a) out[a] += coef * h[a](0, 0);
      }
    }
  }
  return out;
}

/// pi_b^* f = sum_k E_{k-1}(d_k b^* . d_k f), the L_2 adjoint of pi_b.
inline StepFunction pi_star(const StepFunction& b, const StepFunction& f) {
  detail::require_compatible(b, f, "pi_star");
  const auto db = martingale_differences(b.adjoint());
  const auto df = martingale_differences(f);
  StepFunction out = detail::zero_like(b, f);
  for (int k = 1; k <= f.lattice().depth(); ++k) out += cond_expect(db[k] * df[k], k - 1);
  return out;
}

/// Haar form: sum_{I,i} (1_I/|I|) <h_I^i, b>^* <h_I^i, f>.
inline StepFunction pi_star_haar(const StepFunction& b, const StepFunction& f) {
  detail::require_compatible(b, f, "pi_star_haar");
  const Lattice& lat = f.lattice();
  const HaarCoefficients cb = haar_analyze(b);
  const HaarCoefficients cf = haar_analyze(f);
  StepFunction out = detail::zero_like(b, f);
  for (int n = 0; n < lat.depth(); ++n) {
    const double inv_len = static_cast<double>(lat.power(n));
    for (const Interval& I : lat.intervals(n)) {
      CMatrix acc(out.dim());
      for (int i = 1; i < lat.d(); ++i) acc += detail::mul_bc(cb.at(I, i).adjoint(), cf.at(I, i));
      acc *= inv_len;
      const AtomRange r = lat.atom_range(I);
      for (std::uint64_t a = r.begin; a < r.end; ++a) out[a] += acc;
    }
  }
  return out;
}

/// Lambda_b f = sum_k d_k b . d_k f
inline StepFunction lambda(const StepFunction& b, const StepFunction& f) {
  detail::require_compatible(b, f, "lambda");
  const auto db = martingale_differences(b);
  const auto df = martingale_differences(f);
  StepFunction out = detail::zero_like(b, f);
  for (int k = 1; k <= f.lattice().depth(); ++k) out += db[k] * df[k];
  return out;
}

/// R_b f = sum_k b_{k-1} . d_k f
inline StepFunction r_op(const StepFunction& b, const StepFunction& f) {
  detail::require_compatible(b, f, "r_op");
  const auto eb = martingale(b);
  const auto df = martingale_differences(f);
  StepFunction out = detail::zero_like(b, f);
  for (int k = 1; k <= f.lattice().depth(); ++k) out += eb[k - 1] * df[k];
  return out;
}

/// Theta_b = pi_b + Lambda_b, i.e. sum_k d_k b . f_k
inline StepFunction theta(const StepFunction& b, const StepFunction& f) {
  return pi(b, f) + lambda(b, f);
}

/// (pi_{b^*})^* f = sum_k E_{k-1}(d_k b . d_k f)
inline StepFunction pi_adjoint_of_adjoint_symbol(const StepFunction& b, const StepFunction& f) {
  return pi_star(b.adjoint(), f);
}

/// [pi_a, M_b] f = pi_a(b f) - b pi_a(f), a scalar.
inline StepFunction commutator_pi_mult(const StepFunction& a, const StepFunction& b, const StepFunction& f) {
  detail::require_scalar(a, "commutator_pi_mult");
  detail::require_compatible(b, f, "commutator_pi_mult");
  return pi(a, b * f) - b * pi(a, f);
}

/// V_{a,b} f = sum_k d_k a . E_{k-1}( sum_{j >= k} d_j b . d_j f ), a scalar.
inline StepFunction v_ab(const StepFunction& a, const StepFunction& b, const StepFunction& f) {
  detail::require_scalar(a, "v_ab");
  detail::require_compatible(b, f, "v_ab");
  const int depth = f.lattice().depth();
  const auto da = martingale_differences(a);
  const auto db = martingale_differences(b);
  const auto df = martingale_differences(f);
  StepFunction tail = detail::zero_like(b, f);
  StepFunction out = detail::zero_like(b, f);
  for (int k = depth; k >= 1; --k) {
    tail += db[k] * df[k];
    out += da[k] * cond_expect(tail, k - 1);
  }
  return out;
}

/// [pi_a, R_b] f evaluated literally as pi_a(R_b f) - R_b(pi_a f).
inline StepFunction commutator_pi_r(const StepFunction& a, const StepFunction& b, const StepFunction& f) {
  detail::require_scalar(a, "commutator_pi_r");
  return pi(a, r_op(b, f)) - r_op(b, pi(a, f));
}

/// Closed form of [pi_a, R_b] f:
///   -sum_k d_k a (sum_{j <= k-1} d_j b d_j f) - pi_a(pi_b f) - pi_a((E_0 b)(E_0 f)).
/// The last term is the finite-depth remainder and vanishes when E_0 b = 0.
inline StepFunction commutator_pi_r_closed(const StepFunction& a, const StepFunction& b,
                                           const StepFunction& f) {
  detail::require_scalar(a, "commutator_pi_r_closed");
  detail::require_compatible(b, f, "commutator_pi_r_closed");
  const int depth = f.lattice().depth();
  const auto da = martingale_differences(a);
  const auto db = martingale_differences(b);
  const auto df = martingale_differences(f);
  StepFunction head = detail::zero_like(b, f);
  StepFunction out = detail::zero_like(b, f);
  for (int k = 1; k <= depth; ++k) {
    out -= da[k] * head;
    head += db[k] * df[k];
  }
  out -= pi(a, pi(b, f));
  out -= pi(a, cond_expect(b, 0) * cond_expect(f, 0));
  return out;
}

/// W_{a,f,g} = sum_k sum_{j<=k} E_{j-1}(d_j abar d_j g) d_k f^* - sum_k d_k(d_k abar d_k g) f_{k-1}^*
inline StepFunction w_afg(const StepFunction& a, const StepFunction& f, const StepFunction& g) {
  detail::require_scalar(a, "w_afg");
  detail::require_compatible(f, g, "w_afg");
  const int depth = f.lattice().depth();
  const auto da = martingale_differences(a.adjoint());
  const auto dg = martingale_differences(g);
  const StepFunction fs = f.adjoint();
  const auto efs = martingale(fs);
  StepFunction running = detail::zero_like(f, g);
  StepFunction out = detail::zero_like(f, g);
  for (int k = 1; k <= depth; ++k) {
    const StepFunction z = da[k] * dg[k];
    running += cond_expect(z, k - 1);
    out += running * (efs[k] - efs[k - 1]);
    out -= (z - cond_expect(z, k - 1)) * efs[k - 1];
  }
  return out;
}

/// Three-term closed form of E_m(W_{a,f,g}):
///   E_m(pi_a^* g) f_m^* - E_m(sum_{j>m} d_j abar d_j g) f_m^* - sum_{j<=m} (d_j abar d_j g) f_{j-1}^*.
inline StepFunction w_cond_closed(const StepFunction& a, const StepFunction& f, const StepFunction& g,
                                  int m_level) {
  detail::require_scalar(a, "w_cond_closed");
  detail::require_compatible(f, g, "w_cond_closed");
  const int depth = f.lattice().depth();
  if (m_level < 0 || m_level > depth) throw std::out_of_range("w_cond_closed: level out of range");
  const auto da = martingale_differences(a.adjoint());
  const auto dg = martingale_differences(g);
  const auto efs = martingale(f.adjoint());
  const StepFunction& fm = efs[static_cast<std::size_t>(m_level)];

  StepFunction out = cond_expect(pi_star(a, g), m_level) * fm;
  StepFunction tail = detail::zero_like(f, g);
  for (int j = m_level + 1; j <= depth; ++j) tail += da[j] * dg[j];
  out -= cond_expect(tail, m_level) * fm;
  for (int j = 1; j <= m_level; ++j) out -= (da[j] * dg[j]) * efs[j - 1];
  return out;
}

/// d_k(d_k b . d_k f) from Haar coefficients:
///   sum_{I in D_{k-1}} sum_{l=1}^{d-1} sum_{i+j = l mod d} <h_I^i,b><h_I^j,f> h_I^l / |I|^{1/2}.
inline StepFunction dk_product_expansion(const StepFunction& b, const StepFunction& f, int k) {
  detail::require_compatible(b, f, "dk_product_expansion");
  const Lattice& lat = f.lattice();
  if (k < 1 || k > lat.depth()) throw std::out_of_range("dk_product_expansion: k out of range");
  const int d = lat.d();
  const int n = k - 1;
  const HaarCoefficients cb = haar_analyze(b);
  const HaarCoefficients cf = haar_analyze(f);
  const double inv_sqrt_len = std::sqrt(static_cast<double>(lat.power(n)));
  StepFunction out = detail::zero_like(b, f);
  for (const Interval& I : lat.intervals(n)) {
    for (int l = 1; l < d; ++l) {
      CMatrix c(out.dim());
      for (int i = 1; i < d; ++i)
        for (int j = 1; j < d; ++j)
          if (remainder_1d(i + j, d) == l) c += detail::mul_bc(cb.at(I, i), cf.at(I, j));
      if (c.max_abs() == 0.0) continue;
      c *= inv_sqrt_len;
      const StepFunction h = haar_function(lat, I, l);
      const AtomRange r = lat.atom_range(I);
      for (std::uint64_t a = r.begin; a < r.end; ++a) out[a] += c * h[a](0, 0);
    }
  }
  return out;
}

}  // namespace paralab
