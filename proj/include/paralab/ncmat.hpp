#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "paralab/rng.hpp"

namespace paralab {

using cplx = std::complex<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Dense square complex matrix, row-major.
class CMatrix {
 public:
  CMatrix() = default;
  explicit CMatrix(std::size_t m) : m_(m), a_(m * m) {}

  /// Builds from row-major entries; rejects non-finite values.
  static CMatrix from_entries(std::size_t m, std::span<const cplx> entries) {
    if (entries.size() != m * m) throw std::invalid_argument("CMatrix: entry count is not m*m");
    for (const cplx& z : entries)
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
        throw std::invalid_argument("CMatrix: non-finite entry");
    CMatrix out(m);
    std::copy(entries.begin(), entries.end(), out.a_.begin());
    return out;
  }
  static CMatrix from_rows(std::initializer_list<std::initializer_list<cplx>> rows) {
    const std::size_t m = rows.size();
    std::vector<cplx> flat;
    flat.reserve(m * m);
    for (const auto& row : rows) {
      if (row.size() != m) throw std::invalid_argument("CMatrix: rows must form a square");
      flat.insert(flat.end(), row.begin(), row.end());
    }
    return from_entries(m, flat);
  }
  static CMatrix identity(std::size_t m) {
    CMatrix out(m);
    for (std::size_t i = 0; i < m; ++i) out(i, i) = 1.0;
    return out;
  }
  static CMatrix scalar(cplx z) {
    CMatrix out(1);
    out(0, 0) = z;
    return out;
  }
  static CMatrix diagonal(std::span<const double> diag) {
    CMatrix out(diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) out(i, i) = diag[i];
    return out;
  }
  static CMatrix diagonal(std::initializer_list<double> diag) {
    return diagonal(std::span<const double>(diag.begin(), diag.size()));
  }

  std::size_t dim() const { return m_; }
  bool empty() const { return m_ == 0; }

  cplx& operator()(std::size_t i, std::size_t j) { return a_[i * m_ + j]; }
  const cplx& operator()(std::size_t i, std::size_t j) const { return a_[i * m_ + j]; }

  std::span<cplx> data() { return a_; }
  std::span<const cplx> data() const { return a_; }

  CMatrix adjoint() const {
    CMatrix out(m_);
    for (std::size_t i = 0; i < m_; ++i)
      for (std::size_t j = 0; j < m_; ++j) out(j, i) = std::conj((*this)(i, j));
    return out;
  }

  cplx trace() const {
    cplx t = 0.0;
    for (std::size_t i = 0; i < m_; ++i) t += (*this)(i, i);
    return t;
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

  bool is_finite() const {
    return std::all_of(a_.begin(), a_.end(), [](const cplx& z) {
      return std::isfinite(z.real()) && std::isfinite(z.imag());
    });
  }

  CMatrix& operator+=(const CMatrix& o) {
    check_same(o);
    for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
    return *this;
  }
  CMatrix& operator-=(const CMatrix& o) {
    check_same(o);
    for (std::size_t i = 0; i < a_.size(); ++i) a_[i] -= o.a_[i];
    return *this;
  }
  CMatrix& operator*=(cplx s) {
    for (cplx& z : a_) z *= s;
    return *this;
  }

  friend CMatrix operator+(CMatrix a, const CMatrix& b) { return a += b; }
  friend CMatrix operator-(CMatrix a, const CMatrix& b) { return a -= b; }
  friend CMatrix operator-(CMatrix a) { return a *= -1.0; }
  friend CMatrix operator*(CMatrix a, cplx s) { return a *= s; }
  friend CMatrix operator*(cplx s, CMatrix a) { return a *= s; }

  friend CMatrix operator*(const CMatrix& a, const CMatrix& b) {
    a.check_same(b);
    const std::size_t m = a.m_;
    CMatrix out(m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < m; ++k) {
        const cplx aik = a(i, k);
        if (aik == cplx{}) continue;
        for (std::size_t j = 0; j < m; ++j) out(i, j) += aik * b(k, j);
      }
    return out;
  }

  friend bool operator==(const CMatrix&, const CMatrix&) = default;

 private:
  void check_same(const CMatrix& o) const {
    if (o.m_ != m_)
      throw std::invalid_argument("CMatrix: dimension mismatch (" + std::to_string(m_) + " vs " +
                                  std::to_string(o.m_) + ")");
  }

  std::size_t m_ = 0;
  std::vector<cplx> a_;
};

/// x* y
inline CMatrix adjoint_times(const CMatrix& x, const CMatrix& y) { return x.adjoint() * y; }

/// max_ij |x_ij - y_ij|
inline double max_abs_diff(const CMatrix& x, const CMatrix& y) { return (x - y).max_abs(); }

/// tau(x* y) with the standard (unnormalized) trace.
inline cplx trace_inner(const CMatrix& x, const CMatrix& y) {
  if (x.dim() != y.dim()) throw std::invalid_argument("trace_inner: dimension mismatch");
  cplx s = 0.0;
  for (std::size_t i = 0; i < x.data().size(); ++i) s += std::conj(x.data()[i]) * y.data()[i];
  return s;
}

inline double hermitian_defect(const CMatrix& h) { return (h - h.adjoint()).max_abs(); }

struct EigenDecomposition {
  std::vector<double> values;  // descending
  CMatrix vectors;             // columns are eigenvectors
  int sweeps = 0;
};

namespace detail {

inline void require_hermitian(const CMatrix& h, const char* who) {
  const double defect = hermitian_defect(h);
  if (defect > 1e-10 * std::max(1.0, h.max_abs()))
    throw std::invalid_argument(std::string(who) + ": matrix is not Hermitian (defect " +
                                std::to_string(defect) + ")");
}

inline CMatrix symmetrized(const CMatrix& h) {
  CMatrix s = h + h.adjoint();
  s *= 0.5;
  return s;
}

}  // namespace detail

/// Hermitian eigendecomposition by cyclic Jacobi rotations.
inline EigenDecomposition herm_eig(const CMatrix& h_in) {
  detail::require_hermitian(h_in, "herm_eig");
  const std::size_t m = h_in.dim();
  CMatrix a = detail::symmetrized(h_in);
  CMatrix v = CMatrix::identity(m);
  const double scale = a.frobenius();

  auto off_mass = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j)
        if (i != j) s += std::norm(a(i, j));
    return std::sqrt(s);
  };

  int sweep = 0;
  if (scale > 0.0) {
    for (; sweep < 100 && off_mass() >= 1e-13 * scale; ++sweep) {
      for (std::size_t p = 0; p + 1 < m; ++p) {
        for (std::size_t q = p + 1; q < m; ++q) {
          const cplx apq = a(p, q);
          const double mag = std::abs(apq);
          if (mag == 0.0) continue;
          const cplx phase = apq / mag;  // e^{i phi}
          const double theta = (a(q, q).real() - a(p, p).real()) / (2.0 * mag);
          double t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
          if (theta < 0.0) t = -t;
          const double c = 1.0 / std::sqrt(t * t + 1.0);
          const double s = t * c;
          // J = [[c, s], [-s conj(phase), c conj(phase)]] on columns p, q.
          const cplx jpp = c, jpq = s, jqp = -s * std::conj(phase), jqq = c * std::conj(phase);
          for (std::size_t k = 0; k < m; ++k) {
            const cplx akp = a(k, p), akq = a(k, q);
            a(k, p) = akp * jpp + akq * jqp;
            a(k, q) = akp * jpq + akq * jqq;
          }
          for (std::size_t k = 0; k < m; ++k) {
            const cplx apk = a(p, k), aqk = a(q, k);
            a(p, k) = std::conj(jpp) * apk + std::conj(jqp) * aqk;
            a(q, k) = std::conj(jpq) * apk + std::conj(jqq) * aqk;
          }
          a(p, q) = 0.0;
          a(q, p) = 0.0;
          a(p, p) = a(p, p).real();
          a(q, q) = a(q, q).real();
          for (std::size_t k = 0; k < m; ++k) {
            const cplx vkp = v(k, p), vkq = v(k, q);
            v(k, p) = vkp * jpp + vkq * jqp;
            v(k, q) = vkp * jpq + vkq * jqq;
          }
        }
      }
    }
  }

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i).real() > a(j, j).real(); });
  EigenDecomposition out;
  out.sweeps = sweep;
  out.values.reserve(m);
  out.vectors = CMatrix(m);
  for (std::size_t c = 0; c < m; ++c) {
    out.values.push_back(a(order[c], order[c]).real());
    for (std::size_t r = 0; r < m; ++r) out.vectors(r, c) = v(r, order[c]);
  }
  return out;
}

/// U diag(f(lambda)) U* for a Hermitian matrix.
template <typename F>
CMatrix hermitian_function(const EigenDecomposition& e, F&& fn) {
  const std::size_t m = e.values.size();
  CMatrix out(m);
  for (std::size_t k = 0; k < m; ++k) {
    const double w = fn(e.values[k]);
    if (w == 0.0) continue;
    for (std::size_t i = 0; i < m; ++i) {
      const cplx uik = e.vectors(i, k) * w;
      for (std::size_t j = 0; j < m; ++j) out(i, j) += uik * std::conj(e.vectors(j, k));
    }
  }
  return out;
}

/// |x|^p = (x* x)^{p/2}; negative eigenvalues of x* x are clamped to zero.
inline CMatrix matrix_abs_power(const CMatrix& x, double p) {
  if (!(p >= 0.0)) throw std::invalid_argument("matrix_abs_power: exponent must be >= 0");
  const EigenDecomposition e = herm_eig(adjoint_times(x, x));
  return hermitian_function(e, [p](double lam) { return std::pow(std::max(lam, 0.0), p / 2.0); });
}

/// Principal square root of a Hermitian PSD matrix (negative part clamped).
inline CMatrix psd_sqrt(const CMatrix& h) {
  return hermitian_function(herm_eig(h), [](double lam) { return std::sqrt(std::max(lam, 0.0)); });
}

/// Singular values (descending) by one-sided Jacobi orthogonalization of the columns.
inline std::vector<double> singular_values(const CMatrix& x) {
  const std::size_t m = x.dim();
  CMatrix a = x;
  for (int sweep = 0; sweep < 100; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < m; ++p) {
      for (std::size_t q = p + 1; q < m; ++q) {
        double alpha = 0.0, beta = 0.0;
        cplx gamma = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
          alpha += std::norm(a(k, p));
          beta += std::norm(a(k, q));
          gamma += std::conj(a(k, p)) * a(k, q);
        }
        const double mag = std::abs(gamma);
        if (mag == 0.0 || mag <= 1e-15 * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const cplx phase = gamma / mag;
        const double theta = (beta - alpha) / (2.0 * mag);
        double t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        if (theta < 0.0) t = -t;
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const cplx jqp = -s * std::conj(phase), jqq = c * std::conj(phase);
        for (std::size_t k = 0; k < m; ++k) {
          const cplx akp = a(k, p), akq = a(k, q);
          a(k, p) = akp * c + akq * jqp;
          a(k, q) = akp * s + akq * jqq;
        }
      }
    }
    if (!rotated) break;
  }
  std::vector<double> sv(m);
  for (std::size_t j = 0; j < m; ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k < m; ++k) s += std::norm(a(k, j));
    sv[j] = std::sqrt(s);
  }
  std::sort(sv.begin(), sv.end(), std::greater<>());
  return sv;
}

/// (sum_i s_i^p)^{1/p} for p finite, max s_i for p = infinity.
inline double lp_of_values(std::span<const double> s, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("schatten_norm: p must be >= 1");
  double top = 0.0;
  for (double v : s) top = std::max(top, std::abs(v));
  if (std::isinf(p) || top == 0.0) return top;
  double acc = 0.0;
  for (double v : s) acc += std::pow(std::abs(v) / top, p);
  return top * std::pow(acc, 1.0 / p);
}

/// Schatten p-norm (tau |x|^p)^{1/p}; p = kInf gives the spectral norm.
inline double schatten_norm(const CMatrix& x, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("schatten_norm: p must be >= 1");
  const std::vector<double> sv = singular_values(x);
  return lp_of_values(sv, p);
}

inline double spectral_norm(const CMatrix& x) {
  const std::vector<double> sv = singular_values(x);
  return sv.empty() ? 0.0 : sv.front();
}

/// Smallest eigenvalue of the symmetrization of a Hermitian matrix.
inline double psd_min_eig(const CMatrix& h) {
  const EigenDecomposition e = herm_eig(h);
  return e.values.empty() ? 0.0 : e.values.back();
}

inline double psd_max_eig(const CMatrix& h) {
  const EigenDecomposition e = herm_eig(h);
  return e.values.empty() ? 0.0 : e.values.front();
}

// Random matrices.

inline CMatrix random_gaussian(std::size_t m, Rng& rng) {
  CMatrix out(m);
  for (cplx& z : out.data()) z = rng.complex_normal();
  return out;
}

inline CMatrix random_hermitian(std::size_t m, Rng& rng) {
  const CMatrix g = random_gaussian(m, rng);
  CMatrix h = g + g.adjoint();
  h *= 0.5;
  return h;
}

/// Unitary from modified Gram-Schmidt on the columns of a Gaussian matrix.
inline CMatrix random_unitary(std::size_t m, Rng& rng) {
  CMatrix u = random_gaussian(m, rng);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < j; ++i) {
      cplx proj = 0.0;
      for (std::size_t k = 0; k < m; ++k) proj += std::conj(u(k, i)) * u(k, j);
      for (std::size_t k = 0; k < m; ++k) u(k, j) -= proj * u(k, i);
    }
    double nrm = 0.0;
    for (std::size_t k = 0; k < m; ++k) nrm += std::norm(u(k, j));
    nrm = std::sqrt(nrm);
    for (std::size_t k = 0; k < m; ++k) u(k, j) /= nrm;
  }
  return u;
}

/// Block-diagonal diag(x, y).
inline CMatrix block_diag(const CMatrix& x, const CMatrix& y) {
  const std::size_t a = x.dim(), b = y.dim();
  CMatrix out(a + b);
  for (std::size_t i = 0; i < a; ++i)
    for (std::size_t j = 0; j < a; ++j) out(i, j) = x(i, j);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < b; ++j) out(a + i, a + j) = y(i, j);
  return out;
}

}  // namespace paralab
