#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "paralab/lattice.hpp"
#include "paralab/ncmat.hpp"
#include "paralab/rng.hpp"

namespace paralab {

/// omega^e with omega = exp(2 pi i / d). The exponent is reduced mod d before
/// the trig call; quarter turns are returned exactly.
inline cplx omega_power(long long e, int d) {
  const long long k = ((e % d) + d) % d;
  if (k == 0) return {1.0, 0.0};
  if (2 * k == d) return {-1.0, 0.0};
  if (4 * k == d) return {0.0, 1.0};
  if (4 * k == 3LL * d) return {0.0, -1.0};
  const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(d);
  return {std::cos(angle), std::sin(angle)};
}

/// Remainder of n modulo d taken in [1, d]; d itself stands for index 0.
inline int remainder_1d(int n, int d) {
  const int r = ((n % d) + d) % d;
  return r == 0 ? d : r;
}

/// Matrix-valued function constant on the atoms of a lattice.
class StepFunction {
 public:
  StepFunction(Lattice lattice, std::size_t m) : lattice_(std::move(lattice)), m_(m) {
    if (m == 0) throw std::invalid_argument("StepFunction: matrix dimension must be >= 1");
    values_.assign(static_cast<std::size_t>(lattice_.num_atoms()), CMatrix(m));
  }
  StepFunction(Lattice lattice, std::vector<CMatrix> values)
      : lattice_(std::move(lattice)), values_(std::move(values)) {
    if (values_.size() != lattice_.num_atoms())
      throw std::invalid_argument("StepFunction: need one value per atom");
    m_ = values_.front().dim();
    for (const CMatrix& v : values_) {
      if (v.dim() != m_ || m_ == 0)
        throw std::invalid_argument("StepFunction: atom values must share one dimension");
      if (!v.is_finite()) throw std::invalid_argument("StepFunction: non-finite atom value");
    }
  }

  static StepFunction constant(const Lattice& lattice, const CMatrix& c) {
    return StepFunction(lattice, std::vector<CMatrix>(lattice.num_atoms(), c));
  }
  static StepFunction scalar(const Lattice& lattice, const std::vector<cplx>& atoms) {
    std::vector<CMatrix> v;
    v.reserve(atoms.size());
    for (const cplx& z : atoms) v.push_back(CMatrix::scalar(z));
    return StepFunction(lattice, std::move(v));
  }
  /// Indicator of an interval, scalar-valued.
  static StepFunction indicator(const Lattice& lattice, const Interval& I) {
    StepFunction out(lattice, 1);
    const AtomRange r = lattice.atom_range(I);
    for (std::uint64_t a = r.begin; a < r.end; ++a) out.values_[a](0, 0) = 1.0;
    return out;
  }

  const Lattice& lattice() const { return lattice_; }
  std::size_t dim() const { return m_; }
  bool is_scalar() const { return m_ == 1; }
  std::size_t num_atoms() const { return values_.size(); }

  const CMatrix& operator[](std::size_t atom) const { return values_[atom]; }
  CMatrix& operator[](std::size_t atom) { return values_[atom]; }
  const std::vector<CMatrix>& values() const { return values_; }

  StepFunction adjoint() const {
    StepFunction out = *this;
    for (CMatrix& v : out.values_) v = v.adjoint();
    return out;
  }

  StepFunction& operator+=(const StepFunction& o) {
    check_same(o, "add");
    for (std::size_t a = 0; a < values_.size(); ++a) values_[a] += o.values_[a];
    return *this;
  }
  StepFunction& operator-=(const StepFunction& o) {
    check_same(o, "subtract");
    for (std::size_t a = 0; a < values_.size(); ++a) values_[a] -= o.values_[a];
    return *this;
  }
  StepFunction& operator*=(cplx s) {
    for (CMatrix& v : values_) v *= s;
    return *this;
  }

  friend StepFunction operator+(StepFunction a, const StepFunction& b) { return a += b; }
  friend StepFunction operator-(StepFunction a, const StepFunction& b) { return a -= b; }
  friend StepFunction operator-(StepFunction a) { return a *= -1.0; }
  friend StepFunction operator*(cplx s, StepFunction a) { return a *= s; }
  friend StepFunction operator*(StepFunction a, cplx s) { return a *= s; }

  /// Atomwise product in the written order; an m = 1 operand is broadcast.
  friend StepFunction operator*(const StepFunction& f, const StepFunction& g) {
    if (!(f.lattice_ == g.lattice_)) throw std::invalid_argument("multiply: lattice mismatch");
    if (f.m_ == g.m_) {
      std::vector<CMatrix> out;
      out.reserve(f.values_.size());
      for (std::size_t a = 0; a < f.values_.size(); ++a) out.push_back(f.values_[a] * g.values_[a]);
      return StepFunction(f.lattice_, std::move(out), Unchecked{});
    }
    if (f.m_ == 1 || g.m_ == 1) {
      const StepFunction& s = f.m_ == 1 ? f : g;
      StepFunction out = f.m_ == 1 ? g : f;
      for (std::size_t a = 0; a < out.values_.size(); ++a) out.values_[a] *= s.values_[a](0, 0);
      return out;
    }
    throw std::invalid_argument("multiply: matrix dimension mismatch (" + std::to_string(f.m_) +
                                " vs " + std::to_string(g.m_) + ")");
  }

 private:
  struct Unchecked {};
  StepFunction(Lattice lattice, std::vector<CMatrix> values, Unchecked)
      : lattice_(std::move(lattice)), m_(values.front().dim()), values_(std::move(values)) {}

  void check_same(const StepFunction& o, const char* who) const {
    if (!(lattice_ == o.lattice_)) throw std::invalid_argument(std::string(who) + ": lattice mismatch");
    if (m_ != o.m_) throw std::invalid_argument(std::string(who) + ": matrix dimension mismatch");
  }

  Lattice lattice_;
  std::size_t m_ = 0;
  std::vector<CMatrix> values_;
};

inline StepFunction multiply(const StepFunction& f, const StepFunction& g) { return f * g; }
inline StepFunction pointwise_adjoint(const StepFunction& f) { return f.adjoint(); }

/// Scalar step function promoted to m x m (z times identity on each atom).
inline StepFunction promote(const StepFunction& f, std::size_t m) {
  if (f.dim() == m) return f;
  if (!f.is_scalar()) throw std::invalid_argument("promote: only scalar functions can be promoted");
  return f * StepFunction::constant(f.lattice(), CMatrix::identity(m));
}

inline double max_abs_diff(const StepFunction& f, const StepFunction& g) {
  if (!(f.lattice() == g.lattice()) || f.dim() != g.dim())
    throw std::invalid_argument("max_abs_diff: shape mismatch");
  double r = 0.0;
  for (std::size_t a = 0; a < f.num_atoms(); ++a) r = std::max(r, max_abs_diff(f[a], g[a]));
  return r;
}

inline double max_abs(const StepFunction& f) {
  double r = 0.0;
  for (const CMatrix& v : f.values()) r = std::max(r, v.max_abs());
  return r;
}

// Conditional expectations.

/// Averages of f over the level-n intervals, one matrix per interval.
inline std::vector<CMatrix> level_averages(const StepFunction& f, int n) {
  const Lattice& lat = f.lattice();
  const std::uint64_t count = lat.level_size(n);
  const std::uint64_t width = lat.num_atoms() / count;
  std::vector<CMatrix> out(count, CMatrix(f.dim()));
  const double w = 1.0 / static_cast<double>(width);
  for (std::uint64_t k = 0; k < count; ++k) {
    CMatrix& acc = out[k];
    for (std::uint64_t a = k * width; a < (k + 1) * width; ++a) acc += f[a];
    acc *= w;
  }
  return out;
}

/// Step function constant on level-n intervals with the given interval values.
inline StepFunction expand_level(const Lattice& lat, int n, const std::vector<CMatrix>& level) {
  if (level.size() != lat.level_size(n)) throw std::invalid_argument("expand_level: size mismatch");
  const std::uint64_t width = lat.num_atoms() / level.size();
  std::vector<CMatrix> v;
  v.reserve(lat.num_atoms());
  for (const CMatrix& c : level)
    for (std::uint64_t r = 0; r < width; ++r) v.push_back(c);
  return StepFunction(lat, std::move(v));
}

/// E_n f: average over each level-n interval.
inline StepFunction cond_expect(const StepFunction& f, int n) {
  const Lattice& lat = f.lattice();
  if (n < 0 || n > lat.depth()) throw std::out_of_range("cond_expect: level out of range");
  if (n == lat.depth()) return f;
  return expand_level(lat, n, level_averages(f, n));
}

/// The whole martingale (E_0 f, ..., E_N f), computed coarse from fine.
inline std::vector<StepFunction> martingale(const StepFunction& f) {
  const Lattice& lat = f.lattice();
  const int depth = lat.depth();
  const auto d = static_cast<std::uint64_t>(lat.d());
  std::vector<std::vector<CMatrix>> levels(static_cast<std::size_t>(depth) + 1);
  levels[static_cast<std::size_t>(depth)] = f.values();
  for (int n = depth - 1; n >= 0; --n) {
    const auto& fine = levels[static_cast<std::size_t>(n) + 1];
    std::vector<CMatrix> coarse(lat.level_size(n), CMatrix(f.dim()));
    for (std::uint64_t k = 0; k < coarse.size(); ++k) {
      for (std::uint64_t j = 0; j < d; ++j) coarse[k] += fine[k * d + j];
      coarse[k] *= 1.0 / static_cast<double>(d);
    }
    levels[static_cast<std::size_t>(n)] = std::move(coarse);
  }
  std::vector<StepFunction> out;
  out.reserve(levels.size());
  for (int n = 0; n <= depth; ++n) out.push_back(expand_level(lat, n, levels[static_cast<std::size_t>(n)]));
  return out;
}

/// d_n f = E_n f - E_{n-1} f, 1 <= n <= N.
inline StepFunction mart_diff(const StepFunction& f, int n) {
  if (n < 1 || n > f.lattice().depth()) throw std::out_of_range("mart_diff: level out of range");
  return cond_expect(f, n) - cond_expect(f, n - 1);
}

/// All differences d_1 f .. d_N f (index 0 holds E_0 f).
inline std::vector<StepFunction> martingale_differences(const StepFunction& f) {
  std::vector<StepFunction> e = martingale(f);
  std::vector<StepFunction> out;
  out.reserve(e.size());
  out.push_back(e[0]);
  for (std::size_t k = 1; k < e.size(); ++k) out.push_back(e[k] - e[k - 1]);
  return out;
}

/// f - E_0 f
inline StepFunction mean_zero(const StepFunction& f) { return f - cond_expect(f, 0); }

// Integration and pairings.

/// int f dmu
inline CMatrix integral(const StepFunction& f) { return level_averages(f, 0).front(); }

inline CMatrix interval_average(const StepFunction& f, const Interval& I) {
  const AtomRange r = f.lattice().atom_range(I);
  CMatrix acc(f.dim());
  for (std::uint64_t a = r.begin; a < r.end; ++a) acc += f[a];
  acc *= 1.0 / static_cast<double>(r.size());
  return acc;
}

/// <g, f> = int conj(g) f dmu for scalar g.
inline CMatrix pair_scalar(const StepFunction& g, const StepFunction& f) {
  if (!g.is_scalar()) throw std::invalid_argument("pair_scalar: first argument must be scalar");
  if (!(g.lattice() == f.lattice())) throw std::invalid_argument("pair_scalar: lattice mismatch");
  const double mu = f.lattice().atom_measure();
  CMatrix acc(f.dim());
  for (std::size_t a = 0; a < f.num_atoms(); ++a) {
    const cplx w = std::conj(g[a](0, 0)) * mu;
    if (w != cplx{}) acc += f[a] * w;
  }
  return acc;
}

/// L_2(S_2^m) inner product: int tau(f* g) dmu.
inline cplx hs_inner(const StepFunction& f, const StepFunction& g) {
  if (!(f.lattice() == g.lattice()) || f.dim() != g.dim())
    throw std::invalid_argument("hs_inner: shape mismatch");
  cplx s = 0.0;
  for (std::size_t a = 0; a < f.num_atoms(); ++a) s += trace_inner(f[a], g[a]);
  return s * f.lattice().atom_measure();
}

inline double l2_norm(const StepFunction& f) { return std::sqrt(std::max(0.0, hs_inner(f, f).real())); }

// Haar system.

/// h_I^i = d^{n/2} sum_j omega^{i(j+1)} 1_{child j} for 1 <= i <= d-1,
/// h_I^0 = d^{n/2} 1_I (i = d is accepted as an alias of 0).
inline StepFunction haar_function(const Lattice& lat, const Interval& I, int i) {
  if (!lat.valid(I)) throw std::out_of_range("haar_function: invalid interval");
  const int d = lat.d();
  if (i < 0 || i > d) throw std::out_of_range("haar_function: index must lie in [0, d]");
  if (i == d) i = 0;
  if (i >= 1 && I.level >= lat.depth())
    throw std::out_of_range("haar_function: wavelets need level < depth");
  const double amp = std::pow(static_cast<double>(d), 0.5 * I.level);
  StepFunction out(lat, 1);
  const AtomRange r = lat.atom_range(I);
  if (i == 0) {
    for (std::uint64_t a = r.begin; a < r.end; ++a) out[a](0, 0) = amp;
    return out;
  }
  for (const Interval& child : lat.children(I)) {
    const auto j = static_cast<long long>(child.index - I.index * static_cast<std::uint64_t>(d));
    const cplx v = amp * omega_power(static_cast<long long>(i) * (j + 1), d);
    const AtomRange cr = lat.atom_range(child);
    for (std::uint64_t a = cr.begin; a < cr.end; ++a) out[a](0, 0) = v;
  }
  return out;
}

/// Coefficients <h_I^i, f> over every interval of level < depth and 1 <= i <= d-1,
/// plus the mean E_0 f. Dense storage.
class HaarCoefficients {
 public:
  HaarCoefficients(Lattice lattice, std::size_t m)
      : lattice_(std::move(lattice)), mean_(m), coeffs_(lattice_.num_wavelets(), CMatrix(m)) {}

  const Lattice& lattice() const { return lattice_; }
  std::size_t dim() const { return mean_.dim(); }

  CMatrix& mean() { return mean_; }
  const CMatrix& mean() const { return mean_; }

  std::size_t index(const Interval& I, int i) const {
    if (!lattice_.valid(I) || I.level >= lattice_.depth())
      throw std::out_of_range("HaarCoefficients: interval outside wavelet range");
    if (i < 1 || i >= lattice_.d()) throw std::out_of_range("HaarCoefficients: index i outside [1, d-1]");
    const auto d1 = static_cast<std::uint64_t>(lattice_.d() - 1);
    return static_cast<std::size_t>(lattice_.power(I.level) - 1 + I.index * d1 +
                                    static_cast<std::uint64_t>(i - 1));
  }
  CMatrix& at(const Interval& I, int i) { return coeffs_[index(I, i)]; }
  const CMatrix& at(const Interval& I, int i) const { return coeffs_[index(I, i)]; }

  std::vector<CMatrix>& wavelets() { return coeffs_; }
  const std::vector<CMatrix>& wavelets() const { return coeffs_; }

  bool complete() const {
    if (coeffs_.size() != lattice_.num_wavelets() || mean_.dim() == 0) return false;
    for (const CMatrix& c : coeffs_)
      if (c.dim() != mean_.dim()) return false;
    return true;
  }

 private:
  Lattice lattice_;
  CMatrix mean_;
  std::vector<CMatrix> coeffs_;
};

inline HaarCoefficients haar_analyze(const StepFunction& f) {
  const Lattice& lat = f.lattice();
  const int d = lat.d();
  HaarCoefficients out(lat, f.dim());
  std::vector<CMatrix> fine = f.values();
  for (int n = lat.depth() - 1; n >= 0; --n) {
    const double amp = std::pow(static_cast<double>(d), 0.5 * n) / std::pow(static_cast<double>(d), n + 1.0);
    std::vector<CMatrix> coarse(lat.level_size(n), CMatrix(f.dim()));
    for (std::uint64_t k = 0; k < coarse.size(); ++k) {
      const Interval I{n, k};
      for (int j = 0; j < d; ++j) coarse[k] += fine[k * static_cast<std::uint64_t>(d) + static_cast<std::uint64_t>(j)];
      coarse[k] *= 1.0 / d;
      for (int i = 1; i < d; ++i) {
        CMatrix& c = out.at(I, i);
        for (int j = 0; j < d; ++j)
          c += fine[k * static_cast<std::uint64_t>(d) + static_cast<std::uint64_t>(j)] *
               (amp * std::conj(omega_power(static_cast<long long>(i) * (j + 1), d)));
      }
    }
    fine = std::move(coarse);
  }
  out.mean() = fine.front();
  return out;
}

inline StepFunction haar_synthesize(const HaarCoefficients& c) {
  if (!c.complete()) throw std::invalid_argument("haar_synthesize: incomplete coefficient set");
  const Lattice& lat = c.lattice();
  const int d = lat.d();
  std::vector<CMatrix> level{c.mean()};
  for (int n = 0; n < lat.depth(); ++n) {
    const double amp = std::pow(static_cast<double>(d), 0.5 * n);
    std::vector<CMatrix> next;
    next.reserve(level.size() * static_cast<std::size_t>(d));
    for (std::uint64_t k = 0; k < level.size(); ++k) {
      const Interval I{n, k};
      for (int j = 0; j < d; ++j) {
        CMatrix v = level[k];
        for (int i = 1; i < d; ++i) v += c.at(I, i) * (amp * omega_power(static_cast<long long>(i) * (j + 1), d));
        next.push_back(std::move(v));
      }
    }
    level = std::move(next);
  }
  return StepFunction(lat, std::move(level));
}

/// Random function with independent standard complex Gaussian Haar
/// coefficients and zero mean.
inline StepFunction random_mean_zero(const Lattice& lat, std::size_t m, Rng& rng) {
  HaarCoefficients c(lat, m);
  for (CMatrix& w : c.wavelets()) w = random_gaussian(m, rng);
  return haar_synthesize(c);
}

/// Random function with independent standard complex Gaussian atom values.
inline StepFunction random_atoms(const Lattice& lat, std::size_t m, Rng& rng) {
  std::vector<CMatrix> v;
  v.reserve(lat.num_atoms());
  for (std::uint64_t a = 0; a < lat.num_atoms(); ++a) v.push_back(random_gaussian(m, rng));
  return StepFunction(lat, std::move(v));
}

}  // namespace paralab
