#pragma once

#include <compare>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace paralab {

/// Exact non-negative rational, used for interval measures.
struct Rational {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  Rational reduced() const {
    const std::uint64_t g = std::gcd(num, den);
    return g == 0 ? Rational{0, 1} : Rational{num / g, den / g};
  }
  double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }

  friend Rational operator+(const Rational& a, const Rational& b) {
    const std::uint64_t l = std::lcm(a.den, b.den);
    return Rational{a.num * (l / a.den) + b.num * (l / b.den), l}.reduced();
  }
  friend bool operator==(const Rational& a, const Rational& b) {
    const Rational x = a.reduced();
    const Rational y = b.reduced();
    return x.num == y.num && x.den == y.den;
  }
};

struct LatticeParams {
  int d = 2;
  int depth = 1;
};

/// d-adic interval I_{n,k} = [k d^{-n}, (k+1) d^{-n}).
struct Interval {
  int level = 0;
  std::uint64_t index = 0;

  friend auto operator<=>(const Interval&, const Interval&) = default;
};

/// Half-open range of atom indices [begin, end).
struct AtomRange {
  std::uint64_t begin = 0;
  std::uint64_t end = 0;

  std::uint64_t size() const { return end - begin; }
  bool contains(const AtomRange& other) const {
    return begin <= other.begin && other.end <= end;
  }
  friend bool operator==(const AtomRange&, const AtomRange&) = default;
};

/// Finite-depth d-adic interval system on [0,1), levels 0..depth.
/// Level `depth` intervals are the atoms. Immutable after construction.
class Lattice {
 public:
  Lattice(int d, int depth) : d_(d), depth_(depth) {
    if (d < 2) throw std::invalid_argument("lattice: branching factor d must be >= 2");
    if (depth < 1) throw std::invalid_argument("lattice: depth must be >= 1");
    pow_.reserve(static_cast<std::size_t>(depth) + 1);
    std::uint64_t p = 1;
    pow_.push_back(p);
    for (int n = 1; n <= depth; ++n) {
      if (p > std::numeric_limits<std::uint64_t>::max() / static_cast<std::uint64_t>(d))
        throw std::overflow_error("lattice: d^depth overflows 64 bits");
      p *= static_cast<std::uint64_t>(d);
      pow_.push_back(p);
    }
  }
  explicit Lattice(LatticeParams params) : Lattice(params.d, params.depth) {}

  int d() const { return d_; }
  int depth() const { return depth_; }
  LatticeParams params() const { return {d_, depth_}; }

  /// d^n for 0 <= n <= depth.
  std::uint64_t power(int n) const {
    check_level(n);
    return pow_[static_cast<std::size_t>(n)];
  }
  std::uint64_t num_atoms() const { return pow_.back(); }
  std::uint64_t level_size(int n) const { return power(n); }

  /// Number of Haar wavelets h_I^i with level(I) < depth and 1 <= i <= d-1.
  std::uint64_t num_wavelets() const { return num_atoms() - 1; }

  bool valid(const Interval& I) const {
    return I.level >= 0 && I.level <= depth_ && I.index < pow_[static_cast<std::size_t>(I.level)];
  }

  std::vector<Interval> intervals(int n) const {
    std::vector<Interval> out;
    const std::uint64_t count = level_size(n);
    out.reserve(count);
    for (std::uint64_t k = 0; k < count; ++k) out.push_back({n, k});
    return out;
  }

  std::vector<Interval> children(const Interval& I) const {
    check(I);
    if (I.level >= depth_) throw std::out_of_range("lattice: atoms have no children");
    std::vector<Interval> out;
    out.reserve(static_cast<std::size_t>(d_));
    for (int j = 0; j < d_; ++j)
      out.push_back({I.level + 1, I.index * static_cast<std::uint64_t>(d_) + static_cast<std::uint64_t>(j)});
    return out;
  }

  Interval parent(const Interval& I) const {
    check(I);
    if (I.level < 1) throw std::out_of_range("lattice: the root interval has no parent");
    return {I.level - 1, I.index / static_cast<std::uint64_t>(d_)};
  }

  /// Level-n ancestor (n <= level(I)).
  Interval ancestor(const Interval& I, int n) const {
    check(I);
    check_level(n);
    if (n > I.level) throw std::out_of_range("lattice: ancestor level exceeds interval level");
    return {n, I.index / pow_[static_cast<std::size_t>(I.level - n)]};
  }

  /// Level-n interval containing an atom.
  Interval interval_of_atom(std::uint64_t atom, int n) const {
    return ancestor(Interval{depth_, atom}, n);
  }

  AtomRange atom_range(const Interval& I) const {
    check(I);
    const std::uint64_t width = pow_[static_cast<std::size_t>(depth_ - I.level)];
    return {I.index * width, (I.index + 1) * width};
  }

  Rational measure(const Interval& I) const {
    check(I);
    return {1, pow_[static_cast<std::size_t>(I.level)]};
  }
  double measure_value(const Interval& I) const { return measure(I).to_double(); }
  double atom_measure() const { return 1.0 / static_cast<double>(num_atoms()); }

  friend bool operator==(const Lattice& a, const Lattice& b) {
    return a.d_ == b.d_ && a.depth_ == b.depth_;
  }

 private:
  void check_level(int n) const {
    if (n < 0 || n > depth_)
      throw std::out_of_range("lattice: level " + std::to_string(n) + " outside [0, " +
                              std::to_string(depth_) + "]");
  }
  void check(const Interval& I) const {
    check_level(I.level);
    if (I.index >= pow_[static_cast<std::size_t>(I.level)])
      throw std::out_of_range("lattice: interval index out of range");
  }

  int d_;
  int depth_;
  std::vector<std::uint64_t> pow_;
};

inline Lattice build_lattice(int d, int depth) { return Lattice(d, depth); }

}  // namespace paralab
