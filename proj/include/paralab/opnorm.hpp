#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "paralab/norms.hpp"
#include "paralab/operator_spec.hpp"
#include "paralab/parallel.hpp"
#include "paralab/rng.hpp"

namespace paralab {

struct SearchParams {
  int restarts = 4;
  int max_iters = 200;
  double step_init = 0.5;
  double step_shrink = 0.5;
  std::uint64_t seed = 1;
  double tol = 1e-6;

  void check() const {
    if (restarts < 1) throw std::invalid_argument("SearchParams: restarts must be >= 1");
    if (max_iters < 0) throw std::invalid_argument("SearchParams: max_iters must be >= 0");
    if (!(tol > 0.0)) throw std::invalid_argument("SearchParams: tol must be > 0");
    if (!(step_shrink > 0.0 && step_shrink < 1.0)) throw std::invalid_argument("SearchParams: step_shrink must lie in (0,1)");
    if (!(step_init > 0.0)) throw std::invalid_argument("SearchParams: step_init must be > 0");
  }
};

/// A ratio together with the inputs that achieve it.
struct RatioWitness {
  std::optional<StepFunction> symbol;
  std::optional<StepFunction> test_function;
  double ratio = 0.0;
  std::map<std::string, double> norms;
  int iterations = 0;
};

struct PowerOptions {
  double rel_tol = 1e-10;
  int max_iters = 10000;
  std::size_t dim_cap = 8192;
  std::uint64_t seed = 0x243F6A8885A308D3ULL;
};

/// value = |T witness| with |witness| = 1, so value is always a certified lower bound.
struct PowerResult {
  double value = 0.0;
  std::vector<cplx> witness;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline double vec_norm(const std::vector<cplx>& x) {
  double s = 0.0;
  for (const cplx& z : x) s += std::norm(z);
  return std::sqrt(s);
}

inline void vec_scale(std::vector<cplx>& x, double s) {
  for (cplx& z : x) z *= s;
}

inline std::vector<cplx> random_unit(std::size_t n, Rng& rng) {
  std::vector<cplx> x(n);
  for (cplx& z : x) z = rng.complex_normal();
  vec_scale(x, 1.0 / vec_norm(x));
  return x;
}

}  // namespace detail

/// Largest singular value of T by power iteration on T^*T. Stops when the
/// extrapolated remaining change of sigma^2 falls below rel_tol; one random
/// restart is made if the first run hits max_iters.
inline PowerResult power_sigma_max(const DenseMatrix& t, const PowerOptions& opt = {},
                                   const std::vector<cplx>* start = nullptr) {
  const std::size_t n = t.cols();
  PowerResult best;
  if (n == 0) {
    best.converged = true;
    return best;
  }
  Rng rng(opt.seed);
  const double lam_tol = 2.0 * opt.rel_tol;
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::vector<cplx> q;
    if (attempt == 0 && start && start->size() == n && detail::vec_norm(*start) > 0.0) {
      q = *start;
      detail::vec_scale(q, 1.0 / detail::vec_norm(q));
    } else {
      q = detail::random_unit(n, rng);
    }
    double lam_prev = -1.0;
    double delta_prev = -1.0;
    int stagnant = 0;
    for (int it = 1; it <= opt.max_iters; ++it) {
      const std::vector<cplx> y = t.apply(q);
      const double sigma = detail::vec_norm(y);
      const double lam = sigma * sigma;
      ++best.iterations;
      if (sigma > best.value || best.witness.empty()) {
        best.value = sigma;
        best.witness = q;
      }
      if (sigma == 0.0) {
        if (t.max_abs() == 0.0) {
          best.converged = true;
          return best;
        }
        break;  // q lies in the kernel: restart
      }
      std::vector<cplx> z = t.apply_adjoint(y);
      const double zn = detail::vec_norm(z);
      detail::vec_scale(z, 1.0 / zn);
      q = std::move(z);
      if (lam_prev >= 0.0) {
        const double delta = lam - lam_prev;
        double remaining = std::abs(delta);
        if (delta_prev > 0.0 && delta > 0.0) {
          const double r = delta / delta_prev;
          if (r < 1.0) remaining = delta * r / (1.0 - r);
          else remaining = kInf;
        }
        if (remaining <= lam_tol * lam && std::abs(delta) <= lam_tol * lam) {
          if (++stagnant >= 2) {
            best.converged = true;
            return best;
          }
        } else {
          stagnant = 0;
        }
        delta_prev = delta;
      }
      lam_prev = lam;
    }
  }
  return best;
}

struct L2NormResult {
  double value = 0.0;
  StepFunction witness;  // unit vector in L_2(S_2^m), supported on the first column
  int iterations = 0;
  bool converged = false;
};

/// sigma_max of `spec` on L_2(S_2^m). Uses the column reduction spec = T (x) id_m,
/// so the dense matrix has size d^N m rather than d^N m^2.
inline L2NormResult l2_opnorm_detail(const OperatorSpec& spec, const Lattice& lat, std::size_t m,
                                     const PowerOptions& opt = {}, const std::vector<cplx>* start = nullptr) {
  const std::size_t dim = lat.num_atoms() * m;
  if (dim > opt.dim_cap)
    throw std::length_error("l2_opnorm: assembled dimension " + std::to_string(dim) + " exceeds cap " +
                            std::to_string(opt.dim_cap));
  const DenseMatrix t = assemble_columnwise(spec, lat, m);
  const PowerResult pr = power_sigma_max(t, opt, start);
  StepFunction w(lat, m);
  const double s = 1.0 / std::sqrt(lat.atom_measure());
  for (std::size_t a = 0; a < lat.num_atoms(); ++a)
    for (std::size_t p = 0; p < m; ++p) w[a](p, 0) = pr.witness[a * m + p] * s;
  return {pr.value, std::move(w), pr.iterations, pr.converged};
}

inline L2NormResult l2_opnorm_detail(const OperatorSpec& spec, const PowerOptions& opt = {}) {
  const auto [lat, m] = infer_shape(spec);
  return l2_opnorm_detail(spec, lat, m, opt);
}

inline double l2_opnorm(const OperatorSpec& spec, const Lattice& lat, std::size_t m) {
  return l2_opnorm_detail(spec, lat, m).value;
}

inline double l2_opnorm(const OperatorSpec& spec) { return l2_opnorm_detail(spec).value; }

namespace detail {

inline double lp_ratio(const OperatorSpec& spec, const StepFunction& f, double p) {
  const double den = lp_norm(f, p);
  if (den == 0.0) return 0.0;
  return lp_norm(apply(spec, f), p) / den;
}

}  // namespace detail

/// Certified lower bound for the L_p -> L_p norm of `spec`: coordinate hill
/// climbing on the real and imaginary parts of the atom values of f.
inline RatioWitness lp_opnorm_lower(const OperatorSpec& spec, const Lattice& lat, std::size_t m, double p,
                                    const SearchParams& params = {}) {
  if (!(p > 1.0) || std::isinf(p)) throw std::invalid_argument("lp_opnorm_lower: p must lie in (1, infinity)");
  params.check();
  validate(spec, lat, m);
  struct Run {
    double ratio = -1.0;
    std::optional<StepFunction> f;
    int iters = 0;
  };
  std::vector<Run> runs(static_cast<std::size_t>(params.restarts));
  parallel_for(runs.size(), [&](std::size_t r) {
    Rng rng(trial_seed(params.seed, r));
    StepFunction f = random_atoms(lat, m, rng);
    double best = detail::lp_ratio(spec, f, p);
    double step = params.step_init * max_abs(f);
    int sweeps = 0;
    while (step >= params.tol && sweeps < params.max_iters) {
      ++sweeps;
      bool improved = false;
      for (std::size_t a = 0; a < f.num_atoms(); ++a) {
        for (std::size_t e = 0; e < m * m; ++e) {
          for (const cplx dir : {cplx{1.0, 0.0}, cplx{0.0, 1.0}}) {
            for (const double sign : {1.0, -1.0}) {
              cplx& z = f[a].data()[e];
              const cplx old = z;
              z = old + sign * step * dir;
              const double cand = detail::lp_ratio(spec, f, p);
              if (cand > best) {
                best = cand;
                improved = true;
                break;
              }
              z = old;
            }
          }
        }
      }
      if (!improved) step *= params.step_shrink;
    }
    runs[r] = {best, std::move(f), sweeps};
  });
  std::size_t arg = 0;
  for (std::size_t r = 1; r < runs.size(); ++r)
    if (runs[r].ratio > runs[arg].ratio) arg = r;
  RatioWitness out;
  out.test_function = std::move(runs[arg].f);
  out.ratio = runs[arg].ratio;
  out.iterations = runs[arg].iters;
  out.norms["f"] = lp_norm(*out.test_function, p);
  out.norms["Tf"] = lp_norm(apply(spec, *out.test_function), p);
  return out;
}

inline RatioWitness lp_opnorm_lower(const OperatorSpec& spec, double p, const SearchParams& params = {}) {
  const auto [lat, m] = infer_shape(spec);
  return lp_opnorm_lower(spec, lat, m, p, params);
}

// Katz scan: rho(b) = |pi_b|_{L_2 -> L_2} / |b|_{BMO_so}.

/// rho(b) for a matrix symbol b.
inline double katz_ratio(const StepFunction& b) {
  const double den = bmo_so(b);
  if (den == 0.0) throw std::invalid_argument("katz_ratio: symbol has zero BMO_so norm");
  return l2_opnorm(op::pi(b), b.lattice(), b.dim()) / den;
}

/// Block-diagonal embedding x -> diag(x, y) atomwise.
inline StepFunction block_diag(const StepFunction& b, const StepFunction& c) {
  if (!(b.lattice() == c.lattice())) throw std::invalid_argument("block_diag: lattice mismatch");
  std::vector<CMatrix> v;
  v.reserve(b.num_atoms());
  for (std::size_t a = 0; a < b.num_atoms(); ++a) v.push_back(block_diag(b[a], c[a]));
  return StepFunction(b.lattice(), std::move(v));
}

struct KatzRow {
  std::size_t n = 0;
  double ratio = 0.0;
  double bmo_so = 0.0;
  double opnorm2 = 0.0;
  std::uint64_t seed = 0;
  int iters = 0;
  double log_n1 = 0.0;
  double sqrt_log_n1 = 0.0;
};

struct KatzResult {
  std::vector<KatzRow> rows;
  std::vector<StepFunction> best;  // best-found symbol per row, normalized to bmo_so = 1
};

namespace detail {

struct AscentState {
  StepFunction b;
  double sigma = 0.0;
  std::vector<cplx> v;  // top right singular vector of the column-reduced matrix
  int iters = 0;
};

inline StepFunction normalize_bmo_so(const StepFunction& b) {
  const double s = bmo_so(b);
  if (s == 0.0) throw std::invalid_argument("katz: degenerate symbol");
  return b * cplx{1.0 / s, 0.0};
}

inline L2NormResult pi_norm(const StepFunction& b, const std::vector<cplx>* start) {
  return l2_opnorm_detail(op::pi(b), b.lattice(), b.dim(), PowerOptions{}, start);
}

inline std::vector<cplx> column_coordinates(const StepFunction& w) {
  const std::size_t m = w.dim();
  const double t = std::sqrt(w.lattice().atom_measure());
  std::vector<cplx> out(w.num_atoms() * m);
  for (std::size_t a = 0; a < w.num_atoms(); ++a)
    for (std::size_t p = 0; p < m; ++p) out[a * m + p] = w[a](p, 0) * t;
  return out;
}

/// d sigma / d conj(B_{I,i}) = <h_I^i, U> (avg_I V)^*, U = pi_b V / sigma.
inline HaarCoefficients sigma_gradient(const StepFunction& b, const StepFunction& v, double sigma) {
  const Lattice& lat = b.lattice();
  const std::size_t m = b.dim();
  StepFunction u = pi(b, v);
  u *= cplx{1.0 / sigma, 0.0};
  const HaarCoefficients cu = haar_analyze(u);
  HaarCoefficients g(lat, m);
  for (int n = 0; n < lat.depth(); ++n) {
    const std::vector<CMatrix> avg = level_averages(v, n);
    for (const Interval& I : lat.intervals(n)) {
      const CMatrix& va = avg[I.index];
      for (int i = 1; i < lat.d(); ++i) {
        const CMatrix& c = cu.at(I, i);
        CMatrix& gi = g.at(I, i);
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t s = 0; s < m; ++s) gi(r, s) = c(r, 0) * std::conj(va(s, 0));
      }
    }
  }
  return g;
}

/// d bmo_so / d conj(B_J) = <h_J, b> x x^* / (|I| bmo_so) for J inside the
/// maximizing interval I, x the top eigenvector of its oscillation matrix.
inline HaarCoefficients bmo_so_gradient(const StepFunction& b) {
  const Lattice& lat = b.lattice();
  const std::size_t m = b.dim();
  double best = -1.0;
  Interval arg{0, 0};
  CMatrix x(m);
  for (int n = 0; n < lat.depth(); ++n) {
    const std::vector<CMatrix> avg = level_averages(b, n);
    const std::uint64_t width = lat.num_atoms() / avg.size();
    for (std::uint64_t k = 0; k < avg.size(); ++k) {
      CMatrix acc(m);
      for (std::uint64_t a = k * width; a < (k + 1) * width; ++a) {
        const CMatrix dev = b[a] - avg[k];
        acc += adjoint_times(dev, dev);
      }
      acc *= 1.0 / static_cast<double>(width);
      const EigenDecomposition e = herm_eig(acc);
      if (e.values.front() > best) {
        best = e.values.front();
        arg = Interval{n, k};
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t c = 0; c < m; ++c) x(r, c) = e.vectors(r, 0) * std::conj(e.vectors(c, 0));
      }
    }
  }
  HaarCoefficients g(lat, m);
  if (!(best > 0.0)) return g;
  const HaarCoefficients cb = haar_analyze(b);
  const double w = static_cast<double>(lat.power(arg.level)) / std::sqrt(best);
  for (int n = arg.level; n < lat.depth(); ++n) {
    const std::uint64_t span = lat.power(n - arg.level);
    for (std::uint64_t k = arg.index * span; k < (arg.index + 1) * span; ++k) {
      const Interval J{n, k};
      for (int i = 1; i < lat.d(); ++i) {
        g.at(J, i) = cb.at(J, i) * x;
        g.at(J, i) *= w;
      }
    }
  }
  return g;
}

inline double coeff_norm(const HaarCoefficients& c) {
  double s = 0.0;
  for (const CMatrix& w : c.wavelets()) s += w.frobenius() * w.frobenius();
  return std::sqrt(s);
}

/// Gradient ascent on rho(b) = sigma(pi_b) / bmo_so(b) over Haar coefficients,
/// renormalized to bmo_so = 1 after every step; only improvements are accepted.
inline AscentState katz_ascent(const StepFunction& b0, const SearchParams& params) {
  AscentState st{normalize_bmo_so(b0), 0.0, {}, 0};
  L2NormResult r = pi_norm(st.b, nullptr);
  st.sigma = r.value;
  st.v = column_coordinates(r.witness);
  double step = params.step_init;
  while (st.iters < params.max_iters && step >= params.tol) {
    ++st.iters;
    const StepFunction vf = r.witness;
    HaarCoefficients g = sigma_gradient(st.b, vf, st.sigma);
    const HaarCoefficients gb = bmo_so_gradient(st.b);
    for (std::size_t k = 0; k < g.wavelets().size(); ++k) {
      CMatrix t = gb.wavelets()[k];
      t *= cplx{st.sigma, 0.0};
      g.wavelets()[k] -= t;
    }
    HaarCoefficients c = haar_analyze(st.b);
    const double gn = coeff_norm(g);
    if (gn == 0.0) break;
    const double scale = step * coeff_norm(c) / gn;
    for (std::size_t k = 0; k < c.wavelets().size(); ++k) {
      CMatrix delta = g.wavelets()[k];
      delta *= cplx{scale, 0.0};
      c.wavelets()[k] += delta;
    }
    c.mean() = CMatrix(c.dim());
    std::optional<StepFunction> cand;
    try {
      cand = normalize_bmo_so(haar_synthesize(c));
    } catch (const std::invalid_argument&) {
      step *= params.step_shrink;
      continue;
    }
    L2NormResult rc = pi_norm(*cand, &st.v);
    if (rc.value > st.sigma * (1.0 + 1e-12)) {
      st.b = std::move(*cand);
      st.sigma = rc.value;
      st.v = column_coordinates(rc.witness);
      r = std::move(rc);
      step = std::min(step / params.step_shrink, 4.0 * params.step_init);
    } else {
      step *= params.step_shrink;
    }
  }
  return st;
}

}  // namespace detail

/// For each n in `dims` (ascending powers of two), best-found rho over mean-zero
/// M_n-valued symbols. Start 0 for n > dims[0] is diag(best_prev, best_prev, ...),
/// so rho is nondecreasing along the scan. Other even starts perturb it, odd
/// starts are random.
inline KatzResult katz_scan(const std::vector<std::size_t>& dims, const Lattice& lat, const SearchParams& params) {
  params.check();
  if (dims.empty()) throw std::invalid_argument("katz_scan: empty dimension list");
  for (std::size_t k = 0; k < dims.size(); ++k) {
    const std::size_t n = dims[k];
    if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("katz_scan: dims must be powers of two");
    if (k > 0 && n <= dims[k - 1]) throw std::invalid_argument("katz_scan: dims must be strictly ascending");
  }
  KatzResult out;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    const std::size_t n = dims[k];
    const std::uint64_t row_seed = trial_seed(params.seed, n);
    std::vector<std::optional<detail::AscentState>> runs(static_cast<std::size_t>(params.restarts));
    parallel_for(runs.size(), [&](std::size_t r) {
      Rng rng(trial_seed(row_seed, r));
      StepFunction start = random_mean_zero(lat, n, rng);
      if (k > 0 && r % 2 == 0) {
        // Even restarts leave the embedded previous optimum; r > 0 adds a
        // perturbation that breaks the block-diagonal symmetry.
        StepFunction warm = out.best.back();
        while (warm.dim() < n) warm = block_diag(warm, warm);
        if (r > 0) {
          start *= cplx{0.3 * bmo_so(warm) / bmo_so(start), 0.0};
          warm += start;
        }
        start = std::move(warm);
      }
      runs[r] = detail::katz_ascent(start, params);
    });
    std::size_t arg = 0;
    for (std::size_t r = 1; r < runs.size(); ++r)
      if (runs[r]->sigma > runs[arg]->sigma) arg = r;
    detail::AscentState& st = *runs[arg];
    KatzRow row;
    row.n = n;
    row.bmo_so = bmo_so(st.b);
    row.opnorm2 = l2_opnorm(op::pi(st.b), lat, n);
    row.ratio = row.opnorm2 / row.bmo_so;
    row.seed = row_seed;
    row.iters = st.iters;
    row.log_n1 = std::log(static_cast<double>(n) + 1.0);
    row.sqrt_log_n1 = std::sqrt(row.log_n1);
    out.rows.push_back(row);
    out.best.push_back(std::move(st.b));
  }
  return out;
}

// Commutator ratio scan: |[pi_a, M_b] f|_p / (|a|_BMO |b|_BMO_M |f|_p).

struct ScanRow {
  int depth = 0;
  double p = 2.0;
  double sup_ratio = 0.0;
  double q50 = 0.0;
  double q90 = 0.0;
  std::size_t trials = 0;  // non-degenerate trials
  std::uint64_t seed = 0;
  std::vector<double> ratios;  // per-trial ratios in trial order, degenerate trials omitted
};

/// Nearest-rank quantile of an unsorted sample.
inline double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) throw std::invalid_argument("quantile: empty sample");
  std::sort(xs.begin(), xs.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(xs.size())));
  return xs[std::clamp<std::size_t>(rank, 1, xs.size()) - 1];
}

namespace detail {

inline constexpr double kDegenerate = 1e-12;

/// Runs `trial(rng)` for t in [0, trials) and summarizes the finite ratios it returns.
template <typename Trial>
ScanRow ratio_row(int depth, double p, int trials, std::uint64_t seed, Trial&& trial) {
  std::vector<std::optional<double>> slot(static_cast<std::size_t>(trials));
  parallel_for(slot.size(), [&](std::size_t t) {
    Rng rng(trial_seed(seed, t));
    slot[t] = trial(rng);
  });
  ScanRow row;
  row.depth = depth;
  row.p = p;
  row.seed = seed;
  for (const auto& s : slot)
    if (s) row.ratios.push_back(*s);
  if (row.ratios.empty()) throw std::runtime_error("ratio scan: all trials degenerate at depth " + std::to_string(depth));
  row.trials = row.ratios.size();
  row.sup_ratio = *std::max_element(row.ratios.begin(), row.ratios.end());
  row.q50 = quantile(row.ratios, 0.5);
  row.q90 = quantile(row.ratios, 0.9);
  return row;
}

}  // namespace detail

/// One commutator trial; nullopt when the denominator is degenerate.
inline std::optional<double> commutator_ratio(const StepFunction& a, const StepFunction& b, const StepFunction& f,
                                              double p) {
  const double den = bmo_M(a) * bmo_M(b) * lp_norm(f, p);
  if (!(den >= detail::kDegenerate)) return std::nullopt;
  return lp_norm(commutator_pi_mult(a, b, f), p) / den;
}

/// Per depth N: scalar mean-zero a, m x m mean-zero b, random f on the d-adic lattice of depth N.
inline std::vector<ScanRow> commutator_ratio_scan(double p, const std::vector<int>& depths, int trials, int d,
                                                  std::size_t m, std::uint64_t seed) {
  if (!(p > 1.0) || std::isinf(p)) throw std::invalid_argument("commutator_ratio_scan: p must lie in (1, infinity)");
  if (trials < 1) throw std::invalid_argument("commutator_ratio_scan: trials must be >= 1");
  std::vector<ScanRow> rows;
  for (int depth : depths) {
    if (depth < 2 || depth > 8) throw std::invalid_argument("commutator_ratio_scan: depths must lie in [2, 8]");
    const Lattice lat(d, depth);
    rows.push_back(detail::ratio_row(depth, p, trials, seed, [&](Rng& rng) {
      const StepFunction a = random_mean_zero(lat, 1, rng);
      const StepFunction b = random_mean_zero(lat, m, rng);
      const StepFunction f = random_atoms(lat, m, rng);
      return commutator_ratio(a, b, f, p);
    }));
  }
  return rows;
}

/// One Theta_b trial. p >= 2: |Theta_b f|_{h_{p,c}} / (|b|_BMO_M |f|_p);
/// p < 2: |Theta_b f|_p / (|b|_BMO_M |f|_{h_{p,c}}) with mean-zero f.
inline std::optional<double> theta_ratio(const StepFunction& b, const StepFunction& f, double p) {
  const StepFunction tf = theta(b, f);
  if (p >= 2.0) {
    const double den = bmo_M(b) * lp_norm(f, p);
    if (!(den >= detail::kDegenerate)) return std::nullopt;
    return hpc_norm(tf, p) / den;
  }
  const double den = bmo_M(b) * hpc_norm(f, p);
  if (!(den >= detail::kDegenerate)) return std::nullopt;
  return lp_norm(tf, p) / den;
}

inline std::vector<ScanRow> theta_ratio_scan(double p, const std::vector<int>& depths, int trials, int d,
                                             std::size_t m, std::uint64_t seed) {
  if (!(p > 1.0) || std::isinf(p)) throw std::invalid_argument("theta_ratio_scan: p must lie in (1, infinity)");
  if (trials < 1) throw std::invalid_argument("theta_ratio_scan: trials must be >= 1");
  std::vector<ScanRow> rows;
  for (int depth : depths) {
    if (depth < 1) throw std::invalid_argument("theta_ratio_scan: depth must be >= 1");
    const Lattice lat(d, depth);
    rows.push_back(detail::ratio_row(depth, p, trials, seed, [&](Rng& rng) {
      const StepFunction b = random_mean_zero(lat, m, rng);
      const StepFunction f = p >= 2.0 ? random_atoms(lat, m, rng) : random_mean_zero(lat, m, rng);
      return theta_ratio(b, f, p);
    }));
  }
  return rows;
}

}  // namespace paralab
