#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "paralab/norms.hpp"
#include "paralab/operator_spec.hpp"
#include "paralab/opnorm.hpp"
#include "paralab/parallel.hpp"
#include "paralab/paraproducts.hpp"
#include "paralab/rng.hpp"

namespace paralab {

using json = nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kReportSchema = 1;

inline const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds{"identities", "norms",         "opnorm",
                                              "katz",       "commutator-scan", "theta-scan"};
  return kinds;
}

struct ExperimentConfig {
  std::string kind = "identities";
  int d = 2;
  int depth = 3;
  std::size_t dim = 2;
  double p = 2.0;
  int trials = 50;
  std::uint64_t seed = 7;
  std::optional<double> tol;                  // replaces every upper-bound tolerance
  std::map<std::string, double> tolerances;   // per-case overrides, applied after `tol`
  std::vector<std::size_t> dims{1, 2, 4, 8};  // katz
  std::vector<int> depths;                    // scans; empty means {depth}
  std::string op = "pi(b)";                   // opnorm
  int restarts = 4;
  int max_iters = 200;
  std::string out;
  std::string format = "json";
  bool timing = false;

  void check() const {
    bool known = false;
    for (const auto& k : experiment_kinds()) known = known || k == kind;
    if (!known) throw std::invalid_argument("unknown experiment kind '" + kind + "'");
    if (d < 2) throw std::invalid_argument("d must be >= 2");
    if (depth < 1) throw std::invalid_argument("depth must be >= 1");
    if (dim < 1) throw std::invalid_argument("dim must be >= 1");
    if (!(p >= 1.0)) throw std::invalid_argument("p must be >= 1");
    if (trials < 0) throw std::invalid_argument("trials must be >= 0");
    if (format != "json" && format != "csv") throw std::invalid_argument("format must be json or csv");
    if (tol && !(*tol > 0.0)) throw std::invalid_argument("tol must be > 0");
  }

  std::vector<int> scan_depths() const { return depths.empty() ? std::vector<int>{depth} : depths; }
};

inline void to_json(json& j, const ExperimentConfig& c) {
  j = json{{"kind", c.kind},     {"d", c.d},         {"depth", c.depth},         {"dim", c.dim},
           {"p", c.p},           {"trials", c.trials}, {"seed", c.seed},         {"tolerances", c.tolerances},
           {"dims", c.dims},     {"depths", c.depths}, {"op", c.op},             {"restarts", c.restarts},
           {"max_iters", c.max_iters}, {"format", c.format}};
  j["tol"] = c.tol ? json(*c.tol) : json(nullptr);
}

/// Reads the keys present in `j` into `c`; absent keys keep their current values.
inline void from_json(const json& j, ExperimentConfig& c) {
  static const std::vector<std::string> known{"kind", "d",    "depth",    "dim",       "p",   "trials",
                                              "seed", "tol",  "tolerances", "dims",    "depths", "op",
                                              "restarts", "max_iters", "out", "format", "timing"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw std::invalid_argument("unknown config key '" + it.key() + "'");
  auto get = [&](const char* k, auto& v) {
    if (j.contains(k)) j.at(k).get_to(v);
  };
  get("kind", c.kind);
  get("d", c.d);
  get("depth", c.depth);
  get("dim", c.dim);
  get("p", c.p);
  get("trials", c.trials);
  get("seed", c.seed);
  if (j.contains("tol")) c.tol = j.at("tol").is_null() ? std::nullopt : std::optional<double>(j.at("tol").get<double>());
  get("tolerances", c.tolerances);
  get("dims", c.dims);
  get("depths", c.depths);
  get("op", c.op);
  get("restarts", c.restarts);
  get("max_iters", c.max_iters);
  get("out", c.out);
  get("format", c.format);
  get("timing", c.timing);
}

/// comparator "le": pass iff value <= tolerance; "ge": pass iff value >= tolerance;
/// "monitor": recorded statistic, always passes.
struct CaseRecord {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  std::string comparator = "le";
  bool pass = true;

  bool operator==(const CaseRecord&) const = default;
};

inline bool evaluate_case(double value, double tolerance, const std::string& comparator) {
  if (comparator == "le") return value <= tolerance;
  if (comparator == "ge") return value >= tolerance;
  if (comparator == "monitor") return true;
  throw std::invalid_argument("unknown comparator '" + comparator + "'");
}

struct ExperimentReport {
  int schema = kReportSchema;
  std::string version = kToolVersion;
  std::uint64_t seed = 0;
  json config;
  std::vector<CaseRecord> cases;
  double max_residual = 0.0;
  bool pass_all = true;
  double wall_time = 0.0;
  json data = json::object();

  void finalize() {
    max_residual = 0.0;
    pass_all = true;
    for (CaseRecord& c : cases) {
      c.pass = evaluate_case(c.value, c.tolerance, c.comparator);
      if (c.comparator == "le") max_residual = std::max(max_residual, c.value);
      pass_all = pass_all && c.pass;
    }
  }

  const CaseRecord* find(const std::string& name) const {
    for (const CaseRecord& c : cases)
      if (c.name == name) return &c;
    return nullptr;
  }

  bool operator==(const ExperimentReport&) const = default;
};

inline void to_json(json& j, const CaseRecord& c) {
  j = json{{"name", c.name}, {"value", c.value}, {"tolerance", c.tolerance}, {"comparator", c.comparator}, {"pass", c.pass}};
}

inline void from_json(const json& j, CaseRecord& c) {
  j.at("name").get_to(c.name);
  j.at("value").get_to(c.value);
  j.at("tolerance").get_to(c.tolerance);
  j.at("comparator").get_to(c.comparator);
  j.at("pass").get_to(c.pass);
}

inline void to_json(json& j, const ExperimentReport& r) {
  j = json{{"schema", r.schema},
           {"tool", "paralab"},
           {"version", r.version},
           {"seed", r.seed},
           {"config", r.config},
           {"cases", r.cases},
           {"aggregate", {{"max_residual", r.max_residual}, {"pass_all", r.pass_all}, {"wall_time", r.wall_time}}},
           {"data", r.data}};
}

inline void from_json(const json& j, ExperimentReport& r) {
  j.at("schema").get_to(r.schema);
  if (r.schema != kReportSchema) throw std::invalid_argument("unsupported report schema " + std::to_string(r.schema));
  j.at("version").get_to(r.version);
  j.at("seed").get_to(r.seed);
  r.config = j.at("config");
  j.at("cases").get_to(r.cases);
  const json& agg = j.at("aggregate");
  agg.at("max_residual").get_to(r.max_residual);
  agg.at("pass_all").get_to(r.pass_all);
  agg.at("wall_time").get_to(r.wall_time);
  r.data = j.at("data");
}

// Step functions as JSON: {d, N, m, atoms: [[re, im], ...]} with atoms-major,
// row-major entries.

inline json step_function_to_json(const StepFunction& f) {
  json atoms = json::array();
  for (const CMatrix& v : f.values())
    for (const cplx& z : v.data()) atoms.push_back({z.real(), z.imag()});
  return json{{"d", f.lattice().d()}, {"N", f.lattice().depth()}, {"m", f.dim()}, {"atoms", atoms}};
}

inline StepFunction step_function_from_json(const json& j) {
  const Lattice lat(j.at("d").get<int>(), j.at("N").get<int>());
  const auto m = j.at("m").get<std::size_t>();
  const json& atoms = j.at("atoms");
  if (atoms.size() != lat.num_atoms() * m * m) throw std::invalid_argument("step function JSON: wrong entry count");
  std::vector<cplx> x;
  x.reserve(atoms.size());
  for (const json& z : atoms) x.emplace_back(z.at(0).get<double>(), z.at(1).get<double>());
  std::vector<CMatrix> v;
  for (std::uint64_t a = 0; a < lat.num_atoms(); ++a)
    v.push_back(CMatrix::from_entries(m, std::span<const cplx>(x.data() + a * m * m, m * m)));
  return StepFunction(lat, std::move(v));
}

// Output.

/// Shortest decimal form that reads back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

/// Writes `contents` to `path` through a temporary file in the same directory.
inline void write_atomically(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    os << contents;
    os.flush();
    if (!os) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot rename onto '" + path + "': " + ec.message());
  }
}

inline std::string report_json_text(const ExperimentReport& r) { return json(r).dump(2) + "\n"; }

inline const char* kKatzCsvHeader = "n,ratio,bmo_so,opnorm2,seed,iters";
inline const char* kScanCsvHeader = "depth,p,sup_ratio,q50,q90,trials,seed";

/// CSV view of a report. The column set depends on the experiment kind.
inline std::string report_csv_text(const ExperimentReport& r) {
  std::ostringstream os;
  const std::string kind = r.config.value("kind", "");
  if (kind == "katz") {
    os << kKatzCsvHeader << "\n";
    for (const json& row : r.data.at("rows"))
      os << row.at("n").get<std::size_t>() << ',' << format_double(row.at("ratio")) << ','
         << format_double(row.at("bmo_so")) << ',' << format_double(row.at("opnorm2")) << ','
         << row.at("seed").get<std::uint64_t>() << ',' << row.at("iters").get<int>() << "\n";
  } else if (kind == "commutator-scan" || kind == "theta-scan") {
    os << kScanCsvHeader << "\n";
    for (const json& row : r.data.at("rows"))
      os << row.at("depth").get<int>() << ',' << format_double(row.at("p")) << ','
         << format_double(row.at("sup_ratio")) << ',' << format_double(row.at("q50")) << ','
         << format_double(row.at("q90")) << ',' << row.at("trials").get<std::size_t>() << ','
         << row.at("seed").get<std::uint64_t>() << "\n";
  } else if (kind == "identities") {
    os << "name,value,tolerance,comparator,pass\n";
    for (const CaseRecord& c : r.cases)
      os << c.name << ',' << format_double(c.value) << ',' << format_double(c.tolerance) << ',' << c.comparator << ','
         << (c.pass ? "true" : "false") << "\n";
  } else {
    os << "name,value\n";
    for (auto it = r.data.begin(); it != r.data.end(); ++it)
      if (it.value().is_number()) os << it.key() << ',' << format_double(it.value().get<double>()) << "\n";
  }
  return os.str();
}

inline void write_report(const ExperimentReport& r, const std::string& path, const std::string& format) {
  write_atomically(path, format == "csv" ? report_csv_text(r) : report_json_text(r));
}

// Identity suite.

namespace detail {

/// Suite case: per-trial residual from an independent generator.
struct SuiteCase {
  std::string name;
  double tolerance;
  std::string comparator;
  std::function<double(Rng&)> trial;  // null for deterministic cases
  std::function<double()> once;
  bool reduce_min = false;            // "ge" cases keep the smallest trial value
};

inline double classical_bmo_sq_on(const StepFunction& b, const Interval& I) {
  const Lattice& lat = b.lattice();
  const AtomRange r = lat.atom_range(I);
  cplx mean = 0.0;
  for (std::uint64_t a = r.begin; a < r.end; ++a) mean += b[a](0, 0);
  mean /= static_cast<double>(r.size());
  double acc = 0.0;
  for (std::uint64_t a = r.begin; a < r.end; ++a) acc += std::norm(b[a](0, 0) - mean);
  return acc / static_cast<double>(r.size());
}

/// Scalar sup_I avg_I |b - b_I|^2, square-rooted.
inline double classical_bmo(const StepFunction& b) {
  const Lattice& lat = b.lattice();
  double best = 0.0;
  for (int n = 0; n < lat.depth(); ++n)
    for (const Interval& I : lat.intervals(n)) best = std::max(best, classical_bmo_sq_on(b, I));
  return std::sqrt(best);
}

/// Scalar sup_{m>=1} sup_{|I| = d^-m} ( |b_I - b_parent(I)|^2 + avg_I |b - b_I|^2 )^{1/2}.
inline double classical_martingale_bmo(const StepFunction& b) {
  const Lattice& lat = b.lattice();
  double best = 0.0;
  for (int n = 1; n <= lat.depth(); ++n) {
    for (const Interval& I : lat.intervals(n)) {
      const cplx jump = interval_average(b, I)(0, 0) - interval_average(b, lat.parent(I))(0, 0);
      const double osc = n < lat.depth() ? classical_bmo_sq_on(b, I) : 0.0;
      best = std::max(best, std::norm(jump) + osc);
    }
  }
  return std::sqrt(best);
}

inline double rel_diff(double x, double y) { return std::abs(x - y) / std::max(1.0, std::abs(y)); }

inline OperatorFamily random_family(std::size_t count, int width, std::size_t m, Rng& rng) {
  OperatorFamily fam(count);
  for (auto& row : fam)
    for (int i = 0; i < width; ++i) row.push_back(random_gaussian(m, rng));
  return fam;
}

inline std::vector<SuiteCase> identity_cases(const ExperimentConfig& cfg) {
  const Lattice lat(cfg.d, cfg.depth);
  const int d = cfg.d;
  const int depth = cfg.depth;
  const std::size_t m = cfg.dim;
  const double p = std::max(cfg.p, 1.0 + 1e-9);
  const double pc = conjugate_exponent(p);
  std::vector<SuiteCase> cs;

  auto add = [&](std::string name, double tol, std::function<double(Rng&)> fn) {
    cs.push_back({std::move(name), tol, "le", std::move(fn), nullptr, false});
  };
  auto add_once = [&](std::string name, double tol, std::function<double()> fn) {
    cs.push_back({std::move(name), tol, "le", nullptr, std::move(fn), false});
  };

  add_once("haar_gram", 1e-10, [lat] {
    std::vector<StepFunction> basis{StepFunction::constant(lat, CMatrix::identity(1))};
    for (int n = 0; n < lat.depth(); ++n)
      for (const Interval& I : lat.intervals(n))
        for (int i = 1; i < lat.d(); ++i) basis.push_back(haar_function(lat, I, i));
    double worst = 0.0;
    for (std::size_t x = 0; x < basis.size(); ++x)
      for (std::size_t y = 0; y < basis.size(); ++y)
        worst = std::max(worst, std::abs(hs_inner(basis[x], basis[y]) - (x == y ? 1.0 : 0.0)));
    return worst;
  });
  add_once("product_rule", 1e-12, [lat] {
    double worst = 0.0;
    for (int n = 0; n < lat.depth(); ++n)
      for (const Interval& I : lat.intervals(n))
        for (int i = 1; i <= lat.d(); ++i)
          for (int j = 1; j <= lat.d(); ++j) {
            StepFunction lhs = haar_function(lat, I, i) * haar_function(lat, I, j);
            StepFunction rhs = haar_function(lat, I, remainder_1d(i + j, lat.d()));
            rhs *= cplx{1.0 / std::sqrt(lat.measure_value(I)), 0.0};
            worst = std::max(worst, max_abs_diff(lhs, rhs));
          }
    return worst;
  });
  add("haar_roundtrip", 1e-12, [=](Rng& rng) {
    const StepFunction f = random_atoms(lat, m, rng);
    return max_abs_diff(haar_synthesize(haar_analyze(f)), f);
  });
  add("plancherel", 1e-10, [=](Rng& rng) {
    const StepFunction f = random_atoms(lat, m, rng);
    const HaarCoefficients c = haar_analyze(f);
    double s = c.mean().frobenius() * c.mean().frobenius();
    for (const CMatrix& w : c.wavelets()) s += w.frobenius() * w.frobenius();
    return rel_diff(s, l2_norm(f) * l2_norm(f));
  });
  add("tower_property", 1e-12, [=](Rng& rng) {
    const StepFunction f = random_atoms(lat, m, rng);
    double worst = 0.0;
    for (int n = 0; n <= depth; ++n)
      for (int k = 0; k <= depth; ++k)
        worst = std::max(worst, max_abs_diff(cond_expect(cond_expect(f, n), k), cond_expect(f, std::min(n, k))));
    return worst;
  });
  add("cond_expect_module", 1e-11, [=](Rng& rng) {
    const StepFunction f = random_atoms(lat, m, rng);
    const StepFunction g = random_atoms(lat, m, rng);
    double worst = 0.0;
    for (int n = 0; n <= depth; ++n) {
      const StepFunction gn = cond_expect(g, n);
      worst = std::max(worst, max_abs_diff(cond_expect(gn * f, n), gn * cond_expect(f, n)));
      worst = std::max(worst, max_abs_diff(cond_expect(f * gn, n), cond_expect(f, n) * gn));
    }
    return worst;
  });
  add("decomposition", 1e-11, [=](Rng& rng) {
    const StepFunction b = random_atoms(lat, m, rng);
    const StepFunction f = random_atoms(lat, m, rng);
    const StepFunction rhs = pi(b, f) + lambda(b, f) + r_op(b, f) + cond_expect(b, 0) * cond_expect(f, 0);
    return max_abs_diff(b * f, rhs);
  });
  add("pi_haar_form", 1e-11, [=](Rng& rng) {
    const StepFunction b = random_atoms(lat, m, rng);
    const StepFunction f = random_atoms(lat, m, rng);
    return std::max(max_abs_diff(pi(b, f), pi_haar(b, f)), max_abs_diff(pi_star(b, f), pi_star_haar(b, f)));
  });
  add("adjoint_pairing", 1e-10, [=](Rng& rng) {
    const StepFunction b = random_atoms(lat, m, rng);
    const StepFunction f = random_atoms(lat, m, rng);
    const StepFunction g = random_atoms(lat, m, rng);
    double worst = 0.0;
    for (const OperatorSpec& s : {op::pi(b), op::pi_star(b), op::lambda(b), op::r(b), op::theta(b), op::mult(b)})
      worst = std::max(worst, std::abs(hs_inner(apply(s, f), g) - hs_inner(f, apply_adjoint(s, g))));
    return worst;
  });
  add("theta_definition", 1e-11, [=](Rng& rng) {
    const StepFunction b = random_atoms(lat, m, rng);
    const StepFunction f = random_atoms(lat, m, rng);
    const auto db = martingale_differences(b);
    const auto ef = martingale(f);
    StepFunction direct(lat, m);
    for (int k = 1; k <= depth; ++k) direct += db[k] * ef[k];
    return max_abs_diff(theta(b, f), direct);
  });
  add("commutator_pi_r", 1e-9, [=](Rng& rng) {
    const StepFunction a = random_mean_zero(lat, 1, rng);
    const StepFunction b = random_mean_zero(lat, m, rng);
    const StepFunction f = random_atoms(lat, m, rng);
    return max_abs_diff(commutator_pi_r(a, b, f), commutator_pi_r_closed(a, b, f));
  });
  add("commutator_pi_mult", 1e-9, [=](Rng& rng) {
    const StepFunction a = random_mean_zero(lat, 1, rng);
    const StepFunction b = random_mean_zero(lat, m, rng);
    const StepFunction f = random_atoms(lat, m, rng);
    const StepFunction rhs = v_ab(a, b, f) - theta(b, pi(a, f));
    return max_abs_diff(commutator_pi_mult(a, b, f), rhs);
  });
  add("commutator_adjoint", 1e-10, [=](Rng& rng) {
    const StepFunction a = random_mean_zero(lat, 1, rng);
    const StepFunction b = random_mean_zero(lat, m, rng);
    const StepFunction f = random_atoms(lat, m, rng);
    const StepFunction g = random_atoms(lat, m, rng);
    const StepFunction cf = pi_star(a, b * f) - b * pi_star(a, f);
    const StepFunction bs = b.adjoint();
    const StepFunction dg = bs * pi(a, g) - pi(a, bs * g);
    return std::abs(hs_inner(cf, g) - hs_inner(f, dg));
  });
  add("w_conditional_closed_form", 1e-9, [=](Rng& rng) {
    const StepFunction a = random_mean_zero(lat, 1, rng);
    const StepFunction f = random_atoms(lat, m, rng);
    const StepFunction g = random_atoms(lat, m, rng);
    const StepFunction w = w_afg(a, f, g);
    double worst = 0.0;
    for (int k = 0; k <= depth; ++k) worst = std::max(worst, max_abs_diff(cond_expect(w, k), w_cond_closed(a, f, g, k)));
    return worst;
  });
  if (d >= 3) {
    add("dk_product_expansion", 1e-11, [=](Rng& rng) {
      const StepFunction b = random_atoms(lat, m, rng);
      const StepFunction f = random_atoms(lat, m, rng);
      double worst = 0.0;
      for (int k = 1; k <= depth; ++k)
        worst = std::max(worst, max_abs_diff(mart_diff(mart_diff(b, k) * mart_diff(f, k), k),
                                             dk_product_expansion(b, f, k)));
      return worst;
    });
  }
  add("cond_square_closed_form", 1e-9, [=](Rng& rng) {
    const StepFunction b = random_atoms(lat, m, rng);
    const StepFunction f = random_atoms(lat, m, rng);
    const StepFunction g = lambda(b, f) - pi_adjoint_of_adjoint_symbol(b, f);
    return max_abs_diff(cond_square_fn_squared(g), cond_square_closed_form(b, f));
  });
  if (d == 2) {
    add("lambda_collapse", 1e-10, [=](Rng& rng) {
      const StepFunction b = random_atoms(lat, m, rng);
      const StepFunction f = random_atoms(lat, m, rng);
      return max_abs_diff(lambda(b, f), pi_adjoint_of_adjoint_symbol(b, f));
    });
  } else {
    cs.push_back({"lambda_genericity", 1e-6, "ge",
                  [=](Rng& rng) {
                    const StepFunction b = random_mean_zero(lat, m, rng);
                    const StepFunction f = random_mean_zero(lat, m, rng);
                    return max_abs_diff(lambda(b, f), pi_adjoint_of_adjoint_symbol(b, f));
                  },
                  nullptr, true});
  }
  add("aibi", 1e-9, [=](Rng& rng) {
    const std::size_t count = (lat.num_atoms() - 1) / static_cast<std::size_t>(d - 1);
    const OperatorFamily a = random_family(count, d - 1, m, rng);
    const OperatorFamily b = random_family(count, d - 1, m, rng);
    return std::max(0.0, -psd_min_eig(aibi_rhs(a, b) - aibi_lhs(a, b)));
  });
  add("regularity", 1e-10, [=](Rng& rng) {
    const StepFunction g = random_atoms(lat, m, rng);
    StepFunction diff = cond_square_fn_squared(g);
    diff *= cplx{static_cast<double>(d), 0.0};
    diff -= square_fn_squared(g);
    double worst = 0.0;
    for (const CMatrix& v : diff.values()) worst = std::max(worst, -psd_min_eig(v));
    return worst;
  });
  add("bmo_so_le_bmo_M", 1e-10, [=](Rng& rng) {
    const StepFunction b = random_atoms(lat, m, rng);
    return std::max(0.0, bmo_so(b) - bmo_M(b));
  });
  add("homogeneity", 1e-10, [=](Rng& rng) {
    const StepFunction f = random_atoms(lat, m, rng);
    const cplx lam = rng.complex_normal();
    StepFunction g = f;
    g *= lam;
    const double s = std::abs(lam);
    const std::vector<std::function<double(const StepFunction&)>> norms{
        [&](const StepFunction& x) { return lp_norm(x, p); },
        [&](const StepFunction& x) { return lp_norm(x, kInf); },
        [](const StepFunction& x) { return bmo_M(x); },
        [](const StepFunction& x) { return bmo_so(x); },
        [](const StepFunction& x) { return bmo_column(x); },
        [](const StepFunction& x) { return bmo_row(x); },
        [&](const StepFunction& x) { return hpc_norm(x, p); },
        [](const StepFunction& x) { return h1max_norm(x); }};
    double worst = 0.0;
    for (const auto& nrm : norms) worst = std::max(worst, rel_diff(nrm(g), s * nrm(f)));
    return worst;
  });
  add("bmo_scalar_collapse", 1e-10, [=](Rng& rng) {
    const StepFunction b = random_atoms(lat, 1, rng);
    const double classic = classical_bmo(b);
    return std::max({std::abs(bmo_M(b) - classic), std::abs(bmo_so(b) - classic),
                     std::abs(bmo_column(b) - classical_martingale_bmo(b))});
  });
  add("holder", 1e-9, [=](Rng& rng) {
    const StepFunction f = random_atoms(lat, m, rng);
    const StepFunction g = random_atoms(lat, m, rng);
    return std::max(0.0, std::abs(hs_inner(f, g)) - lp_norm(f, p) * lp_norm(g, pc));
  });
  cs.push_back({"bmo_cr_over_bmo_M", 0.0, "monitor",
                [=](Rng& rng) {
                  const StepFunction b = random_mean_zero(lat, m, rng);
                  return bmo_cr(b) / bmo_M(b);
                },
                nullptr, false});
  if (p > 1.0 && std::isfinite(p)) {
    cs.push_back({"maximal_tail_ratio", 0.0, "monitor",
                  [=](Rng& rng) {
                    const StepFunction a = random_mean_zero(lat, 1, rng);
                    const StepFunction f = random_atoms(lat, m, rng);
                    return maximal_tail_statistic(a, f, p).ratio;
                  },
                  nullptr, false});
  }
  return cs;
}

inline double apply_tolerance(const ExperimentConfig& cfg, const std::string& name, const std::string& comparator,
                              double tol) {
  if (cfg.tol && comparator == "le") tol = *cfg.tol;
  if (auto it = cfg.tolerances.find(name); it != cfg.tolerances.end()) tol = it->second;
  return tol;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline ExperimentReport make_report(const ExperimentConfig& cfg) {
  ExperimentReport r;
  r.seed = cfg.seed;
  r.config = cfg;
  return r;
}

}  // namespace detail

/// Every identity and inequality of the library over `trials` random instances;
/// each case records its worst trial. trials = 0 yields an empty, passing report.
inline ExperimentReport run_identity_suite(const ExperimentConfig& cfg) {
  cfg.check();
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentReport report = detail::make_report(cfg);
  if (cfg.trials > 0) {
    const std::vector<detail::SuiteCase> cs = detail::identity_cases(cfg);
    const auto trials = static_cast<std::size_t>(cfg.trials);
    // slot[t][c]: every trial draws its inputs case by case from one generator.
    std::vector<std::vector<double>> slot(trials, std::vector<double>(cs.size(), 0.0));
    parallel_for(trials, [&](std::size_t t) {
      Rng rng(trial_seed(cfg.seed, t));
      for (std::size_t c = 0; c < cs.size(); ++c)
        if (cs[c].trial) slot[t][c] = cs[c].trial(rng);
    });
    for (std::size_t c = 0; c < cs.size(); ++c) {
      double v;
      if (cs[c].once) {
        v = cs[c].once();
      } else {
        v = slot[0][c];
        for (std::size_t t = 1; t < trials; ++t) v = cs[c].reduce_min ? std::min(v, slot[t][c]) : std::max(v, slot[t][c]);
      }
      const double tol = detail::apply_tolerance(cfg, cs[c].name, cs[c].comparator, cs[c].tolerance);
      report.cases.push_back({cs[c].name, v, tol, cs[c].comparator, true});
    }
  }
  report.finalize();
  report.wall_time = cfg.timing ? detail::seconds_since(t0) : 0.0;
  return report;
}

inline json scan_rows_json(const std::vector<ScanRow>& rows) {
  json out = json::array();
  for (const ScanRow& r : rows)
    out.push_back({{"depth", r.depth}, {"p", r.p}, {"sup_ratio", r.sup_ratio}, {"q50", r.q50}, {"q90", r.q90},
                   {"trials", r.trials}, {"seed", r.seed}, {"ratios", r.ratios}});
  return out;
}

/// Random symbols for ad-hoc operator specs: `a` is scalar, `b` and `c` are
/// m x m; all mean-zero, drawn in that order from `seed`.
inline SymbolTable default_symbols(const Lattice& lat, std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  SymbolTable t;
  t.emplace("a", random_mean_zero(lat, 1, rng));
  t.emplace("b", random_mean_zero(lat, m, rng));
  t.emplace("c", random_mean_zero(lat, m, rng));
  return t;
}

/// katz, commutator-scan, theta-scan, norms and opnorm experiments.
inline ExperimentReport run_scan(const ExperimentConfig& cfg) {
  cfg.check();
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentReport report = detail::make_report(cfg);
  SearchParams sp;
  sp.restarts = cfg.restarts;
  sp.max_iters = cfg.max_iters;
  sp.seed = cfg.seed;

  if (cfg.kind == "katz") {
    const Lattice lat(cfg.d, cfg.depth);
    const KatzResult kr = katz_scan(cfg.dims, lat, sp);
    json rows = json::array();
    double drop = 0.0;
    for (std::size_t k = 0; k < kr.rows.size(); ++k) {
      const KatzRow& r = kr.rows[k];
      rows.push_back({{"n", r.n}, {"ratio", r.ratio}, {"bmo_so", r.bmo_so}, {"opnorm2", r.opnorm2}, {"seed", r.seed},
                      {"iters", r.iters}, {"log_n1", r.log_n1}, {"sqrt_log_n1", r.sqrt_log_n1}});
      if (k > 0) drop = std::max(drop, kr.rows[k - 1].ratio - r.ratio);
    }
    report.data["rows"] = rows;
    report.cases.push_back({"ratio_monotone", drop, detail::apply_tolerance(cfg, "ratio_monotone", "le", 1e-6), "le", true});
    if (kr.rows.size() > 1) {
      const KatzRow& first = kr.rows.front();
      const KatzRow& last = kr.rows.back();
      report.data["growth"] = {{"ratio_last_over_first", last.ratio / first.ratio},
                               {"log_ratio", last.log_n1 / first.log_n1},
                               {"sqrt_log_ratio", last.sqrt_log_n1 / first.sqrt_log_n1}};
    }
  } else if (cfg.kind == "commutator-scan" || cfg.kind == "theta-scan") {
    const bool comm = cfg.kind == "commutator-scan";
    const auto rows = comm ? commutator_ratio_scan(cfg.p, cfg.scan_depths(), cfg.trials, cfg.d, cfg.dim, cfg.seed)
                           : theta_ratio_scan(cfg.p, cfg.scan_depths(), cfg.trials, cfg.d, cfg.dim, cfg.seed);
    report.data["rows"] = scan_rows_json(rows);
  } else if (cfg.kind == "norms") {
    const Lattice lat(cfg.d, cfg.depth);
    Rng rng(cfg.seed);
    const StepFunction b = random_mean_zero(lat, cfg.dim, rng);
    report.data["lp_norm"] = lp_norm(b, cfg.p);
    report.data["linf_norm"] = lp_norm(b, kInf);
    report.data["bmo_M"] = bmo_M(b);
    report.data["bmo_so"] = bmo_so(b);
    report.data["bmo_c"] = bmo_column(b);
    report.data["bmo_r"] = bmo_row(b);
    report.data["bmo_cr"] = bmo_cr(b);
    if (std::isfinite(cfg.p)) report.data["hpc_norm"] = hpc_norm(b, cfg.p);
    report.data["h1max_norm"] = h1max_norm(b);
    report.cases.push_back({"bmo_so_le_bmo_M", std::max(0.0, bmo_so(b) - bmo_M(b)),
                            detail::apply_tolerance(cfg, "bmo_so_le_bmo_M", "le", 1e-10), "le", true});
  } else if (cfg.kind == "opnorm") {
    const Lattice lat(cfg.d, cfg.depth);
    const SymbolTable syms = default_symbols(lat, cfg.dim, cfg.seed);
    const OperatorSpec spec = parse_operator_spec(cfg.op, syms);
    const L2NormResult r = l2_opnorm_detail(spec, lat, cfg.dim);
    report.data["operator"] = to_string(spec);
    report.data["l2_opnorm"] = r.value;
    report.data["power_iterations"] = r.iterations;
    report.data["converged"] = r.converged;
    if (cfg.p != 2.0 && cfg.p > 1.0 && std::isfinite(cfg.p)) {
      const RatioWitness w = lp_opnorm_lower(spec, lat, cfg.dim, cfg.p, sp);
      report.data["lp_lower_bound"] = w.ratio;
    }
  } else {
    throw std::invalid_argument("run_scan: kind '" + cfg.kind + "' is not a scan");
  }
  report.finalize();
  report.wall_time = cfg.timing ? detail::seconds_since(t0) : 0.0;
  return report;
}

inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  return cfg.kind == "identities" ? run_identity_suite(cfg) : run_scan(cfg);
}

}  // namespace paralab
