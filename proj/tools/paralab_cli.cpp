// paralab command-line driver. Exit codes: 0 success, 1 failed suite or
// runtime failure, 2 usage error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "paralab/experiments.hpp"

namespace {

constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;

struct Subcommand {
  CLI::App* app = nullptr;
  paralab::ExperimentConfig flags;  // bound to the parser
  std::string config_path;
  double tol = 0.0;
  // Copies an explicitly given flag from `flags` into the effective config.
  std::vector<std::pair<CLI::Option*, std::function<void(paralab::ExperimentConfig&)>>> setters;
};

template <typename T>
void bind_flag(Subcommand& s, const std::string& name, T paralab::ExperimentConfig::*field, const std::string& help) {
  CLI::Option* o = s.app->add_option(name, s.flags.*field, help)->capture_default_str();
  s.setters.emplace_back(o, [&s, field](paralab::ExperimentConfig& c) { c.*field = s.flags.*field; });
}

void add_common(Subcommand& s) {
  bind_flag(s, "--d", &paralab::ExperimentConfig::d, "branching factor of the d-adic lattice");
  bind_flag(s, "--depth", &paralab::ExperimentConfig::depth, "lattice depth N");
  bind_flag(s, "--dim", &paralab::ExperimentConfig::dim, "matrix dimension m");
  bind_flag(s, "--p", &paralab::ExperimentConfig::p, "Lebesgue exponent p");
  bind_flag(s, "--trials", &paralab::ExperimentConfig::trials, "random trials");
  bind_flag(s, "--seed", &paralab::ExperimentConfig::seed, "base seed");
  bind_flag(s, "--out", &paralab::ExperimentConfig::out, "output file (required)");
  CLI::Option* fmt = s.app->add_option("--format", s.flags.format, "output format, inferred from --out when omitted")
                         ->check(CLI::IsMember({"json", "csv"}))
                         ->capture_default_str();
  s.setters.emplace_back(fmt, [&s](paralab::ExperimentConfig& c) { c.format = s.flags.format; });
  CLI::Option* t = s.app->add_option("--tol", s.tol, "replace every upper-bound tolerance")
                       ->check(CLI::PositiveNumber)
                       ->default_str("per-case");
  s.setters.emplace_back(t, [&s](paralab::ExperimentConfig& c) { c.tol = s.tol; });
  s.app->add_option("--config", s.config_path, "JSON file of flag values; explicit flags take precedence")
      ->check(CLI::ExistingFile);
  CLI::Option* timing = s.app->add_flag("--timing", s.flags.timing, "record wall time (makes reports non-reproducible)");
  s.setters.emplace_back(timing, [&s](paralab::ExperimentConfig& c) { c.timing = s.flags.timing; });
}

void add_search(Subcommand& s) {
  bind_flag(s, "--restarts", &paralab::ExperimentConfig::restarts, "search restarts");
  bind_flag(s, "--max-iters", &paralab::ExperimentConfig::max_iters, "search iterations per restart");
}

void add_depths(Subcommand& s) {
  CLI::Option* o = s.app->add_option("--depths", s.flags.depths, "comma-separated depths (default: --depth)")
                       ->delimiter(',');
  s.setters.emplace_back(o, [&s](paralab::ExperimentConfig& c) { c.depths = s.flags.depths; });
}

paralab::ExperimentConfig effective_config(const Subcommand& s) {
  paralab::ExperimentConfig cfg;
  cfg.kind = s.flags.kind;
  cfg.depth = s.flags.depth;
  cfg.trials = s.flags.trials;
  cfg.seed = s.flags.seed;
  if (!s.config_path.empty()) {
    std::ifstream is(s.config_path);
    const paralab::json j = paralab::json::parse(is);
    if (!j.is_object()) throw std::invalid_argument("config file must hold a JSON object");
    paralab::from_json(j, cfg);
    cfg.kind = s.flags.kind;
  }
  bool format_given = s.app->get_option("--format")->count() > 0 || (!s.config_path.empty() && [&] {
    std::ifstream is(s.config_path);
    return paralab::json::parse(is).contains("format");
  }());
  for (const auto& [opt, set] : s.setters)
    if (opt->count() > 0) set(cfg);
  if (!format_given && std::filesystem::path(cfg.out).extension() == ".csv") cfg.format = "csv";
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dyadic paraproducts with matrix-valued symbols: identity checks, norms and scans"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  std::vector<std::unique_ptr<Subcommand>> subs;
  auto make = [&](const std::string& name, const std::string& help) -> Subcommand& {
    auto s = std::make_unique<Subcommand>();
    s->app = app.add_subcommand(name, help);
    s->flags.kind = name;
    subs.push_back(std::move(s));
    return *subs.back();
  };

  Subcommand& ident = make("identities", "run the identity and inequality suite");
  add_common(ident);

  Subcommand& katz = make("katz", "best-found |pi_b| / |b|_BMO_so over matrix dimensions");
  katz.flags.depth = 4;
  katz.flags.seed = 1;
  add_common(katz);
  add_search(katz);
  {
    CLI::Option* o = katz.app->add_option("--dims", katz.flags.dims, "comma-separated matrix dimensions (powers of two)")
                         ->delimiter(',')
                         ->capture_default_str();
    katz.setters.emplace_back(o, [&katz](paralab::ExperimentConfig& c) { c.dims = katz.flags.dims; });
  }

  Subcommand& comm = make("commutator-scan", "sup of |[pi_a, M_b] f|_p / (|a|_BMO |b|_BMO_M |f|_p) per depth");
  comm.flags.trials = 200;
  add_common(comm);
  add_depths(comm);

  Subcommand& theta = make("theta-scan", "Theta_b ratio between L_p and h_{p,c} per depth");
  theta.flags.trials = 200;
  add_common(theta);
  add_depths(theta);

  Subcommand& opn = make("opnorm", "L_2 operator norm (and an L_p lower bound for p != 2) of an operator expression");
  add_common(opn);
  add_search(opn);
  {
    CLI::Option* o = opn.app->add_option("--op", opn.flags.op,
                                         "operator expression over symbols a (scalar), b, c (dim x dim)")
                         ->capture_default_str();
    opn.setters.emplace_back(o, [&opn](paralab::ExperimentConfig& c) { c.op = opn.flags.op; });
  }

  Subcommand& norms = make("norms", "evaluate every norm on a random mean-zero symbol");
  add_common(norms);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  const Subcommand* chosen = nullptr;
  for (const auto& s : subs)
    if (s->app->parsed()) chosen = s.get();

  paralab::ExperimentConfig cfg;
  try {
    cfg = effective_config(*chosen);
    if (cfg.out.empty()) throw std::invalid_argument("--out is required");
    cfg.check();
  } catch (const std::exception& e) {
    std::cerr << "paralab " << chosen->flags.kind << ": " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    const paralab::ExperimentReport report = paralab::run_experiment(cfg);
    paralab::write_report(report, cfg.out, cfg.format);
    if (cfg.kind == "identities" && !report.pass_all) {
      for (const auto& c : report.cases)
        if (!c.pass) std::cerr << "FAIL " << c.name << ": " << c.value << " vs " << c.tolerance << "\n";
      return kExitFailed;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "paralab " << cfg.kind << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "paralab " << cfg.kind << ": " << e.what() << "\n";
    return kExitFailed;
  }
  return 0;
}
