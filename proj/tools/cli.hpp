// Command-line harness: instance generation, solver runs, invariant
// verification and the two convergence figures as CSV.
//
// Exit codes: 0 success, 1 usage error, 2 verification failure,
// 3 non-convergence (or a figure whose data never became usable).

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rmdp/rmdp.hpp"

namespace rmdp::cli {

enum ExitCode : int {
  kSuccess = 0,
  kUsageError = 1,
  kVerificationFailure = 2,
  kNonConvergence = 3,
};

struct ExperimentConfig {
  std::size_t n = 5;
  std::size_t m = 5;
  double gamma = 0.8;
  std::uint64_t seed = 42;
  std::string instance_path;  // overrides n, m, gamma, seed when set
  RegularizerKind regularizer = RegularizerKind::Shannon;
  double smoothing = 5.0;
  Algorithm algorithm = Algorithm::PI;
  std::size_t pev_steps = 50;
  double tolerance = 1e-10;
  std::size_t max_iterations = 1000;
  InitialValue q0 = InitialValue::Zero;
  std::string out;  // empty: CSV on stdout, summary on stderr

  // verify only
  std::size_t seeds = 20;
  std::size_t samples = 50;
  bool inject_fault = false;
};

inline std::string fmt17(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline MdpInstance load_or_generate(const ExperimentConfig& cfg) {
  if (!cfg.instance_path.empty()) return load(cfg.instance_path);
  return random_instance(cfg.n, cfg.m, cfg.gamma, cfg.seed);
}

inline ValueVector start_point(const MdpInstance& mdp,
                               const ExperimentConfig& cfg) {
  return initial_value(mdp, cfg.q0, cfg.seed ^ kInitialValueStream);
}

inline SolverConfig solver_config(const ExperimentConfig& cfg) {
  SolverConfig config;
  config.algorithm = cfg.algorithm;
  config.pev_steps = cfg.pev_steps;
  config.tolerance = cfg.tolerance;
  config.max_iterations = cfg.max_iterations;
  return config;
}

/// Where CSV and summary text go for one command.
class Sinks {
 public:
  Sinks(const std::string& path, std::ostream& out, std::ostream& err)
      : summary_(path.empty() ? &err : &out) {
    if (path.empty()) {
      csv_ = &out;
    } else {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw std::runtime_error("cannot open " + path);
      csv_ = file_.get();
    }
  }
  std::ostream& csv() { return *csv_; }
  std::ostream& summary() { return *summary_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* csv_;
  std::ostream* summary_;
};

// ---------------------------------------------------------------------------
// Figures

struct QuadraticFigure {
  double coefficient = 0.0;  // A
  std::vector<std::size_t> k;
  std::vector<double> error;
  std::vector<double> transformed;  // -ln ln(1 / (A e_k))
  double last_slope = std::numeric_limits<double>::quiet_NaN();
  double theoretical_slope = std::log(0.5);
  SolverTrace trace;

  bool usable() const { return k.size() >= 2; }
};

/// Rows only where A e_k < 1 and e_k clears the noise floor.
inline QuadraticFigure quadratic_figure(const MdpInstance& mdp,
                                        const RegularizerSpec& reg,
                                        const SolverConfig& config,
                                        std::span<const double> q0,
                                        const ValueVector& q_star) {
  QuadraticFigure fig;
  fig.coefficient = quadratic_constants(mdp, reg).coefficient;
  fig.trace = run(mdp, reg, config, q0, q_star);
  const auto& errors = fig.trace.errors_inf;
  for (std::size_t k = 0; k < errors.size(); ++k) {
    const double scaled = fig.coefficient * errors[k];
    if (scaled < 1.0 && errors[k] > kNoiseFloor) {
      fig.k.push_back(k);
      fig.error.push_back(errors[k]);
      fig.transformed.push_back(-std::log(std::log(1.0 / scaled)));
    }
  }
  if (fig.usable()) {
    const std::size_t last = fig.k.size() - 1;
    fig.last_slope = (fig.transformed[last] - fig.transformed[last - 1]) /
                     static_cast<double>(fig.k[last] - fig.k[last - 1]);
  }
  return fig;
}

struct LinearFigure {
  std::vector<double> error;  // e_k for every iterate
  RateAnalysis rates;
  double theoretical_slope = 0.0;  // M ln gamma
  double late_slope = std::numeric_limits<double>::quiet_NaN();
  SolverTrace trace;
};

inline LinearFigure linear_figure(const MdpInstance& mdp,
                                  const RegularizerSpec& reg,
                                  const SolverConfig& config,
                                  std::span<const double> q0,
                                  const ValueVector& q_star) {
  LinearFigure fig;
  fig.trace = run(mdp, reg, config, q0, q_star);
  fig.error = fig.trace.errors_inf;
  fig.rates = analyze_rates(fig.trace, q_star, mdp, reg);
  fig.theoretical_slope =
      static_cast<double>(std::max<std::size_t>(fig.trace.pev_steps, 1)) *
      std::log(mdp.gamma);
  // Last segment whose endpoints both clear the noise floor.
  for (std::size_t k = fig.error.size(); k-- > 1;) {
    if (fig.error[k] > kNoiseFloor && fig.error[k - 1] > kNoiseFloor) {
      fig.late_slope = std::log(fig.error[k]) - std::log(fig.error[k - 1]);
      break;
    }
  }
  return fig;
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_generate(const ExperimentConfig& cfg, std::ostream& out,
                        std::ostream& err) {
  const MdpInstance mdp = random_instance(cfg.n, cfg.m, cfg.gamma, cfg.seed);
  if (cfg.out.empty()) {
    out << to_json_text(mdp);
  } else {
    save(mdp, cfg.out);
  }
  const auto problems = validate(mdp);
  std::ostream& summary = cfg.out.empty() ? err : out;
  summary << "instance n=" << mdp.n << " m=" << mdp.m
          << " gamma=" << fmt6(mdp.gamma) << " seed=" << cfg.seed << ": "
          << (problems.empty() ? "valid" : "INVALID") << '\n';
  for (const auto& p : problems) summary << "  " << p << '\n';
  return problems.empty() ? kSuccess : kVerificationFailure;
}

inline int cmd_solve(const ExperimentConfig& cfg, std::ostream& out,
                     std::ostream& err) {
  const MdpInstance mdp = load_or_generate(cfg);
  const RegularizerSpec reg = RegularizerSpec::make(cfg.regularizer, cfg.smoothing);
  const ValueVector q_star = solve_reference(mdp, reg);
  const SolverConfig config = solver_config(cfg);
  const SolverTrace trace = run(mdp, reg, config, start_point(mdp, cfg), q_star);
  const DenseMatrix jac_star = jacobian(q_star, mdp, reg);
  const bool has_inexact = cfg.algorithm != Algorithm::PI;

  Sinks sinks(cfg.out, out, err);
  auto& csv = sinks.csv();
  csv << "k,residual_inf,error_inf,error_star,step_inf";
  if (has_inexact) csv << ",inexact_residual_inf";
  csv << '\n';
  for (std::size_t k = 0; k < trace.iterates.size(); ++k) {
    const Vector diff = subtract(trace.iterates[k], q_star);
    csv << k << ',' << fmt17(trace.residual_norms[k]) << ','
        << fmt17(trace.errors_inf[k]) << ','
        << fmt17(inf_norm(matvec(jac_star, diff))) << ',';
    if (k < trace.steps.size()) csv << fmt17(inf_norm(trace.steps[k]));
    if (has_inexact) {
      csv << ',';
      if (k < trace.inexact_residual_norms.size()) {
        csv << fmt17(trace.inexact_residual_norms[k]);
      }
    }
    csv << '\n';
  }

  auto& s = sinks.summary();
  s << "algorithm=" << to_string(cfg.algorithm);
  if (cfg.algorithm == Algorithm::MPI) s << " M=" << cfg.pev_steps;
  s << " regularizer=" << to_string(cfg.regularizer)
    << " N=" << fmt6(cfg.smoothing) << " n=" << mdp.n << " m=" << mdp.m
    << " gamma=" << fmt6(mdp.gamma) << '\n';
  s << "iterations: " << trace.iterations << '\n';
  s << "converged: " << (trace.converged ? "yes" : "no") << '\n';
  s << "final residual_inf: " << fmt17(trace.residual_norms.back()) << '\n';
  s << "final error_inf: " << fmt17(trace.errors_inf.back()) << '\n';
  try {
    const RateAnalysis rates = analyze_rates(trace, q_star, mdp, reg);
    s << "asymptotic rate estimate (star norm): "
      << fmt6(rates.asymptotic_rate_estimate) << '\n';
    if (trace.pev_steps > 0) {
      s << "theoretical asymptotic rate gamma^M: " << fmt6(rates.gamma_M)
        << '\n';
    } else {
      s << "quadratic coefficient A: " << fmt6(rates.quadratic_coefficient_A)
        << " (region radius " << fmt6(rates.quadratic_region_radius) << ")\n";
    }
  } catch (const InsufficientDataError&) {
    s << "rate estimates: too few iterations above the noise floor\n";
  }
  return trace.converged ? kSuccess : kNonConvergence;
}

inline void write_report(const InvariantReport& report, std::ostream& out) {
  for (const auto& c : report.checks) {
    out << (c.passed ? "PASS " : "FAIL ") << c.name
        << "  worst_slack=" << fmt6(c.worst_slack) << "  samples=" << c.samples;
    if (!c.detail.empty()) out << "  (" << c.detail << ")";
    out << '\n';
  }
}

inline int cmd_verify(const ExperimentConfig& cfg, std::ostream& out,
                      std::ostream& err) {
  const RegularizerSpec reg = RegularizerSpec::make(cfg.regularizer, cfg.smoothing);
  SuiteOptions options;
  options.corrupt_jacobian = cfg.inject_fault;

  std::vector<std::uint64_t> seeds;
  if (cfg.instance_path.empty()) {
    for (std::size_t i = 0; i < cfg.seeds; ++i) seeds.push_back(cfg.seed + i);
  } else {
    seeds.push_back(cfg.seed);
  }

  // Aggregated worst slack per check, in first-seen order.
  InvariantReport aggregate;
  std::map<std::string, std::size_t> position;
  std::vector<std::pair<std::uint64_t, InvariantReport>> per_seed;
  double gamma = cfg.gamma;
  for (std::uint64_t seed : seeds) {
    ExperimentConfig local = cfg;
    local.seed = seed;
    const MdpInstance mdp = load_or_generate(local);
    gamma = mdp.gamma;
    InvariantReport report = invariant_suite(mdp, reg, seed, cfg.samples, options);
    report.append(solver_property_checks(mdp, reg, seed, cfg.samples));
    for (const auto& c : report.checks) {
      auto [it, inserted] = position.try_emplace(c.name, aggregate.checks.size());
      if (inserted) {
        aggregate.checks.push_back(c);
        continue;
      }
      CheckResult& agg = aggregate.checks[it->second];
      agg.samples += c.samples;
      agg.worst_slack = std::min(agg.worst_slack, c.worst_slack);
      if (!c.passed) {
        agg.passed = false;
        if (agg.detail.empty()) agg.detail = c.detail;
      }
    }
    per_seed.emplace_back(seed, std::move(report));
  }

  if (!cfg.out.empty()) {
    std::ofstream csv(cfg.out);
    if (!csv) throw std::runtime_error("cannot open " + cfg.out);
    csv << "seed,check,worst_slack,samples,passed\n";
    for (const auto& [seed, report] : per_seed) {
      for (const auto& c : report.checks) {
        csv << seed << ',' << c.name << ',' << fmt17(c.worst_slack) << ','
            << c.samples << ',' << (c.passed ? 1 : 0) << '\n';
      }
    }
  }

  out << "verify: " << seeds.size() << " instance(s), " << cfg.samples
      << " samples per check, regularizer=" << to_string(cfg.regularizer)
      << " N=" << fmt6(cfg.smoothing) << '\n';
  write_report(aggregate, out);
  if (const CheckResult* inv = aggregate.find("bellman.inverse_norm")) {
    out << "inverse-norm bound 1/(1-gamma) = " << fmt6(1.0 / (1.0 - gamma))
        << ", worst slack " << fmt6(inv->worst_slack) << '\n';
  }
  const bool ok = aggregate.all_passed();
  if (!ok) {
    err << "verification failed:";
    for (const auto& c : aggregate.checks) {
      if (!c.passed) err << ' ' << c.name;
    }
    err << '\n';
  }
  out << (ok ? "ALL CHECKS PASSED" : "SOME CHECKS FAILED") << '\n';
  return ok ? kSuccess : kVerificationFailure;
}

inline int cmd_figure_quadratic(const ExperimentConfig& cfg, std::ostream& out,
                                std::ostream& err) {
  const MdpInstance mdp = load_or_generate(cfg);
  const RegularizerSpec reg = RegularizerSpec::make(cfg.regularizer, cfg.smoothing);
  const ValueVector q_star = solve_reference(mdp, reg);
  SolverConfig config = solver_config(cfg);
  config.algorithm = Algorithm::PI;
  const QuadraticFigure fig =
      quadratic_figure(mdp, reg, config, start_point(mdp, cfg), q_star);

  Sinks sinks(cfg.out, out, err);
  sinks.csv() << "k,error_inf,neg_log_log_inv_A_error\n";
  for (std::size_t i = 0; i < fig.k.size(); ++i) {
    sinks.csv() << fig.k[i] << ',' << fmt17(fig.error[i]) << ','
                << fmt17(fig.transformed[i]) << '\n';
  }
  auto& s = sinks.summary();
  s << "quadratic coefficient A: " << fmt6(fig.coefficient) << '\n';
  s << "PI iterations: " << fig.trace.iterations << '\n';
  s << "rows with A*e_k < 1: " << fig.k.size() << '\n';
  s << "theoretical slope ln(1/2): " << fmt6(fig.theoretical_slope) << '\n';
  if (!fig.usable()) {
    s << "FLAG: fewer than two iterates inside A*e_k < 1; no slope\n";
    return kNonConvergence;
  }
  s << "last-segment slope: " << fmt6(fig.last_slope) << '\n';
  return fig.trace.converged ? kSuccess : kNonConvergence;
}

inline int cmd_figure_linear(const ExperimentConfig& cfg, std::ostream& out,
                             std::ostream& err) {
  const MdpInstance mdp = load_or_generate(cfg);
  const RegularizerSpec reg = RegularizerSpec::make(cfg.regularizer, cfg.smoothing);
  const ValueVector q_star = solve_reference(mdp, reg);
  SolverConfig config = solver_config(cfg);
  config.algorithm = cfg.pev_steps == 1 ? Algorithm::VI : Algorithm::MPI;
  std::optional<LinearFigure> fig;
  try {
    fig = linear_figure(mdp, reg, config, start_point(mdp, cfg), q_star);
  } catch (const InsufficientDataError& e) {
    err << "FLAG: " << e.what() << '\n';
    return kNonConvergence;
  }

  Sinks sinks(cfg.out, out, err);
  sinks.csv() << "k,error_inf,log_error\n";
  for (std::size_t k = 0; k < fig->error.size(); ++k) {
    const double e = fig->error[k];
    sinks.csv() << k << ',' << fmt17(e) << ','
                << (e > 0.0 ? fmt17(std::log(e)) : std::string()) << '\n';
  }
  const RateAnalysis& r = fig->rates;
  auto& s = sinks.summary();
  s << "M=" << fig->trace.pev_steps << " gamma=" << fmt6(mdp.gamma)
    << " gamma^M=" << fmt6(r.gamma_M) << '\n';
  s << "iterations: " << fig->trace.iterations << '\n';
  s << "theoretical slope M ln(gamma): " << fmt6(fig->theoretical_slope) << '\n';
  s << "observed late slope: " << fmt6(fig->late_slope) << '\n';
  s << "per-step ratios (inf):";
  for (double v : r.per_step_ratios_inf) s << ' ' << fmt6(v);
  s << "\nper-step ratios (star):";
  for (double v : r.per_step_ratios_star) s << ' ' << fmt6(v);
  s << '\n';
  if (!std::isnan(r.epsilon)) {
    s << "local region epsilon: " << fmt6(r.epsilon) << ", ratios inside:";
    for (double v : r.region_ratios_inf) s << ' ' << fmt6(v);
    s << '\n';
  }
  s << "asymptotic rate estimate (star norm): "
    << fmt6(r.asymptotic_rate_estimate) << '\n';
  return fig->trace.converged ? kSuccess : kNonConvergence;
}

// ---------------------------------------------------------------------------
// Argument parsing

inline void add_instance_flags(CLI::App& sub, ExperimentConfig& cfg) {
  sub.add_option("--n", cfg.n, "number of states")->check(CLI::PositiveNumber);
  sub.add_option("--m", cfg.m, "number of actions")->check(CLI::PositiveNumber);
  // Endpoints are rejected later by random_instance.
  sub.add_option("--gamma", cfg.gamma, "discount factor in (0, 1)")
      ->check(CLI::Range(0.0, 1.0));
  sub.add_option("--seed", cfg.seed, "instance seed");
}

inline void add_solver_flags(CLI::App& sub, ExperimentConfig& cfg) {
  const std::map<std::string, RegularizerKind> kinds{
      {"shannon", RegularizerKind::Shannon}, {"tsallis", RegularizerKind::Tsallis}};
  const std::map<std::string, InitialValue> starts{
      {"zero", InitialValue::Zero}, {"uniform", InitialValue::Uniform}};
  sub.add_option("--instance", cfg.instance_path, "instance file to load")
      ->check(CLI::ExistingFile);
  // The enums have a to_string overload that trips CLI11's enum detection,
  // so they are parsed as strings.
  sub.add_option_function<std::string>(
         "--regularizer",
         [&cfg, kinds](const std::string& name) { cfg.regularizer = kinds.at(name); },
         "shannon | tsallis")
      ->check(CLI::IsMember(kinds));
  sub.add_option("--N", cfg.smoothing, "smoothing strength N > 0")
      ->check(CLI::PositiveNumber);
  sub.add_option("--M", cfg.pev_steps, "policy-evaluation sweeps per iteration")
      ->check(CLI::PositiveNumber);
  sub.add_option("--tol", cfg.tolerance, "stop when ||F(q_k)||_inf <= tol")
      ->check(CLI::PositiveNumber);
  sub.add_option("--max-iter", cfg.max_iterations, "iteration cap");
  sub.add_option("--q0", cfg.q0, "zero | uniform")
      ->transform(CLI::CheckedTransformer(starts, CLI::ignore_case));
}

/// `args` excludes the program name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out,
                   std::ostream& err) {
  CLI::App app{"Regularized MDP solvers viewed as Newton methods", "rmdp"};
  app.require_subcommand(1);

  ExperimentConfig generate_cfg;
  auto* generate = app.add_subcommand("generate", "write a random instance");
  add_instance_flags(*generate, generate_cfg);
  generate->add_option("--out", generate_cfg.out, "instance file (default stdout)");

  ExperimentConfig solve_cfg;
  auto* solve = app.add_subcommand("solve", "run VI, PI or MPI and write a trace CSV");
  add_instance_flags(*solve, solve_cfg);
  add_solver_flags(*solve, solve_cfg);
  const std::map<std::string, Algorithm> algorithms{
      {"vi", Algorithm::VI}, {"pi", Algorithm::PI}, {"mpi", Algorithm::MPI}};
  solve->add_option_function<std::string>(
            "--algorithm",
            [&solve_cfg, algorithms](const std::string& name) {
              solve_cfg.algorithm = algorithms.at(name);
            },
            "vi | pi | mpi")
      ->check(CLI::IsMember(algorithms));
  solve->add_option("--out", solve_cfg.out, "trace CSV (default stdout)");

  ExperimentConfig verify_cfg;
  verify_cfg.seed = 0;
  auto* verify = app.add_subcommand("verify", "check every proved bound numerically");
  add_instance_flags(*verify, verify_cfg);
  add_solver_flags(*verify, verify_cfg);
  verify->add_option("--seeds", verify_cfg.seeds, "number of instance seeds")
      ->check(CLI::PositiveNumber);
  verify->add_option("--samples", verify_cfg.samples, "random draws per check")
      ->check(CLI::PositiveNumber);
  verify->add_flag("--inject-fault", verify_cfg.inject_fault,
                   "corrupt the Jacobian to exercise the failure path");
  verify->add_option("--out", verify_cfg.out, "per-seed CSV report");

  ExperimentConfig quad_cfg;
  quad_cfg.q0 = InitialValue::Uniform;
  auto* quad = app.add_subcommand("figure-quadratic",
                                  "PI errors inside the quadratic region");
  add_instance_flags(*quad, quad_cfg);
  add_solver_flags(*quad, quad_cfg);
  quad->add_option("--out", quad_cfg.out, "CSV (default stdout)");

  ExperimentConfig lin_cfg;
  lin_cfg.q0 = InitialValue::Uniform;
  lin_cfg.algorithm = Algorithm::MPI;
  auto* lin = app.add_subcommand("figure-linear", "MPI errors on a log scale");
  add_instance_flags(*lin, lin_cfg);
  add_solver_flags(*lin, lin_cfg);
  lin->add_option("--out", lin_cfg.out, "CSV (default stdout)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    err << app.help();
    return kUsageError;
  }

  try {
    if (*generate) return cmd_generate(generate_cfg, out, err);
    if (*solve) return cmd_solve(solve_cfg, out, err);
    if (*verify) return cmd_verify(verify_cfg, out, err);
    if (*quad) return cmd_figure_quadratic(quad_cfg, out, err);
    if (*lin) return cmd_figure_linear(lin_cfg, out, err);
  } catch (const ParseError& e) {
    err << "instance error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsageError;
  }
  return kUsageError;
}

}  // namespace rmdp::cli
