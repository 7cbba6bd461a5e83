// Numerical checks of the convergence theory: closed-form constants, the
// star norm ||v||_* = ||F'(q_*) v||_inf, rate estimation from solver traces,
// and sampled-inequality suites over the regularizer, Bellman and solver
// layers.
//
// Slack convention for every check: slack = bound - measured, so a check
// passes iff its worst slack is >= 0. Tolerances are folded into the bound.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rmdp/bellman.hpp"
#include "rmdp/linalg.hpp"
#include "rmdp/mdp.hpp"
#include "rmdp/regularizer.hpp"
#include "rmdp/solvers.hpp"

namespace rmdp {

/// Errors at or below this are treated as roundoff.
inline constexpr double kNoiseFloor = 1e-13;

class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double star_norm(std::span<const double> v,
                        std::span<const double> q_star,
                        const MdpInstance& mdp, const RegularizerSpec& reg) {
  detail::require_value_size(mdp, v, "star_norm");
  return inf_norm(matvec(jacobian(q_star, mdp, reg), v));
}

struct QuadraticConstants {
  double coefficient;  // A = (3/2) (gamma/(1-gamma)) (N/mu) sqrt(nm)
  double radius;       // 1/A
};

inline QuadraticConstants quadratic_constants(const MdpInstance& mdp,
                                              const RegularizerSpec& reg) {
  const double g = mdp.gamma;
  const double root = std::sqrt(static_cast<double>(mdp.pairs()));
  const double ratio = reg.smoothing_strength / reg.strong_convexity;
  return {1.5 * (g / (1.0 - g)) * ratio * root,
          (2.0 / 3.0) * ((1.0 - g) / g) / (ratio * root)};
}

struct MpiRegionConstants {
  double eta;      // gamma^M
  double delta;
  double epsilon;  // radius of the gamma^M + Delta contraction region
};

/// `sweeps` = 0 means exact evaluation (eta = 0). Requires
/// 0 < Delta < gamma - gamma^M.
inline MpiRegionConstants mpi_region_constants(const MdpInstance& mdp,
                                               const RegularizerSpec& reg,
                                               std::size_t sweeps,
                                               double region_slack) {
  const double g = mdp.gamma;
  const double eta =
      sweeps == 0 ? 0.0 : std::pow(g, static_cast<double>(sweeps));
  if (!(region_slack > 0.0 && region_slack < g - eta)) {
    throw std::invalid_argument(
        "mpi_region_constants: Delta must lie in (0, gamma - gamma^M)");
  }
  const double delta =
      (1.0 - g) * (std::sqrt(1.0 + region_slack / (eta + 2.0)) - 1.0);
  const double root = std::sqrt(static_cast<double>(mdp.pairs()));
  const double epsilon = std::pow(1.0 - g, 3) / ((1.0 + g) * g) *
                         (reg.strong_convexity /
                          (reg.smoothing_strength * root)) *
                         delta;
  return {eta, delta, epsilon};
}

/// (gamma - gamma^M) / 10; zero when the admissible interval is empty (M = 1).
inline double default_region_slack(double gamma, std::size_t sweeps) {
  const double eta =
      sweeps == 0 ? 0.0 : std::pow(gamma, static_cast<double>(sweeps));
  return (gamma - eta) / 10.0;
}

struct RateAnalysis {
  std::vector<double> errors_inf;
  std::vector<double> errors_star;  // empty when the trace kept no iterates
  std::vector<double> per_step_ratios_inf;
  std::vector<double> per_step_ratios_star;
  std::vector<double> quadratic_ratios;
  /// e_{k+1}/e_k restricted to iterates inside the local region
  /// ||q_k - q_*||_inf < epsilon where the gamma^M + Delta contraction is
  /// guaranteed, and to pairs whose errors both clear the noise floor.
  std::vector<double> region_ratios_inf;
  /// Geometric mean of the last (up to 3) usable ratios, star-norm when
  /// available since that is where the gamma^M rate is stated.
  double asymptotic_rate_estimate = 0.0;
  double quadratic_coefficient_A = 0.0;
  double quadratic_region_radius = 0.0;
  double gamma_M = 0.0;
  double delta = std::numeric_limits<double>::quiet_NaN();
  double epsilon = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

/// e_{k+1} / e_k for every k whose denominator clears the noise floor.
inline std::vector<double> usable_ratios(const std::vector<double>& errors) {
  std::vector<double> ratios;
  for (std::size_t k = 0; k + 1 < errors.size(); ++k) {
    if (errors[k] > kNoiseFloor) ratios.push_back(errors[k + 1] / errors[k]);
  }
  return ratios;
}

inline std::vector<double> region_ratios(const std::vector<double>& errors,
                                         double radius) {
  std::vector<double> ratios;
  for (std::size_t k = 0; k + 1 < errors.size(); ++k) {
    if (errors[k] < radius && errors[k] > kNoiseFloor &&
        errors[k + 1] > kNoiseFloor) {
      ratios.push_back(errors[k + 1] / errors[k]);
    }
  }
  return ratios;
}

inline double tail_geometric_mean(const std::vector<double>& ratios,
                                  std::size_t count) {
  const std::size_t take = std::min(count, ratios.size());
  if (take == 0) return std::numeric_limits<double>::quiet_NaN();
  double log_sum = 0.0;
  for (std::size_t i = ratios.size() - take; i < ratios.size(); ++i) {
    log_sum += std::log(std::max(ratios[i], std::numeric_limits<double>::min()));
  }
  return std::exp(log_sum / static_cast<double>(take));
}

}  // namespace detail

inline RateAnalysis analyze_rates(const SolverTrace& trace,
                                  std::span<const double> q_star,
                                  const MdpInstance& mdp,
                                  const RegularizerSpec& reg) {
  detail::require_value_size(mdp, q_star, "analyze_rates");
  RateAnalysis out;
  if (!trace.iterates.empty()) {
    const DenseMatrix jac_star = jacobian(q_star, mdp, reg);
    for (const ValueVector& q : trace.iterates) {
      const Vector diff = subtract(q, q_star);
      out.errors_inf.push_back(inf_norm(diff));
      out.errors_star.push_back(inf_norm(matvec(jac_star, diff)));
    }
  } else {
    out.errors_inf = trace.errors_inf;
  }
  const auto usable = std::count_if(out.errors_inf.begin(),
                                    out.errors_inf.end(),
                                    [](double e) { return e > kNoiseFloor; });
  if (usable < 3) {
    throw InsufficientDataError(
        "analyze_rates: need at least 3 iterates with error above 1e-13, got " +
        std::to_string(usable));
  }

  out.per_step_ratios_inf = detail::usable_ratios(out.errors_inf);
  out.per_step_ratios_star = detail::usable_ratios(out.errors_star);
  for (std::size_t k = 0; k + 1 < out.errors_inf.size(); ++k) {
    const double e = out.errors_inf[k];
    if (e > kNoiseFloor) out.quadratic_ratios.push_back(out.errors_inf[k + 1] / (e * e));
  }
  out.asymptotic_rate_estimate = detail::tail_geometric_mean(
      out.per_step_ratios_star.empty() ? out.per_step_ratios_inf
                                       : out.per_step_ratios_star,
      3);

  const QuadraticConstants quad = quadratic_constants(mdp, reg);
  out.quadratic_coefficient_A = quad.coefficient;
  out.quadratic_region_radius = quad.radius;
  const double slack = default_region_slack(mdp.gamma, trace.pev_steps);
  out.gamma_M = trace.pev_steps == 0
                    ? 0.0
                    : std::pow(mdp.gamma, static_cast<double>(trace.pev_steps));
  if (slack > 0.0) {
    const MpiRegionConstants region =
        mpi_region_constants(mdp, reg, trace.pev_steps, slack);
    out.delta = region.delta;
    out.epsilon = region.epsilon;
    out.region_ratios_inf = detail::region_ratios(out.errors_inf, region.epsilon);
  }
  return out;
}

using JacobianFn = std::function<DenseMatrix(std::span<const double>)>;

/// Max |analytic - central difference| over all Jacobian entries.
inline double jacobian_fd_check(std::span<const double> q,
                                const MdpInstance& mdp,
                                const RegularizerSpec& reg, double step,
                                const JacobianFn& analytic = {}) {
  if (!(step > 0.0)) throw std::invalid_argument("jacobian_fd_check: step");
  const DenseMatrix jac = analytic ? analytic(q) : jacobian(q, mdp, reg);
  ValueVector probe(q.begin(), q.end());
  double worst = 0.0;
  for (std::size_t j = 0; j < probe.size(); ++j) {
    const double saved = probe[j];
    probe[j] = saved + step;
    const Vector plus = residual_F(probe, mdp, reg);
    probe[j] = saved - step;
    const Vector minus = residual_F(probe, mdp, reg);
    probe[j] = saved;
    for (std::size_t i = 0; i < plus.size(); ++i) {
      const double fd = (plus[i] - minus[i]) / (2.0 * step);
      worst = std::max(worst, std::abs(fd - jac(i, j)));
    }
  }
  return worst;
}

/// Fixed point of T^pi for the greedy policy at q, by plain operator
/// iteration. Stops when successive iterates differ by at most
/// max(1e-14, 8 eps ||q||_inf); the second term only matters when values are
/// large enough that 1e-14 is below a few ulps.
inline ValueVector evaluate_policy_by_iteration(std::span<const double> q,
                                                const MdpInstance& mdp,
                                                const RegularizerSpec& reg,
                                                std::size_t max_sweeps = 100000) {
  const PolicyMatrix pi = greedy_policy(q, mdp, reg);
  ValueVector current(q.begin(), q.end());
  for (std::size_t i = 0; i < max_sweeps; ++i) {
    ValueVector next = apply_self_consistency(current, pi, mdp, reg);
    const double change = inf_norm(subtract(next, current));
    const double floor =
        std::max(1e-14, 8.0 * std::numeric_limits<double>::epsilon() *
                            inf_norm(next));
    current = std::move(next);
    if (change <= floor) break;
  }
  return current;
}

struct CheckResult {
  std::string name;
  double worst_slack = std::numeric_limits<double>::infinity();
  std::size_t samples = 0;
  bool passed = true;
  std::string detail;

  void record(double slack) {
    ++samples;
    worst_slack = std::min(worst_slack, slack);
    if (!(slack >= 0.0)) passed = false;
  }
  void fail(std::string why) {
    passed = false;
    detail = std::move(why);
  }
};

struct InvariantReport {
  std::vector<CheckResult> checks;

  bool all_passed() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const CheckResult& c) { return c.passed; });
  }
  const CheckResult* find(std::string_view name) const {
    for (const auto& c : checks) {
      if (c.name == name) return &c;
    }
    return nullptr;
  }
  void append(const InvariantReport& other) {
    checks.insert(checks.end(), other.checks.begin(), other.checks.end());
  }
};

struct SuiteOptions {
  /// Fault injection: scale the transition part of the Jacobian by an extra
  /// factor of gamma, i.e. gamma^2 P grad f - I.
  bool corrupt_jacobian = false;
};

namespace detail {

inline Vector random_vector(SplitMix64& rng, std::size_t size, double bound) {
  Vector v(size);
  for (double& x : v) x = bound * (2.0 * rng.uniform() - 1.0);
  return v;
}

/// Runs `body` and turns an escaped exception into a failed check.
template <typename Body>
CheckResult run_check(std::string name, Body&& body) {
  CheckResult check;
  check.name = std::move(name);
  try {
    body(check);
  } catch (const std::exception& e) {
    check.fail(e.what());
  }
  return check;
}

inline bool same_support(const ProbabilityVector& a, const ProbabilityVector& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] > 0.0) != (b[i] > 0.0)) return false;
  }
  return true;
}

}  // namespace detail

/// Sampled checks of the smoothed max operator and the smoothed Bellman map.
inline InvariantReport invariant_suite(const MdpInstance& mdp,
                                       const RegularizerSpec& reg,
                                       std::uint64_t seed, std::size_t samples,
                                       const SuiteOptions& options = {}) {
  const std::size_t m = mdp.m;
  const std::size_t pairs = mdp.pairs();
  const double n_over_mu = reg.smoothing_strength / reg.strong_convexity;
  const double value_bound = 1.0 / (1.0 - mdp.gamma);
  const JacobianFn jac_fn = [&](std::span<const double> q) {
    DenseMatrix jac = jacobian(q, mdp, reg);
    if (options.corrupt_jacobian) {
      for (std::size_t i = 0; i < jac.rows(); ++i) {
        for (std::size_t j = 0; j < jac.cols(); ++j) {
          const double kernel = jac(i, j) + (i == j ? 1.0 : 0.0);
          jac(i, j) = mdp.gamma * kernel - (i == j ? 1.0 : 0.0);
        }
      }
    }
    return jac;
  };

  InvariantReport report;
  // Each check draws from its own stream so adding a check doesn't perturb
  // the others.
  std::uint64_t stream = 0;
  auto define = [&](const char* name, auto&& body) {
    SplitMix64 rng(seed ^ (0x632BE59BD9B4E019ULL * ++stream));
    report.checks.push_back(detail::run_check(
        name, [&](CheckResult& check) { body(check, rng); }));
  };

  define("regularizer.envelope", [&](CheckResult& c, SplitMix64& rng) {
    for (std::size_t i = 0; i < samples; ++i) {
      const Vector x = detail::random_vector(rng, m, value_bound);
      const ProbabilityVector g = smoothed_max_gradient(x, reg);
      double inner = 0.0;
      for (std::size_t a = 0; a < m; ++a) inner += g[a] * x[a];
      const double rebuilt =
          inner - regularizer_value(g, reg) / reg.smoothing_strength;
      c.record(1e-10 - std::abs(smoothed_max(x, reg) - rebuilt));
    }
  });

  define("regularizer.gradient_fd", [&](CheckResult& c, SplitMix64& rng) {
    constexpr double h = 1e-6;
    for (std::size_t i = 0; i < samples; ++i) {
      Vector x = detail::random_vector(rng, m, 2.0);
      const ProbabilityVector g = smoothed_max_gradient(x, reg);
      bool stable = true;
      Vector fd(m);
      for (std::size_t a = 0; a < m && stable; ++a) {
        const double saved = x[a];
        x[a] = saved + h;
        const double up = smoothed_max(x, reg);
        stable = stable && detail::same_support(g, smoothed_max_gradient(x, reg));
        x[a] = saved - h;
        const double down = smoothed_max(x, reg);
        stable = stable && detail::same_support(g, smoothed_max_gradient(x, reg));
        x[a] = saved;
        fd[a] = (up - down) / (2.0 * h);
      }
      // Sparsemax is only differentiable where its support is locally fixed.
      if (!stable) continue;
      double worst = 0.0;
      for (std::size_t a = 0; a < m; ++a) {
        worst = std::max(worst, std::abs(fd[a] - g[a]));
      }
      c.record(1e-6 - worst);
    }
  });

  define("regularizer.gradient_lipschitz", [&](CheckResult& c, SplitMix64& rng) {
    for (std::size_t i = 0; i < samples; ++i) {
      const Vector x = detail::random_vector(rng, m, value_bound);
      // Nearby pairs exercise the local constant, far pairs the global one.
      const double spread = (i % 2 == 0) ? value_bound : 0.1 / n_over_mu;
      const Vector y = add(x, detail::random_vector(rng, m, spread));
      const ProbabilityVector gx = smoothed_max_gradient(x, reg);
      const ProbabilityVector gy = smoothed_max_gradient(y, reg);
      const double lhs = two_norm_vec(subtract(gx.entries(), gy.entries()));
      const double rhs = n_over_mu * two_norm_vec(subtract(x, y));
      c.record(rhs + 1e-10 - lhs);
    }
  });

  define("regularizer.uniform_approximation", [&](CheckResult& c, SplitMix64& rng) {
    const double gap = reg.max_negative_value(m) / reg.smoothing_strength;
    for (std::size_t i = 0; i < samples; ++i) {
      const Vector x = detail::random_vector(rng, m, value_bound);
      const double top = *std::max_element(x.begin(), x.end());
      const double smooth = smoothed_max(x, reg);
      c.record(std::min(smooth - top + 1e-12, top + gap + 1e-12 - smooth));
    }
  });

  define("regularizer.convexity", [&](CheckResult& c, SplitMix64& rng) {
    for (std::size_t i = 0; i < samples; ++i) {
      const Vector x = detail::random_vector(rng, m, value_bound);
      const Vector y = detail::random_vector(rng, m, value_bound);
      const double lambda = rng.uniform();
      Vector mix(m);
      for (std::size_t a = 0; a < m; ++a) {
        mix[a] = lambda * x[a] + (1.0 - lambda) * y[a];
      }
      const double rhs =
          lambda * smoothed_max(x, reg) + (1.0 - lambda) * smoothed_max(y, reg);
      c.record(rhs + 1e-10 - smoothed_max(mix, reg));
    }
  });

  define("regularizer.gradient_distribution", [&](CheckResult& c, SplitMix64& rng) {
    for (std::size_t i = 0; i < samples; ++i) {
      const Vector x = detail::random_vector(rng, m, value_bound);
      const ProbabilityVector g = smoothed_max_gradient(x, reg);
      double sum = 0.0;
      double most_negative = 0.0;
      for (double p : g) {
        sum += p;
        most_negative = std::min(most_negative, p);
      }
      c.record(std::min(most_negative, 1e-12 - std::abs(sum - 1.0)));
    }
  });

  define("bellman.convexity", [&](CheckResult& c, SplitMix64& rng) {
    for (std::size_t i = 0; i < samples; ++i) {
      const Vector q1 = detail::random_vector(rng, pairs, value_bound);
      const Vector q2 = detail::random_vector(rng, pairs, value_bound);
      const Vector lhs = subtract(residual_F(q2, mdp, reg), residual_F(q1, mdp, reg));
      const Vector rhs = matvec(jac_fn(q1), subtract(q2, q1));
      double worst = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < pairs; ++k) {
        worst = std::min(worst, lhs[k] - rhs[k] + 1e-10);
      }
      c.record(worst);
    }
  });

  define("bellman.jacobian_lipschitz", [&](CheckResult& c, SplitMix64& rng) {
    const double constant =
        mdp.gamma * n_over_mu * std::sqrt(static_cast<double>(pairs));
    for (std::size_t i = 0; i < samples; ++i) {
      const Vector q1 = detail::random_vector(rng, pairs, value_bound);
      const double spread = (i % 2 == 0) ? value_bound : 0.1 / n_over_mu;
      const Vector q2 = add(q1, detail::random_vector(rng, pairs, spread));
      const double lhs = inf_norm(jac_fn(q1) - jac_fn(q2));
      c.record(constant * inf_norm(subtract(q1, q2)) + 1e-10 - lhs);
    }
  });

  define("bellman.inverse_norm", [&](CheckResult& c, SplitMix64& rng) {
    for (std::size_t i = 0; i < samples; ++i) {
      const Vector q = detail::random_vector(rng, pairs, value_bound);
      c.record(value_bound + 1e-9 - inf_norm(inverse(jac_fn(q))));
    }
  });

  define("bellman.inverse_negativity", [&](CheckResult& c, SplitMix64& rng) {
    for (std::size_t i = 0; i < samples; ++i) {
      const Vector q = detail::random_vector(rng, pairs, value_bound);
      const DenseMatrix shifted = inverse(jac_fn(q)) + DenseMatrix::identity(pairs);
      double largest = -std::numeric_limits<double>::infinity();
      for (double v : shifted.data()) largest = std::max(largest, v);
      c.record(1e-10 - largest);
    }
  });

  define("bellman.jacobian_norm", [&](CheckResult& c, SplitMix64& rng) {
    for (std::size_t i = 0; i < samples; ++i) {
      const Vector q = detail::random_vector(rng, pairs, value_bound);
      c.record(1.0 + mdp.gamma + 1e-12 - inf_norm(jac_fn(q)));
    }
  });

  define("bellman.jacobian_fd", [&](CheckResult& c, SplitMix64& rng) {
    for (std::size_t i = 0; i < samples; ++i) {
      const Vector q = detail::random_vector(rng, pairs, value_bound);
      c.record(1e-6 - jacobian_fd_check(q, mdp, reg, 1e-6, jac_fn));
    }
  });

  define("bellman.decomposition", [&](CheckResult& c, SplitMix64& rng) {
    for (std::size_t i = 0; i < samples; ++i) {
      const Vector q = detail::random_vector(rng, pairs, value_bound);
      const BellmanParts parts = decomposition_parts(q, mdp, reg);
      const Vector jq = matvec(jac_fn(q), q);
      const Vector pe = matvec(mdp.transition, parts.e_omega);
      const Vector f = residual_F(q, mdp, reg);
      double worst = 0.0;
      for (std::size_t k = 0; k < pairs; ++k) {
        const double rebuilt = jq[k] + mdp.gamma * pe[k] + mdp.reward[k];
        worst = std::max(worst, std::abs(f[k] - rebuilt));
      }
      c.record(1e-10 - worst);
    }
  });

  define("diagnostics.quadratic_constants", [&](CheckResult& c, SplitMix64&) {
    const QuadraticConstants qc = quadratic_constants(mdp, reg);
    c.record(1e-12 - std::abs(qc.coefficient * qc.radius - 1.0));
  });

  define("diagnostics.delta_monotone", [&](CheckResult& c, SplitMix64&) {
    for (std::size_t sweeps : {std::size_t{0}, std::size_t{2}, std::size_t{5},
                               std::size_t{50}}) {
      const double upper = mdp.gamma - (sweeps == 0 ? 0.0
                                                    : std::pow(mdp.gamma, sweeps));
      if (!(upper > 0.0)) continue;
      double previous = 0.0;
      for (int j = 1; j < 100; ++j) {
        const double slack = upper * j / 100.0;
        const double delta = mpi_region_constants(mdp, reg, sweeps, slack).delta;
        c.record(delta - previous);
        if (delta <= previous) c.fail("delta not strictly increasing");
        previous = delta;
      }
    }
  });

  define("diagnostics.region_contraction", [&](CheckResult& c, SplitMix64&) {
    const double g = mdp.gamma;
    for (std::size_t sweeps : {std::size_t{0}, std::size_t{2}, std::size_t{5},
                               std::size_t{50}}) {
      const double upper = g - (sweeps == 0 ? 0.0 : std::pow(g, sweeps));
      if (!(upper > 0.0)) continue;
      for (int j = 1; j < 100; ++j) {
        const double slack = upper * j / 100.0;
        const auto rc = mpi_region_constants(mdp, reg, sweeps, slack);
        const double t = rc.delta / (1.0 - g);
        const double lhs = (1.0 + t) * (rc.eta + (rc.eta + 2.0) * t);
        c.record(rc.eta + slack - lhs);
        if (!(lhs < rc.eta + slack)) c.fail("strict inequality violated");
      }
    }
  });

  return report;
}

/// Solver-level properties: Newton/PI equivalence, the global and local PI
/// rates, the MPI/inexact-Newton identities and the star-norm sandwich.
inline InvariantReport solver_property_checks(const MdpInstance& mdp,
                                              const RegularizerSpec& reg,
                                              std::uint64_t seed,
                                              std::size_t samples) {
  const std::size_t pairs = mdp.pairs();
  const double g = mdp.gamma;
  const double value_bound = 1.0 / (1.0 - g);
  const ValueVector q_star = solve_reference(mdp, reg);
  const QuadraticConstants quad = quadratic_constants(mdp, reg);

  SplitMix64 trace_rng(seed ^ 0x2545F4914F6CDD1DULL);
  const ValueVector q0 = detail::random_vector(trace_rng, pairs, value_bound);
  SolverConfig config;
  config.algorithm = Algorithm::PI;
  config.tolerance = 1e-13;
  config.max_iterations = 100;
  const SolverTrace pi_trace = run(mdp, reg, config, q0, q_star);
  const auto& e = pi_trace.errors_inf;
  const auto& qs = pi_trace.iterates;
  const double f0 = pi_trace.residual_norms.front();

  InvariantReport report;
  std::uint64_t stream = 0;
  auto define = [&](const char* name, auto&& body) {
    SplitMix64 rng(seed ^ (0x9E3779B97F4A7C15ULL * ++stream));
    report.checks.push_back(detail::run_check(
        name, [&](CheckResult& check) { body(check, rng); }));
  };

  define("solvers.newton_equivalence", [&](CheckResult& c, SplitMix64& rng) {
    for (std::size_t i = 0; i < samples; ++i) {
      const Vector q = detail::random_vector(rng, pairs, value_bound);
      const double gap = inf_norm(subtract(newton_step(q, mdp, reg),
                                           evaluate_policy_by_iteration(q, mdp, reg)));
      c.record(1e-9 - gap);
    }
  });

  define("solvers.pi_linear_rate", [&](CheckResult& c, SplitMix64&) {
    for (std::size_t k = 1; k + 1 < e.size() && e[k] >= 1e-10; ++k) {
      c.record(g * e[k] + 1e-12 - e[k + 1]);
    }
  });

  define("solvers.pi_total_bound", [&](CheckResult& c, SplitMix64&) {
    const double start = std::min(e.front(), f0);
    for (std::size_t k = 1; k < e.size(); ++k) {
      const double bound =
          2.0 * std::pow(g, static_cast<double>(k)) / (1.0 - g) * start + 1e-9;
      c.record(bound - e[k]);
    }
  });

  define("solvers.pi_monotone", [&](CheckResult& c, SplitMix64&) {
    for (std::size_t k = 1; k + 1 < qs.size(); ++k) {
      double worst = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < pairs; ++i) {
        worst = std::min(worst, qs[k + 1][i] + 1e-12 - qs[k][i]);
      }
      c.record(worst);
    }
  });

  define("solvers.pi_residual_sign", [&](CheckResult& c, SplitMix64&) {
    for (std::size_t k = 1; k < qs.size(); ++k) {
      const Vector f = residual_F(qs[k], mdp, reg);
      c.record(*std::min_element(f.begin(), f.end()) + 1e-10);
    }
  });

  define("solvers.pi_below_optimum", [&](CheckResult& c, SplitMix64&) {
    for (std::size_t k = 1; k < qs.size(); ++k) {
      double worst = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < pairs; ++i) {
        worst = std::min(worst, q_star[i] + 1e-10 - qs[k][i]);
      }
      c.record(worst);
    }
  });

  define("solvers.pi_quadratic", [&](CheckResult& c, SplitMix64& rng) {
    // Also start some runs inside the region so the bound is exercised even
    // when the main trace jumps over it.
    auto check_trace = [&](const std::vector<double>& errs) {
      for (std::size_t k = 0; k + 1 < errs.size(); ++k) {
        if (errs[k] <= quad.radius && errs[k + 1] >= kNoiseFloor) {
          c.record(quad.coefficient * errs[k] * errs[k] + 1e-12 - errs[k + 1]);
        }
      }
    };
    check_trace(e);
    for (std::size_t i = 0; i < samples; ++i) {
      const Vector start = add(q_star, detail::random_vector(rng, pairs, quad.radius));
      const ValueVector next = newton_step(start, mdp, reg);
      check_trace({inf_norm(subtract(start, q_star)),
                   inf_norm(subtract(next, q_star))});
    }
  });

  const std::size_t sweep_counts[] = {1, 2, 5, 50};

  define("solvers.pev_closed_form", [&](CheckResult& c, SplitMix64& rng) {
    for (std::size_t i = 0; i < samples; ++i) {
      const Vector q = detail::random_vector(rng, pairs, value_bound);
      const PolicyMatrix pi = greedy_policy(q, mdp, reg);
      ValueVector iterated = q;
      std::size_t done = 0;
      for (std::size_t sweeps : sweep_counts) {
        for (; done < sweeps; ++done) {
          iterated = apply_self_consistency(iterated, pi, mdp, reg);
        }
        const double gap =
            inf_norm(subtract(pev_closed_form(q, sweeps, mdp, reg), iterated));
        c.record(1e-10 - gap);
      }
    }
  });

  define("solvers.inexact_newton_identity", [&](CheckResult& c, SplitMix64& rng) {
    for (std::size_t i = 0; i < samples; ++i) {
      const Vector q = detail::random_vector(rng, pairs, value_bound);
      const DenseMatrix jac = jacobian(q, mdp, reg);
      const Vector f = residual_F(q, mdp, reg);
      for (std::size_t sweeps : sweep_counts) {
        const TruncatedEvaluation eval = truncated_evaluation(q, sweeps, mdp, reg);
        const Vector js = matvec(jac, subtract(eval.next, q));
        double worst = 0.0;
        for (std::size_t k = 0; k < pairs; ++k) {
          worst = std::max(worst, std::abs(js[k] + f[k] - eval.residual[k]));
        }
        c.record(1e-10 - worst);
      }
    }
  });

  define("solvers.inexact_residual_bound", [&](CheckResult& c, SplitMix64& rng) {
    for (std::size_t i = 0; i < samples; ++i) {
      const Vector q = detail::random_vector(rng, pairs, value_bound);
      const double fnorm = inf_norm(residual_F(q, mdp, reg));
      for (std::size_t sweeps : sweep_counts) {
        const double rnorm = inf_norm(mpi_residual(q, sweeps, mdp, reg));
        c.record(std::pow(g, static_cast<double>(sweeps)) * fnorm + 1e-12 -
                 rnorm);
      }
    }
  });

  define("solvers.star_norm_sandwich", [&](CheckResult& c, SplitMix64& rng) {
    for (std::size_t i = 0; i < samples; ++i) {
      const Vector v = detail::random_vector(rng, pairs, value_bound);
      const double vn = inf_norm(v);
      const double sn = star_norm(v, q_star, mdp, reg);
      c.record(std::min(sn - (1.0 - g) * vn + 1e-12,
                        (1.0 + g) * vn + 1e-12 - sn));
    }
  });

  return report;
}

}  // namespace rmdp
