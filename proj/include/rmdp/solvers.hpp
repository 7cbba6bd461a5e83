// Regularized value iteration, policy iteration and modified policy iteration
// on the smoothed Bellman equation.
//
// PI is run as the exact Newton iteration q <- q - F'(q)^{-1} F(q). MPI with M
// evaluation sweeps is run through its closed form
//
//   q + sum_{i<M} (gamma P grad f(q))^i F(q),
//
// which is an inexact Newton step with residual (gamma P grad f(q))^M F(q).
// VI is MPI with M = 1.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rmdp/bellman.hpp"
#include "rmdp/linalg.hpp"
#include "rmdp/mdp.hpp"
#include "rmdp/regularizer.hpp"

namespace rmdp {

enum class Algorithm { VI, PI, MPI };

inline std::string_view to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::VI:
      return "vi";
    case Algorithm::PI:
      return "pi";
    case Algorithm::MPI:
      return "mpi";
  }
  return "?";
}

struct SolverConfig {
  Algorithm algorithm = Algorithm::PI;
  std::size_t pev_steps = 1;  // M; ignored by PI, forced to 1 by VI
  double tolerance = 1e-10;   // on ||F(q_k)||_inf
  std::size_t max_iterations = 1000;
  bool record_trace = true;  // keep iterates and steps

  void validate() const {
    if (!(tolerance > 0.0)) {
      throw std::invalid_argument("SolverConfig: tolerance must be positive");
    }
    if (pev_steps < 1) {
      throw std::invalid_argument("SolverConfig: pev_steps must be >= 1");
    }
  }

  /// Evaluation sweeps per iteration; 0 stands for "to the fixed point" (PI).
  std::size_t effective_pev_steps() const noexcept {
    switch (algorithm) {
      case Algorithm::VI:
        return 1;
      case Algorithm::PI:
        return 0;
      case Algorithm::MPI:
        return pev_steps;
    }
    return pev_steps;
  }
};

/// Per-iterate vectors (iterates, residual_norms, errors_inf) have one entry
/// per q_0..q_K; per-step vectors (steps, inexact_residual_norms) have one per
/// transition q_k -> q_{k+1}.
struct SolverTrace {
  Algorithm algorithm = Algorithm::PI;
  std::size_t pev_steps = 0;  // 0 for PI
  std::vector<ValueVector> iterates;
  std::vector<double> residual_norms;
  std::vector<double> errors_inf;
  std::vector<double> inexact_residual_norms;
  std::vector<ValueVector> steps;
  ValueVector final_value;
  std::size_t iterations = 0;
  bool converged = false;
};

/// One exact Newton step, i.e. one regularized policy-iteration step.
inline ValueVector newton_step(std::span<const double> q,
                               const MdpInstance& mdp,
                               const RegularizerSpec& reg) {
  const Vector f = residual_F(q, mdp, reg);
  Vector delta;
  try {
    delta = lu_solve(jacobian(q, mdp, reg), f);
  } catch (const SingularMatrixError& e) {
    // gamma P grad f has inf-norm gamma < 1, so F' is always invertible.
    throw std::logic_error(std::string("newton_step: singular Jacobian: ") +
                           e.what());
  }
  return subtract(q, delta);
}

/// Result of M truncated policy-evaluation sweeps from q.
struct TruncatedEvaluation {
  ValueVector next;  // q + sum_{i<M} K^i F(q)
  Vector residual;   // K^M F(q), K = gamma P grad f(q)
};

inline TruncatedEvaluation truncated_evaluation(std::span<const double> q,
                                                std::size_t sweeps,
                                                const MdpInstance& mdp,
                                                const RegularizerSpec& reg) {
  if (sweeps < 1) {
    throw std::invalid_argument("truncated_evaluation: M must be >= 1");
  }
  const DenseMatrix kernel = discounted_policy_kernel(q, mdp, reg);
  Vector term = residual_F(q, mdp, reg);
  ValueVector next(q.begin(), q.end());
  for (std::size_t i = 0; i < sweeps; ++i) {
    for (std::size_t j = 0; j < next.size(); ++j) next[j] += term[j];
    term = matvec(kernel, term);
  }
  return {std::move(next), std::move(term)};
}

/// (T^{pi_{k+1}})^M (q) in closed form.
inline ValueVector pev_closed_form(std::span<const double> q, std::size_t sweeps,
                                   const MdpInstance& mdp,
                                   const RegularizerSpec& reg) {
  return truncated_evaluation(q, sweeps, mdp, reg).next;
}

/// r_k = (gamma P grad f(q))^M F(q).
inline Vector mpi_residual(std::span<const double> q, std::size_t sweeps,
                           const MdpInstance& mdp, const RegularizerSpec& reg) {
  return truncated_evaluation(q, sweeps, mdp, reg).residual;
}

enum class InitialValue { Zero, Uniform };

/// XORed into an instance seed to get the seed of its random q_0, so the
/// instance and the start point come from unrelated SplitMix64 streams.
inline constexpr std::uint64_t kInitialValueStream = 0xD1B54A32D192ED03ULL;

/// Zero, or i.i.d. uniform on [-1/(1-gamma), 1/(1-gamma)] from SplitMix64.
inline ValueVector initial_value(const MdpInstance& mdp, InitialValue mode,
                                 std::uint64_t seed = 0) {
  ValueVector q(mdp.pairs(), 0.0);
  if (mode == InitialValue::Uniform) {
    SplitMix64 rng(seed);
    const double bound = 1.0 / (1.0 - mdp.gamma);
    for (double& v : q) v = bound * (2.0 * rng.uniform() - 1.0);
  }
  return q;
}

inline SolverTrace run(const MdpInstance& mdp, const RegularizerSpec& reg,
                       const SolverConfig& config, std::span<const double> q0,
                       const std::optional<ValueVector>& reference = {}) {
  config.validate();
  detail::require_value_size(mdp, q0, "run");
  if (reference) detail::require_value_size(mdp, *reference, "run reference");

  SolverTrace trace;
  trace.algorithm = config.algorithm;
  trace.pev_steps = config.effective_pev_steps();

  ValueVector q(q0.begin(), q0.end());
  for (std::size_t k = 0;; ++k) {
    const double residual_norm = inf_norm(residual_F(q, mdp, reg));
    trace.residual_norms.push_back(residual_norm);
    if (reference) trace.errors_inf.push_back(inf_norm(subtract(*reference, q)));
    if (config.record_trace) trace.iterates.push_back(q);

    if (residual_norm <= config.tolerance) {
      trace.converged = true;
      break;
    }
    if (k == config.max_iterations) break;

    ValueVector next;
    if (config.algorithm == Algorithm::PI) {
      next = newton_step(q, mdp, reg);
    } else {
      TruncatedEvaluation eval =
          truncated_evaluation(q, trace.pev_steps, mdp, reg);
      trace.inexact_residual_norms.push_back(inf_norm(eval.residual));
      next = std::move(eval.next);
    }
    if (config.record_trace) trace.steps.push_back(subtract(next, q));
    q = std::move(next);
    ++trace.iterations;
  }
  trace.final_value = std::move(q);
  return trace;
}

/// High-accuracy q_*: Newton until ||F||_inf <= 1e-13, then two more steps.
///
/// When gamma is close to 1 the values are large enough that roundoff in F
/// can sit just above 1e-13. In that case the iteration is accepted once the
/// residual stops decreasing and is within 1e-12 (1 + ||q||_inf).
inline ValueVector solve_reference(const MdpInstance& mdp,
                                   const RegularizerSpec& reg,
                                   std::span<const double> q0 = {}) {
  constexpr double kTarget = 1e-13;
  constexpr std::size_t kMaxIterations = 200;
  ValueVector q = q0.empty() ? ValueVector(mdp.pairs(), 0.0)
                             : ValueVector(q0.begin(), q0.end());
  double best = inf_norm(residual_F(q, mdp, reg));
  std::size_t stalled = 0;
  for (std::size_t k = 0; k < kMaxIterations && best > kTarget; ++k) {
    q = newton_step(q, mdp, reg);
    const double norm = inf_norm(residual_F(q, mdp, reg));
    if (norm < best) {
      best = norm;
      stalled = 0;
    } else if (++stalled >= 3 && best <= 1e-12 * (1.0 + inf_norm(q))) {
      break;
    }
  }
  if (best > kTarget && best > 1e-12 * (1.0 + inf_norm(q))) {
    throw std::logic_error("solve_reference: Newton iteration did not converge");
  }
  q = newton_step(q, mdp, reg);
  q = newton_step(q, mdp, reg);
  return q;
}

}  // namespace rmdp
