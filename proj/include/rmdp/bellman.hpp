// The smoothed Bellman equation F(q) = gamma P f(q) + r - q = 0 and the
// regularized operators it is built from.
//
// f(q) stacks max_Omega over each state's action values, and grad f(q) is the
// block-diagonal n x (n m) matrix whose s-th block row is the greedy
// distribution at state s. The Jacobian is F'(q) = gamma P grad f(q) - I.

#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>

#include "rmdp/linalg.hpp"
#include "rmdp/mdp.hpp"
#include "rmdp/regularizer.hpp"

namespace rmdp {

struct BellmanParts {
  Vector f_omega;            // n
  DenseMatrix grad_f_omega;  // n x (n m), block-diagonal
  Vector e_omega;            // n, -Omega(greedy row) / N
};

namespace detail {

inline void require_value_size(const MdpInstance& mdp,
                               std::span<const double> q, const char* where) {
  if (q.size() != mdp.pairs()) {
    throw std::invalid_argument(std::string(where) + ": value vector has " +
                                std::to_string(q.size()) +
                                " entries, expected n*m = " +
                                std::to_string(mdp.pairs()));
  }
}

inline std::span<const double> state_slice(const MdpInstance& mdp,
                                           std::span<const double> q,
                                           std::size_t s) {
  return q.subspan(s * mdp.m, mdp.m);
}

}  // namespace detail

inline PolicyMatrix greedy_policy(std::span<const double> q,
                                  const MdpInstance& mdp,
                                  const RegularizerSpec& reg) {
  detail::require_value_size(mdp, q, "greedy_policy");
  PolicyMatrix pi(mdp.n, mdp.m);
  for (std::size_t s = 0; s < mdp.n; ++s) {
    const ProbabilityVector p =
        smoothed_max_gradient(detail::state_slice(mdp, q, s), reg);
    std::copy(p.begin(), p.end(), pi.row(s).begin());
  }
  return pi;
}

inline BellmanParts decomposition_parts(std::span<const double> q,
                                        const MdpInstance& mdp,
                                        const RegularizerSpec& reg) {
  detail::require_value_size(mdp, q, "decomposition_parts");
  BellmanParts parts{Vector(mdp.n), DenseMatrix(mdp.n, mdp.pairs()),
                     Vector(mdp.n)};
  for (std::size_t s = 0; s < mdp.n; ++s) {
    const auto row = detail::state_slice(mdp, q, s);
    const ProbabilityVector p = smoothed_max_gradient(row, reg);
    parts.f_omega[s] = smoothed_max(row, reg);
    for (std::size_t a = 0; a < mdp.m; ++a) {
      parts.grad_f_omega(s, mdp.index(s, a)) = p[a];
    }
    parts.e_omega[s] = -regularizer_value(p, reg) / reg.smoothing_strength;
  }
  return parts;
}

/// gamma P Omega-greedy kernel: entry ((s,a), (s',a')) is
/// gamma P(s'|s,a) pi(a'|s'). Row-substochastic with row sums gamma.
inline DenseMatrix discounted_policy_kernel(const MdpInstance& mdp,
                                            const PolicyMatrix& pi) {
  if (pi.states() != mdp.n || pi.actions() != mdp.m) {
    throw std::invalid_argument("discounted_policy_kernel: policy shape");
  }
  DenseMatrix kernel(mdp.pairs(), mdp.pairs());
  for (std::size_t row = 0; row < mdp.pairs(); ++row) {
    for (std::size_t next = 0; next < mdp.n; ++next) {
      const double weight = mdp.gamma * mdp.transition(row, next);
      if (weight == 0.0) continue;
      for (std::size_t a = 0; a < mdp.m; ++a) {
        kernel(row, mdp.index(next, a)) = weight * pi(next, a);
      }
    }
  }
  return kernel;
}

/// gamma P grad f(q) at the point q.
inline DenseMatrix discounted_policy_kernel(std::span<const double> q,
                                            const MdpInstance& mdp,
                                            const RegularizerSpec& reg) {
  return discounted_policy_kernel(mdp, greedy_policy(q, mdp, reg));
}

/// B_Omega(q) = r + gamma P f(q).
inline Vector apply_bellman(std::span<const double> q, const MdpInstance& mdp,
                            const RegularizerSpec& reg) {
  detail::require_value_size(mdp, q, "apply_bellman");
  Vector f(mdp.n);
  for (std::size_t s = 0; s < mdp.n; ++s) {
    f[s] = smoothed_max(detail::state_slice(mdp, q, s), reg);
  }
  Vector out = matvec(mdp.transition, f);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = mdp.reward[i] + mdp.gamma * out[i];
  }
  return out;
}

/// F(q) = gamma P f(q) + r - q.
inline Vector residual_F(std::span<const double> q, const MdpInstance& mdp,
                         const RegularizerSpec& reg) {
  detail::require_value_size(mdp, q, "residual_F");
  Vector out = apply_bellman(q, mdp, reg);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= q[i];
  return out;
}

/// F'(q) = gamma P grad f(q) - I.
inline DenseMatrix jacobian(std::span<const double> q, const MdpInstance& mdp,
                            const RegularizerSpec& reg) {
  detail::require_value_size(mdp, q, "jacobian");
  DenseMatrix jac = discounted_policy_kernel(q, mdp, reg);
  for (std::size_t i = 0; i < jac.rows(); ++i) jac(i, i) -= 1.0;
  return jac;
}

/// Regularized self-consistency operator for a fixed policy:
///   r(s,a) + gamma sum_s' P(s'|s,a) (sum_a' pi(a'|s') q(s',a')
///                                    - Omega(pi(.|s')) / N)
inline Vector apply_self_consistency(std::span<const double> q,
                                     const PolicyMatrix& pi,
                                     const MdpInstance& mdp,
                                     const RegularizerSpec& reg) {
  detail::require_value_size(mdp, q, "apply_self_consistency");
  if (pi.states() != mdp.n || pi.actions() != mdp.m) {
    throw std::invalid_argument("apply_self_consistency: policy is " +
                                std::to_string(pi.states()) + "x" +
                                std::to_string(pi.actions()) + ", expected " +
                                std::to_string(mdp.n) + "x" +
                                std::to_string(mdp.m));
  }
  Vector next_value(mdp.n);
  for (std::size_t s = 0; s < mdp.n; ++s) {
    double expected = 0.0;
    for (std::size_t a = 0; a < mdp.m; ++a) {
      expected += pi(s, a) * q[mdp.index(s, a)];
    }
    next_value[s] =
        expected - regularizer_value(pi.row(s), reg) / reg.smoothing_strength;
  }
  Vector out = matvec(mdp.transition, next_value);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = mdp.reward[i] + mdp.gamma * out[i];
  }
  return out;
}

}  // namespace rmdp
