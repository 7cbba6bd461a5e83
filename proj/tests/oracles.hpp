// Independent reference computations used only by tests. Nothing here calls
// the library routine it is meant to check.

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "rmdp/rmdp.hpp"

namespace rmdp::oracle {

/// Omega evaluated from scratch (no call into regularizer_value).
inline double omega(RegularizerKind kind, const std::vector<double>& p) {
  double v = 0.0;
  if (kind == RegularizerKind::Shannon) {
    for (double x : p) v += x > 0.0 ? x * std::log(x) : 0.0;
    return v;
  }
  for (double x : p) v += x * x;
  return 0.5 * (v - 1.0);
}

struct GridMax {
  double value;
  double p0;  // weight on the first coordinate at the maximizer
};

/// max over p = (t, 1 - t), t on a uniform grid, of <p, x> - Omega(p) / N.
inline GridMax grid_smoothed_max(double x0, double x1, RegularizerKind kind,
                                 double n, double resolution = 1e-4) {
  const auto steps = static_cast<long>(std::llround(1.0 / resolution));
  GridMax best{-INFINITY, 0.0};
  for (long i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(steps);
    const double value = t * x0 + (1.0 - t) * x1 - omega(kind, {t, 1.0 - t}) / n;
    if (value > best.value) best = {value, t};
  }
  return best;
}

/// Central difference gradient of a scalar function of a vector.
inline std::vector<double> fd_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double step = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double up = f(x);
    x[i] = saved - step;
    const double down = f(x);
    x[i] = saved;
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

/// Shannon-smoothed residual written as plain scalar loops:
///   F(s,a) = r(s,a) + gamma sum_s' P(s'|s,a) (1/N) ln sum_a' e^{N q(s',a')}
///            - q(s,a)
/// Uses the naive log-sum-exp; fine for the small values tests use.
inline std::vector<double> shannon_residual_loops(const std::vector<double>& q,
                                                  const MdpInstance& mdp,
                                                  double n_smooth) {
  std::vector<double> out(mdp.n * mdp.m);
  for (std::size_t s = 0; s < mdp.n; ++s) {
    for (std::size_t a = 0; a < mdp.m; ++a) {
      const std::size_t row = s * mdp.m + a;
      double expected = 0.0;
      for (std::size_t t = 0; t < mdp.n; ++t) {
        double sum = 0.0;
        for (std::size_t b = 0; b < mdp.m; ++b) {
          sum += std::exp(n_smooth * q[t * mdp.m + b]);
        }
        expected += mdp.transition(row, t) * std::log(sum) / n_smooth;
      }
      out[row] = mdp.reward[row] + mdp.gamma * expected - q[row];
    }
  }
  return out;
}

inline std::vector<double> uniform_vector(SplitMix64& rng, std::size_t size,
                                          double lo, double hi) {
  std::vector<double> v(size);
  for (double& x : v) x = lo + (hi - lo) * rng.uniform();
  return v;
}

inline MdpInstance scalar_instance(double gamma = 0.8, double reward = 1.0) {
  return MdpInstance{1, 1, gamma, DenseMatrix(1, 1, 1.0), {reward}};
}

}  // namespace rmdp::oracle
