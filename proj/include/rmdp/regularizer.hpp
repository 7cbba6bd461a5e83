// Smoothed max operators induced by strongly convex regularizers on the
// probability simplex:
//
//   max_Omega(x) = max_{p in simplex} <p, x> - Omega(p) / N
//
// Shannon entropy gives log-sum-exp with a softmax gradient. Tsallis entropy
// gives a sparsemax gradient (Euclidean projection onto the simplex).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rmdp {

enum class RegularizerKind { Shannon, Tsallis };

inline std::string_view to_string(RegularizerKind kind) {
  return kind == RegularizerKind::Shannon ? "shannon" : "tsallis";
}

struct RegularizerSpec {
  RegularizerKind kind = RegularizerKind::Shannon;
  double smoothing_strength = 1.0;  // N
  double strong_convexity = 1.0;    // mu; 1 for both built-in kinds

  static RegularizerSpec make(RegularizerKind kind, double smoothing_strength) {
    if (!(smoothing_strength > 0.0) || !std::isfinite(smoothing_strength)) {
      throw std::invalid_argument("smoothing strength must be positive, got " +
                                  std::to_string(smoothing_strength));
    }
    return RegularizerSpec{kind, smoothing_strength, 1.0};
  }
  static RegularizerSpec shannon(double n) {
    return make(RegularizerKind::Shannon, n);
  }
  static RegularizerSpec tsallis(double n) {
    return make(RegularizerKind::Tsallis, n);
  }

  /// sup_p -Omega(p) over the m-simplex; bounds max_Omega(x) - max(x) after
  /// division by N.
  double max_negative_value(std::size_t m) const {
    const double md = static_cast<double>(m);
    return kind == RegularizerKind::Shannon ? std::log(md)
                                            : 0.5 * (1.0 - 1.0 / md);
  }
};

/// Tolerance used when a caller hands us a distribution.
inline constexpr double kSimplexTolerance = 1e-9;

class ProbabilityVector;
inline ProbabilityVector softmax(std::span<const double> x, double scale);
inline ProbabilityVector sparsemax(std::span<const double> z);

/// A point of the probability simplex.
class ProbabilityVector {
 public:
  ProbabilityVector() = default;

  /// Throws std::domain_error unless entries are nonnegative and sum to one
  /// within `tolerance`.
  static ProbabilityVector checked(std::vector<double> entries,
                                   double tolerance = kSimplexTolerance) {
    if (entries.empty()) {
      throw std::domain_error("probability vector is empty");
    }
    double sum = 0.0;
    for (double p : entries) {
      if (!std::isfinite(p) || p < -tolerance) {
        throw std::domain_error("probability entry " + std::to_string(p) +
                                " is negative or non-finite");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > tolerance) {
      throw std::domain_error("probability entries sum to " +
                              std::to_string(sum));
    }
    return ProbabilityVector(std::move(entries));
  }

  std::size_t size() const noexcept { return entries_.size(); }
  double operator[](std::size_t i) const noexcept { return entries_[i]; }
  std::span<const double> entries() const noexcept { return entries_; }
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

 private:
  explicit ProbabilityVector(std::vector<double> entries)
      : entries_(std::move(entries)) {}

  friend ProbabilityVector softmax(std::span<const double>, double);
  friend ProbabilityVector sparsemax(std::span<const double>);

  std::vector<double> entries_;
};

namespace detail {

inline void require_finite(std::span<const double> x, const char* where) {
  if (x.empty()) {
    throw std::domain_error(std::string(where) + ": empty input");
  }
  for (double v : x) {
    if (!std::isfinite(v)) {
      throw std::domain_error(std::string(where) + ": non-finite input");
    }
  }
}

}  // namespace detail

/// softmax(scale * x), computed with the max subtracted before exponentiation.
inline ProbabilityVector softmax(std::span<const double> x, double scale) {
  const double top = *std::max_element(x.begin(), x.end());
  std::vector<double> p(x.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    p[i] = std::exp(scale * (x[i] - top));
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return ProbabilityVector(std::move(p));
}

/// Euclidean projection of z onto the simplex by the sort-and-threshold rule.
inline ProbabilityVector sparsemax(std::span<const double> z) {
  std::vector<double> sorted(z.begin(), z.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double tau = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    cumulative += sorted[k];
    const double candidate = (cumulative - 1.0) / static_cast<double>(k + 1);
    // Support grows while the k-th largest entry stays above the threshold.
    if (sorted[k] > candidate) {
      tau = candidate;
    } else {
      break;
    }
  }
  std::vector<double> p(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) p[i] = std::max(z[i] - tau, 0.0);
  return ProbabilityVector(std::move(p));
}

/// Omega(p). Shannon uses 0 ln 0 = 0.
inline double regularizer_value(std::span<const double> p,
                                const RegularizerSpec& reg) {
  // Validates simplex membership; the copy is tiny (one row of actions).
  (void)ProbabilityVector::checked(std::vector<double>(p.begin(), p.end()));
  double value = 0.0;
  if (reg.kind == RegularizerKind::Shannon) {
    for (double pi : p) {
      if (pi > 0.0) value += pi * std::log(pi);
    }
  } else {
    for (double pi : p) value += pi * pi;
    value = 0.5 * (value - 1.0);
  }
  return value;
}

inline double regularizer_value(const ProbabilityVector& p,
                                const RegularizerSpec& reg) {
  return regularizer_value(p.entries(), reg);
}

/// Argmax distribution of the smoothed max problem.
inline ProbabilityVector smoothed_max_gradient(std::span<const double> x,
                                               const RegularizerSpec& reg) {
  detail::require_finite(x, "smoothed_max_gradient");
  const double n = reg.smoothing_strength;
  if (reg.kind == RegularizerKind::Shannon) return softmax(x, n);
  std::vector<double> scaled(x.begin(), x.end());
  for (double& v : scaled) v *= n;
  return sparsemax(scaled);
}

inline double smoothed_max(std::span<const double> x,
                           const RegularizerSpec& reg) {
  detail::require_finite(x, "smoothed_max");
  const double n = reg.smoothing_strength;
  if (reg.kind == RegularizerKind::Shannon) {
    const double top = *std::max_element(x.begin(), x.end());
    double sum = 0.0;
    for (double v : x) sum += std::exp(n * (v - top));
    return top + std::log(sum) / n;
  }
  // No tidy closed form for Tsallis: substitute the maximizer back in.
  const ProbabilityVector p = smoothed_max_gradient(x, reg);
  double inner = 0.0;
  double squares = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    inner += p[i] * x[i];
    squares += p[i] * p[i];
  }
  return inner - 0.5 * (squares - 1.0) / n;
}

}  // namespace rmdp
