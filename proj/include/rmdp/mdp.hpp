// Finite discounted MDP in the flattened (state, action) layout.
//
// Rows of the transition matrix and entries of the reward / value vectors are
// indexed state-major, action-minor: (s0,a0), (s0,a1), ..., (s_{n-1},a_{m-1}).

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "rmdp/linalg.hpp"

namespace rmdp {

/// Action values q(s, a), flattened state-major.
using ValueVector = std::vector<double>;

/// Row-sum tolerance for transition rows and policy rows.
inline constexpr double kStochasticTolerance = 1e-12;

struct MdpInstance {
  std::size_t n = 0;  // states
  std::size_t m = 0;  // actions
  double gamma = 0.0;
  DenseMatrix transition;  // (n*m) x n
  Vector reward;           // n*m

  std::size_t pairs() const noexcept { return n * m; }
  std::size_t index(std::size_t state, std::size_t action) const noexcept {
    return state * m + action;
  }

  friend bool operator==(const MdpInstance&, const MdpInstance&) = default;
};

/// One distribution over actions per state.
class PolicyMatrix {
 public:
  PolicyMatrix() = default;
  PolicyMatrix(std::size_t states, std::size_t actions)
      : probs_(states, actions) {}

  std::size_t states() const noexcept { return probs_.rows(); }
  std::size_t actions() const noexcept { return probs_.cols(); }

  std::span<const double> row(std::size_t s) const noexcept {
    return probs_.row(s);
  }
  std::span<double> row(std::size_t s) noexcept { return probs_.row(s); }
  double operator()(std::size_t s, std::size_t a) const noexcept {
    return probs_(s, a);
  }
  double& operator()(std::size_t s, std::size_t a) noexcept {
    return probs_(s, a);
  }

 private:
  DenseMatrix probs_;
};

/// Returns one message per violated invariant; empty means valid. Each
/// message starts with the offending field name.
inline std::vector<std::string> validate(const MdpInstance& mdp) {
  std::vector<std::string> problems;
  if (mdp.n == 0) problems.emplace_back("n: must be at least 1");
  if (mdp.m == 0) problems.emplace_back("m: must be at least 1");
  if (!(mdp.gamma > 0.0 && mdp.gamma < 1.0)) {
    problems.push_back("gamma: " + std::to_string(mdp.gamma) +
                       " is outside (0, 1)");
  }
  const std::size_t pairs = mdp.n * mdp.m;
  if (mdp.transition.rows() != pairs || mdp.transition.cols() != mdp.n) {
    problems.push_back("transition: shape " +
                       std::to_string(mdp.transition.rows()) + "x" +
                       std::to_string(mdp.transition.cols()) + ", expected " +
                       std::to_string(pairs) + "x" + std::to_string(mdp.n));
  } else {
    for (std::size_t row = 0; row < pairs; ++row) {
      double sum = 0.0;
      bool bad_entry = false;
      for (double p : mdp.transition.row(row)) {
        if (!std::isfinite(p) || p < 0.0) bad_entry = true;
        sum += p;
      }
      if (bad_entry) {
        problems.push_back("transition: row " + std::to_string(row) +
                           " has a negative or non-finite probability");
      } else if (std::abs(sum - 1.0) > kStochasticTolerance) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", sum);
        problems.push_back("transition: row " + std::to_string(row) +
                           " sums to " + buf + ", not row-stochastic");
      }
    }
  }
  if (mdp.reward.size() != pairs) {
    problems.push_back("reward: length " + std::to_string(mdp.reward.size()) +
                       ", expected " + std::to_string(pairs));
  }
  for (std::size_t i = 0; i < mdp.reward.size(); ++i) {
    if (!std::isfinite(mdp.reward[i])) {
      problems.push_back("reward: entry " + std::to_string(i) +
                         " is not finite");
    }
  }
  return problems;
}

/// SplitMix64. Fully specified so other implementations can reproduce
/// generated instances bit for bit:
///   state += 0x9E3779B97F4A7C15
///   z = state
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   return z ^ (z >> 31)
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// (next() >> 11) * 2^-53, in [0, 1).
  double uniform() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  /// ((next() >> 11) + 0.5) * 2^-53, strictly inside (0, 1).
  double open_uniform() noexcept {
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// -ln(open_uniform()), a unit-rate exponential that is never zero.
  double exponential() noexcept { return -std::log(open_uniform()); }

 private:
  std::uint64_t state_;
};

/// Rows are flat-Dirichlet (n exponentials normalized), drawn for
/// (s,a) pairs in flattening order; then n*m rewards uniform on [0, 1).
inline MdpInstance random_instance(std::size_t n, std::size_t m, double gamma,
                                   std::uint64_t seed) {
  if (n == 0 || m == 0) {
    throw std::invalid_argument("random_instance: n and m must be >= 1");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("random_instance: gamma must be in (0, 1)");
  }
  SplitMix64 rng(seed);
  MdpInstance mdp{n, m, gamma, DenseMatrix(n * m, n), Vector(n * m)};
  for (std::size_t row = 0; row < n * m; ++row) {
    auto probs = mdp.transition.row(row);
    double sum = 0.0;
    for (double& p : probs) {
      p = rng.exponential();
      sum += p;
    }
    for (double& p : probs) p /= sum;
  }
  for (double& r : mdp.reward) r = rng.uniform();
  return mdp;
}

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_row(std::ostream& out, std::span<const double> values) {
  out << '[';
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out << ", ";
    out << format_double(values[i]);
  }
  out << ']';
}

inline double json_number(const nlohmann::json& j, const std::string& field) {
  if (!j.is_number()) throw ParseError(field + ": expected a number");
  return j.get<double>();
}

inline std::size_t json_count(const nlohmann::json& doc, const char* field) {
  if (!doc.contains(field)) {
    throw ParseError(std::string(field) + ": missing");
  }
  const auto& j = doc.at(field);
  if (!j.is_number_integer() || j.get<std::int64_t>() < 1) {
    throw ParseError(std::string(field) + ": expected a positive integer");
  }
  return j.get<std::size_t>();
}

}  // namespace detail

/// JSON document with every number printed to 17 significant digits.
inline std::string to_json_text(const MdpInstance& mdp) {
  std::ostringstream out;
  out << "{\n";
  out << "  \"n\": " << mdp.n << ",\n";
  out << "  \"m\": " << mdp.m << ",\n";
  out << "  \"gamma\": " << detail::format_double(mdp.gamma) << ",\n";
  out << "  \"transition\": [\n";
  for (std::size_t row = 0; row < mdp.transition.rows(); ++row) {
    out << "    ";
    detail::write_row(out, mdp.transition.row(row));
    out << (row + 1 < mdp.transition.rows() ? ",\n" : "\n");
  }
  out << "  ],\n";
  out << "  \"reward\": ";
  detail::write_row(out, mdp.reward);
  out << "\n}\n";
  return out.str();
}

/// Parses and validates; errors name the offending field.
inline MdpInstance from_json_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("document: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("document: expected an object");

  MdpInstance mdp;
  mdp.n = detail::json_count(doc, "n");
  mdp.m = detail::json_count(doc, "m");
  if (!doc.contains("gamma")) throw ParseError("gamma: missing");
  mdp.gamma = detail::json_number(doc["gamma"], "gamma");

  if (!doc.contains("transition")) throw ParseError("transition: missing");
  const auto& rows = doc["transition"];
  if (!rows.is_array() || rows.size() != mdp.pairs()) {
    throw ParseError("transition: expected " + std::to_string(mdp.pairs()) +
                     " rows");
  }
  mdp.transition = DenseMatrix(mdp.pairs(), mdp.n);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    const std::string where = "transition[" + std::to_string(i) + "]";
    if (!row.is_array() || row.size() != mdp.n) {
      throw ParseError(where + ": expected " + std::to_string(mdp.n) +
                       " entries");
    }
    for (std::size_t j = 0; j < mdp.n; ++j) {
      const double p = detail::json_number(row[j], where);
      if (p < 0.0) throw ParseError(where + ": negative probability");
      mdp.transition(i, j) = p;
    }
  }

  if (!doc.contains("reward")) throw ParseError("reward: missing");
  const auto& reward = doc["reward"];
  if (!reward.is_array() || reward.size() != mdp.pairs()) {
    throw ParseError("reward: expected " + std::to_string(mdp.pairs()) +
                     " entries");
  }
  mdp.reward.resize(mdp.pairs());
  for (std::size_t i = 0; i < mdp.pairs(); ++i) {
    mdp.reward[i] = detail::json_number(reward[i], "reward");
  }

  if (const auto problems = validate(mdp); !problems.empty()) {
    throw ParseError(problems.front());
  }
  return mdp;
}

inline void save(const MdpInstance& mdp, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << to_json_text(mdp);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

inline MdpInstance load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_json_text(buffer.str());
}

}  // namespace rmdp
