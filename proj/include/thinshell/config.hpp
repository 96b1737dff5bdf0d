#pragma once

// Experiment configuration: a flat key=value file with list values, plus
// key=value overrides from the command line.

#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "thinshell/hamiltonian.hpp"
#include "thinshell/numeric.hpp"
#include "thinshell/sum_density.hpp"

namespace thinshell {

struct ExperimentConfig {
  // Hamiltonian
  std::string kind = "quadratic";
  double p = 2.0;
  double eps = 0.0;
  std::optional<Support> support;
  // sweep
  double t = 1.0;
  std::vector<int> n_list = {50, 100, 200};
  std::vector<int> k_list = {1, 3, 5};
  std::vector<double> alpha_list = {0.0};
  std::optional<double> C_override;
  std::vector<int> clt_n_list = {8, 16, 32, 64, 128, 256};
  // densities
  SumGridParams grid;
  DensitySource source = DensitySource::automatic;
  // converse
  std::vector<double> eps_list = {1.0};
  double k_ratio = 0.5;
  // samplers and ensembles
  std::size_t count = 10000;
  std::size_t canonical_count = 0;  // 0: same as count
  std::optional<double> delta;
  std::optional<std::uint64_t> seed;
  std::string method = "auto";  // auto | scaling | rejection
  std::vector<std::string> testfn = {"fsum"};
  // mixture atoms
  std::vector<double> mix_t = {0.5, 1.0};
  std::vector<double> mix_w = {0.5, 0.5};
  // output
  std::size_t wn_stride = 1;
  std::string output;  // empty: standard output
  std::string batch_path;

  HamiltonianSpec spec() const { return make_spec(kind, p, eps, support); }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string_view::npos ? std::string() : std::string(s.substr(b, e - b + 1));
}

inline double parse_real(const std::string& s) {
  if (s.empty()) throw PreconditionError("empty number");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) {
    throw PreconditionError("'" + s + "' is not a finite real number");
  }
  return v;
}

inline long long parse_integer(const std::string& s) {
  if (s.empty()) throw PreconditionError("empty integer");
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || errno == ERANGE) {
    throw PreconditionError("'" + s + "' is not an integer");
  }
  return v;
}

inline std::size_t parse_count(const std::string& s) {
  const long long v = parse_integer(s);
  if (v < 0) throw PreconditionError("'" + s + "' must be nonnegative");
  return static_cast<std::size_t>(v);
}

/// "1, 2, 3", "[1,2,3]" or "1 2 3".
inline std::vector<std::string> split_list(std::string s) {
  s = trim(s);
  if (!s.empty() && s.front() == '[') {
    if (s.back() != ']') throw PreconditionError("unterminated list");
    s = s.substr(1, s.size() - 2);
  }
  for (char& ch : s) {
    if (ch == ',') ch = ' ';
  }
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string item;
  while (is >> item) out.push_back(item);
  if (out.empty()) throw PreconditionError("empty list");
  return out;
}

inline std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  for (const auto& item : split_list(s)) {
    const long long v = parse_integer(item);
    if (v < 1 || v > 100000000) throw PreconditionError("'" + item + "' is out of range");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

inline std::vector<double> parse_real_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) out.push_back(parse_real(item));
  return out;
}

inline DensitySource parse_source(const std::string& s) {
  if (s == "auto") return DensitySource::automatic;
  if (s == "exact") return DensitySource::exact;
  if (s == "fft") return DensitySource::fft;
  throw PreconditionError("unknown density source '" + s + "' (auto, exact, fft)");
}

}  // namespace detail

/// Sets one key. Throws PreconditionError naming the problem.
inline void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  using namespace detail;
  if (key == "kind") {
    cfg.kind = value;
  } else if (key == "p") {
    cfg.p = parse_real(value);
  } else if (key == "eps") {
    cfg.eps = parse_real(value);
  } else if (key == "support") {
    cfg.support = parse_support(value);
  } else if (key == "t") {
    cfg.t = parse_real(value);
    if (!(cfg.t > 0.0)) throw PreconditionError("t must be positive");
  } else if (key == "n_list") {
    cfg.n_list = parse_int_list(value);
  } else if (key == "k_list") {
    cfg.k_list = parse_int_list(value);
  } else if (key == "alpha_list") {
    cfg.alpha_list = parse_real_list(value);
  } else if (key == "C") {
    if (value == "auto") {
      cfg.C_override.reset();
    } else {
      cfg.C_override = parse_real(value);
      if (!(*cfg.C_override > 0.0)) throw PreconditionError("C must be positive");
    }
  } else if (key == "clt_n_list") {
    cfg.clt_n_list = parse_int_list(value);
  } else if (key == "grid_extent") {
    cfg.grid.extent = parse_real(value);
    if (!(cfg.grid.extent >= 6.0)) throw PreconditionError("grid_extent must be at least 6");
  } else if (key == "grid_size") {
    const std::size_t v = parse_count(value);
    if (v < 1024 || (v & (v - 1)) != 0) {
      throw PreconditionError("grid_size must be a power of two >= 1024");
    }
    cfg.grid.min_points = v;
  } else if (key == "source") {
    cfg.source = parse_source(value);
  } else if (key == "eps_list") {
    cfg.eps_list = parse_real_list(value);
  } else if (key == "k_ratio") {
    cfg.k_ratio = parse_real(value);
    if (!(cfg.k_ratio > 0.0 && cfg.k_ratio < 1.0)) throw PreconditionError("k_ratio must be in (0, 1)");
  } else if (key == "count") {
    cfg.count = parse_count(value);
  } else if (key == "canonical_count") {
    cfg.canonical_count = parse_count(value);
  } else if (key == "delta") {
    if (value == "auto") {
      cfg.delta.reset();
    } else {
      cfg.delta = parse_real(value);
      if (!(*cfg.delta > 0.0)) throw PreconditionError("delta must be positive");
    }
  } else if (key == "seed") {
    const long long v = parse_integer(value);
    if (v < 0) throw PreconditionError("seed must be nonnegative");
    cfg.seed = static_cast<std::uint64_t>(v);
  } else if (key == "method") {
    if (value != "auto" && value != "scaling" && value != "rejection") {
      throw PreconditionError("unknown method '" + value + "' (auto, scaling, rejection)");
    }
    cfg.method = value;
  } else if (key == "testfn") {
    cfg.testfn = split_list(value);
  } else if (key == "mix_t") {
    cfg.mix_t = parse_real_list(value);
  } else if (key == "mix_w") {
    cfg.mix_w = parse_real_list(value);
  } else if (key == "wn_stride") {
    cfg.wn_stride = parse_count(value);
    if (cfg.wn_stride == 0) throw PreconditionError("wn_stride must be positive");
  } else if (key == "output") {
    cfg.output = value;
  } else if (key == "batch_path") {
    cfg.batch_path = value;
  } else {
    throw PreconditionError("unknown key '" + key + "'");
  }
}

/// Parses a configuration file body; errors carry line and field.
inline ExperimentConfig parse_config(std::string_view text, ExperimentConfig cfg = {}) {
  std::istringstream is{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (detail::trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw PreconditionError("line " + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = detail::trim(std::string_view(line).substr(0, eq));
    const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
    try {
      apply_setting(cfg, key, value);
    } catch (const std::logic_error& e) {
      throw PreconditionError("line " + std::to_string(lineno) + ", field '" + key +
                              "': " + e.what());
    }
  }
  return cfg;
}

/// Applies a "key=value" override.
inline void apply_override(ExperimentConfig& cfg, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos) throw PreconditionError("override '" + kv + "': expected key=value");
  const std::string key = detail::trim(std::string_view(kv).substr(0, eq));
  try {
    apply_setting(cfg, key, detail::trim(std::string_view(kv).substr(eq + 1)));
  } catch (const std::logic_error& e) {
    throw PreconditionError("override, field '" + key + "': " + e.what());
  }
}

/// Checks what a given subcommand needs from the configuration.
inline void validate(const ExperimentConfig& cfg, std::string_view subcommand) {
  try {
    (void)cfg.spec();
  } catch (const std::logic_error& e) {
    throw PreconditionError(std::string("field 'kind': ") + e.what());
  }
  const bool pairs = subcommand == "bounds" || subcommand == "ensembles" || subcommand == "mixture";
  if (pairs || subcommand == "converse" || subcommand == "wn" || subcommand == "sample") {
    if (cfg.n_list.empty()) throw PreconditionError("field 'n_list': must be nonempty");
  }
  if (pairs) {
    if (cfg.k_list.empty()) throw PreconditionError("field 'k_list': must be nonempty");
    for (int n : cfg.n_list) {
      for (int k : cfg.k_list) {
        if (!(k < n)) {
          throw PreconditionError("field 'k_list': k = " + std::to_string(k) +
                                  " is not below n = " + std::to_string(n));
        }
      }
    }
  }
  if ((subcommand == "sample" || subcommand == "ensembles") && !cfg.seed) {
    throw PreconditionError("field 'seed': required when samplers run");
  }
  if (subcommand == "mixture") {
    if (cfg.mix_t.empty() || cfg.mix_t.size() != cfg.mix_w.size()) {
      throw PreconditionError("fields 'mix_t'/'mix_w': need equal, nonempty lengths");
    }
  }
  if (subcommand == "converse" && cfg.eps_list.empty()) {
    throw PreconditionError("field 'eps_list': must be nonempty");
  }
}

}  // namespace thinshell
