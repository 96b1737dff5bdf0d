#pragma once

// Subcommand bodies for the command-line tool. Each runner renders its
// result to text so that output is byte-identical for equal inputs.

#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "thinshell/config.hpp"
#include "thinshell/gibbs.hpp"
#include "thinshell/hamiltonian.hpp"
#include "thinshell/projection.hpp"
#include "thinshell/sampler.hpp"
#include "thinshell/sum_density.hpp"

namespace thinshell {

struct Report {
  std::string body;
  bool has_checks = false;
  bool all_pass = true;

  void check(bool ok) {
    has_checks = true;
    all_pass = all_pass && ok;
  }
};

namespace csv {

inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
inline std::string num(std::optional<double> v) { return v ? num(*v) : std::string(); }
inline std::string flag(bool b) { return b ? "true" : "false"; }

inline std::string row(std::initializer_list<std::string> cells) {
  std::string out;
  bool first = true;
  for (const auto& c : cells) {
    if (!first) out += ',';
    out += c;
    first = false;
  }
  out += '\n';
  return out;
}

}  // namespace csv

inline const char* kBoundsHeader =
    "n,k,t,c,alpha,kl,tv,kl_bound,tv_from_kl,df_bound,C_used,pass_kl,pass_tv\n";
inline const char* kConverseHeader = "n,k,eps,lower_bound,tv\n";
inline const char* kEnsemblesHeader = "n,k,testfn,E_micro,E_canon,gap,se_micro,se_canon\n";
inline const char* kMixtureHeader = "n,k,tv_sum,bound,pass\n";
inline const char* kCltHeader = "n,sup_dev,scaled_dev\n";
inline const char* kSolveHeader = "t,c,Z,mu,sigma2,m3\n";

inline Report run_analyze_f(const ExperimentConfig& cfg) {
  const auto spec = cfg.spec();
  const auto rep = check_class_f(spec, ScanParameters{});
  auto yes = [](bool b) { return b ? "yes" : "no"; };
  std::ostringstream os;
  os << "Hamiltonian " << spec.name() << " (" << to_string(spec.support()) << " support)\n";
  os << "  f(0) = 0: " << yes(rep.f0_ok) << '\n';
  os << "  increasing on the scan: " << yes(rep.monotone_ok) << '\n';
  if (rep.tail_slope) {
    os << "  tail: f'(x) >= " << csv::num(rep.tail_slope->a1) << " for x > "
       << csv::num(rep.tail_slope->a2) << '\n';
  } else {
    os << "  tail: no positive slope witness found\n";
  }
  if (rep.origin_exponent) {
    os << "  origin: f'^q / f >= " << csv::num(rep.origin_exponent->a3)
       << " with q = " << csv::num(rep.origin_exponent->q) << '\n';
  } else {
    os << "  origin: no exponent q in (1, 2) found\n";
  }
  os << "  support: " << (rep.support_ok ? "ok" : "invalid") << '\n';
  os << "  member: " << yes(rep.overall) << '\n';
  os << "[membership]\n";
  os << "kind=" << to_string(spec.kind()) << '\n';
  os << "support=" << to_string(spec.support()) << '\n';
  os << "f0_ok=" << csv::flag(rep.f0_ok) << '\n';
  os << "monotone_ok=" << csv::flag(rep.monotone_ok) << '\n';
  os << "tail_a1=" << (rep.tail_slope ? csv::num(rep.tail_slope->a1) : "") << '\n';
  os << "tail_a2=" << (rep.tail_slope ? csv::num(rep.tail_slope->a2) : "") << '\n';
  os << "origin_q=" << (rep.origin_exponent ? csv::num(rep.origin_exponent->q) : "") << '\n';
  os << "origin_a3=" << (rep.origin_exponent ? csv::num(rep.origin_exponent->a3) : "") << '\n';
  os << "support_ok=" << csv::flag(rep.support_ok) << '\n';
  os << "overall=" << csv::flag(rep.overall) << '\n';
  os << "[end]\n";
  Report r;
  r.body = os.str();
  r.check(rep.overall);
  return r;
}

inline Report run_solve_c(const ExperimentConfig& cfg) {
  const auto m = solve_energy(cfg.spec(), cfg.t);
  Report r;
  r.body = kSolveHeader;
  r.body += csv::row({csv::num(cfg.t), csv::num(m.c), csv::num(m.Z), csv::num(m.mu),
                      csv::num(m.sigma2), csv::num(m.m3)});
  return r;
}

inline Report run_wn(const ExperimentConfig& cfg) {
  const auto m = solve_energy(cfg.spec(), cfg.t);
  const bool closed = m.spec.has_closed_wn();
  Report r;
  r.body = closed ? "n,s,w,log_w,w_exact,log_w_exact\n" : "n,s,w,log_w\n";
  for (int n : cfg.n_list) {
    const DensityGrid g =
        cfg.source == DensitySource::exact ? w_exact(m, n, cfg.grid) : w_fft(m, n, cfg.grid);
    for (std::size_t i = 0; i < g.size(); i += cfg.wn_stride) {
      const double s = g.position(i);
      const double w = g.evaluate(s);
      std::string line = std::to_string(n) + ',' + csv::num(s) + ',' + csv::num(w) + ',' +
                         csv::num(g.log_evaluate(s));
      if (closed) {
        const double le = log_w_exact(m, n, s);
        line += ',' + csv::num(std::exp(le)) + ',' + csv::num(le);
      }
      r.body += line + '\n';
    }
  }
  return r;
}

/// Largest sqrt(2 pi n) sup-deviation over the scan; the C used in bounds.
inline LocalCltReport clt_scan(const GibbsModel& m, const ExperimentConfig& cfg) {
  return local_clt_scan(m, cfg.clt_n_list, cfg.grid);
}

inline Report run_clt_scan(const ExperimentConfig& cfg) {
  const auto m = solve_energy(cfg.spec(), cfg.t);
  const auto rep = clt_scan(m, cfg);
  Report r;
  r.body = kCltHeader;
  double lo = kInfinity, hi = 0.0;
  bool finite = true;
  for (std::size_t i = 0; i < rep.n_list.size(); ++i) {
    r.body += csv::row({std::to_string(rep.n_list[i]), csv::num(rep.sup_dev[i]),
                        csv::num(rep.scaled_dev[i])});
    finite = finite && std::isfinite(rep.scaled_dev[i]);
    if (rep.n_list[i] >= 64 && rep.n_list[i] <= 256) {
      lo = std::min(lo, rep.scaled_dev[i]);
      hi = std::max(hi, rep.scaled_dev[i]);
    }
  }
  const bool stable = hi > 0.0 ? hi <= 2.0 * lo : true;
  r.body += "# C_hat=" + csv::num(rep.C_hat) + '\n';
  r.body += "# r=" + std::to_string(rep.r) + '\n';
  r.body += "# I=" + csv::num(rep.I) + '\n';
  r.body += "# nu=" + csv::num(rep.nu) + '\n';
  r.body += "# stable_64_256=" + csv::flag(stable) + '\n';
  r.check(finite && stable);
  return r;
}

inline Report run_bounds(const ExperimentConfig& cfg) {
  const auto m = solve_energy(cfg.spec(), cfg.t);
  double C;
  std::optional<int> r_used;
  if (cfg.C_override) {
    C = *cfg.C_override;
  } else {
    const auto scan = clt_scan(m, cfg);
    C = scan.C_hat;
    r_used = scan.r;
  }
  struct Cell {
    int n, k;
  };
  std::vector<Cell> cells;
  for (int n : cfg.n_list) {
    for (int k : cfg.k_list) cells.push_back({n, k});
  }
  std::vector<std::vector<BoundReport>> out(cells.size());
  parallel_for(cells.size(), [&](std::size_t i) {
    const auto ctx = ProjectionContext::make(m, cells[i].n, cells[i].k, cfg.source, cfg.grid, r_used);
    for (double a : cfg.alpha_list) out[i].push_back(bound_report(ctx, C, a));
  });
  Report r;
  r.body = kBoundsHeader;
  for (const auto& group : out) {
    for (const auto& b : group) {
      r.body += csv::row({std::to_string(b.n), std::to_string(b.k), csv::num(b.t), csv::num(b.c),
                          csv::num(b.alpha), csv::num(b.kl), csv::num(b.tv), csv::num(b.kl_bound),
                          csv::num(b.tv_from_kl), csv::num(b.df_bound), csv::num(b.C_used),
                          csv::flag(b.pass_kl), csv::flag(b.pass_tv)});
      r.check(b.pass_kl && b.pass_tv);
    }
  }
  return r;
}

inline Report run_converse(const ExperimentConfig& cfg) {
  const auto m = solve_energy(cfg.spec(), cfg.t);
  std::vector<std::vector<ConverseResult>> out(cfg.n_list.size());
  std::vector<int> ks(cfg.n_list.size());
  parallel_for(cfg.n_list.size(), [&](std::size_t i) {
    const int n = cfg.n_list[i];
    ks[i] = std::clamp(static_cast<int>(std::lround(cfg.k_ratio * n)), 1, n - 1);
    const auto ctx = ProjectionContext::make(m, n, ks[i], cfg.source, cfg.grid);
    for (double e : cfg.eps_list) out[i].push_back(converse_lower_bound(ctx, e));
  });
  Report r;
  r.body = kConverseHeader;
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (const auto& c : out[i]) {
      r.body += csv::row({std::to_string(cfg.n_list[i]), std::to_string(ks[i]), csv::num(c.eps),
                          csv::num(c.lower_bound), csv::num(c.tv)});
    }
  }
  return r;
}

namespace detail {

inline bool use_scaling(const ExperimentConfig& cfg, const HamiltonianSpec& spec) {
  if (cfg.method == "scaling") return true;
  if (cfg.method == "rejection") return false;
  return spec.is_homogeneous();
}

inline SampleBatch draw_batch(const ExperimentConfig& cfg, const GibbsModel& m, int n,
                              std::size_t keep) {
  SamplerOptions o;
  o.keep = keep;
  if (use_scaling(cfg, m.spec)) return sample_surface_scaling(m, n, cfg.count, *cfg.seed, o);
  const double delta = cfg.delta.value_or(default_shell_width(m, n));
  return sample_surface_rejection(m, n, delta, cfg.count, *cfg.seed, o);
}

}  // namespace detail

inline Report run_ensembles(const ExperimentConfig& cfg) {
  const auto m = solve_energy(cfg.spec(), cfg.t);
  const std::size_t canon = cfg.canonical_count ? cfg.canonical_count : cfg.count;
  Report r;
  r.body = kEnsemblesHeader;
  for (int n : cfg.n_list) {
    for (int k : cfg.k_list) {
      const auto batch = detail::draw_batch(cfg, m, n, static_cast<std::size_t>(k));
      for (const auto& name : cfg.testfn) {
        const auto fn = make_test_function(name, m, k);
        const auto g = ensemble_expectation_gap(m, n, k, fn, batch, canon, *cfg.seed);
        r.body += csv::row({std::to_string(n), std::to_string(k), name, csv::num(g.E_micro),
                            csv::num(g.E_canon), csv::num(g.gap), csv::num(g.se_micro),
                            csv::num(g.se_canon)});
      }
    }
  }
  return r;
}

inline Report run_sample(const ExperimentConfig& cfg) {
  const auto m = solve_energy(cfg.spec(), cfg.t);
  const int n = cfg.n_list.front();
  const auto batch = detail::draw_batch(cfg, m, n, 0);
  if (!cfg.batch_path.empty()) write_batch(cfg.batch_path, batch);
  std::ostringstream os;
  os << "n=" << n << '\n';
  os << "t=" << csv::num(batch.t) << '\n';
  os << "c=" << csv::num(batch.c) << '\n';
  os << "method=" << (batch.method == SampleMethod::scaling ? "scaling" : "rejection") << '\n';
  os << "count=" << batch.count << '\n';
  os << "seed=" << batch.seed << '\n';
  if (batch.method == SampleMethod::rejection) {
    os << "delta=" << csv::num(batch.delta) << '\n';
    os << "attempts=" << batch.attempts << '\n';
    os << "acceptance_rate=" << csv::num(batch.acceptance_rate) << '\n';
    os << "predicted_acceptance="
       << csv::num(shell_probability(m, n, m.mu, batch.delta, cfg.source, cfg.grid)) << '\n';
  }
  os << "max_surface_residual=" << csv::num(batch.max_residual) << '\n';
  if (n >= 2 && batch.count > 0) {
    const auto ref = project_uniform_k1(ProjectionContext::make(m, n, 1, cfg.source, cfg.grid));
    os << "ks_first_coordinate=" << csv::num(empirical_projection_check(batch, ref)) << '\n';
  }
  if (!cfg.batch_path.empty()) os << "batch_file=" << cfg.batch_path << '\n';
  Report r;
  r.body = os.str();
  r.check(batch.max_residual <= 1e-9);
  return r;
}

inline Report run_mixture(const ExperimentConfig& cfg) {
  const auto spec = cfg.spec();
  std::vector<MixtureAtom> atoms;
  for (std::size_t i = 0; i < cfg.mix_t.size(); ++i) {
    atoms.push_back({solve_energy(spec, cfg.mix_t[i]), cfg.mix_t[i], cfg.mix_w[i]});
  }
  Report r;
  r.body = kMixtureHeader;
  for (int n : cfg.n_list) {
    for (int k : cfg.k_list) {
      const auto rep = mixture_bound_check(atoms, n, k, cfg.source, cfg.grid);
      r.body += csv::row({std::to_string(n), std::to_string(k), csv::num(rep.tv_sum),
                          csv::num(rep.bound), csv::flag(rep.pass)});
      r.check(rep.pass);
    }
  }
  return r;
}

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {"analyze-f", "solve-c", "wn",
                                                 "clt-scan",  "bounds",  "converse",
                                                 "ensembles", "sample",  "mixture"};
  return names;
}

inline Report run(const std::string& subcommand, const ExperimentConfig& cfg) {
  validate(cfg, subcommand);
  if (subcommand == "analyze-f") return run_analyze_f(cfg);
  if (subcommand == "solve-c") return run_solve_c(cfg);
  if (subcommand == "wn") return run_wn(cfg);
  if (subcommand == "clt-scan") return run_clt_scan(cfg);
  if (subcommand == "bounds") return run_bounds(cfg);
  if (subcommand == "converse") return run_converse(cfg);
  if (subcommand == "ensembles") return run_ensembles(cfg);
  if (subcommand == "sample") return run_sample(cfg);
  if (subcommand == "mixture") return run_mixture(cfg);
  throw PreconditionError("unknown subcommand '" + subcommand + "'");
}

}  // namespace thinshell
