#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "afem/adapt.hpp"
#include "afem/config.hpp"
#include "afem/estimator.hpp"
#include "afem/mesh_io.hpp"
#include "afem/report.hpp"
#include "afem/verify.hpp"

namespace fs = std::filesystem;
using namespace afem;

namespace {

constexpr int kExitFailedCheck = 1;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitRefine = 4;

struct Flags {
  std::string config_file;
  std::map<std::string, std::string> values;  // config key -> value, only flags actually given
};

void add_run_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config_file, "key = value configuration file");
  auto opt = [&](const char* flag, const char* key, const char* help) {
    cmd->add_option_function<std::string>(flag, [&f, key](const std::string& v) { f.values[key] = v; }, help);
  };
  opt("--problem", "problem", "built-in problem name or problem description file");
  opt("--theta", "theta", "Doerfler parameter in (0,1)");
  opt("--n-bisect", "n_bisect", "bisections per marked element");
  opt("--max-iters", "max_iters", "loop iterations (rows of the run log)");
  opt("--max-elements", "max_elements", "stop once the mesh has this many elements");
  opt("--eta-tol", "eta_tol", "stop once eta falls below this value");
  opt("--mode", "mode", "adaptive or uniform");
  opt("--seed", "seed", "seed for randomized checks");
  opt("--out", "out", "output directory");
  opt("--newton-tol", "newton_tol", "residual sup-norm target");
  opt("--exec", "exec", "serial or parallel kernels");
  opt("--fault", "fault", "none or jump-sign (fault injection)");
}

RunConfig build_config(const Flags& f, RunConfig base = {}) {
  if (!f.config_file.empty()) read_config_file(f.config_file, base);
  for (const auto& [k, v] : f.values) base.set(k, v);
  base.validate();
  return base;
}

/// Loads the problem and its initial mesh; errors become exit codes.
ProblemSpec load_checked(const RunConfig& cfg) {
  ProblemSpec p = load_problem(cfg.problem);
  (void)initial_mesh(p);
  return p;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

int cmd_run(const RunConfig& cfg, const ProblemSpec& problem) {
  fs::create_directories(cfg.out);
  const fs::path dir(cfg.out);
  std::ofstream log(dir / "run.csv");
  write_run_header(log);
  log.flush();
  RunResult res = run_loop(problem, cfg.adapt, [&](const AdaptRecord& r) {
    write_run_row(log, r);
    log.flush();
  });
  log.close();

  // Rewrite the log with the contraction quantity, which needs F_ref.
  {
    std::ofstream tmp(dir / "run.csv.tmp");
    write_run_csv(tmp, res.records);
  }
  fs::rename(dir / "run.csv.tmp", dir / "run.csv");

  {
    std::ofstream c(dir / "constants.txt");
    c << "# configuration\n";
    std::istringstream cfgtext(describe(cfg));
    for (std::string line; std::getline(cfgtext, line);) c << "# " << line << '\n';
    write_constants(c, res.constants, problem.constants);
    c << "F_ref_discrepancy=" << res.F_ref_discrepancy << '\n';
  }
  write_mesh_file((dir / "mesh.txt").string(), *res.final_state.mesh);
  {
    std::ofstream s(dir / "solution.txt");
    write_solution(s, res.final_state.U, "mesh.txt");
  }
  {
    std::ofstream e(dir / "estimator.csv");
    write_estimator_csv(e, res.final_state.report);
  }
  const AdaptRecord& last = res.records.back();
  std::printf("%s: %zu iterations, %zu elements, eta %.6g", problem.name.c_str(), res.records.size(),
              last.num_elements, last.eta);
  if (problem.has_exact()) std::printf(", error %.6g", last.h1_error);
  std::printf("\nartifacts written to %s\n", cfg.out.c_str());
  return 0;
}

int cmd_verify(const RunConfig& cfg) {
  VerifyOptions opt;
  opt.problem = cfg.problem;
  opt.seed = cfg.adapt.seed;
  opt.estimator = cfg.adapt.estimator;
  opt.solver = cfg.adapt.solver;
  opt.exec = cfg.adapt.exec;
  opt.max_elements = std::min<std::size_t>(cfg.adapt.max_elements, 20000);
  const auto results = run_verify_suite(opt);
  int failed = 0;
  for (const auto& r : results) {
    const char* tag = r.skipped ? "SKIP" : (r.passed ? "PASS" : "FAIL");
    if (!r.passed) ++failed;
    std::printf("%s %s: %s\n", tag, r.name.c_str(), r.detail.c_str());
  }
  std::printf("%zu checks, %d failed\n", results.size(), failed);
  return failed ? kExitFailedCheck : 0;
}

int cmd_study(const RunConfig& a, const RunConfig& b, const ProblemSpec& problem) {
  fs::create_directories(a.out);
  const fs::path dir(a.out);
  const RunResult ra = run_loop(problem, a.adapt);
  const RunResult rb = run_loop(problem, b.adapt);

  // sqrt(F_k - F_inf) is equivalent to the error (factors c_A/2, C_A/2).
  double f_inf = std::numeric_limits<double>::quiet_NaN();
  for (const auto* pr : {&ra, &rb}) {
    const RunConfig& c = pr == &ra ? a : b;
    if (c.adapt.mode == Mode::adaptive && pr->records.size() >= 3) {
      f_inf = richardson_energy_limit(pr->records);
      break;
    }
  }
  if (!std::isnan(f_inf)) {
    for (const auto* pr : {&ra, &rb})
      for (const auto& r : pr->records) f_inf = std::min(f_inf, r.energy);
  }

  std::ofstream t(dir / "study.csv");
  t << "series,k,elements_excess,eta,h1_error,energy_error\n";
  std::vector<Series> plot;
  std::ofstream slopes(dir / "slopes.txt");
  slopes << "energy_limit=" << f_inf << '\n';
  for (const auto* pr : {&ra, &rb}) {
    const RunConfig& c = pr == &ra ? a : b;
    const char* mode = mode_name(c.adapt.mode);
    const std::string name = std::string(mode) + " theta=" + std::to_string(c.adapt.theta);
    Series eta{"eta " + name, {}, {}}, err{"error " + name, {}, {}};
    const double n0 = static_cast<double>(pr->records.front().num_elements);
    std::vector<double> xs, energy_err;
    for (const auto& r : pr->records) {
      const double x = static_cast<double>(r.num_elements) - n0;
      const double ee = std::sqrt(std::max(r.energy - f_inf, 0.0));
      char buf[200];
      std::snprintf(buf, sizeof buf, "%s,%d,%.0f,%.17g,%.17g,%.17g\n", mode, r.k, x, r.eta, r.h1_error, ee);
      t << buf;
      eta.x.push_back(x);
      eta.y.push_back(r.eta);
      err.x.push_back(x);
      err.y.push_back(problem.has_exact() ? r.h1_error : ee);
      xs.push_back(x);
      energy_err.push_back(ee);
    }
    const int tail = rate_tail(pr->records);
    const RateFit fe = fit_rate(pr->records, [](const AdaptRecord& r) { return r.eta; }, tail);
    slopes << mode << ".eta_slope=" << fe.s_hat << '\n' << mode << ".eta_r2=" << fe.r2 << '\n'
           << mode << ".points=" << fe.points << '\n';
    std::printf("%-9s eta slope %.4f (r2 %.4f, %d points)", mode, fe.s_hat, fe.r2, fe.points);
    plot.push_back(eta);
    if (problem.has_exact()) {
      const RateFit fr = fit_rate(pr->records, [](const AdaptRecord& r) { return r.h1_error; }, tail);
      slopes << mode << ".error_slope=" << fr.s_hat << '\n';
      std::printf(", error slope %.4f", fr.s_hat);
      plot.push_back(err);
    } else if (!std::isnan(f_inf)) {
      std::vector<double> fx, fq;
      for (std::size_t i = 0; i < xs.size(); ++i)
        if (energy_err[i] > 0.0 && (c.adapt.mode == Mode::uniform || xs[i] <= xs.back() / 4.0)) {
          fx.push_back(xs[i]);
          fq.push_back(energy_err[i]);
        }
      if (fx.size() >= 2) {
        const RateFit fr = fit_rate(fx, fq, rate_tail(fx));
        slopes << mode << ".energy_error_slope=" << fr.s_hat << '\n';
        std::printf(", energy error slope %.4f", fr.s_hat);
      }
      plot.push_back(err);
    }
    std::printf("\n");
  }
  std::ofstream svg(dir / "study.svg");
  write_loglog_svg(svg, plot, problem.name, "#T_k - #T_0", "eta / error");
  std::printf("study written to %s\n", a.out.c_str());
  return 0;
}

int cmd_mesh_info(const std::string& mesh_file, const RunConfig& cfg, int uniform) {
  Mesh mesh = mesh_file.empty() ? initial_mesh(load_problem(cfg.problem)) : read_mesh_file(mesh_file);
  const bool compatible = probe_label_compatibility(mesh);
  if (uniform > 0) mesh = refine_uniform(mesh, uniform);
  std::size_t boundary = 0;
  for (const auto& v : mesh.vertices()) boundary += v.on_boundary;
  const auto conf = check_conformity(mesh);
  std::printf("vertices %zu (boundary %zu, interior %zu)\n", mesh.num_vertices(), boundary,
              mesh.num_vertices() - boundary);
  std::printf("elements %zu\nedges %zu\n", mesh.num_elements(), mesh.num_edges());
  std::printf("area %.17g\n", mesh.total_area());
  std::printf("shape_regularity %.6g\n", shape_regularity(mesh));
  std::printf("conforming %s\n", conf.ok ? "yes" : "no");
  for (const auto& d : conf.diagnostics) std::printf("  %s\n", d.c_str());
  std::printf("labels_compatible %s\n", compatible ? "yes" : "no");
  return conf.ok ? 0 : kExitFailedCheck;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive finite elements for quasi-linear elliptic problems"};
  app.require_subcommand(1);

  Flags run_flags, verify_flags, study_flags, info_flags;
  auto* run = app.add_subcommand("run", "adaptive or uniform run with artifacts");
  add_run_flags(run, run_flags);
  auto* verify = app.add_subcommand("verify", "property suite; exit 1 on any failure");
  add_run_flags(verify, verify_flags);
  auto* study = app.add_subcommand("study", "adaptive vs uniform comparison");
  add_run_flags(study, study_flags);
  std::string config_a, config_b;
  study->add_option("--config-a", config_a, "configuration of the first series (default adaptive)");
  study->add_option("--config-b", config_b, "configuration of the second series (default uniform)");
  auto* info = app.add_subcommand("mesh-info", "mesh statistics");
  add_run_flags(info, info_flags);
  std::string mesh_file;
  int uniform = 0;
  info->add_option("--mesh", mesh_file, "mesh file instead of the problem domain");
  info->add_option("--uniform", uniform, "uniform refinements before reporting");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      const RunConfig cfg = build_config(run_flags);
      const ProblemSpec problem = load_checked(cfg);
      return cmd_run(cfg, problem);
    }
    if (*verify) return cmd_verify(build_config(verify_flags));
    if (*study) {
      RunConfig base_a, base_b;
      base_a.adapt.mode = Mode::adaptive;
      base_b.adapt.mode = Mode::uniform;
      if (!config_a.empty()) read_config_file(config_a, base_a);
      if (!config_b.empty()) read_config_file(config_b, base_b);
      const RunConfig a = build_config(study_flags, base_a);
      const RunConfig b = build_config(study_flags, base_b);
      if (a.problem != b.problem) throw ConfigError("study configurations name different problems");
      const ProblemSpec problem = load_checked(a);
      return cmd_study(a, b, problem);
    }
    if (*info) return cmd_mesh_info(mesh_file, build_config(info_flags), uniform);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const ProblemError& e) {
    std::fprintf(stderr, "problem error: %s\n", e.what());
    return kExitConfig;
  } catch (const SolverError& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return kExitSolver;
  } catch (const RefineError& e) {
    std::fprintf(stderr, "refine failure: %s\n", e.what());
    return kExitRefine;
  } catch (const MeshError& e) {
    std::fprintf(stderr, "mesh error: %s\n", e.what());
    return kExitRefine;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
