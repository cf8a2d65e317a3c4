// Command-line runner for the lumped and standard ground-state solvers.
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "gpe/baseline.hpp"
#include "gpe/csv.hpp"
#include "gpe/experiment.hpp"
#include "gpe/solver.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitCheckFailed = 2;
constexpr int kExitSolverFailed = 3;

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool quick = false;
  bool strict_mesh = false;
  int level = -1;
  std::string method = "lumped";
  bool with_reference = false;
};

gpe::ExperimentConfig load_config(const Options &opt) {
  gpe::ExperimentConfig config = gpe::ExperimentConfig::preset(opt.quick ? "quick" : "harmonic");
  if (!opt.config_path.empty()) {
    config = gpe::ExperimentConfig::load(opt.config_path);
    if (opt.quick) std::cerr << "note: --config given, --quick ignored\n";
  }
  if (opt.seed) config.seed = *opt.seed;
  if (!opt.out.empty()) config.output_dir = opt.out;
  if (opt.strict_mesh) config.lumped.strict_mesh = config.standard.strict_mesh = true;
  config.validate();
  return config;
}

std::string solution_csv(const gpe::FeFunction &u) {
  std::ostringstream out;
  out << "node,x,y,value\n";
  for (gpe::Index v = 0; v < u.mesh()->num_vertices(); ++v) {
    const gpe::Point &p = u.mesh()->vertex(v);
    out << v << ',' << gpe::format_shortest(p[0]) << ',' << gpe::format_shortest(p[1]) << ','
        << gpe::format_shortest(u(v)) << '\n';
  }
  return out.str();
}

int run_solve(const Options &opt) {
  const gpe::ExperimentConfig config = load_config(opt);
  const gpe::MeshHierarchy hierarchy = gpe::build_hierarchy(config);
  const int index = opt.level < 0 ? static_cast<int>(hierarchy.levels.size()) - 1 : opt.level;
  if (index >= static_cast<int>(hierarchy.levels.size())) throw std::invalid_argument("--level out of range");
  const gpe::ProblemData data = gpe::build_problem(config, hierarchy.levels[static_cast<std::size_t>(index)]);
  const bool standard = opt.method == "standard";
  const gpe::GroundStateSolution sol = standard ? gpe::solve_ground_state_standard(data, config.standard)
                                                : gpe::solve_ground_state(data, config.lumped);
  const std::filesystem::path dir = config.output_dir;
  std::ostringstream trace;
  gpe::write_trace_csv(trace, sol.trace);
  gpe::write_file_atomic(dir / ("trace_" + sol.method + ".csv"), trace.str());
  gpe::write_file_atomic(dir / ("solution_" + sol.method + ".csv"), solution_csv(sol.u));
  const nlohmann::json summary = {{"config", nlohmann::json::parse(config.to_json())},
                                  {"method", sol.method},
                                  {"level", config.levels[static_cast<std::size_t>(index)]},
                                  {"energy", sol.energy_h},
                                  {"eigenvalue", sol.lambda_h},
                                  {"iterations", sol.iterations},
                                  {"converged", sol.converged},
                                  {"final_residual", sol.final_residual},
                                  {"mesh_hypotheses_ok", sol.mesh_hypotheses_ok},
                                  {"threads", sol.threads}};
  gpe::write_file_atomic(dir / ("summary_" + sol.method + ".json"), summary.dump(2) + "\n");
  std::cout << sol.method << " level " << config.levels[static_cast<std::size_t>(index)] << ": E = "
            << gpe::format_shortest(sol.energy_h) << ", lambda = " << gpe::format_shortest(sol.lambda_h) << ", "
            << sol.iterations << " iterations, residual " << gpe::format_shortest(sol.final_residual) << '\n';
  return sol.converged ? kExitOk : kExitSolverFailed;
}

int run_convergence(const Options &opt) {
  const gpe::ExperimentConfig config = load_config(opt);
  const gpe::ConvergenceResult result = gpe::run_convergence(config);
  bool ok = result.reference_converged;
  std::cout << "reference: E = " << gpe::format_shortest(result.reference_energy)
            << ", lambda = " << gpe::format_shortest(result.reference_eigenvalue) << ", "
            << result.reference_iterations << " iterations\n";
  auto print = [&](const char *name, const std::vector<gpe::ConvergenceRecord> &rows) {
    std::cout << name << "\n  level        h     L2 err  EOC     H1 err  EOC   iters\n";
    for (const gpe::ConvergenceRecord &r : rows) {
      ok = ok && !r.failed && r.converged;
      if (r.failed) {
        std::cout << "  " << r.level << " failed: " << r.error << '\n';
        continue;
      }
      std::printf("  %5d %8.3g %10.3e %4.2f %10.3e %4.2f %7d\n", r.level, r.h, r.errors.l2_error, r.eoc_l2,
                  r.errors.h1_semi_error, r.eoc_h1, r.iterations);
    }
  };
  print("lumped", result.lumped);
  if (config.run_standard) print("standard", result.standard);
  std::cout << "outputs written to " << config.output_dir << '\n';
  return ok ? kExitOk : kExitSolverFailed;
}

int run_verify(const Options &opt) {
  const gpe::ExperimentConfig config = load_config(opt);
  const std::vector<gpe::CheckRow> rows = gpe::run_verification(config);
  std::cout << gpe::format_report(rows);
  for (const gpe::CheckRow &r : rows)
    if (!r.pass) return kExitCheckFailed;
  return kExitOk;
}

int run_export(const Options &opt) {
  const gpe::ExperimentConfig config = load_config(opt);
  const gpe::MeshHierarchy hierarchy = gpe::build_hierarchy(config);
  auto write = [&](const gpe::SimplicialMesh &mesh, const std::string &name) {
    std::ostringstream out;
    gpe::write_mesh(out, mesh);
    gpe::write_file_atomic(config.output_dir / name, out.str());
  };
  for (std::size_t i = 0; i < hierarchy.levels.size(); ++i)
    write(*hierarchy.levels[i], "level" + std::to_string(config.levels[i]) + ".mesh");
  if (opt.with_reference) write(*hierarchy.reference, "reference.mesh");
  std::cout << "meshes written to " << config.output_dir << '\n';
  return kExitOk;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Mass-lumped finite element ground states of the Gross-Pitaevskii energy"};
  app.require_subcommand(1);
  app.fallthrough();
  Options opt;
  app.add_option("--config", opt.config_path, "JSON experiment configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", opt.seed, "Master seed (sampling and, unless set in the config, disorder)");
  app.add_option("--out", opt.out, "Output directory");
  app.add_flag("--quick", opt.quick, "Small unit-square profile (kappa = 10)");
  app.add_flag("--strict-mesh", opt.strict_mesh, "Fail on M-matrix or irreducibility violations");

  CLI::App *solve = app.add_subcommand("solve", "Solve on one level of the hierarchy");
  solve->add_option("--level", opt.level, "Level index (default: finest)");
  solve->add_option("--method", opt.method, "lumped or standard")->check(CLI::IsMember({"lumped", "standard"}));
  CLI::App *convergence = app.add_subcommand("convergence", "Error and EOC tables against a reference solution");
  CLI::App *verify = app.add_subcommand("verify", "Structural checks; writes verification.csv");
  CLI::App *export_mesh = app.add_subcommand("export-mesh", "Write the mesh hierarchy");
  export_mesh->add_flag("--reference", opt.with_reference, "Also write the reference mesh");

  CLI11_PARSE(app, argc, argv);
  try {
    if (solve->parsed()) return run_solve(opt);
    if (convergence->parsed()) return run_convergence(opt);
    if (verify->parsed()) return run_verify(opt);
    if (export_mesh->parsed()) return run_export(opt);
  } catch (const std::invalid_argument &ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const std::exception &ex) {
    std::cerr << "solver failure: " << ex.what() << '\n';
    return kExitSolverFailed;
  }
  return kExitUsage;
}
