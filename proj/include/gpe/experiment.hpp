#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gpe/baseline.hpp"
#include "gpe/flow.hpp"
#include "gpe/forms.hpp"
#include "gpe/mesh.hpp"

namespace gpe {

enum class PotentialKind { harmonic, disorder, zero, grid_file };

/// Piecewise constant potential on a uniform grid_n^d cell grid of the box.
struct DisorderSpec {
  int grid_n = 32;
  /// Coin-toss seed; the experiment seed is used when unset.
  std::optional<std::uint64_t> seed;
  double amplitude = 256.0;
};

struct VerificationSettings {
  int picone_trials = 1000;
  int minimality_samples = 500;
  int uniqueness_starts = 3;
  int eig_count = 2;
};

struct ExperimentConfig {
  std::string name = "custom";
  Box domain = Box::cube(2, 0.0, 1.0);
  /// Cells per axis of the unrefined Friedrichs-Keller mesh.
  int base_cells = 8;
  /// Number of red refinements of the base mesh for every level, ascending.
  std::vector<int> levels{0, 1, 2, 3};
  int reference_extra_refines = 2;
  PotentialKind potential = PotentialKind::harmonic;
  DisorderSpec disorder;
  std::filesystem::path grid_file;
  double kappa = 10.0;
  FlowConfig lumped;
  FlowConfig standard;
  /// Residual tolerance of the reference solve (default: standard.tol_residual).
  std::optional<double> reference_tol_residual;
  bool run_standard = true;
  /// Known exact energy / eigenvalue; replace the reference values in the error columns.
  std::optional<double> exact_energy;
  std::optional<double> exact_eigenvalue;
  std::uint64_t seed = 20240531;
  VerificationSettings verification;
  std::filesystem::path output_dir = "out";

  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
  std::uint64_t disorder_seed() const { return disorder.seed.value_or(seed); }

  /// Built-in profiles: quick, harmonic, disorder, linear1d.
  static ExperimentConfig preset(const std::string &name);
  /// JSON text; an optional "preset" key selects the starting profile.
  static ExperimentConfig from_json(const std::string &text);
  static ExperimentConfig load(const std::filesystem::path &path);
  std::string to_json() const;
};

/// Values of the piecewise constant grid potential, row-major with x fastest.
std::vector<double> grid_cell_values(const ExperimentConfig &config);

/// Element-nodal potential of the configured kind. Grid potentials require
/// every element to lie in one grid cell.
Eigen::VectorXd build_potential(const ExperimentConfig &config, const SimplicialMesh &mesh);
ProblemData build_problem(const ExperimentConfig &config, const MeshPtr &mesh);

/// Nested meshes for the configured levels followed by the reference mesh.
struct MeshHierarchy {
  std::vector<MeshPtr> levels;
  MeshPtr reference;
};
MeshHierarchy build_hierarchy(const ExperimentConfig &config);

struct ConvergenceRecord {
  int level = 0;
  double h = 0.0;
  ErrorReport errors;
  double eoc_l2 = 0.0, eoc_h1 = 0.0, eoc_energy = 0.0, eoc_eigenvalue = 0.0; ///< NaN on the first row
  double energy = 0.0;
  double eigenvalue = 0.0;
  int iterations = 0;
  double wall_time = 0.0;
  bool converged = false;
  bool failed = false;
  std::string error;
};

struct ConvergenceResult {
  std::vector<ConvergenceRecord> lumped;
  std::vector<ConvergenceRecord> standard;
  double reference_energy = 0.0;
  double reference_eigenvalue = 0.0;
  int reference_iterations = 0;
  bool reference_converged = false;
  double reference_wall_time = 0.0;
  std::vector<GroundStateSolution> lumped_solutions;
};

/// EOC from consecutive rows: log(e_prev / e) / log(h_prev / h).
double eoc(double e_prev, double e, double h_prev, double h);

/// Solves every level with both methods and the reference with the standard
/// method. Writes convergence_lumped.csv, convergence_standard.csv,
/// energies.csv, traces/ and manifest.json when `write_outputs` is set.
ConvergenceResult run_convergence(const ExperimentConfig &config, bool write_outputs = true);

struct CheckRow {
  std::string check;
  std::string param;
  double value;
  bool pass;
};

/// Runs the structural checks on the configured hierarchy and writes
/// verification.csv (`check,param,value,pass`).
std::vector<CheckRow> run_verification(const ExperimentConfig &config, bool write_outputs = true);
std::string format_report(const std::vector<CheckRow> &rows);

/// Smallest axis-aligned box of mesh nodes holding `fraction` of the lumped
/// mass of u (2D tensor-grid node sets only).
struct LocalizationBox {
  double area = 0.0;
  double mass = 0.0;
  std::array<double, 4> bounds{}; ///< xmin, xmax, ymin, ymax
};
LocalizationBox localization_box(const FeFunction &u, double fraction);

/// Identity residual |lambda - 2E - kappa/2 l(u^3, u)| / |lambda| of an
/// l-normalized state.
double energy_identity_defect(const GroundStateSolution &sol, const ProblemData &data);

} // namespace gpe
