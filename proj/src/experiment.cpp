#include "gpe/experiment.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "gpe/csv.hpp"
#include "gpe/solver.hpp"
#include "gpe/verify.hpp"

#ifndef GPE_VERSION
#define GPE_VERSION "unknown"
#endif

namespace gpe {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const char *to_string(PotentialKind k) {
  switch (k) {
  case PotentialKind::harmonic: return "harmonic";
  case PotentialKind::disorder: return "disorder";
  case PotentialKind::zero: return "zero";
  case PotentialKind::grid_file: return "grid";
  }
  return "?";
}

const char *to_string(StepPolicy p) {
  switch (p) {
  case StepPolicy::fixed: return "fixed";
  case StepPolicy::paper_bound: return "bound";
  case StepPolicy::adaptive: return "adaptive";
  }
  return "?";
}

const char *to_string(LinearSolverKind k) {
  switch (k) {
  case LinearSolverKind::automatic: return "automatic";
  case LinearSolverKind::direct: return "direct";
  case LinearSolverKind::cg: return "cg";
  }
  return "?";
}

template <class E> E parse_enum(const std::string &s, std::initializer_list<std::pair<const char *, E>> table,
                                const char *what) {
  for (const auto &[name, value] : table)
    if (s == name) return value;
  throw std::invalid_argument(std::string("unknown ") + what + " '" + s + "'");
}

json flow_to_json(const FlowConfig &c) {
  return {{"step_policy", to_string(c.step_policy)},
          {"tau_fixed", c.tau_fixed},
          {"tau_min", c.tau_min},
          {"tol_residual", c.tol_residual},
          {"max_iters", c.max_iters},
          {"linear_solver_tol", c.linear_solver_tol},
          {"record_trace", c.record_trace},
          {"pairing", c.pairing == Pairing::consistent ? "consistent" : "lumped"},
          {"greens_kappa_weight", c.greens_kappa_weight},
          {"linear_solver", to_string(c.linear_solver)},
          {"strict_mesh", c.strict_mesh}};
}

void flow_from_json(const json &j, FlowConfig &c) {
  for (const auto &[key, v] : j.items()) {
    if (key == "step_policy")
      c.step_policy = parse_enum<StepPolicy>(
          v.get<std::string>(),
          {{"fixed", StepPolicy::fixed}, {"bound", StepPolicy::paper_bound}, {"adaptive", StepPolicy::adaptive}},
          "step policy");
    else if (key == "tau_fixed") c.tau_fixed = v.get<double>();
    else if (key == "tau_min") c.tau_min = v.get<double>();
    else if (key == "tol_residual") c.tol_residual = v.get<double>();
    else if (key == "max_iters") c.max_iters = v.get<int>();
    else if (key == "linear_solver_tol") c.linear_solver_tol = v.get<double>();
    else if (key == "record_trace") c.record_trace = v.get<bool>();
    else if (key == "pairing")
      c.pairing = parse_enum<Pairing>(v.get<std::string>(),
                                      {{"consistent", Pairing::consistent}, {"lumped", Pairing::lumped}}, "pairing");
    else if (key == "greens_kappa_weight") c.greens_kappa_weight = v.get<bool>();
    else if (key == "linear_solver")
      c.linear_solver = parse_enum<LinearSolverKind>(v.get<std::string>(),
                                                     {{"automatic", LinearSolverKind::automatic},
                                                      {"direct", LinearSolverKind::direct},
                                                      {"cg", LinearSolverKind::cg}},
                                                     "linear solver");
    else if (key == "strict_mesh") c.strict_mesh = v.get<bool>();
    else throw std::invalid_argument("unknown solver key '" + key + "'");
  }
}

int cells_per_axis(const ExperimentConfig &c, int level_index) {
  return c.base_cells << c.levels[static_cast<std::size_t>(level_index)];
}

/// Cell index of x in the grid, or -1 outside the box.
Index cell_of(const Box &box, int n, const Point &x) {
  Index idx = 0, stride = 1;
  for (int i = 0; i < box.dim(); ++i) {
    const double lo = box.lower[static_cast<std::size_t>(i)], hi = box.upper[static_cast<std::size_t>(i)];
    const double t = (x[static_cast<std::size_t>(i)] - lo) / (hi - lo) * n;
    if (t < 0.0 || t > n) return -1;
    const Index c = std::min<Index>(n - 1, static_cast<Index>(std::floor(t)));
    idx += c * stride;
    stride *= n;
  }
  return idx;
}

int grid_resolution(const ExperimentConfig &c) {
  if (c.potential == PotentialKind::disorder) return c.disorder.grid_n;
  std::ifstream in(c.grid_file);
  int n = 0;
  if (!(in >> n) || n <= 0) throw std::invalid_argument("grid potential file '" + c.grid_file.string() + "' is unreadable");
  return n;
}

std::string csv_number(double v) { return std::isnan(v) ? "nan" : format_shortest(v); }

} // namespace

void ExperimentConfig::validate() const {
  domain.validate();
  if (domain.dim() > 2) throw std::invalid_argument("experiments support d = 1 and d = 2");
  if (base_cells < 1) throw std::invalid_argument("base_cells must be positive");
  if (levels.empty()) throw std::invalid_argument("levels must not be empty");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] < 0) throw std::invalid_argument("levels must be nonnegative");
    if (i > 0 && levels[i] <= levels[i - 1]) throw std::invalid_argument("levels must be strictly ascending");
  }
  if (reference_extra_refines < 0) throw std::invalid_argument("reference_extra_refines must be nonnegative");
  if (!(kappa >= 0.0)) throw std::invalid_argument("kappa must be nonnegative");
  lumped.validate();
  standard.validate();
  if (reference_tol_residual && !(*reference_tol_residual > 0.0))
    throw std::invalid_argument("reference_tol_residual must be positive");
  if (potential == PotentialKind::disorder) {
    if (disorder.grid_n < 1) throw std::invalid_argument("disorder grid_n must be positive");
    if (!(disorder.amplitude >= 0.0)) throw std::invalid_argument("disorder amplitude must be nonnegative");
  }
  if (potential == PotentialKind::disorder || potential == PotentialKind::grid_file) {
    const int n = grid_resolution(*this);
    for (std::size_t i = 0; i < levels.size(); ++i)
      if (cells_per_axis(*this, static_cast<int>(i)) % n != 0)
        throw std::invalid_argument("potential grid of " + std::to_string(n) + " cells does not divide the " +
                                    std::to_string(cells_per_axis(*this, static_cast<int>(i))) +
                                    "-cell mesh of level " + std::to_string(levels[i]));
  }
}

ExperimentConfig ExperimentConfig::preset(const std::string &name) {
  ExperimentConfig c;
  c.name = name;
  if (name == "quick") {
    c.domain = Box::cube(2, 0.0, 1.0);
    c.base_cells = 8;
    c.levels = {0, 1, 2, 3};
    c.kappa = 10.0;
    c.reference_tol_residual = 1e-11;
  } else if (name == "harmonic") {
    c.domain = Box::cube(2, -8.0, 8.0);
    c.base_cells = 16;
    c.levels = {0, 1, 2, 3, 4};
    c.kappa = 1000.0;
    c.reference_tol_residual = 1e-11;
  } else if (name == "disorder") {
    c.domain = Box::cube(2, -1.0, 1.0);
    c.potential = PotentialKind::disorder;
    c.base_cells = 32;
    c.levels = {0, 1, 2, 3};
    c.kappa = 1.0;
    c.reference_tol_residual = 1e-11;
  } else if (name == "linear1d") {
    c.domain = Box::cube(1, 0.0, 1.0);
    c.potential = PotentialKind::zero;
    c.base_cells = 8;
    c.levels = {0, 1, 2, 3, 4};
    c.kappa = 0.0;
    c.exact_energy = 0.5 * M_PI * M_PI;
    c.exact_eigenvalue = M_PI * M_PI;
  } else {
    throw std::invalid_argument("unknown preset '" + name + "'");
  }
  return c;
}

ExperimentConfig ExperimentConfig::from_json(const std::string &text) {
  const json j = json::parse(text);
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  ExperimentConfig c = j.contains("preset") ? preset(j.at("preset").get<std::string>()) : ExperimentConfig{};
  for (const auto &[key, v] : j.items()) {
    if (key == "preset") continue;
    if (key == "name") c.name = v.get<std::string>();
    else if (key == "domain")
      c.domain = Box{v.at("lower").get<std::vector<double>>(), v.at("upper").get<std::vector<double>>()};
    else if (key == "base_cells") c.base_cells = v.get<int>();
    else if (key == "levels") c.levels = v.get<std::vector<int>>();
    else if (key == "reference_extra_refines") c.reference_extra_refines = v.get<int>();
    else if (key == "potential") {
      const std::string type = v.at("type").get<std::string>();
      c.potential = parse_enum<PotentialKind>(type,
                                              {{"harmonic", PotentialKind::harmonic},
                                               {"disorder", PotentialKind::disorder},
                                               {"zero", PotentialKind::zero},
                                               {"grid", PotentialKind::grid_file}},
                                              "potential");
      if (v.contains("grid_n")) c.disorder.grid_n = v.at("grid_n").get<int>();
      if (v.contains("seed")) c.disorder.seed = v.at("seed").get<std::uint64_t>();
      if (v.contains("amplitude")) c.disorder.amplitude = v.at("amplitude").get<double>();
      if (v.contains("file")) c.grid_file = v.at("file").get<std::string>();
    } else if (key == "kappa") c.kappa = v.get<double>();
    else if (key == "solver") {
      flow_from_json(v, c.lumped);
      flow_from_json(v, c.standard);
    } else if (key == "lumped_solver") flow_from_json(v, c.lumped);
    else if (key == "standard_solver") flow_from_json(v, c.standard);
    else if (key == "reference_tol_residual") {
      if (v.is_null()) c.reference_tol_residual.reset();
      else c.reference_tol_residual = v.get<double>();
    } else if (key == "run_standard") c.run_standard = v.get<bool>();
    else if (key == "exact") {
      if (v.contains("energy")) c.exact_energy = v.at("energy").get<double>();
      if (v.contains("eigenvalue")) c.exact_eigenvalue = v.at("eigenvalue").get<double>();
    } else if (key == "seed") c.seed = v.get<std::uint64_t>();
    else if (key == "verification") {
      for (const auto &[k2, v2] : v.items()) {
        if (k2 == "picone_trials") c.verification.picone_trials = v2.get<int>();
        else if (k2 == "minimality_samples") c.verification.minimality_samples = v2.get<int>();
        else if (k2 == "uniqueness_starts") c.verification.uniqueness_starts = v2.get<int>();
        else if (k2 == "eig_count") c.verification.eig_count = v2.get<int>();
        else throw std::invalid_argument("unknown verification key '" + k2 + "'");
      }
    } else if (key == "output_dir") c.output_dir = v.get<std::string>();
    else throw std::invalid_argument("unknown config key '" + key + "'");
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string ExperimentConfig::to_json() const {
  json potential_json = {{"type", to_string(potential)}};
  if (potential == PotentialKind::disorder) {
    potential_json["grid_n"] = disorder.grid_n;
    potential_json["seed"] = disorder_seed();
    potential_json["amplitude"] = disorder.amplitude;
  }
  if (potential == PotentialKind::grid_file) potential_json["file"] = grid_file.string();
  json j = {{"name", name},
            {"domain", {{"lower", domain.lower}, {"upper", domain.upper}}},
            {"base_cells", base_cells},
            {"levels", levels},
            {"reference_extra_refines", reference_extra_refines},
            {"potential", potential_json},
            {"kappa", kappa},
            {"lumped_solver", flow_to_json(lumped)},
            {"standard_solver", flow_to_json(standard)},
            {"run_standard", run_standard},
            {"seed", seed},
            {"verification",
             {{"picone_trials", verification.picone_trials},
              {"minimality_samples", verification.minimality_samples},
              {"uniqueness_starts", verification.uniqueness_starts},
              {"eig_count", verification.eig_count}}},
            {"output_dir", output_dir.string()}};
  j["reference_tol_residual"] = reference_tol_residual ? json(*reference_tol_residual) : json(nullptr);
  if (exact_energy || exact_eigenvalue) {
    j["exact"] = json::object();
    if (exact_energy) j["exact"]["energy"] = *exact_energy;
    if (exact_eigenvalue) j["exact"]["eigenvalue"] = *exact_eigenvalue;
  }
  return j.dump(2);
}

std::vector<double> grid_cell_values(const ExperimentConfig &config) {
  const int d = config.domain.dim();
  if (config.potential == PotentialKind::disorder) {
    const int n = config.disorder.grid_n;
    const std::size_t cells = static_cast<std::size_t>(d == 1 ? n : n * n);
    Rng rng(config.disorder_seed());
    std::vector<double> values(cells);
    for (double &v : values) v = rng.uniform() < 0.5 ? config.disorder.amplitude : 0.0;
    return values;
  }
  if (config.potential == PotentialKind::grid_file) {
    std::ifstream in(config.grid_file);
    int n = 0;
    if (!(in >> n) || n <= 0) throw std::invalid_argument("grid potential file is unreadable");
    const std::size_t cells = static_cast<std::size_t>(d == 1 ? n : n * n);
    std::vector<double> values(cells);
    for (double &v : values)
      if (!(in >> v) || v < 0.0) throw std::invalid_argument("grid potential file: missing or negative value");
    return values;
  }
  throw std::invalid_argument("grid_cell_values: potential is not grid based");
}

Eigen::VectorXd build_potential(const ExperimentConfig &config, const SimplicialMesh &mesh) {
  const Point c = config.domain.center();
  switch (config.potential) {
  case PotentialKind::harmonic:
    return element_nodal_map(mesh, [&](Index, int, const Point &x) {
      double s = 0.0;
      for (std::size_t i = 0; i < 3; ++i) s += (x[i] - c[i]) * (x[i] - c[i]);
      return 0.5 * s;
    });
  case PotentialKind::zero: return Eigen::VectorXd::Zero(mesh.element_nodal_size());
  case PotentialKind::disorder:
  case PotentialKind::grid_file: break;
  }
  const std::vector<double> values = grid_cell_values(config);
  const int n = grid_resolution(config);
  const int d = mesh.dim();
  const int nk = mesh.nodes_per_element();
  Eigen::VectorXd out(mesh.element_nodal_size());
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    Point centroid{0.0, 0.0, 0.0};
    for (Index v : mesh.element(e))
      for (std::size_t i = 0; i < 3; ++i) centroid[i] += mesh.vertex(v)[i] / nk;
    const Index cell = cell_of(config.domain, n, centroid);
    if (cell < 0) throw std::invalid_argument("build_potential: element outside the potential grid");
    // Every vertex must lie in the closure of the centroid's cell.
    Index rest = cell;
    for (int i = 0; i < d; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      const double width = (config.domain.upper[ii] - config.domain.lower[ii]) / n;
      const double lo = config.domain.lower[ii] + static_cast<double>(rest % n) * width;
      rest /= n;
      for (Index v : mesh.element(e)) {
        const double x = mesh.vertex(v)[ii];
        if (x < lo - 1e-9 * width || x > lo + width + 1e-9 * width)
          throw std::invalid_argument("build_potential: mesh is not aligned with the " + std::to_string(n) +
                                      "-cell potential grid");
      }
    }
    for (int j = 0; j < nk; ++j) out[e * nk + j] = values[static_cast<std::size_t>(cell)];
  }
  return out;
}

ProblemData build_problem(const ExperimentConfig &config, const MeshPtr &mesh) {
  ProblemData data;
  data.mesh = mesh;
  data.kappa = config.kappa;
  data.potential_values = build_potential(config, *mesh);
  const Point c = config.domain.center();
  switch (config.potential) {
  case PotentialKind::harmonic:
    data.potential = [c](const Point &x, Index) {
      double s = 0.0;
      for (std::size_t i = 0; i < 3; ++i) s += (x[i] - c[i]) * (x[i] - c[i]);
      return 0.5 * s;
    };
    break;
  case PotentialKind::zero: data.potential = [](const Point &, Index) { return 0.0; }; break;
  default: {
    // Quadrature points lie inside elements, so the cell of the point is the
    // cell of its element.
    auto values = std::make_shared<std::vector<double>>(grid_cell_values(config));
    data.potential = [values, box = config.domain, n = grid_resolution(config)](const Point &x, Index) {
      const Index cell = cell_of(box, n, x);
      return cell < 0 ? 0.0 : (*values)[static_cast<std::size_t>(cell)];
    };
  }
  }
  data.validate();
  return data;
}

MeshHierarchy build_hierarchy(const ExperimentConfig &config) {
  config.validate();
  MeshHierarchy h;
  MeshPtr mesh = friedrichs_keller(config.domain, config.base_cells);
  int depth = 0;
  for (int level : config.levels) {
    mesh = refine_times(mesh, level - depth);
    depth = level;
    h.levels.push_back(mesh);
  }
  h.reference = refine_times(mesh, config.reference_extra_refines);
  return h;
}

double eoc(double e_prev, double e, double h_prev, double h) {
  if (!(e_prev > 0.0) || !(e > 0.0) || !(h_prev > h) || !(h > 0.0)) return kNaN;
  return std::log(e_prev / e) / std::log(h_prev / h);
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void fill_eocs(std::vector<ConvergenceRecord> &rows) {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ConvergenceRecord &r = rows[i];
    r.eoc_l2 = r.eoc_h1 = r.eoc_energy = r.eoc_eigenvalue = kNaN;
    if (i == 0 || r.failed || rows[i - 1].failed) continue;
    const ConvergenceRecord &p = rows[i - 1];
    r.eoc_l2 = eoc(p.errors.l2_error, r.errors.l2_error, p.h, r.h);
    r.eoc_h1 = eoc(p.errors.h1_semi_error, r.errors.h1_semi_error, p.h, r.h);
    r.eoc_energy = eoc(p.errors.energy_error, r.errors.energy_error, p.h, r.h);
    r.eoc_eigenvalue = eoc(p.errors.eigenvalue_error, r.errors.eigenvalue_error, p.h, r.h);
  }
}

std::string convergence_csv(const std::vector<ConvergenceRecord> &rows, const ExperimentConfig &config) {
  std::ostringstream out;
  out << "level,cells,h,l2_error,h1_error,energy_error,eigenvalue_error,eoc_l2,eoc_h1,eoc_energy,eoc_eigenvalue,"
         "energy,eigenvalue,iterations,wall_time,converged,status\n";
  for (const ConvergenceRecord &r : rows) {
    out << r.level << ',' << (config.base_cells << r.level) << ',' << csv_number(r.h) << ','
        << csv_number(r.errors.l2_error) << ',' << csv_number(r.errors.h1_semi_error) << ','
        << csv_number(r.errors.energy_error) << ',' << csv_number(r.errors.eigenvalue_error) << ','
        << csv_number(r.eoc_l2) << ',' << csv_number(r.eoc_h1) << ',' << csv_number(r.eoc_energy) << ','
        << csv_number(r.eoc_eigenvalue) << ',' << csv_number(r.energy) << ',' << csv_number(r.eigenvalue) << ','
        << r.iterations << ',' << csv_number(r.wall_time) << ',' << (r.converged ? 1 : 0) << ','
        << (r.failed ? "failed" : "ok") << '\n';
  }
  return out.str();
}

std::string trace_text(const GroundStateSolution &sol) {
  std::ostringstream out;
  write_trace_csv(out, sol.trace);
  return out.str();
}

} // namespace

ConvergenceResult run_convergence(const ExperimentConfig &config, bool write_outputs) {
  const MeshHierarchy hierarchy = build_hierarchy(config);
  const std::filesystem::path dir = config.output_dir;
  ConvergenceResult result;

  FlowConfig ref_config = config.standard;
  if (config.reference_tol_residual) ref_config.tol_residual = *config.reference_tol_residual;
  const auto t_ref = std::chrono::steady_clock::now();
  const GroundStateSolution reference =
      solve_ground_state_standard(build_problem(config, hierarchy.reference), ref_config);
  result.reference_wall_time = seconds_since(t_ref);
  result.reference_energy = reference.energy_h;
  result.reference_eigenvalue = reference.lambda_h;
  result.reference_iterations = reference.iterations;
  result.reference_converged = reference.converged;
  if (write_outputs) write_file_atomic(dir / "traces" / "standard_reference.csv", trace_text(reference));

  const ReferenceComparator comparator(reference);
  auto run_level = [&](std::size_t i, bool standard) {
    ConvergenceRecord r;
    r.level = config.levels[i];
    const MeshPtr &mesh = hierarchy.levels[i];
    r.h = mesh->h();
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const ProblemData data = build_problem(config, mesh);
      GroundStateSolution sol = standard ? solve_ground_state_standard(data, config.standard)
                                         : solve_ground_state(data, config.lumped);
      r.wall_time = seconds_since(t0);
      r.errors = comparator.compare(sol);
      if (config.exact_energy) r.errors.energy_error = std::abs(sol.energy_h - *config.exact_energy);
      if (config.exact_eigenvalue) r.errors.eigenvalue_error = std::abs(sol.lambda_h - *config.exact_eigenvalue);
      r.energy = sol.energy_h;
      r.eigenvalue = sol.lambda_h;
      r.iterations = sol.iterations;
      r.converged = sol.converged;
      if (write_outputs)
        write_file_atomic(dir / "traces" /
                              ((standard ? "standard_level" : "lumped_level") + std::to_string(r.level) + ".csv"),
                          trace_text(sol));
      if (!standard) result.lumped_solutions.push_back(std::move(sol));
    } catch (const std::exception &ex) {
      r.wall_time = seconds_since(t0);
      r.failed = true;
      r.error = ex.what();
      r.energy = r.eigenvalue = kNaN;
      r.errors.l2_error = r.errors.h1_semi_error = r.errors.energy_error = r.errors.eigenvalue_error = kNaN;
    }
    return r;
  };
  for (std::size_t i = 0; i < hierarchy.levels.size(); ++i) {
    result.lumped.push_back(run_level(i, false));
    if (config.run_standard) result.standard.push_back(run_level(i, true));
  }
  fill_eocs(result.lumped);
  fill_eocs(result.standard);

  if (write_outputs) {
    write_file_atomic(dir / "convergence_lumped.csv", convergence_csv(result.lumped, config));
    if (config.run_standard) write_file_atomic(dir / "convergence_standard.csv", convergence_csv(result.standard, config));
    std::ostringstream e;
    e << "level,E_lumped,E_standard,lambda_lumped,lambda_standard\n";
    for (std::size_t i = 0; i < result.lumped.size(); ++i) {
      const bool s = config.run_standard;
      e << result.lumped[i].level << ',' << csv_number(result.lumped[i].energy) << ','
        << csv_number(s ? result.standard[i].energy : kNaN) << ',' << csv_number(result.lumped[i].eigenvalue) << ','
        << csv_number(s ? result.standard[i].eigenvalue : kNaN) << '\n';
    }
    e << "reference," << csv_number(kNaN) << ',' << csv_number(reference.energy_h) << ',' << csv_number(kNaN) << ','
      << csv_number(reference.lambda_h) << '\n';
    write_file_atomic(dir / "energies.csv", e.str());

    json manifest = {{"config", json::parse(config.to_json())},
                     {"seed", config.seed},
                     {"version", GPE_VERSION},
                     {"eigen_version", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                           "." + std::to_string(EIGEN_MINOR_VERSION)},
                     {"threads", reference.threads},
                     {"reference",
                      {{"cells", config.base_cells << (config.levels.back() + config.reference_extra_refines)},
                       {"energy", reference.energy_h},
                       {"eigenvalue", reference.lambda_h},
                       {"iterations", reference.iterations},
                       {"converged", reference.converged},
                       {"final_residual", reference.final_residual},
                       {"wall_time", result.reference_wall_time}}}};
    if (config.potential == PotentialKind::disorder) manifest["disorder_seed"] = config.disorder_seed();
    json failures = json::array();
    for (const auto *rows : {&result.lumped, &result.standard})
      for (const ConvergenceRecord &r : *rows)
        if (r.failed) failures.push_back({{"level", r.level}, {"error", r.error}});
    manifest["failures"] = failures;
    write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  }
  return result;
}

double energy_identity_defect(const GroundStateSolution &sol, const ProblemData &data) {
  FeFunction u = sol.u;
  u.coeffs() /= lumped_norm(u);
  FeFunction cube = u;
  cube.coeffs() = u.coeffs().array().cube().matrix();
  const double lambda = discrete_eigenvalue(u, data);
  const double rhs = 2.0 * discrete_energy(u, data) + 0.5 * data.kappa * lumped_inner(cube, u);
  return std::abs(lambda - rhs) / std::abs(lambda);
}

LocalizationBox localization_box(const FeFunction &u, double fraction) {
  const SimplicialMesh &mesh = *u.mesh();
  if (mesh.dim() != 2) throw std::invalid_argument("localization_box: 2D meshes only");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("localization_box: fraction must lie in (0, 1]");
  const Eigen::VectorXd m = assemble_lumped_mass(mesh, NodeScope::all).diagonal;

  auto axis = [&](std::size_t k) {
    std::vector<double> c;
    for (const Point &p : mesh.vertices()) c.push_back(p[k]);
    std::sort(c.begin(), c.end());
    const double tol = 1e-9 * (c.back() - c.front());
    std::vector<double> unique;
    for (double x : c)
      if (unique.empty() || x - unique.back() > tol) unique.push_back(x);
    return unique;
  };
  const std::vector<double> xs = axis(0), ys = axis(1);
  const Index nx = static_cast<Index>(xs.size()), ny = static_cast<Index>(ys.size());
  if (nx * ny != mesh.num_vertices()) throw std::invalid_argument("localization_box: nodes do not form a tensor grid");
  auto locate = [](const std::vector<double> &axis_values, double x) {
    const auto it = std::lower_bound(axis_values.begin(), axis_values.end(),
                                     x - 1e-9 * (axis_values.back() - axis_values.front()));
    return static_cast<Index>(it - axis_values.begin());
  };
  Eigen::MatrixXd grid = Eigen::MatrixXd::Zero(nx, ny);
  for (Index v = 0; v < mesh.num_vertices(); ++v)
    grid(locate(xs, mesh.vertex(v)[0]), locate(ys, mesh.vertex(v)[1])) += m[v] * u(v) * u(v);
  const double total = grid.sum();
  if (!(total > 0.0)) throw std::invalid_argument("localization_box: zero function");
  const double target = fraction * total * (1.0 - 1e-14);

  LocalizationBox best;
  best.area = std::numeric_limits<double>::infinity();
  Eigen::VectorXd column(ny);
  for (Index i0 = 0; i0 < nx; ++i0) {
    column.setZero();
    for (Index i1 = i0; i1 < nx; ++i1) {
      column += grid.row(i1).transpose();
      const double width = xs[static_cast<std::size_t>(i1)] - xs[static_cast<std::size_t>(i0)];
      if (column.sum() < target) continue;
      double window = 0.0;
      Index j0 = 0;
      for (Index j1 = 0; j1 < ny; ++j1) {
        window += column[j1];
        while (j0 < j1 && window - column[j0] >= target) window -= column[j0++];
        if (window >= target) {
          const double area = width * (ys[static_cast<std::size_t>(j1)] - ys[static_cast<std::size_t>(j0)]);
          if (area < best.area) {
            best.area = area;
            best.mass = window / total;
            best.bounds = {xs[static_cast<std::size_t>(i0)], xs[static_cast<std::size_t>(i1)],
                           ys[static_cast<std::size_t>(j0)], ys[static_cast<std::size_t>(j1)]};
          }
        }
      }
    }
  }
  return best;
}

namespace {

void add(std::vector<CheckRow> &rows, std::string check, std::string param, double value, bool pass) {
  rows.push_back({std::move(check), std::move(param), value, pass});
}

double smooth_bump(const Box &box, const Point &x) {
  double s = 1.0;
  for (int i = 0; i < box.dim(); ++i) {
    const auto ii = static_cast<std::size_t>(i);
    s *= std::sin(M_PI * (x[ii] - box.lower[ii]) / (box.upper[ii] - box.lower[ii]));
  }
  return s;
}

} // namespace

std::vector<CheckRow> run_verification(const ExperimentConfig &config, bool write_outputs) {
  const MeshHierarchy hierarchy = build_hierarchy(config);
  std::vector<CheckRow> rows;
  const MeshPtr &mesh = hierarchy.levels.front();
  const std::string lvl = "level=" + std::to_string(config.levels.front());

  for (std::size_t i = 0; i < hierarchy.levels.size(); ++i) {
    const std::string p = "level=" + std::to_string(config.levels[i]);
    const SparseSpdMatrix s = assemble_stiffness(*hierarchy.levels[i]);
    const MMatrixReport m = is_m_matrix(s.matrix());
    add(rows, "mesh_m_matrix", p, m.holds ? 1.0 : 0.0, m.holds);
    const bool irreducible = is_irreducible(s.matrix());
    add(rows, "mesh_irreducible", p, irreducible ? 1.0 : 0.0, irreducible);
    if (s.size() > 100000) continue;
    Rng rng(Rng::split(config.seed, 1000 + static_cast<std::uint64_t>(i)));
    double worst = -std::numeric_limits<double>::infinity();
    bool holds = true;
    for (int t = 0; t < config.verification.picone_trials; ++t) {
      Eigen::VectorXd u(s.size()), v(s.size());
      for (Index j = 0; j < s.size(); ++j) u[j] = rng.uniform();
      for (Index j = 0; j < s.size(); ++j) v[j] = rng.uniform(1e-3, 1.0);
      const PiconeResult r = picone_check(s, u, v);
      holds = holds && r.holds;
      worst = std::max(worst, (r.lhs - r.rhs) / std::abs(r.rhs));
    }
    add(rows, "picone", p, worst, holds);
  }

  const ProblemData data = build_problem(config, mesh);
  const GroundStateSolution ground = solve_ground_state(data, config.lumped);
  add(rows, "ground_state_converged", lvl, ground.final_residual, ground.converged);
  add(rows, "ground_state_positive", lvl, ground.u.interior_values().minCoeff(),
      ground.u.interior_values().minCoeff() > 0.0);
  double trace_min = std::numeric_limits<double>::infinity(), rise = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < ground.trace.size(); ++k) {
    trace_min = std::min(trace_min, ground.trace[k].min_coeff);
    if (k > 0) {
      const double e0 = ground.trace[k - 1].energy;
      rise = std::max(rise, (ground.trace[k].energy - e0) / std::max(1.0, std::abs(e0)));
    }
  }
  add(rows, "trace_nonnegative", lvl, trace_min, trace_min >= 0.0);
  add(rows, "energy_descent", lvl, rise, rise <= 1e-12);
  const double identity = energy_identity_defect(ground, data);
  add(rows, "energy_identity", lvl, identity, identity <= 1e-12);

  const FeFunction unit_start = initial_guess(mesh);
  const StepSizeBound bound = step_bound(data, discrete_energy(unit_start, data));
  add(rows, "step_bound_gamma", lvl, bound.gamma, bound.gamma > 0.0);
  add(rows, "step_bound_C1", lvl, bound.C1, bound.C1 > 0.0);
  add(rows, "step_bound_C2", lvl, bound.C2, bound.C2 > 0.0);
  add(rows, "step_bound", lvl, bound.bound, bound.bound > 0.0);

  const int count = std::max(2, config.verification.eig_count);
  const std::vector<EigenPair> eigs = linearized_eigs(ground.u, data, count);
  const double mu_dev = std::abs(eigs[0].mu - ground.lambda_h) / ground.lambda_h;
  add(rows, "linearized_mu1", lvl, mu_dev, mu_dev <= 1e-8);
  add(rows, "linearized_gap", lvl, eigs[1].mu - eigs[0].mu, eigs[1].mu > eigs[0].mu);
  const double first_min = eigs[0].v.interior_values().minCoeff();
  add(rows, "linearized_first_positive", lvl, first_min, first_min > 0.0);

  const MinimalityResult minimal =
      convex_minimality_check(ground, data, config.verification.minimality_samples, Rng::split(config.seed, 2));
  add(rows, "convex_minimality", "samples=" + std::to_string(minimal.samples), minimal.min_gap, minimal.holds);
  FeFunction perturbed = ground.u;
  {
    Rng rng(Rng::split(config.seed, 3));
    for (Index j = 0; j < perturbed.coeffs().size(); ++j) perturbed.coeffs()[j] *= 1.0 + 0.5 * rng.uniform(-1.0, 1.0);
  }
  const MinimalityResult control =
      convex_minimality_check(perturbed, data, config.verification.minimality_samples, Rng::split(config.seed, 4));
  add(rows, "convex_negative_control", "samples=" + std::to_string(control.samples), control.min_gap, !control.holds);

  std::vector<NonlinearEigenpair> candidates{{ground.lambda_h, ground.u}};
  FeFunction negated = ground.u;
  negated.coeffs() *= -1.0;
  candidates.push_back({ground.lambda_h, negated});
  double spread = 0.0;
  for (int k = 0; k < config.verification.uniqueness_starts; ++k) {
    Rng rng(Rng::split(config.seed, 100 + static_cast<std::uint64_t>(k)));
    Eigen::VectorXd start(mesh->num_interior());
    for (Index j = 0; j < start.size(); ++j) start[j] = rng.uniform();
    const GroundStateSolution other =
        solve_ground_state(data, config.lumped, FeFunction::from_interior(mesh, start));
    FeFunction diff = other.u;
    diff.coeffs() -= ground.u.coeffs();
    spread = std::max(spread, lumped_norm(diff));
    candidates.push_back({other.lambda_h, other.u});
  }
  add(rows, "uniqueness", "starts=" + std::to_string(config.verification.uniqueness_starts), spread, spread <= 1e-8);
  const bool nonneg = nonneg_eigenstate_check(candidates, ground);
  add(rows, "nonneg_eigenstate", "candidates=" + std::to_string(candidates.size()), nonneg ? 1.0 : 0.0, nonneg);

  if (hierarchy.levels.size() >= 2) {
    const LumpingErrorScan scan = lumping_error_scan(hierarchy.levels, data.potential, [&](const Point &x) {
      return smooth_bump(config.domain, x);
    });
    auto slope_ok = [](double slope, const std::vector<LumpingErrorRow> &r, double LumpingErrorRow::*field) {
      if (std::isnan(slope)) {
        for (const LumpingErrorRow &row : r)
          if (row.*field > 1e-14) return false;
        return true;
      }
      return slope >= 1.8 && slope <= 2.3;
    };
    add(rows, "lumping_slope_potential", "levels=" + std::to_string(scan.rows.size()), scan.slope_potential,
        slope_ok(scan.slope_potential, scan.rows, &LumpingErrorRow::err_potential));
    add(rows, "lumping_slope_cubic", "levels=" + std::to_string(scan.rows.size()), scan.slope_cubic,
        slope_ok(scan.slope_cubic, scan.rows, &LumpingErrorRow::err_cubic));

    const std::vector<LinfRow> linf = linf_bound_scan(hierarchy.levels, data.potential, config.kappa, config.lumped);
    double worst_change = 0.0;
    for (std::size_t k = 1; k < linf.size(); ++k)
      worst_change = std::max(worst_change, std::abs(linf[k].linf / linf[k - 1].linf - 1.0));
    for (std::size_t k = 0; k < linf.size(); ++k)
      add(rows, "linf_bound", "level=" + std::to_string(config.levels[k]), linf[k].linf, true);
    add(rows, "linf_bound_variation", "levels=" + std::to_string(linf.size()), worst_change, worst_change <= 0.2);
  }

  if (write_outputs) write_file_atomic(config.output_dir / "verification.csv", format_report(rows));
  return rows;
}

std::string format_report(const std::vector<CheckRow> &rows) {
  std::ostringstream out;
  out << "check,param,value,pass\n";
  for (const CheckRow &r : rows)
    out << r.check << ',' << r.param << ',' << csv_number(r.value) << ',' << (r.pass ? "true" : "false") << '\n';
  return out.str();
}

} // namespace gpe
