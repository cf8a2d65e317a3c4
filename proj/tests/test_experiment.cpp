#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "gpe/experiment.hpp"
#include "gpe/solver.hpp"

using namespace gpe;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string &name) {
  const fs::path p = fs::temp_directory_path() / ("gpe_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const fs::path &p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

ExperimentConfig tiny_config() {
  ExperimentConfig c = ExperimentConfig::preset("quick");
  c.levels = {0, 1, 2};
  c.verification.picone_trials = 50;
  c.verification.minimality_samples = 60;
  c.verification.uniqueness_starts = 2;
  return c;
}

Point centroid(const SimplicialMesh &m, Index e) {
  Point c{0, 0, 0};
  for (Index v : m.element(e))
    for (int i = 0; i < 3; ++i) c[static_cast<std::size_t>(i)] += m.vertex(v)[static_cast<std::size_t>(i)] / 3.0;
  return c;
}

} // namespace

TEST(Potential, HarmonicValuesOnLargeBox) {
  const ExperimentConfig c = ExperimentConfig::preset("harmonic");
  const MeshPtr m = friedrichs_keller(c.domain, c.base_cells);
  const Eigen::VectorXd v = build_potential(c, *m);
  double at_center = -1.0, at_corner = -1.0;
  for (Index e = 0; e < m->num_elements(); ++e)
    for (int j = 0; j < 3; ++j) {
      const Point &x = m->vertex(m->element(e)[static_cast<std::size_t>(j)]);
      if (x[0] == 0.0 && x[1] == 0.0) at_center = v[e * 3 + j];
      if (x[0] == 8.0 && x[1] == 8.0) at_corner = v[e * 3 + j];
    }
  EXPECT_EQ(at_center, 0.0);
  EXPECT_EQ(at_corner, 64.0);
}

TEST(Potential, DisorderCellsAreFairCoinsWithAmplitude) {
  const ExperimentConfig c = ExperimentConfig::preset("disorder");
  const std::vector<double> cells = grid_cell_values(c);
  ASSERT_EQ(cells.size(), 1024u);
  int high = 0;
  for (double x : cells) {
    EXPECT_TRUE(x == 0.0 || x == 256.0);
    high += x == 256.0;
  }
  // Binomial(1024, 1/2): four standard deviations.
  EXPECT_NEAR(high, 512, 64);
  EXPECT_EQ(grid_cell_values(c), cells);
  ExperimentConfig other = c;
  other.disorder.seed = c.disorder_seed() + 1;
  EXPECT_NE(grid_cell_values(other), cells);
}

TEST(Potential, DisorderIsConstantPerElementAndConsistentAcrossLevels) {
  const ExperimentConfig c = ExperimentConfig::preset("disorder");
  const std::vector<double> cells = grid_cell_values(c);
  MeshPtr m = friedrichs_keller(c.domain, c.base_cells);
  for (int l = 0; l < 2; ++l) {
    const Eigen::VectorXd v = build_potential(c, *m);
    for (Index e = 0; e < m->num_elements(); ++e) {
      const Point x = centroid(*m, e);
      const int i = static_cast<int>((x[0] + 1.0) / 2.0 * 32), j = static_cast<int>((x[1] + 1.0) / 2.0 * 32);
      for (int k = 0; k < 3; ++k) ASSERT_EQ(v[e * 3 + k], cells[static_cast<std::size_t>(j * 32 + i)]);
    }
    m = red_refine(m);
  }
}

TEST(Potential, MisalignedGridIsRejected) {
  ExperimentConfig c = ExperimentConfig::preset("disorder");
  c.base_cells = 16;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.base_cells = 24;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Potential, DisorderStepBoundMagnitude) {
  const ExperimentConfig c = ExperimentConfig::preset("disorder");
  const MeshPtr m = friedrichs_keller(c.domain, c.base_cells);
  const ProblemData data = build_problem(c, m);
  const StepSizeBound b = step_bound(data, discrete_energy(initial_guess(m), data));
  EXPECT_GT(b.bound, 4e-3 / 5);
  EXPECT_LT(b.bound, 4e-3 * 5);
}

TEST(Config, JsonRoundTrip) {
  for (const char *name : {"quick", "harmonic", "disorder", "linear1d"}) {
    const ExperimentConfig c = ExperimentConfig::preset(name);
    const std::string text = c.to_json();
    EXPECT_EQ(ExperimentConfig::from_json(text).to_json(), text) << name;
  }
  ExperimentConfig c = ExperimentConfig::preset("disorder");
  c.disorder.seed = 99;
  c.lumped.step_policy = StepPolicy::fixed;
  c.lumped.tau_fixed = 0.5;
  c.standard.pairing = Pairing::lumped;
  c.verification.eig_count = 4;
  const ExperimentConfig r = ExperimentConfig::from_json(c.to_json());
  EXPECT_EQ(r.disorder.seed, 99u);
  EXPECT_EQ(r.lumped.step_policy, StepPolicy::fixed);
  EXPECT_EQ(r.lumped.tau_fixed, 0.5);
  EXPECT_EQ(r.verification.eig_count, 4);
}

TEST(Config, PresetKeyAndOverrides) {
  const ExperimentConfig c = ExperimentConfig::from_json(R"({"preset": "harmonic", "kappa": 5, "levels": [1, 2]})");
  EXPECT_EQ(c.name, "harmonic");
  EXPECT_EQ(c.kappa, 5.0);
  EXPECT_EQ(c.levels, (std::vector<int>{1, 2}));
  EXPECT_EQ(c.domain.lower[0], -8.0);
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(ExperimentConfig::from_json(R"({"kapa": 1})"), std::invalid_argument);
  EXPECT_THROW(ExperimentConfig::from_json(R"({"solver": {"tau": 1}})"), std::invalid_argument);
  EXPECT_THROW(ExperimentConfig::from_json(R"({"levels": [2, 1]})"), std::invalid_argument);
  EXPECT_THROW(ExperimentConfig::from_json(R"({"kappa": -1})"), std::invalid_argument);
  EXPECT_THROW(ExperimentConfig::from_json(R"({"preset": "nope"})"), std::invalid_argument);
  EXPECT_THROW(ExperimentConfig::load("/nonexistent/config.json"), std::invalid_argument);
}

TEST(Hierarchy, NestedLevelsAndReference) {
  const ExperimentConfig c = tiny_config();
  const MeshHierarchy h = build_hierarchy(c);
  ASSERT_EQ(h.levels.size(), 3u);
  for (std::size_t i = 1; i < h.levels.size(); ++i) {
    EXPECT_EQ(h.levels[i]->parent(), h.levels[i - 1]);
    EXPECT_DOUBLE_EQ(h.levels[i]->h(), h.levels[i - 1]->h() / 2);
  }
  ASSERT_TRUE(h.reference->parent());
  EXPECT_EQ(h.reference->parent()->parent(), h.levels.back());
  EXPECT_DOUBLE_EQ(h.reference->h(), h.levels.back()->h() / 4);
}

TEST(Eoc, Definition) {
  EXPECT_NEAR(eoc(4.0, 1.0, 0.2, 0.1), 2.0, 1e-15);
  EXPECT_NEAR(eoc(1.0, 0.5, 1.0, 0.5), 1.0, 1e-15);
}

TEST(Convergence, LinearOneDimensionalAgainstClosedForm) {
  ExperimentConfig c = ExperimentConfig::preset("linear1d");
  c.output_dir = scratch_dir("linear1d");
  const ConvergenceResult r = run_convergence(c, true);
  ASSERT_EQ(r.lumped.size(), 5u);
  const double pi = std::numbers::pi;
  for (std::size_t i = 0; i < r.lumped.size(); ++i) {
    const ConvergenceRecord &row = r.lumped[i];
    const double h = 1.0 / (8 << i);
    const double lambda_h = 4.0 / (h * h) * std::pow(std::sin(pi * h / 2), 2);
    EXPECT_NEAR(row.h, h, 1e-15);
    EXPECT_NEAR(row.eigenvalue, lambda_h, 1e-10 * lambda_h);
    EXPECT_NEAR(row.errors.eigenvalue_error, std::abs(lambda_h - pi * pi), 1e-10);
    EXPECT_NEAR(row.errors.energy_error, std::abs(lambda_h - pi * pi) / 2, 1e-10);
    if (i == 0) {
      EXPECT_TRUE(std::isnan(row.eoc_eigenvalue));
    } else {
      EXPECT_NEAR(row.eoc_eigenvalue, 2.0, 0.01);
      EXPECT_NEAR(row.eoc_energy, 2.0, 0.01);
    }
  }
  for (const char *f : {"convergence_lumped.csv", "convergence_standard.csv", "energies.csv", "manifest.json"})
    EXPECT_TRUE(fs::exists(c.output_dir / f)) << f;
  EXPECT_EQ(first_line(c.output_dir / "convergence_lumped.csv"),
            "level,cells,h,l2_error,h1_error,energy_error,eigenvalue_error,eoc_l2,eoc_h1,eoc_energy,eoc_eigenvalue,"
            "energy,eigenvalue,iterations,wall_time,converged,status");
  EXPECT_EQ(first_line(c.output_dir / "traces" / "lumped_level0.csv"), "iter,energy,residual,tau,min_coeff");
}

TEST(Convergence, QuickProfileSecondOrder) {
  ExperimentConfig c = ExperimentConfig::preset("quick");
  c.output_dir = scratch_dir("quick");
  const ConvergenceResult r = run_convergence(c, false);
  EXPECT_TRUE(r.reference_converged);
  ASSERT_EQ(r.lumped.size(), 4u);
  for (const auto *rows : {&r.lumped, &r.standard})
    for (std::size_t i = 0; i < rows->size(); ++i) {
      EXPECT_TRUE((*rows)[i].converged);
      EXPECT_FALSE((*rows)[i].failed);
    }
  EXPECT_GE(r.lumped.back().eoc_l2, 1.8);
  EXPECT_GE(r.lumped.back().eoc_h1, 0.9);
  EXPECT_GE(r.lumped.back().eoc_energy, 1.8);
  EXPECT_GE(r.standard.back().eoc_l2, 1.8);
  EXPECT_FALSE(fs::exists(c.output_dir));
}

TEST(Verification, AllChecksPassAndReportIsReproducible) {
  ExperimentConfig c = tiny_config();
  c.output_dir = scratch_dir("verify_a");
  const std::vector<CheckRow> rows = run_verification(c, true);
  ASSERT_FALSE(rows.empty());
  for (const CheckRow &r : rows) EXPECT_TRUE(r.pass) << r.check << " " << r.param << " " << r.value;
  ExperimentConfig again = c;
  again.output_dir = scratch_dir("verify_b");
  run_verification(again, true);
  const std::string a = slurp(c.output_dir / "verification.csv");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(again.output_dir / "verification.csv"));
  EXPECT_EQ(a, format_report(rows));
}

TEST(Localization, PointMassAndFullSupport) {
  const MeshPtr m = friedrichs_keller(Box::cube(2, 0.0, 1.0), 8);
  FeFunction spike = FeFunction::zero(m);
  spike.coeffs()[m->interior_node(10)] = 1.0;
  const LocalizationBox b = localization_box(spike, 0.5);
  EXPECT_EQ(b.area, 0.0);
  EXPECT_DOUBLE_EQ(b.mass, 1.0);
  const LocalizationBox full = localization_box(initial_guess(m), 1.0);
  EXPECT_NEAR(full.area, 0.75 * 0.75, 1e-14);
  EXPECT_NEAR(full.bounds[0], 0.125, 1e-15);
  EXPECT_NEAR(full.bounds[3], 0.875, 1e-15);
  EXPECT_THROW(localization_box(spike, 0.0), std::invalid_argument);
}

TEST(Localization, SmallerFractionNeverNeedsMoreArea) {
  const MeshPtr m = friedrichs_keller(Box::cube(2, -1.0, 1.0), 16);
  const FeFunction u = FeFunction::interpolate(m, [](const Point &x) { return std::exp(-8 * (x[0] * x[0] + x[1] * x[1])); });
  double prev = 0.0;
  for (double f : {0.1, 0.3, 0.5, 0.9, 1.0}) {
    const LocalizationBox b = localization_box(u, f);
    EXPECT_GE(b.area, prev);
    EXPECT_GE(b.mass, f * (1 - 1e-12));
    prev = b.area;
  }
}

TEST(EnergyIdentity, SmallAtGroundState) {
  const ExperimentConfig c = tiny_config();
  const MeshPtr m = friedrichs_keller(c.domain, 16);
  const ProblemData data = build_problem(c, m);
  EXPECT_LE(energy_identity_defect(solve_ground_state(data), data), 1e-12);
}
