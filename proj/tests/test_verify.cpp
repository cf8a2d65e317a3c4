#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "gpe/assembly.hpp"
#include "gpe/solver.hpp"
#include "gpe/verify.hpp"

using namespace gpe;

namespace {

MeshPtr square(double a, double b, int n) { return friedrichs_keller(Box::cube(2, a, b), n); }

PointPotential harmonic_potential() {
  return [](const Point &x, Index) { return 0.5 * (x[0] * x[0] + x[1] * x[1]); };
}

Eigen::VectorXd random_vector(Rng &rng, Index n, double lo, double hi) {
  Eigen::VectorXd x(n);
  for (Index i = 0; i < n; ++i) x[i] = rng.uniform(lo, hi);
  return x;
}

SparseSpdMatrix two_by_two() {
  SparseMatrix a(2, 2);
  a.insert(0, 0) = 2.0;
  a.insert(0, 1) = -1.0;
  a.insert(1, 0) = -1.0;
  a.insert(1, 1) = 2.0;
  return SparseSpdMatrix(a);
}

} // namespace

TEST(Rng, DeterministicAndInRange) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    const double x = a.uniform();
    EXPECT_EQ(x, b.uniform());
    EXPECT_GE(x, 0.0);
    EXPECT_LT(x, 1.0);
    differs |= x != c.uniform();
  }
  EXPECT_TRUE(differs);
  EXPECT_NE(Rng::split(1, 0), Rng::split(1, 1));
  EXPECT_EQ(Rng::split(1, 5), Rng::split(1, 5));
}

TEST(Picone, TwoByTwoExample) {
  const Eigen::Vector2d u(1.0, 2.0), v(1.0, 1.0);
  const PiconeResult r = picone_check(two_by_two(), u, v);
  EXPECT_DOUBLE_EQ(r.lhs, 5.0);
  EXPECT_DOUBLE_EQ(r.rhs, 6.0);
  EXPECT_TRUE(r.holds);
}

TEST(Picone, EqualityForProportionalPairs) {
  const SparseSpdMatrix s = assemble_stiffness(*square(0.0, 1.0, 6));
  Rng rng(1);
  const Eigen::VectorXd v = random_vector(rng, s.size(), 0.1, 1.0);
  for (double c : {1.0, 3.0}) {
    const PiconeResult r = picone_check(s, c * v, v);
    EXPECT_NEAR(r.lhs, r.rhs, 1e-12 * r.rhs);
    EXPECT_TRUE(r.holds);
  }
}

TEST(Picone, RandomPairsOnFriedrichsKellerMeshes) {
  for (int n : {4, 8, 16}) {
    const SparseSpdMatrix s = assemble_stiffness(*square(0.0, 1.0, n));
    Rng rng(Rng::split(7, static_cast<std::uint64_t>(n)));
    for (int t = 0; t < 1000; ++t) {
      const Eigen::VectorXd u = random_vector(rng, s.size(), -1.0, 1.0);
      const Eigen::VectorXd v = random_vector(rng, s.size(), 1e-3, 1.0);
      const PiconeResult r = picone_check(s, u, v);
      ASSERT_TRUE(r.holds) << "n=" << n << " trial " << t << ": " << r.lhs << " > " << r.rhs;
    }
  }
}

TEST(Picone, RejectsNonPositiveV) {
  EXPECT_THROW(picone_check(two_by_two(), Eigen::Vector2d(1, 1), Eigen::Vector2d(1, 0)), std::invalid_argument);
  EXPECT_THROW(picone_check(two_by_two(), Eigen::Vector2d(1, 1), Eigen::Vector2d(-1, 1)), std::invalid_argument);
}

TEST(ConvexObjective, EqualsEnergyOfModulus) {
  const MeshPtr m = square(-2.0, 2.0, 8);
  const ProblemData data = ProblemData::make(m, harmonic_potential(), 40.0);
  const ConvexObjective f(data);
  Rng rng(3);
  for (int t = 0; t < 10; ++t) {
    const Eigen::VectorXd x = random_vector(rng, m->num_interior(), -1.0, 1.0);
    const FeFunction u = FeFunction::from_interior(m, x);
    const FeFunction a(m, u.coeffs().cwiseAbs());
    const double e = discrete_energy(a, data);
    EXPECT_NEAR(f(x.cwiseAbs2()), e, 1e-12 * e);
    EXPECT_NEAR(f(x.cwiseAbs2()), f((-x).cwiseAbs2()), 0.0);
    EXPECT_NEAR(f.constraint(x.cwiseAbs2()), lumped_inner(u, u), 1e-14);
  }
  EXPECT_THROW(f(-Eigen::VectorXd::Ones(m->num_interior())), std::invalid_argument);
}

TEST(ConvexObjective, ConvexAlongSegments) {
  const MeshPtr m = square(0.0, 1.0, 8);
  const ConvexObjective f(ProblemData::make(m, [](const Point &x, Index) { return x[0]; }, 10.0));
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    const Eigen::VectorXd a = random_vector(rng, m->num_interior(), 0.0, 2.0);
    const Eigen::VectorXd b = random_vector(rng, m->num_interior(), 0.0, 2.0);
    const double s = rng.uniform();
    EXPECT_LE(f(s * a + (1 - s) * b), s * f(a) + (1 - s) * f(b) + 1e-12);
  }
}

TEST(ConvexMinimality, GroundStateIsMinimizerAndControlFails) {
  const MeshPtr m = square(-4.0, 4.0, 16);
  const ProblemData data = ProblemData::make(m, harmonic_potential(), 100.0);
  const GroundStateSolution sol = solve_ground_state(data);
  const MinimalityResult ok = convex_minimality_check(sol, data, 500, 11);
  EXPECT_TRUE(ok.holds) << ok.min_gap;
  EXPECT_EQ(ok.samples, 500);
  EXPECT_GE(ok.min_gap, -1e-10);
  const MinimalityResult control = convex_minimality_check(initial_guess(m), data, 500, 11);
  EXPECT_FALSE(control.holds);
  EXPECT_LT(control.min_gap, 0.0);
}

TEST(ConvexMinimality, Deterministic) {
  const MeshPtr m = square(0.0, 1.0, 6);
  const ProblemData data = ProblemData::zero_potential(m, 5.0);
  const FeFunction u = initial_guess(m);
  EXPECT_EQ(convex_minimality_check(u, data, 40, 9).min_gap, convex_minimality_check(u, data, 40, 9).min_gap);
  EXPECT_THROW(convex_minimality_check(u, data, 0, 9), std::invalid_argument);
}

TEST(NonnegEigenstate, AcceptsGroundStateRejectsOthers) {
  const MeshPtr m = square(-3.0, 3.0, 12);
  const ProblemData data = ProblemData::make(m, harmonic_potential(), 30.0);
  const GroundStateSolution sol = solve_ground_state(data);
  FeFunction neg = sol.u;
  neg.coeffs() *= -2.0;
  EXPECT_TRUE(nonneg_eigenstate_check({{sol.lambda_h, sol.u}, {sol.lambda_h, neg}}, sol));
  // The second linearized mode changes sign and is skipped.
  const auto eig = linearized_eigs(sol.u, data, 2);
  EXPECT_TRUE(nonneg_eigenstate_check({{eig[1].mu, eig[1].v}}, sol));
  const FeFunction guess = initial_guess(m);
  EXPECT_FALSE(nonneg_eigenstate_check({{discrete_eigenvalue(guess, data), guess}}, sol));
  EXPECT_FALSE(nonneg_eigenstate_check({{sol.lambda_h * 1.01, sol.u}}, sol));
}

TEST(LoglogSlope, ExactPowerLaw) {
  EXPECT_NEAR(loglog_slope({1.0, 0.5, 0.25, 0.125}, {3.0, 0.75, 0.1875, 0.046875}), 2.0, 1e-14);
  EXPECT_TRUE(std::isnan(loglog_slope({1.0, 0.5}, {1.0, 0.0})));
  EXPECT_THROW(loglog_slope({1.0}, {1.0}), std::invalid_argument);
}

TEST(LumpingError, SecondOrderForSmoothData) {
  std::vector<MeshPtr> h{square(-8.0, 8.0, 8)};
  for (int l = 0; l < 4; ++l) h.push_back(red_refine(h.back()));
  const double pi = std::numbers::pi;
  const LumpingErrorScan scan =
      lumping_error_scan(h, harmonic_potential(), [&](const Point &x) { return std::sin(pi * x[0] / 16) * std::sin(pi * x[1] / 16) + 0.0; });
  EXPECT_GE(scan.slope_potential, 1.8);
  EXPECT_LE(scan.slope_potential, 2.3);
  EXPECT_GE(scan.slope_cubic, 1.8);
  EXPECT_LE(scan.slope_cubic, 2.3);
  ASSERT_EQ(scan.rows.size(), 5u);
}

TEST(LumpingError, ExactForConstants) {
  std::vector<MeshPtr> h{square(0.0, 1.0, 4)};
  h.push_back(red_refine(h.back()));
  const LumpingErrorScan scan = lumping_error_scan(h, [](const Point &, Index) { return 3.0; },
                                                   [](const Point &) { return 1.0; });
  for (const auto &row : scan.rows) {
    EXPECT_LT(row.err_potential, 1e-14);
    EXPECT_LT(row.err_cubic, 1e-14);
  }
  const LumpingErrorScan zero = lumping_error_scan(h, [](const Point &, Index) { return 0.0; },
                                                   [](const Point &x) { return x[0] * x[1]; });
  for (const auto &row : zero.rows) EXPECT_EQ(row.err_potential, 0.0);
}

TEST(LinfBound, LinearSineAmplitude) {
  // The discrete ground state is the nodal sine; its l-normalized peak is 2/|side|.
  for (double side : {1.0, 2.0}) {
    std::vector<MeshPtr> h{square(0.0, side, 4)};
    for (int l = 0; l < 3; ++l) h.push_back(red_refine(h.back()));
    for (const LinfRow &row : linf_bound_scan(h, [](const Point &, Index) { return 0.0; }, 0.0))
      EXPECT_NEAR(row.linf, 2.0 / side, 1e-9);
  }
  std::vector<MeshPtr> l{friedrichs_keller(Box::cube(1, 0.0, 1.0), 8)};
  l.push_back(red_refine(l.back()));
  for (const LinfRow &row : linf_bound_scan(l, [](const Point &, Index) { return 0.0; }, 0.0))
    EXPECT_NEAR(row.linf, std::sqrt(2.0), 1e-9);
}

TEST(LinfBound, BoundedUnderRefinement) {
  std::vector<MeshPtr> h{square(0.0, 1.0, 8)};
  for (int l = 0; l < 3; ++l) h.push_back(red_refine(h.back()));
  const auto rows = linf_bound_scan(h, [](const Point &x, Index) { return 20.0 * x[0]; }, 10.0);
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto &r : rows) {
    lo = std::min(lo, r.linf);
    hi = std::max(hi, r.linf);
  }
  EXPECT_LE((hi - lo) / lo, 0.2);
}
