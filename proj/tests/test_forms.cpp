#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "gpe/assembly.hpp"
#include "gpe/forms.hpp"

using namespace gpe;

namespace {

MeshPtr interval(double a, double b, int n) { return friedrichs_keller(Box::cube(1, a, b), n); }
MeshPtr square(double a, double b, int n) { return friedrichs_keller(Box::cube(2, a, b), n); }

FeFunction random_v0(const MeshPtr &m, std::uint64_t seed, double lo = -1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, 1.0);
  Eigen::VectorXd x(m->num_interior());
  for (Index i = 0; i < x.size(); ++i) x[i] = dist(rng);
  return FeFunction::from_interior(m, x);
}

FeFunction normalized(FeFunction v) {
  v.coeffs() /= lumped_norm(v);
  return v;
}

/// Lumped energy on a 1D mesh from nodal values and interval lengths only.
double energy_1d_by_hand(const FeFunction &v, const std::function<double(double)> &V, double kappa) {
  const SimplicialMesh &m = *v.mesh();
  double e = 0.0;
  for (Index k = 0; k < m.num_elements(); ++k) {
    const Index a = m.element(k)[0], b = m.element(k)[1];
    const double h = std::abs(m.vertex(b)[0] - m.vertex(a)[0]);
    e += 0.5 * (v(b) - v(a)) * (v(b) - v(a)) / h;
    for (Index p : {a, b}) {
      const double x = v(p);
      e += h / 2 * (0.5 * V(m.vertex(p)[0]) * x * x + 0.25 * kappa * x * x * x * x);
    }
  }
  return e;
}

} // namespace

TEST(LumpedInner, ConstantOnTwoTriangles) {
  const MeshPtr m = square(0.0, 1.0, 1);
  const FeFunction one = FeFunction::constant(m, 1.0);
  EXPECT_DOUBLE_EQ(lumped_inner(one, one), 1.0);
}

TEST(LumpedInner, InteriorHatOnTwoByTwo) {
  const MeshPtr m = square(0.0, 1.0, 2);
  FeFunction hat = FeFunction::zero(m);
  hat.coeffs()[4] = 1.0;
  EXPECT_DOUBLE_EQ(lumped_inner(hat, hat), 0.25);
}

TEST(LumpedInner, ZeroFunction) {
  const MeshPtr m = square(0.0, 1.0, 3);
  EXPECT_EQ(lumped_norm(FeFunction::zero(m)), 0.0);
}

TEST(LumpedInner, RejectsWrongWeightLengthAndMixedMeshes) {
  const MeshPtr m = square(0.0, 1.0, 2);
  const FeFunction v = FeFunction::constant(m, 1.0);
  EXPECT_THROW(lumped_inner(v, v, Eigen::VectorXd::Ones(3)), std::invalid_argument);
  const FeFunction w = FeFunction::constant(square(0.0, 1.0, 2), 1.0);
  EXPECT_THROW(lumped_inner(v, w), std::invalid_argument);
}

TEST(LumpedInner, SymmetricBilinearPositive) {
  const MeshPtr m = square(0.0, 1.0, 6);
  const FeFunction a = random_v0(m, 1), b = random_v0(m, 2), c = random_v0(m, 3);
  EXPECT_NEAR(lumped_inner(a, b), lumped_inner(b, a), 1e-15);
  FeFunction ab(m, 2.0 * a.coeffs() - 3.0 * b.coeffs());
  EXPECT_NEAR(lumped_inner(ab, c), 2.0 * lumped_inner(a, c) - 3.0 * lumped_inner(b, c), 1e-14);
  EXPECT_GT(lumped_inner(a, a), 0.0);
}

TEST(DiscreteEnergy, ZeroFunction) {
  const MeshPtr m = square(0.0, 1.0, 4);
  const ProblemData data = ProblemData::zero_potential(m, 1000.0);
  EXPECT_EQ(discrete_energy(FeFunction::zero(m), data), 0.0);
}

TEST(DiscreteEnergy, SingleHatOnHalfMesh) {
  const MeshPtr m = interval(0.0, 1.0, 2);
  const ProblemData data = ProblemData::zero_potential(m, 1.0);
  for (double c : {0.3, 1.0, 2.5}) {
    const FeFunction v = FeFunction::from_interior(m, Eigen::VectorXd::Constant(1, c));
    EXPECT_NEAR(discrete_energy(v, data), 2 * c * c + std::pow(c, 4) / 8, 1e-14);
  }
}

TEST(DiscreteEnergy, LinearCaseIsHalfStiffnessForm) {
  const MeshPtr m = square(0.0, 1.0, 5);
  const ProblemData data = ProblemData::zero_potential(m, 0.0);
  const FeFunction v = random_v0(m, 11);
  const double expect = 0.5 * assemble_stiffness(*m).quadratic_form(v.interior_values());
  EXPECT_NEAR(discrete_energy(v, data), expect, 1e-13 * expect);
}

TEST(DiscreteEnergy, MatchesHandComputationIn1D) {
  const MeshPtr m = interval(-2.0, 3.0, 13);
  auto V = [](double x) { return 1.0 + x * x; };
  const ProblemData data = ProblemData::make(m, [&](const Point &x, Index) { return V(x[0]); }, 7.5);
  const FeFunction v = random_v0(m, 5);
  const double expect = energy_1d_by_hand(v, V, 7.5);
  EXPECT_NEAR(discrete_energy(v, data), expect, 1e-13 * expect);
}

TEST(DiscreteEnergy, RejectsNonzeroBoundary) {
  const MeshPtr m = square(0.0, 1.0, 2);
  const ProblemData data = ProblemData::zero_potential(m, 1.0);
  EXPECT_THROW(discrete_energy(FeFunction::constant(m, 1.0), data), std::invalid_argument);
}

TEST(DiscreteEnergy, ModulusDoesNotIncreaseEnergy) {
  const MeshPtr m = square(0.0, 1.0, 8);
  const ProblemData data = ProblemData::make(m, [](const Point &x, Index) { return 10 * x[0]; }, 50.0);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const FeFunction v = random_v0(m, 100 + s);
    const FeFunction a(m, v.coeffs().cwiseAbs());
    EXPECT_LE(discrete_energy(a, data), discrete_energy(v, data) + 1e-12);
  }
}

TEST(DiscreteEnergy, EvenInSign) {
  const MeshPtr m = square(0.0, 1.0, 6);
  const ProblemData data = ProblemData::zero_potential(m, 3.0);
  const FeFunction v = random_v0(m, 3);
  const FeFunction w(m, -v.coeffs());
  EXPECT_EQ(discrete_energy(v, data), discrete_energy(w, data));
}

TEST(DiscreteEigenvalue, LinearSineModeIn1D) {
  for (int n : {4, 8, 16, 32}) {
    const MeshPtr m = interval(0.0, 1.0, n);
    const ProblemData data = ProblemData::zero_potential(m, 0.0);
    const FeFunction u = FeFunction::interpolate(m, [](const Point &x) { return std::sin(std::numbers::pi * x[0]); });
    const double h = 1.0 / n;
    const double exact = 4.0 / (h * h) * std::pow(std::sin(std::numbers::pi * h / 2), 2);
    EXPECT_NEAR(discrete_eigenvalue(u, data), exact, 1e-12 * exact);
  }
}

TEST(DiscreteEigenvalue, LinearSineModeIn2D) {
  const int n = 16;
  const MeshPtr m = square(0.0, 1.0, n);
  const ProblemData data = ProblemData::zero_potential(m, 0.0);
  const double pi = std::numbers::pi;
  const FeFunction u =
      FeFunction::interpolate(m, [&](const Point &x) { return std::sin(pi * x[0]) * std::sin(pi * x[1]); });
  const double h = 1.0 / n;
  const double exact = 8.0 / (h * h) * std::pow(std::sin(pi * h / 2), 2);
  EXPECT_NEAR(discrete_eigenvalue(u, data), exact, 1e-12 * exact);
}

TEST(DiscreteEigenvalue, ScaleInvariant) {
  const MeshPtr m = square(-1.0, 1.0, 8);
  const ProblemData data = ProblemData::make(m, [](const Point &x, Index) { return x[0] * x[0]; }, 40.0);
  const FeFunction v = random_v0(m, 9, 0.0);
  const FeFunction w(m, 17.0 * v.coeffs());
  EXPECT_NEAR(discrete_eigenvalue(v, data), discrete_eigenvalue(w, data), 1e-12 * discrete_eigenvalue(v, data));
}

TEST(DiscreteEigenvalue, EnergyIdentityOnNormalizedStates) {
  const MeshPtr m = square(0.0, 1.0, 7);
  const double kappa = 25.0;
  const ProblemData data = ProblemData::make(m, [](const Point &x, Index) { return 3.0 + x[1]; }, kappa);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const FeFunction u = normalized(random_v0(m, 40 + s));
    const Eigen::VectorXd u2 = element_nodal_map(u).cwiseAbs2();
    const FeFunction u3(m, u.coeffs().array().cube().matrix());
    const double quartic = lumped_inner(u3, u);
    EXPECT_NEAR(discrete_eigenvalue(u, data), 2 * discrete_energy(u, data) + kappa / 2 * quartic,
                1e-12 * discrete_eigenvalue(u, data));
    EXPECT_NEAR(quartic, lumped_inner(u, u, u2), 1e-14);
  }
}

TEST(DiscreteEigenvalue, RejectsZero) {
  const MeshPtr m = square(0.0, 1.0, 3);
  EXPECT_THROW(discrete_eigenvalue(FeFunction::zero(m), ProblemData::zero_potential(m, 1.0)), std::invalid_argument);
}

TEST(Residual, VanishesForExactDiscreteEigenvector) {
  const MeshPtr m = interval(0.0, 1.0, 64);
  const ProblemData data = ProblemData::zero_potential(m, 0.0);
  const FeFunction u = FeFunction::interpolate(m, [](const Point &x) { return std::sin(std::numbers::pi * x[0]); });
  EXPECT_LE(residual(u, data).rel_norm, 1e-12);
}

TEST(Residual, LargeForRandomState) {
  const MeshPtr m = square(0.0, 1.0, 8);
  const ProblemData data = ProblemData::zero_potential(m, 1000.0);
  const Residual r = residual(normalized(random_v0(m, 21)), data);
  EXPECT_GT(r.rel_norm, 1e-3);
  EXPECT_TRUE(r.vector.in_v0());
}

TEST(Residual, ScaleInvariantAndOrthogonal) {
  const MeshPtr m = square(0.0, 1.0, 6);
  const ProblemData data = ProblemData::make(m, [](const Point &x, Index) { return x[0]; }, 10.0);
  const FeFunction v = random_v0(m, 22, 0.0);
  const Residual a = residual(v, data);
  const Residual b = residual(FeFunction(m, 4.0 * v.coeffs()), data);
  EXPECT_NEAR(a.rel_norm, b.rel_norm, 1e-12 * a.rel_norm);
  // M^{-1} r is l-orthogonal to u by the choice of lambda.
  EXPECT_NEAR(lumped_inner(a.vector, v) / lumped_norm(v), 0.0, 1e-12 * lumped_norm(a.vector));
}

TEST(StandardEnergy, LinearCaseIsHalfStiffnessForm) {
  const MeshPtr m = square(0.0, 1.0, 5);
  const FeFunction v = random_v0(m, 12);
  const double expect = 0.5 * assemble_stiffness(*m).quadratic_form(v.interior_values());
  EXPECT_NEAR(standard_energy(v, ProblemData::zero_potential(m, 0.0)), expect, 1e-13 * expect);
}

TEST(StandardEnergy, ConstantOnSingleElement) {
  std::vector<Point> pts{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  const MeshPtr m = std::make_shared<const SimplicialMesh>(
      2, pts, std::vector<SimplicialMesh::Element>{{0, 1, 2, -1}}, std::vector<bool>{false, false, false});
  const ProblemData data = ProblemData::make(m, [](const Point &, Index) { return 1.0; }, 0.0);
  const double c = 1.7;
  EXPECT_NEAR(standard_energy(FeFunction::constant(m, c), data), 0.5 * c * c * 0.5, 1e-15);
}

TEST(StandardEnergy, QuarticTermOfHatIn1D) {
  const MeshPtr m = interval(0.0, 1.0, 2);
  const double kappa = 3.0;
  const ProblemData data = ProblemData::zero_potential(m, kappa);
  const FeFunction hat = FeFunction::from_interior(m, Eigen::VectorXd::Ones(1));
  // Gradient part 2; quartic: two intervals of length 1/2 with int phi^4 = h/5.
  EXPECT_NEAR(standard_energy(hat, data), 2.0 + kappa / 4 * (2 * 0.5 / 5), 1e-14);
}

TEST(StandardEnergy, MatchesFineMidpointSum) {
  const MeshPtr m = interval(0.0, 1.0, 5);
  auto V = [](double x) { return 2.0 + x * x; };
  const ProblemData data = ProblemData::make(m, [&](const Point &x, Index) { return V(x[0]); }, 4.0);
  const FeFunction v = random_v0(m, 77);
  // Composite midpoint rule on a very fine grid as an independent oracle.
  const int samples = 200000;
  double lower = 0.0;
  for (int s = 0; s < samples; ++s) {
    const double x = (s + 0.5) / samples;
    const double t = x * 5;
    const int k = std::min(4, static_cast<int>(t));
    const double r = t - k;
    const double left = k == 0 ? 0.0 : v(k), right = k + 1 == 5 ? 0.0 : v(k + 1);
    // friedrichs_keller numbers 1D nodes left to right.
    const double val = (1 - r) * left + r * right;
    lower += (0.5 * V(x) * val * val + 1.0 * val * val * val * val) / samples;
  }
  const double grad = 0.5 * assemble_stiffness(*m).quadratic_form(v.interior_values());
  EXPECT_NEAR(standard_energy(v, data, 5), grad + lower, 1e-9);
}

TEST(StandardEnergy, RejectsLowDegree) {
  const MeshPtr m = square(0.0, 1.0, 2);
  const ProblemData data = ProblemData::zero_potential(m, 1.0);
  EXPECT_THROW(standard_energy(FeFunction::zero(m), data, 3), std::invalid_argument);
  EXPECT_THROW(quadrature_cubic_inner(FeFunction::zero(m), FeFunction::zero(m), 2), std::invalid_argument);
}

TEST(ProblemData, Validation) {
  const MeshPtr m = square(0.0, 1.0, 2);
  EXPECT_THROW(ProblemData::zero_potential(m, -1.0), std::invalid_argument);
  EXPECT_THROW(ProblemData::make(m, [](const Point &, Index) { return -1.0; }, 1.0), std::invalid_argument);
  ProblemData d = ProblemData::zero_potential(m, 0.0);
  d.potential_values.resize(3);
  EXPECT_THROW(d.validate(), std::invalid_argument);
}
