#pragma once

#include <functional>

#include <Eigen/Core>

#include "gpe/mesh.hpp"

namespace gpe {

/// Pointwise potential, evaluated with the element the point is taken from so
/// that element-wise discontinuous potentials are well defined.
using PointPotential = std::function<double(const Point &x, Index element)>;

/// Potential, interaction strength and mesh of one ground-state problem.
struct ProblemData {
  MeshPtr mesh;
  /// Element-nodal potential values V >= 0, length (d+1) * #elements.
  Eigen::VectorXd potential_values;
  double kappa = 0.0;
  /// Optional pointwise potential used by quadrature-based forms. When empty,
  /// quadrature uses the element-wise P1 interpolant of potential_values.
  PointPotential potential;

  /// Samples `potential` at the element nodes.
  static ProblemData make(MeshPtr mesh, PointPotential potential, double kappa);
  static ProblemData zero_potential(MeshPtr mesh, double kappa);

  /// Throws std::invalid_argument on a null mesh, wrong potential length,
  /// negative potential values or negative kappa.
  void validate() const;
};

/// l(a v, w) = sum_K |K|/(d+1) sum_j a(K,j) v(p_j) w(p_j); unit weight if
/// `weight` is empty.
double lumped_inner(const FeFunction &v, const FeFunction &w, const Eigen::VectorXd &weight = Eigen::VectorXd());
double lumped_norm(const FeFunction &v);

/// E_h(v) = 1/2 (grad v, grad v) + 1/2 l(V v, v) + kappa/4 l(|v|^2 v, v) for v in V_h^0.
double discrete_energy(const FeFunction &v, const ProblemData &data);

/// Rayleigh-type quotient of the lumped nonlinear eigenproblem.
double discrete_eigenvalue(const FeFunction &u, const ProblemData &data);

struct Residual {
  FeFunction vector;
  double rel_norm;
};

/// Algebraic residual r = (S + M(V) + kappa M(u^2)) u - lambda(u) M u of the
/// l-normalized copy of u. Returns M^{-1} r as a function in V_h^0 and the
/// scale-free measure ||M^{-1} r||_l / lambda(u).
Residual residual(const FeFunction &u, const ProblemData &data);

/// Continuous energy E(v) with all L2 terms integrated by a simplex rule of
/// the requested degree (at least 4, so the quartic term is exact).
double standard_energy(const FeFunction &v, const ProblemData &data, int quadrature_degree = 4);

/// (V v, w)_{L2} by quadrature with V evaluated pointwise.
double quadrature_potential_inner(const FeFunction &v, const FeFunction &w, const PointPotential &potential,
                                  int quadrature_degree = 4);
/// (|w|^2 w, v)_{L2} by quadrature.
double quadrature_cubic_inner(const FeFunction &w, const FeFunction &v, int quadrature_degree = 4);

/// Quadrature-point evaluator for the potential of `data`.
double evaluate_potential(const ProblemData &data, Index element, const std::array<double, 4> &barycentric);

} // namespace gpe
