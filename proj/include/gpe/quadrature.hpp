#pragma once

#include <array>
#include <vector>

namespace gpe {

/// Symmetric quadrature rule on a simplex in barycentric coordinates. Weights
/// sum to one, so the integral over K is |K| * sum_q w_q f(x_q).
struct QuadratureRule {
  int dim = 0;
  int degree = 0;
  std::vector<std::array<double, 4>> barycentric;
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
};

/// Lowest-cost available rule exact for polynomials of total degree `degree`.
/// Available: d = 1 up to degree 7 (Gauss-Legendre), d = 2 up to degree 5
/// (Strang-Fix/Dunavant 6-point degree 4, Radon 7-point degree 5).
/// Throws std::invalid_argument for anything else.
const QuadratureRule &simplex_rule(int dim, int degree);

/// Exact integral over a simplex of measure `volume` of prod_i lambda_i^{a_i}.
double barycentric_monomial_integral(int dim, const std::array<int, 4> &exponents, double volume);

} // namespace gpe
