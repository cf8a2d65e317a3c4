#include "gpe/quadrature.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gpe {

namespace {

QuadratureRule gauss_1d(int points) {
  QuadratureRule r;
  r.dim = 1;
  r.degree = 2 * points - 1;
  std::vector<double> x, w;
  if (points == 3) {
    x = {-std::sqrt(3.0 / 5.0), 0.0, std::sqrt(3.0 / 5.0)};
    w = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  } else {
    const double a = std::sqrt(3.0 / 7.0 - 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
    const double b = std::sqrt(3.0 / 7.0 + 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
    const double wa = (18.0 + std::sqrt(30.0)) / 36.0;
    const double wb = (18.0 - std::sqrt(30.0)) / 36.0;
    x = {-b, -a, a, b};
    w = {wb, wa, wa, wb};
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = 0.5 * (x[i] + 1.0);
    r.barycentric.push_back({1.0 - t, t, 0.0, 0.0});
    r.weights.push_back(0.5 * w[i]);
  }
  return r;
}

void add_orbit3(QuadratureRule &r, double a, double w) {
  const double b = 1.0 - 2.0 * a;
  r.barycentric.push_back({b, a, a, 0.0});
  r.barycentric.push_back({a, b, a, 0.0});
  r.barycentric.push_back({a, a, b, 0.0});
  for (int i = 0; i < 3; ++i) r.weights.push_back(w);
}

QuadratureRule triangle_degree4() {
  QuadratureRule r;
  r.dim = 2;
  r.degree = 4;
  add_orbit3(r, 0.44594849091596488631832925388305, 0.22338158967801146569500700843312);
  add_orbit3(r, 0.09157621350977074345957146340220, 0.10995174365532186763832632490021);
  return r;
}

QuadratureRule triangle_degree5() {
  QuadratureRule r;
  r.dim = 2;
  r.degree = 5;
  const double s = std::sqrt(15.0);
  r.barycentric.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0});
  r.weights.push_back(9.0 / 40.0);
  add_orbit3(r, (6.0 - s) / 21.0, (155.0 - s) / 1200.0);
  add_orbit3(r, (6.0 + s) / 21.0, (155.0 + s) / 1200.0);
  return r;
}

} // namespace

const QuadratureRule &simplex_rule(int dim, int degree) {
  static const QuadratureRule g3 = gauss_1d(3);
  static const QuadratureRule g4 = gauss_1d(4);
  static const QuadratureRule t4 = triangle_degree4();
  static const QuadratureRule t5 = triangle_degree5();
  if (degree >= 0) {
    if (dim == 1 && degree <= 5) return g3;
    if (dim == 1 && degree <= 7) return g4;
    if (dim == 2 && degree <= 4) return t4;
    if (dim == 2 && degree <= 5) return t5;
  }
  throw std::invalid_argument("simplex_rule: no rule of degree " + std::to_string(degree) + " in dimension " +
                              std::to_string(dim));
}

double barycentric_monomial_integral(int dim, const std::array<int, 4> &exponents, double volume) {
  // int_K prod lambda_i^{a_i} = d! |K| prod a_i! / (sum a_i + d)!
  double num = 1.0;
  int total = 0;
  for (int i = 0; i <= dim; ++i) {
    const int a = exponents[static_cast<std::size_t>(i)];
    for (int k = 2; k <= a; ++k) num *= k;
    total += a;
  }
  for (int k = 2; k <= dim; ++k) num *= k;
  double den = 1.0;
  for (int k = 2; k <= total + dim; ++k) den *= k;
  return volume * num / den;
}

} // namespace gpe
