#include "gpe/forms.hpp"

#include <cmath>
#include <stdexcept>

#include "gpe/assembly.hpp"
#include "gpe/quadrature.hpp"

namespace gpe {

namespace {

void require_same_mesh(const FeFunction &v, const FeFunction &w) {
  if (v.mesh() != w.mesh()) throw std::invalid_argument("functions live on different meshes");
}

double gradient_energy(const FeFunction &v) {
  const SimplicialMesh &mesh = *v.mesh();
  const int nk = mesh.nodes_per_element();
  const int d = mesh.dim();
  double s = 0.0;
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    const ElementGeometry g = element_geometry(mesh, e);
    auto nodes = mesh.element(e);
    Eigen::Vector3d grad = Eigen::Vector3d::Zero();
    for (int a = 0; a < nk; ++a) grad.head(d) += v(nodes[static_cast<std::size_t>(a)]) * g.gradients.row(a).head(d).transpose();
    s += g.volume * grad.squaredNorm();
  }
  return s;
}

Point physical_point(const SimplicialMesh &mesh, Index e, const std::array<double, 4> &lam) {
  Point x{0.0, 0.0, 0.0};
  auto nodes = mesh.element(e);
  for (std::size_t a = 0; a < nodes.size(); ++a) {
    const Point &p = mesh.vertex(nodes[a]);
    for (std::size_t i = 0; i < 3; ++i) x[i] += lam[a] * p[i];
  }
  return x;
}

double evaluate_p1(const FeFunction &v, Index e, const std::array<double, 4> &lam) {
  auto nodes = v.mesh()->element(e);
  double s = 0.0;
  for (std::size_t a = 0; a < nodes.size(); ++a) s += lam[a] * v(nodes[a]);
  return s;
}

const QuadratureRule &checked_rule(int dim, int degree) {
  if (degree < 4)
    throw std::invalid_argument("quadrature degree " + std::to_string(degree) +
                                " cannot integrate the quartic term exactly; request degree >= 4");
  return simplex_rule(dim, degree);
}

} // namespace

ProblemData ProblemData::make(MeshPtr mesh, PointPotential potential, double kappa) {
  ProblemData data;
  data.potential_values =
      element_nodal_map(*mesh, [&](Index e, int, const Point &x) { return potential(x, e); });
  data.mesh = std::move(mesh);
  data.kappa = kappa;
  data.potential = std::move(potential);
  data.validate();
  return data;
}

ProblemData ProblemData::zero_potential(MeshPtr mesh, double kappa) {
  return make(std::move(mesh), [](const Point &, Index) { return 0.0; }, kappa);
}

void ProblemData::validate() const {
  if (!mesh) throw std::invalid_argument("ProblemData: null mesh");
  if (potential_values.size() != mesh->element_nodal_size())
    throw std::invalid_argument("ProblemData: potential must have (d+1) * #elements entries");
  if ((potential_values.array() < 0.0).any()) throw std::invalid_argument("ProblemData: potential must be nonnegative");
  if (!(kappa >= 0.0)) throw std::invalid_argument("ProblemData: kappa must be nonnegative");
}

double lumped_inner(const FeFunction &v, const FeFunction &w, const Eigen::VectorXd &weight) {
  require_same_mesh(v, w);
  const SimplicialMesh &mesh = *v.mesh();
  const int nk = mesh.nodes_per_element();
  const bool weighted = weight.size() > 0;
  if (weighted && weight.size() != mesh.element_nodal_size())
    throw std::invalid_argument("lumped_inner: weight must have (d+1) * #elements entries");
  double s = 0.0;
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    auto nodes = mesh.element(e);
    double local = 0.0;
    for (int j = 0; j < nk; ++j) {
      const Index p = nodes[static_cast<std::size_t>(j)];
      local += (weighted ? weight[e * nk + j] : 1.0) * v(p) * w(p);
    }
    s += mesh.element_volume(e) / nk * local;
  }
  return s;
}

double lumped_norm(const FeFunction &v) { return std::sqrt(lumped_inner(v, v)); }

double discrete_energy(const FeFunction &v, const ProblemData &data) {
  if (v.mesh() != data.mesh) throw std::invalid_argument("discrete_energy: function and problem use different meshes");
  if (!v.in_v0()) throw std::invalid_argument("discrete_energy: function does not vanish on the boundary");
  const SimplicialMesh &mesh = *v.mesh();
  const int nk = mesh.nodes_per_element();
  double lumped = 0.0;
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    auto nodes = mesh.element(e);
    double local = 0.0;
    for (int j = 0; j < nk; ++j) {
      const double x = v(nodes[static_cast<std::size_t>(j)]);
      const double x2 = x * x;
      local += 0.5 * data.potential_values[e * nk + j] * x2 + 0.25 * data.kappa * x2 * x2;
    }
    lumped += mesh.element_volume(e) / nk * local;
  }
  return 0.5 * gradient_energy(v) + lumped;
}

double discrete_eigenvalue(const FeFunction &u, const ProblemData &data) {
  if (u.mesh() != data.mesh) throw std::invalid_argument("discrete_eigenvalue: function and problem use different meshes");
  const SimplicialMesh &mesh = *u.mesh();
  const int nk = mesh.nodes_per_element();
  double pot = 0.0, quartic = 0.0, den = 0.0;
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    auto nodes = mesh.element(e);
    double lv = 0.0, lq = 0.0, ld = 0.0;
    for (int j = 0; j < nk; ++j) {
      const double x = u(nodes[static_cast<std::size_t>(j)]);
      const double x2 = x * x;
      lv += data.potential_values[e * nk + j] * x2;
      lq += x2 * x2;
      ld += x2;
    }
    const double w = mesh.element_volume(e) / nk;
    pot += w * lv;
    quartic += w * lq;
    den += w * ld;
  }
  if (!(den > 0.0)) throw std::invalid_argument("discrete_eigenvalue: zero function");
  // Evaluated on the l-normalized copy of u.
  return (gradient_energy(u) + pot) / den + data.kappa * quartic / (den * den);
}

Residual residual(const FeFunction &u, const ProblemData &data) {
  if (u.mesh() != data.mesh) throw std::invalid_argument("residual: function and problem use different meshes");
  const SimplicialMesh &mesh = *data.mesh;
  const double norm = lumped_norm(u);
  if (!(norm > 0.0)) throw std::invalid_argument("residual: zero function");
  const Eigen::VectorXd x = u.interior_values() / norm;

  const SparseSpdMatrix s = assemble_stiffness(mesh);
  const LumpedDiagonal m = assemble_lumped_mass(mesh);
  const LumpedDiagonal mv = assemble_lumped_mass(mesh, data.potential_values);
  const Eigen::VectorXd x3 = x.array().cube();
  const Eigen::VectorXd ax =
      s * x + mv.diagonal.cwiseProduct(x) + data.kappa * m.diagonal.cwiseProduct(x3);
  const double lambda = x.dot(ax) / m.quadratic_form(x);
  const Eigen::VectorXd r = ax - lambda * m.diagonal.cwiseProduct(x);
  const Eigen::VectorXd rep = r.cwiseQuotient(m.diagonal);
  const double rel = std::sqrt(m.quadratic_form(rep)) / lambda;
  return {FeFunction::from_interior(data.mesh, rep), rel};
}

double evaluate_potential(const ProblemData &data, Index element, const std::array<double, 4> &barycentric) {
  const SimplicialMesh &mesh = *data.mesh;
  if (data.potential) return data.potential(physical_point(mesh, element, barycentric), element);
  const int nk = mesh.nodes_per_element();
  double s = 0.0;
  for (int a = 0; a < nk; ++a) s += barycentric[static_cast<std::size_t>(a)] * data.potential_values[element * nk + a];
  return s;
}

double standard_energy(const FeFunction &v, const ProblemData &data, int quadrature_degree) {
  if (v.mesh() != data.mesh) throw std::invalid_argument("standard_energy: function and problem use different meshes");
  const SimplicialMesh &mesh = *v.mesh();
  const QuadratureRule &rule = checked_rule(mesh.dim(), quadrature_degree);
  double s = 0.0;
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    double local = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const auto &lam = rule.barycentric[q];
      const double x = evaluate_p1(v, e, lam);
      const double x2 = x * x;
      local += rule.weights[q] * (0.5 * evaluate_potential(data, e, lam) * x2 + 0.25 * data.kappa * x2 * x2);
    }
    s += mesh.element_volume(e) * local;
  }
  return 0.5 * gradient_energy(v) + s;
}

double quadrature_potential_inner(const FeFunction &v, const FeFunction &w, const PointPotential &potential,
                                  int quadrature_degree) {
  require_same_mesh(v, w);
  const SimplicialMesh &mesh = *v.mesh();
  const QuadratureRule &rule = simplex_rule(mesh.dim(), quadrature_degree);
  double s = 0.0;
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    double local = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const auto &lam = rule.barycentric[q];
      local += rule.weights[q] * potential(physical_point(mesh, e, lam), e) * evaluate_p1(v, e, lam) *
               evaluate_p1(w, e, lam);
    }
    s += mesh.element_volume(e) * local;
  }
  return s;
}

double quadrature_cubic_inner(const FeFunction &w, const FeFunction &v, int quadrature_degree) {
  require_same_mesh(v, w);
  const SimplicialMesh &mesh = *v.mesh();
  const QuadratureRule &rule = checked_rule(mesh.dim(), quadrature_degree);
  double s = 0.0;
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    double local = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const auto &lam = rule.barycentric[q];
      const double wq = evaluate_p1(w, e, lam);
      local += rule.weights[q] * wq * wq * wq * evaluate_p1(v, e, lam);
    }
    s += mesh.element_volume(e) * local;
  }
  return s;
}

} // namespace gpe
