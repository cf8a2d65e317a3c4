#include "gpe/baseline.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

#include "gpe/solver.hpp"

namespace gpe {

namespace {
constexpr int kQuadratureDegree = 4;
} // namespace

StandardDiscretization::StandardDiscretization(ProblemData data, const FlowConfig &config)
    : data_(std::move(data)), config_(config), assembler_(data_.mesh, kQuadratureDegree),
      mass_solver_(config.linear_solver, config.linear_solver_tol),
      solver_(config.linear_solver, config.linear_solver_tol) {
  data_.validate();
  config_.validate();
  const SimplicialMesh &mesh = *data_.mesh;
  if (mesh.num_interior() == 0) throw std::invalid_argument("mesh has no interior nodes");
  const QuadratureRule &rule = assembler_.rule();
  const Index nq = static_cast<Index>(rule.size());
  point_weights_.resize(assembler_.num_points());
  Eigen::VectorXd potential(assembler_.num_points());
  for (Index e = 0; e < mesh.num_elements(); ++e)
    for (Index q = 0; q < nq; ++q) {
      point_weights_[e * nq + q] = mesh.element_volume(e) * rule.weights[static_cast<std::size_t>(q)];
      potential[e * nq + q] = evaluate_potential(data_, e, rule.barycentric[static_cast<std::size_t>(q)]);
    }
  linear_ = assemble_stiffness(mesh).matrix() + assembler_.assemble(potential);
  linear_.makeCompressed();
  mass_ = assemble_consistent_mass(mesh).matrix();
  mass_solver_.factorize(mass_);
}

double StandardDiscretization::norm(const Eigen::VectorXd &x) const { return std::sqrt(x.dot(mass_ * x)); }

double StandardDiscretization::energy(const Eigen::VectorXd &x) const {
  const Eigen::ArrayXd v = assembler_.evaluate_interior(x).array();
  return 0.5 * x.dot(linear_ * x) + 0.25 * data_.kappa * (point_weights_.array() * v.square().square()).sum();
}

void StandardDiscretization::prepare(const Eigen::VectorXd &x) {
  x_ = x;
  values_ = assembler_.evaluate_interior(x);
  density_ = assembler_.assemble(values_.cwiseAbs2());
  applied_ = linear_ * x + data_.kappa * (density_ * x);
  lambda_ = x.dot(applied_) / x.dot(mass_ * x);
}

double StandardDiscretization::residual() const {
  const Eigen::VectorXd r = applied_ - lambda_ * (mass_ * x_);
  return std::sqrt(std::max(0.0, r.dot(mass_solver_.solve(r)))) / lambda_;
}

Eigen::VectorXd StandardDiscretization::greens() {
  const double weight = config_.greens_kappa_weight ? data_.kappa : 1.0;
  SparseMatrix system = linear_ + weight * density_;
  solver_.factorize(system);
  return solver_.solve(mass_ * x_);
}

double StandardDiscretization::pairing(const Eigen::VectorXd &x, const Eigen::VectorXd &g) const {
  return x.dot(mass_ * g);
}

RayEnergy StandardDiscretization::ray(const Eigen::VectorXd &u, const Eigen::VectorXd &g) const {
  auto a = [&](const Eigen::VectorXd &v) -> Eigen::VectorXd { return linear_ * v; };
  auto mass = [&](const Eigen::VectorXd &v) -> Eigen::VectorXd { return mass_ * v; };
  auto points = [&](const Eigen::VectorXd &v) { return assembler_.evaluate_interior(v); };
  return make_ray(u, g, a, mass, point_weights_, points, data_.kappa);
}

GroundStateSolution solve_ground_state_standard(const ProblemData &data, const FlowConfig &config,
                                                const std::optional<FeFunction> &initial) {
  data.validate();
  config.validate();
  const MeshHypotheses hyp = check_mesh_hypotheses(*data.mesh);
  if (!hyp.ok()) {
    if (config.strict_mesh) throw std::runtime_error("mesh violates the M-matrix or irreducibility hypothesis");
    std::cerr << "warning: mesh violates the M-matrix or irreducibility hypothesis\n";
  }
  const FeFunction u0 = initial ? *initial : initial_guess(data.mesh);
  if (u0.mesh() != data.mesh) throw std::invalid_argument("solve_ground_state_standard: initial guess on another mesh");
  if (!u0.in_v0()) throw std::invalid_argument("solve_ground_state_standard: initial guess violates the boundary condition");

  StandardDiscretization disc(data, config);
  const Eigen::VectorXd x0 = u0.interior_values();
  double tau = config.tau_fixed;
  if (config.step_policy == StepPolicy::paper_bound)
    tau = std::min(1.0, step_bound(data, disc.energy(x0 / disc.norm(x0))).bound);
  GroundStateSolution sol = run_flow(disc, x0, config, tau);
  sol.mesh_hypotheses_ok = hyp.ok();
  sol.method = "standard";
  return sol;
}

ReferenceComparator::ReferenceComparator(const GroundStateSolution &reference)
    : reference_(&reference), stiffness_(assemble_stiffness(*reference.u.mesh()).matrix()),
      mass_(assemble_consistent_mass(*reference.u.mesh()).matrix()) {}

ErrorReport ReferenceComparator::compare(const GroundStateSolution &coarse, bool relative) const {
  const GroundStateSolution &ref = *reference_;
  const FeFunction fine = prolongate(coarse.u, ref.u.mesh());
  const Eigen::VectorXd r = ref.u.interior_values();
  const Eigen::VectorXd e = fine.interior_values() - r;
  ErrorReport out;
  out.relative = relative;
  out.l2_error = std::sqrt(std::max(0.0, e.dot(mass_ * e)));
  out.h1_semi_error = std::sqrt(std::max(0.0, e.dot(stiffness_ * e)));
  out.energy_error = std::abs(coarse.energy_h - ref.energy_h);
  out.eigenvalue_error = std::abs(coarse.lambda_h - ref.lambda_h);
  if (relative) {
    out.l2_error /= std::sqrt(r.dot(mass_ * r));
    out.h1_semi_error /= std::sqrt(r.dot(stiffness_ * r));
    out.energy_error /= std::abs(ref.energy_h);
    out.eigenvalue_error /= std::abs(ref.lambda_h);
  }
  return out;
}

ErrorReport errors_vs_reference(const GroundStateSolution &coarse, const GroundStateSolution &reference,
                                bool relative) {
  return ReferenceComparator(reference).compare(coarse, relative);
}

} // namespace gpe
