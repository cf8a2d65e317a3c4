#include "gpe/solver.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

namespace gpe {

namespace {

std::vector<Index> find_diagonal_slots(const SparseMatrix &a) {
  std::vector<Index> slots(static_cast<std::size_t>(a.cols()), -1);
  for (Index j = 0; j < a.outerSize(); ++j)
    for (Index p = a.outerIndexPtr()[j]; p < a.outerIndexPtr()[j + 1]; ++p)
      if (a.innerIndexPtr()[p] == j) slots[static_cast<std::size_t>(j)] = p;
  for (Index s : slots)
    if (s < 0) throw std::runtime_error("stiffness matrix lacks a diagonal entry");
  return slots;
}

/// values of `base` plus `diag` on the diagonal, written into `out` (same pattern).
void add_diagonal(const SparseMatrix &base, const std::vector<Index> &slots, const Eigen::VectorXd &diag,
                  SparseMatrix &out) {
  if (out.nonZeros() != base.nonZeros()) out = base;
  std::copy(base.valuePtr(), base.valuePtr() + base.nonZeros(), out.valuePtr());
  for (std::size_t j = 0; j < slots.size(); ++j) out.valuePtr()[slots[j]] += diag[static_cast<Index>(j)];
}

double pairwise(const Eigen::VectorXd &w, const Eigen::VectorXd &a, const Eigen::VectorXd &b) {
  return (w.array() * a.array() * b.array()).sum();
}

} // namespace

LumpedDiscretization::LumpedDiscretization(ProblemData data, const FlowConfig &config)
    : data_(std::move(data)), config_(config), solver_(config.linear_solver, config.linear_solver_tol) {
  data_.validate();
  config_.validate();
  const SimplicialMesh &mesh = *data_.mesh;
  if (mesh.num_interior() == 0) throw std::invalid_argument("mesh has no interior nodes");
  stiffness_ = assemble_stiffness(mesh).matrix();
  stiffness_.makeCompressed();
  diagonal_slots_ = find_diagonal_slots(stiffness_);
  lumped_ = assemble_lumped_mass(mesh).diagonal;
  lumped_potential_ = assemble_lumped_mass(mesh, data_.potential_values).diagonal;
  if (config_.pairing == Pairing::consistent) consistent_ = assemble_consistent_mass(mesh).matrix();
  system_ = stiffness_;
}

double LumpedDiscretization::norm(const Eigen::VectorXd &x) const {
  return std::sqrt(pairwise(lumped_, x, x));
}

double LumpedDiscretization::energy(const Eigen::VectorXd &x) const {
  const Eigen::ArrayXd x2 = x.array().square();
  return 0.5 * x.dot(stiffness_ * x) + 0.5 * (lumped_potential_.array() * x2).sum() +
         0.25 * data_.kappa * (lumped_.array() * x2.square()).sum();
}

void LumpedDiscretization::prepare(const Eigen::VectorXd &x) {
  x_ = x;
  applied_ = stiffness_ * x + lumped_potential_.cwiseProduct(x) +
             data_.kappa * lumped_.cwiseProduct(x.array().cube().matrix());
  lambda_ = x.dot(applied_) / pairwise(lumped_, x, x);
}

double LumpedDiscretization::residual() const {
  const Eigen::VectorXd r = applied_ - lambda_ * lumped_.cwiseProduct(x_);
  return std::sqrt((r.array().square() / lumped_.array()).sum()) / lambda_;
}

Eigen::VectorXd LumpedDiscretization::greens_solve(const Eigen::VectorXd &w, const Eigen::VectorXd &f) {
  const double weight = config_.greens_kappa_weight ? data_.kappa : 1.0;
  const Eigen::VectorXd diag = lumped_potential_ + weight * lumped_.cwiseProduct(w.cwiseAbs2());
  add_diagonal(stiffness_, diagonal_slots_, diag, system_);
  solver_.factorize(system_);
  return solver_.solve(lumped_.cwiseProduct(f));
}

Eigen::VectorXd LumpedDiscretization::greens() { return greens_solve(x_, x_); }

double LumpedDiscretization::pairing(const Eigen::VectorXd &x, const Eigen::VectorXd &g) const {
  if (config_.pairing == Pairing::consistent) return x.dot(consistent_ * g);
  return pairwise(lumped_, x, g);
}

RayEnergy LumpedDiscretization::ray(const Eigen::VectorXd &u, const Eigen::VectorXd &g) const {
  auto a = [&](const Eigen::VectorXd &v) -> Eigen::VectorXd {
    return stiffness_ * v + lumped_potential_.cwiseProduct(v);
  };
  auto mass = [&](const Eigen::VectorXd &v) -> Eigen::VectorXd { return lumped_.cwiseProduct(v); };
  auto nodal = [](const Eigen::VectorXd &v) -> const Eigen::VectorXd & { return v; };
  return make_ray(u, g, a, mass, lumped_, nodal, data_.kappa);
}

FeFunction initial_guess(const MeshPtr &mesh) {
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(mesh->num_interior());
  FeFunction u = FeFunction::from_interior(mesh, ones);
  const double n = lumped_norm(u);
  if (!(n > 0.0)) throw std::invalid_argument("initial_guess: mesh has no interior nodes");
  u.coeffs() /= n;
  return u;
}

FeFunction greens_solve(const FeFunction &w, const FeFunction &f, const ProblemData &data, const FlowConfig &config) {
  if (w.mesh() != data.mesh || f.mesh() != data.mesh)
    throw std::invalid_argument("greens_solve: functions and problem use different meshes");
  LumpedDiscretization disc(data, config);
  return FeFunction::from_interior(data.mesh, disc.greens_solve(w.interior_values(), f.interior_values()));
}

FeFunction flow_step(const FeFunction &u, double tau, const ProblemData &data, const FlowConfig &config) {
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("flow_step: tau must lie in (0, 1]");
  if (u.mesh() != data.mesh) throw std::invalid_argument("flow_step: function and problem use different meshes");
  LumpedDiscretization disc(data, config);
  const Eigen::VectorXd x = u.interior_values();
  disc.prepare(x);
  const Eigen::VectorXd y = (1.0 - tau) * x + tau * flow_direction(disc, x);
  return FeFunction::from_interior(data.mesh, y / disc.norm(y));
}

double adaptive_tau(const FeFunction &u, const ProblemData &data, const FlowConfig &config) {
  if (u.mesh() != data.mesh) throw std::invalid_argument("adaptive_tau: function and problem use different meshes");
  LumpedDiscretization disc(data, config);
  const Eigen::VectorXd x = u.interior_values();
  disc.prepare(x);
  return choose_tau(disc.ray(x, flow_direction(disc, x)), config.tau_min);
}

double reference_p2_mass_min_eigenvalue(int dim) {
  if (dim < 1 || dim > 3) throw std::invalid_argument("reference_p2_mass_min_eigenvalue: dimension must be 1, 2 or 3");
  using Monomial = std::array<int, 4>;
  using Polynomial = std::map<Monomial, double>;
  std::vector<Polynomial> basis;
  for (int i = 0; i <= dim; ++i) {
    Monomial sq{}, lin{};
    sq[static_cast<std::size_t>(i)] = 2;
    lin[static_cast<std::size_t>(i)] = 1;
    basis.push_back({{sq, 2.0}, {lin, -1.0}});
  }
  for (int i = 0; i <= dim; ++i)
    for (int j = i + 1; j <= dim; ++j) {
      Monomial m{};
      m[static_cast<std::size_t>(i)] = 1;
      m[static_cast<std::size_t>(j)] = 1;
      basis.push_back({{m, 4.0}});
    }
  double factorial = 1.0;
  for (int k = 2; k <= dim; ++k) factorial *= k;
  const double volume = 1.0 / factorial;
  const Index n = static_cast<Index>(basis.size());
  Eigen::MatrixXd mass(n, n);
  for (Index a = 0; a < n; ++a)
    for (Index b = 0; b < n; ++b) {
      double s = 0.0;
      for (const auto &[ma, ca] : basis[static_cast<std::size_t>(a)])
        for (const auto &[mb, cb] : basis[static_cast<std::size_t>(b)]) {
          Monomial e{};
          for (std::size_t k = 0; k < 4; ++k) e[k] = ma[k] + mb[k];
          s += ca * cb * barycentric_monomial_integral(dim, e, volume);
        }
      mass(a, b) = s;
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(mass, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

StepSizeBound step_bound(const ProblemData &data, double E0) {
  data.validate();
  if (!(E0 > 0.0)) throw std::invalid_argument("step_bound: E0 must be positive");
  const int d = data.mesh->dim();
  const double omega = data.mesh->domain_volume();
  StepSizeBound b;
  b.gamma = reference_p2_mass_min_eigenvalue(d);
  double factorial = 1.0;
  for (int k = 2; k <= d; ++k) factorial *= k;
  b.C1 = 1.0 / (b.gamma * (d + 1) * factorial);
  switch (d) {
  case 1: b.C2 = std::pow(omega, 0.75); break;
  case 2: b.C2 = 2.0 * std::pow(omega, 0.25); break;
  default: b.C2 = 4.0 * std::pow(omega, 1.0 / 12.0); break;
  }
  const double c2_4 = std::pow(b.C2, 4);
  b.bound = 2.0 * std::min(1.0 / (1.0 + data.kappa * b.C1 * c2_4), 1.0 / std::sqrt(E0));
  return b;
}

MeshHypotheses check_mesh_hypotheses(const SimplicialMesh &mesh) {
  const SparseMatrix s = assemble_stiffness(mesh).matrix();
  return {is_m_matrix(s).holds, is_irreducible(s)};
}

GroundStateSolution solve_ground_state(const ProblemData &data, const FlowConfig &config,
                                       const std::optional<FeFunction> &initial) {
  data.validate();
  config.validate();
  const MeshHypotheses hyp = check_mesh_hypotheses(*data.mesh);
  if (!hyp.ok()) {
    if (config.strict_mesh)
      throw std::runtime_error(std::string("mesh violates the ") + (hyp.m_matrix ? "irreducibility" : "M-matrix") +
                               " hypothesis");
    std::cerr << "warning: mesh stiffness is " << (hyp.m_matrix ? "" : "not an M-matrix ")
              << (hyp.irreducible ? "" : "reducible") << "; positivity is not guaranteed\n";
  }
  const FeFunction u0 = initial ? *initial : initial_guess(data.mesh);
  if (u0.mesh() != data.mesh) throw std::invalid_argument("solve_ground_state: initial guess lives on another mesh");
  if (!u0.in_v0()) throw std::invalid_argument("solve_ground_state: initial guess violates the boundary condition");

  LumpedDiscretization disc(data, config);
  double tau = config.tau_fixed;
  if (config.step_policy == StepPolicy::paper_bound) {
    FeFunction unit = u0;
    unit.coeffs() /= lumped_norm(unit);
    tau = std::min(1.0, step_bound(data, discrete_energy(unit, data)).bound);
  }
  GroundStateSolution sol = run_flow(disc, u0.interior_values(), config, tau);
  sol.mesh_hypotheses_ok = hyp.ok();
  sol.method = "lumped";
  return sol;
}

std::vector<EigenPair> linearized_eigs(const FeFunction &u, const ProblemData &data, int count) {
  if (u.mesh() != data.mesh) throw std::invalid_argument("linearized_eigs: function and problem use different meshes");
  data.validate();
  const SimplicialMesh &mesh = *data.mesh;
  const Index n = mesh.num_interior();
  if (count < 1 || count > 6 || count > n) throw std::invalid_argument("linearized_eigs: count must lie in [1, 6]");
  const double unorm = lumped_norm(u);
  if (!(unorm > 0.0)) throw std::invalid_argument("linearized_eigs: zero function");

  const Eigen::VectorXd m = assemble_lumped_mass(mesh).diagonal;
  const Eigen::VectorXd x = u.interior_values() / unorm;
  const Eigen::VectorXd diag = assemble_lumped_mass(mesh, data.potential_values).diagonal +
                               data.kappa * m.cwiseProduct(x.cwiseAbs2());
  SparseMatrix a = assemble_stiffness(mesh).matrix();
  a.makeCompressed();
  SparseMatrix system = a;
  add_diagonal(a, find_diagonal_slots(a), diag, system);

  // Symmetric form B = D^{-1/2} A D^{-1/2} with D the lumped mass.
  const Eigen::VectorXd dinv = m.cwiseSqrt().cwiseInverse();
  auto apply_b = [&](const Eigen::VectorXd &y) -> Eigen::VectorXd {
    return dinv.cwiseProduct(system * dinv.cwiseProduct(y));
  };

  Eigen::VectorXd theta;
  Eigen::MatrixXd ritz;
  constexpr double kTol = 1e-10;
  if (n <= 400) {
    Eigen::MatrixXd b = Eigen::MatrixXd(system);
    b = dinv.asDiagonal() * b * dinv.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (b + b.transpose()));
    if (eig.info() != Eigen::Success) throw std::runtime_error("linearized_eigs: dense eigensolver failed");
    theta = eig.eigenvalues().head(count);
    ritz = eig.eigenvectors().leftCols(count);
  } else {
    SpdSolver solver(LinearSolverKind::automatic, 1e-13);
    solver.factorize(system);
    auto apply_binv = [&](const Eigen::VectorXd &y) -> Eigen::VectorXd {
      return dinv.cwiseInverse().cwiseProduct(solver.solve(dinv.cwiseInverse().cwiseProduct(y)));
    };
    const Index max_basis = std::min<Index>(n, std::max<Index>(40, 6 * count));
    const Index keep = std::min<Index>(max_basis - 1, count + 4);
    std::mt19937_64 rng(0x5eed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    auto random_vector = [&] {
      Eigen::VectorXd v(n);
      for (Index i = 0; i < n; ++i) v[i] = dist(rng);
      return v;
    };
    Eigen::MatrixXd basis(n, max_basis);
    Index k = 0;
    Eigen::VectorXd next = random_vector();
    bool done = false;
    for (int restart = 0; restart < 200 && !done; ++restart) {
      while (k < max_basis) {
        Eigen::VectorXd w = next;
        const double before = w.norm();
        for (int pass = 0; pass < 2; ++pass) w -= basis.leftCols(k) * (basis.leftCols(k).transpose() * w);
        if (w.norm() <= 1e-10 * before) {
          next = random_vector();
          continue;
        }
        basis.col(k) = w / w.norm();
        next = apply_binv(basis.col(k));
        ++k;
      }
      Eigen::MatrixXd bv(n, max_basis);
      for (Index j = 0; j < max_basis; ++j) bv.col(j) = apply_b(basis.col(j));
      Eigen::MatrixXd h = basis.transpose() * bv;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (h + h.transpose()));
      theta = eig.eigenvalues().head(count);
      ritz = basis * eig.eigenvectors().leftCols(count);
      const Eigen::MatrixXd z = eig.eigenvectors().leftCols(keep);
      Eigen::MatrixXd residuals = bv * eig.eigenvectors().leftCols(count) - ritz * theta.asDiagonal();
      Index worst = -1;
      for (Index j = 0; j < count; ++j)
        if (residuals.col(j).norm() > kTol * std::abs(theta[j])) {
          worst = j;
          break;
        }
      if (worst < 0) {
        done = true;
        break;
      }
      const Eigen::MatrixXd kept = basis * z;
      basis.leftCols(keep) = kept;
      k = keep;
      next = apply_binv(residuals.col(worst));
    }
    if (!done) throw std::runtime_error("linearized_eigs: eigensolver did not converge");
  }

  std::vector<EigenPair> out;
  for (Index j = 0; j < count; ++j) {
    Eigen::VectorXd v = dinv.cwiseProduct(ritz.col(j));
    v /= std::sqrt(pairwise(m, v, v));
    const double s = v.sum();
    Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    if (std::abs(s) > 1e-8 * v.lpNorm<1>() ? s < 0.0 : v[imax] < 0.0) v = -v;
    out.push_back({theta[j], FeFunction::from_interior(data.mesh, v)});
  }
  return out;
}

} // namespace gpe
