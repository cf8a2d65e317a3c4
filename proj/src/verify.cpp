#include "gpe/verify.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "gpe/solver.hpp"

namespace gpe {

std::uint64_t Rng::split(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

PiconeResult picone_check(const SparseSpdMatrix &s, const Eigen::VectorXd &u, const Eigen::VectorXd &v) {
  if (u.size() != s.size() || v.size() != s.size()) throw std::invalid_argument("picone_check: size mismatch");
  if (!(v.array() > 0.0).all()) throw std::invalid_argument("picone_check: v must be strictly positive");
  PiconeResult r;
  r.lhs = (s * v).dot((u.array().square() / v.array()).matrix());
  r.rhs = s.quadratic_form(u);
  r.holds = r.lhs <= r.rhs + 1e-12 * std::abs(r.rhs);
  return r;
}

ConvexObjective::ConvexObjective(const ProblemData &data)
    : stiffness_(assemble_stiffness(*data.mesh)), lumped_(assemble_lumped_mass(*data.mesh).diagonal),
      lumped_potential_(assemble_lumped_mass(*data.mesh, data.potential_values).diagonal), kappa_(data.kappa) {}

double ConvexObjective::operator()(const Eigen::VectorXd &w) const {
  if (w.size() != lumped_.size()) throw std::invalid_argument("ConvexObjective: wrong length");
  if ((w.array() < 0.0).any()) throw std::invalid_argument("ConvexObjective: w must be nonnegative");
  const Eigen::VectorXd root = w.cwiseSqrt();
  return 0.5 * stiffness_.quadratic_form(root) + 0.5 * lumped_potential_.dot(w) +
         0.25 * kappa_ * lumped_.dot(w.cwiseAbs2());
}

double ConvexObjective::constraint(const Eigen::VectorXd &w) const { return lumped_.dot(w); }

MinimalityResult convex_minimality_check(const FeFunction &u, const ProblemData &data, int sample_count,
                                         std::uint64_t seed) {
  if (u.mesh() != data.mesh) throw std::invalid_argument("convex_minimality_check: mesh mismatch");
  if (sample_count < 1) throw std::invalid_argument("convex_minimality_check: need at least one sample");
  const ConvexObjective objective(data);
  Eigen::VectorXd u2 = u.interior_values().cwiseAbs2();
  u2 /= objective.constraint(u2);
  const double base = objective(u2);

  auto feasible = [&](Eigen::VectorXd w) {
    const double c = objective.constraint(w);
    if (!(c > 0.0)) throw std::invalid_argument("convex_minimality_check: sample cannot be rescaled");
    return Eigen::VectorXd(w / c);
  };

  constexpr double kSizes[] = {1e-1, 1e-2, 1e-3, 1e-4};
  MinimalityResult r;
  r.min_gap = std::numeric_limits<double>::infinity();
  for (int k = 0; k < sample_count; ++k) {
    Rng rng(Rng::split(seed, static_cast<std::uint64_t>(k)));
    Eigen::VectorXd w(u2.size());
    if (k % 2 == 0) {
      for (Index j = 0; j < w.size(); ++j) w[j] = rng.uniform();
    } else {
      const double delta = kSizes[(k / 2) % 4];
      for (Index j = 0; j < w.size(); ++j) w[j] = u2[j] * (1.0 + delta * rng.uniform(-1.0, 1.0));
    }
    r.min_gap = std::min(r.min_gap, objective(feasible(std::move(w))) - base);
  }
  r.samples = sample_count;
  r.holds = r.min_gap >= -1e-10;
  return r;
}

MinimalityResult convex_minimality_check(const GroundStateSolution &solution, const ProblemData &data,
                                         int sample_count, std::uint64_t seed) {
  return convex_minimality_check(solution.u, data, sample_count, seed);
}

bool nonneg_eigenstate_check(const std::vector<NonlinearEigenpair> &candidates, const GroundStateSolution &ground) {
  const double gnorm = lumped_norm(ground.u);
  for (const NonlinearEigenpair &c : candidates) {
    const Eigen::VectorXd x = c.u.interior_values();
    const bool one_sign = (x.array() >= 0.0).all() || (x.array() <= 0.0).all();
    if (!one_sign) continue;
    const double cnorm = lumped_norm(c.u);
    if (!(cnorm > 0.0)) return false;
    FeFunction diff = c.u;
    const double sign = lumped_inner(c.u, ground.u) < 0.0 ? -1.0 : 1.0;
    diff.coeffs() = sign * c.u.coeffs() / cnorm - ground.u.coeffs() / gnorm;
    if (lumped_norm(diff) > 1e-8) return false;
    if (std::abs(c.lambda - ground.lambda_h) > 1e-8 * std::abs(ground.lambda_h)) return false;
  }
  return true;
}

double loglog_slope(const std::vector<double> &x, const std::vector<double> &y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need at least two points");
  const double n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

LumpingErrorScan lumping_error_scan(const std::vector<MeshPtr> &hierarchy, const PointPotential &potential,
                                    const std::function<double(const Point &)> &f) {
  if (hierarchy.size() < 2) throw std::invalid_argument("lumping_error_scan: need at least two meshes");
  LumpingErrorScan scan;
  std::vector<double> hs, ev, ec;
  for (const MeshPtr &mesh : hierarchy) {
    const FeFunction v = FeFunction::interpolate(mesh, f);
    const Eigen::VectorXd weight =
        element_nodal_map(*mesh, [&](Index e, int, const Point &x) { return potential(x, e); });
    const double lv = lumped_inner(v, v, weight);
    const double qv = quadrature_potential_inner(v, v, potential, 4);
    FeFunction cube = v;
    cube.coeffs() = v.coeffs().array().cube().matrix();
    const double lc = lumped_inner(cube, v);
    const double qc = quadrature_cubic_inner(v, v, 4);
    scan.rows.push_back({mesh->h(), std::abs(lv - qv), std::abs(lc - qc)});
    hs.push_back(mesh->h());
    ev.push_back(scan.rows.back().err_potential);
    ec.push_back(scan.rows.back().err_cubic);
  }
  scan.slope_potential = loglog_slope(hs, ev);
  scan.slope_cubic = loglog_slope(hs, ec);
  return scan;
}

std::vector<LinfRow> linf_bound_scan(const std::vector<MeshPtr> &hierarchy, const PointPotential &potential,
                                     double kappa, const FlowConfig &config) {
  if (hierarchy.size() < 2) throw std::invalid_argument("linf_bound_scan: need at least two meshes");
  std::vector<LinfRow> rows;
  for (const MeshPtr &mesh : hierarchy) {
    const GroundStateSolution sol = solve_ground_state(ProblemData::make(mesh, potential, kappa), config);
    rows.push_back({mesh->h(), sol.u.coeffs().cwiseAbs().maxCoeff()});
  }
  return rows;
}

} // namespace gpe
