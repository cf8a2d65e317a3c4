#include "gpe/flow.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "gpe/csv.hpp"

namespace gpe {

void FlowConfig::validate() const {
  if (!(tau_min > 0.0 && tau_min <= 1.0)) throw std::invalid_argument("FlowConfig: tau_min must lie in (0, 1]");
  if (!(tau_fixed > 0.0 && tau_fixed <= 1.0)) throw std::invalid_argument("FlowConfig: tau_fixed must lie in (0, 1]");
  if (!(tol_residual > 0.0)) throw std::invalid_argument("FlowConfig: tol_residual must be positive");
  if (!(linear_solver_tol > 0.0)) throw std::invalid_argument("FlowConfig: linear_solver_tol must be positive");
  if (max_iters < 0) throw std::invalid_argument("FlowConfig: max_iters must be nonnegative");
}

void write_trace_csv(std::ostream &out, const std::vector<TraceRecord> &trace) {
  out << "iter,energy,residual,tau,min_coeff\n";
  for (const TraceRecord &r : trace)
    out << r.iter << ',' << format_full(r.energy) << ',' << format_full(r.residual) << ',' << format_full(r.tau)
        << ',' << format_full(r.min_coeff) << '\n';
}

namespace {

double ray_parameter(double tau, double alpha) { return tau / (1.0 - tau + tau * alpha); }

} // namespace

double RayEnergy::operator()(double tau) const {
  const double t = ray_parameter(tau, alpha);
  const double l = quadratic[0] + t * (2.0 * quadratic[1] + t * quadratic[2]);
  const double n = norm[0] + t * (2.0 * norm[1] + t * norm[2]);
  const double q =
      quartic[0] + t * (4.0 * quartic[1] + t * (6.0 * quartic[2] + t * (4.0 * quartic[3] + t * quartic[4])));
  return 0.5 * l / n + 0.25 * kappa * q / (n * n);
}

double RayEnergy::delta(double tau) const {
  const double t = ray_parameter(tau, alpha);
  const double n0 = norm[0], l0 = quadratic[0], q0 = quartic[0];
  const double dn = t * (2.0 * norm[1] + t * norm[2]);
  const double n = n0 + dn;
  const double dl = t * (2.0 * (quadratic[1] * n0 - l0 * norm[1]) + t * (quadratic[2] * n0 - l0 * norm[2]));
  const double dq = t * (4.0 * quartic[1] + t * (6.0 * quartic[2] + t * (4.0 * quartic[3] + t * quartic[4])));
  const double quartic_change = dq * n0 * n0 - q0 * dn * (n + n0);
  return 0.5 * dl / (n * n0) + 0.25 * kappa * quartic_change / (n * n * n0 * n0);
}

double choose_tau(const RayEnergy &ray, double tau_min) {
  constexpr int kIntervals = 64;
  int best = 0;
  double best_value = 0.0;
  for (int i = 1; i <= kIntervals; ++i) {
    const double v = ray.delta(static_cast<double>(i) / kIntervals);
    if (v < best_value) {
      best_value = v;
      best = i;
    }
  }
  double lo = static_cast<double>(std::max(best - 1, 0)) / kIntervals;
  double hi = static_cast<double>(std::min(best + 1, kIntervals)) / kIntervals;
  const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - ratio * (hi - lo), d = lo + ratio * (hi - lo);
  double fc = ray.delta(c), fd = ray.delta(d);
  while (hi - lo > 1e-6) {
    if (fc <= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - ratio * (hi - lo);
      fc = ray.delta(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + ratio * (hi - lo);
      fd = ray.delta(d);
    }
  }
  double tau = static_cast<double>(best) / kIntervals;
  const double refined = 0.5 * (lo + hi);
  if (ray.delta(refined) < best_value) tau = refined;
  return std::clamp(tau, tau_min, 1.0);
}

Eigen::VectorXd flow_direction(FlowDiscretization &disc, const Eigen::VectorXd &u) {
  Eigen::VectorXd g = disc.greens();
  const double p = disc.pairing(u, g);
  if (!(p > 0.0)) throw std::runtime_error("flow direction: (u, G u) is not positive");
  return g / p;
}

GroundStateSolution run_flow(FlowDiscretization &disc, const Eigen::VectorXd &x0, const FlowConfig &config,
                             double fixed_tau) {
  config.validate();
  if (x0.size() != disc.size()) throw std::invalid_argument("run_flow: initial vector has the wrong length");
  const double n0 = disc.norm(x0);
  if (!(n0 > 0.0)) throw std::invalid_argument("run_flow: zero initial vector");
  if (config.step_policy != StepPolicy::adaptive && !(fixed_tau > 0.0 && fixed_tau <= 1.0))
    throw std::invalid_argument("run_flow: step size must lie in (0, 1]");

  GroundStateSolution sol(FeFunction::zero(disc.mesh()));
  Eigen::VectorXd x = x0 / n0;
  disc.prepare(x);
  double energy = disc.energy(x);
  double res = disc.residual();
  auto record = [&](int iter, double tau) {
    if (config.record_trace) sol.trace.push_back({iter, energy, res, tau, x.size() ? x.minCoeff() : 0.0});
  };
  record(0, 0.0);

  Eigen::VectorXd best = x;
  double best_res = res;
  int iter = 0;
  while (res > config.tol_residual && iter < config.max_iters) {
    const Eigen::VectorXd d = flow_direction(disc, x);
    const double tau =
        config.step_policy == StepPolicy::adaptive ? choose_tau(disc.ray(x, d), config.tau_min) : fixed_tau;
    Eigen::VectorXd y = (1.0 - tau) * x + tau * d;
    x = y / disc.norm(y);
    ++iter;
    disc.prepare(x);
    energy = disc.energy(x);
    res = disc.residual();
    record(iter, tau);
    if (res < best_res) {
      best_res = res;
      best = x;
    }
  }

  sol.converged = res <= config.tol_residual;
  sol.iterations = iter;
  if (!sol.converged && best_res < res) {
    x = best;
    disc.prepare(x);
    res = best_res;
  }
  if (x.sum() < 0.0) x = -x;
  sol.final_residual = res;
  sol.lambda_h = disc.eigenvalue();
  sol.energy_h = disc.energy(x);
  sol.u = FeFunction::from_interior(disc.mesh(), x);
  return sol;
}

} // namespace gpe
