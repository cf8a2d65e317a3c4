#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gpe/linalg.hpp"
#include "gpe/mesh.hpp"

namespace gpe {

enum class StepPolicy { fixed, paper_bound, adaptive };
/// Mass matrix used in the normalization (u, G u) of the flow direction.
enum class Pairing { consistent, lumped };

struct FlowConfig {
  StepPolicy step_policy = StepPolicy::adaptive;
  /// Step for StepPolicy::fixed.
  double tau_fixed = 1.0;
  double tau_min = 1e-3;
  double tol_residual = 1e-12;
  int max_iters = 20000;
  double linear_solver_tol = 1e-13;
  bool record_trace = true;
  Pairing pairing = Pairing::consistent;
  /// Scale the density term of the Green's operator by kappa. With false the
  /// term enters with unit weight.
  bool greens_kappa_weight = true;
  LinearSolverKind linear_solver = LinearSolverKind::automatic;
  /// Fail instead of warning when the mesh violates the M-matrix or
  /// irreducibility hypotheses.
  bool strict_mesh = false;

  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

struct TraceRecord {
  int iter = 0;
  double energy = 0.0;
  double residual = 0.0;
  /// Step that produced this iterate (0 for the initial guess).
  double tau = 0.0;
  double min_coeff = 0.0;
};

struct GroundStateSolution {
  explicit GroundStateSolution(FeFunction state) : u(std::move(state)) {}

  FeFunction u;
  double lambda_h = 0.0;
  double energy_h = 0.0;
  int iterations = 0;
  std::vector<TraceRecord> trace;
  bool converged = false;
  double final_residual = 0.0;
  bool mesh_hypotheses_ok = true;
  int threads = 1;
  std::string method;
};

/// Writes `iter,energy,residual,tau,min_coeff` with 17 significant digits.
void write_trace_csv(std::ostream &out, const std::vector<TraceRecord> &trace);

/// Energy along the flow ray tau -> (1 - tau) u + tau g after normalization.
/// With g = alpha u + e, e orthogonal to u in the normalization inner
/// product, the ray point is proportional to u + t e, t = tau / (1 - tau +
/// tau alpha), and E = L(t) / (2 N(t)) + kappa/4 Q(t) / N(t)^2 with
/// L = l0 + 2 t l1 + t^2 l2, N likewise and Q = sum_k C(4,k) t^k q_k.
/// Coefficients carry powers of e, so delta() resolves energy changes far
/// below the rounding level of E itself.
struct RayEnergy {
  std::array<double, 3> quadratic{}; ///< u'Au, u'Ae, e'Ae
  std::array<double, 3> norm{};      ///< u'Mu, u'Me, e'Me
  std::array<double, 5> quartic{};   ///< sum w u^(4-k) e^k, k = 0..4
  double kappa = 0.0;
  double alpha = 1.0;

  double operator()(double tau) const;
  /// E(tau) - E(0).
  double delta(double tau) const;
};

/// Ray coefficients for the linear operator `a`, the normalization mass
/// `mass` and quartic weights `w` at points where `evaluate` maps interior
/// coefficients to point values.
template <class Op, class Mass, class Eval>
RayEnergy make_ray(const Eigen::VectorXd &u, const Eigen::VectorXd &g, const Op &a, const Mass &mass,
                   const Eigen::VectorXd &w, const Eval &evaluate, double kappa) {
  RayEnergy r;
  r.kappa = kappa;
  const Eigen::VectorXd mu = mass(u);
  r.alpha = g.dot(mu) / u.dot(mu);
  const Eigen::VectorXd e = g - r.alpha * u;
  const Eigen::VectorXd au = a(u), ae = a(e), me = mass(e);
  r.quadratic = {u.dot(au), u.dot(ae), e.dot(ae)};
  r.norm = {u.dot(mu), u.dot(me), e.dot(me)};
  const Eigen::ArrayXd p = evaluate(u).array(), q = evaluate(e).array(), m = w.array();
  r.quartic = {(m * p.square().square()).sum(), (m * p.cube() * q).sum(), (m * p.square() * q.square()).sum(),
               (m * p * q.cube()).sum(), (m * q.square().square()).sum()};
  return r;
}

/// Adaptive step: best point of a 65-point grid on [0, 1], refined by golden
/// section to 1e-6 inside the neighbouring grid cells and floored at tau_min.
double choose_tau(const RayEnergy &ray, double tau_min);

/// A discretization of the normalized gradient flow on interior coefficient
/// vectors. `prepare` fixes the current iterate; the other state-dependent
/// members refer to it.
class FlowDiscretization {
public:
  virtual ~FlowDiscretization() = default;

  virtual MeshPtr mesh() const = 0;
  virtual Index size() const = 0;
  virtual double norm(const Eigen::VectorXd &x) const = 0;
  virtual double energy(const Eigen::VectorXd &x) const = 0;

  virtual void prepare(const Eigen::VectorXd &x) = 0;
  /// Eigenvalue quotient of the prepared (normalized) iterate.
  virtual double eigenvalue() const = 0;
  virtual double residual() const = 0;
  /// Green's operator applied to the prepared iterate.
  virtual Eigen::VectorXd greens() = 0;
  virtual double pairing(const Eigen::VectorXd &x, const Eigen::VectorXd &g) const = 0;
  virtual RayEnergy ray(const Eigen::VectorXd &u, const Eigen::VectorXd &g) const = 0;
};

/// Flow direction of the prepared iterate u: G u / (u, G u).
Eigen::VectorXd flow_direction(FlowDiscretization &disc, const Eigen::VectorXd &u);

/// Runs the flow from x0 until the relative residual drops below the
/// tolerance or max_iters steps were taken. `fixed_tau` is used for the
/// fixed and paper_bound policies.
GroundStateSolution run_flow(FlowDiscretization &disc, const Eigen::VectorXd &x0, const FlowConfig &config,
                             double fixed_tau);

} // namespace gpe
