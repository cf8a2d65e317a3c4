#pragma once

#include <optional>
#include <vector>

#include "gpe/assembly.hpp"
#include "gpe/flow.hpp"
#include "gpe/forms.hpp"

namespace gpe {

/// Mass-lumped flow: lumped normalization, diagonal nonlinear terms.
class LumpedDiscretization final : public FlowDiscretization {
public:
  LumpedDiscretization(ProblemData data, const FlowConfig &config);

  MeshPtr mesh() const override { return data_.mesh; }
  Index size() const override { return lumped_.size(); }
  double norm(const Eigen::VectorXd &x) const override;
  double energy(const Eigen::VectorXd &x) const override;
  void prepare(const Eigen::VectorXd &x) override;
  double eigenvalue() const override { return lambda_; }
  double residual() const override;
  Eigen::VectorXd greens() override;
  double pairing(const Eigen::VectorXd &x, const Eigen::VectorXd &g) const override;
  RayEnergy ray(const Eigen::VectorXd &u, const Eigen::VectorXd &g) const override;

  /// Solves (S + M(V) + c M(w^2)) x = M f with c = kappa or 1 per the config.
  Eigen::VectorXd greens_solve(const Eigen::VectorXd &w, const Eigen::VectorXd &f);

private:
  ProblemData data_;
  FlowConfig config_;
  SparseMatrix stiffness_;
  std::vector<Index> diagonal_slots_;
  Eigen::VectorXd lumped_;
  Eigen::VectorXd lumped_potential_;
  SparseMatrix consistent_;
  SparseMatrix system_;
  SpdSolver solver_;
  Eigen::VectorXd x_;
  Eigen::VectorXd applied_;
  double lambda_ = 0.0;
};

/// Constant 1 at interior nodes, l-normalized.
FeFunction initial_guess(const MeshPtr &mesh);

FeFunction greens_solve(const FeFunction &w, const FeFunction &f, const ProblemData &data,
                        const FlowConfig &config = {});
/// One normalized flow step from u with step size tau.
FeFunction flow_step(const FeFunction &u, double tau, const ProblemData &data, const FlowConfig &config = {});
/// Line-search step for u, in [tau_min, 1].
double adaptive_tau(const FeFunction &u, const ProblemData &data, const FlowConfig &config = {});

struct StepSizeBound {
  double gamma = 0.0;
  double C1 = 0.0;
  double C2 = 0.0;
  double bound = 0.0;
};

/// Smallest eigenvalue of the P2 Lagrange mass matrix on the reference
/// simplex of volume 1/d!.
double reference_p2_mass_min_eigenvalue(int dim);
StepSizeBound step_bound(const ProblemData &data, double E0);

struct MeshHypotheses {
  bool m_matrix = false;
  bool irreducible = false;
  bool ok() const { return m_matrix && irreducible; }
};
MeshHypotheses check_mesh_hypotheses(const SimplicialMesh &mesh);

/// Ground state of the lumped problem by the adaptive (or fixed-step)
/// normalized gradient flow. Mesh hypothesis violations throw in strict mode
/// and are reported on stderr otherwise.
GroundStateSolution solve_ground_state(const ProblemData &data, const FlowConfig &config = {},
                                       const std::optional<FeFunction> &initial = std::nullopt);

struct EigenPair {
  double mu;
  FeFunction v;
};

/// Smallest `count` eigenpairs of (S + M(V) + kappa M(u^2)) x = mu M x with u
/// l-normalized. Sorted ascending, l-orthonormal, signed to a positive sum.
std::vector<EigenPair> linearized_eigs(const FeFunction &u, const ProblemData &data, int count);

} // namespace gpe
