#pragma once

#include <optional>

#include "gpe/assembly.hpp"
#include "gpe/flow.hpp"
#include "gpe/forms.hpp"

namespace gpe {

/// Standard P1 flow: consistent mass, L2 normalization, potential and
/// nonlinearity integrated by a degree-4 simplex rule.
class StandardDiscretization final : public FlowDiscretization {
public:
  StandardDiscretization(ProblemData data, const FlowConfig &config);

  MeshPtr mesh() const override { return data_.mesh; }
  Index size() const override { return mass_.rows(); }
  double norm(const Eigen::VectorXd &x) const override;
  double energy(const Eigen::VectorXd &x) const override;
  void prepare(const Eigen::VectorXd &x) override;
  double eigenvalue() const override { return lambda_; }
  double residual() const override;
  Eigen::VectorXd greens() override;
  /// Always the consistent mass: the L2 pairing of this method.
  double pairing(const Eigen::VectorXd &x, const Eigen::VectorXd &g) const override;
  RayEnergy ray(const Eigen::VectorXd &u, const Eigen::VectorXd &g) const override;

private:
  ProblemData data_;
  FlowConfig config_;
  WeightedMassAssembler assembler_;
  Eigen::VectorXd point_weights_;
  SparseMatrix linear_;
  SparseMatrix mass_;
  mutable SpdSolver mass_solver_;
  SpdSolver solver_;
  Eigen::VectorXd x_;
  Eigen::VectorXd values_;
  SparseMatrix density_;
  Eigen::VectorXd applied_;
  double lambda_ = 0.0;
};

GroundStateSolution solve_ground_state_standard(const ProblemData &data, const FlowConfig &config = {},
                                                const std::optional<FeFunction> &initial = std::nullopt);

struct ErrorReport {
  double l2_error = 0.0;
  double h1_semi_error = 0.0;
  double energy_error = 0.0;
  double eigenvalue_error = 0.0;
  bool relative = false;
};

/// Holds the reference operators so several coarse states can be compared
/// against one reference solution.
class ReferenceComparator {
public:
  explicit ReferenceComparator(const GroundStateSolution &reference);

  /// Prolongates the coarse state to the reference mesh and compares the
  /// states as produced (no rescaling). Throws std::invalid_argument if the
  /// meshes are not nested.
  ErrorReport compare(const GroundStateSolution &coarse, bool relative = false) const;

private:
  const GroundStateSolution *reference_;
  SparseMatrix stiffness_;
  SparseMatrix mass_;
};

ErrorReport errors_vs_reference(const GroundStateSolution &coarse, const GroundStateSolution &reference,
                                bool relative = false);

} // namespace gpe
