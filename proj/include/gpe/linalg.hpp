#pragma once

#include <memory>

#include <Eigen/Core>

#include "gpe/assembly.hpp"

namespace gpe {

enum class LinearSolverKind { automatic, direct, cg };

/// Systems up to this many unknowns use the direct factorization under
/// LinearSolverKind::automatic.
inline constexpr Index kDirectSolverLimit = 300000;

/// Solver for a sequence of SPD systems that share one sparsity pattern.
/// Direct mode reuses the symbolic factorization whenever the pattern is
/// unchanged; CG mode (incomplete Cholesky preconditioner) warm starts from
/// the previous solution.
class SpdSolver {
public:
  explicit SpdSolver(LinearSolverKind kind = LinearSolverKind::automatic, double tolerance = 1e-13);
  ~SpdSolver();
  SpdSolver(SpdSolver &&) noexcept;
  SpdSolver &operator=(SpdSolver &&) noexcept;

  /// Throws std::runtime_error if the matrix is not numerically SPD.
  void factorize(const SparseMatrix &a);
  /// Throws std::runtime_error if the iterative solver does not reach the
  /// tolerance or no matrix has been factorized.
  Eigen::VectorXd solve(const Eigen::VectorXd &b);

  LinearSolverKind resolved_kind() const { return resolved_; }
  /// Relative residual ||A x - b|| / ||b|| of the last solve.
  double last_relative_residual() const { return last_residual_; }

private:
  struct Impl;
  LinearSolverKind requested_;
  LinearSolverKind resolved_ = LinearSolverKind::direct;
  double tolerance_;
  double last_residual_ = 0.0;
  std::unique_ptr<Impl> impl_;
};

} // namespace gpe
