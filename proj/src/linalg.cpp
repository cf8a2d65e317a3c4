#include "gpe/linalg.hpp"

#include <algorithm>
#include <stdexcept>

#include <Eigen/IterativeLinearSolvers>
#ifdef GPE_HAVE_CHOLMOD
#include <Eigen/CholmodSupport>
#else
#include <Eigen/SparseCholesky>
#endif

namespace gpe {

struct SpdSolver::Impl {
  SparseMatrix matrix;
  bool analyzed = false;
#ifdef GPE_HAVE_CHOLMOD
  Eigen::CholmodSupernodalLLT<SparseMatrix> direct;
#else
  Eigen::SimplicialLDLT<SparseMatrix> direct;
#endif
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::IncompleteCholesky<double>> cg;
  Eigen::VectorXd previous;

  bool same_pattern(const SparseMatrix &a) const {
    if (!analyzed || a.rows() != matrix.rows() || a.nonZeros() != matrix.nonZeros()) return false;
    return std::equal(a.outerIndexPtr(), a.outerIndexPtr() + a.outerSize() + 1, matrix.outerIndexPtr()) &&
           std::equal(a.innerIndexPtr(), a.innerIndexPtr() + a.nonZeros(), matrix.innerIndexPtr());
  }
};

SpdSolver::SpdSolver(LinearSolverKind kind, double tolerance)
    : requested_(kind), tolerance_(tolerance), impl_(std::make_unique<Impl>()) {
  if (!(tolerance > 0.0)) throw std::invalid_argument("SpdSolver: tolerance must be positive");
}

SpdSolver::~SpdSolver() = default;
SpdSolver::SpdSolver(SpdSolver &&) noexcept = default;
SpdSolver &SpdSolver::operator=(SpdSolver &&) noexcept = default;

void SpdSolver::factorize(const SparseMatrix &input) {
  if (input.rows() != input.cols()) throw std::invalid_argument("SpdSolver: matrix is not square");
  SparseMatrix a = input;
  a.makeCompressed();
  resolved_ = requested_;
  if (resolved_ == LinearSolverKind::automatic)
    resolved_ = a.rows() <= kDirectSolverLimit ? LinearSolverKind::direct : LinearSolverKind::cg;

  if (resolved_ == LinearSolverKind::direct) {
    if (!impl_->same_pattern(a)) impl_->direct.analyzePattern(a);
    impl_->direct.factorize(a);
    bool ok = impl_->direct.info() == Eigen::Success;
#ifndef GPE_HAVE_CHOLMOD
    ok = ok && (impl_->direct.vectorD().array() > 0.0).all();
#endif
    if (!ok)
      throw std::runtime_error("SpdSolver: matrix is not positive definite");
    impl_->matrix = std::move(a);
  } else {
    // The iterative solver keeps a reference to its matrix.
    impl_->matrix = std::move(a);
    impl_->cg.setTolerance(tolerance_);
    impl_->cg.setMaxIterations(std::max<Index>(1000, 10 * impl_->matrix.rows()));
    impl_->cg.compute(impl_->matrix);
    if (impl_->cg.info() != Eigen::Success)
      throw std::runtime_error("SpdSolver: incomplete Cholesky preconditioner failed");
    if (impl_->previous.size() != impl_->matrix.rows()) impl_->previous.resize(0);
  }
  impl_->analyzed = true;
}

Eigen::VectorXd SpdSolver::solve(const Eigen::VectorXd &b) {
  if (!impl_->analyzed) throw std::runtime_error("SpdSolver: solve before factorize");
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    last_residual_ = 0.0;
    return Eigen::VectorXd::Zero(b.size());
  }
  Eigen::VectorXd x;
  if (resolved_ == LinearSolverKind::direct) {
    x = impl_->direct.solve(b);
    // Two rounds of iterative refinement tighten the backward error.
    for (int k = 0; k < 2; ++k) {
      const Eigen::VectorXd r = b - impl_->matrix * x;
      if (r.norm() <= tolerance_ * bnorm) break;
      x += impl_->direct.solve(r);
    }
  } else {
    if (impl_->previous.size() == b.size())
      x = impl_->cg.solveWithGuess(b, impl_->previous);
    else
      x = impl_->cg.solve(b);
    if (impl_->cg.info() != Eigen::Success)
      throw std::runtime_error("SpdSolver: conjugate gradients did not reach the requested tolerance");
    impl_->previous = x;
  }
  last_residual_ = (b - impl_->matrix * x).norm() / bnorm;
  return x;
}

} // namespace gpe
