#pragma once

#include <iosfwd>
#include <optional>
#include <utility>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "gpe/mesh.hpp"
#include "gpe/quadrature.hpp"

namespace gpe {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Volume and barycentric gradients (row j = grad lambda_j) of one element.
struct ElementGeometry {
  double volume = 0.0;
  Eigen::Matrix<double, 4, 3> gradients = Eigen::Matrix<double, 4, 3>::Zero();
};

ElementGeometry element_geometry(const SimplicialMesh &mesh, Index e);

/// Rows/columns of assembled operators: interior nodes only, or every node.
enum class NodeScope { interior, all };

Index scope_size(const SimplicialMesh &mesh, NodeScope scope);
/// Row of global node v in the given scope, or -1 if v is not part of it.
Index scope_index(const SimplicialMesh &mesh, NodeScope scope, Index v);

/// Symmetric sparse matrix with positive diagonal. Because the stored values
/// are exactly symmetric, the compressed-column arrays double as CSR.
class SparseSpdMatrix {
public:
  SparseSpdMatrix() = default;
  /// Throws std::invalid_argument if the values are not exactly symmetric or
  /// a diagonal entry is not positive.
  explicit SparseSpdMatrix(SparseMatrix values);

  Index size() const { return values_.rows(); }
  const SparseMatrix &matrix() const { return values_; }
  double quadratic_form(const Eigen::VectorXd &v) const { return v.dot(values_ * v); }
  Eigen::VectorXd operator*(const Eigen::VectorXd &v) const { return values_ * v; }

private:
  SparseMatrix values_;
};

/// Diagonal (weighted) lumped mass matrix.
struct LumpedDiagonal {
  Eigen::VectorXd diagonal;

  Index size() const { return diagonal.size(); }
  double quadratic_form(const Eigen::VectorXd &v) const { return v.dot(diagonal.cwiseProduct(v)); }
};

SparseSpdMatrix assemble_stiffness(const SimplicialMesh &mesh, NodeScope scope = NodeScope::interior);
SparseSpdMatrix assemble_consistent_mass(const SimplicialMesh &mesh, NodeScope scope = NodeScope::interior);

/// Diagonal entry j is sum over K containing node j of |K|/(d+1) * weight(K, j).
LumpedDiagonal assemble_lumped_mass(const SimplicialMesh &mesh, NodeScope scope = NodeScope::interior);
/// `weight` is an element-nodal vector of length (d+1)*#elements. With
/// `require_nonnegative` any negative weight entry is rejected.
LumpedDiagonal assemble_lumped_mass(const SimplicialMesh &mesh, const Eigen::VectorXd &weight,
                                    NodeScope scope = NodeScope::interior, bool require_nonnegative = false);

struct MMatrixReport {
  bool holds = false;
  /// First positive off-diagonal entry in row-major order, if any.
  std::optional<std::pair<Index, Index>> witness;
  const char *reason = "";
};

/// Symmetric, positive diagonal, off-diagonals <= 1e-12 * max diagonal, and a
/// successful sparse Cholesky factorization.
MMatrixReport is_m_matrix(const SparseMatrix &a);
/// Connectivity of the graph on nonzero off-diagonal entries.
bool is_irreducible(const SparseMatrix &a);

/// Coordinate text dump (`i j value`, 0-based, sorted by row then column).
void write_matrix_coo(std::ostream &out, const SparseMatrix &a);

/// Assembles int w phi_i phi_j over interior nodes with a fixed sparsity
/// pattern, for weights given at the quadrature points of every element.
class WeightedMassAssembler {
public:
  WeightedMassAssembler(MeshPtr mesh, int degree);

  const QuadratureRule &rule() const { return *rule_; }
  Index num_points() const { return mesh_->num_elements() * static_cast<Index>(rule_->size()); }

  /// Values of the P1 function with the given interior coefficients at every
  /// quadrature point, entry e*nq + q.
  Eigen::VectorXd evaluate_interior(const Eigen::VectorXd &interior) const;

  SparseMatrix assemble(const Eigen::VectorXd &weight_at_points) const;

private:
  MeshPtr mesh_;
  const QuadratureRule *rule_;
  SparseMatrix pattern_;
  std::vector<Index> slots_;
};

} // namespace gpe
