#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace gpe {

using Index = Eigen::Index;
using Point = std::array<double, 3>;

/// Axis-aligned box [lower, upper] in d dimensions.
struct Box {
  std::vector<double> lower;
  std::vector<double> upper;

  int dim() const { return static_cast<int>(lower.size()); }
  double volume() const;
  Point center() const;
  /// Throws std::invalid_argument unless 1 <= d <= 3 and every side is positive.
  void validate() const;

  static Box cube(int dim, double a, double b);
};

/// Conforming simplicial mesh. Immutable after construction.
///
/// Elements store d+1 global node indices (unused slots are -1) and must be
/// positively oriented. Meshes produced by red_refine() keep a pointer to the
/// mesh they refine together with the parent element of every child and the
/// coarse edge (or vertex) every fine vertex was created from.
class SimplicialMesh {
public:
  using Element = std::array<Index, 4>;

  SimplicialMesh(int dim, std::vector<Point> vertices, std::vector<Element> elements,
                 std::vector<bool> boundary_mask);

  int dim() const { return dim_; }
  Index num_vertices() const { return static_cast<Index>(vertices_.size()); }
  Index num_elements() const { return static_cast<Index>(elements_.size()); }
  Index num_interior() const { return static_cast<Index>(interior_nodes_.size()); }
  int nodes_per_element() const { return dim_ + 1; }
  /// Length k = (d+1) * #elements of element-nodal vectors.
  Index element_nodal_size() const { return nodes_per_element() * num_elements(); }

  const Point &vertex(Index v) const { return vertices_[static_cast<std::size_t>(v)]; }
  const std::vector<Point> &vertices() const { return vertices_; }
  std::span<const Index> element(Index e) const {
    return {elements_[static_cast<std::size_t>(e)].data(), static_cast<std::size_t>(dim_ + 1)};
  }
  const std::vector<Element> &elements() const { return elements_; }

  bool is_boundary(Index v) const { return boundary_[static_cast<std::size_t>(v)]; }
  const std::vector<bool> &boundary_mask() const { return boundary_; }
  /// Interior enumeration of a global node, or -1 on the boundary.
  Index interior_index(Index v) const { return interior_index_[static_cast<std::size_t>(v)]; }
  Index interior_node(Index i) const { return interior_nodes_[static_cast<std::size_t>(i)]; }

  double element_volume(Index e) const { return volumes_[static_cast<std::size_t>(e)]; }
  double domain_volume() const { return domain_volume_; }
  /// Maximum element diameter.
  double h() const { return h_; }

  const std::shared_ptr<const SimplicialMesh> &parent() const { return parent_; }
  Index parent_element(Index e) const { return parent_element_[static_cast<std::size_t>(e)]; }
  /// Coarse nodes (a, b) whose midpoint is fine vertex v; a == b for retained vertices.
  std::array<Index, 2> vertex_parents(Index v) const {
    return vertex_parents_[static_cast<std::size_t>(v)];
  }

private:
  friend std::shared_ptr<const SimplicialMesh>
  red_refine(const std::shared_ptr<const SimplicialMesh> &mesh);

  int dim_;
  std::vector<Point> vertices_;
  std::vector<Element> elements_;
  std::vector<bool> boundary_;
  std::vector<Index> interior_index_;
  std::vector<Index> interior_nodes_;
  std::vector<double> volumes_;
  double domain_volume_ = 0.0;
  double h_ = 0.0;

  std::shared_ptr<const SimplicialMesh> parent_;
  std::vector<Index> parent_element_;
  std::vector<std::array<Index, 2>> vertex_parents_;
};

using MeshPtr = std::shared_ptr<const SimplicialMesh>;

/// Nodal P1 coefficient vector bound to a mesh (one value per node).
class FeFunction {
public:
  FeFunction(MeshPtr mesh, Eigen::VectorXd coeffs);

  static FeFunction zero(MeshPtr mesh);
  static FeFunction constant(MeshPtr mesh, double value);
  static FeFunction interpolate(MeshPtr mesh, const std::function<double(const Point &)> &f);
  /// Embeds interior values into V_h^0 (boundary coefficients are zero).
  static FeFunction from_interior(MeshPtr mesh, const Eigen::VectorXd &interior);

  const MeshPtr &mesh() const { return mesh_; }
  const Eigen::VectorXd &coeffs() const { return coeffs_; }
  Eigen::VectorXd &coeffs() { return coeffs_; }
  double operator()(Index node) const { return coeffs_[node]; }

  /// True if every boundary coefficient is exactly zero.
  bool in_v0() const;
  Eigen::VectorXd interior_values() const;

private:
  MeshPtr mesh_;
  Eigen::VectorXd coeffs_;
};

/// Friedrichs-Keller mesh of a box with n_per_axis cells per axis. In 2D each
/// square is split along its lower-left to upper-right diagonal; in 1D the
/// result is a uniform partition. Nodes are numbered lexicographically in
/// (y, x). Throws std::invalid_argument for d = 3 or a degenerate box.
MeshPtr friedrichs_keller(const Box &box, int n_per_axis);

/// Uniform red refinement (d <= 2). Parent vertices keep their indices and
/// edge midpoints are appended in order of sorted edge keys.
MeshPtr red_refine(const MeshPtr &mesh);

/// Applies red_refine() `times` times.
MeshPtr refine_times(MeshPtr mesh, int times);

/// Exact P1 interpolation of a coarse function onto a (repeated) refinement.
/// Throws std::invalid_argument if `fine` does not descend from v.mesh().
FeFunction prolongate(const FeFunction &v, const MeshPtr &fine);

/// Element-major vector of values at local nodes, entry e*(d+1)+j.
Eigen::VectorXd element_nodal_map(const FeFunction &v);

using ElementNodalFunction = std::function<double(Index element, int local, const Point &x)>;
Eigen::VectorXd element_nodal_map(const SimplicialMesh &mesh, const ElementNodalFunction &f);

/// Plain-text mesh format: header `d n T`, n coordinate lines, T element lines
/// (0-based node indices), then one line with the boundary node indices.
void write_mesh(std::ostream &out, const SimplicialMesh &mesh);
MeshPtr read_mesh(std::istream &in);

} // namespace gpe
