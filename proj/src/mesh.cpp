#include "gpe/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "gpe/csv.hpp"

namespace gpe {

namespace {

double factorial(int d) {
  double f = 1.0;
  for (int i = 2; i <= d; ++i) f *= i;
  return f;
}

double signed_volume(const SimplicialMesh &mesh, std::span<const Index> nodes) {
  const int d = mesh.dim();
  Eigen::Matrix3d b = Eigen::Matrix3d::Identity();
  const Point &p0 = mesh.vertex(nodes[0]);
  for (int c = 0; c < d; ++c) {
    const Point &pc = mesh.vertex(nodes[static_cast<std::size_t>(c + 1)]);
    for (int r = 0; r < d; ++r) b(r, c) = pc[static_cast<std::size_t>(r)] - p0[static_cast<std::size_t>(r)];
  }
  return b.determinant() / factorial(d);
}

double distance(const Point &a, const Point &b) {
  double s = 0.0;
  for (std::size_t i = 0; i < 3; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

using EdgeKey = std::pair<Index, Index>;

EdgeKey edge_key(Index a, Index b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

} // namespace

double Box::volume() const {
  double v = 1.0;
  for (std::size_t i = 0; i < lower.size(); ++i) v *= upper[i] - lower[i];
  return v;
}

Point Box::center() const {
  Point c{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < lower.size(); ++i) c[i] = 0.5 * (lower[i] + upper[i]);
  return c;
}

void Box::validate() const {
  if (lower.size() != upper.size() || lower.empty() || lower.size() > 3)
    throw std::invalid_argument("Box: dimension must be 1, 2 or 3 with matching bounds");
  for (std::size_t i = 0; i < lower.size(); ++i)
    if (!(upper[i] > lower[i])) throw std::invalid_argument("Box: degenerate extent along axis " + std::to_string(i));
}

Box Box::cube(int dim, double a, double b) {
  return Box{std::vector<double>(static_cast<std::size_t>(dim), a),
             std::vector<double>(static_cast<std::size_t>(dim), b)};
}

SimplicialMesh::SimplicialMesh(int dim, std::vector<Point> vertices, std::vector<Element> elements,
                               std::vector<bool> boundary_mask)
    : dim_(dim), vertices_(std::move(vertices)), elements_(std::move(elements)),
      boundary_(std::move(boundary_mask)) {
  if (dim_ < 1 || dim_ > 3) throw std::invalid_argument("SimplicialMesh: dim must be 1, 2 or 3");
  if (boundary_.size() != vertices_.size())
    throw std::invalid_argument("SimplicialMesh: boundary mask length differs from vertex count");

  const Index n = num_vertices();
  interior_index_.assign(vertices_.size(), -1);
  for (Index v = 0; v < n; ++v) {
    if (!boundary_[static_cast<std::size_t>(v)]) {
      interior_index_[static_cast<std::size_t>(v)] = static_cast<Index>(interior_nodes_.size());
      interior_nodes_.push_back(v);
    }
  }

  volumes_.resize(elements_.size());
  for (Index e = 0; e < num_elements(); ++e) {
    auto nodes = element(e);
    for (Index v : nodes)
      if (v < 0 || v >= n) throw std::invalid_argument("SimplicialMesh: element " + std::to_string(e) + " references an invalid node");
    const double vol = signed_volume(*this, nodes);
    if (!(vol > 0.0))
      throw std::invalid_argument("SimplicialMesh: element " + std::to_string(e) +
                                  " is degenerate or negatively oriented");
    volumes_[static_cast<std::size_t>(e)] = vol;
    domain_volume_ += vol;
    for (std::size_t i = 0; i < nodes.size(); ++i)
      for (std::size_t j = i + 1; j < nodes.size(); ++j)
        h_ = std::max(h_, distance(vertex(nodes[i]), vertex(nodes[j])));
  }
}

FeFunction::FeFunction(MeshPtr mesh, Eigen::VectorXd coeffs) : mesh_(std::move(mesh)), coeffs_(std::move(coeffs)) {
  if (!mesh_) throw std::invalid_argument("FeFunction: null mesh");
  if (coeffs_.size() != mesh_->num_vertices())
    throw std::invalid_argument("FeFunction: coefficient count differs from node count");
}

FeFunction FeFunction::zero(MeshPtr mesh) {
  const Index n = mesh->num_vertices();
  return {std::move(mesh), Eigen::VectorXd::Zero(n)};
}

FeFunction FeFunction::constant(MeshPtr mesh, double value) {
  const Index n = mesh->num_vertices();
  return {std::move(mesh), Eigen::VectorXd::Constant(n, value)};
}

FeFunction FeFunction::interpolate(MeshPtr mesh, const std::function<double(const Point &)> &f) {
  Eigen::VectorXd c(mesh->num_vertices());
  for (Index v = 0; v < c.size(); ++v) c[v] = f(mesh->vertex(v));
  return {std::move(mesh), std::move(c)};
}

FeFunction FeFunction::from_interior(MeshPtr mesh, const Eigen::VectorXd &interior) {
  if (interior.size() != mesh->num_interior())
    throw std::invalid_argument("FeFunction::from_interior: length differs from interior node count");
  Eigen::VectorXd c = Eigen::VectorXd::Zero(mesh->num_vertices());
  for (Index i = 0; i < interior.size(); ++i) c[mesh->interior_node(i)] = interior[i];
  return {std::move(mesh), std::move(c)};
}

bool FeFunction::in_v0() const {
  for (Index v = 0; v < coeffs_.size(); ++v)
    if (mesh_->is_boundary(v) && coeffs_[v] != 0.0) return false;
  return true;
}

Eigen::VectorXd FeFunction::interior_values() const {
  Eigen::VectorXd out(mesh_->num_interior());
  for (Index i = 0; i < out.size(); ++i) out[i] = coeffs_[mesh_->interior_node(i)];
  return out;
}

MeshPtr friedrichs_keller(const Box &box, int n_per_axis) {
  box.validate();
  if (n_per_axis < 1) throw std::invalid_argument("friedrichs_keller: n_per_axis must be >= 1");
  const int d = box.dim();
  if (d == 3) throw std::invalid_argument("friedrichs_keller: 3D mesh generation is not supported; supply a non-obtuse tetrahedral mesh");

  const Index n = n_per_axis;
  auto coord = [&](int axis, Index i) {
    const auto a = static_cast<std::size_t>(axis);
    if (i == n) return box.upper[a];
    return box.lower[a] + (box.upper[a] - box.lower[a]) * static_cast<double>(i) / static_cast<double>(n);
  };

  std::vector<Point> vertices;
  std::vector<bool> boundary;
  std::vector<SimplicialMesh::Element> elements;
  if (d == 1) {
    for (Index i = 0; i <= n; ++i) {
      vertices.push_back({coord(0, i), 0.0, 0.0});
      boundary.push_back(i == 0 || i == n);
    }
    for (Index i = 0; i < n; ++i) elements.push_back({i, i + 1, -1, -1});
  } else {
    for (Index j = 0; j <= n; ++j) {
      for (Index i = 0; i <= n; ++i) {
        vertices.push_back({coord(0, i), coord(1, j), 0.0});
        boundary.push_back(i == 0 || i == n || j == 0 || j == n);
      }
    }
    for (Index j = 0; j < n; ++j) {
      for (Index i = 0; i < n; ++i) {
        const Index p00 = j * (n + 1) + i;
        const Index p10 = p00 + 1;
        const Index p01 = p00 + n + 1;
        const Index p11 = p01 + 1;
        elements.push_back({p00, p10, p11, -1});
        elements.push_back({p00, p11, p01, -1});
      }
    }
  }
  return std::make_shared<const SimplicialMesh>(d, std::move(vertices), std::move(elements), std::move(boundary));
}

MeshPtr red_refine(const MeshPtr &mesh) {
  if (!mesh) throw std::invalid_argument("red_refine: null mesh");
  const int d = mesh->dim();
  if (d > 2) throw std::invalid_argument("red_refine: only d <= 2 is supported");

  // Edge list with incidence counts; an edge seen once in 2D lies on the boundary.
  std::vector<EdgeKey> all_edges;
  for (Index e = 0; e < mesh->num_elements(); ++e) {
    auto nodes = mesh->element(e);
    for (std::size_t i = 0; i < nodes.size(); ++i)
      for (std::size_t j = i + 1; j < nodes.size(); ++j) all_edges.push_back(edge_key(nodes[i], nodes[j]));
  }
  std::sort(all_edges.begin(), all_edges.end());
  std::vector<EdgeKey> edges;
  std::vector<int> incidence;
  for (const auto &k : all_edges) {
    if (edges.empty() || edges.back() != k) {
      edges.push_back(k);
      incidence.push_back(1);
    } else {
      ++incidence.back();
    }
  }

  const Index n_coarse = mesh->num_vertices();
  std::vector<Point> vertices = mesh->vertices();
  std::vector<bool> boundary = mesh->boundary_mask();
  std::vector<std::array<Index, 2>> vertex_parents;
  vertex_parents.reserve(static_cast<std::size_t>(n_coarse) + edges.size());
  for (Index v = 0; v < n_coarse; ++v) vertex_parents.push_back({v, v});
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const Point &a = mesh->vertex(edges[k].first);
    const Point &b = mesh->vertex(edges[k].second);
    vertices.push_back({0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])});
    boundary.push_back(d == 2 && incidence[k] == 1);
    vertex_parents.push_back({edges[k].first, edges[k].second});
  }

  auto midpoint = [&](Index a, Index b) {
    auto it = std::lower_bound(edges.begin(), edges.end(), edge_key(a, b));
    return n_coarse + static_cast<Index>(it - edges.begin());
  };

  std::vector<SimplicialMesh::Element> elements;
  std::vector<Index> parent_element;
  for (Index e = 0; e < mesh->num_elements(); ++e) {
    auto p = mesh->element(e);
    if (d == 1) {
      const Index m = midpoint(p[0], p[1]);
      elements.push_back({p[0], m, -1, -1});
      elements.push_back({m, p[1], -1, -1});
    } else {
      const Index a = p[0], b = p[1], c = p[2];
      const Index mab = midpoint(a, b), mbc = midpoint(b, c), mca = midpoint(c, a);
      elements.push_back({a, mab, mca, -1});
      elements.push_back({mab, b, mbc, -1});
      elements.push_back({mca, mbc, c, -1});
      elements.push_back({mab, mbc, mca, -1});
    }
    for (int c = 0; c < (1 << d); ++c) parent_element.push_back(e);
  }

  auto fine = std::make_shared<SimplicialMesh>(d, std::move(vertices), std::move(elements), std::move(boundary));
  fine->parent_ = mesh;
  fine->parent_element_ = std::move(parent_element);
  fine->vertex_parents_ = std::move(vertex_parents);
  return fine;
}

MeshPtr refine_times(MeshPtr mesh, int times) {
  for (int i = 0; i < times; ++i) mesh = red_refine(mesh);
  return mesh;
}

FeFunction prolongate(const FeFunction &v, const MeshPtr &fine) {
  std::vector<const SimplicialMesh *> chain;
  for (const SimplicialMesh *m = fine.get(); m != v.mesh().get(); m = m->parent().get()) {
    if (m == nullptr) throw std::invalid_argument("prolongate: target mesh is not a refinement of the source mesh");
    chain.push_back(m);
  }
  Eigen::VectorXd c = v.coeffs();
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    const SimplicialMesh &m = **it;
    Eigen::VectorXd next(m.num_vertices());
    for (Index i = 0; i < next.size(); ++i) {
      const auto [a, b] = m.vertex_parents(i);
      next[i] = a == b ? c[a] : 0.5 * (c[a] + c[b]);
    }
    c = std::move(next);
  }
  return {fine, std::move(c)};
}

Eigen::VectorXd element_nodal_map(const FeFunction &v) {
  const SimplicialMesh &mesh = *v.mesh();
  const int nk = mesh.nodes_per_element();
  Eigen::VectorXd out(mesh.element_nodal_size());
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    auto nodes = mesh.element(e);
    for (int j = 0; j < nk; ++j) out[e * nk + j] = v(nodes[static_cast<std::size_t>(j)]);
  }
  return out;
}

Eigen::VectorXd element_nodal_map(const SimplicialMesh &mesh, const ElementNodalFunction &f) {
  const int nk = mesh.nodes_per_element();
  Eigen::VectorXd out(mesh.element_nodal_size());
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    auto nodes = mesh.element(e);
    for (int j = 0; j < nk; ++j) out[e * nk + j] = f(e, j, mesh.vertex(nodes[static_cast<std::size_t>(j)]));
  }
  return out;
}

void write_mesh(std::ostream &out, const SimplicialMesh &mesh) {
  const int d = mesh.dim();
  out << d << ' ' << mesh.num_vertices() << ' ' << mesh.num_elements() << '\n';
  for (const Point &p : mesh.vertices()) {
    for (int i = 0; i < d; ++i) out << (i ? " " : "") << format_shortest(p[static_cast<std::size_t>(i)]);
    out << '\n';
  }
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    auto nodes = mesh.element(e);
    for (std::size_t j = 0; j < nodes.size(); ++j) out << (j ? " " : "") << nodes[j];
    out << '\n';
  }
  bool first = true;
  for (Index v = 0; v < mesh.num_vertices(); ++v) {
    if (!mesh.is_boundary(v)) continue;
    out << (first ? "" : " ") << v;
    first = false;
  }
  out << '\n';
}

MeshPtr read_mesh(std::istream &in) {
  std::string line;
  auto next_line = [&](const char *what) {
    if (!std::getline(in, line)) throw std::runtime_error(std::string("read_mesh: missing ") + what);
    return std::istringstream(line);
  };
  auto parse_double = [](const std::string &tok) {
    double x = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
    if (ec != std::errc{} || ptr != tok.data() + tok.size())
      throw std::runtime_error("read_mesh: invalid coordinate '" + tok + "'");
    return x;
  };

  int d = 0;
  Index n = 0, t = 0;
  {
    auto hs = next_line("header");
    if (!(hs >> d >> n >> t) || d < 1 || d > 3 || n < 0 || t < 0)
      throw std::runtime_error("read_mesh: malformed header");
  }
  std::vector<Point> vertices(static_cast<std::size_t>(n), Point{0.0, 0.0, 0.0});
  for (auto &p : vertices) {
    auto ls = next_line("coordinates");
    for (int i = 0; i < d; ++i) {
      std::string tok;
      if (!(ls >> tok)) throw std::runtime_error("read_mesh: short coordinate line");
      p[static_cast<std::size_t>(i)] = parse_double(tok);
    }
  }
  std::vector<SimplicialMesh::Element> elements(static_cast<std::size_t>(t), SimplicialMesh::Element{-1, -1, -1, -1});
  for (auto &el : elements) {
    auto ls = next_line("elements");
    for (int i = 0; i <= d; ++i)
      if (!(ls >> el[static_cast<std::size_t>(i)])) throw std::runtime_error("read_mesh: short element line");
  }
  std::vector<bool> boundary(static_cast<std::size_t>(n), false);
  if (std::getline(in, line)) {
    std::istringstream ls(line);
    Index v = 0;
    while (ls >> v) {
      if (v < 0 || v >= n) throw std::runtime_error("read_mesh: boundary index out of range");
      boundary[static_cast<std::size_t>(v)] = true;
    }
  }
  return std::make_shared<const SimplicialMesh>(d, std::move(vertices), std::move(elements), std::move(boundary));
}

} // namespace gpe
