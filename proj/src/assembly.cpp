#include "gpe/assembly.hpp"

#include <algorithm>
#include <ostream>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include "gpe/csv.hpp"

namespace gpe {

ElementGeometry element_geometry(const SimplicialMesh &mesh, Index e) {
  const int d = mesh.dim();
  auto nodes = mesh.element(e);
  Eigen::MatrixXd b(d, d);
  const Point &p0 = mesh.vertex(nodes[0]);
  for (int c = 0; c < d; ++c) {
    const Point &pc = mesh.vertex(nodes[static_cast<std::size_t>(c + 1)]);
    for (int r = 0; r < d; ++r) b(r, c) = pc[static_cast<std::size_t>(r)] - p0[static_cast<std::size_t>(r)];
  }
  // Rows of B^{-1} are the gradients of lambda_1..lambda_d.
  const Eigen::MatrixXd binv = b.inverse();
  ElementGeometry g;
  g.volume = mesh.element_volume(e);
  for (int j = 1; j <= d; ++j)
    for (int r = 0; r < d; ++r) g.gradients(j, r) = binv(j - 1, r);
  for (int r = 0; r < d; ++r) g.gradients(0, r) = -g.gradients.col(r).segment(1, d).sum();
  return g;
}

Index scope_size(const SimplicialMesh &mesh, NodeScope scope) {
  return scope == NodeScope::interior ? mesh.num_interior() : mesh.num_vertices();
}

Index scope_index(const SimplicialMesh &mesh, NodeScope scope, Index v) {
  return scope == NodeScope::interior ? mesh.interior_index(v) : v;
}

SparseSpdMatrix::SparseSpdMatrix(SparseMatrix values) : values_(std::move(values)) {
  values_.makeCompressed();
  if (values_.rows() != values_.cols()) throw std::invalid_argument("SparseSpdMatrix: matrix is not square");
  const SparseMatrix t = values_.transpose();
  if (t.nonZeros() != values_.nonZeros()) throw std::invalid_argument("SparseSpdMatrix: pattern is not symmetric");
  for (Index k = 0; k < values_.outerSize(); ++k) {
    SparseMatrix::InnerIterator it(values_, k), jt(t, k);
    for (; it; ++it, ++jt) {
      if (!jt || it.index() != jt.index() || it.value() != jt.value())
        throw std::invalid_argument("SparseSpdMatrix: values are not exactly symmetric");
    }
  }
  for (Index i = 0; i < values_.rows(); ++i)
    if (!(values_.coeff(i, i) > 0.0))
      throw std::invalid_argument("SparseSpdMatrix: diagonal entry " + std::to_string(i) + " is not positive");
}

namespace {

template <class LocalFn>
SparseMatrix assemble_local(const SimplicialMesh &mesh, NodeScope scope, LocalFn local) {
  const int nk = mesh.nodes_per_element();
  const Index size = scope_size(mesh, scope);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(mesh.num_elements() * nk * nk));
  Eigen::Matrix4d ke;
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    local(e, ke);
    auto nodes = mesh.element(e);
    for (int a = 0; a < nk; ++a) {
      const Index i = scope_index(mesh, scope, nodes[static_cast<std::size_t>(a)]);
      if (i < 0) continue;
      for (int b = 0; b < nk; ++b) {
        const Index j = scope_index(mesh, scope, nodes[static_cast<std::size_t>(b)]);
        if (j < 0) continue;
        triplets.emplace_back(i, j, ke(a, b));
      }
    }
  }
  SparseMatrix m(size, size);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

} // namespace

SparseSpdMatrix assemble_stiffness(const SimplicialMesh &mesh, NodeScope scope) {
  const int nk = mesh.nodes_per_element();
  const int d = mesh.dim();
  SparseMatrix s = assemble_local(mesh, scope, [&](Index e, Eigen::Matrix4d &ke) {
    const ElementGeometry g = element_geometry(mesh, e);
    ke.setZero();
    for (int a = 0; a < nk; ++a)
      for (int b = 0; b < nk; ++b)
        ke(a, b) = g.volume * g.gradients.row(a).head(d).dot(g.gradients.row(b).head(d));
    // Enforce exact local symmetry; rounding in the dot products is order dependent.
    for (int a = 0; a < nk; ++a)
      for (int b = a + 1; b < nk; ++b) ke(b, a) = ke(a, b);
  });
  return SparseSpdMatrix(std::move(s));
}

SparseSpdMatrix assemble_consistent_mass(const SimplicialMesh &mesh, NodeScope scope) {
  const int nk = mesh.nodes_per_element();
  const int d = mesh.dim();
  const double denom = (d + 1) * (d + 2);
  SparseMatrix m = assemble_local(mesh, scope, [&](Index e, Eigen::Matrix4d &ke) {
    const double vol = mesh.element_volume(e);
    ke.setZero();
    for (int a = 0; a < nk; ++a)
      for (int b = 0; b < nk; ++b) ke(a, b) = vol * (a == b ? 2.0 : 1.0) / denom;
  });
  return SparseSpdMatrix(std::move(m));
}

LumpedDiagonal assemble_lumped_mass(const SimplicialMesh &mesh, NodeScope scope) {
  LumpedDiagonal out{Eigen::VectorXd::Zero(scope_size(mesh, scope))};
  const int nk = mesh.nodes_per_element();
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    const double w = mesh.element_volume(e) / nk;
    for (Index v : mesh.element(e)) {
      const Index i = scope_index(mesh, scope, v);
      if (i >= 0) out.diagonal[i] += w;
    }
  }
  return out;
}

LumpedDiagonal assemble_lumped_mass(const SimplicialMesh &mesh, const Eigen::VectorXd &weight, NodeScope scope,
                                    bool require_nonnegative) {
  if (weight.size() != mesh.element_nodal_size())
    throw std::invalid_argument("assemble_lumped_mass: weight length must be (d+1) * #elements");
  if (require_nonnegative && (weight.array() < 0.0).any())
    throw std::invalid_argument("assemble_lumped_mass: negative weight entry");
  LumpedDiagonal out{Eigen::VectorXd::Zero(scope_size(mesh, scope))};
  const int nk = mesh.nodes_per_element();
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    const double w = mesh.element_volume(e) / nk;
    auto nodes = mesh.element(e);
    for (int j = 0; j < nk; ++j) {
      const Index i = scope_index(mesh, scope, nodes[static_cast<std::size_t>(j)]);
      if (i >= 0) out.diagonal[i] += w * weight[e * nk + j];
    }
  }
  return out;
}

MMatrixReport is_m_matrix(const SparseMatrix &a) {
  MMatrixReport r;
  if (a.rows() != a.cols()) {
    r.reason = "not square";
    return r;
  }
  if (a.rows() == 0) {
    r.holds = true;
    return r;
  }
  const SparseMatrix t = a.transpose();
  if ((SparseMatrix(a - t)).coeffs().cwiseAbs().maxCoeff() != 0.0) {
    r.reason = "not symmetric";
    return r;
  }
  double max_diag = 0.0;
  for (Index i = 0; i < a.rows(); ++i) {
    const double dii = a.coeff(i, i);
    if (!(dii > 0.0)) {
      r.reason = "nonpositive diagonal";
      return r;
    }
    max_diag = std::max(max_diag, dii);
  }
  // Row-major scan: with symmetric values, column k of `a` is row k.
  const double tol = 1e-12 * max_diag;
  for (Index k = 0; k < a.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) {
      if (it.index() != k && it.value() > tol) {
        r.witness = std::make_pair(k, it.index());
        r.reason = "positive off-diagonal entry";
        return r;
      }
    }
  }
  Eigen::SimplicialLLT<SparseMatrix> llt(a);
  if (llt.info() != Eigen::Success) {
    r.reason = "not positive definite";
    return r;
  }
  r.holds = true;
  return r;
}

bool is_irreducible(const SparseMatrix &a) {
  const Index m = a.rows();
  if (m <= 1) return true;
  const SparseMatrix sym = SparseMatrix(a + SparseMatrix(a.transpose()));
  std::vector<char> seen(static_cast<std::size_t>(m), 0);
  std::queue<Index> queue;
  queue.push(0);
  seen[0] = 1;
  Index count = 1;
  while (!queue.empty()) {
    const Index k = queue.front();
    queue.pop();
    for (SparseMatrix::InnerIterator it(sym, k); it; ++it) {
      const Index j = it.index();
      if (j == k || it.value() == 0.0 || seen[static_cast<std::size_t>(j)]) continue;
      seen[static_cast<std::size_t>(j)] = 1;
      ++count;
      queue.push(j);
    }
  }
  return count == m;
}

void write_matrix_coo(std::ostream &out, const SparseMatrix &a) {
  const Eigen::SparseMatrix<double, Eigen::RowMajor> r = a;
  for (Index i = 0; i < r.outerSize(); ++i)
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(r, i); it; ++it)
      out << i << ' ' << it.index() << ' ' << format_shortest(it.value()) << '\n';
}

WeightedMassAssembler::WeightedMassAssembler(MeshPtr mesh, int degree)
    : mesh_(std::move(mesh)), rule_(&simplex_rule(mesh_->dim(), degree)) {
  const int nk = mesh_->nodes_per_element();
  std::vector<Eigen::Triplet<double>> triplets;
  for (Index e = 0; e < mesh_->num_elements(); ++e) {
    for (Index va : mesh_->element(e)) {
      const Index i = mesh_->interior_index(va);
      if (i < 0) continue;
      for (Index vb : mesh_->element(e)) {
        const Index j = mesh_->interior_index(vb);
        if (j >= 0) triplets.emplace_back(i, j, 1.0);
      }
    }
  }
  const Index m = mesh_->num_interior();
  pattern_.resize(m, m);
  pattern_.setFromTriplets(triplets.begin(), triplets.end());
  pattern_.makeCompressed();

  slots_.assign(static_cast<std::size_t>(mesh_->num_elements() * nk * nk), -1);
  const auto *outer = pattern_.outerIndexPtr();
  const auto *inner = pattern_.innerIndexPtr();
  for (Index e = 0; e < mesh_->num_elements(); ++e) {
    auto nodes = mesh_->element(e);
    for (int a = 0; a < nk; ++a) {
      const Index i = mesh_->interior_index(nodes[static_cast<std::size_t>(a)]);
      if (i < 0) continue;
      for (int b = 0; b < nk; ++b) {
        const Index j = mesh_->interior_index(nodes[static_cast<std::size_t>(b)]);
        if (j < 0) continue;
        const auto *first = inner + outer[j];
        const auto *last = inner + outer[j + 1];
        const auto *pos = std::lower_bound(first, last, static_cast<int>(i));
        slots_[static_cast<std::size_t>((e * nk + a) * nk + b)] = static_cast<Index>(pos - inner);
      }
    }
  }
}

Eigen::VectorXd WeightedMassAssembler::evaluate_interior(const Eigen::VectorXd &interior) const {
  const int nk = mesh_->nodes_per_element();
  const Index nq = static_cast<Index>(rule_->size());
  Eigen::VectorXd out(num_points());
  for (Index e = 0; e < mesh_->num_elements(); ++e) {
    auto nodes = mesh_->element(e);
    double vals[4] = {0.0, 0.0, 0.0, 0.0};
    for (int a = 0; a < nk; ++a) {
      const Index i = mesh_->interior_index(nodes[static_cast<std::size_t>(a)]);
      vals[a] = i < 0 ? 0.0 : interior[i];
    }
    for (Index q = 0; q < nq; ++q) {
      const auto &lam = rule_->barycentric[static_cast<std::size_t>(q)];
      double s = 0.0;
      for (int a = 0; a < nk; ++a) s += lam[static_cast<std::size_t>(a)] * vals[a];
      out[e * nq + q] = s;
    }
  }
  return out;
}

SparseMatrix WeightedMassAssembler::assemble(const Eigen::VectorXd &weight_at_points) const {
  if (weight_at_points.size() != num_points())
    throw std::invalid_argument("WeightedMassAssembler: weight vector has the wrong length");
  const int nk = mesh_->nodes_per_element();
  const Index nq = static_cast<Index>(rule_->size());
  SparseMatrix out = pattern_;
  double *values = out.valuePtr();
  std::fill(values, values + out.nonZeros(), 0.0);
  for (Index e = 0; e < mesh_->num_elements(); ++e) {
    const double vol = mesh_->element_volume(e);
    Eigen::Matrix4d ke = Eigen::Matrix4d::Zero();
    for (Index q = 0; q < nq; ++q) {
      const auto &lam = rule_->barycentric[static_cast<std::size_t>(q)];
      const double wq = vol * rule_->weights[static_cast<std::size_t>(q)] * weight_at_points[e * nq + q];
      for (int a = 0; a < nk; ++a)
        for (int b = a; b < nk; ++b) ke(a, b) += wq * lam[static_cast<std::size_t>(a)] * lam[static_cast<std::size_t>(b)];
    }
    for (int a = 0; a < nk; ++a) {
      for (int b = 0; b < nk; ++b) {
        const Index slot = slots_[static_cast<std::size_t>((e * nk + a) * nk + b)];
        if (slot >= 0) values[slot] += a <= b ? ke(a, b) : ke(b, a);
      }
    }
  }
  return out;
}

} // namespace gpe
