#include "kvb/relations.hpp"

#include <algorithm>
#include <string>

namespace kvb {

LinearRelation::LinearRelation(Index ambient_dim, Frame graph)
    : n_(ambient_dim), graph_(std::move(graph)) {
  if (graph_.ambient_dim() != 2 * n_) {
    throw Error(ErrorCode::MixedDimensions, "graph frame must live in C^{2N}");
  }
}

LinearRelation LinearRelation::zero(Index ambient_dim) {
  return LinearRelation(ambient_dim, Frame(2 * ambient_dim));
}

LinearRelation LinearRelation::full(Index ambient_dim) {
  return LinearRelation(ambient_dim,
                        Frame::from_orthonormal(Mat::Identity(2 * ambient_dim, 2 * ambient_dim)));
}

LinearRelation LinearRelation::from_pairs(const Mat& inputs, const Mat& outputs, double tol) {
  if (inputs.rows() != outputs.rows() || inputs.cols() != outputs.cols()) {
    throw Error(ErrorCode::MixedDimensions, "from_pairs: input/output shapes differ");
  }
  const Index n = inputs.rows();
  if (inputs.cols() == 0) return zero(n);
  Mat stacked(2 * n, inputs.cols());
  stacked << inputs, outputs;
  return LinearRelation(n, orthonormalize(stacked, tol));
}

LinearRelation LinearRelation::graph_of(const Mat& m) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorCode::MixedDimensions, "graph_of: matrix must be square");
  }
  return from_pairs(Mat::Identity(m.rows(), m.cols()), m);
}

double LinearRelation::pair_residual(const Vec& f, const Vec& g) const {
  if (f.size() != n_ || g.size() != n_) {
    throw Error(ErrorCode::MixedDimensions, "pair_residual: vector length mismatch");
  }
  Vec x(2 * n_);
  x << f, g;
  return graph_.residual(x).norm();
}

LinearRelation from_operator_on_subspace(const Frame& domain, const Mat& images, double tol) {
  if (images.cols() != domain.size() || images.rows() != domain.ambient_dim()) {
    throw Error(ErrorCode::MixedDimensions,
                "from_operator_on_subspace: need one image per domain column");
  }
  return LinearRelation::from_pairs(domain.columns(), images, tol);
}

LinearRelation from_operator_on_subspace(const Frame& domain, std::span<const Vec> images,
                                         double tol) {
  if (static_cast<Index>(images.size()) != domain.size()) {
    throw Error(ErrorCode::MixedDimensions,
                "from_operator_on_subspace: need one image per domain column");
  }
  Mat m(domain.ambient_dim(), domain.size());
  for (Index j = 0; j < domain.size(); ++j) {
    if (images[j].size() != domain.ambient_dim()) {
      throw Error(ErrorCode::MixedDimensions, "from_operator_on_subspace: image length");
    }
    m.col(j) = images[j];
  }
  return from_operator_on_subspace(domain, m, tol);
}

LinearRelation adjoint(const LinearRelation& r) {
  const Index n = r.ambient_dim();
  if (r.dim() == 0) return LinearRelation::full(n);
  Mat rotated(2 * n, r.dim());
  rotated << -r.outputs(), r.inputs();
  Frame jr = Frame::from_orthonormal(std::move(rotated), r.graph().tol(), 1e-10);
  return LinearRelation(n, complement(jr));
}

double selfadjoint_defect(const LinearRelation& r) {
  return subspace_distance(r.graph(), adjoint(r).graph());
}

bool is_selfadjoint(const LinearRelation& r, double tol) { return selfadjoint_defect(r) < tol; }

double containment_residual(const LinearRelation& inner, const LinearRelation& outer) {
  if (inner.ambient_dim() != outer.ambient_dim()) {
    throw Error(ErrorCode::MixedDimensions, "containment_residual: ambient mismatch");
  }
  double worst = 0.0;
  for (Index j = 0; j < inner.dim(); ++j) {
    worst = std::max(worst, outer.graph().residual(inner.graph().column(j)).norm());
  }
  return worst;
}

LinearRelation relation_sum(const LinearRelation& a, const LinearRelation& b, double tol) {
  if (a.ambient_dim() != b.ambient_dim()) {
    throw Error(ErrorCode::MixedDimensions, "relation_sum: ambient mismatch");
  }
  return LinearRelation(a.ambient_dim(), span_union(a.graph(), b.graph(), tol));
}

LinearRelation direct_sum(std::span<const LinearRelation> blocks) {
  Index n = 0;
  Index k = 0;
  for (const auto& b : blocks) {
    n += b.ambient_dim();
    k += b.dim();
  }
  Mat cols = Mat::Zero(2 * n, k);
  Index row = 0;
  Index col = 0;
  for (const auto& b : blocks) {
    const Index bn = b.ambient_dim();
    cols.block(row, col, bn, b.dim()) = b.inputs();
    cols.block(n + row, col, bn, b.dim()) = b.outputs();
    row += bn;
    col += b.dim();
  }
  return LinearRelation(n, Frame::from_orthonormal(std::move(cols), kDefaultTol, 1e-10));
}

Frame kernel(const LinearRelation& r, double tol) {
  const Index n = r.ambient_dim();
  if (r.dim() == 0) return Frame(n, tol);
  const Frame c = null_space(r.outputs(), tol);
  if (c.empty()) return Frame(n, tol);
  return orthonormalize(Mat(r.inputs() * c.columns()), tol);
}

Frame multivalued_part(const LinearRelation& r, double tol) {
  const Index n = r.ambient_dim();
  if (r.dim() == 0) return Frame(n, tol);
  const Frame c = null_space(r.inputs(), tol);
  if (c.empty()) return Frame(n, tol);
  return orthonormalize(Mat(r.outputs() * c.columns()), tol);
}

Frame range(const LinearRelation& r, double tol) {
  if (r.dim() == 0) return Frame(r.ambient_dim(), tol);
  Frame f = orthonormalize(r.outputs(), tol);
  return f.empty() ? Frame(r.ambient_dim(), tol) : canonical_basis(f);
}

Frame domain(const LinearRelation& r, double tol) {
  if (r.dim() == 0) return Frame(r.ambient_dim(), tol);
  Frame f = orthonormalize(r.inputs(), tol);
  return f.empty() ? Frame(r.ambient_dim(), tol) : canonical_basis(f);
}

Mat OperatorMultSplit::ambient_operator() const {
  return op_domain.columns() * op_matrix * op_domain.columns().adjoint();
}

OperatorMultSplit split_operator_mult(const LinearRelation& r, double tol, double sa_tol) {
  const double defect = selfadjoint_defect(r);
  if (!(defect < sa_tol)) {
    throw Error(ErrorCode::NotSelfAdjoint,
                "relation is not self-adjoint (defect " + std::to_string(defect) + ")");
  }
  OperatorMultSplit out;
  out.mult = multivalued_part(r, tol);
  out.op_domain = complement(out.mult);
  const Mat& q = out.op_domain.columns();
  if (q.cols() == 0) {
    out.op_matrix = Mat(0, 0);
    return out;
  }
  // Any preimage of q_j under the input block works: preimages differ by
  // null(inputs), whose outputs lie in mult and vanish under q^*.
  const Mat pre = pseudo_solve(r.inputs(), q, tol);
  out.op_matrix = q.adjoint() * (r.outputs() * pre);
  return out;
}

std::vector<EigenCluster> eigenpairs(const LinearRelation& r, double cluster_tol, double tol) {
  const OperatorMultSplit split = split_operator_mult(r, tol);
  std::vector<EigenCluster> out;
  if (split.op_matrix.rows() == 0) return out;
  const EigenSystem es = hermitian_eigs(HermMatrix(split.op_matrix, 1e-7));
  const Mat vecs = split.op_domain.columns() * es.vectors.columns();

  std::size_t start = 0;
  while (start < es.values.size()) {
    std::size_t end = start + 1;
    while (end < es.values.size() && es.values[end] - es.values[end - 1] <= cluster_tol) ++end;
    double mean = 0.0;
    for (std::size_t i = start; i < end; ++i) mean += es.values[i];
    mean /= static_cast<double>(end - start);
    Mat cols = vecs.middleCols(static_cast<Index>(start), static_cast<Index>(end - start));
    out.push_back({mean, Frame::from_orthonormal(std::move(cols), tol, 1e-9)});
    start = end;
  }
  return out;
}

}  // namespace kvb
