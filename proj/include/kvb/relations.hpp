#pragma once

// Linear relations in C^N: subspaces of C^N (+) C^N. They stand in for
// densely defined operators and their adjoints at desk scale. A relation is
// stored as an orthonormal frame of its graph in C^{2N}; the first N
// coordinates are the input component, the last N the output component.

#include <span>
#include <vector>

#include "kvb/linalg.hpp"

namespace kvb {

class LinearRelation {
 public:
  LinearRelation() = default;
  LinearRelation(Index ambient_dim, Frame graph);

  static LinearRelation zero(Index ambient_dim);
  static LinearRelation full(Index ambient_dim);

  /// span{(inputs_i, outputs_i)}.
  static LinearRelation from_pairs(const Mat& inputs, const Mat& outputs,
                                   double tol = kDefaultTol);

  /// Graph of an everywhere-defined matrix.
  static LinearRelation graph_of(const Mat& m);

  Index ambient_dim() const noexcept { return n_; }
  Index dim() const noexcept { return graph_.size(); }
  const Frame& graph() const noexcept { return graph_; }

  /// Input / output blocks of the graph frame (N x dim each).
  Mat inputs() const { return graph_.columns().topRows(n_); }
  Mat outputs() const { return graph_.columns().bottomRows(n_); }

  /// Distance of the pair (f, g) from the graph subspace.
  double pair_residual(const Vec& f, const Vec& g) const;

 private:
  Index n_ = 0;
  Frame graph_;
};

/// Graph of the operator that sends domain.column(i) to images.col(i).
LinearRelation from_operator_on_subspace(const Frame& domain, const Mat& images,
                                         double tol = kDefaultTol);
LinearRelation from_operator_on_subspace(const Frame& domain, std::span<const Vec> images,
                                         double tol = kDefaultTol);

/// {(u, v) : <g, u> = <f, v> for all (f, g) in r}, i.e. the orthogonal
/// complement of J r with J(f, g) = (-g, f).
LinearRelation adjoint(const LinearRelation& r);

/// Subspace distance between r and adjoint(r).
double selfadjoint_defect(const LinearRelation& r);
bool is_selfadjoint(const LinearRelation& r, double tol = 1e-9);

/// Largest distance of a graph vector of `inner` from the graph of `outer`.
double containment_residual(const LinearRelation& inner, const LinearRelation& outer);

/// Span of the two graphs.
LinearRelation relation_sum(const LinearRelation& a, const LinearRelation& b,
                            double tol = kDefaultTol);

/// Block-diagonal (orthogonal) direct sum of relations.
LinearRelation direct_sum(std::span<const LinearRelation> blocks);

struct OperatorMultSplit {
  Frame op_domain;  // orthogonal complement of the multivalued part
  Mat op_matrix;    // compression to op_domain, in op_domain coordinates
  Frame mult;       // {v : (0, v) in r}

  /// op_matrix expressed in ambient coordinates (zero on mult).
  Mat ambient_operator() const;
};

/// Splits a self-adjoint relation into its operator part and multivalued
/// part. Throws NotSelfAdjoint when the defect exceeds `sa_tol`.
OperatorMultSplit split_operator_mult(const LinearRelation& r, double tol = kDefaultTol,
                                      double sa_tol = 1e-8);

struct EigenCluster {
  double value;
  Frame frame;
  Index multiplicity() const noexcept { return frame.size(); }
};

/// Eigenvalues of a self-adjoint relation, clustered within `cluster_tol`
/// and sorted ascending. The multivalued part contributes nothing.
std::vector<EigenCluster> eigenpairs(const LinearRelation& r, double cluster_tol = 1e-8,
                                     double tol = kDefaultTol);

/// {psi : (psi, 0) in r}.
Frame kernel(const LinearRelation& r, double tol = kDefaultTol);
/// Projection of the graph onto the output component.
Frame range(const LinearRelation& r, double tol = kDefaultTol);
/// Projection of the graph onto the input component.
Frame domain(const LinearRelation& r, double tol = kDefaultTol);
/// {v : (0, v) in r}.
Frame multivalued_part(const LinearRelation& r, double tol = kDefaultTol);

}  // namespace kvb
