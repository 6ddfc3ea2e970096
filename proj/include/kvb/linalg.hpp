#pragma once

// Dense complex linear algebra used throughout the library: orthonormal
// frames for subspaces, a cyclic Jacobi Hermitian eigensolver, guarded
// linear solves and projector-based subspace comparison.
//
// Storage and the LU/SVD kernels come from Eigen. Everything here is a pure
// function of its arguments.

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "kvb/error.hpp"

namespace kvb {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;
using Index = Eigen::Index;

/// Rank cutoff used whenever a caller does not pass one explicitly.
inline constexpr double kDefaultTol = 1e-10;

/// Orthonormal basis of a subspace of C^n, stored as the columns of an
/// n x k matrix.
class Frame {
 public:
  explicit Frame(Index ambient_dim = 0, double tol = kDefaultTol);

  /// Wraps columns that are already orthonormal. Throws NotOrthonormal when
  /// the Gram matrix deviates from the identity by more than `check_tol`
  /// (max-entry norm).
  static Frame from_orthonormal(Mat columns, double tol = kDefaultTol,
                                double check_tol = 1e-12);

  Index ambient_dim() const noexcept { return ambient_dim_; }
  Index size() const noexcept { return columns_.cols(); }
  bool empty() const noexcept { return columns_.cols() == 0; }
  double tol() const noexcept { return tol_; }

  const Mat& columns() const noexcept { return columns_; }
  Vec column(Index i) const { return columns_.col(i); }

  /// Orthogonal projector onto the subspace.
  Mat projector() const;

  /// Component of `v` orthogonal to the subspace.
  Vec residual(const Vec& v) const;

 private:
  Frame(Index ambient_dim, Mat columns, double tol);

  Index ambient_dim_;
  Mat columns_;
  double tol_;
};

/// Square complex matrix equal to its conjugate transpose.
class HermMatrix {
 public:
  HermMatrix() = default;

  /// Validates Hermiticity (absolute max-entry deviation below
  /// `check_tol * max(1, max|entry|)`) and stores the symmetrized matrix.
  explicit HermMatrix(const Mat& entries, double check_tol = 1e-12);

  static HermMatrix diagonal(std::span<const double> values);
  static HermMatrix identity(Index n);

  Index rows() const noexcept { return entries_.rows(); }
  const Mat& entries() const noexcept { return entries_; }

 private:
  Mat entries_;
};

struct EigenSystem {
  std::vector<double> values;  // ascending
  Frame vectors;               // column i belongs to values[i]
};

Frame orthonormalize(std::span<const Vec> vectors, double tol = kDefaultTol);
Frame orthonormalize(const Mat& columns, double tol = kDefaultTol);

EigenSystem hermitian_eigs(const HermMatrix& m);

/// Solves M x = rhs. Throws Singular when the condition number of M
/// exceeds 1e12.
Mat solve(const Mat& m, const Mat& rhs);
Vec solve(const Mat& m, const Vec& rhs);

/// Frobenius norm of the difference of the two orthogonal projectors.
double subspace_distance(const Frame& a, const Frame& b);

/// Orthonormal basis of {x : m x = 0}. Singular values up to
/// `tol * max(1, sigma_max)` count as zero. The basis is canonical: it does
/// not depend on how the kernel happened to be computed (see
/// `canonical_basis`).
Frame null_space(const Mat& m, double tol = kDefaultTol);

/// Orthonormal basis of the orthogonal complement of `f`.
Frame complement(const Frame& f);

/// Deterministic orthonormal basis of span(f): the standard basis vectors
/// are projected onto the subspace in order and Gram-Schmidt accepts the
/// first ones that contribute a new direction.
Frame canonical_basis(const Frame& f);

/// Span of the columns of both frames.
Frame span_union(const Frame& a, const Frame& b, double tol = kDefaultTol);

/// Spectral norm of a Hermitian matrix (largest |eigenvalue|).
double spectral_norm(const HermMatrix& m);

/// Singular values in ascending order.
std::vector<double> singular_values(const Mat& m);

/// Least-squares / minimum-norm solution of m x = rhs via SVD, dropping
/// singular values up to `tol * max(1, sigma_max)`.
Mat pseudo_solve(const Mat& m, const Mat& rhs, double tol = kDefaultTol);

/// Maximum absolute entry.
double max_abs(const Mat& m);

}  // namespace kvb
