#include "kvb/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace kvb {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MixedDimensions: return "MixedDimensions";
    case ErrorCode::NotHermitian: return "NotHermitian";
    case ErrorCode::NotOrthonormal: return "NotOrthonormal";
    case ErrorCode::Singular: return "Singular";
    case ErrorCode::NotSelfAdjoint: return "NotSelfAdjoint";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::NotExtension: return "NotExtension";
    case ErrorCode::NotInvertibleSD: return "NotInvertibleSD";
    case ErrorCode::DecompositionMismatch: return "DecompositionMismatch";
    case ErrorCode::NotInAdjointDomain: return "NotInAdjointDomain";
    case ErrorCode::NotInGap: return "NotInGap";
    case ErrorCode::ParameterNotInKernel: return "ParameterNotInKernel";
    case ErrorCode::NotUnital: return "NotUnital";
    case ErrorCode::DeficiencyExhausted: return "DeficiencyExhausted";
    case ErrorCode::IllConditionedGram: return "IllConditionedGram";
    case ErrorCode::FormNotHermitian: return "FormNotHermitian";
    case ErrorCode::GapMismatch: return "GapMismatch";
    case ErrorCode::EmptyIntersection: return "EmptyIntersection";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

// ---------------------------------------------------------------- Frame

Frame::Frame(Index ambient_dim, double tol)
    : ambient_dim_(ambient_dim), columns_(ambient_dim, 0), tol_(tol) {}

Frame::Frame(Index ambient_dim, Mat columns, double tol)
    : ambient_dim_(ambient_dim), columns_(std::move(columns)), tol_(tol) {}

Frame Frame::from_orthonormal(Mat columns, double tol, double check_tol) {
  const Index n = columns.rows();
  if (columns.cols() > n) {
    throw Error(ErrorCode::NotOrthonormal, "more columns than ambient dimension");
  }
  if (columns.cols() > 0) {
    const Mat gram = columns.adjoint() * columns;
    const double dev = max_abs(gram - Mat::Identity(gram.rows(), gram.cols()));
    if (dev > check_tol) {
      throw Error(ErrorCode::NotOrthonormal,
                  "Gram deviation " + std::to_string(dev) + " exceeds tolerance");
    }
  }
  return Frame(n, std::move(columns), tol);
}

Mat Frame::projector() const { return columns_ * columns_.adjoint(); }

Vec Frame::residual(const Vec& v) const {
  if (empty()) return v;
  Vec r = v - columns_ * (columns_.adjoint() * v);
  r -= columns_ * (columns_.adjoint() * r);
  return r;
}

// ----------------------------------------------------------- HermMatrix

HermMatrix::HermMatrix(const Mat& entries, double check_tol) {
  if (entries.rows() != entries.cols()) {
    throw Error(ErrorCode::NotHermitian, "matrix is not square");
  }
  const double scale = std::max(1.0, max_abs(entries));
  const double dev = max_abs(entries - entries.adjoint());
  if (dev > check_tol * scale) {
    throw Error(ErrorCode::NotHermitian,
                "conjugate-transpose deviation " + std::to_string(dev));
  }
  entries_ = 0.5 * (entries + entries.adjoint());
}

HermMatrix HermMatrix::diagonal(std::span<const double> values) {
  Mat m = Mat::Zero(static_cast<Index>(values.size()), static_cast<Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
  return HermMatrix(m);
}

HermMatrix HermMatrix::identity(Index n) { return HermMatrix(Mat::Identity(n, n)); }

// ------------------------------------------------------- free functions

double max_abs(const Mat& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

Frame orthonormalize(std::span<const Vec> vectors, double tol) {
  if (vectors.empty()) return Frame(0, tol);
  const Index n = vectors.front().size();
  for (const auto& v : vectors) {
    if (v.size() != n) {
      throw Error(ErrorCode::MixedDimensions, "vectors of different lengths");
    }
  }
  Mat cols(n, 0);
  for (const auto& v : vectors) {
    Vec r = v;
    // Two passes of modified Gram-Schmidt.
    for (int pass = 0; pass < 2; ++pass) {
      for (Index j = 0; j < cols.cols(); ++j) {
        r -= cols.col(j) * cols.col(j).dot(r);
      }
    }
    const double rn = r.norm();
    if (rn < tol * std::max(1.0, v.norm())) continue;
    if (cols.cols() == n) continue;
    cols.conservativeResize(n, cols.cols() + 1);
    cols.col(cols.cols() - 1) = r / rn;
  }
  return Frame::from_orthonormal(std::move(cols), tol);
}

Frame orthonormalize(const Mat& columns, double tol) {
  std::vector<Vec> vs;
  vs.reserve(static_cast<std::size_t>(columns.cols()));
  for (Index j = 0; j < columns.cols(); ++j) vs.emplace_back(columns.col(j));
  if (vs.empty()) return Frame(columns.rows(), tol);
  return orthonormalize(std::span<const Vec>(vs), tol);
}

EigenSystem hermitian_eigs(const HermMatrix& hm) {
  const Index n = hm.rows();
  Mat a = hm.entries();
  Mat v = Mat::Identity(n, n);

  const double total = a.norm();
  const double eps = std::numeric_limits<double>::epsilon();
  auto off_norm = [&] {
    double s = 0.0;
    for (Index q = 0; q < n; ++q)
      for (Index p = 0; p < q; ++p) s += std::norm(a(p, q));
    return std::sqrt(2.0 * s);
  };

  // Cyclic row-by-row sweeps. Each rotation zeroes a(p,q) by first removing
  // the phase of a(p,q) and then applying a real Jacobi rotation.
  for (int sweep = 0; sweep < 100 && n > 1; ++sweep) {
    if (off_norm() <= eps * total * 0.5) break;
    for (Index p = 0; p < n - 1; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const cplx apq = a(p, q);
        const double mag = std::abs(apq);
        if (mag <= eps * 1e-3 * total) continue;
        const cplx phase = apq / mag;
        const double app = a(p, p).real();
        const double aqq = a(q, q).real();
        const double theta = (aqq - app) / (2.0 * mag);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // G = [[c, s*phase], [-s*conj(phase), c]] on (p, q).
        const cplx gpq = s * phase;
        const cplx gqp = -s * std::conj(phase);
        for (Index k = 0; k < n; ++k) {  // a <- a G
          const cplx akp = a(k, p);
          const cplx akq = a(k, q);
          a(k, p) = akp * c + akq * gqp;
          a(k, q) = akp * gpq + akq * c;
        }
        for (Index k = 0; k < n; ++k) {  // a <- G^* a
          const cplx apk = a(p, k);
          const cplx aqk = a(q, k);
          a(p, k) = c * apk + std::conj(gqp) * aqk;
          a(q, k) = std::conj(gpq) * apk + c * aqk;
        }
        for (Index k = 0; k < n; ++k) {  // v <- v G
          const cplx vkp = v(k, p);
          const cplx vkq = v(k, q);
          v(k, p) = vkp * c + vkq * gqp;
          v(k, q) = vkp * gpq + vkq * c;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
      }
    }
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index i, Index j) { return a(i, i).real() < a(j, j).real(); });

  EigenSystem out;
  out.values.reserve(order.size());
  Mat sorted(n, n);
  for (Index k = 0; k < n; ++k) {
    out.values.push_back(a(order[k], order[k]).real());
    sorted.col(k) = v.col(order[k]);
  }
  out.vectors = Frame::from_orthonormal(std::move(sorted), kDefaultTol, 1e-10);
  return out;
}

namespace {

// Condition number from the extreme singular values; desk-scale matrices
// make the SVD affordable and it is exact where LU estimates can miss.
void check_conditioning(const Mat& m) {
  if (m.rows() == 0) return;
  Eigen::JacobiSVD<Mat> svd(m);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  if (!(smin > 1e-12 * smax)) {
    const double cond = smin > 0 ? smax / smin : INFINITY;
    throw Error(ErrorCode::Singular,
                "condition estimate " + std::to_string(cond) + " exceeds 1e12");
  }
}

}  // namespace

Mat solve(const Mat& m, const Mat& rhs) {
  if (m.rows() != m.cols() || m.rows() != rhs.rows()) {
    throw Error(ErrorCode::MixedDimensions, "solve: incompatible shapes");
  }
  if (m.rows() == 0) return rhs;
  check_conditioning(m);
  Eigen::PartialPivLU<Mat> lu(m);
  Mat x = lu.solve(rhs);
  // One step of iterative refinement.
  x += lu.solve(rhs - m * x);
  return x;
}

Vec solve(const Mat& m, const Vec& rhs) {
  Mat r = rhs;
  return solve(m, r).col(0);
}

double subspace_distance(const Frame& a, const Frame& b) {
  if (a.ambient_dim() != b.ambient_dim()) {
    throw Error(ErrorCode::MixedDimensions, "subspace_distance: ambient dimensions differ");
  }
  if (a.ambient_dim() == 0) return 0.0;
  return (a.projector() - b.projector()).norm();
}

Frame canonical_basis(const Frame& f) {
  const Index n = f.ambient_dim();
  const Index k = f.size();
  if (k == 0) return f;
  // Work in coefficient space: c_i = V^* e_i. Any orthonormal basis of C^k
  // maps to an orthonormal basis of span(V), so the selection threshold only
  // affects which directions come first, never the subspace.
  const Mat& vcols = f.columns();
  Mat accepted(k, 0);
  const double threshold = 1e-6;
  for (Index i = 0; i < n && accepted.cols() < k; ++i) {
    Vec c = vcols.row(i).adjoint();
    Vec r = c;
    for (int pass = 0; pass < 2; ++pass) {
      for (Index j = 0; j < accepted.cols(); ++j) {
        r -= accepted.col(j) * accepted.col(j).dot(r);
      }
    }
    const double rn = r.norm();
    if (rn <= threshold) continue;
    accepted.conservativeResize(k, accepted.cols() + 1);
    accepted.col(accepted.cols() - 1) = r / rn;
  }
  Mat cols = vcols * accepted;
  return Frame::from_orthonormal(std::move(cols), f.tol(), 1e-10);
}

Frame null_space(const Mat& m, double tol) {
  const Index n = m.cols();
  if (n == 0) return Frame(0, tol);
  if (m.rows() == 0) return Frame::from_orthonormal(Mat::Identity(n, n), tol);
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  const double cut = tol * std::max(1.0, smax);
  Index rank = 0;
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cut) ++rank;
  }
  Mat kernel = svd.matrixV().rightCols(n - rank);
  Frame raw = Frame::from_orthonormal(std::move(kernel), tol, 1e-10);
  return canonical_basis(raw);
}

Frame complement(const Frame& f) {
  if (f.empty()) {
    return Frame::from_orthonormal(Mat::Identity(f.ambient_dim(), f.ambient_dim()), f.tol());
  }
  return null_space(f.columns().adjoint(), f.tol());
}

Frame span_union(const Frame& a, const Frame& b, double tol) {
  if (a.ambient_dim() != b.ambient_dim()) {
    throw Error(ErrorCode::MixedDimensions, "span_union: ambient dimensions differ");
  }
  Mat both(a.ambient_dim(), a.size() + b.size());
  both << a.columns(), b.columns();
  if (both.cols() == 0) return Frame(a.ambient_dim(), tol);
  return orthonormalize(both, tol);
}

double spectral_norm(const HermMatrix& m) {
  if (m.rows() == 0) return 0.0;
  const auto eig = hermitian_eigs(m);
  return std::max(std::abs(eig.values.front()), std::abs(eig.values.back()));
}

std::vector<double> singular_values(const Mat& m) {
  if (m.size() == 0) return {};
  Eigen::JacobiSVD<Mat> svd(m);
  std::vector<double> out(svd.singularValues().data(),
                          svd.singularValues().data() + svd.singularValues().size());
  std::sort(out.begin(), out.end());
  return out;
}

Mat pseudo_solve(const Mat& m, const Mat& rhs, double tol) {
  if (m.rows() != rhs.rows()) {
    throw Error(ErrorCode::MixedDimensions, "pseudo_solve: incompatible shapes");
  }
  if (m.cols() == 0) return Mat(0, rhs.cols());
  if (m.rows() == 0) return Mat::Zero(m.cols(), rhs.cols());
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cut = tol * std::max(1.0, sv.size() ? sv(0) : 0.0);
  Mat utb = svd.matrixU().adjoint() * rhs;
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cut) {
      utb.row(i) /= sv(i);
    } else {
      utb.row(i).setZero();
    }
  }
  return svd.matrixV() * utb;
}

}  // namespace kvb
