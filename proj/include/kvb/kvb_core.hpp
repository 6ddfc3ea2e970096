#pragma once

// Extension problems for gapped symmetric operators and the
// Krein-Visik-Birman calculus on them.
//
// Finite-dimensional model. S is given by an orthonormal frame of its
// domain D and the images of the frame columns; the closure S-bar is S
// itself. The distinguished extension S_D is stored as a full invertible
// Hermitian matrix. In finite dimension the requirement that D(S_D) meet
// ker S* only in zero fails vacuously (D(S_D) is everything), so nothing
// here ever splits a bare vector along
//
//     D(S*) = D(S-bar) + S_D^{-1} ker S* + ker S*.
//
// The split is carried out on the graph instead: S* is the relation
// adjoint(graph S) of dimension N + d, and its three blocks
// {(d, S d)}, {(S_D^{-1} k, k)}, {(k, 0)} are linearly independent as
// pairs because the output components force w in ran S-bar and ker S*,
// whose intersection is zero. Every formula below uses only S_D^{-1} and
// this graph-level split.

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "kvb/linalg.hpp"
#include "kvb/relations.hpp"

namespace kvb {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Open interval (a, b); a may be -infinity.
class GapInterval {
 public:
  GapInterval(double a, double b);

  double a() const noexcept { return a_; }
  double b() const noexcept { return b_; }
  bool semi_infinite() const noexcept { return a_ == kNegInf; }

  bool contains(double x) const noexcept { return x > a_ && x < b_; }
  bool closure_contains(double x) const noexcept { return x >= a_ && x <= b_; }
  GapInterval shifted(double c) const { return GapInterval(a_ + c, b_ + c); }

  /// Common part of several gaps; nullopt when empty.
  static std::optional<GapInterval> intersect(std::span<const GapInterval> gaps);

 private:
  double a_;
  double b_;
};

class ExtensionProblem {
 public:
  /// `domain_basis` columns span D(S) (any basis; it is orthonormalized and
  /// `action` re-expressed on the orthonormal frame). Invariants are not
  /// enforced here; see validate().
  ExtensionProblem(const Mat& domain_basis, const Mat& action, const Mat& s_d, GapInterval gap);

  Index dim() const noexcept { return s_d_.rows(); }
  const Frame& domain() const noexcept { return domain_; }
  const Mat& action() const noexcept { return action_; }
  const Mat& s_d() const noexcept { return s_d_; }
  const GapInterval& gap() const noexcept { return gap_; }

  /// Orthonormal basis K of (ran S-bar)^perp = ker S*.
  const Frame& kernel_frame() const noexcept { return kernel_; }
  Index deficiency_index() const noexcept { return kernel_.size(); }

  bool sd_invertible() const noexcept { return s_d_inverse_.has_value(); }
  /// Throws NotInvertibleSD when S_D is numerically singular.
  const Mat& s_d_inverse() const;

  /// <d_i, S d_j>.
  Mat form_matrix() const { return domain_.columns().adjoint() * action_; }

  LinearRelation graph() const;

 private:
  Frame domain_;
  Mat action_;
  Mat s_d_;
  GapInterval gap_;
  Frame kernel_;
  std::optional<Mat> s_d_inverse_;
};

struct ValidationCheck {
  std::string name;
  double deviation;
  double threshold;
  bool passed;
  ErrorCode code;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  bool ok() const noexcept;
  const ValidationCheck* first_failure() const noexcept;
};

/// Measures every problem invariant without throwing.
ValidationReport inspect(const ExtensionProblem& p);
/// As inspect(), but throws the first failed check's error code.
ValidationReport validate(const ExtensionProblem& p);

enum class GapBranch { SemiInfinite, Finite };

struct GapCheck {
  GapBranch branch;
  double measured;  // smallest form eigenvalue, or smallest singular value
  double required;  // b, or (b - a) / 2
  double margin() const noexcept { return measured - required; }
  bool holds() const noexcept { return measured >= required - 1e-10; }
};

/// Gap condition for an operator given on an orthonormal domain frame.
GapCheck gap_check(const Frame& domain, const Mat& action, const GapInterval& g);
GapCheck gap_check(const ExtensionProblem& p, const GapInterval& g);
bool check_gap(const ExtensionProblem& p, const GapInterval& g);

/// inf <psi, S psi> / |psi|^2 over the domain; +infinity for an empty domain.
double lower_bound(const ExtensionProblem& p);

/// Graph of S* assembled from the three-block split. Throws
/// DecompositionMismatch when it disagrees with adjoint(graph S).
LinearRelation adjoint_relation(const ExtensionProblem& p);

struct AdjointTriple {
  Vec f;  // coefficients over the domain frame
  Vec w;  // in span K
  Vec u;  // in span K
  double residual;
};

/// Unique (f, w, u) with psi = D f + S_D^{-1} w + u and phi = S D f + w.
AdjointTriple decompose(const ExtensionProblem& p, const Vec& psi, const Vec& phi);

/// {psi : (psi, z psi) in S*}. Real z must lie inside the open gap.
Frame deficiency_space(const ExtensionProblem& p, cplx z);
Index deficiency_index(const ExtensionProblem& p);

/// Self-adjoint operator T on a subspace of ker S*. The empty support is
/// the Friedrichs-type choice (beta = infinity in the unital case).
struct BirmanParameter {
  Frame support;
  HermMatrix matrix;  // in support coordinates

  static BirmanParameter friedrichs(Index ambient_dim);
  static BirmanParameter scalar(const Frame& support, double beta);
};

struct SelfAdjointExtension {
  LinearRelation relation;
  std::optional<BirmanParameter> parameter;
};

SelfAdjointExtension build_extension(const ExtensionProblem& p, const BirmanParameter& t);

struct InvertibilityReport {
  Frame kernel;    // ker S_T
  Frame t_kernel;  // ker T
  double kernel_distance;
  bool injective, surjective, invertible;
  bool t_injective, t_surjective, t_invertible;
  bool consistent() const noexcept;
};

InvertibilityReport invertibility_report(const SelfAdjointExtension& ext,
                                         double tol = kDefaultTol);

/// S* restricted to D(S-bar) + ker(S* - lambda).
SelfAdjointExtension krein_type_extension(const ExtensionProblem& p, double lambda);

/// lambda <w0, S_D (S_D - lambda)^{-1} w0> for the unit kernel vector w0;
/// +infinity when it exceeds 1e12 in magnitude or S_D - lambda is singular.
double beta_unital(const ExtensionProblem& p, double lambda);

/// Problem for S - c with S_D - c and the gap moved by -c.
ExtensionProblem shift(const ExtensionProblem& p, double c);

// ------------------------------------------------------- random instances

struct RandomProblemSpec {
  Index dim;
  Index deficiency;
  double lower;  // gap is (-inf, lower)
};

/// Draws D as a random frame of codimension d, a form on D bounded below by
/// `lower` plus a margin, a random coupling into the complement, and
/// completes S_D so that S_D >= lower. Rejection-samples until validate()
/// passes.
ExtensionProblem random_problem(std::mt19937_64& rng, const RandomProblemSpec& spec);

/// Random Birman parameter on a random subspace of ker S*; with
/// `with_kernel` one eigenvalue of T is exactly zero.
BirmanParameter random_parameter(std::mt19937_64& rng, const ExtensionProblem& p,
                                 bool with_kernel);

}  // namespace kvb
