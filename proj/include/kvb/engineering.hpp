#pragma once

// Spectral engineering: given target points lambda_n inside the gap, find a
// Birman parameter T whose extension S_T has every lambda_n as an
// eigenvalue, and certify each step of the construction numerically.
//
// The pipeline is written once against the HilbertBackend concept and runs
// unchanged on the relation model (below) and on the half-line model
// (halfline.hpp).

#include <concepts>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "kvb/kvb_core.hpp"

namespace kvb {

/// v = S-bar x + z with z in ker S*; sbar_x is S-bar x.
template <class V>
struct SbarSplit {
  V x;
  V sbar_x;
  V z;
};

template <class B>
concept HilbertBackend = requires(const B& b, const typename B::Vector& v, double lambda) {
  typename B::Vector;
  { b.inner(v, v) } -> std::convertible_to<cplx>;
  { b.zero() } -> std::convertible_to<typename B::Vector>;
  { v + v } -> std::convertible_to<typename B::Vector>;
  { v - v } -> std::convertible_to<typename B::Vector>;
  { cplx{} * v } -> std::convertible_to<typename B::Vector>;
  { b.sd_apply_inverse(v) } -> std::convertible_to<typename B::Vector>;
  { b.sd_resolvent(v, lambda) } -> std::convertible_to<typename B::Vector>;  // (S_D - lambda)^{-1} v
  { b.kernel_frame() } -> std::convertible_to<std::vector<typename B::Vector>>;
  { b.deficiency_frame(lambda) } -> std::convertible_to<std::vector<typename B::Vector>>;
  { b.sbar_decompose(v) } -> std::convertible_to<SbarSplit<typename B::Vector>>;
  { b.adjoint_residual(v, lambda) } -> std::convertible_to<double>;  // |S* v - lambda v|
  { b.domain_residual(v) } -> std::convertible_to<double>;           // distance from D(S-bar)
  { b.gap() } -> std::convertible_to<GapInterval>;
};

struct GramReport {
  HermMatrix gram;
  double condition;
};

/// T in several coordinate systems. `support` is the Gram-Schmidt
/// orthonormalization of the u_n and `matrix` is T in that basis.
template <class V>
struct EngineeredParameter {
  std::vector<V> support;
  HermMatrix matrix;
  Mat form;     // lambda_n <u_m, v_n>
  Mat t_tilde;  // lambda_n <v_m, v_n> - lambda_m lambda_n <v_m, S_D^{-1} v_n>
  Mat trep;     // T u_n = sum_m u_m trep(m, n)
  GramReport gram;
};

template <class V>
struct TargetRecord {
  double lambda;
  V v, u, x, z, f, w;
  double y_norm;
  double eigen_residual;
  double reconstruction_residual;
  double kernel_residual;   // |S* u|
  double inverse_residual;  // |v - S_D (S_D - lambda)^{-1} u|
  double split_residual;    // sbar_decompose round trip
};

template <class V>
struct EngineeringCertificate {
  std::vector<TargetRecord<V>> records;
  EngineeredParameter<V> parameter;
  std::vector<double> t_spectrum;
  Index w_dim = 0;

  double max_residual() const;
  bool passed(double tol = 1e-9) const { return max_residual() < tol; }
};

namespace detail {

template <class B>
using VecOf = typename B::Vector;

template <class B>
VecOf<B> combine(const B& b, std::span<const VecOf<B>> vs, const Vec& coeff) {
  VecOf<B> out = b.zero();
  for (std::size_t i = 0; i < vs.size(); ++i)
    if (coeff(Index(i)) != cplx(0.0)) out = out + coeff(Index(i)) * vs[i];
  return out;
}

template <class B>
Mat cross_gram(const B& b, std::span<const VecOf<B>> as, std::span<const VecOf<B>> bs) {
  Mat m(Index(as.size()), Index(bs.size()));
  for (std::size_t i = 0; i < as.size(); ++i)
    for (std::size_t j = 0; j < bs.size(); ++j) m(Index(i), Index(j)) = b.inner(as[i], bs[j]);
  return m;
}

template <class B>
double norm(const B& b, const VecOf<B>& v) {
  return std::sqrt(std::max(0.0, b.inner(v, v).real()));
}

[[noreturn]] void rethrow_in_stage(const char* stage, const Error& e);
void require_targets_in_gap(const GapInterval& gap, std::span<const double> targets);
GramReport gram_from_matrix(const Mat& g);
HermMatrix support_matrix(const Mat& form, const Mat& chol_upper);
Mat upper_cholesky(const Mat& g);
Vec random_unit_combination(std::mt19937_64& rng, const Mat& frame_coeffs);

}  // namespace detail

/// Orthonormal v_n with S* v_n = lambda_n v_n. Deterministic unless `seed`
/// is given, in which case each v_n is a random unit vector of the
/// admissible subspace.
template <HilbertBackend B>
std::vector<typename B::Vector> select_eigensystem(const B& b, std::span<const double> targets,
                                                   std::optional<std::uint64_t> seed = {}) {
  using V = typename B::Vector;
  detail::require_targets_in_gap(b.gap(), targets);
  std::optional<std::mt19937_64> rng;
  if (seed) rng.emplace(*seed);
  std::vector<V> chosen;
  for (std::size_t n = 0; n < targets.size(); ++n) {
    const std::vector<V> def = b.deficiency_frame(targets[n]);
    const Index k = Index(def.size());
    // Coefficients alpha with <v_j, sum alpha_i def_i> = 0 for every earlier v_j.
    Frame admissible = Frame::from_orthonormal(Mat::Identity(k, k));
    if (!chosen.empty() && k > 0)
      admissible = null_space(detail::cross_gram(b, std::span<const V>(chosen), std::span<const V>(def)), 1e-8);
    if (admissible.empty())
      throw Error(ErrorCode::DeficiencyExhausted,
                  "no deficiency direction left for target " + std::to_string(n + 1) + " (lambda = " +
                      std::to_string(targets[n]) + ")");
    const Vec alpha = rng ? detail::random_unit_combination(*rng, admissible.columns())
                          : Vec(admissible.column(0));
    V v = detail::combine(b, std::span<const V>(def), alpha);
    const double nv = detail::norm(b, v);
    chosen.push_back(cplx(1.0 / nv) * v);
  }
  return chosen;
}

/// u = (S_D - lambda) S_D^{-1} v = v - lambda S_D^{-1} v.
template <HilbertBackend B>
typename B::Vector lift_to_kernel(const B& b, const typename B::Vector& v, double lambda) {
  using V = typename B::Vector;
  const V sv = b.sd_apply_inverse(v);
  return V(v - cplx(lambda) * sv);
}

/// Gram matrix of the u_n; throws IllConditionedGram past condition 1e8.
template <HilbertBackend B>
GramReport gram_check(const B& b, std::span<const typename B::Vector> us) {
  return detail::gram_from_matrix(detail::cross_gram(b, us, us));
}

template <HilbertBackend B>
EngineeredParameter<typename B::Vector> birman_from_targets(
    const B& b, std::span<const typename B::Vector> vs, std::span<const typename B::Vector> us,
    std::span<const double> targets) {
  using V = typename B::Vector;
  const Index s = Index(vs.size());
  if (Index(us.size()) != s || Index(targets.size()) != s)
    throw Error(ErrorCode::MixedDimensions, "v, u and target lists differ in length");
  EngineeredParameter<V> out{{}, HermMatrix(), Mat(), Mat(), Mat(), gram_check(b, us)};

  const Mat uv = detail::cross_gram(b, us, vs);
  std::vector<V> sdv;
  for (const V& v : vs) sdv.push_back(b.sd_apply_inverse(v));
  const Mat vv = detail::cross_gram(b, vs, vs);
  const Mat vsv = detail::cross_gram(b, vs, std::span<const V>(sdv));
  out.form.resize(s, s);
  out.t_tilde.resize(s, s);
  for (Index m = 0; m < s; ++m)
    for (Index n = 0; n < s; ++n) {
      out.form(m, n) = targets[n] * uv(m, n);
      out.t_tilde(m, n) = targets[n] * vv(m, n) - targets[m] * targets[n] * vsv(m, n);
    }
  const double scale = std::max(1.0, s ? max_abs(out.form) : 0.0);
  if (s && max_abs(out.form - out.form.adjoint()) >= 1e-9 * scale)
    throw Error(ErrorCode::FormNotHermitian, "lambda_n <u_m, v_n> is not Hermitian");
  if (s && max_abs(out.form - out.t_tilde) >= 1e-9 * scale)
    throw Error(ErrorCode::FormNotHermitian, "form matrix disagrees with the T-tilde expression");

  const Mat& g = out.gram.gram.entries();
  out.trep = s ? solve(g, out.form) : Mat(0, 0);
  const Mat c = detail::upper_cholesky(g);
  out.matrix = detail::support_matrix(out.form, c);
  // q_j = sum_m u_m (C^{-1})_{mj}
  const Mat cinv = s ? Mat(c.triangularView<Eigen::Upper>().solve(Mat::Identity(s, s))) : Mat(0, 0);
  for (Index j = 0; j < s; ++j) out.support.push_back(detail::combine(b, us, Vec(cinv.col(j))));
  return out;
}

/// Runs select_eigensystem, lift_to_kernel, birman_from_targets and checks
/// the proof identities for every target.
template <HilbertBackend B>
EngineeringCertificate<typename B::Vector> certify_pipeline(const B& b, std::span<const double> targets,
                                                            std::optional<std::uint64_t> seed = {}) {
  using V = typename B::Vector;
  EngineeringCertificate<V> cert;
  std::vector<V> vs, us;
  try {
    vs = select_eigensystem(b, targets, seed);
  } catch (const Error& e) {
    detail::rethrow_in_stage("select_eigensystem", e);
  }
  const Index s = Index(vs.size());
  for (Index n = 0; n < s; ++n) us.push_back(lift_to_kernel(b, vs[n], targets[n]));
  try {
    cert.parameter = birman_from_targets(b, std::span<const V>(vs), std::span<const V>(us), targets);
  } catch (const Error& e) {
    detail::rethrow_in_stage("birman_from_targets", e);
  }
  const auto& par = cert.parameter;
  cert.t_spectrum = s ? hermitian_eigs(par.matrix).values : std::vector<double>{};
  cert.w_dim = Index(b.kernel_frame().size()) - s;

  const Mat& g = par.gram.gram.entries();
  for (Index n = 0; n < s; ++n) {
    const double lam = targets[n];
    TargetRecord<V> r{lam, vs[n], us[n], b.zero(), b.zero(), b.zero(), b.zero(), 0, 0, 0, 0, 0, 0};
    SbarSplit<V> split;
    try {
      split = b.sbar_decompose(vs[n]);
    } catch (const Error& e) {
      detail::rethrow_in_stage("sbar_decompose", e);
    }
    r.x = split.x;
    r.z = split.z;
    const double vnorm = std::max(1.0, detail::norm(b, vs[n]));
    r.split_residual = std::max(detail::norm(b, V(split.sbar_x + split.z - vs[n])) / vnorm,
                                std::abs(b.inner(split.z, split.sbar_x)));
    r.split_residual = std::max(r.split_residual, b.domain_residual(split.x));
    r.f = cplx(lam) * split.x;

    // P_W z = z - P_span{u} z.
    Vec uz(s);
    for (Index m = 0; m < s; ++m) uz(m) = b.inner(us[m], split.z);
    const Vec c = solve(g, uz);
    const V pw = V(split.z - detail::combine(b, std::span<const V>(us), c));
    r.w = cplx(lam) * pw;
    const V tu = detail::combine(b, std::span<const V>(us), Vec(par.trep.col(n)));
    const V y = V(tu + r.w - cplx(lam) * split.z);
    r.y_norm = detail::norm(b, y);
    r.eigen_residual = b.adjoint_residual(vs[n], lam);
    const V rebuilt = V(r.f + b.sd_apply_inverse(V(tu + r.w)) + us[n]);
    r.reconstruction_residual = detail::norm(b, V(rebuilt - vs[n]));
    r.kernel_residual = b.adjoint_residual(us[n], 0.0);
    const V back = V(us[n] + cplx(lam) * b.sd_resolvent(us[n], lam));
    r.inverse_residual = detail::norm(b, V(back - vs[n]));
    cert.records.push_back(std::move(r));
  }
  return cert;
}

template <class V>
double EngineeringCertificate<V>::max_residual() const {
  double m = 0.0;
  for (const auto& r : records)
    m = std::max({m, r.y_norm, r.eigen_residual, r.reconstruction_residual, r.kernel_residual,
                  r.inverse_residual, r.split_residual});
  return m;
}

// ------------------------------------------------------ relation backend

class RelationBackend {
 public:
  using Vector = Vec;

  explicit RelationBackend(const ExtensionProblem& p);

  cplx inner(const Vec& f, const Vec& g) const { return f.dot(g); }
  Vec zero() const { return Vec::Zero(p_->dim()); }
  Vec sd_apply_inverse(const Vec& v) const { return p_->s_d_inverse() * v; }
  Vec sd_resolvent(const Vec& v, double lambda) const;
  std::vector<Vec> kernel_frame() const;
  std::vector<Vec> deficiency_frame(double lambda) const;
  SbarSplit<Vec> sbar_decompose(const Vec& v) const;
  double adjoint_residual(const Vec& v, double lambda) const;
  double domain_residual(const Vec& x) const;
  GapInterval gap() const { return p_->gap(); }

  const ExtensionProblem& problem() const { return *p_; }

 private:
  const ExtensionProblem* p_;
};

static_assert(HilbertBackend<RelationBackend>);

struct TargetMultiplicity {
  double lambda;
  Index repeat;
  Index observed;
};

struct SpectrumRow {
  double eigenvalue;
  Index multiplicity;
  double residual;  // largest |(v, lambda v)| distance from S_T over the eigenframe
};

struct RelationEngineering {
  EngineeringCertificate<Vec> certificate;
  BirmanParameter parameter;
  SelfAdjointExtension extension;
  std::vector<SpectrumRow> spectrum;
  std::vector<TargetMultiplicity> multiplicities;

  /// Every distinct target appears with at least its repeat count.
  bool multiplicities_ok() const;
};

/// Pipeline plus assembly of S_T and its eigenpairs on the relation model.
RelationEngineering engineer(const ExtensionProblem& p, std::span<const double> targets,
                             std::optional<std::uint64_t> seed = {});

/// Converts the generic parameter to a BirmanParameter on C^N.
BirmanParameter to_birman(const ExtensionProblem& p, const EngineeredParameter<Vec>& par);

std::vector<SpectrumRow> spectrum_rows(const LinearRelation& r);
std::vector<TargetMultiplicity> target_multiplicities(std::span<const double> targets,
                                                      const std::vector<SpectrumRow>& spectrum);

// ------------------------------------------------------------ direct sums

/// Block-diagonal problem. Throws GapMismatch when the gaps do not overlap
/// in an interval containing 0.
ExtensionProblem direct_sum(std::span<const ExtensionProblem> blocks);

struct DirectSumResult {
  SelfAdjointExtension extension;
  std::vector<SpectrumRow> spectrum;
  std::vector<TargetMultiplicity> multiplicities;
  /// Observed multiplicity equals the repeat count for every target.
  bool multiplicities_exact() const;
};

/// Krein-type extension in each block at its own lambda, summed.
DirectSumResult direct_sum_engineer(std::span<const ExtensionProblem> blocks,
                                    std::span<const double> lambdas);

// --------------------------------------------------------- classical route

struct ScanEntry {
  double tau;
  Index eigenvalues_in_gap;
  double smallest_abs_eigenvalue;
  bool accepted;
};

struct ComparisonReport {
  std::vector<Vec> v;
  double symmetry_residual = 0;
  bool symmetric = false;
  double reducing_residual = 0;
  bool reduces = false;

  Frame shat_domain;  // P_{V-perp} D(S-bar)
  Mat shat_action;    // images of shat_domain columns
  Index cap_dim = 0;  // dim (D(S-bar) intersect V-perp)
  double cap_distance = 0;  // distance between shat_domain and that intersection
  GapCheck shat_gap{GapBranch::SemiInfinite, 0, 0};

  bool found = false;
  double tau = 0;
  std::vector<ScanEntry> scan;
  Mat sd_prime;  // assembled S-hat_D (+) lambda_n on v_n, when found
  double extension_residual = 0;
  bool eigenvalues_confirmed = false;
};

/// The older route: S' on D(S-bar) + span{v_n}, split off span{v_n}, then
/// look for a gap-preserving extension of the remainder by a scalar scan.
ComparisonReport classical_route(const ExtensionProblem& p, std::span<const double> targets);

// -------------------------------------------------------------- eps-nets

struct SetSpec {
  std::vector<std::pair<double, double>> intervals;  // closed
  std::vector<double> points;
};

struct NetPlan {
  std::vector<double> targets;
  double covering_radius;
};

/// Up to `count` targets from the part of `set` inside the open gap:
/// isolated points, then interval endpoints, then dyadic midpoints level by
/// level across components. Throws EmptyIntersection when nothing is left.
NetPlan net_targets(const SetSpec& set, Index count, const GapInterval& gap);

/// Largest distance from the sampled set (step <= 1e-4, plus interval ends
/// and midpoints between neighbouring targets) to the nearest target.
double covering_radius(const SetSpec& set, std::span<const double> targets,
                       const GapInterval& gap);

}  // namespace kvb
