#include "kvb/engineering.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace kvb {

namespace detail {

void rethrow_in_stage(const char* stage, const Error& e) {
  throw Error(e.code(), std::string(stage) + ": " + e.detail());
}

void require_targets_in_gap(const GapInterval& gap, std::span<const double> targets) {
  for (std::size_t i = 0; i < targets.size(); ++i)
    if (!gap.contains(targets[i]))
      throw Error(ErrorCode::NotInGap, "target " + std::to_string(i + 1) + " (" +
                                           std::to_string(targets[i]) + ") is not inside the gap");
}

GramReport gram_from_matrix(const Mat& g) {
  if (g.rows() == 0) return {HermMatrix(Mat(0, 0)), 1.0};
  const HermMatrix h(g, 1e-10);
  const auto es = hermitian_eigs(h);
  const double lo = es.values.front(), hi = es.values.back();
  if (!(lo > 1e-14 * std::max(1.0, hi)))
    throw Error(ErrorCode::IllConditionedGram,
                "Gram matrix of the u_n is singular (smallest eigenvalue " + std::to_string(lo) + ")");
  const double cond = hi / lo;
  if (cond > 1e8)
    throw Error(ErrorCode::IllConditionedGram, "Gram condition " + std::to_string(cond) + " exceeds 1e8");
  return {h, cond};
}

Mat upper_cholesky(const Mat& g) {
  if (g.rows() == 0) return Mat(0, 0);
  Eigen::LLT<Mat> llt(g);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorCode::IllConditionedGram, "Gram matrix is not positive definite");
  return llt.matrixU();
}

HermMatrix support_matrix(const Mat& form, const Mat& c) {
  const Index s = form.rows();
  if (s == 0) return HermMatrix(Mat(0, 0));
  // C^{-*} M C^{-1}
  const Mat left = c.adjoint().triangularView<Eigen::Lower>().solve(form);
  const Mat a = c.adjoint().triangularView<Eigen::Lower>().solve(Mat(left.adjoint())).adjoint();
  return HermMatrix(a, 1e-8);
}

Vec random_unit_combination(std::mt19937_64& rng, const Mat& frame_coeffs) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec c(frame_coeffs.cols());
  for (Index i = 0; i < c.size(); ++i) c(i) = cplx(g(rng), g(rng));
  Vec a = frame_coeffs * c;
  return a / a.norm();
}

}  // namespace detail

// ------------------------------------------------------ relation backend

RelationBackend::RelationBackend(const ExtensionProblem& p) : p_(&p) { (void)p.s_d_inverse(); }

Vec RelationBackend::sd_resolvent(const Vec& v, double lambda) const {
  if (lambda == 0.0) return sd_apply_inverse(v);
  const Index n = p_->dim();
  return solve(Mat(p_->s_d() - lambda * Mat::Identity(n, n)), v);
}

std::vector<Vec> RelationBackend::kernel_frame() const {
  std::vector<Vec> out;
  for (Index j = 0; j < p_->kernel_frame().size(); ++j) out.push_back(p_->kernel_frame().column(j));
  return out;
}

std::vector<Vec> RelationBackend::deficiency_frame(double lambda) const {
  const Frame f = deficiency_space(*p_, lambda);
  std::vector<Vec> out;
  for (Index j = 0; j < f.size(); ++j) out.push_back(f.column(j));
  return out;
}

SbarSplit<Vec> RelationBackend::sbar_decompose(const Vec& v) const {
  const Index m = p_->domain().size();
  if (m == 0) return {zero(), zero(), v};
  const Vec c = pseudo_solve(p_->action(), Mat(v)).col(0);
  Vec sx = p_->action() * c;
  return {p_->domain().columns() * c, sx, v - sx};
}

double RelationBackend::adjoint_residual(const Vec& v, double lambda) const {
  // S* v is determined up to D(S)^perp; the distance of lambda v from that
  // coset is |(A - lambda D)* v|.
  if (p_->domain().empty()) return 0.0;
  return ((p_->action() - lambda * p_->domain().columns()).adjoint() * v).norm();
}

double RelationBackend::domain_residual(const Vec& x) const { return p_->domain().residual(x).norm(); }

// --------------------------------------------------------- relation engineer

BirmanParameter to_birman(const ExtensionProblem& p, const EngineeredParameter<Vec>& par) {
  const Index s = Index(par.support.size());
  if (s == 0) return BirmanParameter::friedrichs(p.dim());
  Mat q(p.dim(), s);
  for (Index j = 0; j < s; ++j) q.col(j) = par.support[j];
  const Frame f = orthonormalize(q);
  if (f.size() != s)
    throw Error(ErrorCode::IllConditionedGram, "support vectors are numerically dependent");
  const Mat r = f.columns().adjoint() * q;  // f r = q
  const Mat a = r * par.matrix.entries() * solve(r, Mat(Mat::Identity(s, s)));
  return {f, HermMatrix(a, 1e-8)};
}

std::vector<SpectrumRow> spectrum_rows(const LinearRelation& r) {
  std::vector<SpectrumRow> rows;
  for (const auto& c : eigenpairs(r)) {
    double res = 0.0;
    for (Index j = 0; j < c.frame.size(); ++j) {
      const Vec v = c.frame.column(j);
      res = std::max(res, r.pair_residual(v, Vec(c.value * v)));
    }
    rows.push_back({c.value, c.multiplicity(), res});
  }
  return rows;
}

std::vector<TargetMultiplicity> target_multiplicities(std::span<const double> targets,
                                                      const std::vector<SpectrumRow>& spectrum) {
  std::vector<double> sorted(targets.begin(), targets.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<TargetMultiplicity> out;
  for (double t : sorted) {
    if (!out.empty() && std::abs(out.back().lambda - t) <= 1e-12) {
      ++out.back().repeat;
      continue;
    }
    out.push_back({t, 1, 0});
  }
  for (auto& m : out)
    for (const auto& row : spectrum)
      if (std::abs(row.eigenvalue - m.lambda) <= 1e-8) m.observed = row.multiplicity;
  return out;
}

bool RelationEngineering::multiplicities_ok() const {
  return std::all_of(multiplicities.begin(), multiplicities.end(),
                     [](const TargetMultiplicity& m) { return m.observed >= m.repeat; });
}

RelationEngineering engineer(const ExtensionProblem& p, std::span<const double> targets,
                             std::optional<std::uint64_t> seed) {
  const RelationBackend backend(p);
  RelationEngineering out{certify_pipeline(backend, targets, seed), BirmanParameter::friedrichs(p.dim()),
                          {}, {}, {}};
  out.parameter = to_birman(p, out.certificate.parameter);
  try {
    out.extension = build_extension(p, out.parameter);
  } catch (const Error& e) {
    detail::rethrow_in_stage("build_extension", e);
  }
  out.spectrum = spectrum_rows(out.extension.relation);
  out.multiplicities = target_multiplicities(targets, out.spectrum);
  return out;
}

// ------------------------------------------------------------ direct sums

ExtensionProblem direct_sum(std::span<const ExtensionProblem> blocks) {
  if (blocks.empty()) throw Error(ErrorCode::GapMismatch, "direct sum of nothing");
  std::vector<GapInterval> gaps;
  Index n = 0, m = 0;
  for (const auto& b : blocks) {
    gaps.push_back(b.gap());
    n += b.dim();
    m += b.domain().size();
  }
  const auto common = GapInterval::intersect(gaps);
  if (!common || !common->contains(0.0))
    throw Error(ErrorCode::GapMismatch, "block gaps have no common interval around 0");
  Mat dom = Mat::Zero(n, m), act = Mat::Zero(n, m), sd = Mat::Zero(n, n);
  Index r = 0, c = 0;
  for (const auto& b : blocks) {
    const Index bn = b.dim(), bm = b.domain().size();
    dom.block(r, c, bn, bm) = b.domain().columns();
    act.block(r, c, bn, bm) = b.action();
    sd.block(r, r, bn, bn) = b.s_d();
    r += bn;
    c += bm;
  }
  return ExtensionProblem(dom, act, sd, *common);
}

bool DirectSumResult::multiplicities_exact() const {
  return std::all_of(multiplicities.begin(), multiplicities.end(),
                     [](const TargetMultiplicity& m) { return m.observed == m.repeat; });
}

DirectSumResult direct_sum_engineer(std::span<const ExtensionProblem> blocks,
                                    std::span<const double> lambdas) {
  if (blocks.size() != lambdas.size())
    throw Error(ErrorCode::MixedDimensions, "need exactly one lambda per block");
  const ExtensionProblem sum = direct_sum(blocks);
  detail::require_targets_in_gap(sum.gap(), lambdas);
  std::vector<LinearRelation> parts;
  for (std::size_t i = 0; i < blocks.size(); ++i)
    parts.push_back(krein_type_extension(blocks[i], lambdas[i]).relation);
  DirectSumResult out;
  out.extension = {direct_sum(std::span<const LinearRelation>(parts)), std::nullopt};
  out.spectrum = spectrum_rows(out.extension.relation);
  out.multiplicities = target_multiplicities(lambdas, out.spectrum);
  return out;
}

// --------------------------------------------------------- classical route

namespace {

std::vector<double> tau_grid(const GapInterval& gap) {
  std::vector<double> taus;
  for (int k = -4; k <= 20; ++k) taus.push_back(gap.b() + std::ldexp(1.0, k));
  if (!gap.semi_infinite())
    for (int k = -4; k <= 20; ++k) taus.push_back(gap.a() - std::ldexp(1.0, k));
  return taus;
}

}  // namespace

ComparisonReport classical_route(const ExtensionProblem& p, std::span<const double> targets) {
  ComparisonReport rep;
  const RelationBackend backend(p);
  rep.v = select_eigensystem(backend, targets);
  const Index n = p.dim(), s = Index(rep.v.size()), m = p.domain().size();
  Mat v(n, s), lv(n, s);
  for (Index j = 0; j < s; ++j) {
    v.col(j) = rep.v[j];
    lv.col(j) = targets[j] * rep.v[j];
  }
  const Mat& d = p.domain().columns();

  // S' on D(S-bar) + span{v_n}, acting as S-bar and as lambda_n on v_n.
  Mat in(n, m + s), out(n, m + s);
  in << d, v;
  out << p.action(), lv;
  const LinearRelation sp = LinearRelation::from_pairs(in, out);
  rep.symmetry_residual = containment_residual(sp, adjoint(sp));
  rep.symmetric = rep.symmetry_residual < 1e-9;

  const Mat proj = v * v.adjoint();
  const Mat perp = Mat::Identity(n, n) - proj;
  double red = 0.0;
  for (Index j = 0; j < sp.dim(); ++j) {
    const Vec f = sp.inputs().col(j), g = sp.outputs().col(j);
    red = std::max(red, sp.pair_residual(proj * f, proj * g));
    red = std::max(red, sp.pair_residual(perp * f, perp * g));
  }
  rep.reducing_residual = red;
  rep.reduces = red < 1e-9;

  // S-hat: the V-perp part of S'.
  const Mat qd = perp * d;
  rep.shat_domain = orthonormalize(qd);
  const Index k = rep.shat_domain.size();
  if (k > 0) {
    const Mat coeff = rep.shat_domain.columns().adjoint() * qd;  // k x m, qd = Q coeff
    rep.shat_action = perp * p.action() * pseudo_solve(coeff, Mat(Mat::Identity(k, k)));
  } else {
    rep.shat_action = Mat(n, 0);
  }
  const Frame cap = s ? orthonormalize(Mat(d * null_space(Mat(v.adjoint() * d)).columns()))
                      : p.domain();
  rep.cap_dim = cap.size();
  rep.cap_distance = subspace_distance(cap, rep.shat_domain);
  rep.shat_gap = gap_check(rep.shat_domain, rep.shat_action, p.gap());

  // Scalar scan: H on V-perp with H q = S-hat q on the domain and tau on
  // the rest of V-perp.
  const Frame vperp = s ? complement(orthonormalize(v)) : Frame::from_orthonormal(Mat::Identity(n, n));
  Mat rest(n, 0);
  if (vperp.size() > k) {
    const Mat e = vperp.columns().adjoint() * rep.shat_domain.columns();
    rest = vperp.columns() * null_space(Mat(e.adjoint()), 1e-8).columns();
  }
  const Index r = k + rest.cols();
  Mat basis(n, r);
  basis << rep.shat_domain.columns(), rest;
  const Mat f = rep.shat_domain.columns().adjoint() * rep.shat_action;
  const Mat x = rest.adjoint() * rep.shat_action;
  const GapInterval& gap = p.gap();
  for (double tau : tau_grid(gap)) {
    Mat h(r, r);
    h << f, x.adjoint(), x, tau * Mat::Identity(rest.cols(), rest.cols());
    h = 0.5 * (h + h.adjoint());
    ScanEntry entry{tau, 0, std::numeric_limits<double>::infinity(), false};
    if (r > 0) {
      const auto es = hermitian_eigs(HermMatrix(h));
      for (double ev : es.values) {
        if (ev > gap.a() + 1e-9 && ev < gap.b() - 1e-9) ++entry.eigenvalues_in_gap;
        entry.smallest_abs_eigenvalue = std::min(entry.smallest_abs_eigenvalue, std::abs(ev));
      }
    }
    entry.accepted = entry.eigenvalues_in_gap == 0 && entry.smallest_abs_eigenvalue > 1e-12;
    rep.scan.push_back(entry);
    if (entry.accepted) {
      rep.found = true;
      rep.tau = tau;
      rep.sd_prime = basis * h * basis.adjoint() + v * lv.adjoint();
      rep.sd_prime = 0.5 * (rep.sd_prime + rep.sd_prime.adjoint());
      break;
    }
    if (rest.cols() == 0) break;  // tau plays no role
  }

  if (rep.found) {
    const LinearRelation full = LinearRelation::graph_of(rep.sd_prime);
    rep.extension_residual = containment_residual(sp, full);
    const auto mult = target_multiplicities(targets, spectrum_rows(full));
    rep.eigenvalues_confirmed =
        rep.extension_residual < 1e-9 &&
        std::all_of(mult.begin(), mult.end(), [](const auto& t) { return t.observed >= t.repeat; });
  }
  return rep;
}

// -------------------------------------------------------------- eps-nets

namespace {

struct Component {
  double lo, hi;
};

std::vector<Component> clipped_components(const SetSpec& set, const GapInterval& gap) {
  std::vector<Component> comps;
  for (auto [lo, hi] : set.intervals) {
    if (lo > hi) std::swap(lo, hi);
    lo = std::max(lo, gap.a());
    hi = std::min(hi, gap.b());
    if (lo <= hi) comps.push_back({lo, hi});
  }
  std::sort(comps.begin(), comps.end(), [](const Component& a, const Component& b) {
    return a.lo < b.lo || (a.lo == b.lo && a.hi < b.hi);
  });
  return comps;
}

}  // namespace

NetPlan net_targets(const SetSpec& set, Index count, const GapInterval& gap) {
  if (count < 1) throw Error(ErrorCode::EmptyIntersection, "target count must be at least 1");
  std::vector<double> out;
  std::set<double> seen;
  auto add = [&](double x) {
    if (Index(out.size()) >= count || !gap.contains(x) || seen.count(x)) return;
    seen.insert(x);
    out.push_back(x);
  };
  for (double x : set.points) add(x);
  const auto comps = clipped_components(set, gap);
  for (const auto& c : comps) {
    add(c.lo);
    add(c.hi);
  }
  const bool any_interval =
      std::any_of(comps.begin(), comps.end(), [](const Component& c) { return c.hi > c.lo; });
  for (int level = 1; any_interval && level <= 52 && Index(out.size()) < count; ++level) {
    const double parts = std::ldexp(1.0, level);
    for (const auto& c : comps) {
      if (c.hi <= c.lo) continue;
      for (double i = 1; i < parts; i += 2) add(c.lo + (c.hi - c.lo) * i / parts);
    }
  }
  if (out.empty()) throw Error(ErrorCode::EmptyIntersection, "target set does not meet the gap");
  return {out, covering_radius(set, out, gap)};
}

double covering_radius(const SetSpec& set, std::span<const double> targets, const GapInterval& gap) {
  std::vector<double> sorted(targets.begin(), targets.end());
  std::sort(sorted.begin(), sorted.end());
  const double inf = std::numeric_limits<double>::infinity();
  auto dist = [&](double x) {
    if (sorted.empty()) return inf;
    const auto it = std::lower_bound(sorted.begin(), sorted.end(), x);
    double best = inf;
    if (it != sorted.end()) best = std::min(best, *it - x);
    if (it != sorted.begin()) best = std::min(best, x - *(it - 1));
    return best;
  };
  double radius = 0.0;
  for (double x : set.points)
    if (gap.closure_contains(x)) radius = std::max(radius, dist(x));
  for (const auto& c : clipped_components(set, gap)) {
    const double len = c.hi - c.lo;
    const auto steps = static_cast<long>(std::ceil(len / 1e-4));
    for (long i = 0; i <= steps; ++i)
      radius = std::max(radius, dist(steps ? c.lo + len * double(i) / double(steps) : c.lo));
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
      const double mid = 0.5 * (sorted[i] + sorted[i + 1]);
      if (mid >= c.lo && mid <= c.hi) radius = std::max(radius, dist(mid));
    }
  }
  return radius;
}

}  // namespace kvb
