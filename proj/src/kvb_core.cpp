#include "kvb/kvb_core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace kvb {

namespace {

Mat hstack(std::initializer_list<const Mat*> blocks, Index rows) {
  Index cols = 0;
  for (const Mat* b : blocks) cols += b->cols();
  Mat out(rows, cols);
  Index at = 0;
  for (const Mat* b : blocks) {
    out.middleCols(at, b->cols()) = *b;
    at += b->cols();
  }
  return out;
}

double scale_of(const Mat& m) { return std::max(1.0, max_abs(m)); }

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

void require_in_gap(const ExtensionProblem& p, double lambda) {
  if (!p.gap().contains(lambda))
    throw Error(ErrorCode::NotInGap,
                fmt(lambda) + " is not inside (" + fmt(p.gap().a()) + ", " + fmt(p.gap().b()) + ")");
}

}  // namespace

// ------------------------------------------------------------ GapInterval

GapInterval::GapInterval(double a, double b) : a_(a), b_(b) {
  if (!(a < b) || std::isnan(a) || std::isnan(b) || std::isinf(b))
    throw Error(ErrorCode::NotInGap, "gap needs a < b with b finite");
}

std::optional<GapInterval> GapInterval::intersect(std::span<const GapInterval> gaps) {
  if (gaps.empty()) return std::nullopt;
  double a = gaps[0].a(), b = gaps[0].b();
  for (const auto& g : gaps) {
    a = std::max(a, g.a());
    b = std::min(b, g.b());
  }
  if (!(a < b)) return std::nullopt;
  return GapInterval(a, b);
}

// ------------------------------------------------------- ExtensionProblem

ExtensionProblem::ExtensionProblem(const Mat& domain_basis, const Mat& action, const Mat& s_d,
                                   GapInterval gap)
    : gap_(gap) {
  const Index n = s_d.rows();
  if (s_d.cols() != n || domain_basis.rows() != n || action.rows() != n ||
      action.cols() != domain_basis.cols())
    throw Error(ErrorCode::MixedDimensions, "domain basis, action and S_D disagree in shape");
  s_d_ = HermMatrix(s_d, 1e-10).entries();

  domain_ = orthonormalize(domain_basis);
  if (domain_.size() != domain_basis.cols())
    throw Error(ErrorCode::MixedDimensions, "domain basis is linearly dependent");
  if (domain_.size() > 0) {
    // domain_basis = Q C with C = Q* domain_basis; S Q = action C^{-1}.
    const Mat c = domain_.columns().adjoint() * domain_basis;
    action_ = solve(Mat(c.transpose()), Mat(action.transpose())).transpose();
  } else {
    action_ = Mat(n, 0);
  }

  kernel_ = complement(orthonormalize(action_));
  try {
    s_d_inverse_ = solve(s_d_, Mat(Mat::Identity(n, n)));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Singular) throw;
  }
}

const Mat& ExtensionProblem::s_d_inverse() const {
  if (!s_d_inverse_) throw Error(ErrorCode::NotInvertibleSD, "S_D is numerically singular");
  return *s_d_inverse_;
}

LinearRelation ExtensionProblem::graph() const {
  return from_operator_on_subspace(domain_, action_);
}

// ------------------------------------------------------------- validation

bool ValidationReport::ok() const noexcept { return first_failure() == nullptr; }

const ValidationCheck* ValidationReport::first_failure() const noexcept {
  for (const auto& c : checks)
    if (!c.passed) return &c;
  return nullptr;
}

ValidationReport inspect(const ExtensionProblem& p) {
  ValidationReport r;
  const Mat form = p.form_matrix();
  {
    const double dev = form.size() ? max_abs(form - form.adjoint()) : 0.0;
    const double thr = 1e-10 * (form.size() ? scale_of(form) : 1.0);
    r.checks.push_back({"symmetry", dev, thr, dev <= thr, ErrorCode::NotSymmetric});
  }
  {
    const Mat diff = p.s_d() * p.domain().columns() - p.action();
    double dev = 0.0;
    for (Index j = 0; j < diff.cols(); ++j) dev = std::max(dev, diff.col(j).norm());
    const double thr = 1e-10 * scale_of(p.s_d());
    r.checks.push_back({"extension", dev, thr, dev <= thr, ErrorCode::NotExtension});
  }
  {
    const auto sv = singular_values(p.s_d());
    const double cond = (sv.empty() || sv.front() == 0.0)
                            ? std::numeric_limits<double>::infinity()
                            : sv.back() / sv.front();
    const bool ok = p.sd_invertible() && cond < 1e12;
    r.checks.push_back({"sd_invertible", cond, 1e12, ok, ErrorCode::NotInvertibleSD});
  }
  {
    // Distance of 0 from the gap complement; positive when 0 is inside.
    const double inside = std::min(0.0 - p.gap().a(), p.gap().b() - 0.0);
    r.checks.push_back({"zero_in_gap", -inside, 0.0, inside > 0.0, ErrorCode::NotInGap});
  }
  {
    const auto sv = singular_values(p.action());
    const double smin = sv.empty() ? 1.0 : sv.front();
    const double thr = 1e-10 * (sv.empty() ? 1.0 : std::max(1.0, sv.back()));
    r.checks.push_back({"injective_action", smin, thr, smin > thr, ErrorCode::NotInvertibleSD});
  }
  return r;
}

ValidationReport validate(const ExtensionProblem& p) {
  ValidationReport r = inspect(p);
  if (const auto* f = r.first_failure())
    throw Error(f->code, f->name + " check failed (deviation " + fmt(f->deviation) +
                             ", threshold " + fmt(f->threshold) + ")");
  return r;
}

// -------------------------------------------------------------------- gap

GapCheck gap_check(const Frame& domain, const Mat& action, const GapInterval& g) {
  const double inf = std::numeric_limits<double>::infinity();
  if (g.semi_infinite()) {
    if (domain.empty()) return {GapBranch::SemiInfinite, inf, g.b()};
    const Mat form = domain.columns().adjoint() * action;
    const auto es = hermitian_eigs(HermMatrix(Mat(0.5 * (form + form.adjoint()))));
    return {GapBranch::SemiInfinite, es.values.front(), g.b()};
  }
  const double mid = 0.5 * (g.a() + g.b());
  const double half = 0.5 * (g.b() - g.a());
  if (domain.empty()) return {GapBranch::Finite, inf, half};
  const auto sv = singular_values(Mat(action - mid * domain.columns()));
  return {GapBranch::Finite, sv.front(), half};
}

GapCheck gap_check(const ExtensionProblem& p, const GapInterval& g) {
  return gap_check(p.domain(), p.action(), g);
}

bool check_gap(const ExtensionProblem& p, const GapInterval& g) { return gap_check(p, g).holds(); }

double lower_bound(const ExtensionProblem& p) {
  if (p.domain().empty()) return std::numeric_limits<double>::infinity();
  const Mat form = p.form_matrix();
  return hermitian_eigs(HermMatrix(Mat(0.5 * (form + form.adjoint())))).values.front();
}

// ---------------------------------------------------------------- adjoint

LinearRelation adjoint_relation(const ExtensionProblem& p) {
  const Index n = p.dim();
  const Mat& k = p.kernel_frame().columns();
  const Mat sdk = p.s_d_inverse() * k;
  const Mat zero = Mat::Zero(n, k.cols());
  const Mat& d = p.domain().columns();
  const Mat inputs = hstack({&d, &sdk, &k}, n);
  const Mat outputs = hstack({&p.action(), &k, &zero}, n);
  LinearRelation rel = LinearRelation::from_pairs(inputs, outputs);

  const LinearRelation oracle = adjoint(p.graph());
  const Index expected = p.domain().size() + 2 * p.deficiency_index();
  if (rel.dim() != expected || oracle.dim() != expected)
    throw Error(ErrorCode::DecompositionMismatch,
                "block span has dimension " + std::to_string(rel.dim()) + ", oracle " +
                    std::to_string(oracle.dim()) + ", expected " + std::to_string(expected));
  const double dist = subspace_distance(rel.graph(), oracle.graph());
  if (dist >= 1e-9)
    throw Error(ErrorCode::DecompositionMismatch,
                "three-block graph differs from the graph adjoint by " + fmt(dist));
  return rel;
}

AdjointTriple decompose(const ExtensionProblem& p, const Vec& psi, const Vec& phi) {
  const Index n = p.dim();
  if (psi.size() != n || phi.size() != n)
    throw Error(ErrorCode::MixedDimensions, "pair has the wrong length");
  const Mat& k = p.kernel_frame().columns();
  const Index m = p.domain().size(), dk = k.cols();

  // [ D  S_D^{-1}K  K ] [f]   [psi]
  // [ A      K      0 ] [w] = [phi]
  //                     [u]
  Mat sys = Mat::Zero(2 * n, m + 2 * dk);
  sys.topLeftCorner(n, m) = p.domain().columns();
  sys.block(0, m, n, dk) = p.s_d_inverse() * k;
  sys.block(0, m + dk, n, dk) = k;
  sys.bottomLeftCorner(n, m) = p.action();
  sys.block(n, m, n, dk) = k;
  Vec rhs(2 * n);
  rhs << psi, phi;

  const Vec x = pseudo_solve(sys, Mat(rhs)).col(0);
  const double residual = (sys * x - rhs).norm();
  const double scale = std::max(1.0, rhs.norm());
  if (residual > 1e-8 * scale)
    throw Error(ErrorCode::NotInAdjointDomain,
                "pair is " + fmt(residual) + " away from the adjoint relation");
  return {x.head(m), k * x.segment(m, dk), k * x.tail(dk), residual};
}

Frame deficiency_space(const ExtensionProblem& p, cplx z) {
  if (z.imag() == 0.0) require_in_gap(p, z.real());
  // (psi, z psi) in S*  iff  <a_i, psi> = z <d_i, psi> for every i.
  const Mat rows = (p.action() - std::conj(z) * p.domain().columns()).adjoint();
  if (rows.rows() == 0) return Frame::from_orthonormal(Mat::Identity(p.dim(), p.dim()));
  return null_space(rows, 1e-8);
}

Index deficiency_index(const ExtensionProblem& p) { return p.deficiency_index(); }

// -------------------------------------------------------------- extensions

BirmanParameter BirmanParameter::friedrichs(Index ambient_dim) {
  return {Frame(ambient_dim), HermMatrix(Mat(0, 0))};
}

BirmanParameter BirmanParameter::scalar(const Frame& support, double beta) {
  const Index s = support.size();
  return {support, HermMatrix(Mat(beta * Mat::Identity(s, s)))};
}

SelfAdjointExtension build_extension(const ExtensionProblem& p, const BirmanParameter& t) {
  const Index n = p.dim();
  const Frame& kf = p.kernel_frame();
  if (t.support.ambient_dim() != n)
    throw Error(ErrorCode::MixedDimensions, "parameter support lives in the wrong space");
  if (t.matrix.rows() != t.support.size())
    throw Error(ErrorCode::MixedDimensions, "parameter matrix does not match its support");
  const Mat& u = t.support.columns();
  if (u.cols() > 0) {
    const Mat off = u - kf.projector() * u;
    const double dev = max_abs(off);
    if (dev > 1e-10)
      throw Error(ErrorCode::ParameterNotInKernel,
                  "support leaves ker S* by " + fmt(dev));
  }

  // W = K minus the support, as K * null((K* U)*).
  Mat w;
  if (u.cols() == 0) {
    w = kf.columns();
  } else {
    const Mat coeff = kf.columns().adjoint() * u;  // d x s
    const Frame rest = null_space(coeff.adjoint(), 1e-8);
    w = kf.columns() * rest.columns();
  }

  const Mat& sdi = p.s_d_inverse();
  const Mat tu = u * t.matrix.entries();
  const Mat in_support = sdi * tu + u;
  const Mat in_w = sdi * w;
  const Mat& d = p.domain().columns();
  const Mat inputs = hstack({&d, &in_support, &in_w}, n);
  const Mat outputs = hstack({&p.action(), &tu, &w}, n);
  return {LinearRelation::from_pairs(inputs, outputs), t};
}

bool InvertibilityReport::consistent() const noexcept {
  return kernel_distance < 1e-9 && injective == t_injective && surjective == t_surjective &&
         invertible == t_invertible;
}

InvertibilityReport invertibility_report(const SelfAdjointExtension& ext, double tol) {
  const Index n = ext.relation.ambient_dim();
  InvertibilityReport r;
  r.kernel = kernel(ext.relation, tol);
  r.injective = r.kernel.empty();
  r.surjective = range(ext.relation, tol).size() == n;
  r.invertible = r.injective && r.surjective;

  r.t_kernel = Frame(n);
  Index t_rank = 0, s = 0;
  if (ext.parameter && ext.parameter->support.size() > 0) {
    const auto& par = *ext.parameter;
    s = par.support.size();
    const Frame nk = null_space(par.matrix.entries(), tol);
    if (!nk.empty())
      r.t_kernel = orthonormalize(Mat(par.support.columns() * nk.columns()), tol);
    t_rank = s - nk.size();
  }
  r.t_injective = r.t_kernel.empty();
  r.t_surjective = t_rank == s;
  r.t_invertible = r.t_injective && r.t_surjective;
  r.kernel_distance = subspace_distance(r.kernel, r.t_kernel);
  return r;
}

SelfAdjointExtension krein_type_extension(const ExtensionProblem& p, double lambda) {
  require_in_gap(p, lambda);
  const Frame def = deficiency_space(p, lambda);
  const Mat& d = p.domain().columns();
  const Mat& kc = def.columns();
  const Mat lk = lambda * kc;
  const Mat inputs = hstack({&d, &kc}, p.dim());
  const Mat outputs = hstack({&p.action(), &lk}, p.dim());
  return {LinearRelation::from_pairs(inputs, outputs), std::nullopt};
}

double beta_unital(const ExtensionProblem& p, double lambda) {
  if (p.deficiency_index() != 1)
    throw Error(ErrorCode::NotUnital,
                "deficiency index is " + std::to_string(p.deficiency_index()) + ", not 1");
  require_in_gap(p, lambda);
  const Index n = p.dim();
  const Vec w0 = p.kernel_frame().column(0);
  Vec x;
  try {
    x = solve(Mat(p.s_d() - lambda * Mat::Identity(n, n)), w0);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Singular) throw;
    return std::numeric_limits<double>::infinity();
  }
  const double beta = lambda * w0.dot(p.s_d() * x).real();
  if (std::abs(beta) > 1e12) return std::numeric_limits<double>::infinity();
  return beta;
}

ExtensionProblem shift(const ExtensionProblem& p, double c) {
  const Index n = p.dim();
  ExtensionProblem q(p.domain().columns(), p.action() - c * p.domain().columns(),
                     p.s_d() - c * Mat::Identity(n, n), p.gap().shifted(-c));
  if (!q.sd_invertible())
    throw Error(ErrorCode::NotInvertibleSD, "S_D - " + fmt(c) + " is singular");
  if (!q.gap().contains(0.0))
    throw Error(ErrorCode::NotInGap, "shifted gap does not contain 0");
  return q;
}

// ------------------------------------------------------- random instances

namespace {

Mat gaussian(std::mt19937_64& rng, Index r, Index c) {
  std::normal_distribution<double> g(0.0, 1.0);
  Mat m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) m(i, j) = cplx(g(rng), g(rng));
  return m;
}

Mat positive(std::mt19937_64& rng, Index n, double floor) {
  const Mat r = gaussian(rng, n, n);
  return floor * Mat::Identity(n, n) + r * r.adjoint() / double(std::max<Index>(n, 1));
}

}  // namespace

ExtensionProblem random_problem(std::mt19937_64& rng, const RandomProblemSpec& spec) {
  const Index n = spec.dim, d = spec.deficiency, m = n - d;
  if (d < 0 || m < 0 || spec.lower <= 0.0)
    throw Error(ErrorCode::MixedDimensions, "random problem needs 0 <= d <= N and lower > 0");
  std::uniform_real_distribution<double> margin(0.1, 1.0);
  const double b = spec.lower;
  for (int attempt = 0; attempt < 100; ++attempt) {
    const Frame q = orthonormalize(gaussian(rng, n, n));
    if (q.size() != n) continue;
    const Mat dom = q.columns().leftCols(m);
    const Mat comp = q.columns().rightCols(d);

    // Block form of S_D in the basis [D C]: [[F, X*], [X, Y]] with
    // Y - b >= X (F - b)^{-1} X*, so S_D - b is positive definite.
    const Mat f = positive(rng, m, b + margin(rng));
    const Mat x = gaussian(rng, d, m);
    const Mat fb = f - b * Mat::Identity(m, m);
    Mat y = b * Mat::Identity(d, d) + positive(rng, d, 0.1 + margin(rng));
    if (m > 0 && d > 0) y += x * solve(fb, Mat(x.adjoint()));
    Mat blocks(n, n);
    blocks << f, x.adjoint(), x, y;
    blocks = 0.5 * (blocks + blocks.adjoint());
    Mat sd = q.columns() * blocks * q.columns().adjoint();
    sd = 0.5 * (sd + sd.adjoint());
    const Mat action = sd * dom;

    ExtensionProblem p(dom, action, sd, GapInterval(kNegInf, b));
    if (inspect(p).ok() && p.deficiency_index() == d) return p;
    (void)comp;
  }
  throw Error(ErrorCode::NotInvertibleSD, "random problem generator kept failing validation");
}

BirmanParameter random_parameter(std::mt19937_64& rng, const ExtensionProblem& p,
                                 bool with_kernel) {
  const Index d = p.deficiency_index();
  std::uniform_int_distribution<Index> pick(with_kernel ? std::min<Index>(1, d) : 0, d);
  const Index s = pick(rng);
  if (s == 0) return BirmanParameter::friedrichs(p.dim());
  const Frame coeff = orthonormalize(gaussian(rng, d, s));
  const Frame support = orthonormalize(Mat(p.kernel_frame().columns() * coeff.columns()));
  std::uniform_real_distribution<double> ev(-3.0, 3.0);
  Mat diag = Mat::Zero(s, s);
  for (Index i = 0; i < s; ++i) diag(i, i) = ev(rng);
  if (with_kernel) diag(0, 0) = 0.0;
  const Frame rot = orthonormalize(gaussian(rng, s, s));
  Mat t = rot.columns() * diag * rot.columns().adjoint();
  t = 0.5 * (t + t.adjoint());
  return {support, HermMatrix(t)};
}

}  // namespace kvb
