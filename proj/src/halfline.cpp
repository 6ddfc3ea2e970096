#include "kvb/halfline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace kvb {

namespace {

// Relative cancellation threshold: a merged coefficient smaller than this
// fraction of the magnitudes that produced it is treated as zero.
constexpr double kCancel = 1e-14;

struct Key {
  double a;
  int k;
  bool operator<(const Key& o) const { return a < o.a || (a == o.a && k < o.k); }
};

struct Acc {
  cplx sum{0.0};
  double mag = 0.0;
};

class Accumulator {
 public:
  void add(int k, double a, cplx c) {
    if (c == cplx(0.0)) return;
    auto& e = map_[Key{a, k}];
    e.sum += c;
    e.mag = std::max(e.mag, std::abs(c));
  }
  std::vector<ExpTerm> terms() const {
    std::vector<ExpTerm> out;
    for (const auto& [key, acc] : map_)
      if (acc.sum != cplx(0.0) && std::abs(acc.sum) > kCancel * acc.mag)
        out.push_back({key.k, key.a, acc.sum});
    return out;
  }
  // Re-canonicalizing the output is a no-op, so this is safe outside ExpPoly.
  ExpPoly finish() const { return ExpPoly(terms()); }

 private:
  std::map<Key, Acc> map_;
};

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

void check_term(const ExpTerm& t) {
  if (!(t.a > 0.0) || !std::isfinite(t.a))
    throw Error(ErrorCode::ParseError, "decay must be positive and finite");
  if (t.k < 0) throw Error(ErrorCode::ParseError, "power of t must be nonnegative");
}

// Groups the terms of g by decay: a -> coefficients q_0..q_deg.
std::map<double, std::vector<cplx>> by_decay(const ExpPoly& g) {
  std::map<double, std::vector<cplx>> out;
  for (const auto& t : g.terms()) {
    auto& q = out[t.a];
    if (int(q.size()) <= t.k) q.resize(std::size_t(t.k) + 1, cplx(0.0));
    q[std::size_t(t.k)] += t.c;
  }
  return out;
}

// -w'' + mu2 w = g, w(0) = 0, mu = sqrt(mu2) supplied by the caller so
// resonance is an exact comparison.
ExpPoly green_solve(const ExpPoly& g, double mu2, double mu) {
  Accumulator acc;
  cplx w0(0.0);
  for (const auto& [a, q] : by_decay(g)) {
    const int deg = int(q.size()) - 1;
    if (a == mu) {
      // 2a p' - p'' = q; p has degree deg + 1 and p_0 = 0.
      std::vector<cplx> p(std::size_t(deg) + 3, cplx(0.0));
      for (int j = deg; j >= 0; --j)
        p[std::size_t(j) + 1] = (q[std::size_t(j)] + double((j + 2) * (j + 1)) * p[std::size_t(j) + 2]) /
                                (2.0 * a * double(j + 1));
      for (int j = 1; j <= deg + 1; ++j) acc.add(j, a, p[std::size_t(j)]);
    } else {
      // (mu2 - a^2) p + 2a p' - p'' = q.
      const double den = mu2 - a * a;
      std::vector<cplx> p(std::size_t(deg) + 3, cplx(0.0));
      for (int j = deg; j >= 0; --j)
        p[std::size_t(j)] = (q[std::size_t(j)] - 2.0 * a * double(j + 1) * p[std::size_t(j) + 1] +
                             double((j + 2) * (j + 1)) * p[std::size_t(j) + 2]) /
                            den;
      for (int j = 0; j <= deg; ++j) acc.add(j, a, p[std::size_t(j)]);
      w0 += p[0];
    }
  }
  // Only the decaying homogeneous solution e^{-mu t} is admissible.
  acc.add(0, mu, -w0);
  return acc.finish();
}

}  // namespace

// ---------------------------------------------------------------- ExpPoly

ExpPoly::ExpPoly(std::vector<ExpTerm> terms) {
  Accumulator acc;
  for (const auto& t : terms) {
    check_term(t);
    acc.add(t.k, t.a, t.c);
  }
  terms_ = acc.terms();
}

cplx ExpPoly::coefficient(int k, double a) const {
  for (const auto& t : terms_)
    if (t.k == k && t.a == a) return t.c;
  return 0.0;
}

cplx ExpPoly::operator()(double t) const {
  cplx s(0.0);
  for (const auto& x : terms_) s += x.c * std::pow(t, x.k) * std::exp(-x.a * t);
  return s;
}

cplx ExpPoly::value_at_zero() const {
  cplx s(0.0);
  for (const auto& x : terms_)
    if (x.k == 0) s += x.c;
  return s;
}

cplx ExpPoly::derivative_at_zero() const {
  // d/dt (t^k e^{-at}) at 0: 1 for k = 1, -a for k = 0.
  cplx s(0.0);
  for (const auto& x : terms_) {
    if (x.k == 0) s -= x.a * x.c;
    if (x.k == 1) s += x.c;
  }
  return s;
}

ExpPoly operator+(const ExpPoly& f, const ExpPoly& g) {
  Accumulator acc;
  for (const auto& t : f.terms_) acc.add(t.k, t.a, t.c);
  for (const auto& t : g.terms_) acc.add(t.k, t.a, t.c);
  return acc.finish();
}

ExpPoly operator-(const ExpPoly& f, const ExpPoly& g) { return f + cplx(-1.0) * g; }

ExpPoly operator*(cplx s, const ExpPoly& f) {
  if (s == cplx(0.0)) return {};
  ExpPoly out;
  for (const auto& t : f.terms_) out.terms_.push_back({t.k, t.a, s * t.c});
  return out;
}

double coefficient_distance(const ExpPoly& f, const ExpPoly& g) {
  double m = 0.0;
  for (const auto& t : f.terms()) m = std::max(m, std::abs(t.c - g.coefficient(t.k, t.a)));
  for (const auto& t : g.terms()) m = std::max(m, std::abs(t.c - f.coefficient(t.k, t.a)));
  return m;
}

cplx ep_inner(const ExpPoly& f, const ExpPoly& g) {
  cplx s(0.0);
  for (const auto& x : f.terms())
    for (const auto& y : g.terms()) {
      const int n = x.k + y.k;
      s += std::conj(x.c) * y.c * factorial(n) / std::pow(x.a + y.a, n + 1);
    }
  return s;
}

double ep_norm(const ExpPoly& f) { return std::sqrt(std::max(0.0, ep_inner(f, f).real())); }

ExpPoly ep_apply_shifted(const ExpPoly& f, double lambda) {
  // -(t^k e^{-at})'' = -(k(k-1) t^{k-2} - 2ak t^{k-1} + a^2 t^k) e^{-at}
  Accumulator acc;
  const double mu2 = 1.0 - lambda;
  for (const auto& t : f.terms()) {
    const double diag = mu2 - t.a * t.a;
    // Treat 1 - lambda - a^2 as zero when a was produced as sqrt(1 - lambda).
    if (std::abs(diag) > kCancel * std::max(mu2, t.a * t.a)) acc.add(t.k, t.a, diag * t.c);
    if (t.k >= 1) acc.add(t.k - 1, t.a, 2.0 * t.a * t.k * t.c);
    if (t.k >= 2) acc.add(t.k - 2, t.a, -double(t.k * (t.k - 1)) * t.c);
  }
  return acc.finish();
}

ExpPoly ep_apply_S(const ExpPoly& f) { return ep_apply_shifted(f, 0.0); }

ExpPoly friedrichs_solve(const ExpPoly& g) { return green_solve(g, 1.0, 1.0); }

ExpPoly friedrichs_resolvent(const ExpPoly& g, double lambda) {
  if (lambda == 0.0) return friedrichs_solve(g);
  return green_solve(g, 1.0 - lambda, decay_for(lambda));
}

double decay_for(double lambda) {
  if (!(lambda < 1.0))
    throw Error(ErrorCode::NotInGap, "lambda must be below 1 on the half-line");
  return std::sqrt(1.0 - lambda);
}

ExpPoly deficiency_fn(double lambda) { return ExpPoly::exp(decay_for(lambda)); }

double beta_closed(double lambda) { return 2.0 * lambda / (decay_for(lambda) + 1.0); }

double beta_general(double lambda) {
  decay_for(lambda);
  const ExpPoly z = ExpPoly::exp(1.0);
  const ExpPoly r = friedrichs_resolvent(z, lambda);
  const ExpPoly s = ep_apply_S(r);
  return lambda * ep_inner(z, s).real() / ep_inner(z, z).real();
}

std::string to_string(SignFlag f) {
  switch (f) {
    case SignFlag::Same: return "SAME";
    case SignFlag::Opposite: return "OPPOSITE";
    case SignFlag::Mismatch: return "MISMATCH";
  }
  return "MISMATCH";
}

ExampleReport reproduce_example(double lambda, cplx p) {
  const double mu = decay_for(lambda);
  ExampleReport r;
  r.lambda = lambda;
  r.p = p;
  r.beta_closed = beta_closed(lambda);
  r.beta_general = beta_general(lambda);
  if (lambda == 0.0) {
    r.beta_only = true;
    return r;
  }
  const ExpPoly e1 = ExpPoly::exp(1.0);
  const ExpPoly phi = deficiency_fn(lambda);
  r.v = p * phi;
  r.q = ep_inner(e1, r.v) / ep_inner(e1, e1);
  r.q_over_p = r.q / p;
  r.q_residual = std::abs(r.q_over_p - 2.0 / (mu + 1.0));
  r.z = r.q * e1;

  r.w = friedrichs_solve(r.v);
  r.w_residual = coefficient_distance(ep_apply_S(r.w), r.v) + std::abs(r.w.value_at_zero());
  r.w_reference = (-p / lambda) * (phi - e1);
  const double scale = std::max(1.0, std::abs(p / lambda));
  if (coefficient_distance(r.w, r.w_reference) <= 1e-12 * scale)
    r.sign_flag = SignFlag::Same;
  else if (coefficient_distance(r.w, -r.w_reference) <= 1e-12 * scale)
    r.sign_flag = SignFlag::Opposite;

  r.u = r.v - lambda * r.w;
  r.u_residual = coefficient_distance(r.u, p * e1);
  r.h = friedrichs_resolvent(e1, lambda);
  r.sf_h = ep_apply_S(r.h);
  r.h_residual = coefficient_distance(r.sf_h, phi);
  return r;
}

std::vector<SweepRow> beta_sweep(std::span<const double> grid) {
  std::vector<SweepRow> rows;
  for (double lam : grid) {
    const double c = beta_closed(lam), g = beta_general(lam);
    rows.push_back({lam, c, g, std::abs(c - g)});
  }
  return rows;
}

bool strictly_increasing(std::vector<SweepRow> rows) {
  std::sort(rows.begin(), rows.end(),
            [](const SweepRow& a, const SweepRow& b) { return a.lambda < b.lambda; });
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (!(rows[i].beta_closed > rows[i - 1].beta_closed)) return false;
  return true;
}

// ------------------------------------------------------------- backend

HalfVec operator+(const HalfVec& f, const HalfVec& g) {
  HalfVec out{f.parts};
  for (std::size_t i = 0; i < out.parts.size(); ++i) out.parts[i] = f.parts[i] + g.parts[i];
  return out;
}

HalfVec operator-(const HalfVec& f, const HalfVec& g) {
  HalfVec out{f.parts};
  for (std::size_t i = 0; i < out.parts.size(); ++i) out.parts[i] = f.parts[i] - g.parts[i];
  return out;
}

HalfVec operator*(cplx s, const HalfVec& f) {
  HalfVec out{f.parts};
  for (auto& x : out.parts) x = s * x;
  return out;
}

HalfLineBackend::HalfLineBackend(int copies, bool mixing) : m_(copies), mixing_(mixing) {
  if (copies < 1) throw Error(ErrorCode::MixedDimensions, "need at least one copy");
  mix_ = Mat::Identity(m_, m_);
  if (mixing_) {
    for (int j = 0; j < m_; ++j)
      for (int c = 0; c < m_; ++c) {
        const double s = j == 0 ? std::sqrt(1.0 / m_) : std::sqrt(2.0 / m_);
        mix_(j, c) = s * std::cos(std::numbers::pi * (2 * c + 1) * j / (2.0 * m_));
      }
  }
}

HalfVec HalfLineBackend::in_copy(int j, const ExpPoly& f) const {
  HalfVec v = zero();
  v.parts[std::size_t(j)] = f;
  return v;
}

cplx HalfLineBackend::inner(const HalfVec& f, const HalfVec& g) const {
  cplx s(0.0);
  for (int i = 0; i < m_; ++i) s += ep_inner(f.parts[std::size_t(i)], g.parts[std::size_t(i)]);
  return s;
}

HalfVec HalfLineBackend::sd_apply_inverse(const HalfVec& v) const {
  HalfVec out = zero();
  for (int i = 0; i < m_; ++i) out.parts[std::size_t(i)] = friedrichs_solve(v.parts[std::size_t(i)]);
  return out;
}

HalfVec HalfLineBackend::sd_resolvent(const HalfVec& v, double lambda) const {
  HalfVec out = zero();
  for (int i = 0; i < m_; ++i)
    out.parts[std::size_t(i)] = friedrichs_resolvent(v.parts[std::size_t(i)], lambda);
  return out;
}

std::vector<HalfVec> HalfLineBackend::kernel_frame() const {
  std::vector<HalfVec> out;
  for (int j = 0; j < m_; ++j) out.push_back(in_copy(j, ExpPoly::exp(1.0, std::sqrt(2.0))));
  return out;
}

std::vector<HalfVec> HalfLineBackend::deficiency_frame(double lambda) const {
  const double mu = decay_for(lambda);
  const ExpPoly phi = ExpPoly::exp(mu, std::sqrt(2.0 * mu));  // unit norm
  std::vector<HalfVec> out;
  for (int j = 0; j < m_; ++j) {
    HalfVec v = zero();
    for (int c = 0; c < m_; ++c)
      if (mix_(j, c) != cplx(0.0)) v.parts[std::size_t(c)] = mix_(j, c) * phi;
    out.push_back(std::move(v));
  }
  return out;
}

SbarSplit<HalfVec> HalfLineBackend::sbar_decompose(const HalfVec& v) const {
  const ExpPoly e1 = ExpPoly::exp(1.0);
  SbarSplit<HalfVec> out{zero(), zero(), zero()};
  for (int i = 0; i < m_; ++i) {
    const ExpPoly& f = v.parts[std::size_t(i)];
    const ExpPoly z = (2.0 * ep_inner(e1, f)) * e1;
    const ExpPoly x = friedrichs_solve(f - z);
    // x'(0) = <e^{-t}, f - z>, which vanishes because f - z is orthogonal
    // to ker S*; checked rather than assumed.
    // Relative to the coefficients involved: decays near 1 amplify them.
    double scale = 1.0;
    for (const auto& t : f.terms()) scale = std::max(scale, std::abs(t.c));
    for (const auto& t : x.terms()) scale = std::max(scale, std::abs(t.c));
    if (std::abs(x.derivative_at_zero()) >= 1e-12 * scale)
      throw Error(ErrorCode::DecompositionMismatch,
                  "Green solve violates x'(0) = 0 in copy " + std::to_string(i));
    out.x.parts[std::size_t(i)] = x;
    out.sbar_x.parts[std::size_t(i)] = ep_apply_S(x);
    out.z.parts[std::size_t(i)] = z;
  }
  return out;
}

double HalfLineBackend::adjoint_residual(const HalfVec& v, double lambda) const {
  double s = 0.0;
  for (const auto& f : v.parts) {
    const double r = ep_norm(ep_apply_shifted(f, lambda));
    s += r * r;
  }
  return std::sqrt(s);
}

double HalfLineBackend::domain_residual(const HalfVec& x) const {
  double s = 0.0;
  for (const auto& f : x.parts) s += std::abs(f.value_at_zero()) + std::abs(f.derivative_at_zero());
  return s;
}

HalfLineBackend as_backend(int copies, bool mixing) { return HalfLineBackend(copies, mixing); }

}  // namespace kvb
