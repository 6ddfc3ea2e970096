#pragma once

// S = -d^2/dt^2 + 1 on the half-line, computed exactly on finite sums
// c t^k e^{-a t} (a > 0). The Friedrichs extension has Dirichlet condition
// f(0) = 0, ker S* = span{e^{-t}}, and the deficiency space at lambda < 1
// is span{e^{-mu t}} with mu = sqrt(1 - lambda).
//
// Decay rates are never computed approximately except for mu, and mu is
// always produced by decay_for(), so equal decays compare equal bit for
// bit and terms merge on exact keys.

#include <string>
#include <vector>

#include "kvb/engineering.hpp"

namespace kvb {

struct ExpTerm {
  int k;     // power of t
  double a;  // decay, > 0
  cplx c;
  friend bool operator==(const ExpTerm&, const ExpTerm&) = default;
};

class ExpPoly {
 public:
  ExpPoly() = default;
  /// Canonicalizes: merges equal (k, a), sorts by (a, k), drops zeros.
  explicit ExpPoly(std::vector<ExpTerm> terms);

  static ExpPoly exp(double a, cplx c = 1.0) { return ExpPoly(std::vector<ExpTerm>{ExpTerm{0, a, c}}); }
  static ExpPoly term(int k, double a, cplx c) { return ExpPoly(std::vector<ExpTerm>{ExpTerm{k, a, c}}); }

  const std::vector<ExpTerm>& terms() const noexcept { return terms_; }
  bool is_zero() const noexcept { return terms_.empty(); }
  /// Coefficient of t^k e^{-a t}; zero when absent.
  cplx coefficient(int k, double a) const;

  cplx operator()(double t) const;
  cplx value_at_zero() const;
  cplx derivative_at_zero() const;

  friend ExpPoly operator+(const ExpPoly& f, const ExpPoly& g);
  friend ExpPoly operator-(const ExpPoly& f, const ExpPoly& g);
  friend ExpPoly operator*(cplx s, const ExpPoly& f);
  ExpPoly operator-() const { return cplx(-1.0) * *this; }
  friend bool operator==(const ExpPoly&, const ExpPoly&) = default;

 private:
  std::vector<ExpTerm> terms_;
};

/// Largest coefficient difference |f - g| over all terms.
double coefficient_distance(const ExpPoly& f, const ExpPoly& g);

/// integral_0^inf conj(f) g dt, exactly.
cplx ep_inner(const ExpPoly& f, const ExpPoly& g);
double ep_norm(const ExpPoly& f);

/// -f'' + f.
ExpPoly ep_apply_S(const ExpPoly& f);
/// -f'' + f - lambda f.
ExpPoly ep_apply_shifted(const ExpPoly& f, double lambda);

/// The L^2 solution of -w'' + w = g with w(0) = 0.
ExpPoly friedrichs_solve(const ExpPoly& g);
/// The L^2 solution of -w'' + (1 - lambda) w = g with w(0) = 0, lambda < 1.
ExpPoly friedrichs_resolvent(const ExpPoly& g, double lambda);

/// sqrt(1 - lambda); throws NotInGap for lambda >= 1.
double decay_for(double lambda);
ExpPoly deficiency_fn(double lambda);

double beta_closed(double lambda);
/// lambda <z, S_F (S_F - lambda)^{-1} z> / |z|^2 with z = e^{-t}.
double beta_general(double lambda);

enum class SignFlag { Same, Opposite, Mismatch };
std::string to_string(SignFlag f);

struct ExampleReport {
  double lambda;
  cplx p;
  bool beta_only = false;  // lambda = 0: only beta is reported
  cplx q{}, q_over_p{};
  ExpPoly v, z, w, w_reference, u, h, sf_h;
  double beta_closed = 0, beta_general = 0;
  SignFlag sign_flag = SignFlag::Mismatch;
  double w_residual = 0;   // |S_F w - v| plus |w(0)|
  double u_residual = 0;   // coefficient distance of u from p e^{-t}
  double h_residual = 0;   // coefficient distance of S_F h from e^{-mu t}
  double q_residual = 0;   // |q/p - 2/(mu + 1)|
};

ExampleReport reproduce_example(double lambda, cplx p);

struct SweepRow {
  double lambda, beta_closed, beta_general, abs_diff;
};

std::vector<SweepRow> beta_sweep(std::span<const double> grid);
/// Rows sorted by lambda have strictly increasing beta_closed.
bool strictly_increasing(std::vector<SweepRow> rows);

// ------------------------------------------------------------- backend

/// Element of the orthogonal sum of M copies of L^2(0, inf).
struct HalfVec {
  std::vector<ExpPoly> parts;

  friend HalfVec operator+(const HalfVec& f, const HalfVec& g);
  friend HalfVec operator-(const HalfVec& f, const HalfVec& g);
  friend HalfVec operator*(cplx s, const HalfVec& f);
};

class HalfLineBackend {
 public:
  using Vector = HalfVec;

  /// With `mixing`, deficiency frames are rotated across copies by the
  /// orthonormal DCT-II matrix, so eigenvectors spread over several copies.
  explicit HalfLineBackend(int copies, bool mixing = false);

  int copies() const noexcept { return m_; }

  cplx inner(const HalfVec& f, const HalfVec& g) const;
  HalfVec zero() const { return HalfVec{std::vector<ExpPoly>(std::size_t(m_))}; }
  HalfVec sd_apply_inverse(const HalfVec& v) const;
  HalfVec sd_resolvent(const HalfVec& v, double lambda) const;
  std::vector<HalfVec> kernel_frame() const;
  std::vector<HalfVec> deficiency_frame(double lambda) const;
  /// Per copy: z = 2 <e^{-t}, v> e^{-t}, x = S_F^{-1}(v - z). Throws
  /// DecompositionMismatch if x'(0) is not zero to 1e-12.
  SbarSplit<HalfVec> sbar_decompose(const HalfVec& v) const;
  double adjoint_residual(const HalfVec& v, double lambda) const;
  /// |x(0)| + |x'(0)| summed over copies (D(S-bar) needs both to vanish).
  double domain_residual(const HalfVec& x) const;
  GapInterval gap() const { return GapInterval(kNegInf, 1.0); }

  /// Single-copy vector helper.
  HalfVec in_copy(int j, const ExpPoly& f) const;

 private:
  int m_;
  bool mixing_;
  Mat mix_;
};

static_assert(HilbertBackend<HalfLineBackend>);

HalfLineBackend as_backend(int copies, bool mixing = false);

}  // namespace kvb
