#include "kvb/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace kvb::io {

namespace {

[[noreturn]] void parse_fail(const std::string& what) { throw Error(ErrorCode::ParseError, what); }

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) parse_fail(std::string("missing field \"") + key + "\"");
  return j.at(key);
}

double number(const Json& j, const std::string& where) {
  if (!j.is_number()) parse_fail(where + ": expected a number");
  return j.get<double>();
}

cplx complex_of(const Json& j, const std::string& where) {
  if (j.is_number()) return j.get<double>();
  if (!j.is_array() || j.size() != 2) parse_fail(where + ": expected [re, im]");
  return {number(j[0], where), number(j[1], where)};
}

// List of columns, each of length `rows`.
Mat columns_of(const Json& j, Index rows, const std::string& where) {
  if (!j.is_array()) parse_fail(where + ": expected a list of columns");
  Mat m(rows, Index(j.size()));
  for (std::size_t c = 0; c < j.size(); ++c) {
    const Json& col = j[c];
    if (!col.is_array() || Index(col.size()) != rows)
      parse_fail(where + ": column " + std::to_string(c) + " must have " + std::to_string(rows) +
                 " entries");
    for (std::size_t r = 0; r < col.size(); ++r) m(Index(r), Index(c)) = complex_of(col[r], where);
  }
  return m;
}

Json columns_to_json(const Mat& m) {
  Json out = Json::array();
  for (Index c = 0; c < m.cols(); ++c) {
    Json col = Json::array();
    for (Index r = 0; r < m.rows(); ++r) col.push_back(complex_to_json(m(r, c)));
    out.push_back(col);
  }
  return out;
}

std::vector<double> numbers(const Json& j, const std::string& where) {
  if (!j.is_array()) parse_fail(where + ": expected a list of numbers");
  std::vector<double> out;
  for (const auto& x : j) out.push_back(number(x, where));
  return out;
}

void dump_into(std::string& s, const Json& j, int indent) {
  const std::string pad(std::size_t(indent + 2), ' ');
  const std::string close(std::size_t(indent), ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        s += "{}";
        return;
      }
      s += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) s += ",\n";
        first = false;
        s += pad + Json(it.key()).dump() + ": ";
        dump_into(s, it.value(), indent + 2);
      }
      s += "\n" + close + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        s += "[]";
        return;
      }
      // Short numeric rows (complex pairs, small vectors) stay on one line.
      bool flat = j.size() <= 4;
      for (const auto& x : j) flat = flat && x.is_primitive();
      if (flat) {
        s += "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) s += ", ";
          dump_into(s, j[i], indent);
        }
        s += "]";
        return;
      }
      s += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) s += ",\n";
        s += pad;
        dump_into(s, j[i], indent + 2);
      }
      s += "\n" + close + "]";
      return;
    }
    case Json::value_t::number_float: {
      const double x = j.get<double>();
      s += std::isfinite(x) ? fmt(x) : "null";
      return;
    }
    default:
      s += j.dump();
  }
}

}  // namespace

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string dump(const Json& j) {
  std::string s;
  dump_into(s, j, 0);
  return s + "\n";
}

Json parse(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    parse_fail(e.what());
  }
}

Json read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) parse_fail("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

Json complex_to_json(cplx z) { return Json::array({z.real(), z.imag()}); }

Json real_to_json(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

ExtensionProblem problem_from_json(const Json& j) {
  const Json& dj = field(j, "dim");
  if (!dj.is_number_integer() || dj.get<long long>() < 1) parse_fail("dim must be a positive integer");
  const Index n = dj.get<Index>();
  const Mat basis = columns_of(field(j, "domain_basis"), n, "domain_basis");
  const Mat action = columns_of(field(j, "action"), n, "action");
  const Mat sd = columns_of(field(j, "s_d"), n, "s_d");
  if (action.cols() != basis.cols()) parse_fail("action must have one column per domain_basis column");
  if (sd.cols() != n) parse_fail("s_d must be square");

  const Json& g = field(j, "gap");
  double a = kNegInf;
  const Json& aj = field(g, "a");
  if (aj.is_string()) {
    if (aj.get<std::string>() != "-inf") parse_fail("gap.a: expected a number or \"-inf\"");
  } else {
    a = number(aj, "gap.a");
  }
  const double b = number(field(g, "b"), "gap.b");
  // Mathematical problems (gap order, Hermiticity, dependence) surface as
  // their own codes from the constructors below.
  return ExtensionProblem(basis, action, sd, GapInterval(a, b));
}

Json problem_to_json(const ExtensionProblem& p) {
  Json gap = {{"a", p.gap().semi_infinite() ? Json("-inf") : Json(p.gap().a())}, {"b", p.gap().b()}};
  return {{"dim", p.dim()},
          {"domain_basis", columns_to_json(p.domain().columns())},
          {"action", columns_to_json(p.action())},
          {"s_d", columns_to_json(p.s_d())},
          {"gap", gap}};
}

Targets targets_from_json(const Json& j) {
  if (j.is_object() && j.contains("lambdas")) return numbers(j.at("lambdas"), "lambdas");
  const Json& s = field(j, "set");
  NetRequest req;
  if (s.contains("intervals")) {
    const Json& iv = s.at("intervals");
    if (!iv.is_array()) parse_fail("set.intervals: expected a list");
    for (const auto& x : iv) {
      const auto ends = numbers(x, "set.intervals");
      if (ends.size() != 2) parse_fail("set.intervals: each interval is [x, y]");
      req.set.intervals.emplace_back(ends[0], ends[1]);
    }
  }
  if (s.contains("points")) req.set.points = numbers(s.at("points"), "set.points");
  const Json& c = field(j, "count");
  if (!c.is_number_integer() || c.get<long long>() < 1) parse_fail("count must be a positive integer");
  req.count = c.get<Index>();
  return req;
}

BirmanParameter parameter_from_json(const Json& j, Index dim) {
  const Mat support = columns_of(field(j, "support"), dim, "support");
  const Json& mj = field(j, "matrix");
  const Index k = support.cols();
  if (!mj.is_array() || Index(mj.size()) != k) parse_fail("matrix must be k x k for k support vectors");
  Mat m(k, k);
  for (Index r = 0; r < k; ++r) {
    const Json& row = mj[std::size_t(r)];
    if (!row.is_array() || Index(row.size()) != k) parse_fail("matrix must be k x k");
    for (Index c = 0; c < k; ++c) m(r, c) = complex_of(row[std::size_t(c)], "matrix");
  }
  return BirmanParameter{Frame::from_orthonormal(support), HermMatrix(m)};
}

ExpPoly exppoly_from_json(const Json& j) {
  const Json& ts = field(j, "terms");
  if (!ts.is_array()) parse_fail("terms: expected a list");
  std::vector<ExpTerm> terms;
  for (const auto& t : ts) {
    const Json& k = field(t, "k");
    if (!k.is_number_integer()) parse_fail("terms.k: expected an integer");
    terms.push_back({k.get<int>(), number(field(t, "a"), "terms.a"), complex_of(field(t, "c"), "terms.c")});
  }
  return ExpPoly(terms);
}

Json exppoly_to_json(const ExpPoly& f) {
  Json ts = Json::array();
  for (const auto& t : f.terms()) ts.push_back({{"k", t.k}, {"a", t.a}, {"c", complex_to_json(t.c)}});
  return {{"terms", ts}};
}

Json gap_check_to_json(const GapCheck& g) {
  return {{"branch", g.branch == GapBranch::SemiInfinite ? "semibounded" : "finite"},
          {"measured", real_to_json(g.measured)},
          {"required", real_to_json(g.required)},
          {"margin", real_to_json(g.margin())},
          {"verdict", g.holds()}};
}

Json spectrum_to_json(const std::vector<SpectrumRow>& rows) {
  Json out = Json::array();
  for (const auto& r : rows)
    out.push_back({{"eigenvalue", r.eigenvalue}, {"multiplicity", r.multiplicity}, {"residual", r.residual}});
  return out;
}

Json multiplicities_to_json(const std::vector<TargetMultiplicity>& rows) {
  Json out = Json::array();
  for (const auto& r : rows)
    out.push_back({{"lambda", r.lambda}, {"repeat", r.repeat}, {"observed", r.observed}});
  return out;
}

Json example_to_json(const ExampleReport& r) {
  Json out = {{"lambda", r.lambda}, {"p", complex_to_json(r.p)}};
  out["beta_closed"] = r.beta_closed;
  out["beta_general"] = r.beta_general;
  if (r.beta_only) return out;
  out["q"] = complex_to_json(r.q);
  out["q_over_p"] = complex_to_json(r.q_over_p);
  out["v"] = exppoly_to_json(r.v);
  out["z"] = exppoly_to_json(r.z);
  out["w"] = exppoly_to_json(r.w);
  out["w_reference"] = exppoly_to_json(r.w_reference);
  out["sign_flag"] = to_string(r.sign_flag);
  out["u"] = exppoly_to_json(r.u);
  out["h"] = exppoly_to_json(r.h);
  out["sf_h"] = exppoly_to_json(r.sf_h);
  out["residuals"] = {{"w", r.w_residual}, {"u", r.u_residual}, {"h", r.h_residual}, {"q", r.q_residual}};
  return out;
}

void write_spectrum_csv(std::ostream& os, const std::vector<SpectrumRow>& rows) {
  os << "eigenvalue,multiplicity,residual\n";
  for (const auto& r : rows) os << fmt(r.eigenvalue) << ',' << r.multiplicity << ',' << fmt(r.residual) << '\n';
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "lambda,beta_closed,beta_general,abs_diff\n";
  for (const auto& r : rows)
    os << fmt(r.lambda) << ',' << fmt(r.beta_closed) << ',' << fmt(r.beta_general) << ',' << fmt(r.abs_diff)
       << '\n';
}

}  // namespace kvb::io
