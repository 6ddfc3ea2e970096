#pragma once

// File formats. Everything numeric is written with 17 significant digits so
// a value read back is bit-identical; non-finite values become null in JSON
// and "inf"/"-inf"/"nan" in CSV.

#include <iosfwd>
#include <string>
#include <variant>

#include "json.hpp"
#include "kvb/engineering.hpp"
#include "kvb/halfline.hpp"

namespace kvb::io {

using Json = nlohmann::ordered_json;

/// "%.17g"; "inf", "-inf", "nan" for non-finite values.
std::string fmt(double x);

/// Pretty printer with 2-space indent, insertion-ordered keys and fmt()
/// for floating point.
std::string dump(const Json& j);

/// Parses text; malformed input throws ParseError.
Json parse(const std::string& text);
Json read_file(const std::string& path);

// Problem JSON:
//   {"dim": N, "domain_basis": [col, ...], "action": [col, ...],
//    "s_d": [col, ...], "gap": {"a": number | "-inf", "b": number}}
// with each col a list of [re, im]. Structural problems throw ParseError;
// the mathematical conditions are left to validate().
ExtensionProblem problem_from_json(const Json& j);
Json problem_to_json(const ExtensionProblem& p);

struct NetRequest {
  SetSpec set;
  Index count;
};
/// {"lambdas": [...]} or {"set": {"intervals": [[x, y], ...], "points": [...]}, "count": M}.
using Targets = std::variant<std::vector<double>, NetRequest>;
Targets targets_from_json(const Json& j);

/// {"support": [col, ...], "matrix": [[[re, im], ...], ...]} with matrix
/// given row by row in the support basis.
BirmanParameter parameter_from_json(const Json& j, Index dim);

/// {"terms": [{"k": int, "a": number, "c": [re, im]}]}
ExpPoly exppoly_from_json(const Json& j);
Json exppoly_to_json(const ExpPoly& f);

Json complex_to_json(cplx z);
Json real_to_json(double x);  // null when not finite

Json gap_check_to_json(const GapCheck& g);
Json spectrum_to_json(const std::vector<SpectrumRow>& rows);
Json multiplicities_to_json(const std::vector<TargetMultiplicity>& rows);
Json example_to_json(const ExampleReport& r);

/// Per-target residual table, Gram condition and T spectrum.
template <class V>
Json certificate_to_json(const EngineeringCertificate<V>& c, double tol) {
  Json rows = Json::array();
  for (const auto& r : c.records)
    rows.push_back({{"lambda", r.lambda},
                    {"y_norm", r.y_norm},
                    {"eigen_residual", r.eigen_residual},
                    {"reconstruction_residual", r.reconstruction_residual},
                    {"kernel_residual", r.kernel_residual},
                    {"inverse_residual", r.inverse_residual},
                    {"split_residual", r.split_residual}});
  Json spec = Json::array();
  for (double x : c.t_spectrum) spec.push_back(x);
  return {{"records", rows},
          {"gram_condition", real_to_json(c.parameter.gram.condition)},
          {"t_spectrum", spec},
          {"w_dim", c.w_dim},
          {"max_residual", c.max_residual()},
          {"tolerance", tol},
          {"passed", c.passed(tol)}};
}

void write_spectrum_csv(std::ostream& os, const std::vector<SpectrumRow>& rows);
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

}  // namespace kvb::io
