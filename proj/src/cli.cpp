#include "kvb/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "kvb/io.hpp"

namespace kvb::cli {

namespace {

using io::Json;

// A well-formed problem that fails validate() or its own constructors.
struct ValidationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad combination of flags discovered after CLI11 parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  double tol = 1e-10;
  std::uint64_t seed = 42;
  std::string format;  // empty: command default
  std::string out;
};

struct Output {
  int code = kOk;
  std::string text;
};

ExtensionProblem load_problem(const std::string& path) {
  const Json j = io::read_file(path);
  try {
    ExtensionProblem p = io::problem_from_json(j);
    validate(p);
    return p;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseError) throw;
    throw ValidationFailure(e.what());
  }
}

double parse_bound(const std::string& s) {
  if (s == "-inf") return kNegInf;
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double x = std::stod(s, &used);
    if (used == s.size()) return x;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::ParseError, "not a number: " + s);
}

std::string pick_format(const RunConfig& cfg, const std::string& fallback, bool csv_ok) {
  const std::string f = cfg.format.empty() ? fallback : cfg.format;
  if (f == "csv" && !csv_ok) throw UsageError("this command has no CSV output; use --format json");
  return f;
}

std::vector<double> grid(double from, double to, int steps) {
  if (steps < 1) throw UsageError("--steps must be at least 1");
  std::vector<double> g;
  for (int i = 0; i < steps; ++i)
    g.push_back(i == 0 ? from : i == steps - 1 ? to : from + (to - from) * double(i) / double(steps - 1));
  return g;
}

std::string spectrum_csv(const std::vector<SpectrumRow>& rows) {
  std::ostringstream os;
  io::write_spectrum_csv(os, rows);
  return os.str();
}

// ------------------------------------------------------------- commands

Output cmd_check_gap(const RunConfig& cfg, const std::string& file, const std::optional<std::string>& a,
                     const std::optional<std::string>& b) {
  pick_format(cfg, "json", false);
  const auto p = load_problem(file);
  const GapInterval g(a ? parse_bound(*a) : p.gap().a(), b ? parse_bound(*b) : p.gap().b());
  const GapCheck c = gap_check(p, g);
  Json j = {{"gap", {{"a", g.semi_infinite() ? Json("-inf") : Json(g.a())}, {"b", g.b()}}}};
  const Json verdict = io::gap_check_to_json(c);
  for (const auto& [k, v] : verdict.items()) j[k] = v;
  return {c.holds() ? kOk : kVerdictFailed, io::dump(j)};
}

Output cmd_adjoint(const RunConfig& cfg, const std::string& file) {
  pick_format(cfg, "json", false);
  const auto p = load_problem(file);
  const auto adj = adjoint_relation(p);
  const double defect = subspace_distance(adj.graph(), adjoint(p.graph()).graph());
  Json kernel = Json::array();
  for (Index i = 0; i < p.kernel_frame().size(); ++i) {
    Json col = Json::array();
    for (Index r = 0; r < p.dim(); ++r) col.push_back(io::complex_to_json(p.kernel_frame().columns()(r, i)));
    kernel.push_back(col);
  }
  const double inside = p.gap().semi_infinite() ? p.gap().b() - 1.0 : 0.5 * (p.gap().a() + p.gap().b());
  Json j = {{"dim", p.dim()},
            {"domain_dim", p.domain().size()},
            {"adjoint_dim", adj.dim()},
            {"deficiency_index", p.deficiency_index()},
            {"deficiency_at_gap_point", deficiency_space(p, inside).size()},
            {"deficiency_at_i", deficiency_space(p, cplx(0, 1)).size()},
            {"graph_adjoint_distance", defect},
            {"kernel_frame", kernel}};
  return {defect < cfg.tol ? kOk : kVerdictFailed, io::dump(j)};
}

Json extension_json(const SelfAdjointExtension& ext, const std::vector<SpectrumRow>& spec, double defect) {
  const auto rep = invertibility_report(ext);
  return {{"selfadjoint_defect", defect},
          {"kernel_dim", rep.kernel.size()},
          {"t_kernel_dim", rep.t_kernel.size()},
          {"kernel_distance", rep.kernel_distance},
          {"invertible", rep.invertible},
          {"t_invertible", rep.t_invertible},
          {"consistent", rep.consistent()},
          {"spectrum", io::spectrum_to_json(spec)}};
}

Output cmd_extend(const RunConfig& cfg, const std::string& file, const std::optional<std::string>& param_file,
                  const std::optional<double>& beta) {
  const std::string fmt = pick_format(cfg, "json", true);
  const auto p = load_problem(file);
  BirmanParameter t = BirmanParameter::friedrichs(p.dim());
  if (param_file && beta) throw UsageError("give either --parameter or --beta");
  if (param_file) t = io::parameter_from_json(io::read_file(*param_file), p.dim());
  if (beta) t = BirmanParameter::scalar(p.kernel_frame(), *beta);
  const auto ext = build_extension(p, t);
  const auto spec = spectrum_rows(ext.relation);
  const double defect = selfadjoint_defect(ext.relation);
  const int code = defect < cfg.tol ? kOk : kVerdictFailed;
  if (fmt == "csv") return {code, spectrum_csv(spec)};
  return {code, io::dump(extension_json(ext, spec, defect))};
}

Output cmd_kvn(const RunConfig& cfg, const std::string& file, double lambda) {
  const std::string fmt = pick_format(cfg, "json", true);
  const auto p = load_problem(file);
  const auto ext = krein_type_extension(p, lambda);
  const auto spec = spectrum_rows(ext.relation);
  const double defect = selfadjoint_defect(ext.relation);
  Index mult = 0;
  for (const auto& r : spec)
    if (std::abs(r.eigenvalue - lambda) < 1e-8) mult = r.multiplicity;
  const bool ok = defect < cfg.tol && mult >= p.deficiency_index();
  if (fmt == "csv") return {ok ? kOk : kVerdictFailed, spectrum_csv(spec)};
  Json j = {{"lambda", lambda},
            {"deficiency_index", p.deficiency_index()},
            {"lambda_multiplicity", mult},
            {"selfadjoint_defect", defect},
            {"spectrum", io::spectrum_to_json(spec)}};
  return {ok ? kOk : kVerdictFailed, io::dump(j)};
}

Output cmd_beta(const RunConfig& cfg, const std::string& file, double lambda) {
  pick_format(cfg, "json", false);
  const auto p = load_problem(file);
  const double beta = beta_unital(p, lambda);
  const auto kvn = krein_type_extension(p, lambda);
  const auto par = std::isinf(beta) ? BirmanParameter::friedrichs(p.dim())
                                    : BirmanParameter::scalar(p.kernel_frame(), beta);
  const auto ext = build_extension(p, par);
  const double dist = subspace_distance(kvn.relation.graph(), ext.relation.graph());
  const auto rep = invertibility_report(ext);
  Json j = {{"lambda", lambda},
            {"beta", io::real_to_json(beta)},
            {"friedrichs", std::isinf(beta)},
            {"graph_distance", dist},
            {"kernel_dim", rep.kernel.size()}};
  return {dist < 1e-9 ? kOk : kVerdictFailed, io::dump(j)};
}

Output engineer_report(const RunConfig& cfg, const ExtensionProblem& p, const std::vector<double>& targets,
                       std::optional<std::uint64_t> seed, const std::string& fmt, Json extra) {
  const auto res = engineer(p, targets, seed);
  const bool passed = res.certificate.passed(cfg.tol);
  if (fmt == "csv") return {passed ? kOk : kVerdictFailed, spectrum_csv(res.spectrum)};
  Json tj = Json::array();
  for (double t : targets) tj.push_back(t);
  Json j = {{"targets", tj}};
  for (auto& [k, v] : extra.items()) j[k] = v;
  j["certificate"] = io::certificate_to_json(res.certificate, cfg.tol);
  j["spectrum"] = io::spectrum_to_json(res.spectrum);
  j["multiplicities"] = io::multiplicities_to_json(res.multiplicities);
  j["multiplicities_ok"] = res.multiplicities_ok();
  return {passed ? kOk : kVerdictFailed, io::dump(j)};
}

Output cmd_engineer(const RunConfig& cfg, const std::string& file, const std::optional<std::string>& targets_file,
                    const std::vector<double>& lambdas, bool randomize) {
  const std::string fmt = pick_format(cfg, "json", true);
  const auto p = load_problem(file);
  std::vector<double> targets = lambdas;
  if (targets_file) {
    const auto t = io::targets_from_json(io::read_file(*targets_file));
    if (!std::holds_alternative<std::vector<double>>(t))
      throw Error(ErrorCode::ParseError, "engineer takes {\"lambdas\": [...]}; sets go to netspec");
    targets = std::get<std::vector<double>>(t);
  }
  if (targets.empty()) throw UsageError("no targets: give a targets file or --lambdas");
  return engineer_report(cfg, p, targets, randomize ? std::optional(cfg.seed) : std::nullopt, fmt, Json::object());
}

Output cmd_netspec(const RunConfig& cfg, const std::string& file, const std::string& set_file,
                   std::optional<Index> count) {
  const std::string fmt = pick_format(cfg, "json", true);
  const auto p = load_problem(file);
  const auto t = io::targets_from_json(io::read_file(set_file));
  if (!std::holds_alternative<io::NetRequest>(t))
    throw Error(ErrorCode::ParseError, "netspec takes {\"set\": {...}, \"count\": M}");
  const auto& req = std::get<io::NetRequest>(t);
  const Index m = count.value_or(req.count);
  if (m < 1) throw UsageError("--count must be at least 1");
  const auto plan = net_targets(req.set, m, p.gap());
  const auto res = engineer(p, plan.targets);
  const bool ok = res.certificate.passed(cfg.tol) && res.multiplicities_ok();
  if (fmt == "csv") {
    std::ostringstream os;
    os << "target,eigen_residual,covering_radius\n";
    for (const auto& r : res.certificate.records)
      os << io::fmt(r.lambda) << ',' << io::fmt(r.eigen_residual) << ',' << io::fmt(plan.covering_radius) << '\n';
    return {ok ? kOk : kVerdictFailed, os.str()};
  }
  Json tj = Json::array();
  for (double x : plan.targets) tj.push_back(x);
  Json j = {{"count", m},
            {"targets", tj},
            {"covering_radius", plan.covering_radius},
            {"certificate", io::certificate_to_json(res.certificate, cfg.tol)},
            {"multiplicities", io::multiplicities_to_json(res.multiplicities)},
            {"realized", res.multiplicities_ok()}};
  return {ok ? kOk : kVerdictFailed, io::dump(j)};
}

Output cmd_hl_demo(const RunConfig& cfg, double lambda, const std::vector<double>& p) {
  pick_format(cfg, "json", false);
  if (p.size() != 1 && p.size() != 2) throw UsageError("--p takes re or re,im");
  const auto r = reproduce_example(lambda, cplx(p[0], p.size() == 2 ? p[1] : 0.0));
  return {kOk, io::dump(io::example_to_json(r))};
}

Output cmd_hl_sweep(const RunConfig& cfg, const std::vector<double>& lambdas) {
  const std::string fmt = pick_format(cfg, "csv", true);
  const auto rows = beta_sweep(lambdas);
  double worst = 0.0;
  for (const auto& r : rows) worst = std::max(worst, r.abs_diff);
  const int code = worst < cfg.tol ? kOk : kVerdictFailed;
  if (fmt == "csv") {
    std::ostringstream os;
    io::write_sweep_csv(os, rows);
    return {code, os.str()};
  }
  Json jr = Json::array();
  for (const auto& r : rows)
    jr.push_back({{"lambda", r.lambda},
                  {"beta_closed", r.beta_closed},
                  {"beta_general", r.beta_general},
                  {"abs_diff", r.abs_diff}});
  Json j = {{"rows", jr}, {"max_abs_diff", worst}, {"strictly_increasing", strictly_increasing(rows)}};
  return {code, io::dump(j)};
}

Output cmd_hl_engineer(const RunConfig& cfg, int copies, const std::vector<double>& targets, bool mixing,
                       bool randomize) {
  pick_format(cfg, "json", false);
  if (targets.empty()) throw UsageError("--targets is required");
  const auto b = as_backend(copies, mixing);
  const auto c = certify_pipeline(b, targets, randomize ? std::optional(cfg.seed) : std::nullopt);
  Json tj = Json::array();
  for (double t : targets) tj.push_back(t);
  Json j = {{"copies", copies}, {"mixing", mixing}, {"targets", tj}};
  j["certificate"] = io::certificate_to_json(c, cfg.tol);
  return {c.passed(cfg.tol) ? kOk : kVerdictFailed, io::dump(j)};
}

// ------------------------------------------------------------ self-test

// S* straight from its definition, (x, y) with <a_i, x> = <d_i, y>, through a
// full-pivot LU kernel and a QR orthonormalization; shares no code with the
// library's adjoint assembly.
Frame oracle_adjoint(const ExtensionProblem& p, const Mat& action) {
  const Index n = p.dim();
  Mat rows(action.cols(), 2 * n);
  rows << action.adjoint(), -p.domain().columns().adjoint();
  Eigen::FullPivLU<Mat> lu(rows);
  lu.setThreshold(1e-10);
  const Mat k = lu.kernel();
  Eigen::HouseholderQR<Mat> qr(k);
  const Mat q = qr.householderQ() * Mat::Identity(k.rows(), k.cols());
  return Frame::from_orthonormal(q);
}

const char* const kInvariants[] = {"adjoint_oracle",   "selfadjoint",         "kernel_match",
                                   "decompose_roundtrip", "deficiency_constant", "engineering_certificate"};
constexpr int kInvariantCount = 6;

struct InstanceResult {
  bool ok[kInvariantCount] = {};
  std::string note;
};

InstanceResult run_instance(std::uint64_t seed, int index, bool corrupt) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(index)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> lower(0.5, 2.0), unit(0.0, 1.0), coef(-1.0, 1.0);
  const Index n = 2 + index % 11;
  const Index d = 1 + (index / 11) % std::min<Index>(4, n - 1);
  InstanceResult r;
  try {
    const auto p = random_problem(rng, {n, d, lower(rng)});

    Mat action = p.action();
    if (corrupt) action(0, 0) += 1e-3;
    const auto adj = adjoint_relation(p);
    r.ok[0] = subspace_distance(adj.graph(), oracle_adjoint(p, action)) < 1e-9;

    const auto par = random_parameter(rng, p, index % 3 == 0);
    const auto ext = build_extension(p, par);
    r.ok[1] = ext.relation.dim() == n && selfadjoint_defect(ext.relation) < 1e-9;
    const auto rep = invertibility_report(ext);
    r.ok[2] = rep.kernel_distance < 1e-9 && rep.consistent() && rep.kernel.size() == rep.t_kernel.size();

    Vec coeff(adj.dim());
    for (Index i = 0; i < coeff.size(); ++i) coeff(i) = cplx(coef(rng), coef(rng));
    const Vec el = adj.graph().columns() * coeff;
    const auto t = decompose(p, el.head(n), el.tail(n));
    const Vec psi = p.domain().columns() * t.f + p.s_d_inverse() * t.w + t.u;
    const Vec phi = p.action() * t.f + t.w;
    const double scale = std::max(1.0, el.norm());
    r.ok[3] = (psi - el.head(n)).norm() < 1e-9 * scale && (phi - el.tail(n)).norm() < 1e-9 * scale;

    const double b = p.gap().b();
    r.ok[4] = deficiency_space(p, b - 1.0).size() == d && deficiency_space(p, cplx(0, 1)).size() == d &&
              deficiency_space(p, b - 4.0).size() == d;

    std::vector<double> targets;
    const Index k = 1 + Index(unit(rng) * double(d)) % d;
    for (Index i = 0; i < k; ++i) targets.push_back(b - 3.0 * unit(rng) - 1e-3);
    if (k >= 2 && index % 2 == 0) targets[1] = targets[0];  // repeated target
    const auto eng = engineer(p, targets);
    r.ok[5] = eng.certificate.passed(1e-9) && eng.multiplicities_ok();
  } catch (const std::exception& e) {
    r.note = e.what();
  }
  return r;
}

Output cmd_selftest(const RunConfig& cfg, int count, int threads, bool inject_fault, std::ostream& err) {
  pick_format(cfg, "json", false);
  if (count < 1) throw UsageError("--count must be at least 1");
  const auto start = std::chrono::steady_clock::now();
  std::vector<InstanceResult> results(static_cast<std::size_t>(count));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < count; i = next++)
      results[std::size_t(i)] = run_instance(cfg.seed, i, inject_fault && i == 0);
  };
  const int pool = std::max(1, std::min(threads, count));
  {
    std::vector<std::jthread> ws;
    for (int t = 0; t < pool; ++t) ws.emplace_back(worker);
  }
  Json inv = Json::array();
  bool all = true;
  for (int k = 0; k < kInvariantCount; ++k) {
    int pass = 0;
    Json first = nullptr;
    for (int i = 0; i < count; ++i) {
      if (results[std::size_t(i)].ok[k])
        ++pass;
      else if (first.is_null())
        first = i;
    }
    all = all && pass == count;
    inv.push_back({{"name", kInvariants[k]}, {"passed", pass}, {"failed", count - pass}, {"first_failure", first}});
  }
  Json notes = Json::array();
  for (int i = 0; i < count; ++i)
    if (!results[std::size_t(i)].note.empty())
      notes.push_back({{"instance", i}, {"error", results[std::size_t(i)].note}});
  Json j = {{"count", count},
            {"seed", cfg.seed},
            {"fault_injected", inject_fault},
            {"invariants", inv},
            {"errors", notes},
            {"all_passed", all}};
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  err << "oracle-selftest: " << count << " instances on " << pool << " thread(s) in " << io::fmt(secs) << " s\n";
  return {all ? kOk : kVerdictFailed, io::dump(j)};
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-adjoint extensions of gapped symmetric operators with prescribed spectra", "kvb"};
  app.require_subcommand(1);
  RunConfig cfg;
  app.add_option("--tol", cfg.tol, "acceptance tolerance")->check(CLI::PositiveNumber);
  app.add_option("--seed", cfg.seed, "random seed");
  app.add_option("--format", cfg.format, "json or csv (default depends on the command)")
      ->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--out", cfg.out, "write the report here instead of standard output");

  std::function<Output()> action;
  std::string problem, second;
  std::optional<std::string> opt_a, opt_b, opt_file;
  std::optional<double> opt_beta;
  std::optional<Index> opt_count;
  double lambda = 0.0;
  std::vector<double> lambdas, pvals{1.0};
  bool flag = false, mixing = false;
  double from = -3.0, to = 0.99;
  int steps = 100, copies = 1, count = 200;
  int threads = int(std::max(1u, std::thread::hardware_concurrency()));

  auto* cg = app.add_subcommand("check-gap", "test the gap inequalities on the problem's domain");
  cg->add_option("problem", problem, "problem JSON")->required();
  cg->add_option("--a", opt_a, "gap start (number or -inf; write --a=-inf)");
  cg->add_option("--b", opt_b, "gap end");
  cg->callback([&] { action = [&] { return cmd_check_gap(cfg, problem, opt_a, opt_b); }; });

  auto* ad = app.add_subcommand("adjoint", "assemble S* and its deficiency spaces");
  ad->add_option("problem", problem, "problem JSON")->required();
  ad->callback([&] { action = [&] { return cmd_adjoint(cfg, problem); }; });

  auto* ex = app.add_subcommand("extend", "build S_T from a Birman parameter (default: Friedrichs)");
  ex->add_option("problem", problem, "problem JSON")->required();
  ex->add_option("--parameter", opt_file, "parameter JSON {support, matrix}");
  ex->add_option("--beta", opt_beta, "scalar parameter on all of ker S*");
  ex->callback([&] { action = [&] { return cmd_extend(cfg, problem, opt_file, opt_beta); }; });

  auto* kv = app.add_subcommand("kvn", "Krein-type extension S_lambda");
  kv->add_option("problem", problem, "problem JSON")->required();
  kv->add_option("--lambda", lambda, "point in the gap")->required();
  kv->callback([&] { action = [&] { return cmd_kvn(cfg, problem, lambda); }; });

  auto* be = app.add_subcommand("beta", "unital parameter of S_lambda");
  be->add_option("problem", problem, "problem JSON")->required();
  be->add_option("--lambda", lambda, "point in the gap")->required();
  be->callback([&] { action = [&] { return cmd_beta(cfg, problem, lambda); }; });

  auto* en = app.add_subcommand("engineer", "extension with prescribed eigenvalues");
  en->add_option("problem", problem, "problem JSON")->required();
  en->add_option("targets", opt_file, "targets JSON {\"lambdas\": [...]}");
  en->add_option("--lambdas", lambdas, "targets inline")->delimiter(',');
  en->add_flag("--random-selection", flag, "pick eigenvectors by a seeded random combination");
  en->callback([&] { action = [&] { return cmd_engineer(cfg, problem, opt_file, lambdas, flag); }; });

  auto* ns = app.add_subcommand("netspec", "eps-net of eigenvalues over a closed set");
  ns->add_option("problem", problem, "problem JSON")->required();
  ns->add_option("set", second, "set JSON {\"set\": {...}, \"count\": M}")->required();
  ns->add_option("--count", opt_count, "override M");
  ns->callback([&] { action = [&] { return cmd_netspec(cfg, problem, second, opt_count); }; });

  auto* hl = app.add_subcommand("halfline", "-d^2/dt^2 + 1 on (0, inf) in closed form");
  hl->require_subcommand(1);
  auto* demo = hl->add_subcommand("demo", "worked example at one lambda");
  demo->add_option("--lambda", lambda, "lambda < 1")->required();
  demo->add_option("--p", pvals, "p as re or re,im")->delimiter(',');
  demo->callback([&] { action = [&] { return cmd_hl_demo(cfg, lambda, pvals); }; });
  auto* sw = hl->add_subcommand("beta-sweep", "beta by both routes over a grid");
  sw->add_option("--from", from, "first lambda");
  sw->add_option("--to", to, "last lambda");
  sw->add_option("--steps", steps, "grid points");
  sw->add_option("--lambdas", lambdas, "explicit grid instead")->delimiter(',');
  sw->callback([&] {
    action = [&] { return cmd_hl_sweep(cfg, lambdas.empty() ? grid(from, to, steps) : lambdas); };
  });
  auto* he = hl->add_subcommand("engineer", "pipeline on M half-line copies");
  he->add_option("--copies", copies, "M")->check(CLI::PositiveNumber);
  he->add_option("--targets", lambdas, "targets")->delimiter(',')->required();
  he->add_flag("--mixing", mixing, "rotate deficiency frames across copies");
  he->add_flag("--random-selection", flag, "pick eigenvectors by a seeded random combination");
  he->callback([&] { action = [&] { return cmd_hl_engineer(cfg, copies, lambdas, mixing, flag); }; });

  auto* st = app.add_subcommand("oracle-selftest", "seeded random instances against independent oracles");
  st->add_option("--count", count, "instances");
  st->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  // Error-path exercise only: corrupts instance 0 so the oracle disagrees.
  st->add_flag("--inject-fault", flag)->group("");
  st->callback([&] { action = [&] { return cmd_selftest(cfg, count, threads, flag, err); }; });

  // Global flags are accepted after the subcommand too.
  for (auto* sub : {cg, ad, ex, kv, be, en, ns, hl, demo, sw, he, st}) sub->fallthrough();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }

  Output res;
  try {
    res = action();
  } catch (const ValidationFailure& e) {
    err << "ValidationError: " << e.what() << "\n";
    return kValidationError;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return e.code() == ErrorCode::ParseError ? kInputError : kVerdictFailed;
  }

  if (cfg.out.empty()) {
    out << res.text;
  } else {
    std::ofstream f(cfg.out, std::ios::binary);
    if (!f) {
      err << "error: cannot write " << cfg.out << "\n";
      return kInputError;
    }
    f << res.text;
  }
  return res.code;
}

}  // namespace kvb::cli
