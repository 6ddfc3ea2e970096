#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "kvb/cli.hpp"
#include "kvb/io.hpp"

using namespace kvb;

namespace {

const std::string kData = KVB_DATA_DIR;

struct Run {
  int code;
  std::string out, err;
};

Run kvb_run(std::vector<std::string> args) {
  args.insert(args.begin(), "kvb");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string data(const std::string& name) { return kData + "/" + name; }

std::string temp_file(const std::string& name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / ("kvb_test_" + name);
  std::ofstream(path) << text;
  return path.string();
}

io::Json json_of(const Run& r) { return io::parse(r.out); }

}  // namespace

TEST_CASE("check-gap verdicts and exit codes") {
  const auto ok = kvb_run({"check-gap", data("toy_t2.json"), "--b", "2"});
  CHECK(ok.code == cli::kOk);
  const auto j = json_of(ok);
  CHECK(j["verdict"] == true);
  CHECK(j["margin"].get<double>() == 0.0);
  CHECK(j["branch"] == "semibounded");

  const auto bad = kvb_run({"check-gap", data("toy_t2.json"), "--b", "2.5"});
  CHECK(bad.code == cli::kVerdictFailed);
  CHECK(json_of(bad)["verdict"] == false);

  const auto malformed = kvb_run({"check-gap", temp_file("malformed.json", "{\"dim\": 2,")});
  CHECK(malformed.code == cli::kInputError);
  CHECK(malformed.err.find("ParseError") != std::string::npos);

  const auto missing = kvb_run({"check-gap", temp_file("missing.json", "{\"dim\": 2}")});
  CHECK(missing.code == cli::kInputError);

  // Well-formed but 0 is outside the gap: a validation failure, not a parse error.
  std::ifstream in(data("toy_t2.json"));
  std::stringstream ss;
  ss << in.rdbuf();
  auto t2 = io::parse(ss.str());
  t2["gap"]["b"] = -0.5;
  const auto invalid = kvb_run({"check-gap", temp_file("invalid.json", t2.dump())});
  CHECK(invalid.code == cli::kValidationError);
  CHECK(invalid.err.find("NotInGap") != std::string::npos);

  CHECK(kvb_run({"check-gap", data("toy_t2.json"), "--tol", "-1"}).code == cli::kInputError);
  CHECK(kvb_run({"no-such-command"}).code == cli::kInputError);
  CHECK(kvb_run({"--help"}).code == cli::kOk);
}

TEST_CASE("engineer on the four-dimensional toy") {
  const auto r = kvb_run({"engineer", data("toy_t4.json"), data("targets_half_twice.json")});
  REQUIRE(r.code == cli::kOk);
  const auto j = json_of(r);
  bool found = false;
  for (const auto& row : j["spectrum"])
    if (std::abs(row["eigenvalue"].get<double>() - 0.5) < 1e-12) {
      found = true;
      CHECK(row["multiplicity"] == 2);
      CHECK(row["residual"].get<double>() < 1e-12);
    }
  CHECK(found);
  CHECK(j["certificate"]["passed"] == true);

  const auto csv = kvb_run({"engineer", data("toy_t4.json"), "--lambdas", "0.5,0.5", "--format", "csv"});
  CHECK(csv.code == cli::kOk);
  CHECK(csv.out.rfind("eigenvalue,multiplicity,residual\n", 0) == 0);
  CHECK(csv.out.find("\n0.5,2,") != std::string::npos);

  const auto out = kvb_run({"engineer", data("toy_t4.json"), data("targets_outside.json")});
  CHECK(out.code == cli::kVerdictFailed);
  CHECK(out.err.find("NotInGap") != std::string::npos);

  const auto exhausted = kvb_run({"engineer", data("toy_t2.json"), data("targets_two.json")});
  CHECK(exhausted.code == cli::kVerdictFailed);
  CHECK(exhausted.err.find("DeficiencyExhausted") != std::string::npos);
  CHECK(exhausted.err.find("select_eigensystem") != std::string::npos);

  CHECK(kvb_run({"engineer", data("toy_t4.json")}).code == cli::kInputError);
}

TEST_CASE("netspec radius and monotonicity") {
  const auto r = kvb_run({"netspec", data("random_d8.json"), data("set_k.json")});
  REQUIRE(r.code == cli::kOk);
  const auto j = json_of(r);
  CHECK(j["covering_radius"].get<double>() == 0.0625);
  CHECK(j["targets"].size() == 5);
  CHECK(j["realized"] == true);

  double last = INFINITY;
  for (int m = 1; m <= 8; ++m) {
    const auto k = kvb_run({"netspec", data("random_d8.json"), data("set_k.json"), "--count", std::to_string(m)});
    REQUIRE(k.code == cli::kOk);
    const double rad = json_of(k)["covering_radius"].get<double>();
    CHECK(rad <= last);
    last = rad;
  }

  const auto point = temp_file("point.json", R"({"set": {"points": [0]}, "count": 1})");
  const auto p = kvb_run({"netspec", data("random_d8.json"), point});
  CHECK(p.code == cli::kOk);
  CHECK(json_of(p)["covering_radius"].get<double>() == 0.0);

  const auto empty = kvb_run({"netspec", data("toy_t4.json"), data("set_outside.json")});
  CHECK(empty.code == cli::kVerdictFailed);
  CHECK(empty.err.find("EmptyIntersection") != std::string::npos);
}

TEST_CASE("extend, kvn, beta and adjoint") {
  const auto e = kvb_run({"extend", data("toy_t2.json"), "--beta", "0"});
  REQUIRE(e.code == cli::kOk);
  CHECK(json_of(e)["kernel_dim"] == 1);
  CHECK(json_of(e)["consistent"] == true);

  const auto param = temp_file("param.json", R"({"support": [[[0,0],[1,0]]], "matrix": [[[0.5,0]]]})");
  const auto ep = kvb_run({"extend", data("toy_t2.json"), "--parameter", param, "--format", "csv"});
  REQUIRE(ep.code == cli::kOk);
  // S_D^{-1} T e2 + e2 = 1.5 e2 maps to 0.5 e2: eigenvalue 1/3.
  CHECK(ep.out.find("0.33333333333333") != std::string::npos);

  const auto k = kvb_run({"kvn", data("toy_t4.json"), "--lambda", "0.5"});
  REQUIRE(k.code == cli::kOk);
  CHECK(json_of(k)["lambda_multiplicity"] == 2);

  const auto b = kvb_run({"beta", data("toy_t2.json"), "--lambda", "0"});
  REQUIRE(b.code == cli::kOk);
  CHECK(json_of(b)["beta"].get<double>() == 0.0);
  CHECK(json_of(b)["kernel_dim"] == 1);
  const auto b1 = kvb_run({"beta", data("toy_t2.json"), "--lambda", "1"});
  CHECK(b1.code == cli::kOk);
  CHECK(json_of(b1)["beta"].is_null());
  CHECK(kvb_run({"beta", data("toy_t4.json"), "--lambda", "0.5"}).code == cli::kVerdictFailed);  // d = 2

  const auto a = kvb_run({"adjoint", data("toy_t4.json")});
  REQUIRE(a.code == cli::kOk);
  CHECK(json_of(a)["adjoint_dim"] == 6);
  CHECK(json_of(a)["deficiency_at_i"] == 2);
}

TEST_CASE("halfline subcommands") {
  const auto d = kvb_run({"halfline", "demo", "--lambda", "0.75"});
  REQUIRE(d.code == cli::kOk);
  const auto j = json_of(d);
  CHECK(j["beta_closed"].get<double>() == 1.0);
  CHECK(std::abs(j["beta_general"].get<double>() - 1.0) < 1e-12);
  CHECK(j["sign_flag"] == "OPPOSITE");
  CHECK(io::exppoly_from_json(j["u"]) == ExpPoly::exp(1.0));

  CHECK(kvb_run({"halfline", "demo", "--lambda", "1.5"}).code == cli::kVerdictFailed);

  const auto s = kvb_run({"halfline", "beta-sweep", "--from", "-3", "--to", "0.99", "--steps", "100"});
  REQUIRE(s.code == cli::kOk);
  std::istringstream lines(s.out);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "lambda,beta_closed,beta_general,abs_diff");
  int rows = 0;
  double worst = 0.0, last_lambda = 0.0;
  while (std::getline(lines, line)) {
    ++rows;
    std::vector<double> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(std::stod(cell));
    REQUIRE(cells.size() == 4);
    worst = std::max(worst, cells[3]);
    last_lambda = cells[0];
  }
  CHECK(rows == 100);
  CHECK(worst < 1e-10);
  CHECK(last_lambda == 0.99);

  const auto e = kvb_run({"halfline", "engineer", "--copies", "2", "--targets", "0.75,-3", "--mixing"});
  REQUIRE(e.code == cli::kOk);
  CHECK(json_of(e)["certificate"]["passed"] == true);
}

TEST_CASE("oracle self-test") {
  const auto one = kvb_run({"oracle-selftest", "--count", "1"});
  CHECK(one.code == cli::kOk);
  CHECK(json_of(one)["all_passed"] == true);

  const auto many = kvb_run({"oracle-selftest", "--count", "40", "--threads", "3"});
  CHECK(many.code == cli::kOk);
  for (const auto& inv : json_of(many)["invariants"]) CHECK(inv["passed"] == 40);

  const auto fault = kvb_run({"oracle-selftest", "--count", "5", "--inject-fault"});
  CHECK(fault.code == cli::kVerdictFailed);
  const auto fj = json_of(fault);
  CHECK(fj["all_passed"] == false);
  CHECK(fj["invariants"][0]["failed"] == 1);
  CHECK(fj["invariants"][0]["first_failure"] == 0);
}

TEST_CASE("identical inputs give byte-identical outputs") {
  const std::vector<std::vector<std::string>> cmds = {
      {"engineer", data("random_d8.json"), "--lambdas", "0.1,0.2,0.2", "--random-selection", "--seed", "7"},
      {"netspec", data("random_d8.json"), data("set_k.json"), "--format", "csv"},
      {"halfline", "beta-sweep", "--steps", "17"},
      {"oracle-selftest", "--count", "12", "--threads", "4"},
      {"halfline", "engineer", "--copies", "3", "--targets", "0.5,0.5,-1", "--random-selection"},
  };
  for (const auto& c : cmds) {
    const auto a = kvb_run(c), b = kvb_run(c);
    CHECK(a.code == cli::kOk);
    CHECK(a.out == b.out);
  }
  // --out writes the same bytes to a file.
  const auto path = (std::filesystem::temp_directory_path() / "kvb_test_out.csv").string();
  const auto to_file = kvb_run({"halfline", "beta-sweep", "--steps", "17", "--out", path});
  CHECK(to_file.out.empty());
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == kvb_run({"halfline", "beta-sweep", "--steps", "17"}).out);
}

TEST_CASE("JSON formats round trip exactly") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = random_problem(rng, {Index(3 + trial % 5), Index(1 + trial % 2), 0.7});
    const auto q = io::problem_from_json(io::parse(io::dump(io::problem_to_json(p))));
    CHECK(max_abs(q.s_d() - p.s_d()) == 0.0);
    CHECK(max_abs(q.domain().columns() - p.domain().columns()) < 1e-15);
    CHECK(q.gap().b() == p.gap().b());
    CHECK(io::dump(io::problem_to_json(q)).size() > 0);
  }
  const ExpPoly f({{0, 0.5, cplx(1.0 / 3.0, -0.1)}, {2, std::sqrt(0.3), 2.0}});
  CHECK(io::exppoly_from_json(io::parse(io::dump(io::exppoly_to_json(f)))) == f);
  CHECK_THROWS_AS(io::exppoly_from_json(io::parse(R"({"terms": [{"k": 0, "a": -1, "c": [1, 0]}]})")), Error);

  CHECK(io::fmt(0.1) == "0.10000000000000001");
  CHECK(io::fmt(-INFINITY) == "-inf");
  const auto t = io::targets_from_json(io::parse(R"({"set": {"intervals": [[0.25, 0.5]], "points": [0]}, "count": 5})"));
  REQUIRE(std::holds_alternative<io::NetRequest>(t));
  CHECK(std::get<io::NetRequest>(t).count == 5);
  CHECK_THROWS_AS(io::targets_from_json(io::parse(R"({"set": {}, "count": 0})")), Error);
}
