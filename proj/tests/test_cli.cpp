#include "doctest.h"

#include <cstdlib>

#include "condual/cli_reporting.hpp"
#include "condual/property_suite.hpp"
#include "condual/sample_markets.hpp"

using namespace condual;

namespace {

std::string fixture(const std::string& name) { return std::string(CONDUAL_FIXTURE_DIR) + "/" + name; }

std::string input_error(const std::string& text) {
  try {
    parse_market_spec(text, "t");
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

const char* kBinomial = R"({
  "nodes": [
    {"id": "root", "time": 0, "parent": null, "prices": [1]},
    {"id": "up", "time": 1, "parent": "root", "prob": "1/3", "prices": [2]},
    {"id": "down", "time": 1, "parent": "root", "prob": "2/3", "prices": ["0.5"]}
  ],
  "constraints": {"root": {"type": "box", "lower": [-1], "upper": [null]}}
})";

}  // namespace

TEST_CASE("string rationals give an exact market with defaults filled in") {
  const MarketSpec spec = parse_market_spec(kBinomial, "t");
  CHECK(spec.exact);
  CHECK(spec.horizon == 1);
  CHECK(spec.dimension == 1);
  CHECK(spec.nodes[1].prob == Rational(1, 3));
  CHECK(spec.nodes[2].prices[0] == Rational(1, 2));
  const MarketModel m = build_market(spec);
  CHECK(m.exact());
  CHECK(m.tree().path_prob(1) == Rational(2, 3));
}

TEST_CASE("JSON floats switch to floating mode unless overridden") {
  const std::string text = R"({"nodes": [
    {"id": "r", "time": 0, "parent": null, "prices": [1]},
    {"id": "a", "time": 1, "parent": "r", "prob": 0.25, "prices": [1.5]},
    {"id": "b", "time": 1, "parent": "r", "prob": 0.75, "prices": [0.9]}],
    "constraints": {"r": "whole"}})";
  const MarketSpec spec = parse_market_spec(text);
  CHECK_FALSE(spec.exact);
  CHECK(spec.nodes[1].prob == Rational(1, 4));
  CHECK(spec.nodes[2].prices[0] == Rational(9, 10));
  std::string forced = text;
  forced.insert(forced.rfind('}'), R"(, "exact": true)");
  CHECK(parse_market_spec(forced).exact);
  setenv("CONDUAL_EXACT", "1", 1);
  CHECK(parse_market_spec(text).exact);
  unsetenv("CONDUAL_EXACT");
}

TEST_CASE("input errors name the offending field") {
  const std::string negative = input_error(R"({"nodes": [
    {"id": "r", "time": 0, "parent": null, "prices": [1]},
    {"id": "a", "time": 1, "parent": "r", "prob": 1, "prices": [2]},
    {"id": "b", "time": 1, "parent": "r", "prob": -0.1, "prices": [0.5]}]})");
  CHECK(negative.find("nodes[2]") != std::string::npos);
  CHECK(negative.find("'b'") != std::string::npos);
  CHECK(negative.find("prob") != std::string::npos);

  CHECK(input_error(R"({"nodes": [{"id": "r", "time": 0, "prices": ["x/y"]}]})").find("prices") != std::string::npos);
  CHECK(input_error(R"({"nodes": [)").find("malformed JSON") != std::string::npos);
  CHECK(input_error(R"({"nodes": [{"id": "r", "time": 0, "prices": [1]}],
    "constraints": {"r": {"type": "ball", "center": [0], "radius": -1}}})").find("constraints") != std::string::npos);
  CHECK_THROWS_AS(parse_market_file(fixture("bad_sum.json")), InputError);
  CHECK_THROWS_AS(parse_market_file(fixture("missing.json")), InputError);
}

TEST_CASE("market descriptions round-trip") {
  for (const char* name : {"b1.json", "d1.json", "singleton.json", "box.json", "two_period.json"}) {
    INFO(name);
    const MarketModel m = parse_market_file(fixture(name));
    const Report once = market_spec_to_json(spec_from_model(m));
    const MarketModel again = build_market(parse_market_spec(once.dump()));
    CHECK(market_spec_to_json(spec_from_model(again)) == once);
  }
  for (const auto& [name, market] : samples::golden_markets()) {
    INFO(name);
    const Report j = market_spec_to_json(spec_from_model(market));
    CHECK(market_spec_to_json(spec_from_model(build_market(parse_market_spec(j.dump())))) == j);
  }
}

TEST_CASE("convex sets round-trip through JSON") {
  const std::vector<ConvexSet> sets{
      ConvexSet::whole_space(2),
      ConvexSet::polyhedron({{Rational(1), Rational(-1)}}, {Rational(1, 3)}, 2),
      ConvexSet::box({Rational(0), std::nullopt}, {std::nullopt, Rational(2)}),
      ConvexSet::ball({Rational(1), Rational(0)}, Rational(1, 2)),
      ConvexSet::affine_fixed({std::nullopt, Rational(1)}),
      ConvexSet::singleton({Rational(1), Rational(-1)}),
      ConvexSet::intersection({ConvexSet::whole_space(2), ConvexSet::box({Rational(0), Rational(0)}, {Rational(1), Rational(1)})}),
      ConvexSet::product({samples::interval(Rational(0), Rational(1)), ConvexSet::singleton({Rational(3)})}),
  };
  for (const auto& s : sets) {
    INFO(s.type_name());
    const Report j = convex_set_to_json(s);
    const ConvexSet back = parse_convex_set(j, s.dim(), "set");
    CHECK(back.dim() == s.dim());
    CHECK(convex_set_to_json(back) == j);
  }
}

TEST_CASE("utility descriptors") {
  CHECK(parse_utility("log").family() == UtilityFamily::log);
  CHECK(parse_utility("power:0.3").exponent() == doctest::Approx(0.3));
  CHECK(parse_utility(R"({"family": "power", "p": 0.25})").exponent() == doctest::Approx(0.25));
  const UtilityFunction pw = parse_utility(R"({"family": "piecewise", "breakpoints": [0, 1], "slopes": [2, 1], "u0": 0.5})");
  CHECK(pw.value(2.0).value() == doctest::Approx(3.5));
  CHECK(parse_utility("linear").value(3.0).value() == doctest::Approx(3.0));
  for (const auto& u : {UtilityFunction::log(), UtilityFunction::power(0.4), pw, UtilityFunction::table({0, 1, 2}, {0, 1, 1.5})})
    CHECK(utility_to_json(parse_utility(utility_to_json(u).dump())) == utility_to_json(u));
  CHECK_THROWS_AS(parse_utility("exp"), InputError);
  CHECK_THROWS_AS(parse_utility("power:2"), InputError);
}

TEST_CASE("grids and leaf vectors") {
  CHECK(parse_grid("0.5, 1,2", "x") == std::vector<double>{0.5, 1.0, 2.0});
  CHECK_THROWS_AS(parse_grid("", "x"), InputError);
  CHECK_THROWS_AS(parse_grid("2,1", "x"), InputError);
  CHECK_THROWS_AS(parse_grid("1,inf", "x"), InputError);
  CHECK_THROWS_AS(parse_grid("1,a", "x"), InputError);
  const MarketModel m = samples::b1();
  CHECK(parse_leaf_vector(m, "1/3,2", "payoff") == Vec<Rational>{Rational(1, 3), Rational(2)});
  const std::string up = m.tree().node(m.tree().leaves()[0]).name;
  const std::string down = m.tree().node(m.tree().leaves()[1]).name;
  CHECK(parse_leaf_vector(m, "{\"" + down + "\": 1, \"" + up + "\": \"1/2\"}", "payoff") ==
        Vec<Rational>{Rational(1, 2), Rational(1)});
  CHECK_THROWS_AS(parse_leaf_vector(m, "1", "payoff"), InputError);
}

TEST_CASE("report serialization") {
  CHECK(ext_to_json(ExtReal::pos_inf()) == "inf");
  CHECK(ext_to_json(ExtReal::neg_inf()) == "-inf");
  CHECK(ext_to_json(ExtReal(1.5)) == 1.5);
  const Report empty = Report::object();
  CHECK(emit_report(empty, OutputFormat::json) == "{}\n");
  CHECK(report_verdict(empty) == "no-op");
  CHECK(emit_report(empty, OutputFormat::text).find("no-op") != std::string::npos);

  RunConfig cfg;
  cfg.command = "verify-duality";
  cfg.market_path = fixture("b1.json");
  cfg.x_grid = {0.5, 1.0, 2.0};
  cfg.y_grid = {0.5, 1.0, 2.0};
  cfg.format = OutputFormat::json;
  const RunResult r = run(cfg);
  CHECK(r.exit_code == kExitPass);
  for (const char* key : {"residuals", "worst_gap", "xbar", "verdict"}) CHECK(r.report.contains(key));
  CHECK(report_verdict(r.report) == "pass");
  const Report parsed = Report::parse(emit_report(r.report, OutputFormat::json));
  CHECK(parsed.begin().key() == "schema");
  CHECK(parsed["schema"] == kReportSchema);

  const std::string text = emit_report(r.report, OutputFormat::text);
  const auto last = text.substr(text.rfind("verdict"));
  CHECK(last.find("pass") != std::string::npos);
}

TEST_CASE("driver exit codes") {
  auto code = [](const std::string& command, const std::string& market, std::vector<double> xs = {1.0}) {
    RunConfig cfg;
    cfg.command = command;
    cfg.market_path = market.empty() ? "" : fixture(market);
    cfg.x_grid = std::move(xs);
    return run(cfg).exit_code;
  };
  CHECK(code("solve-primal", "b1.json") == kExitPass);
  CHECK(code("check-conditions", "d1.json") == kExitPass);
  CHECK(code("check-conditions", "arbitrage.json") == kExitFail);
  CHECK(code("solve-primal", "negative_prob.json") == kExitInput);
  CHECK(code("solve-primal", "malformed.json") == kExitInput);
  CHECK(code("solve-primal", "missing.json") == kExitInput);
  CHECK(code("no-such-command", "b1.json") == kExitInput);
  CHECK(code("xbar", "singleton.json", {}) == kExitPass);

  RunConfig cfg;
  cfg.command = "properties";
  cfg.only = {"probability_sum", "polar_antitone"};
  const RunResult r = run(cfg);
  CHECK(r.exit_code == kExitPass);
  cfg.only = {"no_such_property"};
  CHECK(run(cfg).exit_code == kExitInput);
}
