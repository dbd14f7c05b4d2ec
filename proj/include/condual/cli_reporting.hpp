#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "condual/condition_checker.hpp"
#include "condual/dual_solver.hpp"
#include "condual/duality_verifier.hpp"
#include "condual/market.hpp"
#include "condual/primal_solver.hpp"
#include "condual/utility.hpp"

namespace condual {

struct PropertyReport;

/// Insertion-ordered so that emitted key order is stable.
using Report = nlohmann::ordered_json;

inline constexpr const char* kReportSchema = "condual/1";

enum class OutputFormat { text, json };

// --- market files -----------------------------------------------------------
//
// {
//   "horizon": 1, "dimension": 1,
//   "nodes": [{"id": "root", "time": 0, "parent": null, "prices": [1]},
//             {"id": "up", "time": 1, "parent": "root", "prob": "1/2", "prices": [2]}, ...],
//   "constraints": {"root": {"type": "box", "lower": [null], "upper": [1]}, "*": {"type": "whole"}},
//   "floor": null, "endowment": {"up": 1, "down": 0}, "exact": true
// }
//
// Numbers are JSON integers, JSON floats, or strings "p/q" / decimal. The
// market is exact unless a JSON float occurs; "exact" or CONDUAL_EXACT=1
// overrides. The constraint key "*" applies to internal nodes without their
// own entry.

/// Throws InputError with the offending field path, e.g. "nodes[2].prob".
MarketSpec parse_market_spec(std::string_view text, const std::string& source = "<input>");
MarketSpec read_market_spec(const std::filesystem::path& path);
MarketModel parse_market_file(const std::filesystem::path& path);

/// Market description with the tree in storage order (round-trip input).
MarketSpec spec_from_model(const MarketModel& market);
Report market_spec_to_json(const MarketSpec& spec);

ConvexSet parse_convex_set(const Report& j, std::size_t dim, const std::string& where);
Report convex_set_to_json(const ConvexSet& set);

/// JSON object {"family": ...} or a bare name: "log", "power", "power:0.3", "linear".
UtilityFunction parse_utility(std::string_view descriptor);
Report utility_to_json(const UtilityFunction& u);

/// Leaf values either as a JSON object keyed by leaf id or a comma list in leaf order.
Vec<Rational> parse_leaf_vector(const MarketModel& market, std::string_view text, const std::string& what);

/// Comma-separated reals; rejects empty, non-finite and unsorted lists.
std::vector<double> parse_grid(std::string_view text, const std::string& what);

// --- reports ----------------------------------------------------------------

Report ext_to_json(const ExtReal& v);
Report to_report(const MarketModel& market, const PrimalSolution& sol, double x);
Report to_report(const MarketModel& market, const DualSolution& sol, double y);
Report to_report(const DualityReport& report);
Report to_report(const LinkReport& report);
Report to_report(const XbarTriple& triple);
Report to_report(const MarketModel& market, const SuperhedgeResult<double>& result, const Vec<double>& payoff);
Report to_report(const MarketModel& market, const ConditionCertificate& cert, const CompactnessResult& compact);
Report to_report(const PropertyReport& report);

/// "no-op" for an empty report, otherwise the "verdict" member (or "").
std::string report_verdict(const Report& report);

/// JSON mode: pretty JSON, with "schema" first on non-empty reports. Text
/// mode: aligned key/value lines, and one aligned table per array of records.
std::string emit_report(const Report& report, OutputFormat format);

// --- driver -----------------------------------------------------------------

struct RunConfig {
  std::string command;
  std::string market_path;
  std::string utility = "log";
  std::vector<double> x_grid;
  std::vector<double> y_grid;
  double solver_tol = 1e-8;
  double verify_tol = 1e-5;
  OutputFormat format = OutputFormat::text;
  std::uint64_t seed = 42;
  /// Leaf vectors for superhedge / embed-endowment (JSON object or comma list).
  std::string payoff;
  std::string endowment;
  std::string pricing;
  /// Restricts the property suite to these names (empty means all).
  std::vector<std::string> only;
};

inline constexpr int kExitPass = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitInput = 2;

struct RunResult {
  int exit_code = kExitPass;
  Report report;
  std::string error;
};

const std::vector<std::string>& known_commands();

/// Never throws: input problems map to exit 2 with `error` set.
RunResult run(const RunConfig& config);

}  // namespace condual
