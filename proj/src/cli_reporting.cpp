#include "condual/cli_reporting.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "condual/portfolio_lp.hpp"
#include "condual/property_suite.hpp"

namespace condual {

namespace {

using nlohmann::json;

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

std::vector<std::string> split_commas(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Reads numbers in any accepted notation and remembers whether a binary
/// float was seen (which turns exact mode off).
struct NumberReader {
  bool saw_float = false;

  Rational read(const Report& v, const std::string& where) {
    if (v.is_number_unsigned()) return Rational(v.get<unsigned long long>());
    if (v.is_number_integer()) return Rational(v.get<long long>());
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (!std::isfinite(d)) throw InputError(where + ": number is not finite");
      saw_float = true;
      // The shortest round-trip decimal, read exactly: 0.1 becomes 1/10.
      char buf[64];
      const auto res = std::to_chars(buf, buf + sizeof(buf), d);
      return parse_rational(std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)));
    }
    if (v.is_string()) {
      try {
        return parse_rational(v.get<std::string>());
      } catch (const std::exception& e) {
        throw InputError(where + ": cannot read '" + v.get<std::string>() + "' as a number (" + e.what() + ")");
      }
    }
    throw InputError(where + ": expected a number, got " + std::string(v.type_name()));
  }

  std::optional<Rational> read_optional(const Report& v, const std::string& where) {
    if (v.is_null()) return std::nullopt;
    return read(v, where);
  }

  Vec<Rational> read_vec(const Report& v, const std::string& where) {
    if (!v.is_array()) return {read(v, where)};
    Vec<Rational> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(read(v[i], where + "[" + std::to_string(i) + "]"));
    return out;
  }

  std::vector<std::optional<Rational>> read_bounds(const Report& v, const std::string& where) {
    if (!v.is_array()) throw InputError(where + ": expected an array (null for no bound)");
    std::vector<std::optional<Rational>> out;
    for (std::size_t i = 0; i < v.size(); ++i)
      out.push_back(read_optional(v[i], where + "[" + std::to_string(i) + "]"));
    return out;
  }
};

const Report& member(const Report& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw InputError(where + ": expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw InputError(where + ": missing field \"" + key + "\"");
  return *it;
}

std::string field(const std::string& where, const char* key) { return where + "." + key; }

ConvexSet read_set(const Report& j, std::size_t dim, const std::string& where, NumberReader& num) {
  if (j.is_string() && j.get<std::string>() == "whole") {
    if (dim == 0) throw InputError(where + ": \"whole\" needs a dimension here; use {\"type\": \"whole\", \"dim\": d}");
    return ConvexSet::whole_space(dim);
  }
  const Report& type_field = member(j, "type", where);
  if (!type_field.is_string()) throw InputError(field(where, "type") + ": expected a string");
  const std::string type = type_field.get<std::string>();
  auto explicit_dim = [&]() -> std::size_t {
    if (!j.contains("dim")) return dim;
    const auto& d = j["dim"];
    if (!d.is_number_unsigned() || d.get<std::size_t>() == 0)
      throw InputError(field(where, "dim") + ": expected a positive integer");
    return d.get<std::size_t>();
  };
  auto parts = [&](std::size_t part_dim) {
    const Report& arr = member(j, "parts", where);
    if (!arr.is_array() || arr.empty()) throw InputError(field(where, "parts") + ": expected a nonempty array");
    std::vector<ConvexSet> out;
    for (std::size_t i = 0; i < arr.size(); ++i)
      out.push_back(read_set(arr[i], part_dim, where + ".parts[" + std::to_string(i) + "]", num));
    return out;
  };

  if (type == "whole") {
    const std::size_t d = explicit_dim();
    if (d == 0) throw InputError(where + ": whole space needs \"dim\"");
    return ConvexSet::whole_space(d);
  }
  if (type == "polyhedron") {
    const Report& a = j.contains("A") ? j["A"] : member(j, "a", where);
    if (!a.is_array()) throw InputError(field(where, "A") + ": expected an array of rows");
    Matrix<Rational> rows;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string w = where + ".A[" + std::to_string(i) + "]";
      if (!a[i].is_array()) throw InputError(w + ": expected a row");
      rows.push_back(num.read_vec(a[i], w));
    }
    const Vec<Rational> b = num.read_vec(member(j, "b", where), field(where, "b"));
    std::size_t d = explicit_dim();
    if (!j.contains("dim") && !rows.empty()) d = rows.front().size();
    if (d == 0) throw InputError(where + ": polyhedron without rows needs \"dim\"");
    try {
      return ConvexSet::polyhedron(std::move(rows), b, d);
    } catch (const InputError& e) {
      throw InputError(where + ": " + e.what());
    }
  }
  if (type == "box") {
    std::vector<std::optional<Rational>> lower, upper;
    if (j.contains("lower")) lower = num.read_bounds(j["lower"], field(where, "lower"));
    if (j.contains("upper")) upper = num.read_bounds(j["upper"], field(where, "upper"));
    if (!j.contains("lower") && !j.contains("upper")) lower.resize(explicit_dim());
    if (!j.contains("lower")) lower.resize(upper.size());
    if (!j.contains("upper")) upper.resize(lower.size());
    if (lower.size() != upper.size() || lower.empty()) throw InputError(where + ": lower and upper must have the same positive length");
    for (std::size_t i = 0; i < lower.size(); ++i)
      if (lower[i] && upper[i] && *lower[i] > *upper[i])
        throw InputError(where + ": lower[" + std::to_string(i) + "] exceeds upper[" + std::to_string(i) + "]");
    return ConvexSet::box(std::move(lower), std::move(upper));
  }
  if (type == "ball") {
    Vec<Rational> center = num.read_vec(member(j, "center", where), field(where, "center"));
    Rational radius = num.read(member(j, "radius", where), field(where, "radius"));
    if (radius < 0) throw InputError(field(where, "radius") + ": must be >= 0");
    return ConvexSet::ball(std::move(center), std::move(radius));
  }
  if (type == "affine_fixed") return ConvexSet::affine_fixed(num.read_bounds(member(j, "fixed", where), field(where, "fixed")));
  if (type == "singleton") return ConvexSet::singleton(num.read_vec(member(j, "point", where), field(where, "point")));
  if (type == "intersection") {
    try {
      return ConvexSet::intersection(parts(explicit_dim()));
    } catch (const InputError& e) {
      throw InputError(where + ": " + e.what());
    }
  }
  if (type == "product") return ConvexSet::product(parts(0));
  throw InputError(field(where, "type") + ": unknown set type '" + type + "'");
}

Report rational_json(const Rational& r) {
  if (denominator(r) == 1) {
    const auto& n = numerator(r);
    if (n >= std::numeric_limits<long long>::min() && n <= std::numeric_limits<long long>::max())
      return static_cast<long long>(n);
  }
  return rational_to_string(r);
}

Report rational_vec_json(const Vec<Rational>& v) {
  Report out = Report::array();
  for (const auto& x : v) out.push_back(rational_json(x));
  return out;
}

Report bounds_json(const std::vector<std::optional<Rational>>& v) {
  Report out = Report::array();
  for (const auto& x : v) out.push_back(x ? rational_json(*x) : Report(nullptr));
  return out;
}

Report num(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

Report vec_json(const Vec<double>& v) {
  Report out = Report::array();
  for (double x : v) out.push_back(num(x));
  return out;
}

Report holdings_json(const MarketModel& market, const std::vector<Vec<double>>& holdings) {
  Report out = Report::array();
  for (NodeId n : market.tree().internal_nodes()) {
    if (n >= holdings.size() || holdings[n].empty()) continue;
    out.push_back({{"node", market.tree().node(n).name}, {"h", vec_json(holdings[n])}});
  }
  return out;
}

Report rational_holdings_json(const MarketModel& market, const std::vector<Vec<Rational>>& holdings) {
  std::vector<Vec<double>> d(holdings.size());
  for (std::size_t n = 0; n < holdings.size(); ++n) d[n] = to_double_vec(holdings[n]);
  return holdings_json(market, d);
}

std::string leaf_name(const MarketModel& market, std::size_t pos) {
  return market.tree().node(market.tree().leaves()[pos]).name;
}

Report conjugacy_json(const std::vector<ConjugacyPoint>& pts) {
  Report out = Report::array();
  for (const auto& p : pts)
    out.push_back({{"at", num(p.at)},
                   {"value", ext_to_json(p.value)},
                   {"envelope", ext_to_json(p.envelope)},
                   {"residual", num(p.residual)},
                   {"grid_bound", num(p.grid_bound)},
                   {"tolerance", num(p.tolerance)},
                   {"verdict", to_string(p.verdict)}});
  return out;
}

// --- text rendering ---------------------------------------------------------

std::string scalar_text(const Report& v) {
  if (v.is_null()) return "-";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_float()) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v.get<double>());
    return buf;
  }
  if (v.is_number()) return v.dump();
  if (v.is_array()) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + scalar_text(v[i]);
    return s;
  }
  return v.dump();
}

bool all_scalars(const Report& arr) {
  return std::all_of(arr.begin(), arr.end(), [](const Report& e) { return e.is_primitive(); });
}

bool all_records(const Report& arr) {
  return !arr.empty() && std::all_of(arr.begin(), arr.end(), [](const Report& e) { return e.is_object(); });
}

struct TextLayout {
  std::vector<std::pair<std::string, std::string>> lines;
  struct Table {
    std::string title;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
  };
  std::vector<Table> tables;

  void walk(const std::string& prefix, const Report& j) {
    if (j.is_object()) {
      for (auto it = j.begin(); it != j.end(); ++it) walk(prefix.empty() ? it.key() : prefix + "." + it.key(), it.value());
    } else if (j.is_array() && all_records(j)) {
      Table t;
      t.title = prefix;
      for (const auto& rec : j)
        for (auto it = rec.begin(); it != rec.end(); ++it)
          if (std::find(t.columns.begin(), t.columns.end(), it.key()) == t.columns.end()) t.columns.push_back(it.key());
      for (const auto& rec : j) {
        std::vector<std::string> row;
        for (const auto& c : t.columns) row.push_back(rec.contains(c) ? scalar_text(rec[c]) : "");
        t.rows.push_back(std::move(row));
      }
      tables.push_back(std::move(t));
    } else if (j.is_array() && !all_scalars(j)) {
      for (std::size_t i = 0; i < j.size(); ++i) walk(prefix + "[" + std::to_string(i) + "]", j[i]);
    } else {
      lines.emplace_back(prefix, scalar_text(j));
    }
  }

  std::string render() const {
    std::ostringstream out;
    std::size_t width = 0;
    for (const auto& [k, v] : lines) width = std::max(width, k.size());
    for (const auto& [k, v] : lines) out << k << std::string(width - k.size() + 2, ' ') << v << '\n';
    for (const auto& t : tables) {
      out << '\n' << t.title << ":\n";
      std::vector<std::size_t> w(t.columns.size());
      for (std::size_t c = 0; c < w.size(); ++c) {
        w[c] = t.columns[c].size();
        for (const auto& r : t.rows) w[c] = std::max(w[c], r[c].size());
      }
      auto emit_row = [&](const std::vector<std::string>& r) {
        std::string line = " ";
        for (std::size_t c = 0; c < w.size(); ++c) line += " " + r[c] + std::string(w[c] - r[c].size() + 1, ' ');
        while (!line.empty() && line.back() == ' ') line.pop_back();
        out << line << '\n';
      };
      emit_row(t.columns);
      for (const auto& r : t.rows) emit_row(r);
    }
    return out.str();
  }
};

// --- commands ---------------------------------------------------------------

bool env_forces_exact() {
  const char* v = std::getenv("CONDUAL_EXACT");
  return v != nullptr && std::string(v) == "1";
}

double single_value(const std::vector<double>& grid, const char* flag) {
  if (grid.size() != 1) throw InputError(std::string(flag) + ": expected exactly one value");
  return grid.front();
}

Report pass_fail(Report r, bool ok, int& code) {
  r["verdict"] = ok ? "pass" : "fail";
  code = ok ? kExitPass : kExitFail;
  return r;
}

int exit_for(CheckVerdict v) { return v == CheckVerdict::pass ? kExitPass : kExitFail; }

Report cmd_solve_primal(const RunConfig& c, const MarketModel& market, const UtilityFunction& u, int& code) {
  if (c.x_grid.empty()) throw InputError("solve-primal: --x is required");
  Report r;
  bool converged = true;
  if (c.x_grid.size() == 1) {
    const PrimalSolution sol = solve_primal(market, u, c.x_grid.front(), c.solver_tol);
    r = to_report(market, sol, c.x_grid.front());
    converged = sol.status != PrimalStatus::max_iterations;
  } else {
    Report pts = Report::array();
    for (const auto& p : primal_value_grid(market, u, c.x_grid, c.solver_tol)) {
      pts.push_back({{"x", num(p.x)}, {"value", ext_to_json(p.value)}, {"status", to_string(p.status)}});
      converged = converged && p.status != PrimalStatus::max_iterations;
    }
    r["values"] = std::move(pts);
  }
  r["verdict"] = converged ? "ok" : "not-converged";
  code = converged ? kExitPass : kExitFail;
  return r;
}

Report cmd_solve_dual(const RunConfig& c, const MarketModel& market, const UtilityFunction& u, int& code) {
  if (c.y_grid.empty()) throw InputError("solve-dual: --y is required");
  for (double y : c.y_grid)
    if (!(y > 0)) throw InputError("solve-dual: y must be positive");
  Report r;
  bool supported = true;
  if (c.y_grid.size() == 1) {
    const DualSolution sol = solve_dual(market, u, c.y_grid.front(), c.solver_tol);
    r = to_report(market, sol, c.y_grid.front());
    supported = sol.status != DualStatus::unsupported;
  } else {
    Report pts = Report::array();
    for (double y : c.y_grid) {
      const DualSolution sol = solve_dual(market, u, y, c.solver_tol);
      supported = supported && sol.status != DualStatus::unsupported;
      pts.push_back({{"y", num(y)},
                     {"value", ext_to_json(sol.value)},
                     {"status", to_string(sol.status)},
                     {"attained", sol.attained},
                     {"gap", num(sol.gap)}});
    }
    r["values"] = std::move(pts);
  }
  r["verdict"] = supported ? "ok" : "unsupported";
  code = supported ? kExitPass : kExitInput;
  return r;
}

Report cmd_superhedge(const RunConfig& c, const MarketModel& market, int& code) {
  if (c.payoff.empty()) throw InputError("superhedge: --payoff is required");
  const Vec<Rational> f = parse_leaf_vector(market, c.payoff, "payoff");
  const Vec<double> fd = to_double_vec(f);
  SuperhedgeResult<double> res;
  std::optional<Rational> exact_price;
  if (market.exact() && !has_ball_constraint(market)) {
    const auto ex = superhedge_price<Rational>(market, f);
    res.price = to_ext_double(ex.price);
    res.dual_price = to_ext_double(ex.dual_price);
    res.bound = to_ext_double(ex.bound);
    res.holdings = to_double_vec(ex.holdings);
    res.q = to_double_vec(ex.q);
    if (ex.price.is_finite()) exact_price = ex.price.value();
  } else {
    res = superhedge_price<double>(market, fd);
  }
  Report r = to_report(market, res, fd);
  if (exact_price) r["price_exact"] = rational_to_string(*exact_price);
  const bool ok = r["duality_ok"].get<bool>() && r["bound_ok"].get<bool>();
  return pass_fail(std::move(r), ok, code);
}

Report cmd_embed(const RunConfig& c, const MarketSpec& spec, const MarketModel& market, const UtilityFunction& u,
                 int& code) {
  Vec<Rational> endowment;
  if (!c.endowment.empty()) {
    endowment = parse_leaf_vector(market, c.endowment, "endowment");
  } else if (!spec.endowment.empty()) {
    std::map<std::string, Rational> given(spec.endowment.begin(), spec.endowment.end());
    for (std::size_t pos = 0; pos < market.num_leaves(); ++pos) {
      const auto it = given.find(leaf_name(market, pos));
      if (it == given.end()) throw InputError("endowment: no value for leaf '" + leaf_name(market, pos) + "'");
      endowment.push_back(it->second);
    }
  } else {
    throw InputError("embed-endowment: no endowment in the market file and no --endowment");
  }
  if (c.pricing.empty()) throw InputError("embed-endowment: --pricing (a martingale measure on the leaves) is required");
  const Vec<Rational> pricing = parse_leaf_vector(market, c.pricing, "pricing");
  const EndowmentEmbedding emb = embed_endowment(market, endowment, pricing);
  Report r;
  r["offset"] = rational_to_string(emb.offset);
  r["offset_value"] = num(to_double(emb.offset));
  Report leaves = Report::array();
  for (std::size_t pos = 0; pos < market.num_leaves(); ++pos)
    leaves.push_back({{"leaf", leaf_name(market, pos)},
                      {"endowment", rational_to_string(endowment[pos])},
                      {"pricing", rational_to_string(pricing[pos])}});
  r["leaves"] = std::move(leaves);
  bool converged = true;
  if (!c.x_grid.empty()) {
    const double x = single_value(c.x_grid, "--x");
    const double wealth = x - to_double(emb.offset);
    const PrimalSolution sol = solve_primal(emb.augmented, u, wealth, c.solver_tol);
    converged = sol.status != PrimalStatus::max_iterations;
    r["x"] = num(x);
    r["augmented_wealth"] = num(wealth);
    r["value"] = ext_to_json(sol.value);
    r["status"] = to_string(sol.status);
    r["holdings"] = holdings_json(emb.augmented, sol.holdings.holdings);
  }
  r["augmented_market"] = market_spec_to_json(spec_from_model(emb.augmented));
  r["verdict"] = converged ? "ok" : "not-converged";
  code = converged ? kExitPass : kExitFail;
  return r;
}

Report cmd_conditions(const RunConfig& c, const MarketModel& market, int& code) {
  const double x = c.x_grid.empty() ? 1.0 : single_value(c.x_grid, "--x");
  const ConditionCertificate cert = check_supermartingale_condition(market);
  const CompactnessResult compact = check_convex_compactness(market, x);
  Report r = to_report(market, cert, compact);
  const bool ok = cert.nonempty == Verdict::yes && cert.supermartingale == Verdict::yes &&
                  cert.closedness.overall == Verdict::yes;
  r["verdict"] = ok ? "certified" : "not-certified";
  code = ok ? kExitPass : kExitFail;
  return r;
}

}  // namespace

// --- parsing ----------------------------------------------------------------

MarketSpec parse_market_spec(std::string_view text, const std::string& source) {
  Report j;
  try {
    j = Report::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(source + ": malformed JSON: " + e.what());
  }
  if (!j.is_object()) throw InputError(source + ": top level must be an object");
  NumberReader num;
  MarketSpec spec;
  const Report& nodes = member(j, "nodes", source);
  if (!nodes.is_array() || nodes.empty()) throw InputError(source + ": \"nodes\" must be a nonempty array");

  int max_time = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string where = source + ": nodes[" + std::to_string(i) + "]";
    const Report& nd = nodes[i];
    MarketSpec::NodeSpec ns;
    const Report& id = member(nd, "id", where);
    if (!id.is_string() || id.get<std::string>().empty()) throw InputError(where + ".id: expected a nonempty string");
    ns.id = id.get<std::string>();
    const std::string named = where + " ('" + ns.id + "')";
    const Report& time = member(nd, "time", named);
    if (!time.is_number_integer() || time.get<long long>() < 0)
      throw InputError(named + ".time: expected a nonnegative integer");
    ns.time = time.get<int>();
    max_time = std::max(max_time, ns.time);
    if (nd.contains("parent") && !nd["parent"].is_null()) {
      if (!nd["parent"].is_string()) throw InputError(named + ".parent: expected a node id or null");
      ns.parent = nd["parent"].get<std::string>();
    }
    if (ns.parent) {
      ns.prob = num.read(member(nd, "prob", named), named + ".prob");
      if (ns.prob <= 0) throw InputError(named + ".prob: transition probability must be > 0");
      if (ns.prob > 1) throw InputError(named + ".prob: transition probability must be <= 1");
    }
    ns.prices = num.read_vec(member(nd, "prices", named), named + ".prices");
    spec.nodes.push_back(std::move(ns));
  }
  if (j.contains("horizon")) {
    if (!j["horizon"].is_number_integer()) throw InputError(source + ": horizon: expected an integer");
    spec.horizon = j["horizon"].get<int>();
  } else {
    spec.horizon = max_time;
  }
  if (j.contains("dimension")) {
    if (!j["dimension"].is_number_unsigned() || j["dimension"].get<std::size_t>() == 0)
      throw InputError(source + ": dimension: expected a positive integer");
    spec.dimension = j["dimension"].get<std::size_t>();
  } else {
    spec.dimension = spec.nodes.front().prices.size();
  }

  std::set<std::string> internal;
  for (const auto& nd : spec.nodes)
    if (nd.parent) internal.insert(*nd.parent);
  if (j.contains("constraints")) {
    const Report& cons = j["constraints"];
    if (!cons.is_object()) throw InputError(source + ": constraints: expected an object keyed by node id");
    std::optional<ConvexSet> fallback;
    std::set<std::string> given;
    for (auto it = cons.begin(); it != cons.end(); ++it) {
      const std::string where = source + ": constraints." + it.key();
      ConvexSet set = read_set(it.value(), spec.dimension, where, num);
      if (set.dim() != spec.dimension)
        throw InputError(where + ": set has dimension " + std::to_string(set.dim()) + ", market has " +
                         std::to_string(spec.dimension));
      if (it.key() == "*") {
        fallback = std::move(set);
      } else {
        given.insert(it.key());
        spec.constraints.emplace_back(it.key(), std::move(set));
      }
    }
    if (fallback)
      for (const auto& nd : spec.nodes)
        if (internal.count(nd.id) && !given.count(nd.id)) spec.constraints.emplace_back(nd.id, *fallback);
  }
  if (j.contains("floor")) spec.floor = num.read_optional(j["floor"], source + ": floor");
  if (j.contains("endowment")) {
    const Report& e = j["endowment"];
    if (!e.is_object()) throw InputError(source + ": endowment: expected an object keyed by leaf id");
    for (auto it = e.begin(); it != e.end(); ++it)
      spec.endowment.emplace_back(it.key(), num.read(it.value(), source + ": endowment." + it.key()));
  }
  spec.exact = !num.saw_float;
  if (j.contains("exact")) {
    if (!j["exact"].is_boolean()) throw InputError(source + ": exact: expected true or false");
    spec.exact = j["exact"].get<bool>();
  }
  if (env_forces_exact()) spec.exact = true;
  return spec;
}

MarketSpec read_market_spec(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path.string() + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw InputError(path.string() + ": read error");
  return parse_market_spec(buf.str(), path.string());
}

MarketModel parse_market_file(const std::filesystem::path& path) {
  const MarketSpec spec = read_market_spec(path);
  try {
    return build_market(spec);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

MarketSpec spec_from_model(const MarketModel& market) {
  const auto& tree = market.tree();
  MarketSpec spec;
  spec.horizon = tree.horizon();
  spec.dimension = market.dim();
  spec.exact = market.exact();
  spec.floor = market.floor();
  for (NodeId n = 0; n < tree.size(); ++n) {
    const auto& nd = tree.node(n);
    MarketSpec::NodeSpec ns;
    ns.id = nd.name;
    ns.time = nd.time;
    if (nd.parent) ns.parent = tree.node(*nd.parent).name;
    ns.prob = nd.cond_prob;
    ns.prices = market.price(n);
    spec.nodes.push_back(std::move(ns));
    if (market.has_constraint(n)) spec.constraints.emplace_back(nd.name, market.constraint(n));
  }
  return spec;
}

Report market_spec_to_json(const MarketSpec& spec) {
  Report j;
  j["horizon"] = spec.horizon;
  j["dimension"] = spec.dimension;
  j["exact"] = spec.exact;
  Report nodes = Report::array();
  for (const auto& nd : spec.nodes) {
    Report o;
    o["id"] = nd.id;
    o["time"] = nd.time;
    o["parent"] = nd.parent ? Report(*nd.parent) : Report(nullptr);
    if (nd.parent) o["prob"] = rational_json(nd.prob);
    o["prices"] = rational_vec_json(nd.prices);
    nodes.push_back(std::move(o));
  }
  j["nodes"] = std::move(nodes);
  Report cons = Report::object();
  for (const auto& [name, set] : spec.constraints) cons[name] = convex_set_to_json(set);
  j["constraints"] = std::move(cons);
  j["floor"] = spec.floor ? rational_json(*spec.floor) : Report(nullptr);
  if (!spec.endowment.empty()) {
    Report e = Report::object();
    for (const auto& [leaf, v] : spec.endowment) e[leaf] = rational_json(v);
    j["endowment"] = std::move(e);
  }
  return j;
}

ConvexSet parse_convex_set(const Report& j, std::size_t dim, const std::string& where) {
  NumberReader num;
  return read_set(j, dim, where, num);
}

Report convex_set_to_json(const ConvexSet& set) {
  Report j;
  std::visit(
      [&](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Polyhedron>) {
          j["type"] = "polyhedron";
          j["dim"] = set.dim();
          Report rows = Report::array();
          for (const auto& r : s.a) rows.push_back(rational_vec_json(r));
          j["A"] = std::move(rows);
          j["b"] = rational_vec_json(s.b);
        } else if constexpr (std::is_same_v<S, Box>) {
          j["type"] = "box";
          j["lower"] = bounds_json(s.lower);
          j["upper"] = bounds_json(s.upper);
        } else if constexpr (std::is_same_v<S, Ball>) {
          j["type"] = "ball";
          j["center"] = rational_vec_json(s.center);
          j["radius"] = rational_json(s.radius);
        } else if constexpr (std::is_same_v<S, AffineFixed>) {
          j["type"] = "affine_fixed";
          j["fixed"] = bounds_json(s.fixed);
        } else if constexpr (std::is_same_v<S, Singleton>) {
          j["type"] = "singleton";
          j["point"] = rational_vec_json(s.point);
        } else {
          j["type"] = std::is_same_v<S, Intersection> ? "intersection" : "product";
          Report parts = Report::array();
          for (const auto& p : s.parts) parts.push_back(convex_set_to_json(p));
          j["parts"] = std::move(parts);
        }
      },
      set.data());
  return j;
}

UtilityFunction parse_utility(std::string_view descriptor) {
  const std::string text = trim(descriptor);
  if (text.empty()) throw InputError("utility: empty descriptor");
  Report j;
  if (text.front() == '{') {
    try {
      j = Report::parse(text);
    } catch (const json::parse_error& e) {
      throw InputError(std::string("utility: malformed JSON: ") + e.what());
    }
  } else {
    const auto colon = text.find(':');
    j["family"] = text.substr(0, colon);
    if (colon != std::string::npos) {
      const std::string param = text.substr(colon + 1);
      double p = 0;
      const auto res = std::from_chars(param.data(), param.data() + param.size(), p);
      if (res.ec != std::errc() || res.ptr != param.data() + param.size())
        throw InputError("utility: cannot read parameter '" + param + "'");
      j["p"] = p;
    }
  }
  const Report& fam = member(j, "family", "utility");
  if (!fam.is_string()) throw InputError("utility.family: expected a string");
  const std::string family = fam.get<std::string>();
  auto reals = [&](const char* key) {
    const Report& arr = member(j, key, "utility");
    if (!arr.is_array()) throw InputError(std::string("utility.") + key + ": expected an array of numbers");
    std::vector<double> out;
    for (const auto& v : arr) {
      if (!v.is_number()) throw InputError(std::string("utility.") + key + ": expected numbers");
      out.push_back(v.get<double>());
    }
    return out;
  };
  if (family == "log") return UtilityFunction::log();
  if (family == "linear") return UtilityFunction::linear();
  if (family == "power") {
    const double p = j.contains("p") ? j["p"].get<double>() : 0.5;
    if (!(p > 0 && p < 1)) throw InputError("utility.p: power exponent must lie in (0, 1)");
    return UtilityFunction::power(p);
  }
  if (family == "piecewise") {
    const double u0 = j.contains("u0") ? j["u0"].get<double>() : 0.0;
    return UtilityFunction::piecewise(reals("breakpoints"), reals("slopes"), u0);
  }
  if (family == "table") return UtilityFunction::table(reals("x"), reals("u"));
  throw InputError("utility.family: unknown family '" + family + "'");
}

Report utility_to_json(const UtilityFunction& u) {
  Report j;
  j["family"] = to_string(u.family());
  switch (u.family()) {
    case UtilityFamily::power: j["p"] = u.exponent(); break;
    case UtilityFamily::log: break;
    case UtilityFamily::piecewise:
      j["breakpoints"] = u.knots();
      j["slopes"] = u.slopes();
      j["u0"] = u.knot_values().front();
      break;
    case UtilityFamily::table:
      j["x"] = u.table_x();
      j["u"] = u.table_u();
      break;
  }
  return j;
}

Vec<Rational> parse_leaf_vector(const MarketModel& market, std::string_view text, const std::string& what) {
  const std::string s = trim(text);
  const std::size_t leaves = market.num_leaves();
  NumberReader num;
  Vec<Rational> out;
  if (!s.empty() && (s.front() == '{' || s.front() == '[')) {
    Report j;
    try {
      j = Report::parse(s);
    } catch (const json::parse_error& e) {
      throw InputError(what + ": malformed JSON: " + e.what());
    }
    if (j.is_array()) {
      out = num.read_vec(j, what);
    } else {
      std::map<std::string, std::size_t> pos;
      for (std::size_t p = 0; p < leaves; ++p) pos[leaf_name(market, p)] = p;
      std::vector<std::optional<Rational>> slots(leaves);
      for (auto it = j.begin(); it != j.end(); ++it) {
        const auto f = pos.find(it.key());
        if (f == pos.end()) throw InputError(what + ": '" + it.key() + "' is not a leaf");
        slots[f->second] = num.read(it.value(), what + "." + it.key());
      }
      for (std::size_t p = 0; p < leaves; ++p) {
        if (!slots[p]) throw InputError(what + ": no value for leaf '" + leaf_name(market, p) + "'");
        out.push_back(*slots[p]);
      }
    }
  } else {
    const auto items = split_commas(s);
    for (std::size_t i = 0; i < items.size(); ++i) {
      try {
        out.push_back(parse_rational(items[i]));
      } catch (const std::exception& e) {
        throw InputError(what + "[" + std::to_string(i) + "]: " + e.what());
      }
    }
  }
  if (out.size() != leaves)
    throw InputError(what + ": expected " + std::to_string(leaves) + " leaf values, got " + std::to_string(out.size()));
  return out;
}

std::vector<double> parse_grid(std::string_view text, const std::string& what) {
  std::vector<double> out;
  for (const auto& item : split_commas(text)) {
    double v = 0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || res.ec != std::errc() || res.ptr != item.data() + item.size())
      throw InputError(what + ": cannot read '" + item + "' as a number");
    if (!std::isfinite(v)) throw InputError(what + ": entries must be finite");
    if (!out.empty() && !(v > out.back())) throw InputError(what + ": entries must be strictly increasing");
    out.push_back(v);
  }
  return out;
}

// --- reports ----------------------------------------------------------------

Report ext_to_json(const ExtReal& v) {
  if (v.is_pos_inf()) return "inf";
  if (v.is_neg_inf()) return "-inf";
  return num(v.value());
}

Report to_report(const MarketModel& market, const PrimalSolution& sol, double x) {
  Report r;
  r["x"] = num(x);
  r["status"] = to_string(sol.status);
  r["value"] = ext_to_json(sol.value);
  r["iterations"] = sol.iterations;
  r["stationarity"] = num(sol.stationarity);
  r["method"] = sol.method;
  r["holdings"] = holdings_json(market, sol.holdings.holdings);
  Report leaves = Report::array();
  for (std::size_t p = 0; p < sol.terminal.size(); ++p)
    leaves.push_back({{"leaf", leaf_name(market, p)},
                      {"prob", num(market.tree().path_prob_d(p))},
                      {"wealth", num(sol.terminal[p])}});
  r["terminal"] = std::move(leaves);
  return r;
}

Report to_report(const MarketModel& market, const DualSolution& sol, double y) {
  Report r;
  r["y"] = num(y);
  r["status"] = to_string(sol.status);
  r["value"] = ext_to_json(sol.value);
  r["attained"] = sol.attained;
  r["gap"] = num(sol.gap);
  r["alpha"] = ext_to_json(sol.measure.alpha);
  r["newton_steps"] = sol.newton_steps;
  r["method"] = sol.method;
  Report leaves = Report::array();
  for (std::size_t p = 0; p < sol.q.size(); ++p) {
    Report o{{"leaf", leaf_name(market, p)}, {"prob", num(market.tree().path_prob_d(p))}, {"q", num(sol.q[p])}};
    o["density"] = p < sol.measure.densities.size() ? num(sol.measure.densities[p]) : Report(nullptr);
    leaves.push_back(std::move(o));
  }
  r["measure"] = std::move(leaves);
  return r;
}

Report to_report(const XbarTriple& t) {
  Report r;
  r["from_support"] = ext_to_json(t.from_support);
  r["from_essinf"] = ext_to_json(t.from_essinf);
  r["from_bisection"] = ext_to_json(t.from_bisection);
  r["exact"] = t.exact ? Report(rational_to_string(*t.exact)) : Report(nullptr);
  r["spread"] = num(t.spread);
  r["tolerance"] = num(t.tolerance);
  r["verdict"] = to_string(t.verdict);
  return r;
}

Report to_report(const LinkReport& l) {
  Report r;
  r["x"] = num(l.x);
  r["y_hat"] = num(l.y_hat);
  r["solver_tol"] = num(l.solver_tol);
  r["tolerance"] = num(l.tolerance);
  r["dual_attained"] = l.dual_attained;
  r["max_residual"] = num(l.max_residual);
  Report leaves = Report::array();
  for (const auto& lr : l.leaves)
    leaves.push_back({{"leaf", lr.leaf},
                      {"terminal", num(lr.terminal)},
                      {"predicted", num(lr.predicted)},
                      {"residual", num(lr.residual)}});
  r["leaves"] = std::move(leaves);
  if (!l.note.empty()) r["note"] = l.note;
  r["verdict"] = to_string(l.verdict);
  return r;
}

Report to_report(const DualityReport& d) {
  Report r;
  r["residuals"] = {{"v", conjugacy_json(d.v_checks)}, {"u", conjugacy_json(d.u_checks)}};
  r["worst_gap"] = num(d.worst_gap);
  r["worst_weak_violation"] = num(d.worst_weak_violation);
  r["weak_tolerance"] = num(d.weak_tolerance);
  r["shape_ok"] = d.shape_ok;
  r["xbar"] = d.xbar ? to_report(*d.xbar) : Report(nullptr);
  if (d.link) r["link"] = to_report(*d.link);
  r["notes"] = d.notes;
  r["verdict"] = to_string(d.verdict);
  return r;
}

Report to_report(const MarketModel& market, const SuperhedgeResult<double>& res, const Vec<double>& payoff) {
  Report r;
  double max_abs = 0;
  Report leaves = Report::array();
  for (std::size_t p = 0; p < payoff.size(); ++p) {
    max_abs = std::max(max_abs, std::abs(payoff[p]));
    Report o{{"leaf", leaf_name(market, p)}, {"payoff", num(payoff[p])}};
    o["q"] = p < res.q.size() ? num(res.q[p]) : Report(nullptr);
    leaves.push_back(std::move(o));
  }
  r["price"] = ext_to_json(res.price);
  r["dual_price"] = ext_to_json(res.dual_price);
  bool duality_ok = false;
  if (res.price.is_finite() && res.dual_price.is_finite()) {
    const double diff = std::abs(res.price.value() - res.dual_price.value());
    r["difference"] = num(diff);
    duality_ok = diff <= 1e-8 * std::max(1.0, std::abs(res.price.value()));
  } else {
    r["difference"] = nullptr;
    duality_ok = res.price == res.dual_price;
  }
  r["duality_ok"] = duality_ok;
  r["bound"] = ext_to_json(res.bound);
  r["max_abs_payoff"] = num(max_abs);
  bool bound_ok = true;
  if (res.price.is_finite() && res.bound.is_finite())
    bound_ok = std::abs(res.price.value()) <= res.bound.value() + max_abs + 1e-9;
  r["bound_ok"] = bound_ok;
  r["holdings"] = vec_json(res.holdings);
  r["leaves"] = std::move(leaves);
  return r;
}

Report to_report(const MarketModel& market, const ConditionCertificate& cert, const CompactnessResult& compact) {
  const auto& tree = market.tree();
  Report r;
  r["nonempty"] = to_string(cert.nonempty);
  r["supermartingale"] = to_string(cert.supermartingale);
  r["closed"] = to_string(cert.closedness.overall);
  r["stage"] = cert.stage;
  r["terminal_compensator"] = num(cert.compensator.empty() ? 0.0 : cert.terminal_compensator());
  r["compact"] = to_string(compact.compact);
  r["bounded"] = to_string(compact.bounded);
  r["compact_at_x"] = num(compact.x);
  r["witness"] = rational_holdings_json(market, cert.witness.holdings);
  Report closed = Report::array();
  for (const auto& nc : cert.closedness.nodes)
    closed.push_back({{"node", nc.name},
                      {"span_rank", nc.span_rank},
                      {"closed", to_string(nc.result.closed)},
                      {"certificate", nc.result.certificate}});
  r["closedness"] = std::move(closed);
  Report q = Report::array();
  for (std::size_t p = 0; p < cert.q.size(); ++p) q.push_back({{"leaf", leaf_name(market, p)}, {"q", num(cert.q[p])}});
  r["q"] = std::move(q);
  r["h_hat"] = holdings_json(market, cert.h_hat.holdings);
  Report steps = Report::array();
  for (const auto& s : cert.steps) {
    Report o{{"node", s.name}, {"beta", vec_json(s.beta)}, {"h_hat", vec_json(s.h_hat)}};
    o["support"] = num(s.support);
    o["increment"] = num(s.increment);
    steps.push_back(std::move(o));
  }
  r["steps"] = std::move(steps);
  Report comp = Report::array();
  for (NodeId n = 0; n < cert.compensator.size() && n < tree.size(); ++n)
    comp.push_back({{"node", tree.node(n).name}, {"time", tree.node(n).time}, {"A", num(cert.compensator[n])}});
  r["compensator"] = std::move(comp);
  if (cert.failure) {
    r["failure"] = {{"node", cert.failure->name}, {"direction", vec_json(to_double_vec(cert.failure->direction))}};
  } else {
    r["failure"] = nullptr;
  }
  r["recession_direction"] = compact.recession_direction
                                 ? rational_holdings_json(market, compact.recession_direction->holdings)
                                 : Report(nullptr);
  r["notes"] = cert.notes;
  return r;
}

Report to_report(const PropertyReport& p) {
  Report r;
  r["seed"] = p.seed;
  r["seconds"] = num(p.seconds);
  Report rows = Report::array();
  for (const auto& o : p.outcomes)
    rows.push_back({{"name", o.name},
                    {"cases", o.cases},
                    {"failures", o.failures},
                    {"worst", num(o.worst)},
                    {"tolerance", num(o.tolerance)},
                    {"seconds", num(o.seconds)},
                    {"passed", o.passed()},
                    {"note", o.note}});
  r["properties"] = std::move(rows);
  r["verdict"] = p.passed() ? "pass" : "fail";
  return r;
}

std::string report_verdict(const Report& report) {
  if (report.is_null() || report.empty()) return "no-op";
  if (report.is_object() && report.contains("verdict") && report["verdict"].is_string())
    return report["verdict"].get<std::string>();
  return "";
}

std::string emit_report(const Report& report, OutputFormat format) {
  const bool empty = report.is_null() || (report.is_object() && report.empty());
  if (format == OutputFormat::json) {
    if (empty) return "{}\n";
    Report out;
    out["schema"] = kReportSchema;
    for (auto it = report.begin(); it != report.end(); ++it)
      if (it.key() != "schema") out[it.key()] = it.value();
    return out.dump(2) + "\n";
  }
  if (empty) return "verdict  no-op\n";
  TextLayout layout;
  Report body = report;
  std::optional<Report> verdict;
  if (body.is_object() && body.contains("verdict")) {
    verdict = body["verdict"];
    body.erase("verdict");
  }
  layout.walk("", body);
  if (verdict) layout.lines.emplace_back("verdict", scalar_text(*verdict));
  return layout.render();
}

// --- driver -----------------------------------------------------------------

const std::vector<std::string>& known_commands() {
  static const std::vector<std::string> names = {"solve-primal", "solve-dual",       "verify-duality",
                                                 "verify-link",  "superhedge",       "xbar",
                                                 "check-conditions", "embed-endowment", "properties"};
  return names;
}

RunResult run(const RunConfig& c) {
  RunResult out;
  Report body;
  try {
    const auto& cmds = known_commands();
    if (std::find(cmds.begin(), cmds.end(), c.command) == cmds.end())
      throw InputError("unknown command '" + c.command + "'");
    if (!(c.solver_tol > 0) || !std::isfinite(c.solver_tol)) throw InputError("--solver-tol must be positive");
    if (!(c.verify_tol > 0) || !std::isfinite(c.verify_tol)) throw InputError("--tol must be positive");
    for (const auto* g : {&c.x_grid, &c.y_grid})
      for (std::size_t i = 0; i < g->size(); ++i)
        if (!std::isfinite((*g)[i]) || (i > 0 && !((*g)[i] > (*g)[i - 1])))
          throw InputError("grids must be finite and strictly increasing");

    int code = kExitPass;
    if (c.command == "properties") {
      const PropertyReport rep = run_property_suite(c.seed, c.only);
      body = to_report(rep);
      code = rep.passed() ? kExitPass : kExitFail;
    } else {
      if (c.market_path.empty()) throw InputError(c.command + ": --market is required");
      const MarketSpec spec = read_market_spec(c.market_path);
      MarketModel market = [&] {
        try {
          return build_market(spec);
        } catch (const InputError& e) {
          throw InputError(c.market_path + ": " + e.what());
        }
      }();
      const UtilityFunction u = parse_utility(c.utility);
      if (c.command == "solve-primal") {
        body = cmd_solve_primal(c, market, u, code);
      } else if (c.command == "solve-dual") {
        body = cmd_solve_dual(c, market, u, code);
      } else if (c.command == "verify-duality") {
        if (c.x_grid.empty() || c.y_grid.empty()) throw InputError("verify-duality: --x-grid and --y-grid are required");
        const DualityReport rep = verify_conjugacy(market, u, c.x_grid, c.y_grid, c.verify_tol, {c.solver_tol, true});
        body = to_report(rep);
        code = exit_for(rep.verdict);
      } else if (c.command == "verify-link") {
        const double x = c.x_grid.empty() ? 1.0 : single_value(c.x_grid, "--x");
        const LinkReport rep = verify_primal_dual_link(market, u, x, c.verify_tol, c.solver_tol);
        body = to_report(rep);
        code = exit_for(rep.verdict);
      } else if (c.command == "superhedge") {
        body = cmd_superhedge(c, market, code);
      } else if (c.command == "xbar") {
        const XbarTriple t = verify_xbar(market, c.verify_tol);
        body = to_report(t);
        code = exit_for(t.verdict);
      } else if (c.command == "check-conditions") {
        body = cmd_conditions(c, market, code);
      } else {
        body = cmd_embed(c, spec, market, u, code);
      }
      Report head;
      head["command"] = c.command;
      head["market"] = c.market_path;
      if (c.command != "check-conditions" && c.command != "superhedge" && c.command != "xbar")
        head["utility"] = utility_to_json(u);
      head["exact"] = market.exact();
      for (auto it = body.begin(); it != body.end(); ++it) head[it.key()] = it.value();
      body = std::move(head);
    }
    if (c.command == "properties") {
      Report head;
      head["command"] = c.command;
      for (auto it = body.begin(); it != body.end(); ++it) head[it.key()] = it.value();
      body = std::move(head);
    }
    out.exit_code = code;
  } catch (const InputError& e) {
    out.exit_code = kExitInput;
    out.error = e.what();
  } catch (const UnsupportedError& e) {
    out.exit_code = kExitInput;
    out.error = std::string("unsupported: ") + e.what();
  } catch (const std::invalid_argument& e) {
    out.exit_code = kExitInput;
    out.error = e.what();
  } catch (const std::exception& e) {
    out.exit_code = kExitFail;
    out.error = std::string("failure: ") + e.what();
  }
  if (!out.error.empty()) {
    body = Report();
    body["command"] = c.command;
    body["error"] = out.error;
    body["verdict"] = out.exit_code == kExitInput ? "input-error" : "error";
  }
  out.report = std::move(body);
  return out;
}

}  // namespace condual
