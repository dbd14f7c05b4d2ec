// One line per acceptance criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "condual/cli_reporting.hpp"
#include "condual/condition_checker.hpp"
#include "condual/duality_verifier.hpp"
#include "condual/property_suite.hpp"
#include "condual/sample_markets.hpp"

using namespace condual;

namespace {

using Clock = std::chrono::steady_clock;
using Rng = std::mt19937_64;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool ok = true;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

// --- 1 -------------------------------------------------------------------

Outcome binomial_log_primal() {
  const MarketModel m = samples::b1();
  const UtilityFunction u = UtilityFunction::log();
  const auto t0 = Clock::now();
  const PrimalSolution sol = solve_primal(m, u, 1.0);
  const double runtime = seconds_since(t0);

  // Wealth stays positive for H in (-1, 2).
  BruteForceGrid grid;
  grid.lower = -0.99;
  grid.upper = 1.99;
  grid.step = 1e-2;
  grid.zoom_rounds = 5;
  const BruteForceResult brute = brute_force_primal(m, u, 1.0, grid);
  const double closed = 0.5 * std::log(1.5) + 0.5 * std::log(0.75);
  const double brute_h = brute.holdings.at(0);
  const double brute_u = brute.value.value();

  const double value = sol.value.to_double();
  const double h = sol.status == PrimalStatus::optimal ? sol.holdings.holdings[0][0] : NAN;
  const bool oracle_ok = std::abs(brute_u - closed) <= 1e-5 && std::abs(brute_h - 0.5) <= 1e-4;
  const bool ok = oracle_ok && std::abs(value - brute_u) <= 1e-5 && std::abs(value - closed) <= 1e-5 &&
                  std::abs(h - brute_h) <= 1e-4 && std::abs(h - 0.5) <= 1e-4 && runtime < 1.0;
  return {ok, fmt("u(1)=%.10f closed=%.10f brute=%.10f H=%.8f brute_H=%.8f runtime=%.3fs", value, closed, brute_u, h,
                  brute_h, runtime)};
}

// --- 2 -------------------------------------------------------------------

Outcome conjugacy_fixtures() {
  struct Case {
    std::string name;
    MarketModel market;
    std::vector<double> xs, ys;
  };
  const std::vector<Case> cases{
      {"b1", samples::b1(), {0.5, 1.0, 2.0}, {0.5, 1.0, 2.0}},
      {"d1", samples::d1(), {-1.5, -1.0, 0.0}, {0.5, 1.0, 2.0}},
      {"singleton", samples::binomial(ConvexSet::singleton({Rational(1)})), {0.75, 1.0, 2.0}, {0.5, 1.25, 2.25}},
      {"box", samples::binomial(samples::interval(Rational(-1), Rational(1))), {1.0, 2.0, 4.0}, {0.25, 0.5, 1.0}},
  };
  const auto t0 = Clock::now();
  bool ok = true;
  double worst = 0.0;
  std::string failed;
  for (const auto& c : cases) {
    const DualityReport r = verify_conjugacy(c.market, UtilityFunction::log(), c.xs, c.ys, 1e-5);
    bool case_ok = r.v_checks.size() == 3 && r.u_checks.size() == 3;
    for (const auto* side : {&r.v_checks, &r.u_checks})
      for (const auto& p : *side) {
        case_ok = case_ok && p.residual <= 1e-5 + p.grid_bound;
        worst = std::max(worst, p.residual);
      }
    if (!case_ok) failed += " " + c.name;
    ok = ok && case_ok;
  }
  const double runtime = seconds_since(t0);
  ok = ok && runtime < 10.0;
  return {ok, fmt("4 fixtures x 3x3 grids, worst residual=%.3e runtime=%.3fs%s", worst, runtime,
                  failed.empty() ? "" : (" failed:" + failed).c_str())};
}

// --- 3 -------------------------------------------------------------------

Outcome xbar_agreement() {
  bool ok = true;
  double spread = 0.0;
  std::string failed;
  for (const auto& [name, market] : samples::golden_markets()) {
    const XbarTriple t = verify_xbar(market, 1e-6);
    const double a = t.from_support.to_double(), b = t.from_essinf.to_double(), c = t.from_bisection.to_double();
    const double s = std::max({std::abs(a - b), std::abs(a - c), std::abs(b - c)});
    spread = std::max(spread, s);
    if (!(s <= 1e-6)) {
      ok = false;
      failed += " " + name;
    }
  }
  const XbarTriple single = verify_xbar(samples::binomial(ConvexSet::singleton({Rational(1)})), 1e-6);
  const bool exact_half = single.exact && *single.exact == Rational(1, 2);
  ok = ok && exact_half;
  return {ok, fmt("golden fixtures spread=%.3e singleton exact=%s%s", spread,
                  single.exact ? rational_to_string(*single.exact).c_str() : "none",
                  failed.empty() ? "" : (" failed:" + failed).c_str())};
}

// --- 4 -------------------------------------------------------------------

Outcome primal_dual_link() {
  const MarketModel m = samples::b1();
  const UtilityFunction u = UtilityFunction::log();
  const LinkReport base = verify_primal_dual_link(m, u, 1.0, 1e-5, 1e-8);
  // Residual ratio when the solver tolerance halves.
  const double coarse = verify_primal_dual_link(m, u, 1.0, 1e-5, 1e-6).max_residual;
  const double fine = verify_primal_dual_link(m, u, 1.0, 1e-5, 5e-7).max_residual;
  const double ratio = coarse / fine;
  const bool ok = base.max_residual <= 1e-5 && ratio >= 0.5 && ratio <= 8.0;
  return {ok, fmt("max residual=%.3e; tol 1e-6 -> %.3e, 5e-7 -> %.3e, ratio=%.2f", base.max_residual, coarse, fine, ratio)};
}

// --- 5 -------------------------------------------------------------------

Outcome superhedge_duality() {
  Rng rng(20261014);
  samples::RandomMarketOptions opts;
  opts.max_periods = 3;
  opts.max_branching = 2;
  int payoffs = 0, markets = 0, skipped = 0, mismatches = 0, translation_failures = 0;
  double worst = 0.0;
  while (payoffs < 100) {
    const MarketModel m = samples::random_market(rng, opts);
    // Markets with a free lunch price every claim at -inf; they say nothing here.
    if (!superhedge_price(m, Vec<Rational>(m.num_leaves(), Rational(0))).price.is_finite()) {
      ++skipped;
      continue;
    }
    ++markets;
    for (int j = 0; j < 4 && payoffs < 100; ++j, ++payoffs) {
      Vec<Rational> f;
      for (std::size_t i = 0; i < m.num_leaves(); ++i) f.push_back(samples::random_rational(rng, -3, 3, 4));
      const auto exact = superhedge_price(m, f);
      const auto flt = superhedge_price(m, to_double_vec(f));
      if (!exact.price.is_finite() || !(exact.price == exact.dual_price) || !flt.price.is_finite() ||
          !flt.dual_price.is_finite()) {
        ++mismatches;
        continue;
      }
      const double scale = std::max(1.0, std::abs(flt.price.value()));
      worst = std::max({worst, std::abs(flt.price.value() - flt.dual_price.value()) / scale,
                        std::abs(flt.price.value() - to_double(exact.price.value())) / scale});
      const Rational c = samples::random_rational(rng, -5, 5, 3);
      Vec<Rational> shifted = f;
      for (auto& v : shifted) v += c;
      if (!(superhedge_price(m, shifted).price == Extended<Rational>(exact.price.value() + c))) ++translation_failures;
    }
  }
  const bool ok = mismatches == 0 && translation_failures == 0 && worst <= 1e-8;
  return {ok, fmt("%d payoffs on %d arbitrage-free trees (%d skipped): exact mismatches=%d, float worst=%.3e, "
                  "translation failures=%d",
                  payoffs, markets, skipped, mismatches, worst, translation_failures)};
}

// --- 6 -------------------------------------------------------------------

/// E^Q[(H - H^) . dS | n] - dA(n), recomputed from the certificate's Q.
double nodewise_violation(const MarketModel& m, const ConditionCertificate& cert, const PortfolioProcess<double>& h) {
  const Vec<double> w = node_weights(m, cert.q);
  double worst = -INFINITY;
  for (const auto& step : cert.steps) {
    const NodeId n = step.node;
    if (w[n] <= 0.0) continue;
    double gain = 0.0;
    for (NodeId c : m.tree().node(n).children)
      for (std::size_t j = 0; j < m.dim(); ++j)
        gain += w[c] / w[n] * (h.holdings[n][j] - cert.h_hat.holdings[n][j]) * m.increment_d(c)[j];
    worst = std::max(worst, gain - step.increment);
  }
  return worst;
}

Outcome certificate_soundness() {
  Rng rng(6);
  int certificates = 0, portfolios = 0;
  double worst = -INFINITY;
  for (int k = 0; k < 200 && certificates < 40; ++k) {
    samples::RandomMarketOptions opts;
    opts.conic = k % 2 == 0;
    opts.max_dim = 2;
    const MarketModel m = samples::random_market(rng, opts);
    const ConditionCertificate cert = check_supermartingale_condition(m);
    if (cert.supermartingale != Verdict::yes) continue;
    ++certificates;
    for (int j = 0; j < 100; ++j, ++portfolios) {
      PortfolioProcess<double> h;
      h.holdings.resize(m.tree().size());
      const double scale = j % 4 == 0 ? 50.0 : 3.0;
      for (NodeId n : m.tree().internal_nodes()) {
        Vec<double> z(m.dim());
        for (auto& v : z) v = uniform(rng, -scale, scale);
        h.holdings[n] = project(m.constraint(n), z);
      }
      worst = std::max(worst, nodewise_violation(m, cert, h));
    }
  }
  const ConditionCertificate d1 = check_supermartingale_condition(samples::d1());
  bool unit = d1.supermartingale == Verdict::yes && d1.steps.size() == 2;
  for (const auto& s : d1.steps) unit = unit && std::abs(s.increment - 1.0) <= 1e-12;
  const double a_t = d1.terminal_compensator();
  const bool ok = certificates > 0 && worst <= 1e-10 && unit && std::abs(a_t - 2.0) <= 1e-12;
  return {ok, fmt("%d certificates x 100 portfolios, worst violation=%.3e; D1 unit increments=%s A_T=%.6f", certificates,
                  worst, unit ? "yes" : "no", a_t)};
}

// --- 7 -------------------------------------------------------------------

Outcome geometry_suite() {
  Rng rng(7);
  std::uniform_int_distribution<int> coeff(-3, 3);
  int polar_failures = 0;
  for (int k = 0; k < 200; ++k) {
    const std::size_t d = 1 + rng() % 4;
    const std::size_t rows = 1 + rng() % 5;
    Cone c{Cone::Form::inequality, Matrix<Rational>(rows, Vec<Rational>(d)), d};
    for (auto& r : c.rows)
      for (auto& v : r) v = coeff(rng);
    if (k % 2) c = Cone{Cone::Form::generators, c.rows, d};
    const Cone twice = polar_cone(polar_cone(c));
    const Cone via_generators{Cone::Form::generators, cone_generators(polar_cone(c)), d};
    if (!cone_equal(twice, c) || !cone_equal(polar_cone(via_generators), c)) ++polar_failures;
  }

  double support_worst = 0.0;
  for (int k = 0; k < 500; ++k) {
    const std::size_t d = 1 + rng() % 3;
    std::vector<std::optional<Rational>> lo(d), hi(d);
    Vec<Rational> center(d);
    for (std::size_t j = 0; j < d; ++j) {
      if (rng() % 4) lo[j] = Rational(coeff(rng) - 3, 2);
      if (rng() % 4) hi[j] = Rational(coeff(rng) + 4, 2);
      center[j] = Rational(coeff(rng), 2);
    }
    const ConvexSet set = k % 3 == 0 ? ConvexSet::ball(center, Rational(1 + rng() % 3)) : ConvexSet::box(lo, hi);
    Vec<double> a(d), b(d), ab(d), la(d);
    const double lambda = uniform(rng, 0.0, 5.0);
    for (std::size_t j = 0; j < d; ++j) {
      a[j] = uniform(rng, -2, 2);
      b[j] = uniform(rng, -2, 2);
      ab[j] = a[j] + b[j];
      la[j] = lambda * a[j];
    }
    const ExtReal sa = support_function(set, a), sb = support_function(set, b);
    const ExtReal sab = support_function(set, ab), sla = support_function(set, la);
    if (sa.is_finite() && sla.is_finite())
      support_worst = std::max(support_worst, std::abs(sla.value() - lambda * sa.value()) / std::max(1.0, std::abs(sla.value())));
    else if (sa.is_pos_inf() != sla.is_pos_inf() && lambda > 0)
      support_worst = INFINITY;
    if (sa.is_finite() && sb.is_finite()) {
      if (!sab.is_finite()) support_worst = INFINITY;
      else support_worst = std::max(support_worst, sab.value() - sa.value() - sb.value());
    }
  }

  double proj_worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const std::size_t d = 1 + rng() % 4;
    Matrix<double> inc(1 + rng() % 4, Vec<double>(d));
    for (auto& r : inc)
      for (auto& v : r) v = uniform(rng, -2, 2);
    if (inc.size() > 1 && k % 2) inc.back() = inc.front();
    const auto p = predictable_range_projection(inc, d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        double sq = 0.0;
        for (std::size_t l = 0; l < d; ++l) sq += p.entries[i][l] * p.entries[l][j];
        proj_worst = std::max({proj_worst, std::abs(sq - p.entries[i][j]), std::abs(p.entries[i][j] - p.entries[j][i])});
      }
  }
  const bool ok = polar_failures == 0 && support_worst <= 1e-9 && proj_worst <= 1e-10;
  return {ok, fmt("polar round trip failures=%d/200; support worst=%.3e over 500; projection worst=%.3e", polar_failures,
                  support_worst, proj_worst)};
}

// --- 8 -------------------------------------------------------------------

Outcome endowment_embedding() {
  Rng rng(8);
  const MarketModel m = samples::two_period_binomial(samples::interval(Rational(-1), Rational(1)));
  const Rational up(1, 3), down(2, 3);
  const Vec<Rational> pricing{up * up, up * down, down * up, down * down};
  double worst = 0.0;
  bool interior = false;
  for (int k = 0; k < 3; ++k) {
    Vec<Rational> e;
    for (std::size_t i = 0; i < m.num_leaves(); ++i) e.push_back(samples::random_rational(rng, -1, 1, 8) * Rational(1, 4));
    const UtilityFunction u = k == 0 ? UtilityFunction::log() : UtilityFunction::power(k == 1 ? 0.5 : 0.3);
    // Small wealth keeps the optimum off the box corners.
    const double x = 1.0 + k * 0.25;
    const auto emb = embed_endowment(m, e, pricing);
    const PrimalSolution aug = solve_primal(emb.augmented, u, x - to_double(emb.offset), 1e-10);
    BruteForceGrid grid;
    grid.lower = -1.0;
    grid.upper = 1.0;
    grid.step = 0.05;
    grid.zoom_rounds = 6;
    grid.endowment = to_double_vec(e);
    const BruteForceResult brute = brute_force_primal(m, u, x, grid);
    const double diff = std::abs(aug.value.to_double() - brute.value.to_double());
    worst = std::isfinite(diff) ? std::max(worst, diff) : INFINITY;
    interior = interior || std::abs(brute.holdings.at(0)) < 0.99;
  }
  double zero_worst = 0.0;
  const auto zero = embed_endowment(m, Vec<Rational>(m.num_leaves(), Rational(0)), pricing);
  for (double x : {0.8, 1.0, 2.0}) {
    const UtilityFunction u = UtilityFunction::log();
    const double diff = std::abs(solve_primal(zero.augmented, u, x).value.to_double() - solve_primal(m, u, x).value.to_double());
    zero_worst = std::isfinite(diff) ? std::max(zero_worst, diff) : INFINITY;
  }
  const bool ok = worst <= 1e-6 && zero_worst <= 1e-8 && zero.offset == 0 && interior;
  return {ok, fmt("augmented vs brute force worst=%.3e (interior optimum %s); zero endowment worst=%.3e", worst,
                  interior ? "seen" : "missing", zero_worst)};
}

// --- 9 -------------------------------------------------------------------

Outcome utility_validation() {
  std::vector<double> grid;
  for (int i = 0; i < 200; ++i) grid.push_back(10.0 * std::pow(1.1, i));
  bool verdicts = true;
  for (double p : {0.2, 0.5, 0.8}) {
    const UtilityFunction u = UtilityFunction::power(p);
    verdicts = verdicts && check_rae(u, 10.0, std::pow(2.0, p) + 1e-3, grid).holds_on_grid;
    verdicts = verdicts && !check_rae(u, 10.0, std::pow(2.0, p) - 1e-3, grid).holds_on_grid;
  }
  verdicts = verdicts && !check_rae(UtilityFunction::linear(), 10.0, 1.5, grid).holds_on_grid;
  verdicts = verdicts && check_rae(UtilityFunction::log(), 10.0, 1.5, grid).holds_on_grid;

  Rng rng(9);
  double fy = 0.0;
  for (int k = 0; k < 300; ++k) {
    const UtilityFunction u = k % 3 == 0 ? UtilityFunction::log() : UtilityFunction::power(uniform(rng, 0.05, 0.95));
    const double x = std::exp(uniform(rng, -3.0, 3.0));
    const double y = u.derivative(x);
    fy = std::max(fy, std::abs(u.conjugate(y).value() + x * y - u.value(x).value()));
  }
  const bool ok = verdicts && fy <= 1e-8;
  return {ok, fmt("RAE verdicts %s; Fenchel-Young worst=%.3e over 300", verdicts ? "as derived" : "WRONG", fy)};
}

// --- 10 ------------------------------------------------------------------

Outcome property_suite() {
  RunConfig cfg;
  cfg.command = "properties";
  cfg.seed = 42;
  const auto t0 = Clock::now();
  const RunResult r = run(cfg);
  const double runtime = seconds_since(t0);
  int failed = 0, total = 0;
  std::string names;
  if (r.report.contains("properties"))
    for (const auto& p : r.report["properties"]) {
      ++total;
      if (!p.value("passed", false)) {
        ++failed;
        names += " " + p.value("name", std::string("?"));
      }
    }
  const bool ok = r.exit_code == kExitPass && total > 0 && failed == 0 && runtime < 60.0;
  return {ok, fmt("%d properties, %d failed, runtime=%.2fs%s", total, failed, runtime, names.c_str())};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"binomial log primal", binomial_log_primal},
      {"conjugacy on fixtures", conjugacy_fixtures},
      {"xbar triple agreement", xbar_agreement},
      {"primal-dual link", primal_dual_link},
      {"superhedging LP duality", superhedge_duality},
      {"certificate soundness", certificate_soundness},
      {"convex geometry suite", geometry_suite},
      {"endowment embedding", endowment_embedding},
      {"utility validation", utility_validation},
      {"full property suite", property_suite},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.ok) ++failures;
    std::printf("%s  %2zu  %-26s %s\n", o.ok ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
