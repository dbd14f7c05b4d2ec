#include "condual/property_suite.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "condual/condition_checker.hpp"
#include "condual/convex_geometry.hpp"
#include "condual/dual_solver.hpp"
#include "condual/market.hpp"
#include "condual/portfolio_lp.hpp"
#include "condual/primal_solver.hpp"
#include "condual/sample_markets.hpp"
#include "condual/utility.hpp"

namespace condual {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
using Rng = std::mt19937_64;
using samples::random_rational;

/// Counts cases; a case fails when its violation exceeds the tolerance.
class Tally {
 public:
  explicit Tally(std::string name, double tolerance) {
    out_.name = std::move(name);
    out_.tolerance = tolerance;
  }

  void record(double violation, const std::string& what) {
    ++out_.cases;
    if (std::isnan(violation)) violation = kInf;
    out_.worst = std::max(out_.worst, violation);
    if (!(violation <= out_.tolerance)) {
      ++out_.failures;
      if (out_.note.empty()) {
        std::ostringstream s;
        s << what << " (violation " << violation << ")";
        out_.note = s.str();
      }
    }
  }
  void require(bool ok, const std::string& what) { record(ok ? 0.0 : kInf, what); }
  void remark(const std::string& text) {
    if (out_.note.empty()) out_.note = text;
  }
  PropertyOutcome finish() { return out_; }

 private:
  PropertyOutcome out_;
};

std::string str(const Rational& r) { return rational_to_string(r); }

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

Vec<Rational> random_rational_vec(Rng& rng, std::size_t n, int lo, int hi, int den) {
  Vec<Rational> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back(random_rational(rng, lo, hi, den));
  return v;
}

/// Strictly positive rational weights summing to one.
Vec<Rational> random_probability(Rng& rng, std::size_t n) {
  Vec<Rational> w;
  Rational total(0);
  for (std::size_t i = 0; i < n; ++i) {
    w.emplace_back(uniform_int(rng, 1, 9));
    total += w.back();
  }
  for (auto& x : w) x /= total;
  return w;
}

Matrix<Rational> random_int_matrix(Rng& rng, std::size_t rows, std::size_t cols, int lo, int hi) {
  Matrix<Rational> m(rows);
  for (auto& r : m) r = random_rational_vec(rng, cols, lo, hi, 1);
  return m;
}

/// Random closed convex set containing a random point; balls only when allowed.
ConvexSet random_set(Rng& rng, std::size_t d, bool allow_ball, int depth = 0) {
  using Bound = std::optional<Rational>;
  const int kinds = allow_ball ? 6 : 5;
  switch (uniform_int(rng, 0, depth > 0 ? kinds - 2 : kinds - 1)) {
    case 0: {
      std::vector<Bound> lo(d), hi(d);
      for (std::size_t j = 0; j < d; ++j) {
        if (rng() % 3) lo[j] = random_rational(rng, -3, 0, 2);
        if (rng() % 3) hi[j] = random_rational(rng, 0, 3, 2);
      }
      return ConvexSet::box(lo, hi);
    }
    case 1: {
      const auto k = static_cast<std::size_t>(uniform_int(rng, 1, 4));
      Matrix<Rational> a = random_int_matrix(rng, k, d, -3, 3);
      return ConvexSet::polyhedron(std::move(a), random_rational_vec(rng, k, 0, 2, 2), d);
    }
    case 2: return ConvexSet::singleton(random_rational_vec(rng, d, -2, 2, 3));
    case 3: {
      std::vector<Bound> fixed(d);
      for (auto& f : fixed)
        if (rng() % 2) f = random_rational(rng, -1, 1, 2);
      return ConvexSet::affine_fixed(fixed);
    }
    case 4: {
      // Both parts contain the origin, so the intersection is nonempty.
      std::vector<Bound> lo(d, Rational(-1)), hi(d, Rational(1));
      const auto k = static_cast<std::size_t>(uniform_int(rng, 1, 3));
      return ConvexSet::intersection({ConvexSet::box(lo, hi), ConvexSet::polyhedron(random_int_matrix(rng, k, d, -2, 2),
                                                                                    Vec<Rational>(k, Rational(1)), d)});
    }
    default: return ConvexSet::ball(random_rational_vec(rng, d, -1, 1, 4), random_rational(rng, 0, 2, 4));
  }
}

/// Random polyhedral cone in either form, with integer rows.
Cone random_cone(Rng& rng, std::size_t d) {
  Cone c;
  c.dim = d;
  c.form = rng() % 2 ? Cone::Form::inequality : Cone::Form::generators;
  c.rows = random_int_matrix(rng, static_cast<std::size_t>(uniform_int(rng, 1, static_cast<int>(d) + 2)), d, -3, 3);
  return c;
}

UtilityFunction random_utility(Rng& rng, bool smooth_only) {
  switch (uniform_int(rng, 0, smooth_only ? 1 : 3)) {
    case 0: return UtilityFunction::log();
    case 1: return UtilityFunction::power(uniform(rng, 0.1, 0.9));
    case 2: {
      std::vector<double> knots{0.0};
      std::vector<double> slopes{uniform(rng, 2.0, 4.0)};
      const int k = uniform_int(rng, 1, 3);
      for (int i = 0; i < k; ++i) {
        knots.push_back(knots.back() + uniform(rng, 0.3, 2.0));
        slopes.push_back(slopes.back() * uniform(rng, 0.2, 0.8));
      }
      return UtilityFunction::piecewise(knots, slopes, uniform(rng, -1.0, 1.0));
    }
    default: {
      std::vector<double> x, u;
      double s = uniform(rng, 1.0, 3.0), v = 0.0;
      for (int i = 0; i < 6; ++i) {
        x.push_back(i * 0.8);
        u.push_back(v);
        v += s * 0.8;
        s *= uniform(rng, 0.4, 0.9);
      }
      return UtilityFunction::table(x, u);
    }
  }
}

/// Random holdings drawn from each constraint set (projection of a random point).
PortfolioProcess<double> random_admissible(Rng& rng, const MarketModel& market, double spread = 3.0) {
  PortfolioProcess<double> p;
  p.holdings.resize(market.tree().size());
  for (NodeId n : market.tree().internal_nodes()) {
    Vec<double> z(market.dim());
    for (auto& v : z) v = uniform(rng, -spread, spread);
    p.holdings[n] = project(market.constraint(n), z);
  }
  return p;
}

PortfolioProcess<Rational> random_holdings_exact(Rng& rng, const MarketModel& market) {
  PortfolioProcess<Rational> p;
  p.holdings.resize(market.tree().size());
  for (NodeId n : market.tree().internal_nodes()) p.holdings[n] = random_rational_vec(rng, market.dim(), -3, 3, 4);
  return p;
}

samples::RandomMarketOptions small_market(int periods = 2, std::size_t dim = 2, int branching = 3) {
  samples::RandomMarketOptions o;
  o.max_periods = periods;
  o.max_dim = dim;
  o.max_branching = branching;
  return o;
}

/// |a - b| with equal infinities at distance 0.
double ext_distance(const ExtReal& a, const ExtReal& b) {
  if (a.is_finite() && b.is_finite()) return std::abs(a.value() - b.value());
  return a == b ? 0.0 : kInf;
}

// --- market ---------------------------------------------------------------

PropertyOutcome wealth_linearity(Rng& rng) {
  Tally t("wealth_linearity", 0.0);
  for (int k = 0; k < 60; ++k) {
    const MarketModel m = samples::random_market(rng, small_market(3, 2, 3));
    const auto h = random_holdings_exact(rng, m);
    const auto g = random_holdings_exact(rng, m);
    const Rational a = random_rational(rng, -2, 2, 3), b = random_rational(rng, -2, 2, 5);
    PortfolioProcess<Rational> comb;
    comb.holdings.resize(m.tree().size());
    for (NodeId n : m.tree().internal_nodes())
      for (std::size_t j = 0; j < m.dim(); ++j) comb.holdings[n].push_back(a * h.holdings[n][j] + b * g.holdings[n][j]);
    const auto wc = wealth_process(m, comb, Rational(0));
    const auto wh = wealth_process(m, h, Rational(0));
    const auto wg = wealth_process(m, g, Rational(0));
    bool ok = true;
    for (NodeId n = 0; n < m.tree().size(); ++n) {
      ok = ok && wc.values[n] == a * wh.values[n] + b * wg.values[n];
      // Independent recursion: X(child) = X(parent) + H(parent) . dS(child).
      if (const auto par = m.tree().node(n).parent)
        ok = ok && wh.values[n] == wh.values[*par] + dot(h.holdings[*par], m.increment(n));
    }
    ok = ok && wh.values[0] == 0;
    t.require(ok, "market " + std::to_string(k));
  }
  return t.finish();
}

PropertyOutcome probability_sum(Rng& rng) {
  Tally t("probability_sum", 0.0);
  for (int k = 0; k < 60; ++k) {
    const MarketModel m = samples::random_market(rng, small_market(3, 2, 3));
    Rational total(0);
    for (const auto& p : m.tree().path_probs()) total += p;
    bool ok = total == 1;
    for (NodeId n : m.tree().internal_nodes()) {
      Rational s(0);
      for (NodeId c : m.tree().node(n).children) s += m.tree().node(c).cond_prob;
      ok = ok && s == 1;
    }
    t.require(ok, "market " + std::to_string(k) + " path mass " + str(total));
  }
  return t.finish();
}

PropertyOutcome admissible_convexity(Rng& rng) {
  Tally t("admissible_convexity", 0.0);
  auto opts = small_market(2, 2, 3);
  opts.allow_balls = true;
  for (int k = 0; k < 60; ++k) {
    const MarketModel m = samples::random_market(rng, opts);
    const auto h = random_admissible(rng, m);
    const auto g = random_admissible(rng, m);
    const double s = uniform(rng, 0.0, 1.0);
    PortfolioProcess<double> c;
    c.holdings.resize(m.tree().size());
    for (NodeId n : m.tree().internal_nodes())
      for (std::size_t j = 0; j < m.dim(); ++j) c.holdings[n].push_back(s * h.holdings[n][j] + (1 - s) * g.holdings[n][j]);
    const bool ends = is_admissible(m, h, 1e-8).admissible && is_admissible(m, g, 1e-8).admissible;
    t.require(ends && is_admissible(m, c, 1e-8).admissible, "market " + std::to_string(k));
  }
  return t.finish();
}

PropertyOutcome zero_endowment(Rng& rng) {
  Tally t("zero_endowment", 1e-8);
  struct Case {
    MarketModel market;
    Vec<Rational> pricing;
  };
  // Increments +1 and -1/2 have martingale weight 1/3 on the up move.
  const Rational up(1, 3), down(2, 3);
  std::vector<Case> cases;
  cases.push_back({samples::b1(), {up, down}});
  cases.push_back({samples::binomial(samples::interval(Rational(-1), Rational(1))), {up, down}});
  cases.push_back({samples::two_period_binomial(ConvexSet::whole_space(1)),
                   {up * up, up * down, down * up, down * down}});
  cases.push_back({samples::two_period_binomial(samples::interval(Rational(-1, 2), Rational(1, 2))),
                   {up * up, up * down, down * up, down * down}});
  for (const auto& c : cases) {
    const Vec<Rational> zero(c.market.num_leaves(), Rational(0));
    const auto emb = embed_endowment(c.market, zero, c.pricing);
    t.require(emb.offset == 0, "offset of the zero endowment");
    for (int k = 0; k < 3; ++k) {
      const UtilityFunction u = random_utility(rng, true);
      const double x = uniform(rng, 0.5, 2.0);
      const auto direct = solve_primal(c.market, u, x, 1e-10);
      const auto aug = solve_primal(emb.augmented, u, x, 1e-10);
      t.record(ext_distance(direct.value, aug.value), u.describe() + " at x=" + std::to_string(x));
    }
  }
  return t.finish();
}

// --- geometry ---------------------------------------------------------------

PropertyOutcome support_homogeneity(Rng& rng) {
  Tally t("support_homogeneity_subadditivity", 1e-9);
  for (int k = 0; k < 500; ++k) {
    const auto d = static_cast<std::size_t>(uniform_int(rng, 1, 3));
    const bool ball = rng() % 5 == 0;
    const ConvexSet set = random_set(rng, d, ball);
    const Vec<Rational> d1 = random_rational_vec(rng, d, -3, 3, 2), d2 = random_rational_vec(rng, d, -3, 3, 2);
    const Rational lambda = random_rational(rng, 0, 4, 3);
    Vec<Rational> sum(d), scaled(d);
    for (std::size_t j = 0; j < d; ++j) {
      sum[j] = d1[j] + d2[j];
      scaled[j] = lambda * d1[j];
    }
    if (is_polyhedral(set)) {
      const auto s1 = support_function(set, d1), s2 = support_function(set, d2);
      const bool homog = support_function(set, scaled) == s1.scaled(lambda);
      const bool sub = support_function(set, sum) <= s1 + s2;
      t.require(homog && sub, set.type_name() + " case " + std::to_string(k));
    } else {
      const auto dd1 = to_double_vec(d1), dd2 = to_double_vec(d2);
      const auto s1 = support_function(set, dd1), s2 = support_function(set, dd2);
      const auto sl = support_function(set, to_double_vec(scaled));
      const auto ss = support_function(set, to_double_vec(sum));
      double v = 0.0;
      if (s1.is_finite() && sl.is_finite()) v = std::abs(sl.value() - to_double(lambda) * s1.value());
      if (ss.is_finite() && s1.is_finite() && s2.is_finite()) v = std::max(v, ss.value() - s1.value() - s2.value());
      t.record(v, "ball case " + std::to_string(k));
    }
  }
  return t.finish();
}

PropertyOutcome support_finiteness(Rng& rng) {
  Tally t("support_finite_iff_barrier", 0.0);
  for (int k = 0; k < 200; ++k) {
    const auto d = static_cast<std::size_t>(uniform_int(rng, 1, 3));
    const ConvexSet set = random_set(rng, d, false);
    const Vec<Rational> dir = random_rational_vec(rng, d, -2, 2, 1);
    const bool finite = support_function(set, dir).is_finite();
    const bool barrier = cone_contains(polar_cone(recession_cone(set)), dir);
    t.require(finite == barrier, set.type_name() + " case " + std::to_string(k));
  }
  return t.finish();
}

PropertyOutcome polar_antitone(Rng& rng) {
  Tally t("polar_antitone", 0.0);
  for (int k = 0; k < 100; ++k) {
    const auto d = static_cast<std::size_t>(uniform_int(rng, 1, 4));
    Cone big{Cone::Form::generators, random_int_matrix(rng, static_cast<std::size_t>(uniform_int(rng, 2, 5)), d, -3, 3), d};
    Cone small = big;
    small.rows.resize(static_cast<std::size_t>(uniform_int(rng, 1, static_cast<int>(big.rows.size()))));
    // small is contained in big, so big's polar lies in small's polar.
    const Cone pb = polar_cone(big), ps = polar_cone(small);
    bool ok = true;
    for (const auto& g : cone_generators(pb)) ok = ok && cone_contains(ps, g);
    t.require(ok, "case " + std::to_string(k));
  }
  return t.finish();
}

PropertyOutcome polar_round_trip(Rng& rng) {
  Tally t("polar_round_trip", 0.0);
  for (int k = 0; k < 200; ++k) {
    const auto d = static_cast<std::size_t>(uniform_int(rng, 1, 4));
    const Cone c = random_cone(rng, d);
    // Re-describe the polar in the opposite form before polarizing again, so
    // that the round trip passes through the double description method.
    const Cone p = polar_cone(c);
    Cone p_other;
    p_other.dim = d;
    if (p.form == Cone::Form::generators) {
      p_other.form = Cone::Form::inequality;
      p_other.rows = cone_inequalities(p);
    } else {
      p_other.form = Cone::Form::generators;
      p_other.rows = cone_generators(p);
    }
    t.require(cone_equal(polar_cone(p_other), c), "cone " + std::to_string(k) + " in dimension " + std::to_string(d));
  }
  return t.finish();
}

PropertyOutcome projection_properties(Rng& rng) {
  Tally t("projection_idempotent_symmetric", 1e-10);
  for (int k = 0; k < 100; ++k) {
    const auto d = static_cast<std::size_t>(uniform_int(rng, 1, 4));
    const auto rows = static_cast<std::size_t>(uniform_int(rng, 1, 4));
    Matrix<Rational> inc = random_int_matrix(rng, rows, d, -2, 2);
    if (rows > 1 && rng() % 2) {
      // A dependent row lowers the rank.
      for (std::size_t j = 0; j < d; ++j) inc.back()[j] = 2 * inc.front()[j] - inc[1 % rows][j];
    }
    const auto exact = predictable_range_projection(inc, d);
    bool ok = true;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        Rational sq(0);
        for (std::size_t l = 0; l < d; ++l) sq += exact.entries[i][l] * exact.entries[l][j];
        ok = ok && sq == exact.entries[i][j] && exact.entries[i][j] == exact.entries[j][i];
      }
    for (const auto& r : inc) ok = ok && exact.apply(r) == r;
    t.require(ok, "exact case " + std::to_string(k));

    Matrix<double> incd;
    for (const auto& r : inc) incd.push_back(to_double_vec(r));
    for (auto& r : incd)
      for (auto& v : r) v *= uniform(rng, 0.5, 1.5);
    const auto p = predictable_range_projection(incd, d);
    double err = 0.0;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        double sq = 0.0;
        for (std::size_t l = 0; l < d; ++l) sq += p.entries[i][l] * p.entries[l][j];
        err = std::max({err, std::abs(sq - p.entries[i][j]), std::abs(p.entries[i][j] - p.entries[j][i])});
      }
    t.record(err, "floating case " + std::to_string(k));
  }
  return t.finish();
}

PropertyOutcome min_norm_minimality(Rng& rng) {
  Tally t("min_norm_minimality", 1e-9);
  for (int k = 0; k < 100; ++k) {
    const auto rows = static_cast<std::size_t>(uniform_int(rng, 1, 4));
    const auto cols = static_cast<std::size_t>(uniform_int(rng, 1, 4));
    Matrix<Rational> m = random_int_matrix(rng, rows, cols, -2, 2);
    if (rows > 1 && rng() % 2) m.back() = m.front();
    const Vec<Rational> x0 = random_rational_vec(rng, cols, -2, 2, 2);
    const Vec<Rational> target = mat_vec(m, x0);
    const Vec<Rational> x = min_norm_solution(m, cols, target);
    // Solves the system and lies in the row space (so no shorter solution exists).
    Matrix<Rational> stacked = m;
    stacked.push_back(x);
    const bool ok = mat_vec(m, x) == target && matrix_rank(stacked, cols) == matrix_rank(m, cols);
    t.require(ok, "exact case " + std::to_string(k));
    Matrix<double> md;
    for (const auto& r : m) md.push_back(to_double_vec(r));
    const Vec<double> xd = min_norm_solution(md, cols, to_double_vec(target));
    double err = 0.0;
    for (std::size_t j = 0; j < cols; ++j) err = std::max(err, std::abs(xd[j] - to_double(x[j])));
    t.record(err, "floating case " + std::to_string(k));
  }
  return t.finish();
}

// --- utility ----------------------------------------------------------------

PropertyOutcome fenchel_young(Rng& rng) {
  Tally t("fenchel_young", 1e-8);
  for (int k = 0; k < 300; ++k) {
    const bool smooth = k % 2 == 0;
    const UtilityFunction u = random_utility(rng, smooth);
    const double x = uniform(rng, 1e-3, 10.0), y = uniform(rng, 1e-3, 10.0);
    const double ux = u.value(x).value();
    const ExtReal vy = u.conjugate(y);
    double viol = vy.is_finite() ? std::max(0.0, ux - vy.value() - x * y) : 0.0;
    if (smooth) {
      const double yx = u.derivative(x);
      viol = std::max(viol, std::abs(ux - u.conjugate(yx).value() - x * yx) / std::max(1.0, std::abs(ux)));
    }
    t.record(viol, u.describe() + " at x=" + std::to_string(x));
  }
  return t.finish();
}

PropertyOutcome conjugate_shape(Rng& rng) {
  Tally t("conjugate_convex_nonincreasing", 1e-10);
  for (int k = 0; k < 100; ++k) {
    const UtilityFunction u = random_utility(rng, false);
    std::vector<double> ys;
    for (int i = 0; i < 20; ++i) ys.push_back(uniform(rng, 0.05, 10.0));
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end(), [](double a, double b) { return b - a < 1e-6; }), ys.end());
    std::vector<double> vs;
    for (double y : ys) vs.push_back(u.conjugate(y).to_double());
    double viol = 0.0;
    for (std::size_t i = 0; i + 1 < ys.size(); ++i) {
      if (!std::isfinite(vs[i]) || !std::isfinite(vs[i + 1])) continue;
      viol = std::max(viol, vs[i + 1] - vs[i]);
      if (i + 2 < ys.size() && std::isfinite(vs[i + 2])) {
        const double s1 = (vs[i + 1] - vs[i]) / (ys[i + 1] - ys[i]);
        const double s2 = (vs[i + 2] - vs[i + 1]) / (ys[i + 2] - ys[i + 1]);
        viol = std::max(viol, (s1 - s2) / std::max(1.0, std::abs(s1)));
      }
    }
    t.record(viol, u.describe());
  }
  return t.finish();
}

PropertyOutcome rae_verdicts(Rng& rng) {
  Tally t("rae_verdicts", 0.0);
  std::vector<double> grid;
  for (int i = 0; i < 200; ++i) grid.push_back(10.0 * std::pow(1.1, i));
  for (int k = 0; k < 40; ++k) {
    const double p = uniform(rng, 0.05, 0.95);
    const UtilityFunction u = UtilityFunction::power(p);
    const double c = std::pow(2.0, p);
    const auto above = check_rae(u, 10.0, c + 1e-3, grid);
    const auto below = check_rae(u, 10.0, c - 1e-3, grid);
    t.require(above.holds_on_grid && above.analytic == true && !below.holds_on_grid && below.analytic == false,
              "power p=" + std::to_string(p));
    const double cl = uniform(rng, 1.01, 1.99);
    const auto lin = check_rae(UtilityFunction::linear(), 10.0, cl, grid);
    t.require(!lin.holds_on_grid && lin.analytic == false, "linear c=" + std::to_string(cl));
  }
  const auto log_ok = check_rae(UtilityFunction::log(), 10.0, 1.5, grid);
  t.require(log_ok.holds_on_grid && log_ok.analytic == true, "log c=1.5 x0=10");
  std::vector<double> low{2.0, 4.0, 8.0};
  const auto log_low = check_rae(UtilityFunction::log(), 2.0, 1.5, low);
  t.require(!log_low.holds_on_grid && log_low.analytic == false, "log c=1.5 x0=2");
  return t.finish();
}

PropertyOutcome biconjugate(Rng& rng) {
  Tally t("biconjugate", 1e-6);
  std::vector<double> ys;
  for (int i = 0; i <= 40000; ++i) ys.push_back(std::pow(10.0, -3.0 + 6.0 * i / 40000.0));
  for (int k = 0; k < 12; ++k) {
    const UtilityFunction u = random_utility(rng, k % 3 == 0);
    std::vector<double> yk = ys;
    for (double s : u.slopes()) yk.push_back(s);
    std::vector<double> vk;
    for (double y : yk) vk.push_back(u.conjugate(y).to_double());
    for (int i = 0; i < 8; ++i) {
      const double x = uniform(rng, 0.1, 6.0);
      double best = kInf;
      for (std::size_t j = 0; j < yk.size(); ++j) best = std::min(best, vk[j] + x * yk[j]);
      const double ux = u.value(x).value();
      t.record(std::abs(best - ux) / std::max(1.0, std::abs(ux)), u.describe() + " at x=" + std::to_string(x));
    }
  }
  return t.finish();
}

// --- primal and dual --------------------------------------------------------

/// One period, dimension one, bounded box constraint inside [-2, 2].
MarketModel random_one_period(Rng& rng) {
  MarketSpec spec;
  spec.horizon = 1;
  spec.dimension = 1;
  spec.exact = true;
  spec.nodes.push_back({"root", 0, std::nullopt, Rational(1), {Rational(1)}});
  const int b = uniform_int(rng, 2, 3);
  const Vec<Rational> probs = random_probability(rng, static_cast<std::size_t>(b));
  for (int i = 0; i < b; ++i) {
    Rational inc = i == 0 ? random_rational(rng, 1, 2, 4) : random_rational(rng, -1, 1, 4) * Rational(1, 2);
    if (i == 1 && inc >= 0) inc = -inc - Rational(1, 4);
    spec.nodes.push_back({"l" + std::to_string(i), 1, std::string("root"), probs[static_cast<std::size_t>(i)],
                          {Rational(1) + inc}});
  }
  spec.constraints = {{"root", samples::interval(-random_rational(rng, 0, 2, 4), random_rational(rng, 0, 2, 4))}};
  return build_market(spec);
}

PropertyOutcome primal_brute_force(Rng& rng) {
  Tally t("primal_against_brute_force", 1e-6);
  for (int k = 0; k < 60; ++k) {
    const MarketModel m = random_one_period(rng);
    const UtilityFunction u = random_utility(rng, k % 2 == 0);
    std::vector<ExtReal> values;
    for (double x : {0.75, 1.0, 1.25}) {
      const PrimalSolution sol = solve_primal(m, u, x, 1e-10);
      BruteForceGrid grid;
      grid.step = 1e-2;
      grid.zoom_rounds = 6;
      const BruteForceResult brute = brute_force_primal(m, u, x, grid);
      values.push_back(sol.value);
      double v = ext_distance(sol.value, brute.value);
      if (!is_admissible(m, sol.holdings, 1e-9).admissible) v = kInf;
      t.record(v, u.describe() + " case " + std::to_string(k));
    }
    // Nondecreasing and concave in the initial wealth.
    const double mono = std::max(values[0].to_double() - values[1].to_double(), values[1].to_double() - values[2].to_double());
    const double conc = 0.5 * (values[0].to_double() + values[2].to_double()) - values[1].to_double();
    t.record(std::max({0.0, mono, conc}), "shape case " + std::to_string(k));
  }
  return t.finish();
}

PropertyOutcome weak_duality(Rng& rng) {
  Tally t("weak_duality", 1e-7);
  for (int k = 0; k < 100; ++k) {
    const MarketModel m = samples::random_market(rng, small_market(2, 2, 2));
    const UtilityFunction u = random_utility(rng, true);
    const double x = uniform(rng, 0.5, 2.0), y = uniform(rng, 0.3, 3.0);
    const auto p = solve_primal(m, u, x, 1e-10);
    const auto d = solve_dual(m, u, y, 1e-10);
    double v = 0.0;
    if (p.value.is_pos_inf()) {
      v = d.value.is_pos_inf() ? 0.0 : kInf;
    } else if (d.value.is_finite() && p.value.is_finite()) {
      v = p.value.value() - d.value.value() - x * y;
    }
    t.record(v, u.describe() + " case " + std::to_string(k));
  }
  return t.finish();
}

PropertyOutcome alpha_homogeneity(Rng& rng) {
  Tally t("alpha_homogeneity_convexity", 0.0);
  for (int k = 0; k < 100; ++k) {
    const MarketModel m = samples::random_market(rng, small_market(2, 2, 3));
    const auto q1 = random_probability(rng, m.num_leaves()), q2 = random_probability(rng, m.num_leaves());
    const Rational lambda = random_rational(rng, 1, 4, 3), s = random_rational(rng, 0, 1, 5);
    Vec<Rational> scaled, mix;
    for (std::size_t i = 0; i < q1.size(); ++i) {
      scaled.push_back(lambda * q1[i]);
      mix.push_back(s * q1[i] + (1 - s) * q2[i]);
    }
    const auto a1 = support_alpha(m, q1), a2 = support_alpha(m, q2);
    const bool homog = support_alpha(m, scaled) == a1.scaled(lambda);
    const bool convex = support_alpha(m, mix) <= a1.scaled(s) + a2.scaled(Rational(1 - s));
    t.require(homog && convex, "market " + std::to_string(k));
  }
  return t.finish();
}

PropertyOutcome superhedge_duality(Rng& rng) {
  Tally t("superhedge_lp_duality", 1e-8);
  for (int k = 0; k < 25; ++k) {
    const MarketModel m = samples::random_market(rng, small_market(3, 2, 2));
    for (int j = 0; j < 4; ++j) {
      const Vec<Rational> f = random_rational_vec(rng, m.num_leaves(), -3, 3, 4);
      const auto ex = superhedge_price<Rational>(m, f);
      const auto fl = superhedge_price<double>(m, to_double_vec(f));
      const Rational c = random_rational(rng, -2, 2, 7);
      Vec<Rational> shifted = f;
      for (auto& v : shifted) v += c;
      const auto sh = superhedge_price<Rational>(m, shifted);
      const std::string what = "market " + std::to_string(k) + " payoff " + std::to_string(j);
      t.require(ex.price == ex.dual_price, what + ": exact primal and dual differ");
      t.require(sh.price == ex.price + Extended<Rational>(c), what + ": translation");
      double v = ext_distance(fl.price, fl.dual_price);
      v = std::max(v, ext_distance(fl.price, to_ext_double(ex.price)));
      t.record(v / std::max(1.0, std::abs(fl.price.is_finite() ? fl.price.value() : 0.0)), what);
      if (ex.price.is_finite() && ex.bound.is_finite()) {
        Rational max_abs(0);
        for (const auto& v2 : f) max_abs = std::max(max_abs, abs_value(v2));
        t.require(abs_value(ex.price.value()) <= ex.bound.value() + max_abs, what + ": price bound");
      }
    }
  }
  return t.finish();
}

PropertyOutcome hedging_characterization(Rng& rng) {
  Tally t("hedging_characterization", 0.0);
  for (int k = 0; k < 50; ++k) {
    const MarketModel m = samples::random_market(rng, small_market(2, 2, 2));
    const Vec<Rational> f = random_rational_vec(rng, m.num_leaves(), -3, 3, 4);
    const auto res = superhedge_price<Rational>(m, f);
    if (!res.price.is_finite()) {
      t.require(res.price == res.dual_price, "market " + std::to_string(k) + " infinite price");
      continue;
    }
    const Rational rho = res.price.value();
    // f - rho is hedgeable from zero: every Q prices it below alpha(Q).
    bool ok = true;
    for (int j = 0; j < 10; ++j) {
      const auto q = random_probability(rng, m.num_leaves());
      Rational eq(0);
      for (std::size_t i = 0; i < q.size(); ++i) eq += q[i] * (f[i] - rho);
      ok = ok && Extended<Rational>(eq) <= support_alpha(m, q);
    }
    // Any claim above rho - f + eps is not: the dual optimizer separates it.
    Rational eq(0);
    for (std::size_t i = 0; i < res.q.size(); ++i) eq += res.q[i] * f[i];
    ok = ok && support_alpha(m, res.q) + Extended<Rational>(rho) == Extended<Rational>(eq);
    t.require(ok, "market " + std::to_string(k));
  }
  return t.finish();
}

PropertyOutcome minimax(Rng& rng) {
  Tally t("minimax", 1e-8);
  for (int k = 0; k < 100; ++k) {
    const MarketModel m = samples::random_market(rng, small_market(2, 2, 3));
    const auto ex = min_support<Rational>(m);
    t.require(ex.inf_alpha == ex.sup_essinf && ex.xbar == -ex.inf_alpha, "market " + std::to_string(k) + " exact");
    const auto fl = min_support<double>(m);
    t.record(ext_distance(fl.inf_alpha, fl.sup_essinf), "market " + std::to_string(k) + " floating");
  }
  return t.finish();
}

PropertyOutcome dual_convexity(Rng& rng) {
  Tally t("dual_value_convex", 1e-7);
  for (int k = 0; k < 60; ++k) {
    const MarketModel m = samples::random_market(rng, small_market(2, 1, 2));
    const UtilityFunction u = random_utility(rng, true);
    const double y1 = uniform(rng, 0.2, 1.0), h = uniform(rng, 0.1, 1.0);
    const auto a = solve_dual(m, u, y1, 1e-10), b = solve_dual(m, u, y1 + h, 1e-10), c = solve_dual(m, u, y1 + 2 * h, 1e-10);
    double v = 0.0;
    if (a.value.is_finite() && b.value.is_finite() && c.value.is_finite())
      v = b.value.value() - 0.5 * (a.value.value() + c.value.value());
    t.record(v, u.describe() + " case " + std::to_string(k));
  }
  return t.finish();
}

// --- conditions -------------------------------------------------------------

/// Checks a certificate against conditional drifts recomputed from its Q.
double certificate_violation(const MarketModel& m, const ConditionCertificate& cert, const PortfolioProcess<double>& h) {
  const Vec<double> w = node_weights(m, cert.q);
  double worst = -kInf;
  for (const auto& step : cert.steps) {
    const Vec<double> drift = weighted_drift(m, step.node, w);
    double gain = 0.0;
    for (std::size_t j = 0; j < m.dim(); ++j) gain += (h.holdings[step.node][j] - step.h_hat[j]) * drift[j] / w[step.node];
    worst = std::max(worst, gain - step.increment);
  }
  return worst;
}

PropertyOutcome certificate_soundness(Rng& rng) {
  Tally t("certificate_soundness", 1e-10);
  std::vector<MarketModel> markets;
  for (const auto& g : samples::golden_markets()) markets.push_back(g.market);
  markets.push_back(samples::two_period_binomial(samples::interval(Rational(-1), Rational(2))));
  int certified = 0;
  for (int k = 0; k < 80; ++k) {
    auto opts = small_market(2, 2, 3);
    opts.conic = k % 2 == 0;
    markets.push_back(samples::random_market(rng, opts));
  }
  for (std::size_t k = 0; k < markets.size(); ++k) {
    const MarketModel& m = markets[k];
    const ConditionCertificate cert = check_supermartingale_condition(m);
    if (cert.supermartingale != Verdict::yes) continue;
    ++certified;
    const std::string what = "market " + std::to_string(k);
    // Increments are delta_kappa(beta) - H^ . beta with beta recomputed here.
    const Vec<double> w = node_weights(m, cert.q);
    for (const auto& step : cert.steps) {
      Vec<double> beta = weighted_drift(m, step.node, w);
      // Rounding residue of an exact zero drift would hit an unbounded direction.
      for (auto& b : beta) {
        b /= w[step.node];
        if (std::abs(b) <= 1e-12) b = 0.0;
      }
      const auto sup = support_function(m.constraint(step.node), beta);
      double hb = 0.0;
      for (std::size_t j = 0; j < m.dim(); ++j) hb += step.h_hat[j] * beta[j];
      t.record(sup.is_finite() ? std::abs(sup.value() - hb - step.increment) / std::max(1.0, std::abs(sup.value())) : kInf,
               what + " increment at node " + step.name);
    }
    bool conic = true;
    for (NodeId n : m.tree().internal_nodes()) {
      const ConvexSet& s = m.constraint(n);
      conic = conic && is_polyhedral(s) && std::visit([](const auto& v) {
        using S = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<S, Polyhedron>) {
          return std::all_of(v.b.begin(), v.b.end(), [](const Rational& b) { return b == 0; });
        } else if constexpr (std::is_same_v<S, Box>) {
          auto zero = [](const std::optional<Rational>& b) { return !b || *b == 0; };
          return std::all_of(v.lower.begin(), v.lower.end(), zero) && std::all_of(v.upper.begin(), v.upper.end(), zero);
        } else {
          return false;
        }
      }, s.data());
    }
    double worst = -kInf;
    for (int j = 0; j < 100; ++j) {
      const auto h = random_admissible(rng, m, 4.0);
      worst = std::max(worst, certificate_violation(m, cert, h));
      if (conic)
        for (double lambda : {2.0, 0.5}) worst = std::max(worst, certificate_violation(m, scale_certificate(cert, lambda), h));
    }
    t.record(worst, what + " random portfolios");
  }
  // The deterministic market S_t = t with kappa = (-inf, 1]: unit increments, A_T = 2.
  const ConditionCertificate dc = check_supermartingale_condition(samples::d1());
  double dv = std::abs(dc.terminal_compensator() - 2.0);
  for (const auto& s : dc.steps) dv = std::max(dv, std::abs(s.increment - 1.0));
  t.record(dv, "deterministic market compensator");
  t.remark(std::to_string(certified) + " certified markets");
  return t.finish();
}

PropertyOutcome sufficient_condition(Rng& rng) {
  Tally t("sufficient_condition_implies_compactness", 0.0);
  std::vector<MarketModel> markets;
  for (const auto& g : samples::golden_markets()) markets.push_back(g.market);
  for (int k = 0; k < 40; ++k) markets.push_back(samples::random_market(rng, small_market(2, 2, 3)));
  for (std::size_t k = 0; k < markets.size(); ++k) {
    const auto cert = check_supermartingale_condition(markets[k]);
    const bool certified = cert.nonempty == Verdict::yes && cert.supermartingale == Verdict::yes &&
                           cert.closedness.overall == Verdict::yes;
    if (!certified) continue;
    const auto compact = check_convex_compactness(markets[k], 1.0);
    t.require(compact.compact == Verdict::yes, "market " + std::to_string(k));
  }
  return t.finish();
}

PropertyOutcome drift_membership(Rng& rng) {
  Tally t("drift_condition_memberships", 0.0);
  for (int k = 0; k < 100; ++k) {
    const auto d = static_cast<std::size_t>(uniform_int(rng, 1, 3));
    const auto cols = static_cast<std::size_t>(uniform_int(rng, 1, 3));
    Matrix<Rational> sigma = random_int_matrix(rng, d, cols, -2, 2);
    if (rng() % 4 == 0)
      for (auto& r : sigma) r.assign(cols, Rational(0));
    const Vec<Rational> mu = random_rational_vec(rng, d, -2, 2, 2);
    Cone barrier;
    switch (uniform_int(rng, 0, 2)) {
      case 0: barrier = Cone::zero(d); break;
      case 1: barrier = Cone::whole(d); break;
      default: barrier = random_cone(rng, d); break;
    }
    const DriftResult r = check_drift_condition(sigma, mu, barrier);
    const std::string what = "case " + std::to_string(k);
    if (r.holds) {
      Vec<Rational> diff(d);
      for (std::size_t i = 0; i < d; ++i) diff[i] = mu[i] - r.mu_hat[i];
      t.require(mat_vec(sigma, r.nu) == r.mu_hat && diff == r.beta && cone_contains(barrier, r.beta), what);
    } else {
      // No sigma nu with mu - sigma nu in the barrier cone, on random nu.
      bool ok = !cone_contains(barrier, mu);
      for (int j = 0; j < 20; ++j) {
        const Vec<Rational> s = mat_vec(sigma, random_rational_vec(rng, cols, -2, 2, 2));
        Vec<Rational> diff(d);
        for (std::size_t i = 0; i < d; ++i) diff[i] = mu[i] - s[i];
        ok = ok && !cone_contains(barrier, diff);
      }
      t.require(ok, what + " (refuted)");
    }
  }
  return t.finish();
}

PropertyOutcome endowment_embedding(Rng& rng) {
  Tally t("endowment_embedding", 1e-6);
  const MarketModel m = samples::two_period_binomial(samples::interval(Rational(-1), Rational(1)));
  const Rational up(1, 3), down(2, 3);
  const Vec<Rational> pricing{up * up, up * down, down * up, down * down};
  for (int k = 0; k < 4; ++k) {
    const Vec<Rational> e = random_rational_vec(rng, m.num_leaves(), 0, 1, 4);
    const UtilityFunction u = random_utility(rng, true);
    const double x = uniform(rng, 0.8, 1.5);
    const auto emb = embed_endowment(m, e, pricing);
    const auto aug = solve_primal(emb.augmented, u, x - to_double(emb.offset), 1e-10);
    BruteForceGrid grid;
    grid.lower = -1.0;
    grid.upper = 1.0;
    grid.step = 0.05;
    grid.zoom_rounds = 6;
    grid.endowment = to_double_vec(e);
    const auto brute = brute_force_primal(m, u, x, grid);
    t.record(ext_distance(aug.value, brute.value), u.describe() + " at x=" + std::to_string(x));
  }
  return t.finish();
}

using PropertyFn = PropertyOutcome (*)(Rng&);

const std::vector<std::pair<std::string, PropertyFn>>& registry() {
  static const std::vector<std::pair<std::string, PropertyFn>> props = {
      {"wealth_linearity", wealth_linearity},
      {"probability_sum", probability_sum},
      {"admissible_convexity", admissible_convexity},
      {"zero_endowment", zero_endowment},
      {"endowment_embedding", endowment_embedding},
      {"support_homogeneity_subadditivity", support_homogeneity},
      {"support_finite_iff_barrier", support_finiteness},
      {"polar_antitone", polar_antitone},
      {"polar_round_trip", polar_round_trip},
      {"projection_idempotent_symmetric", projection_properties},
      {"min_norm_minimality", min_norm_minimality},
      {"fenchel_young", fenchel_young},
      {"conjugate_convex_nonincreasing", conjugate_shape},
      {"biconjugate", biconjugate},
      {"rae_verdicts", rae_verdicts},
      {"primal_against_brute_force", primal_brute_force},
      {"weak_duality", weak_duality},
      {"alpha_homogeneity_convexity", alpha_homogeneity},
      {"superhedge_lp_duality", superhedge_duality},
      {"hedging_characterization", hedging_characterization},
      {"minimax", minimax},
      {"dual_value_convex", dual_convexity},
      {"certificate_soundness", certificate_soundness},
      {"sufficient_condition_implies_compactness", sufficient_condition},
      {"drift_condition_memberships", drift_membership},
  };
  return props;
}

std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

bool PropertyReport::passed() const {
  return !outcomes.empty() && std::all_of(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.passed(); });
}

const std::vector<std::string>& property_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, fn] : registry()) out.push_back(name);
    return out;
  }();
  return names;
}

PropertyOutcome run_property(const std::string& name, std::uint64_t seed) {
  for (const auto& [n, fn] : registry()) {
    if (n != name) continue;
    Rng rng(seed ^ name_hash(name));
    const auto start = std::chrono::steady_clock::now();
    PropertyOutcome out;
    try {
      out = fn(rng);
    } catch (const std::exception& e) {
      out.name = name;
      out.cases = std::max(out.cases, 1);
      out.failures = std::max(out.failures, 1);
      out.note = std::string("exception: ") + e.what();
    }
    out.name = name;
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
  }
  throw std::invalid_argument("unknown property '" + name + "'");
}

PropertyReport run_property_suite(std::uint64_t seed, const std::vector<std::string>& only) {
  for (const auto& n : only)
    if (std::find(property_names().begin(), property_names().end(), n) == property_names().end())
      throw std::invalid_argument("unknown property '" + n + "'");
  PropertyReport rep;
  rep.seed = seed;
  const auto start = std::chrono::steady_clock::now();
  for (const auto& name : property_names())
    if (only.empty() || std::find(only.begin(), only.end(), name) != only.end())
      rep.outcomes.push_back(run_property(name, seed));
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

}  // namespace condual
