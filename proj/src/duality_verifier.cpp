#include "condual/duality_verifier.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <stdexcept>

namespace condual {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Sample {
  ExtReal value;
  double slope = kNaN;  // derivative when the family is smooth
  PrimalStatus primal = PrimalStatus::optimal;
};

template <class F>
std::vector<Sample> evaluate(const std::vector<double>& pts, bool parallel, F f) {
  std::vector<std::future<Sample>> jobs;
  for (double p : pts) jobs.push_back(std::async(parallel ? std::launch::async : std::launch::deferred, f, p));
  std::vector<Sample> out;
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

/// Upper bound on sup of a concave g over (lo, inf) from its grid values and
/// supergradient estimates; slopes may be NaN, then neighbouring chords are
/// used instead (they overestimate g outside their own interval).
double concave_sup_bound(const std::vector<double>& xs, const std::vector<double>& g, const std::vector<double>& s,
                         double lo) {
  const std::size_t n = xs.size();
  const bool smooth = std::none_of(s.begin(), s.end(), [](double v) { return std::isnan(v); });
  std::vector<double> chord(n > 1 ? n - 1 : 0);
  for (std::size_t i = 0; i + 1 < n; ++i) chord[i] = (g[i + 1] - g[i]) / (xs[i + 1] - xs[i]);
  // Slope of an upper line anchored at x_i valid to the right / left of x_i.
  auto right_slope = [&](std::size_t i) -> double {
    if (smooth) return s[i];
    return i >= 1 ? chord[i - 1] : kNaN;
  };
  auto left_slope = [&](std::size_t i) -> double {
    if (smooth) return s[i];
    return i + 1 < n ? chord[i] : kNaN;
  };
  double best = *std::max_element(g.begin(), g.end());
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double sl = right_slope(i);
    const double sr = left_slope(i + 1);
    double sup;
    if (std::isnan(sl) && std::isnan(sr)) {
      sup = kInf;
    } else if (std::isnan(sr)) {
      sup = sl <= 0 ? g[i] : g[i] + sl * (xs[i + 1] - xs[i]);
    } else if (std::isnan(sl)) {
      sup = sr >= 0 ? g[i + 1] : g[i + 1] - sr * (xs[i + 1] - xs[i]);
    } else if (sl <= 0) {
      sup = g[i];
    } else if (sr >= 0) {
      sup = g[i + 1];
    } else {
      double cross = (g[i + 1] - g[i] + sl * xs[i] - sr * xs[i + 1]) / (sl - sr);
      cross = std::clamp(cross, xs[i], xs[i + 1]);
      sup = std::min(g[i] + sl * (cross - xs[i]), g[i + 1] + sr * (cross - xs[i + 1]));
    }
    best = std::max(best, sup);
  }
  // Tails beyond the grid.
  const double s0 = smooth ? s[0] : (n > 1 ? chord[0] : kNaN);
  if (std::isnan(s0)) return kInf;
  if (s0 < 0) best = std::max(best, std::isfinite(lo) ? g[0] + s0 * (lo - xs[0]) : kInf);
  const double sn = smooth ? s[n - 1] : (n > 1 ? chord[n - 2] : kNaN);
  if (std::isnan(sn) || sn > 0) return kInf;
  return best;
}

bool finite_all(const std::vector<Sample>& v) {
  return std::all_of(v.begin(), v.end(), [](const Sample& s) { return s.value.is_finite(); });
}

ConjugacyPoint compare(double at, const ExtReal& value, const ExtReal& envelope, double bound, double tol) {
  ConjugacyPoint p;
  p.at = at;
  p.value = value;
  p.envelope = envelope;
  p.tolerance = tol;
  p.grid_bound = bound;
  if (value.is_finite() && envelope.is_finite()) {
    p.residual = std::abs(value.value() - envelope.value());
    p.verdict = p.residual <= tol + bound ? CheckVerdict::pass : CheckVerdict::fail;
  } else if (value == envelope) {
    p.residual = 0.0;
    p.verdict = CheckVerdict::pass;
  } else {
    p.residual = kInf;
    p.verdict = CheckVerdict::fail;
  }
  return p;
}

double expected_marginal(const MarketModel& market, const UtilityFunction& u, const Vec<double>& terminal) {
  double m = 0.0;
  for (std::size_t l = 0; l < terminal.size(); ++l) m += market.tree().path_prob_d(l) * u.derivative(terminal[l]);
  return m;
}

void require_grid(const std::vector<double>& g, const char* name) {
  if (g.empty()) throw std::invalid_argument(std::string(name) + " is empty");
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g[i])) throw std::invalid_argument(std::string(name) + " has a non-finite entry");
    if (i > 0 && !(g[i] > g[i - 1])) throw std::invalid_argument(std::string(name) + " must be strictly increasing");
  }
}

ExtReal xbar_estimate(const MarketModel& market) {
  if (market.exact() && !has_ball_constraint(market)) return min_support<Rational>(market).xbar.to_double();
  return min_support<double>(market).xbar;
}

}  // namespace

std::string to_string(CheckVerdict v) {
  switch (v) {
    case CheckVerdict::pass: return "pass";
    case CheckVerdict::fail: return "fail";
    default: return "abstain";
  }
}

DualityReport verify_conjugacy(const MarketModel& market, const UtilityFunction& u, const std::vector<double>& x_grid,
                               const std::vector<double>& y_grid, double tol, const VerifyOptions& options) {
  require_grid(x_grid, "x_grid");
  require_grid(y_grid, "y_grid");
  if (!(tol > 0)) throw std::invalid_argument("verify_conjugacy: tol must be positive");
  if (y_grid.front() <= 0) throw std::invalid_argument("y_grid must be positive");
  const ExtReal xbar = xbar_estimate(market);
  if (xbar.is_pos_inf() || (xbar.is_finite() && x_grid.front() <= xbar.value()))
    throw std::invalid_argument("x_grid must lie strictly above xbar = " + ext_to_string(xbar));

  DualityReport report;
  const bool smooth = u.smooth_strictly_concave();
  const auto us = evaluate(x_grid, options.parallel, [&](double x) {
    const auto sol = solve_primal(market, u, x, options.solver_tol);
    Sample s{sol.value, kNaN, sol.status};
    if (smooth && sol.value.is_finite()) s.slope = expected_marginal(market, u, sol.terminal);
    return s;
  });
  const auto vs = evaluate(y_grid, options.parallel, [&](double y) {
    const auto sol = solve_dual(market, u, y, std::min(options.solver_tol, 1e-10));
    Sample s{sol.value, kNaN, PrimalStatus::optimal};
    if (smooth && sol.value.is_finite()) s.slope = dual_derivative(market, u, y, sol);
    return s;
  });
  for (const auto& s : us)
    if (s.primal == PrimalStatus::max_iterations) report.notes.push_back("primal solver hit the iteration cap");

  const bool finite = finite_all(us) && finite_all(vs);
  if (!finite) report.notes.push_back("infinite values on the grid; grid bounds not computed");

  // v(y) against sup over the x grid of u(x) - x y.
  for (std::size_t j = 0; j < y_grid.size(); ++j) {
    const double y = y_grid[j];
    ExtReal env = ExtReal::neg_inf();
    double bound = kInf;
    if (finite) {
      std::vector<double> g, s;
      for (std::size_t i = 0; i < x_grid.size(); ++i) {
        g.push_back(us[i].value.value() - x_grid[i] * y);
        s.push_back(us[i].slope - y);
      }
      env = ExtReal(*std::max_element(g.begin(), g.end()));
      bound = concave_sup_bound(x_grid, g, s, xbar.is_finite() ? xbar.value() : -kInf) - env.value();
    } else {
      for (std::size_t i = 0; i < x_grid.size(); ++i) {
        const ExtReal c = us[i].value + ExtReal(-x_grid[i] * y);
        if (env < c) env = c;
      }
    }
    report.v_checks.push_back(compare(y, vs[j].value, env, std::max(0.0, bound), tol));
  }
  // u(x) against inf over the y grid of v(y) + x y.
  for (std::size_t i = 0; i < x_grid.size(); ++i) {
    const double x = x_grid[i];
    ExtReal env = ExtReal::pos_inf();
    double bound = kInf;
    if (finite) {
      std::vector<double> negh, negs;
      for (std::size_t j = 0; j < y_grid.size(); ++j) {
        negh.push_back(-(vs[j].value.value() + x * y_grid[j]));
        negs.push_back(-(vs[j].slope + x));
      }
      const double top = *std::max_element(negh.begin(), negh.end());
      env = ExtReal(-top);
      bound = concave_sup_bound(y_grid, negh, negs, 0.0) - top;
    } else {
      for (std::size_t j = 0; j < y_grid.size(); ++j) {
        const ExtReal c = vs[j].value + ExtReal(x * y_grid[j]);
        if (c < env) env = c;
      }
    }
    report.u_checks.push_back(compare(x, us[i].value, env, std::max(0.0, bound), tol));
  }

  report.worst_weak_violation = -kInf;
  for (std::size_t i = 0; i < x_grid.size(); ++i)
    for (std::size_t j = 0; j < y_grid.size(); ++j) {
      const double dv = us[i].value.to_double() - vs[j].value.to_double() - x_grid[i] * y_grid[j];
      if (!std::isnan(dv)) report.worst_weak_violation = std::max(report.worst_weak_violation, dv);
    }
  for (const auto& p : report.v_checks) report.worst_gap = std::max(report.worst_gap, p.residual);
  for (const auto& p : report.u_checks) report.worst_gap = std::max(report.worst_gap, p.residual);

  if (finite) {
    auto chord = [](const std::vector<double>& xs, const std::vector<Sample>& f, std::size_t i) {
      return (f[i + 1].value.value() - f[i].value.value()) / (xs[i + 1] - xs[i]);
    };
    for (std::size_t i = 0; i + 1 < x_grid.size(); ++i) {
      if (us[i + 1].value.value() < us[i].value.value() - 1e-9) report.shape_ok = false;
      if (i + 2 < x_grid.size() && chord(x_grid, us, i + 1) > chord(x_grid, us, i) + 1e-7) report.shape_ok = false;
    }
    for (std::size_t j = 0; j + 2 < y_grid.size(); ++j)
      if (chord(y_grid, vs, j + 1) < chord(y_grid, vs, j) - 1e-7) report.shape_ok = false;
  }
  report.xbar = verify_xbar(market);

  bool ok = report.shape_ok && report.worst_weak_violation <= report.weak_tolerance;
  for (const auto& p : report.v_checks) ok = ok && p.verdict == CheckVerdict::pass;
  for (const auto& p : report.u_checks) ok = ok && p.verdict == CheckVerdict::pass;
  ok = ok && report.xbar->verdict == CheckVerdict::pass;
  report.verdict = ok ? CheckVerdict::pass : CheckVerdict::fail;
  return report;
}

double locate_y_hat(const MarketModel& market, const UtilityFunction& u, double x, double solver_tol) {
  if (!u.smooth_strictly_concave()) throw std::invalid_argument("locate_y_hat: utility must be smooth and strictly concave");
  const auto primal = solve_primal(market, u, x, solver_tol);
  if (primal.status != PrimalStatus::optimal) throw std::invalid_argument("locate_y_hat: primal problem is not solvable at x");
  const double m = expected_marginal(market, u, primal.terminal);
  const double dual_tol = 1e-10;
  // y -> v(y) + x y is convex; bisect on the sign of its derivative.
  auto slope = [&](double y) {
    const auto sol = solve_dual(market, u, y, dual_tol);
    if (!sol.value.is_finite()) throw std::runtime_error("locate_y_hat: dual value is infinite");
    return dual_derivative(market, u, y, sol) + x;
  };
  double lo = m / 4.0;
  double hi = m * 4.0;
  for (int k = 0; k < 60 && slope(lo) > 0; ++k) lo /= 4.0;
  for (int k = 0; k < 60 && slope(hi) < 0; ++k) hi *= 4.0;
  for (int k = 0; k < 200 && hi - lo > 1e-15 * hi; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (slope(mid) < 0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

LinkReport verify_primal_dual_link(const MarketModel& market, const UtilityFunction& u, double x, double tol,
                                   double solver_tol) {
  if (!u.smooth_strictly_concave())
    throw std::invalid_argument("verify_primal_dual_link: utility must be smooth and strictly concave");
  const ExtReal xbar = xbar_estimate(market);
  if (xbar.is_pos_inf() || (xbar.is_finite() && x <= xbar.value()))
    throw std::invalid_argument("verify_primal_dual_link: x must exceed xbar = " + ext_to_string(xbar));
  LinkReport report;
  report.x = x;
  report.tolerance = tol;
  report.solver_tol = solver_tol;
  report.y_hat = locate_y_hat(market, u, x, solver_tol);
  const auto dual = solve_dual(market, u, report.y_hat, 1e-10);
  report.dual_attained = dual.attained;
  if (!dual.attained) {
    report.verdict = CheckVerdict::abstain;
    report.note = "dual minimizer not certified at y_hat";
    return report;
  }
  const auto primal = solve_primal(market, u, x, solver_tol);
  const auto& tree = market.tree();
  for (std::size_t l = 0; l < tree.leaves().size(); ++l) {
    LinkResidual r;
    r.leaf = tree.node(tree.leaves()[l]).name;
    r.terminal = primal.terminal[l];
    r.predicted = -u.conjugate_derivative(report.y_hat * dual.q[l] / tree.path_prob_d(l));
    r.residual = std::abs(r.terminal - r.predicted);
    report.max_residual = std::max(report.max_residual, r.residual);
    report.leaves.push_back(std::move(r));
  }
  report.verdict = report.max_residual <= tol ? CheckVerdict::pass : CheckVerdict::fail;
  return report;
}

XbarTriple verify_xbar(const MarketModel& market, double tol) {
  XbarTriple out;
  out.tolerance = tol;
  if (market.exact() && !has_ball_constraint(market)) {
    const auto ms = min_support<Rational>(market);
    out.from_support = ms.xbar.to_double();
    out.from_essinf = (-ms.sup_essinf).to_double();
    if (ms.xbar.is_finite()) out.exact = ms.xbar.value();
  } else {
    const auto ms = min_support<double>(market);
    out.from_support = ms.xbar;
    out.from_essinf = -ms.sup_essinf;
  }

  // Feasibility boundary of a bounded piecewise-linear utility, which is
  // finite exactly on [xbar, inf).
  const UtilityFunction capped = UtilityFunction::piecewise({0.0, 1.0}, {1.0, 0.0});
  auto feasible = [&](double x) { return solve_primal(market, capped, x).status != PrimalStatus::infeasible; };
  double hi = 0.0;
  int k = 0;
  for (; k < 60 && !feasible(hi); ++k) hi = 2.0 * hi + 1.0;
  if (k == 60) {
    out.from_bisection = ExtReal::pos_inf();
  } else {
    double width = 1.0;
    double lo = hi - width;
    for (k = 0; k < 60 && feasible(lo); ++k) {
      hi = lo;
      width *= 2.0;
      lo = hi - width;
    }
    if (k == 60) {
      out.from_bisection = ExtReal::neg_inf();
    } else {
      while (hi - lo > 1e-3 * tol) {
        const double mid = 0.5 * (lo + hi);
        if (feasible(mid)) {
          hi = mid;
        } else {
          lo = mid;
        }
      }
      out.from_bisection = ExtReal(hi);
    }
  }

  const ExtReal legs[] = {out.from_support, out.from_essinf, out.from_bisection};
  const bool all_finite = std::all_of(std::begin(legs), std::end(legs), [](const ExtReal& e) { return e.is_finite(); });
  if (all_finite) {
    double mn = kInf, mx = -kInf;
    for (const auto& e : legs) {
      mn = std::min(mn, e.value());
      mx = std::max(mx, e.value());
    }
    out.spread = mx - mn;
  } else {
    out.spread = (legs[0] == legs[1] && legs[1] == legs[2]) ? 0.0 : kInf;
  }
  out.verdict = out.spread <= tol ? CheckVerdict::pass : CheckVerdict::fail;
  return out;
}

}  // namespace condual
