#include "condual/condition_checker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "condual/portfolio_lp.hpp"

namespace condual {

namespace {

/// Leaf-weight coefficients of the unnormalized drift at node n, coordinate j.
Vec<Rational> drift_row(const MarketModel& market, NodeId n, std::size_t j, std::size_t width) {
  const auto& tree = market.tree();
  Vec<Rational> row(width, Rational(0));
  for (NodeId c : tree.node(n).children)
    for (std::size_t l : tree.leaves_below(c)) row[l] += market.increment(c)[j];
  return row;
}

/// Strictly positive leaf measure under which every node drift lies in the
/// cone spanned by `cones[n]` (nullptr means the drift must vanish).
std::optional<Vec<Rational>> positive_measure(const MarketModel& market, const std::vector<const Matrix<Rational>*>& cones) {
  const auto& tree = market.tree();
  const std::size_t leaves = tree.leaves().size();
  LinearProgram<Rational> lp(leaves + 1);
  for (std::size_t l = 0; l < leaves; ++l) lp.nonneg[l] = true;
  const std::size_t s = leaves;
  lp.objective[s] = Rational(1);
  std::vector<std::vector<std::size_t>> lam(tree.size());
  for (NodeId n : tree.internal_nodes()) {
    if (!cones[n]) continue;
    for (std::size_t r = 0; r < cones[n]->size(); ++r) lam[n].push_back(lp.add_var(true));
  }
  const std::size_t width = lp.num_vars();
  Vec<Rational> simplex(width, Rational(0));
  for (std::size_t l = 0; l < leaves; ++l) simplex[l] = Rational(1);
  lp.add_row(simplex, RowSense::eq, Rational(1));
  for (std::size_t l = 0; l < leaves; ++l) {
    Vec<Rational> row(width, Rational(0));
    row[l] = Rational(1);
    row[s] = Rational(-1);
    lp.add_row(std::move(row), RowSense::ge, Rational(0));
  }
  Vec<Rational> cap(width, Rational(0));
  cap[s] = Rational(1);
  lp.add_row(std::move(cap), RowSense::le, Rational(1));
  for (NodeId n : tree.internal_nodes()) {
    for (std::size_t j = 0; j < market.dim(); ++j) {
      Vec<Rational> row = drift_row(market, n, j, width);
      if (cones[n])
        for (std::size_t r = 0; r < cones[n]->size(); ++r) row[lam[n][r]] = -(*cones[n])[r][j];
      lp.add_row(std::move(row), RowSense::eq, Rational(0));
    }
  }
  const auto res = solve_lp(lp);
  if (res.status != LpStatus::optimal || res.objective <= 0) return std::nullopt;
  return Vec<Rational>(res.x.begin(), res.x.begin() + static_cast<std::ptrdiff_t>(leaves));
}

/// Recession direction d of kappa with d . beta > 0, scaled into the unit box.
std::optional<Vec<Rational>> unbounded_direction(const ConvexSet& kappa, const Vec<Rational>& beta) {
  const Cone rec = recession_cone(kappa);
  const std::size_t d = beta.size();
  LinearProgram<Rational> lp(d);
  lp.objective = beta;
  for (const auto& r : rec.rows) lp.add_row(r, RowSense::le, Rational(0));
  for (std::size_t j = 0; j < d; ++j) {
    Vec<Rational> e(d, Rational(0));
    e[j] = Rational(1);
    lp.add_row(e, RowSense::le, Rational(1));
    lp.add_row(e, RowSense::ge, Rational(-1));
  }
  const auto res = solve_lp(lp);
  if (res.status != LpStatus::optimal || res.objective <= 0) return std::nullopt;
  return res.x;
}

Vec<Rational> conditional_drift(const MarketModel& market, NodeId n, const Vec<Rational>& node_weight) {
  Vec<Rational> beta = weighted_drift(market, n, node_weight);
  if (node_weight[n] == 0) throw std::logic_error("conditional_drift: node without mass");
  for (auto& b : beta) b /= node_weight[n];
  return beta;
}

bool contains_origin(const ConvexSet& set) { return contains(set, Vec<Rational>(set.dim(), Rational(0))); }

}  // namespace

NonemptyResult check_nonempty(const MarketModel& market) {
  NonemptyResult out;
  const auto& tree = market.tree();
  out.witness.holdings.assign(tree.size(), {});
  for (NodeId n : tree.internal_nodes()) {
    if (is_empty(market.constraint(n))) {
      out.failing_node = n;
      out.note = "empty constraint set at node " + tree.node(n).name;
      return out;
    }
    out.witness.holdings[n] = interior_witness(market.constraint(n));
  }
  if (!market.floor() || is_admissible(market, out.witness).admissible) {
    out.nonempty = true;
    return out;
  }
  // The nodewise selection breaks the wealth floor; ask the LP instead.
  const PortfolioLayout layout(market);
  if (market.exact() && !has_ball_constraint(market)) {
    const auto mm = maximin_gain<Rational>(market);
    if (mm.value.is_neg_inf()) {
      out.note = "no portfolio respects the wealth floor";
      return out;
    }
    if (!mm.holdings.empty()) out.witness = layout.unflatten(mm.holdings);
  } else {
    const auto mm = maximin_gain<double>(market);
    if (mm.value.is_neg_inf()) {
      out.note = "no portfolio respects the wealth floor";
      return out;
    }
    Vec<Rational> flat;
    for (double v : mm.holdings) flat.push_back(rational_from_double(v));
    if (!flat.empty()) out.witness = layout.unflatten(flat);
    out.note = "floor-feasible witness computed in floating point";
  }
  out.nonempty = true;
  return out;
}

ClosednessReport check_projected_closedness(const MarketModel& market) {
  ClosednessReport out;
  const auto& tree = market.tree();
  bool all_yes = true;
  bool any_no = false;
  for (NodeId n : tree.internal_nodes()) {
    Matrix<double> incr;
    for (NodeId c : tree.node(n).children) incr.push_back(market.increment_d(c));
    const auto proj = predictable_range_projection<double>(incr, market.dim());
    NodeClosedness nc;
    nc.node = n;
    nc.name = tree.node(n).name;
    nc.span_rank = proj.rank();
    nc.result = projected_set_closed(proj, market.constraint(n));
    all_yes = all_yes && nc.result.closed == Verdict::yes;
    any_no = any_no || nc.result.closed == Verdict::no;
    out.nodes.push_back(std::move(nc));
  }
  out.overall = any_no ? Verdict::no : (all_yes ? Verdict::yes : Verdict::unknown);
  return out;
}

double ConditionCertificate::terminal_compensator() const {
  double a = 0.0;
  for (double v : compensator) a = std::max(a, v);
  return a;
}

ConditionCertificate check_supermartingale_condition(const MarketModel& market) {
  ConditionCertificate cert;
  const auto& tree = market.tree();
  const auto ne = check_nonempty(market);
  cert.nonempty = ne.nonempty ? Verdict::yes : Verdict::no;
  cert.witness = ne.witness;
  cert.closedness = check_projected_closedness(market);
  cert.notes.push_back("local and true supermartingales coincide on a finite tree");
  if (!ne.nonempty) {
    cert.notes.push_back("no admissible portfolio: " + ne.note);
    return cert;
  }

  // Builds H^ and dA for a candidate Q; false when some support is infinite.
  auto certify = [&](const Vec<Rational>& q, const std::string& stage) -> bool {
    const Vec<Rational> w = node_weights(market, q);
    std::vector<CompensatorStep> steps;
    PortfolioProcess<double> h_hat;
    h_hat.holdings.assign(tree.size(), {});
    for (NodeId n : tree.internal_nodes()) {
      const ConvexSet& kappa = market.constraint(n);
      const Vec<Rational> beta = conditional_drift(market, n, w);
      const ExtReal support = support_function(kappa, to_double_vec(beta));
      if (!support.is_finite()) {
        if (!cert.failure) {
          if (auto dir = unbounded_direction(kappa, beta)) cert.failure = UnboundedDirection{n, tree.node(n).name, *dir};
        }
        return false;
      }
      Vec<Rational> h;
      if (contains_origin(kappa)) {
        h.assign(market.dim(), Rational(0));
      } else if (auto arg = support_argmax(kappa, beta)) {
        h = *arg;
      } else {
        h = ne.witness.holdings[n];
      }
      h_hat.holdings[n] = to_double_vec(h);
      CompensatorStep step;
      step.node = n;
      step.name = tree.node(n).name;
      step.beta = to_double_vec(beta);
      step.h_hat = h_hat.holdings[n];
      step.support = support.value();
      step.increment = std::max(0.0, support.value() - dot(step.h_hat, step.beta));
      steps.push_back(std::move(step));
    }
    if (market.floor() && !is_admissible(market, h_hat, 1e-12).admissible) {
      // Any admissible H^ works; fall back to the floor-feasible witness.
      PortfolioProcess<double> alt;
      alt.holdings.assign(tree.size(), {});
      for (auto& step : steps) {
        step.h_hat = to_double_vec(ne.witness.holdings[step.node]);
        step.increment = std::max(0.0, step.support - dot(step.h_hat, step.beta));
        alt.holdings[step.node] = step.h_hat;
      }
      h_hat = std::move(alt);
      cert.notes.push_back("H^ replaced by the floor-feasible witness");
    }
    cert.q = to_double_vec(q);
    cert.h_hat = std::move(h_hat);
    cert.stage = stage;
    cert.compensator.assign(tree.size(), 0.0);
    std::vector<double> da(tree.size(), 0.0);
    for (const auto& step : steps) da[step.node] = step.increment;
    for (NodeId n = 0; n < tree.size(); ++n)
      if (const auto& p = tree.node(n).parent) cert.compensator[n] = cert.compensator[*p] + da[*p];
    cert.steps = std::move(steps);
    cert.supermartingale = Verdict::yes;
    return true;
  };

  // (i) a strictly positive martingale measure.
  std::vector<const Matrix<Rational>*> none(tree.size(), nullptr);
  if (auto q = positive_measure(market, none)) {
    if (certify(*q, "martingale")) return cert;
  }
  // (ii) the reference measure with a compensator.
  if (certify(tree.path_probs(), "physical")) return cert;
  // (iii) any positive Q with every drift in the barrier cone of its node.
  std::vector<Matrix<Rational>> rows(tree.size());
  std::vector<const Matrix<Rational>*> cones(tree.size(), nullptr);
  for (NodeId n : tree.internal_nodes()) {
    rows[n] = recession_cone(market.constraint(n)).rows;
    cones[n] = &rows[n];
  }
  if (auto q = positive_measure(market, cones)) {
    if (certify(*q, "lp")) return cert;
  }
  cert.supermartingale = Verdict::unknown;
  cert.notes.push_back("not certified: every stage failed; the condition is only sufficient");
  return cert;
}

double supermartingale_violation(const MarketModel& market, const ConditionCertificate& cert,
                                 const PortfolioProcess<double>& h) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& step : cert.steps) {
    const Vec<double>& hn = h.holdings.at(step.node);
    double gain = 0.0;
    for (std::size_t j = 0; j < market.dim(); ++j) gain += (hn[j] - step.h_hat[j]) * step.beta[j];
    worst = std::max(worst, gain - step.increment);
  }
  return worst;
}

ConditionCertificate scale_certificate(const ConditionCertificate& cert, double lambda) {
  if (!(lambda > 0)) throw std::invalid_argument("scale_certificate: lambda must be positive");
  ConditionCertificate out = cert;
  for (auto& h : out.h_hat.holdings)
    for (auto& v : h) v *= lambda;
  for (auto& step : out.steps) {
    for (auto& v : step.h_hat) v *= lambda;
    step.increment *= lambda;
    step.support *= lambda;
  }
  for (auto& a : out.compensator) a *= lambda;
  return out;
}

DriftResult check_drift_condition(const Matrix<Rational>& sigma, const Vec<Rational>& mu, const Cone& barrier) {
  const std::size_t d = mu.size();
  if (sigma.size() != d || barrier.dim != d) throw std::invalid_argument("check_drift_condition: dimension mismatch");
  const std::size_t k = d == 0 ? 0 : sigma.front().size();
  for (const auto& r : sigma)
    if (r.size() != k) throw std::invalid_argument("check_drift_condition: ragged sigma");
  // Variables: c (free) with mu_hat = sigma c, and generator weights.
  const bool gens = barrier.form == Cone::Form::generators;
  LinearProgram<Rational> lp(k + (gens ? barrier.rows.size() : 0));
  for (std::size_t g = 0; g < (gens ? barrier.rows.size() : 0); ++g) lp.nonneg[k + g] = true;
  if (gens) {
    // sigma c + G' lambda = mu.
    for (std::size_t i = 0; i < d; ++i) {
      Vec<Rational> row(lp.num_vars(), Rational(0));
      for (std::size_t c = 0; c < k; ++c) row[c] = sigma[i][c];
      for (std::size_t g = 0; g < barrier.rows.size(); ++g) row[k + g] = barrier.rows[g][i];
      lp.add_row(std::move(row), RowSense::eq, mu[i]);
    }
  } else {
    // R (mu - sigma c) <= 0.
    for (const auto& r : barrier.rows) {
      Vec<Rational> row(lp.num_vars(), Rational(0));
      Rational rhs(0);
      for (std::size_t i = 0; i < d; ++i) {
        rhs -= r[i] * mu[i];
        for (std::size_t c = 0; c < k; ++c) row[c] -= r[i] * sigma[i][c];
      }
      lp.add_row(std::move(row), RowSense::le, rhs);
    }
  }
  DriftResult out;
  const auto res = solve_lp(lp);
  if (res.status != LpStatus::optimal) return out;
  out.mu_hat.assign(d, Rational(0));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t c = 0; c < k; ++c) out.mu_hat[i] += sigma[i][c] * res.x[c];
  out.nu = k ? min_norm_solution(sigma, k, out.mu_hat) : Vec<Rational>{};
  out.beta.resize(d);
  for (std::size_t i = 0; i < d; ++i) out.beta[i] = mu[i] - out.mu_hat[i];
  out.holds = cone_contains(barrier, out.beta);
  return out;
}

CompactnessResult check_convex_compactness(const MarketModel& market, double x) {
  CompactnessResult out;
  out.x = x;
  if (auto dir = improving_recession_direction(market)) {
    out.bounded = Verdict::no;
    out.recession_direction = PortfolioLayout(market).unflatten(*dir);
  } else {
    out.bounded = Verdict::yes;
  }
  out.closed = check_projected_closedness(market).overall;
  if (out.bounded == Verdict::no || out.closed == Verdict::no) {
    out.compact = Verdict::no;
  } else if (out.closed == Verdict::yes) {
    out.compact = Verdict::yes;
  }
  return out;
}

}  // namespace condual
