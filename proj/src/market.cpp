#include "condual/market.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace condual {

EventTree::EventTree(std::vector<TreeNode> nodes, int horizon) : nodes_(std::move(nodes)), horizon_(horizon) {
  const std::size_t n = nodes_.size();
  leaf_pos_.assign(n, std::nullopt);
  below_.assign(n, {});
  for (NodeId i = 0; i < n; ++i) {
    if (nodes_[i].children.empty()) {
      leaf_pos_[i] = leaves_.size();
      leaves_.push_back(i);
    } else {
      internal_.push_back(i);
    }
  }
  std::vector<Rational> reach(n, Rational(1));
  for (NodeId i = 0; i < n; ++i)
    if (nodes_[i].parent) reach[i] = reach[*nodes_[i].parent] * nodes_[i].cond_prob;
  for (NodeId leaf : leaves_) {
    path_prob_.push_back(reach[leaf]);
    path_prob_d_.push_back(reach[leaf].convert_to<double>());
  }
  // Children are stored after parents, so a reverse sweep accumulates leaves.
  for (NodeId i = n; i-- > 0;) {
    if (leaf_pos_[i]) below_[i].push_back(*leaf_pos_[i]);
    if (nodes_[i].parent) {
      auto& up = below_[*nodes_[i].parent];
      up.insert(up.end(), below_[i].begin(), below_[i].end());
    }
  }
  for (auto& v : below_) std::sort(v.begin(), v.end());
}

std::optional<std::size_t> EventTree::leaf_position(NodeId n) const { return leaf_pos_[n]; }

MarketModel::MarketModel(EventTree tree, std::size_t dim, std::vector<Vec<Rational>> prices,
                         std::vector<std::optional<ConvexSet>> constraints, std::optional<Rational> floor, bool exact)
    : tree_(std::move(tree)),
      dim_(dim),
      prices_(std::move(prices)),
      constraints_(std::move(constraints)),
      floor_(std::move(floor)),
      exact_(exact) {
  const std::size_t n = tree_.size();
  incr_.assign(n, Vec<Rational>(dim_, Rational(0)));
  incr_d_.assign(n, Vec<double>(dim_, 0.0));
  for (NodeId i = 0; i < n; ++i) {
    const auto& parent = tree_.node(i).parent;
    if (!parent) continue;
    if (prices_[i].size() != dim_ || prices_[*parent].size() != dim_) continue;
    for (std::size_t j = 0; j < dim_; ++j) {
      incr_[i][j] = prices_[i][j] - prices_[*parent][j];
      incr_d_[i][j] = incr_[i][j].convert_to<double>();
    }
  }
}

const ConvexSet& MarketModel::constraint(NodeId n) const {
  if (!constraints_[n]) throw std::out_of_range("no constraint set at node '" + tree_.node(n).name + "'");
  return *constraints_[n];
}

MarketModel assemble_market(const MarketSpec& spec) {
  if (spec.dimension == 0) throw InputError("market: dimension must be at least 1");
  std::map<std::string, std::size_t> by_name;
  for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
    if (!by_name.emplace(spec.nodes[i].id, i).second)
      throw InputError("market: duplicate node id '" + spec.nodes[i].id + "'");
  }
  std::optional<std::size_t> root;
  std::vector<std::vector<std::size_t>> kids(spec.nodes.size());
  for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
    const auto& nd = spec.nodes[i];
    if (!nd.parent) {
      if (root) throw InputError("market: more than one root ('" + spec.nodes[*root].id + "', '" + nd.id + "')");
      root = i;
      continue;
    }
    const auto it = by_name.find(*nd.parent);
    if (it == by_name.end()) throw InputError("market: node '" + nd.id + "' has unknown parent '" + *nd.parent + "'");
    kids[it->second].push_back(i);
  }
  if (!root) throw InputError("market: no root node (parent: null)");

  // Breadth-first relabelling puts every parent before its children.
  std::vector<std::size_t> order{*root};
  std::vector<bool> seen(spec.nodes.size(), false);
  seen[*root] = true;
  for (std::size_t k = 0; k < order.size(); ++k)
    for (std::size_t c : kids[order[k]]) {
      if (seen[c]) throw InputError("market: cycle through node '" + spec.nodes[c].id + "'");
      seen[c] = true;
      order.push_back(c);
    }
  if (order.size() != spec.nodes.size()) throw InputError("market: some nodes are not reachable from the root");
  std::vector<NodeId> relabel(spec.nodes.size());
  for (std::size_t k = 0; k < order.size(); ++k) relabel[order[k]] = k;

  std::vector<TreeNode> nodes(order.size());
  std::vector<Vec<Rational>> prices(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& nd = spec.nodes[order[k]];
    nodes[k].name = nd.id;
    nodes[k].time = nd.time;
    nodes[k].cond_prob = nd.parent ? nd.prob : Rational(1);
    if (nd.parent) nodes[k].parent = relabel[by_name.at(*nd.parent)];
    for (std::size_t c : kids[order[k]]) nodes[k].children.push_back(relabel[c]);
    prices[k] = nd.prices;
  }
  std::vector<std::optional<ConvexSet>> constraints(order.size());
  for (const auto& [name, set] : spec.constraints) {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw InputError("market: constraint given for unknown node '" + name + "'");
    constraints[relabel[it->second]] = set;
  }
  return MarketModel(EventTree(std::move(nodes), spec.horizon), spec.dimension, std::move(prices),
                     std::move(constraints), spec.floor, spec.exact);
}

std::vector<Diagnostic> validate_market(const MarketModel& market) {
  std::vector<Diagnostic> out;
  const auto& tree = market.tree();
  auto fail = [&](NodeId n, std::string check, std::string msg) {
    out.push_back({tree.node(n).name, std::move(check), std::move(msg)});
  };
  if (tree.size() == 0) {
    out.push_back({"", "nonempty", "tree has no nodes"});
    return out;
  }
  if (tree.node(0).time != 0) fail(0, "root_time", "root must have time 0");
  for (NodeId n = 0; n < tree.size(); ++n) {
    const auto& nd = tree.node(n);
    if (market.price(n).size() != market.dim())
      fail(n, "price_dimension",
           "expected " + std::to_string(market.dim()) + " prices, got " + std::to_string(market.price(n).size()));
    if (nd.parent && nd.cond_prob <= 0) fail(n, "probability_positive", "transition probability must be > 0");
    if (tree.is_leaf(n)) {
      if (nd.time != tree.horizon())
        fail(n, "leaf_depth",
             "leaf at time " + std::to_string(nd.time) + " but horizon is " + std::to_string(tree.horizon()));
      continue;
    }
    Rational total(0);
    for (NodeId c : nd.children) {
      total += tree.node(c).cond_prob;
      if (tree.node(c).time != nd.time + 1) fail(c, "time_step", "child time must be parent time + 1");
    }
    if (total != 1) fail(n, "probability_sum", "children probabilities sum to " + total.str() + ", not 1");
    if (!market.has_constraint(n)) {
      fail(n, "constraint_present", "internal node has no constraint set");
    } else {
      const auto& set = market.constraint(n);
      if (set.dim() != market.dim()) {
        fail(n, "constraint_dimension", "constraint set has dimension " + std::to_string(set.dim()));
      } else if (is_empty(set)) {
        fail(n, "constraint_nonempty", "constraint set is empty");
      }
    }
  }
  if (market.floor() && *market.floor() < 0) out.push_back({"", "floor", "admissibility floor must be >= 0"});
  return out;
}

MarketModel build_market(const MarketSpec& spec) {
  MarketModel market = assemble_market(spec);
  const auto diags = validate_market(market);
  if (!diags.empty()) {
    std::ostringstream msg;
    msg << "invalid market:";
    for (const auto& d : diags) msg << " [" << d.check << (d.node.empty() ? "" : " at '" + d.node + "'") << ": " << d.message << "]";
    throw InputError(msg.str());
  }
  return market;
}

template <class T>
WealthProcess<T> wealth_process(const MarketModel& market, const PortfolioProcess<T>& h, const T& x) {
  const auto& tree = market.tree();
  if (h.holdings.size() != tree.size()) throw std::invalid_argument("wealth_process: portfolio size mismatch");
  WealthProcess<T> w;
  w.initial = x;
  w.values.assign(tree.size(), T(0));
  w.values[0] = x;
  for (NodeId n = 1; n < tree.size(); ++n) {
    const NodeId p = *tree.node(n).parent;
    const auto& hp = h.holdings[p];
    if (hp.size() != market.dim()) throw std::invalid_argument("wealth_process: holding dimension mismatch");
    T gain(0);
    for (std::size_t j = 0; j < market.dim(); ++j) {
      if constexpr (ScalarTraits<T>::exact) {
        gain += hp[j] * market.increment(n)[j];
      } else {
        gain += hp[j] * market.increment_d(n)[j];
      }
    }
    w.values[n] = w.values[p] + gain;
  }
  return w;
}

template <class T>
Vec<T> terminal_wealth(const MarketModel& market, const PortfolioProcess<T>& h, const T& x) {
  const auto w = wealth_process(market, h, x);
  Vec<T> out;
  for (NodeId leaf : market.tree().leaves()) out.push_back(w.values[leaf]);
  return out;
}

template <class T>
AdmissibilityReport is_admissible(const MarketModel& market, const PortfolioProcess<T>& h, double tol) {
  AdmissibilityReport rep;
  for (NodeId n : market.tree().internal_nodes()) {
    bool inside = false;
    if constexpr (ScalarTraits<T>::exact) {
      inside = contains(market.constraint(n), h.holdings[n]);
    } else {
      inside = contains(market.constraint(n), h.holdings[n], tol);
    }
    if (!inside) {
      rep.admissible = false;
      rep.node = n;
      rep.reason = "holding outside the constraint set at node '" + market.tree().node(n).name + "'";
      return rep;
    }
  }
  if (market.floor()) {
    const auto w = wealth_process(market, h, T(0));
    const T floor = ScalarTraits<T>::from_rational(-*market.floor());
    for (NodeId n = 0; n < market.tree().size(); ++n) {
      if (w.values[n] < floor - T(tol)) {
        rep.admissible = false;
        rep.node = n;
        rep.reason = "gains fall below the admissibility floor at node '" + market.tree().node(n).name + "'";
        return rep;
      }
    }
  }
  return rep;
}

template <class T>
Vec<T> node_weights(const MarketModel& market, const Vec<T>& leaf_weights) {
  const auto& tree = market.tree();
  if (leaf_weights.size() != tree.leaves().size()) throw std::invalid_argument("node_weights: leaf count mismatch");
  Vec<T> w(tree.size(), T(0));
  for (NodeId n = tree.size(); n-- > 0;) {
    if (auto pos = tree.leaf_position(n)) w[n] += leaf_weights[*pos];
    if (tree.node(n).parent) w[*tree.node(n).parent] += w[n];
  }
  return w;
}

template <class T>
Vec<T> weighted_drift(const MarketModel& market, NodeId n, const Vec<T>& node_weight) {
  Vec<T> beta(market.dim(), T(0));
  for (NodeId c : market.tree().node(n).children) {
    for (std::size_t j = 0; j < market.dim(); ++j) {
      if constexpr (ScalarTraits<T>::exact) {
        beta[j] += node_weight[c] * market.increment(c)[j];
      } else {
        beta[j] += node_weight[c] * market.increment_d(c)[j];
      }
    }
  }
  return beta;
}

template WealthProcess<double> wealth_process<double>(const MarketModel&, const PortfolioProcess<double>&, const double&);
template WealthProcess<Rational> wealth_process<Rational>(const MarketModel&, const PortfolioProcess<Rational>&,
                                                          const Rational&);
template Vec<double> terminal_wealth<double>(const MarketModel&, const PortfolioProcess<double>&, const double&);
template Vec<Rational> terminal_wealth<Rational>(const MarketModel&, const PortfolioProcess<Rational>&, const Rational&);
template AdmissibilityReport is_admissible<double>(const MarketModel&, const PortfolioProcess<double>&, double);
template AdmissibilityReport is_admissible<Rational>(const MarketModel&, const PortfolioProcess<Rational>&, double);
template Vec<double> node_weights<double>(const MarketModel&, const Vec<double>&);
template Vec<Rational> node_weights<Rational>(const MarketModel&, const Vec<Rational>&);
template Vec<double> weighted_drift<double>(const MarketModel&, NodeId, const Vec<double>&);
template Vec<Rational> weighted_drift<Rational>(const MarketModel&, NodeId, const Vec<Rational>&);

EndowmentEmbedding embed_endowment(const MarketModel& market, const Vec<Rational>& endowment,
                                   const Vec<Rational>& pricing) {
  const auto& tree = market.tree();
  const std::size_t leaves = tree.leaves().size();
  if (endowment.size() != leaves) throw InputError("endowment: expected one value per leaf");
  if (pricing.size() != leaves) throw InputError("pricing measure: expected one weight per leaf");
  Rational mass(0);
  for (const auto& q : pricing) {
    if (q <= 0) throw InputError("pricing measure is not equivalent to P (a leaf weight is not positive)");
    mass += q;
  }
  const Rational tol = market.exact() ? Rational(0) : Rational(1, 10000000000LL);
  if (abs_value(Rational(mass - 1)) > tol) throw InputError("pricing measure must have total mass 1");
  const Vec<Rational> weight = node_weights(market, pricing);
  for (NodeId n : tree.internal_nodes()) {
    const Vec<Rational> beta = weighted_drift(market, n, weight);
    for (const auto& b : beta)
      if (abs_value(Rational(b / weight[n])) > tol)
        throw InputError("pricing measure is not a martingale measure (drift at node '" + tree.node(n).name + "')");
  }
  // Conditional expectation of the endowment at every node.
  Vec<Rational> cond(tree.size(), Rational(0));
  for (NodeId n = 0; n < tree.size(); ++n) {
    Rational acc(0);
    for (std::size_t pos : tree.leaves_below(n)) acc += pricing[pos] * endowment[pos];
    cond[n] = acc / weight[n];
  }
  std::vector<Vec<Rational>> prices(tree.size());
  std::vector<std::optional<ConvexSet>> constraints(tree.size());
  for (NodeId n = 0; n < tree.size(); ++n) {
    prices[n] = market.price(n);
    prices[n].push_back(cond[n]);
    if (market.has_constraint(n))
      constraints[n] = ConvexSet::product({market.constraint(n), ConvexSet::singleton({Rational(1)})});
  }
  EndowmentEmbedding out{MarketModel(tree, market.dim() + 1, std::move(prices), std::move(constraints), market.floor(),
                                     market.exact()),
                         Rational(-cond[0])};
  return out;
}

}  // namespace condual
