#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "condual/convex_geometry.hpp"
#include "condual/numeric.hpp"

namespace condual {

/// Index of a node in an EventTree; the root is 0.
using NodeId = std::size_t;

struct TreeNode {
  std::string name;
  int time = 0;
  std::optional<NodeId> parent;
  std::vector<NodeId> children;
  Rational cond_prob{1};  // transition probability from the parent; 1 at the root
};

/// Finite filtration as a rooted tree. Nodes are stored parents-first.
class EventTree {
 public:
  EventTree() = default;
  EventTree(std::vector<TreeNode> nodes, int horizon);

  int horizon() const { return horizon_; }
  std::size_t size() const { return nodes_.size(); }
  const TreeNode& node(NodeId n) const { return nodes_[n]; }
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  bool is_leaf(NodeId n) const { return nodes_[n].children.empty(); }

  /// Leaves in storage order; leaf-indexed vectors follow this order.
  const std::vector<NodeId>& leaves() const { return leaves_; }
  const std::vector<NodeId>& internal_nodes() const { return internal_; }
  /// Position of a leaf in leaves(), or nullopt for internal nodes.
  std::optional<std::size_t> leaf_position(NodeId n) const;
  /// Leaf positions below (or equal to) n.
  const std::vector<std::size_t>& leaves_below(NodeId n) const { return below_[n]; }

  const Rational& path_prob(std::size_t leaf_pos) const { return path_prob_[leaf_pos]; }
  double path_prob_d(std::size_t leaf_pos) const { return path_prob_d_[leaf_pos]; }
  const Vec<double>& path_probs_d() const { return path_prob_d_; }
  const Vec<Rational>& path_probs() const { return path_prob_; }

 private:
  std::vector<TreeNode> nodes_;
  int horizon_ = 0;
  std::vector<NodeId> leaves_;
  std::vector<NodeId> internal_;
  std::vector<std::optional<std::size_t>> leaf_pos_;
  std::vector<std::vector<std::size_t>> below_;
  Vec<Rational> path_prob_;
  Vec<double> path_prob_d_;
};

/// Raw market description, as parsed from input and before validation.
struct MarketSpec {
  struct NodeSpec {
    std::string id;
    int time = 0;
    std::optional<std::string> parent;
    Rational prob{1};
    Vec<Rational> prices;
  };
  int horizon = 0;
  std::size_t dimension = 0;
  std::vector<NodeSpec> nodes;
  std::vector<std::pair<std::string, ConvexSet>> constraints;
  std::optional<Rational> floor;
  std::vector<std::pair<std::string, Rational>> endowment;
  bool exact = false;
};

/// Prices on the tree (numeraire 1 is implicit) and the constraint map on
/// internal nodes. Immutable once built.
class MarketModel {
 public:
  MarketModel(EventTree tree, std::size_t dim, std::vector<Vec<Rational>> prices,
              std::vector<std::optional<ConvexSet>> constraints, std::optional<Rational> floor, bool exact);

  const EventTree& tree() const { return tree_; }
  std::size_t dim() const { return dim_; }
  bool exact() const { return exact_; }
  const std::optional<Rational>& floor() const { return floor_; }

  const Vec<Rational>& price(NodeId n) const { return prices_[n]; }
  /// S(n) - S(parent(n)); zero at the root.
  const Vec<Rational>& increment(NodeId n) const { return incr_[n]; }
  const Vec<double>& increment_d(NodeId n) const { return incr_d_[n]; }
  /// Constraint set at an internal node. Throws for leaves.
  const ConvexSet& constraint(NodeId n) const;
  bool has_constraint(NodeId n) const { return constraints_[n].has_value(); }

  std::size_t num_leaves() const { return tree_.leaves().size(); }
  std::size_t num_internal() const { return tree_.internal_nodes().size(); }

 private:
  EventTree tree_;
  std::size_t dim_;
  std::vector<Vec<Rational>> prices_;
  std::vector<Vec<Rational>> incr_;
  std::vector<Vec<double>> incr_d_;
  std::vector<std::optional<ConvexSet>> constraints_;
  std::optional<Rational> floor_;
  bool exact_;
};

/// Holdings per node; entries for leaves are empty.
template <class T>
struct PortfolioProcess {
  std::vector<Vec<T>> holdings;
};

/// Same holding h at every internal node.
template <class T>
PortfolioProcess<T> constant_portfolio(const MarketModel& market, const Vec<T>& h) {
  PortfolioProcess<T> p;
  p.holdings.resize(market.tree().size());
  for (NodeId n : market.tree().internal_nodes()) p.holdings[n] = h;
  return p;
}

template <class T>
struct WealthProcess {
  T initial{0};
  Vec<T> values;  // per node
};

struct Diagnostic {
  std::string node;
  std::string check;
  std::string message;
};

/// Structural assembly without semantic validation; throws InputError only
/// when the description cannot be turned into a tree at all.
MarketModel assemble_market(const MarketSpec& spec);

/// Every failed invariant, one entry each; empty means valid.
std::vector<Diagnostic> validate_market(const MarketModel& market);

/// assemble_market followed by validate_market; throws InputError listing
/// the diagnostics when any check fails.
MarketModel build_market(const MarketSpec& spec);

template <class T>
WealthProcess<T> wealth_process(const MarketModel& market, const PortfolioProcess<T>& h, const T& x);

/// Terminal wealth per leaf position.
template <class T>
Vec<T> terminal_wealth(const MarketModel& market, const PortfolioProcess<T>& h, const T& x);

struct AdmissibilityReport {
  bool admissible = true;
  std::optional<NodeId> node;
  std::string reason;
};

template <class T>
AdmissibilityReport is_admissible(const MarketModel& market, const PortfolioProcess<T>& h, double tol = 0.0);

struct EndowmentEmbedding {
  MarketModel augmented;
  Rational offset;  // -E^Q[endowment]
};

/// Adds the endowment as an extra asset priced by conditional expectation
/// under `pricing` (leaf weights) and pins the extra holding to 1.
EndowmentEmbedding embed_endowment(const MarketModel& market, const Vec<Rational>& endowment,
                                   const Vec<Rational>& pricing);

/// Unnormalized node weights Q(n) = sum of leaf weights below n.
template <class T>
Vec<T> node_weights(const MarketModel& market, const Vec<T>& leaf_weights);

/// sum over children c of n of Q(c) * increment(c).
template <class T>
Vec<T> weighted_drift(const MarketModel& market, NodeId n, const Vec<T>& node_weight);

}  // namespace condual
