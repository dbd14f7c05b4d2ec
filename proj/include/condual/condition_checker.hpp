#pragma once

#include <optional>
#include <string>
#include <vector>

#include "condual/convex_geometry.hpp"
#include "condual/market.hpp"

namespace condual {

struct NonemptyResult {
  bool nonempty = false;
  PortfolioProcess<Rational> witness;
  /// First node whose constraint set is empty, or the floor when the
  /// selections are fine but the wealth floor cuts them all off.
  std::optional<NodeId> failing_node;
  std::string note;
};

NonemptyResult check_nonempty(const MarketModel& market);

struct NodeClosedness {
  NodeId node = 0;
  std::string name;
  std::size_t span_rank = 0;
  ClosednessResult result;
};

struct ClosednessReport {
  Verdict overall = Verdict::unknown;
  std::vector<NodeClosedness> nodes;
};

ClosednessReport check_projected_closedness(const MarketModel& market);

struct CompensatorStep {
  NodeId node = 0;
  std::string name;
  Vec<double> beta;   // E^Q[increment | node]
  Vec<double> h_hat;
  double support = 0.0;  // delta_kappa(beta)
  double increment = 0.0;  // support - h_hat . beta
};

struct UnboundedDirection {
  NodeId node = 0;
  std::string name;
  Vec<Rational> direction;  // recession direction d with d . beta > 0
};

struct ConditionCertificate {
  Verdict nonempty = Verdict::unknown;
  PortfolioProcess<Rational> witness;
  ClosednessReport closedness;
  /// yes when a triple (Q, H^, A) was found; unknown when every stage failed.
  Verdict supermartingale = Verdict::unknown;
  std::string stage;  // "martingale", "physical" or "lp"
  Vec<double> q;
  PortfolioProcess<double> h_hat;
  std::vector<CompensatorStep> steps;  // one per internal node
  /// Accumulated compensator per node: A(root) = 0, A(child) = A(parent) + dA(parent).
  std::vector<double> compensator;
  std::optional<UnboundedDirection> failure;
  std::vector<std::string> notes;

  /// A at the leaves, maximized over leaves.
  double terminal_compensator() const;
};

ConditionCertificate check_supermartingale_condition(const MarketModel& market);

/// Largest violation over nodes of E^Q[(H - H^) . dS | node] - dA(node).
double supermartingale_violation(const MarketModel& market, const ConditionCertificate& cert,
                                 const PortfolioProcess<double>& h);

/// Certificate with H^ and A scaled by lambda > 0 (valid for conic constraints).
ConditionCertificate scale_certificate(const ConditionCertificate& cert, double lambda);

struct DriftResult {
  bool holds = false;
  Vec<Rational> mu_hat;  // in the span I
  Vec<Rational> nu;      // minimal-norm solution of sigma nu = mu_hat
  Vec<Rational> beta;    // mu - mu_hat, in the barrier cone
};

/// I is the column span of sigma (d x k). Decides I n (mu - B) != 0.
DriftResult check_drift_condition(const Matrix<Rational>& sigma, const Vec<Rational>& mu, const Cone& barrier);

struct CompactnessResult {
  Verdict compact = Verdict::unknown;
  Verdict bounded = Verdict::unknown;
  Verdict closed = Verdict::unknown;
  double x = 0.0;
  std::optional<PortfolioProcess<Rational>> recession_direction;
};

CompactnessResult check_convex_compactness(const MarketModel& market, double x);

}  // namespace condual
