#pragma once

#include <string>
#include <vector>

#include "condual/market.hpp"
#include "condual/portfolio_lp.hpp"
#include "condual/utility.hpp"

namespace condual {

enum class PrimalStatus { optimal, unbounded, infeasible, max_iterations };

std::string to_string(PrimalStatus s);

struct PrimalSolution {
  PrimalStatus status = PrimalStatus::infeasible;
  ExtReal value = ExtReal::neg_inf();
  PortfolioProcess<double> holdings;
  Vec<double> terminal;  // per leaf position
  int iterations = 0;
  /// Norm of the projected-gradient step at the returned point.
  double stationarity = 0.0;
  std::string method;
  std::vector<double> trace;  // objective per iteration (first 1000)
};

struct PrimalOptions {
  int max_iterations = 200000;
  /// Leaf wealth kept at or above this value when U(0) is singular.
  double domain_margin = 1e-12;
};

/// sup over admissible H of E[U(x + (H.S)_T)].
PrimalSolution solve_primal(const MarketModel& market, const UtilityFunction& u, double x, double tol = 1e-8,
                            const PrimalOptions& options = {});

struct PrimalGridPoint {
  double x;
  ExtReal value;
  PrimalStatus status;
};

std::vector<PrimalGridPoint> primal_value_grid(const MarketModel& market, const UtilityFunction& u,
                                               const std::vector<double>& xs, double tol = 1e-8);

/// Exhaustive grid over the flat holding vector, followed by zoom rounds
/// that re-grid around the incumbent with a step ten times finer.
struct BruteForceGrid {
  double lower = -2.0;
  double upper = 2.0;
  double step = 1e-2;
  int zoom_rounds = 0;
  /// Points per coordinate in each zoom round (odd; centered on the incumbent).
  int zoom_points = 21;
  /// Extra leaf payoff added to terminal wealth (empty means none).
  Vec<double> endowment;
  static constexpr double kMaxEvaluations = 1e7;
};

struct BruteForceResult {
  ExtReal value = ExtReal::neg_inf();
  Vec<double> holdings;  // flat
  double evaluations = 0;
};

/// Throws std::length_error when a pass would exceed the evaluation cap.
BruteForceResult brute_force_primal(const MarketModel& market, const UtilityFunction& u, double x,
                                    const BruteForceGrid& grid);

}  // namespace condual
