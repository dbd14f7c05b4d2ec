#pragma once

#include <optional>
#include <string>
#include <vector>

#include "condual/market.hpp"
#include "condual/portfolio_lp.hpp"
#include "condual/utility.hpp"

namespace condual {

/// Nonnegative leaf measure of total mass y.
struct DualMeasure {
  Vec<double> weights;
  double mass = 0.0;
  Vec<double> densities;  // weight / P per leaf
  ExtReal alpha = ExtReal::pos_inf();  // support value of weights / mass
};

DualMeasure make_dual_measure(const MarketModel& market, const Vec<double>& probability, double y,
                              const ExtReal& alpha);

/// sup over admissible H of E^Q[(H.S)_T] for a leaf measure Q of mass 1.
template <class T>
Extended<T> support_alpha(const MarketModel& market, const Vec<T>& q);

enum class DualStatus { optimal, infinite, unsupported };
std::string to_string(DualStatus s);

struct DualSolution {
  DualStatus status = DualStatus::optimal;
  ExtReal value = ExtReal::pos_inf();
  Vec<double> q;  // minimizing probability on leaves
  DualMeasure measure;
  bool attained = false;
  /// value minus a certified lower bound.
  double gap = 0.0;
  int newton_steps = 0;
  std::string method;
};

/// v(y) = inf over probabilities Q of E[V(y dQ/dP)] + y alpha(Q).
DualSolution solve_dual(const MarketModel& market, const UtilityFunction& u, double y, double tol = 1e-8);

/// dv/dy at the returned minimizer (envelope formula); smooth families.
double dual_derivative(const MarketModel& market, const UtilityFunction& u, double y, const DualSolution& sol);

template <class T>
struct SuperhedgeResult {
  Extended<T> price;       // primal LP: inf{x : x + (H.S)_T >= f}
  Extended<T> dual_price;  // sup_Q E^Q[f] - alpha(Q)
  Vec<T> holdings;         // flat primal optimizer
  Vec<T> q;                // dual optimizer
  /// |price| <= bound + max|f|; bound is |price of the zero claim|.
  Extended<T> bound;
};

template <class T>
SuperhedgeResult<T> superhedge_price(const MarketModel& market, const Vec<T>& payoff);

template <class T>
struct MinSupportResult {
  Extended<T> inf_alpha;       // inf over probabilities of alpha
  Extended<T> sup_essinf;      // sup over admissible H of min leaf gain
  Extended<T> xbar;            // -inf_alpha
  Vec<T> q;                    // minimizer of alpha when finite
};

template <class T>
MinSupportResult<T> min_support(const MarketModel& market);

}  // namespace condual
