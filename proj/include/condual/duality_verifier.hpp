#pragma once

#include <optional>
#include <string>
#include <vector>

#include "condual/dual_solver.hpp"
#include "condual/primal_solver.hpp"

namespace condual {

enum class CheckVerdict { pass, fail, abstain };
std::string to_string(CheckVerdict v);

/// One side of the conjugacy check at a grid point `at`: `value` is the
/// function there, `envelope` the grid sup (for v) or inf (for u) of the
/// other side. residual = |value - envelope| is compared with
/// tolerance + grid_bound.
struct ConjugacyPoint {
  double at = 0.0;
  ExtReal value;
  ExtReal envelope;
  double residual = 0.0;
  double grid_bound = 0.0;
  double tolerance = 0.0;
  CheckVerdict verdict = CheckVerdict::fail;
};

struct XbarTriple {
  ExtReal from_support;    // -inf alpha
  ExtReal from_essinf;     // -sup essinf of the gains
  ExtReal from_bisection;  // primal feasibility boundary
  /// Exact -inf alpha when computed in rational arithmetic.
  std::optional<Rational> exact;
  double spread = 0.0;
  double tolerance = 0.0;
  CheckVerdict verdict = CheckVerdict::fail;
};

struct LinkResidual {
  std::string leaf;
  double terminal = 0.0;   // x + (H.S)_T
  double predicted = 0.0;  // -V'(y density)
  double residual = 0.0;
};

struct LinkReport {
  double x = 0.0;
  double y_hat = 0.0;
  std::vector<LinkResidual> leaves;
  double max_residual = 0.0;
  double tolerance = 0.0;
  double solver_tol = 0.0;
  bool dual_attained = false;
  CheckVerdict verdict = CheckVerdict::abstain;
  std::string note;
};

struct DualityReport {
  std::vector<ConjugacyPoint> v_checks;  // v(y) against sup_x u(x) - xy
  std::vector<ConjugacyPoint> u_checks;  // u(x) against inf_y v(y) + xy
  /// Largest u(x) - v(y) - xy over all grid pairs (weak duality: <= 0).
  double worst_weak_violation = 0.0;
  double weak_tolerance = 1e-10;
  double worst_gap = 0.0;
  std::optional<XbarTriple> xbar;
  std::optional<LinkReport> link;
  /// Monotonicity of u and convexity of v on the grids.
  bool shape_ok = true;
  CheckVerdict verdict = CheckVerdict::abstain;
  std::vector<std::string> notes;
};

struct VerifyOptions {
  double solver_tol = 1e-8;
  /// Evaluate grid points on worker threads.
  bool parallel = true;
};

/// Grids are sorted and strictly above xbar.
DualityReport verify_conjugacy(const MarketModel& market, const UtilityFunction& u, const std::vector<double>& x_grid,
                               const std::vector<double>& y_grid, double tol = 1e-5, const VerifyOptions& options = {});

/// argmin over y of v(y) + x y for a smooth strictly concave utility.
double locate_y_hat(const MarketModel& market, const UtilityFunction& u, double x, double solver_tol = 1e-8);

LinkReport verify_primal_dual_link(const MarketModel& market, const UtilityFunction& u, double x, double tol = 1e-5,
                                   double solver_tol = 1e-8);

XbarTriple verify_xbar(const MarketModel& market, double tol = 1e-6);

}  // namespace condual
