#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "condual/linear_algebra.hpp"
#include "condual/linear_program.hpp"
#include "condual/numeric.hpp"

namespace condual {

class ConvexSet;

/// {h : a h <= b}.
struct Polyhedron {
  Matrix<Rational> a;
  Vec<Rational> b;
};

/// Coordinate bounds; a missing bound is infinite.
struct Box {
  std::vector<std::optional<Rational>> lower;
  std::vector<std::optional<Rational>> upper;
};

/// Closed Euclidean ball.
struct Ball {
  Vec<Rational> center;
  Rational radius;
};

/// Free coordinates (nullopt) times fixed values, e.g. R^d x {1}.
struct AffineFixed {
  std::vector<std::optional<Rational>> fixed;
};

struct Singleton {
  Vec<Rational> point;
};

struct Intersection {
  std::vector<ConvexSet> parts;
};

/// Cartesian product; the ambient dimension is the sum of the factors'.
struct Product {
  std::vector<ConvexSet> parts;
};

/// Nonempty closed convex subset of R^d. Emptiness is not enforced here so
/// that market validation can report it; see is_empty().
class ConvexSet {
 public:
  using Variant = std::variant<Polyhedron, Box, Ball, AffineFixed, Singleton, Intersection, Product>;

  static ConvexSet polyhedron(Matrix<Rational> a, Vec<Rational> b, std::size_t dim);
  static ConvexSet box(std::vector<std::optional<Rational>> lower, std::vector<std::optional<Rational>> upper);
  static ConvexSet ball(Vec<Rational> center, Rational radius);
  static ConvexSet affine_fixed(std::vector<std::optional<Rational>> fixed);
  static ConvexSet singleton(Vec<Rational> point);
  static ConvexSet intersection(std::vector<ConvexSet> parts);
  static ConvexSet product(std::vector<ConvexSet> parts);
  static ConvexSet whole_space(std::size_t dim);

  std::size_t dim() const { return dim_; }
  const Variant& data() const { return data_; }
  std::string type_name() const;

 private:
  ConvexSet(Variant v, std::size_t dim) : data_(std::move(v)), dim_(dim) {}
  Variant data_;
  std::size_t dim_;
};

/// Polyhedral cone, either {h : rows h <= 0} or cone(rows).
struct Cone {
  enum class Form { inequality, generators };
  Form form = Form::inequality;
  Matrix<Rational> rows;
  std::size_t dim = 0;

  static Cone zero(std::size_t d);
  static Cone whole(std::size_t d);
};

/// Orthogonal projection onto a subspace, with an orthogonal basis of its
/// range. Exact when T is Rational.
template <class T>
struct ProjectionMatrix {
  Matrix<T> entries;
  Matrix<T> basis;
  std::size_t rank() const { return basis.size(); }
  std::size_t dim() const { return entries.size(); }
  Vec<T> apply(const Vec<T>& v) const { return mat_vec(entries, v); }
};

enum class Verdict { yes, no, unknown };
std::string to_string(Verdict v);

struct ClosednessResult {
  Verdict closed = Verdict::unknown;
  std::string certificate;
};

// --- structural queries -----------------------------------------------------

/// True when no ball occurs anywhere in the set expression.
bool is_polyhedral(const ConvexSet& set);

/// Conservative boundedness: true only when the set is provably bounded.
bool is_bounded(const ConvexSet& set);

/// H-representation of a polyhedral set (equalities become two rows).
/// Throws UnsupportedError when the set contains a ball.
Polyhedron to_polyhedron(const ConvexSet& set);

// --- LP embedding ---------------------------------------------------------

/// A ball constraint met by the cutting-plane loop in solve_lp_with_cuts.
struct BallConstraint {
  std::vector<std::size_t> vars;
  Vec<double> center;
  double radius;
};

/// Appends the rows describing `set` on the LP variables `vars`. Balls are
/// deferred to `balls`; passing nullptr for a set with balls, or using
/// Rational scalars with balls, throws UnsupportedError.
template <class T>
void append_set_rows(LinearProgram<T>& lp, const ConvexSet& set, const std::vector<std::size_t>& vars,
                     std::vector<BallConstraint>* balls);

struct CutLpResult {
  LpResult<double> lp;
  bool converged = true;
  int cuts = 0;
};

/// Solves the LP with ball constraints enforced by Kelley tangent cuts. The
/// reported objective converges from above.
CutLpResult solve_lp_with_cuts(LinearProgram<double> lp, const std::vector<BallConstraint>& balls,
                               double feas_tol = 1e-11, int max_rounds = 2000);

// --- set operations -------------------------------------------------------

template <class T>
bool is_empty_t(const ConvexSet& set);
bool is_empty(const ConvexSet& set);

/// sup_{h in set} h'dir; +inf along unbounded directions, -inf only for an
/// empty set.
template <class T>
Extended<T> support_function(const ConvexSet& set, const Vec<T>& dir);

/// Maximizer of h'dir over the set when the supremum is attained.
std::optional<Vec<Rational>> support_argmax(const ConvexSet& set, const Vec<Rational>& dir);

/// Exact membership (balls are decided in floating point within 1e-10).
bool contains(const ConvexSet& set, const Vec<Rational>& point);
/// Floating-point membership with slack `tol` on every describing inequality.
bool contains(const ConvexSet& set, const Vec<double>& point, double tol = 1e-10);

/// A point of the set: Chebyshev-type center for polyhedra, the center for
/// balls and boxes, the point for singletons, zeros on free coordinates.
Vec<Rational> interior_witness(const ConvexSet& set);

/// Euclidean projection (floating point).
Vec<double> project(const ConvexSet& set, const Vec<double>& z);

/// Recession cone in inequality form. For general intersections this is the
/// intersection of the member recession cones.
Cone recession_cone(const ConvexSet& set);

/// Polar cone; swaps inequality and generator forms of the same rows.
Cone polar_cone(const Cone& cone);

/// Generators of the cone (lineality directions listed as +/- pairs),
/// computed with the double description method in exact arithmetic.
Matrix<Rational> cone_generators(const Cone& cone);

/// Inequality description of the cone.
Matrix<Rational> cone_inequalities(const Cone& cone);

/// Irredundant inequality rows, each scaled to unit max-norm and sorted.
Matrix<Rational> canonical_inequalities(const Cone& cone);

bool cone_contains(const Cone& cone, const Vec<Rational>& v);

/// Mutual inclusion test by generators.
bool cone_equal(const Cone& a, const Cone& b);

template <class T>
ProjectionMatrix<T> predictable_range_projection(const Matrix<T>& increments, std::size_t dim);

ClosednessResult projected_set_closed(const ProjectionMatrix<double>& projection, const ConvexSet& set);

/// Minimal-norm least-squares solution M^+ target (full-rank factorization).
template <class T>
Vec<T> min_norm_solution(const Matrix<T>& m, std::size_t cols, const Vec<T>& target);

}  // namespace condual
