#include "doctest.h"

#include <Eigen/Dense>
#include <random>

#include "condual/convex_geometry.hpp"
#include "condual/sample_markets.hpp"

using namespace condual;

namespace {

Matrix<Rational> random_int_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  std::uniform_int_distribution<int> dist(-3, 3);
  Matrix<Rational> m(rows, Vec<Rational>(cols));
  for (auto& r : m)
    for (auto& v : r) v = dist(rng);
  return m;
}

Eigen::MatrixXd to_eigen(const Matrix<Rational>& m, std::size_t cols) {
  Eigen::MatrixXd e(static_cast<Eigen::Index>(m.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < cols; ++j) e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = to_double(m[i][j]);
  return e;
}

/// Projection onto the row span via the left singular vectors of M^T.
Eigen::MatrixXd svd_projection(const Eigen::MatrixXd& rows) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(rows.transpose(), Eigen::ComputeFullU);
  const auto& s = svd.singularValues();
  Eigen::Index r = 0;
  while (r < s.size() && s(r) > 1e-10 * std::max(1.0, s(0))) ++r;
  const Eigen::MatrixXd u = svd.matrixU().leftCols(r);
  return u * u.transpose();
}

}  // namespace

TEST_CASE("predictable range projection matches the SVD oracle") {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 60; ++k) {
    const std::size_t d = 1 + rng() % 4;
    const std::size_t rows = 1 + rng() % 4;
    Matrix<Rational> inc = random_int_matrix(rng, rows, d);
    if (rows > 1 && k % 3 == 0) inc.back() = inc.front();
    const Eigen::MatrixXd oracle = svd_projection(to_eigen(inc, d));
    const auto exact = predictable_range_projection(inc, d);
    Matrix<double> incd;
    for (const auto& r : inc) incd.push_back(to_double_vec(r));
    const auto approx = predictable_range_projection(incd, d);
    CHECK(exact.rank() == static_cast<std::size_t>(Eigen::FullPivLU<Eigen::MatrixXd>(to_eigen(inc, d)).rank()));
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        const double o = oracle(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        CHECK(std::abs(to_double(exact.entries[i][j]) - o) <= 1e-10);
        CHECK(std::abs(approx.entries[i][j] - o) <= 1e-10);
      }
  }
}

TEST_CASE("minimal-norm solution matches the pseudo-inverse") {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 60; ++k) {
    const std::size_t rows = 1 + rng() % 4;
    const std::size_t cols = 1 + rng() % 4;
    Matrix<Rational> m = random_int_matrix(rng, rows, cols);
    if (rows > 1 && k % 2 == 0) m.back() = m.front();
    Vec<Rational> x0(cols);
    for (auto& v : x0) v = Rational(static_cast<int>(rng() % 7) - 3, 2);
    const Vec<Rational> target = mat_vec(m, x0);
    const Vec<Rational> x = min_norm_solution(m, cols, target);
    const Eigen::MatrixXd me = to_eigen(m, cols);
    Eigen::VectorXd te(static_cast<Eigen::Index>(rows));
    for (std::size_t i = 0; i < rows; ++i) te(static_cast<Eigen::Index>(i)) = to_double(target[i]);
    const Eigen::VectorXd oracle = me.completeOrthogonalDecomposition().pseudoInverse() * te;
    for (std::size_t j = 0; j < cols; ++j) CHECK(std::abs(to_double(x[j]) - oracle(static_cast<Eigen::Index>(j))) <= 1e-9);
    CHECK(mat_vec(m, x) == target);
  }
}

TEST_CASE("support functions of the basic sets") {
  const ConvexSet box = samples::interval(Rational(-1), Rational(2));
  CHECK(support_function(box, Vec<Rational>{Rational(3)}) == Extended<Rational>(Rational(6)));
  CHECK(support_function(box, Vec<Rational>{Rational(-1)}) == Extended<Rational>(Rational(1)));
  CHECK(support_function(samples::half_line(Rational(1)), Vec<Rational>{Rational(-1)}).is_pos_inf());
  CHECK(support_function(samples::half_line(Rational(1)), Vec<Rational>{Rational(2)}) == Extended<Rational>(Rational(2)));
  CHECK(support_function(ConvexSet::whole_space(2), Vec<Rational>{Rational(0), Rational(0)}) ==
        Extended<Rational>(Rational(0)));

  const ConvexSet ball = ConvexSet::ball({Rational(1), Rational(0)}, Rational(2));
  const auto s = support_function(ball, Vec<double>{3.0, 4.0});
  REQUIRE(s.is_finite());
  CHECK(s.value() == doctest::Approx(3.0 + 2.0 * 5.0).epsilon(1e-12));

  // Triangle {h >= 0, h1 + h2 <= 1}.
  const ConvexSet tri = ConvexSet::polyhedron({{Rational(-1), Rational(0)}, {Rational(0), Rational(-1)}, {Rational(1), Rational(1)}},
                                              {Rational(0), Rational(0), Rational(1)}, 2);
  CHECK(support_function(tri, Vec<Rational>{Rational(2), Rational(1)}) == Extended<Rational>(Rational(2)));
  const auto arg = support_argmax(tri, Vec<Rational>{Rational(2), Rational(1)});
  REQUIRE(arg.has_value());
  CHECK(*arg == Vec<Rational>{Rational(1), Rational(0)});
}

TEST_CASE("membership, projection and witnesses") {
  const ConvexSet box = ConvexSet::box({Rational(0), std::nullopt}, {Rational(1), Rational(2)});
  CHECK(contains(box, Vec<Rational>{Rational(1, 2), Rational(-100)}));
  CHECK_FALSE(contains(box, Vec<Rational>{Rational(3, 2), Rational(0)}));
  const Vec<double> p = project(box, {2.0, 5.0});
  CHECK(p[0] == doctest::Approx(1.0));
  CHECK(p[1] == doctest::Approx(2.0));
  CHECK(contains(box, interior_witness(box)));

  const ConvexSet ball = ConvexSet::ball({Rational(0), Rational(0)}, Rational(1));
  const Vec<double> q = project(ball, {3.0, 4.0});
  CHECK(q[0] == doctest::Approx(0.6));
  CHECK(q[1] == doctest::Approx(0.8));

  const ConvexSet fixed = ConvexSet::affine_fixed({std::nullopt, Rational(1)});
  CHECK(contains(fixed, Vec<Rational>{Rational(7), Rational(1)}));
  CHECK_FALSE(contains(fixed, Vec<Rational>{Rational(7), Rational(0)}));

  const ConvexSet prod = ConvexSet::product({samples::interval(Rational(0), Rational(1)), ConvexSet::singleton({Rational(2)})});
  CHECK(prod.dim() == 2);
  CHECK(contains(prod, Vec<Rational>{Rational(1), Rational(2)}));
  CHECK(is_bounded(prod));
  CHECK_FALSE(is_bounded(samples::half_line(Rational(0))));
}

TEST_CASE("emptiness and polyhedral conversion") {
  CHECK(is_empty(samples::interval(Rational(1), Rational(0))));
  CHECK_FALSE(is_empty(samples::interval(Rational(0), Rational(0))));
  const ConvexSet disjoint = ConvexSet::intersection({samples::interval(Rational(0), Rational(1)),
                                                      samples::interval(Rational(2), Rational(3))});
  CHECK(is_empty(disjoint));
  CHECK(is_polyhedral(disjoint));
  const ConvexSet ball = ConvexSet::ball({Rational(0)}, Rational(1));
  CHECK_FALSE(is_polyhedral(ball));
  CHECK_THROWS_AS(to_polyhedron(ball), UnsupportedError);
  const Polyhedron p = to_polyhedron(ConvexSet::singleton({Rational(3)}));
  CHECK(p.a.size() == 2);  // equality as two rows
}

TEST_CASE("recession and polar cones") {
  CHECK(cone_equal(recession_cone(samples::interval(Rational(-1), Rational(1))), Cone::zero(1)));
  const Cone half = recession_cone(samples::half_line(Rational(5)));
  CHECK(cone_contains(half, {Rational(-1)}));
  CHECK_FALSE(cone_contains(half, {Rational(1)}));
  CHECK(cone_equal(polar_cone(Cone::zero(3)), Cone::whole(3)));

  // Polar of the nonnegative orthant is the nonpositive orthant.
  Cone orthant{Cone::Form::inequality, {{Rational(-1), Rational(0)}, {Rational(0), Rational(-1)}}, 2};
  const Cone polar = polar_cone(orthant);
  CHECK(cone_contains(polar, {Rational(-1), Rational(-2)}));
  CHECK_FALSE(cone_contains(polar, {Rational(1), Rational(-2)}));
  CHECK(cone_equal(polar_cone(polar), orthant));

  // A half-plane has a lineality line; its generators list it twice.
  Cone halfplane{Cone::Form::inequality, {{Rational(1), Rational(0)}}, 2};
  const auto gens = cone_generators(halfplane);
  CHECK(gens.size() == 3);
  Cone regen{Cone::Form::generators, gens, 2};
  CHECK(cone_equal(regen, halfplane));
  CHECK(canonical_inequalities(regen) == canonical_inequalities(halfplane));
}

TEST_CASE("closedness of projected sets") {
  // The projection onto the first axis of a polyhedron is closed.
  const auto proj = predictable_range_projection(Matrix<double>{{1.0, 0.0}}, 2);
  const ConvexSet tri = ConvexSet::polyhedron({{Rational(-1), Rational(0)}, {Rational(0), Rational(-1)}, {Rational(1), Rational(1)}},
                                              {Rational(0), Rational(0), Rational(1)}, 2);
  CHECK(projected_set_closed(proj, tri).closed == Verdict::yes);
  CHECK(projected_set_closed(proj, ConvexSet::ball({Rational(0), Rational(0)}, Rational(1))).closed == Verdict::yes);
}
