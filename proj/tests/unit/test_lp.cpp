#include "gfrbess/errors.hpp"
#include "gfrbess/lp.hpp"
#include "test_support.hpp"

#include <doctest.h>

using namespace gfrbess;
using gfrbess::testing::for_random;
using gfrbess::testing::uniform;

TEST_CASE("textbook maximisation") {
  // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18  ->  (2, 6), 36
  lp::Problem p = lp::Problem::with_columns(2);
  p.cost << -3, -5;
  p.lower.setZero();
  p.add_row(Eigen::RowVector2d(1, 0), lp::RowSense::LessEqual, 4);
  p.add_row(Eigen::RowVector2d(0, 2), lp::RowSense::LessEqual, 12);
  p.add_row(Eigen::RowVector2d(3, 2), lp::RowSense::LessEqual, 18);
  const auto s = lp::solve(p);
  REQUIRE(s.status == lp::Status::Optimal);
  CHECK(s.x(0) == doctest::Approx(2.0));
  CHECK(s.x(1) == doctest::Approx(6.0));
  CHECK(s.objective == doctest::Approx(-36.0));
}

TEST_CASE("equality rows, free columns and bounds") {
  // min x - y, x + y = 1, -2 <= x <= 3, y free -> x = -2, y = 3
  lp::Problem p = lp::Problem::with_columns(2);
  p.cost << 1, -1;
  p.lower(0) = -2;
  p.upper(0) = 3;
  p.add_row(Eigen::RowVector2d(1, 1), lp::RowSense::Equal, 1);
  p.add_row(Eigen::RowVector2d(0, 1), lp::RowSense::LessEqual, 3);
  const auto s = lp::solve(p);
  REQUIRE(s.status == lp::Status::Optimal);
  CHECK(s.x(0) == doctest::Approx(-2.0));
  CHECK(s.x(1) == doctest::Approx(3.0));
}

TEST_CASE("infeasible and unbounded problems are reported") {
  lp::Problem inf = lp::Problem::with_columns(1);
  inf.add_row(Eigen::RowVectorXd::Constant(1, 1.0), lp::RowSense::GreaterEqual, 2);
  inf.add_row(Eigen::RowVectorXd::Constant(1, 1.0), lp::RowSense::LessEqual, 1);
  CHECK(lp::solve(inf).status == lp::Status::Infeasible);

  lp::Problem unb = lp::Problem::with_columns(2);
  unb.cost << -1, 0;
  unb.lower.setZero();
  unb.add_row(Eigen::RowVector2d(1, -1), lp::RowSense::LessEqual, 1);
  CHECK(lp::solve(unb).status == lp::Status::Unbounded);
}

TEST_CASE("validate rejects malformed problems") {
  lp::Problem p = lp::Problem::with_columns(2);
  p.lower(1) = 1;
  p.upper(1) = 0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  lp::Problem q = lp::Problem::with_columns(2);
  CHECK_THROWS_AS(q.add_row(Eigen::RowVector3d(1, 2, 3), lp::RowSense::Equal, 0), InvalidArgument);
}

TEST_CASE("property: simplex matches vertex enumeration on random 2-D boxes") {
  // Oracle: the optimum of a bounded 2-D LP lies on a vertex; enumerate all
  // pairwise intersections of constraint lines and keep the feasible best.
  for_random(200, 21, [](auto& rng) {
    lp::Problem p = lp::Problem::with_columns(2);
    p.cost << uniform(rng, -1, 1), uniform(rng, -1, 1);
    p.lower << -5, -5;
    p.upper << 5, 5;
    std::vector<Eigen::Vector3d> lines;  // a x + b y <= c
    for (int r = 0; r < 4; ++r) {
      const Eigen::Vector2d a(uniform(rng, -1, 1), uniform(rng, -1, 1));
      const double c = uniform(rng, 0.5, 4);  // origin stays feasible
      p.add_row(a.transpose(), lp::RowSense::LessEqual, c);
      lines.emplace_back(a(0), a(1), c);
    }
    for (double s : {1.0, -1.0}) {
      lines.emplace_back(s, 0, 5);
      lines.emplace_back(0, s, 5);
    }
    double best = 1e300;
    for (std::size_t i = 0; i < lines.size(); ++i)
      for (std::size_t j = i + 1; j < lines.size(); ++j) {
        Eigen::Matrix2d m;
        m << lines[i](0), lines[i](1), lines[j](0), lines[j](1);
        if (std::abs(m.determinant()) < 1e-12) continue;
        const Eigen::Vector2d x = m.inverse() * (Eigen::Vector2d(lines[i](2), lines[j](2)));
        bool ok = true;
        for (const auto& l : lines) ok = ok && l(0) * x(0) + l(1) * x(1) <= l(2) + 1e-9;
        if (ok) best = std::min(best, p.cost.dot(x));
      }
    const auto s = lp::solve(p);
    REQUIRE(s.status == lp::Status::Optimal);
    CHECK(s.objective == doctest::Approx(best).epsilon(1e-7));
  });
}
