#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "pushplan/geom.hpp"
#include "test_util.hpp"

using namespace pushplan;

TEST_CASE("wrap_angle maps into (-pi, pi]", "[geom]") {
  CHECK(wrap_angle(0.0) == 0.0);
  CHECK(wrap_angle(kPi) == Catch::Approx(kPi));
  CHECK(wrap_angle(-kPi) == Catch::Approx(kPi));
  CHECK(wrap_angle(kPi + 0.1) == Catch::Approx(-kPi + 0.1));
  CHECK(wrap_angle(7.0 * kPi) == Catch::Approx(kPi));
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> big(-50.0, 50.0);
  for (int i = 0; i < 200; ++i) {
    const double a = big(rng);
    const double w = wrap_angle(a);
    CHECK(w > -kPi);
    CHECK(w <= kPi);
    CHECK(std::abs(std::remainder(a - w, 2.0 * kPi)) < 1e-9);
  }
}

TEST_CASE("rotations compose and are orthonormal", "[geom]") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ang(-10.0, 10.0);
  for (int i = 0; i < 100; ++i) {
    const double a = ang(rng), b = ang(rng);
    CHECK((rotation2(a) * rotation2(b) - rotation2(a + b)).norm() < 1e-12);
    CHECK((rotation2(a) * rotation2(a).transpose() - Eigen::Matrix2d::Identity()).norm() <
          1e-12);
    CHECK((rotation3(a) * rotation3(b) - rotation3(a + b)).norm() < 1e-12);
  }
}

TEST_CASE("polygon factory normalizes winding and centroid", "[geom]") {
  // Clockwise input is re-wound.
  auto p = ConvexPolygon::make({{0.5, -0.5}, {-0.5, -0.5}, {-0.5, 0.5}, {0.5, 0.5}});
  CHECK(p.area() == Catch::Approx(1.0));
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    auto poly = test_util::random_polygon(rng);
    Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
    double a6 = 0.0;
    const auto& v = poly.vertices();
    for (size_t j = 0; j < v.size(); ++j) {
      const auto& a = v[j];
      const auto& b = v[(j + 1) % v.size()];
      const double w = cross2(a, b);
      CHECK(w > 0.0);  // CCW
      centroid += w * (a + b);
      a6 += 3.0 * w;
    }
    CHECK((centroid / a6).norm() < 1e-9);
  }
  CHECK_THROWS_AS(ConvexPolygon::make({{0, 0}, {1, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(ConvexPolygon::make({{0, 0}, {1, 0}, {2, 0}}), std::invalid_argument);
  // Collinear midpoint breaks strict convexity.
  CHECK_THROWS_AS(ConvexPolygon::make({{0, 0}, {1, 0}, {2, 0.0}, {1, 1}}),
                  std::invalid_argument);
}

TEST_CASE("mean radius matches a grid quadrature on the unit square", "[geom]") {
  auto sq = ConvexPolygon::box(1.0, 1.0);
  const int n = 400;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double x = -0.5 + (i + 0.5) / n;
      const double y = -0.5 + (j + 0.5) / n;
      acc += std::hypot(x, y) / (n * n);
    }
  }
  CHECK(sq.mean_radius() == Catch::Approx(acc).margin(1e-5));
}

TEST_CASE("perimeter point on the documented rectangle", "[geom]") {
  auto rect = ConvexPolygon::box(0.08, 0.15);
  const auto pp = point_on_perimeter(rect, kPi / 2.0);
  CHECK(pp.point.x() == Catch::Approx(0.0).margin(1e-12));
  CHECK(pp.point.y() == Catch::Approx(0.075));
  CHECK(pp.normal.x() == Catch::Approx(0.0).margin(1e-12));
  CHECK(pp.normal.y() == Catch::Approx(-1.0));

  auto sq = ConvexPolygon::box(1.0, 1.0);
  const auto back = point_on_perimeter(sq, kPi);
  CHECK(back.point.x() == Catch::Approx(-0.5));
  CHECK(back.point.y() == Catch::Approx(0.0).margin(1e-12));
  CHECK(back.normal.x() == Catch::Approx(1.0));
  CHECK_THROWS_AS(point_on_perimeter(sq, kPi / 4.0), std::domain_error);
}

TEST_CASE("perimeter point lies on its face with an interior normal", "[geom]") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int done = 0;
  while (done < 300) {
    auto poly = test_util::random_polygon(rng);
    const double psi = wrap_angle(2.0 * kPi * unit(rng));
    PerimeterPoint pp;
    try {
      pp = point_on_perimeter(poly, psi);
    } catch (const std::domain_error&) {
      continue;  // vertex hit
    }
    ++done;
    CHECK(wrap_angle(std::atan2(pp.point.y(), pp.point.x()) - psi) ==
          Catch::Approx(0.0).margin(1e-9));
    const auto& a = poly.vertices()[pp.face];
    const auto& b = poly.vertices()[(pp.face + 1) % poly.vertices().size()];
    const Eigen::Vector2d e = b - a;
    CHECK(std::abs(cross2(e, Eigen::Vector2d(pp.point - a))) / e.norm() < 1e-9);
    CHECK(pp.normal.dot(-pp.point) > 0.0);  // points at the interior
    CHECK(cross2(pp.normal, pp.tangent) == Catch::Approx(1.0));
  }
}

TEST_CASE("near-touching squares are in contact within tolerance", "[geom]") {
  auto sq = ConvexPolygon::box(1.0, 1.0);
  PlacedPolygon a{&sq, {0.0, 0.0, 0.0}};
  PlacedPolygon b{&sq, {1.0005, 0.0, 0.0}};
  const auto q = polygon_collide(a, b, 1e-3);
  CHECK(q.in_contact);
  CHECK(q.depth == 0.0);
  CHECK(q.separation == Catch::Approx(5e-4));
  CHECK(q.normal.x() == Catch::Approx(1.0));
  CHECK(q.normal.y() == Catch::Approx(0.0).margin(1e-12));

  PlacedPolygon far{&sq, {1.1, 0.0, 0.0}};
  CHECK_FALSE(polygon_collide(a, far, 1e-3).in_contact);
}

TEST_CASE("identical overlapping squares report full depth", "[geom]") {
  auto sq = ConvexPolygon::box(1.0, 1.0);
  PlacedPolygon a{&sq, {0.0, 0.0, 0.0}};
  const auto q = polygon_collide(a, a, 1e-3);
  CHECK(q.in_contact);
  CHECK(q.depth == Catch::Approx(1.0));
}

TEST_CASE("partially shared edge yields the overlap midpoint", "[geom]") {
  auto sq = ConvexPolygon::box(1.0, 1.0);
  PlacedPolygon a{&sq, {0.0, 0.0, 0.0}};
  PlacedPolygon b{&sq, {1.0, 0.5, 0.0}};
  const auto q = polygon_collide(a, b, 1e-3);
  CHECK(q.in_contact);
  CHECK(q.point.x() == Catch::Approx(0.5));
  CHECK(q.point.y() == Catch::Approx(0.25));
}

TEST_CASE("axis-aligned rectangle separations match the analytic gap", "[geom]") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double wa = 0.2 + unit(rng), ha = 0.2 + unit(rng);
    const double wb = 0.2 + unit(rng), hb = 0.2 + unit(rng);
    auto ra = ConvexPolygon::box(wa, ha);
    auto rb = ConvexPolygon::box(wb, hb);
    const double dx = 2.0 * (unit(rng) - 0.5), dy = 2.0 * (unit(rng) - 0.5);
    PlacedPolygon a{&ra, {0.0, 0.0, 0.0}};
    PlacedPolygon b{&rb, {dx, dy, 0.0}};
    const double ox = 0.5 * (wa + wb) - std::abs(dx);
    const double oy = 0.5 * (ha + hb) - std::abs(dy);
    const auto q = polygon_collide(a, b, 1e-3);
    const double overlap = std::min(ox, oy);
    CHECK(q.depth == Catch::Approx(std::max(0.0, overlap)).margin(1e-12));
    CHECK(q.separation == Catch::Approx(std::max(0.0, -overlap)).margin(1e-12));
  }
}

TEST_CASE("collision query is symmetric up to normal sign", "[geom]") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    auto pa = test_util::random_polygon(rng);
    auto pb = test_util::random_polygon(rng);
    PlacedPolygon a{&pa, {0.2 * unit(rng), 0.2 * unit(rng), 2.0 * kPi * unit(rng)}};
    PlacedPolygon b{&pb, {0.2 * unit(rng), 0.2 * unit(rng), 2.0 * kPi * unit(rng)}};
    const auto qab = polygon_collide(a, b, 1e-3);
    const auto qba = polygon_collide(b, a, 1e-3);
    CHECK(qab.depth == Catch::Approx(qba.depth).margin(1e-12));
    CHECK(qab.separation == Catch::Approx(qba.separation).margin(1e-12));
    CHECK((qab.normal + qba.normal).norm() < 1e-9);
  }
}
