#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <map>

#include "fractrace/geometry.hpp"

using namespace fractrace;
using std::numbers::pi;

TEST_CASE("disk distance and projection") {
  const Domain d = Domain::disk();
  CHECK(d.distance({2.0, 0.0}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(d.distance({0.0, 0.0}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(d.distance({1.0, 0.0}) == 0.0);

  CHECK((d.nearest_boundary_point({2.0, 0.0}) - Point(1.0, 0.0)).norm() < 1e-15);
  CHECK((d.nearest_boundary_point({0.0, 0.5}) - Point(0.0, 1.0)).norm() < 1e-15);
  CHECK((d.nearest_boundary_point({0.0, 0.0}) - Point(1.0, 0.0)).norm() == 0.0);
}

TEST_CASE("distance is 1-Lipschitz and projection reconstructs exterior points") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const Domain disk = Domain::disk({0.3, -0.2}, 1.5);
  const Domain star = Domain::star_shaped({0.0, 0.0}, 1.0, {{3, 0.05, 0.0}, {2, 0.0, 0.03}});
  for (const Domain* d : {&disk, &star}) {
    for (int k = 0; k < 300; ++k) {
      const Point x(u(rng), u(rng)), y(u(rng), u(rng));
      CHECK(std::abs(d->distance(x) - d->distance(y)) <= (x - y).norm() + 1e-12);
      const Point p = d->nearest_boundary_point(x);
      CHECK(std::abs((x - p).norm() - d->distance(x)) < 1e-12);
      CHECK(std::abs(d->radial_offset(p)) < 1e-12);
      if (!d->contains(x) && d->distance(x) > 1e-6) {
        const Point back = p + d->distance(x) * d->outer_normal(p);
        CHECK((back - x).norm() < 1e-10);
      }
    }
  }
}

TEST_CASE("star-shaped projection beats dense sampling") {
  const Domain star = Domain::star_shaped({0.0, 0.0}, 1.0, {{3, 0.08, 0.0}});
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.5, 2.5);
  for (int k = 0; k < 50; ++k) {
    const Point x(u(rng), u(rng));
    double brute = 1e300;
    for (int i = 0; i < 20000; ++i) {
      brute = std::min(brute, (x - star.boundary_point(2.0 * pi * i / 20000)).norm());
    }
    CHECK(star.distance(x) <= brute + 1e-12);
    CHECK(star.distance(x) >= brute - 1e-6);
  }
}

TEST_CASE("boundary quadrature") {
  const auto q = boundary_quadrature(Domain::disk(), 64);
  CHECK(std::abs(q.total_weight() - 2.0 * pi) < 1e-12);
  double cos2 = 0.0;
  for (const auto& n : q.nodes) cos2 += n.weight * std::pow(n.point.x(), 2);
  CHECK(std::abs(cos2 - pi) < 1e-12);
  CHECK(std::abs(boundary_quadrature(Domain::disk({0, 0}, 2.0), 64).total_weight() - 4.0 * pi) <
        1e-10);
  for (const auto& n : q.nodes) {
    CHECK(n.weight > 0.0);
    CHECK(std::abs(n.point.norm() - 1.0) < 1e-12);
  }
  CHECK_THROWS(boundary_quadrature(Domain::disk(), 4));
}

TEST_CASE("mesh areas and refinement order") {
  const Domain d = Domain::disk();
  const Mesh m = build_mesh(d, 3.0, 0.2);
  const double h = 0.2;
  CHECK(std::abs(m.region_area(Region::kInterior) - pi) < 2.0 * h * h);
  CHECK(std::abs(m.region_area(Region::kExteriorCollar) - 8.0 * pi) < 10.0 * h * h);
  CHECK_THROWS_AS(build_mesh(d, 1.0, 0.2), std::invalid_argument);

  const double e1 = pi - build_mesh(d, 3.0, 0.2).region_area(Region::kInterior);
  const double e2 = pi - build_mesh(d, 3.0, 0.1).region_area(Region::kInterior);
  const double e3 = pi - build_mesh(d, 3.0, 0.05).region_area(Region::kInterior);
  CHECK(std::log2(e1 / e2) > 1.8);
  CHECK(std::log2(e2 / e3) > 1.8);
}

TEST_CASE("mesh is conforming and boundary vertices lie on the boundary") {
  const Domain d = Domain::star_shaped({0.0, 0.0}, 1.0, {{3, 0.05, 0.0}});
  const Mesh m = build_mesh(d, 3.0, 0.15);
  // Every interior edge is shared by exactly two triangles; boundary edges by one.
  std::map<std::pair<int, int>, int> edges;
  for (const auto& t : m.triangles) {
    CHECK(m.triangle_area(&t - m.triangles.data()) > 0.0);
    for (int k = 0; k < 3; ++k) {
      int a = t.v[k], b = t.v[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      edges[{a, b}]++;
    }
  }
  int outer = 0;
  for (const auto& [e, n] : edges) {
    CHECK(n <= 2);
    if (n == 1) ++outer;
  }
  CHECK(outer == static_cast<int>(std::count_if(
                     m.boundary_edges.begin(), m.boundary_edges.end(),
                     [](const BoundaryEdge& e) { return e.kind == BoundaryKind::kTruncation; })));
  for (const auto& e : m.boundary_edges) {
    if (e.kind == BoundaryKind::kDomainBoundary) {
      CHECK(std::abs(d.radial_offset(m.vertices[e.a])) < 1e-12);
    } else {
      CHECK(std::abs(m.vertices[e.a].norm() - 3.0) < 1e-12);
    }
  }
  // Interior triangles inside the domain, exterior ones outside (by centroid).
  for (int t = 0; t < static_cast<int>(m.triangles.size()); ++t) {
    CHECK(d.contains(m.centroid(t)) == (m.triangles[t].region == Region::kInterior));
  }
  CHECK(std::abs(m.region_area(Region::kInterior) - d.area()) < 0.02);
}

TEST_CASE("mesh round trip and point location") {
  const Mesh m = build_mesh(Domain::disk(), 2.5, 0.2);
  std::stringstream ss;
  write_mesh(ss, m);
  const Mesh r = read_mesh(ss);
  CHECK(r.vertices.size() == m.vertices.size());
  CHECK(r.triangles.size() == m.triangles.size());
  CHECK(r.boundary_edges.size() == m.boundary_edges.size());
  CHECK(r.truncation_radius == 2.5);
  CHECK(r.vertices[17] == m.vertices[17]);

  PointLocator loc(m);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.7, 1.7);
  for (int k = 0; k < 200; ++k) {
    const Point x(u(rng), u(rng));
    std::array<double, 3> b;
    const int t = loc.locate(x, &b);
    REQUIRE(t >= 0);
    const auto& v = m.triangles[t].v;
    const Point y = b[0] * m.vertices[v[0]] + b[1] * m.vertices[v[1]] + b[2] * m.vertices[v[2]];
    CHECK((x - y).norm() < 1e-12);
  }
  CHECK(loc.locate({5.0, 0.0}) == -1);

  std::stringstream bad("v 0 0\nt 0 1 2 0\n");
  CHECK_THROWS(read_mesh(bad));
}
