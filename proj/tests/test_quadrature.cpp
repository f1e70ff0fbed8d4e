#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fractrace/quadrature.hpp"

using namespace fractrace;
using std::numbers::pi;

namespace {

double factorial(int n) { return std::tgamma(n + 1.0); }

}  // namespace

TEST_CASE("Gauss-Jacobi against Beta-function moments") {
  for (double beta : {-0.7, -0.2, 0.0, 0.3, 1.4}) {
    const Rule1D& r = gauss_jacobi(6, 0.0, beta);
    // int_{-1}^{1} (1+x)^beta x^2 dx with y = 1 + x.
    const double exact = std::pow(2.0, beta + 3) / (beta + 3) -
                         2.0 * std::pow(2.0, beta + 2) / (beta + 2) +
                         std::pow(2.0, beta + 1) / (beta + 1);
    CHECK(r.apply([](double x) { return x * x; }) == doctest::Approx(exact).epsilon(1e-13));
    for (double w : r.w) CHECK(w > 0.0);
  }
  const Rule1D& g = gauss_legendre(10);
  CHECK(g.apply([](double x) { return std::pow(x, 18); }) ==
        doctest::Approx(2.0 / 19.0).epsilon(1e-14));
}

TEST_CASE("adaptive Gauss-Kronrod") {
  Tolerance tol;
  tol.rel = 1e-10;
  const auto e = adaptive_integrate([](double x) { return std::sqrt(x); }, 0.0, 1.0, tol);
  CHECK(e.value == doctest::Approx(2.0 / 3.0).epsilon(1e-10));
  CHECK(e.error < 1e-9);
  CHECK(std::abs(e.value - 2.0 / 3.0) <= e.error + 1e-15);
  Tolerance bad;
  bad.rel = 0.5;
  CHECK_THROWS(adaptive_integrate([](double) { return 1.0; }, 0.0, 1.0, bad));
}

TEST_CASE("graded and tail rules") {
  const double s = 0.9;
  const Rule1D g = graded_rule(1.0, -s, 8, grading_depth(1e-10));
  const double exact = 1.0 / (1.0 - s) + 1.0 / (2.0 - s);
  CHECK(g.apply([&](double t) { return std::pow(t, -s) * (1.0 + t); }) ==
        doctest::Approx(exact).epsilon(1e-12));
  const Rule1D t = tail_rule(2.0, 2.0, 8, 20);
  CHECK(t.apply([](double x) { return std::pow(x, -3.0); }) == doctest::Approx(0.125).epsilon(1e-13));
  const Rule1D t2 = tail_rule(1.0, 0.6, 8, 30);
  // int_1^inf x^{-1.6} (1 + 1/x) dx = 1/0.6 + 1/1.6
  CHECK(t2.apply([](double x) { return std::pow(x, -1.6) * (1.0 + 1.0 / x); }) ==
        doctest::Approx(1.0 / 0.6 + 1.0 / 1.6).epsilon(1e-12));
}

TEST_CASE("triangle rules integrate monomials exactly") {
  for (int n : {1, 2, 3, 5}) {
    const TriangleRule& r = triangle_gauss(n);
    double total = 0.0;
    for (double w : r.w) {
      CHECK(w > 0.0);
      total += w;
    }
    CHECK(total == doctest::Approx(0.5).epsilon(1e-14));
    for (int a = 0; a <= 2 * n - 1; ++a) {
      for (int b = 0; a + b <= 2 * n - 1; ++b) {
        double acc = 0.0;
        for (int q = 0; q < r.size(); ++q) acc += r.w[q] * std::pow(r.uv[q][0], a) * std::pow(r.uv[q][1], b);
        CHECK(acc == doctest::Approx(factorial(a) * factorial(b) / factorial(a + b + 2)).epsilon(1e-13));
      }
    }
  }
  const TriangleRule& m = triangle_midpoint();
  double uv = 0.0;
  for (int q = 0; q < 3; ++q) uv += m.w[q] * m.uv[q][0] * m.uv[q][1];
  CHECK(uv == doctest::Approx(1.0 / 24.0).epsilon(1e-15));
}

TEST_CASE("clipping") {
  const Tri t{Point(0, 0), Point(1, 0), Point(0, 1)};
  const Point sq[3] = {Point(0.5, -1), Point(0.5, 2), Point(-1, 0.5)};
  Point out[9];
  const int n = clip_to_triangle(sq, 3, t, out);
  CHECK(n >= 3);
  double area = 0.0;
  for (int k = 0; k < n; ++k) area += 0.5 * detail::cross(out[k], out[(k + 1) % n]);
  // Region of the unit triangle left of x=0.5 ... computed from the polygon itself:
  // every clipped vertex lies inside the triangle.
  for (int k = 0; k < n; ++k) {
    CHECK(out[k].x() >= -1e-15);
    CHECK(out[k].y() >= -1e-15);
    CHECK(out[k].x() + out[k].y() <= 1.0 + 1e-15);
  }
  CHECK(area > 0.0);
  CHECK(area <= 0.5);
  const Point far[3] = {Point(5, 5), Point(6, 5), Point(5, 6)};
  CHECK(clip_to_triangle(far, 3, t, out) == 0);
}

namespace {

double polar_integral(const Tri& a, const Tri& b, double beta, const std::function<double(Point, Point)>& F,
                      PolarPairOptions opt = {}) {
  double acc = 0.0;
  polar_pair_rule(a, b, beta, opt, [&](const Point& x, const Point& z, double w) {
    acc += w * F(x, Point(x + z));
  });
  return acc;
}

double tensor_integral(const Tri& a, const Tri& b, const std::function<double(Point, Point)>& F, int n) {
  double acc = 0.0;
  tensor_pair_rule(a, b, n, 0.0, 0, [&](const Point& x, const Point& z, double w) {
    acc += w * F(x, Point(x + z));
  });
  return acc;
}

}  // namespace

TEST_CASE("polar pair rule reproduces polynomial pair integrals") {
  const Tri T{Point(0, 0), Point(1, 0), Point(0.2, 0.9)};
  const Tri E{Point(1, 0), Point(0.2, 0.9), Point(1.3, 1.1)};    // shares an edge
  const Tri V{Point(1, 0), Point(2.1, 0.2), Point(1.6, -0.8)};   // shares a vertex
  const Tri D{Point(2, 2), Point(3, 2.2), Point(2.4, 3)};         // disjoint
  auto poly = [](Point x, Point y) { return 1.0 + (x - y).squaredNorm() + x.x() * y.y(); };
  PolarPairOptions opt;
  opt.inner_points = 2;
  for (const Tri* other : {&T, &E, &V, &D}) {
    const double ref = tensor_integral(T, *other, poly, 4);
    CHECK(polar_integral(T, *other, 0.0, poly, opt) == doctest::Approx(ref).epsilon(1e-7));
  }
  // Constant integrand gives the product of areas.
  auto one = [](Point, Point) { return 1.0; };
  CHECK(polar_integral(T, E, 0.0, one) == doctest::Approx(tri_area(T) * tri_area(E)).epsilon(1e-9));
}

TEST_CASE("polar pair rule on a vertex fan with rounded coordinates") {
  // Neighbours of a hexagonal fan around the origin, coordinates from cos/sin.
  const double h = 0.2;
  auto at = [h](int k) { return Point(h * std::cos(k * pi / 3.0), h * std::sin(k * pi / 3.0)); };
  const Point o(0, 0);
  const Tri T{o, at(0), at(1)};
  auto one = [](Point, Point) { return 1.0; };
  auto lin = [](Point x, Point y) { return (x - y).squaredNorm(); };
  for (int k = 1; k < 6; ++k) {
    const Tri U{o, at(k), at(k + 1)};
    const double area = tri_area(T) * tri_area(U);
    CHECK(polar_integral(T, U, 0.0, one) == doctest::Approx(area).epsilon(1e-12));
    PolarPairOptions opt;
    opt.inner_points = 2;
    CHECK(polar_integral(T, U, 0.0, lin, opt) == doctest::Approx(tensor_integral(T, U, lin, 4)).epsilon(1e-10));
  }
}

TEST_CASE("polar pair rule converges for singular integrands") {
  const Tri T{Point(0, 0), Point(1, 0), Point(0.2, 0.9)};
  const Tri E{Point(1, 0), Point(0.2, 0.9), Point(1.3, 1.1)};
  const Tri V{Point(1, 0), Point(2.1, 0.2), Point(1.6, -0.8)};
  for (double s : {0.3, 0.7, 0.95}) {
    auto F = [s](Point x, Point y) { return std::pow((x - y).norm(), -2.0 * s) * (1.0 + x.x()); };
    PolarPairOptions lo, hi;
    lo.inner_points = 2;
    hi.inner_points = 3;
    hi.angular_order = 12;
    hi.radial_order = 10;
    hi.first_panel_order = 8;
    for (const Tri* other : {&T, &E, &V}) {
      const double a = polar_integral(T, *other, -2.0 * s, F, lo);
      const double b = polar_integral(T, *other, -2.0 * s, F, hi);
      CHECK(a == doctest::Approx(b).epsilon(1e-6));
    }
  }
}

TEST_CASE("pair integral scales by the power law") {
  const Tri A{Point(0, 0), Point(1, 0), Point(0, 1)};
  const Tri B{Point(2, 0), Point(3, 0), Point(2, 1)};
  const double s = 0.4;
  auto F = [s](Point x, Point y) { return std::pow((x - y).norm(), -2.0 - 2.0 * s); };
  auto scaled = [](const Tri& t) { return Tri{2.0 * t[0], 2.0 * t[1], 2.0 * t[2]}; };
  double a = 0.0, b = 0.0;
  tensor_pair_rule(A, B, 6, 2.0, 6, [&](const Point& x, const Point& z, double w) { a += w * F(x, x + z); });
  tensor_pair_rule(scaled(A), scaled(B), 6, 2.0, 6,
                   [&](const Point& x, const Point& z, double w) { b += w * F(x, x + z); });
  CHECK(b / a == doctest::Approx(std::pow(2.0, 2.0 - 2.0 * s)).epsilon(1e-12));
}

TEST_CASE("exterior integrals") {
  const Domain unit = Domain::disk();
  Tolerance tol;
  tol.rel = 1e-9;
  // tau mass at s = 1/2 is 2 pi.
  const double s = 0.5;
  auto tau = [&](Point x) {
    const double d = unit.distance(x);
    return (1.0 - s) * std::pow(d, -s) * std::pow(1.0 + d, -2.0 - s);
  };
  ExteriorIntegral mapped{1.0 - s, 2.0 * s, -s, 8.0, TailMode::kMapped};
  const auto m = integrate_exterior(tau, unit, mapped, tol);
  CHECK(m.value == doctest::Approx(2.0 * pi).epsilon(1e-9));

  ExteriorIntegral cert{1.0 - s, 2.0 * s, -s, 8.0, TailMode::kCertifiedBound};
  const auto c = integrate_exterior(tau, unit, cert, tol);
  CHECK(std::abs(c.value - 2.0 * pi) <= c.error);

  // int_{|x|>2} |x|^{-4} dx = pi / 4.
  const Domain two = Domain::disk({0, 0}, 2.0);
  auto f = [](Point x) { return std::pow(x.squaredNorm(), -2.0); };
  const auto q = integrate_exterior(f, two, {1.0, 2.0, 0.0, 8.0, TailMode::kCertifiedBound}, tol);
  CHECK(std::abs(q.value - pi / 4.0) <= q.error);
  CHECK(q.value < pi / 4.0);
  const auto qm = integrate_exterior(f, two, {1.0, 2.0, 0.0, 8.0, TailMode::kMapped}, tol);
  CHECK(qm.value == doctest::Approx(pi / 4.0).epsilon(1e-10));

  CHECK(integrate_exterior([](Point) { return 0.0; }, unit, cert, tol).value == 0.0);
  // An integrand that decays too slowly trips the envelope check.
  CHECK_THROWS_AS(integrate_exterior([](Point) { return 1.0; }, unit, cert, tol), QuadratureError);
}

TEST_CASE("graded collar quadrature resolves the boundary weight") {
  const Domain unit = Domain::disk();
  for (double s : {0.5, 0.9, 0.99}) {
    const auto nodes = graded_boundary_quadrature(unit, s, 1.0, 16);
    double mu_dx = 0.0;
    for (const auto& n : nodes) mu_dx += n.w * (1.0 - s) * std::pow(n.t, -s);
    CHECK(mu_dx == doctest::Approx(2.0 * pi * (1.0 + (1.0 - s) / (2.0 - s))).epsilon(1e-10));
  }
  CHECK(2.0 * pi * (1.0 + 0.1 / 1.1) == doctest::Approx(6.8544).epsilon(1e-4));
}

TEST_CASE("periodic double integral gives the circle H^1/2 seminorm") {
  auto F = [](double a, double b) {
    const double num = std::pow(std::cos(a) - std::cos(b), 2);
    return num / (2.0 - 2.0 * std::cos(a - b));
  };
  const auto e = periodic_double_integral(F, 64);
  CHECK(e.value == doctest::Approx(2.0 * pi * pi).epsilon(1e-12));
  CHECK(e.error < 1e-10);
}
