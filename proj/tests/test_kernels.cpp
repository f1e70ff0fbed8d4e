#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fractrace/kernels.hpp"

using namespace fractrace;
using std::numbers::pi;

namespace {

// Reflection-formula form of kappa_{2,s}: 4^s s Gamma(1+s) Gamma(s) sin(pi s) / pi^2.
double kappa2_oracle(double s) {
  return std::pow(4.0, s) * s * std::tgamma(1.0 + s) * std::tgamma(s) * std::sin(pi * s) / (pi * pi);
}

Point random_exterior(std::mt19937_64& rng, double rmin, double rmax) {
  std::uniform_real_distribution<double> r(rmin, rmax), a(0.0, 2.0 * pi);
  const double rr = r(rng), aa = a(rng);
  return {rr * std::cos(aa), rr * std::sin(aa)};
}

}  // namespace

TEST_CASE("kappa closed form") {
  CHECK(std::abs(kappa(2, FracOrder(0.5)) - 1.0 / (2.0 * pi)) < 1e-15);
  // (d + 2s)/2 = 2 for d = 3, s = 1/2, so kappa = 2 (1/2) Gamma(2) / (pi^{3/2} Gamma(1/2)) = 1/pi^2.
  CHECK(kappa(3, FracOrder(0.5)) == doctest::Approx(1.0 / (pi * pi)).epsilon(1e-14));
  for (double s = 0.05; s < 0.96; s += 0.05) {
    CHECK(kappa(2, FracOrder(s)) == doctest::Approx(kappa2_oracle(s)).epsilon(1e-12));
  }
  double lo = 1e300, hi = 0.0;
  for (int k = 1; k <= 99; ++k) {
    const double s = k / 100.0;
    const double v = kappa(2, FracOrder(s)) / (s * (1.0 - s));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo > 0.3);
  CHECK(hi < 1.3);
  CHECK_THROWS(FracOrder(1.0));
  CHECK_THROWS(FracOrder(0.0));
}

TEST_CASE("tau and trace kernel") {
  const Domain d = Domain::disk();
  CHECK(tau(d, FracOrder(0.5), {2.0, 0.0}) == doctest::Approx(0.5 / std::pow(2.0, 2.5)).epsilon(1e-15));
  CHECK(tau(d, FracOrder(0.5), {2.0, 0.0}) == doctest::Approx(0.0883883).epsilon(1e-6));
  CHECK_THROWS_AS(tau(d, FracOrder(0.5), {1.0, 0.0}), std::domain_error);
  CHECK(tau(d, FracOrder(0.999999), {2.0, 0.0}) < 1e-6);

  const double ks = trace_kernel(d, FracOrder(0.5), {2.0, 0.0}, {0.0, 2.0});
  // d_x = d_y = 1: (1-s)^2 / (2^{1/2} 2^{1/2} (2 sqrt2 + 3)^2).
  CHECK(ks == doctest::Approx(0.25 / (2.0 * (17.0 + 12.0 * std::sqrt(2.0)))).epsilon(1e-14));
  CHECK_THROWS_AS(trace_kernel(d, FracOrder(0.5), {1.0, 0.0}, {0.0, 2.0}), std::domain_error);

  std::mt19937_64 rng(5);
  for (int k = 0; k < 1000; ++k) {
    const Point x = random_exterior(rng, 1.01, 6.0), y = random_exterior(rng, 1.01, 6.0);
    CHECK(trace_kernel(d, FracOrder(0.3), x, y) == trace_kernel(d, FracOrder(0.3), y, x));
  }
  // Quadratic vanishing in (1 - s).
  const double a = trace_kernel(d, FracOrder(0.99), {2, 0}, {0, 3});
  const double b = trace_kernel(d, FracOrder(0.995), {2, 0}, {0, 3});
  CHECK(a / b == doctest::Approx(4.0).epsilon(0.02));
}

TEST_CASE("fractional kernel") {
  const FracOrder s(0.5);
  CHECK(fractional_kernel(2, s, {0, 0}, {1, 0}) == doctest::Approx(1.0 / (2.0 * pi)).epsilon(1e-14));
  CHECK(fractional_kernel(2, s, {0, 0}, {0, 2}) == doctest::Approx(1.0 / (16.0 * pi)).epsilon(1e-14));
  CHECK(fractional_kernel(2, s, {0.3, 1}, {2, -1}) == fractional_kernel(2, s, {2, -1}, {0.3, 1}));
  CHECK_THROWS_AS(fractional_kernel(2, s, {1, 1}, {1, 1}), std::domain_error);
}

TEST_CASE("ball Poisson kernel") {
  const Domain unit = Domain::disk();
  Tolerance tol;
  tol.rel = 1e-7;
  for (double s : {0.3, 0.5, 0.8}) {
    for (Point z : {Point(0, 0), Point(0.5, 0)}) {
      auto P = [&](Point x) { return poisson_kernel_ball(1.0, FracOrder(s), z, x); };
      const auto e = integrate_exterior(P, unit, {1.0, 2.0 * s, -s, 8.0, TailMode::kMapped}, tol);
      CHECK(e.value == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
  CHECK_THROWS_AS(poisson_kernel_ball(1.0, FracOrder(0.5), {0, 0}, {1, 0}), std::domain_error);

  // Two-sided comparison with kappa d_z^s d_x^{-s} (1+d_x)^{-s} |x-z|^{-2}.
  std::mt19937_64 rng(9);
  double lo = 1e300, hi = 0.0;
  for (double s : {0.2, 0.5, 0.8, 0.95}) {
    for (int k = 0; k < 200; ++k) {
      const Point z = random_exterior(rng, 0.0, 0.999);
      const Point x = random_exterior(rng, 1.001, 10.0);
      const double dz = 1.0 - z.norm(), dx = x.norm() - 1.0;
      const double ref = kappa(2, FracOrder(s)) * std::pow(dz, s) * std::pow(dx, -s) *
                         std::pow(1.0 + dx, -s) / (x - z).squaredNorm();
      const double r = poisson_kernel_ball(1.0, FracOrder(s), z, x) / ref;
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
  }
  CHECK(lo > 0.05);
  CHECK(hi < 20.0);

  // Mass outside a collar vanishes as s -> 1.
  auto outside = [](double s, double eps) {
    Tolerance t;
    t.rel = 1e-9;
    auto f = [s](double u) {
      const double rho = 1.0 + 0.1 / u;  // rho in (1.1, inf)
      const double P = std::sin(pi * s) / (pi * pi) * std::pow(1.0 / (rho * rho - 1.0), s) / (rho * rho);
      return 2.0 * pi * rho * P * 0.1 / (u * u);
    };
    (void)eps;
    return adaptive_integrate(f, 0.0, 1.0, t).value;
  };
  CHECK(outside(0.9, 0.1) < outside(0.5, 0.1));
  CHECK(outside(0.999, 0.1) < 1e-2);
}

TEST_CASE("Douglas kernel versus trace kernel") {
  const Domain unit = Domain::disk();
  Tolerance tol;
  tol.rel = 1e-6;
  std::mt19937_64 rng(21);
  for (double s : {0.3, 0.7}) {
    for (int k = 0; k < 6; ++k) {
      const Point x = random_exterior(rng, 1.05, 3.0), y = random_exterior(rng, 1.05, 3.0);
      const double kxy = bogdan_kernel(unit, FracOrder(s), x, y, tol).value;
      const double kyx = bogdan_kernel(unit, FracOrder(s), y, x, tol).value;
      CHECK(kxy > 0.0);
      CHECK(std::abs(kxy - kyx) <= 2.0 * tol.rel * kxy);
      const double ks = trace_kernel(unit, FracOrder(s), x, y);
      const double upper = kxy / (s * ks), lower = kxy / (s * s * ks);
      CHECK(upper < 1e3);
      CHECK(lower > 1e-3);
    }
  }
  CHECK_THROWS_AS(bogdan_kernel(unit, FracOrder(0.5), {0.5, 0}, {2, 0}, tol), std::domain_error);
}

TEST_CASE("elliptic kernel factory") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const FracOrder s(0.6);
  const KernelSpec frac = KernelSpec::fractional(s);
  const KernelSpec id = elliptic_kernel_factory(MatrixField::identity(), s);
  for (int k = 0; k < 100; ++k) {
    const Point x(u(rng), u(rng)), y(u(rng), u(rng));
    CHECK(id(x, y) == doctest::Approx(frac(x, y)).epsilon(1e-14));
  }
  Mat2 A;
  A << 4.0, 0.0, 0.0, 1.0;
  const KernelSpec ell = elliptic_kernel_factory(MatrixField::constant_matrix(A), s);
  const Point h(0.3, -0.7);
  const double expected = kappa(2, s) * std::pow(Point(0.15, -0.7).norm(), -2.0 - 1.2) / 2.0;
  CHECK(ell.nonsymmetric({1, 1}, Point(1, 1) + h) == doctest::Approx(expected).epsilon(1e-13));
  CHECK(ell.Lambda() == doctest::Approx(std::pow(4.0, 2.6)).epsilon(1e-14));

  const KernelSpec rot = elliptic_kernel_factory(MatrixField::rotation(3.0, 0.5, 0.7), s);
  for (const KernelSpec* J : {&ell, &rot}) {
    for (int k = 0; k < 1000; ++k) {
      const Point x(u(rng), u(rng)), hh(u(rng), u(rng));
      const double v = (*J)(x, x + hh), f = frac(x, x + hh);
      CHECK(v >= f / J->Lambda() * (1.0 - 1e-12));
      CHECK(v <= f * J->Lambda() * (1.0 + 1e-12));
      CHECK((*J)(x, x + hh) == doctest::Approx((*J)(x + hh, x)).epsilon(1e-13));
    }
  }
  MatrixField bad;
  bad.eval = [](Point) {
    Mat2 m;
    m << 1.0, 0.5, 0.0, 1.0;
    return m;
  };
  bad.lambda = 2.0;
  CHECK_THROWS_AS(elliptic_kernel_factory(bad, s), std::invalid_argument);
  bad.eval = [](Point) { return Mat2(-Mat2::Identity()); };
  CHECK_THROWS_AS(elliptic_kernel_factory(bad, s), std::invalid_argument);
}

TEST_CASE("diffusion recovery") {
  auto family = [](const MatrixField& A) {
    return [A](double s) { return elliptic_kernel_factory(A, FracOrder(s)); };
  };
  const auto id = recover_diffusion(family(MatrixField::identity()), {0.2, -0.1}, 0.5);
  // a_ii(s) = kappa pi delta^{2-2s} / (4 (1-s)) in closed form.
  for (size_t k = 0; k < id.s_grid.size(); ++k) {
    const double s = id.s_grid[k];
    const double closed = kappa(2, FracOrder(s)) * pi * std::pow(0.5, 2.0 - 2.0 * s) / (4.0 * (1.0 - s));
    CHECK(id.per_s[k](0, 0) == doctest::Approx(closed).epsilon(1e-10));
  }
  CHECK(std::abs(id.per_s.back()(0, 0) - 1.0) < 0.05);
  CHECK(std::abs(id.a(0, 0) - 1.0) < 0.05);
  CHECK(std::abs(id.a(0, 1)) < 1e-10);
  const auto id2 = recover_diffusion(family(MatrixField::identity()), {0.2, -0.1}, 0.25);
  CHECK(std::abs(id2.a(0, 0) / id.a(0, 0) - 1.0) < 0.02);

  Mat2 A;
  A << 4.0, 0.0, 0.0, 1.0;
  const auto d41 = recover_diffusion(family(MatrixField::constant_matrix(A)), {0, 0}, 0.5);
  CHECK(std::abs(d41.a(0, 0) / 4.0 - 1.0) < 0.05);
  CHECK(std::abs(d41.a(1, 1) - 1.0) < 0.05);
  CHECK(std::abs(d41.a(0, 1)) < 1e-10);
}

TEST_CASE("nonlocal normal derivative") {
  const Domain unit = Domain::disk();
  const KernelSpec J = KernelSpec::fractional(FracOrder(0.5));
  Tolerance tol;
  tol.rel = 1e-9;
  const Point y(2.0, 0.0);
  CHECK(nonlocal_normal_derivative([](Point) { return 3.0; }, J, unit, y, tol).value == 0.0);

  // u = indicator of the domain: -kappa int |x-y|^{-3}, by a plain polar product rule.
  const double nd = nonlocal_normal_derivative(
      [&](Point x) { return unit.contains(x) ? 1.0 : 0.0; }, J, unit, y, tol).value;
  const Rule1D rr = gauss_legendre(40, 0.0, 1.0);
  const Rule1D th = periodic_trapezoid(200);
  double brute = 0.0;
  for (int i = 0; i < rr.size(); ++i) {
    for (int j = 0; j < th.size(); ++j) {
      const Point x = rr.x[i] * Point(std::cos(th.x[j]), std::sin(th.x[j]));
      brute += rr.w[i] * th.w[j] * rr.x[i] * std::pow((x - y).norm(), -3.0);
    }
  }
  CHECK(nd == doctest::Approx(-brute / (2.0 * pi)).epsilon(1e-9));

  auto u = [](Point x) { return x.x() * x.x() - x.y(); };
  auto v = [](Point x) { return std::sin(x.x()); };
  const double a = nonlocal_normal_derivative(u, J, unit, y, tol).value;
  const double b = nonlocal_normal_derivative(v, J, unit, y, tol).value;
  const double c = nonlocal_normal_derivative([&](Point x) { return 2.0 * u(x) - 3.0 * v(x); }, J,
                                              unit, y, tol).value;
  CHECK(c == doctest::Approx(2.0 * a - 3.0 * b).epsilon(1e-8));
  CHECK_THROWS_AS(nonlocal_normal_derivative(u, J, unit, {0.5, 0}, tol), std::domain_error);
}
