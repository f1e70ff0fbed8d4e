#include "fractrace/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace fractrace {

namespace {

constexpr double kPi = std::numbers::pi;

void require_exterior(double d, const char* what) {
  if (!(d > 0.0)) throw std::domain_error(std::string(what) + ": point on the boundary");
}

Mat2 rotation_matrix(double a) {
  Mat2 q;
  q << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  return q;
}

double ellipticity(const Mat2& A) {
  Eigen::SelfAdjointEigenSolver<Mat2> eig(A);
  const double lo = eig.eigenvalues()(0), hi = eig.eigenvalues()(1);
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return std::max(hi, 1.0 / lo);
}

// int_0^{2pi} int_0^{r(th)} f rho drho dth with the boundary factor
// (r - rho)^edge_power regularized by r - rho = r u^{1/edge_power}.
// The outer integral is split at the given angles.
Estimate nested_polar(const std::function<double(Point)>& f, const Domain& domain,
                      const Tolerance& tol, double edge_power, std::vector<double> breaks = {}) {
  const Point c = domain.center();
  Tolerance inner = tol;
  inner.rel = std::min(0.1, tol.rel * 0.1);
  const double p = edge_power > 0.0 ? 1.0 / edge_power : 1.0;
  auto radial = [&](double th) {
    const Point e(std::cos(th), std::sin(th));
    const double rm = domain.profile(th);
    auto g = [&](double u) {
      if (u <= 0.0) return 0.0;
      const double rho = rm * (1.0 - std::pow(u, p));
      const double jac = rm * p * std::pow(u, p - 1.0);
      return f(c + rho * e) * rho * jac;
    };
    return adaptive_integrate(g, 0.0, 1.0, inner, 4000).value;
  };
  if (breaks.empty()) return adaptive_integrate(radial, 0.0, 2.0 * kPi, tol, 4000);
  for (double& b : breaks) b = std::fmod(std::fmod(b, 2.0 * kPi) + 2.0 * kPi, 2.0 * kPi);
  std::sort(breaks.begin(), breaks.end());
  breaks.push_back(breaks.front() + 2.0 * kPi);
  Estimate total;
  for (size_t k = 0; k + 1 < breaks.size(); ++k) {
    if (breaks[k + 1] - breaks[k] < 1e-15) continue;
    const Estimate e = adaptive_integrate(radial, breaks[k], breaks[k + 1], tol, 4000);
    total.value += e.value;
    total.error += e.error;
  }
  return total;
}

}  // namespace

FracOrder::FracOrder(double s) : s_(s) {
  if (!(s > 0.0 && s < 1.0)) throw std::invalid_argument("fractional order must lie in (0, 1)");
}

double kappa(int d, FracOrder s) {
  if (d < 1) throw std::invalid_argument("dimension must be positive");
  const double sv = s.value();
  return std::pow(2.0, 2.0 * sv) * sv * std::tgamma(0.5 * (d + 2.0 * sv)) /
         (std::pow(kPi, 0.5 * d) * std::tgamma(1.0 - sv));
}

double tau_of_distance(double dx, double s, int d) {
  require_exterior(dx, "tau");
  return (1.0 - s) / (std::pow(dx, s) * std::pow(1.0 + dx, d + s));
}

double tau(const Domain& domain, FracOrder s, Point x) {
  if (domain.contains(x)) throw std::domain_error("tau: point inside the domain");
  return tau_of_distance(domain.distance(x), s.value(), domain.dimension());
}

double trace_kernel_of(double dx, double dy, double dist, double s, int d) {
  require_exterior(dx, "trace_kernel");
  require_exterior(dy, "trace_kernel");
  // Ordered arguments keep the value bitwise symmetric.
  const double a = std::min(dx, dy), b = std::max(dx, dy);
  const double den = std::pow(a * (1.0 + a) * b * (1.0 + b), s) *
                     std::pow(dist + a * b + a + b, d);
  return (1.0 - s) * (1.0 - s) / den;
}

double trace_kernel(const Domain& domain, FracOrder s, Point x, Point y) {
  if (domain.contains(x) || domain.contains(y)) {
    throw std::domain_error("trace_kernel: point inside the domain");
  }
  return trace_kernel_of(domain.distance(x), domain.distance(y), (x - y).norm(), s.value(),
                         domain.dimension());
}

double fractional_kernel(int d, FracOrder s, Point x, Point y) {
  const double r = (x - y).norm();
  if (r == 0.0) throw std::domain_error("fractional_kernel: coincident points");
  return kappa(d, s) * std::pow(r, -d - 2.0 * s.value());
}

double poisson_kernel_ball(double R, FracOrder s, Point z, Point x) {
  const double z2 = z.squaredNorm(), x2 = x.squaredNorm(), R2 = R * R;
  if (!(z2 < R2) || !(x2 > R2)) {
    throw std::domain_error("poisson_kernel_ball: need |z| < R < |x|");
  }
  const double sv = s.value();
  const double c = std::tgamma(1.0) / std::pow(kPi, 2.0) * std::sin(kPi * sv);  // d = 2
  return c * std::pow((R2 - z2) / (x2 - R2), sv) / (z - x).squaredNorm();
}

double poisson_kernel_ball(const Domain& ball, FracOrder s, Point z, Point x) {
  if (!ball.is_disk()) throw std::invalid_argument("poisson_kernel_ball: domain must be a disk");
  return poisson_kernel_ball(ball.base_radius(), s, z - ball.center(), x - ball.center());
}

Estimate bogdan_kernel(const Domain& ball, FracOrder s, Point x, Point y, const Tolerance& tol) {
  if (!ball.is_disk()) throw std::invalid_argument("bogdan_kernel: domain must be a disk");
  for (const Point& p : {x, y}) {
    if (ball.contains(p) || !(ball.distance(p) > 0.0)) {
      throw std::domain_error("bogdan_kernel: points must lie outside the closed disk");
    }
  }
  const double sv = s.value();
  const double k = kappa(2, s);
  auto f = [&](Point z) {
    return k * std::pow((y - z).norm(), -2.0 - 2.0 * sv) * poisson_kernel_ball(ball, s, z, x);
  };
  const Point c = ball.center();
  Estimate e = nested_polar(f, ball, tol, sv,
                            {std::atan2(x.y() - c.y(), x.x() - c.x()), std::atan2(y.y() - c.y(), y.x() - c.x())});
  if (!(e.value > 0.0) || !std::isfinite(e.value) || e.error > 10.0 * tol.target(e.value)) {
    std::ostringstream os;
    os << "bogdan_kernel: quadrature did not converge (value " << e.value << ", error " << e.error
       << ") at x=(" << x.x() << "," << x.y() << "), y=(" << y.x() << "," << y.y() << ")";
    throw QuadratureError(os.str());
  }
  return e;
}

Estimate integrate_domain(const std::function<double(Point)>& f, const Domain& domain,
                          const Tolerance& tol) {
  return nested_polar(f, domain, tol, 0.0);
}

// ---------------------------------------------------------------------------

MatrixField MatrixField::identity() { return constant_matrix(Mat2::Identity()); }

MatrixField MatrixField::constant_matrix(const Mat2& A) {
  MatrixField m;
  m.eval = [A](Point) { return A; };
  m.lambda = ellipticity(A);
  m.constant = true;
  return m;
}

MatrixField MatrixField::rotation(double a, double b, double w) {
  if (!(a > 0.0 && b > 0.0)) throw std::invalid_argument("rotation field needs positive eigenvalues");
  MatrixField m;
  m.eval = [a, b, w](Point x) {
    const Mat2 q = rotation_matrix(w * x.x());
    return Mat2(q * Eigen::Vector2d(a, b).asDiagonal() * q.transpose());
  };
  m.lambda = std::max({a, b, 1.0 / a, 1.0 / b});
  m.constant = (w == 0.0);
  return m;
}

void MatrixField::validate(double bound, int samples) const {
  if (!eval) throw std::invalid_argument("matrix field is empty");
  if (!(lambda >= 1.0)) throw std::invalid_argument("ellipticity constant must be >= 1");
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> u(-bound, bound);
  std::normal_distribution<double> g;
  for (int k = 0; k < samples; ++k) {
    const Point x(u(rng), u(rng));
    const Mat2 A = eval(x);
    if (!A.allFinite() || std::abs(A(0, 1) - A(1, 0)) > 1e-12 * (1.0 + A.norm())) {
      throw std::invalid_argument("matrix field is not symmetric");
    }
    const Point xi(g(rng), g(rng));
    const double q = xi.dot(A * xi), n2 = xi.squaredNorm();
    if (q < n2 / lambda * (1.0 - 1e-12) || q > lambda * n2 * (1.0 + 1e-12)) {
      throw std::invalid_argument("matrix field violates the ellipticity bracket");
    }
  }
}

Mat2 inverse_sqrt(const Mat2& A) {
  Eigen::SelfAdjointEigenSolver<Mat2> eig(A);
  const Eigen::Vector2d ev = eig.eigenvalues().cwiseSqrt().cwiseInverse();
  return eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
}

KernelSpec KernelSpec::fractional(FracOrder s, int d) {
  KernelSpec k;
  k.variant_ = KernelVariant::kFractional;
  k.s_ = s.value();
  k.d_ = d;
  k.kappa_ = kappa(d, s);
  k.Lambda_ = 1.0;
  k.translation_invariant_ = true;
  k.A_ = MatrixField::identity();
  return k;
}

KernelSpec KernelSpec::tabulated(std::function<double(Point, Point)> J, FracOrder s,
                                 double Lambda, bool translation_invariant) {
  if (!(Lambda >= 1.0)) throw std::invalid_argument("comparability constant must be >= 1");
  KernelSpec k;
  k.variant_ = KernelVariant::kTabulated;
  k.s_ = s.value();
  k.kappa_ = kappa(2, s);
  k.Lambda_ = Lambda;
  k.translation_invariant_ = translation_invariant;
  k.table_ = std::move(J);
  return k;
}

KernelSpec elliptic_kernel_factory(const MatrixField& A, FracOrder s) {
  A.validate();
  KernelSpec k;
  k.variant_ = KernelVariant::kElliptic;
  k.s_ = s.value();
  k.d_ = 2;
  k.kappa_ = kappa(2, s);
  k.Lambda_ = std::pow(A.lambda, 2.0 + s.value());
  k.A_ = A;
  k.translation_invariant_ = A.constant;
  if (A.constant) {
    k.B_ = inverse_sqrt(A(Point::Zero()));
    k.detB_ = k.B_.determinant();
  }
  return k;
}

double KernelSpec::nonsymmetric(Point x, Point y) const {
  const Point h = y - x;
  switch (variant_) {
    case KernelVariant::kFractional: {
      const double r = h.norm();
      if (r == 0.0) throw std::domain_error("kernel: coincident points");
      return kappa_ * std::pow(r, -d_ - 2.0 * s_);
    }
    case KernelVariant::kElliptic: {
      if (A_.constant) {
        const double r = (B_ * h).norm();
        if (r == 0.0) throw std::domain_error("kernel: coincident points");
        return kappa_ * std::pow(r, -d_ - 2.0 * s_) * detB_;
      }
      const Mat2 B = inverse_sqrt(A_(x));
      const double r = (B * h).norm();
      if (r == 0.0) throw std::domain_error("kernel: coincident points");
      return kappa_ * std::pow(r, -d_ - 2.0 * s_) * B.determinant();
    }
    case KernelVariant::kTabulated:
      return table_(x, y);
  }
  return 0.0;
}

double KernelSpec::operator()(Point x, Point y) const {
  if (variant_ == KernelVariant::kElliptic && !A_.constant) {
    return 0.5 * (nonsymmetric(x, y) + nonsymmetric(y, x));
  }
  return nonsymmetric(x, y);
}

double KernelSpec::profile(Point x, Point e) const {
  switch (variant_) {
    case KernelVariant::kFractional:
      return kappa_ * std::pow(e.norm(), -d_ - 2.0 * s_);
    case KernelVariant::kElliptic: {
      const Mat2 B = A_.constant ? B_ : inverse_sqrt(A_(x));
      const double det = A_.constant ? detB_ : B.determinant();
      return kappa_ * std::pow((B * e).norm(), -d_ - 2.0 * s_) * det;
    }
    case KernelVariant::kTabulated:
      return table_(x, x + e);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------

DiffusionRecovery recover_diffusion(const std::function<KernelSpec(double)>& family, Point x,
                                    double delta, std::vector<double> s_grid, double max_change) {
  if (!(delta > 0.0)) throw std::invalid_argument("recover_diffusion: delta must be positive");
  if (s_grid.size() < 2) throw std::invalid_argument("recover_diffusion: need at least two s values");
  DiffusionRecovery out;
  out.s_grid = s_grid;
  const Rule1D theta = periodic_trapezoid(512);
  for (double s : s_grid) {
    const KernelSpec j = family(s);
    // Radial factor int_0^delta rho^3 rho^{-2-2s} drho by a Jacobi panel on
    // the weight rho^{1-2s}; exact for homogeneous j.
    const Rule1D radial = singular_panel(4, 0.0, delta, 1.0 - 2.0 * s);
    Mat2 a = Mat2::Zero();
    for (int i = 0; i < theta.size(); ++i) {
      const Point e(std::cos(theta.x[i]), std::sin(theta.x[i]));
      const double ang = radial.apply([&](double rho) {
        return rho * rho * rho * j.nonsymmetric(x, x + rho * e);
      });
      a += 0.5 * theta.w[i] * ang * (e * e.transpose());
    }
    out.per_s.push_back(0.5 * (a + a.transpose()));
  }
  // Least squares c0 + c1 (1 - s) per entry.
  const int n = static_cast<int>(s_grid.size());
  Eigen::MatrixXd X(n, 2);
  for (int k = 0; k < n; ++k) X.row(k) << 1.0, 1.0 - s_grid[k];
  const auto qr = X.colPivHouseholderQr();
  for (int i = 0; i < 2; ++i) {
    for (int jj = 0; jj < 2; ++jj) {
      Eigen::VectorXd y(n);
      for (int k = 0; k < n; ++k) y(k) = out.per_s[k](i, jj);
      out.a(i, jj) = qr.solve(y)(0);
    }
  }
  out.a = 0.5 * (out.a + out.a.transpose());
  const double scale = out.per_s.back().cwiseAbs().maxCoeff();
  const double change = (out.per_s[n - 1] - out.per_s[n - 2]).cwiseAbs().maxCoeff();
  if (!(change <= max_change * scale)) {
    throw QuadratureError("recover_diffusion: sequence not converging on the s-grid");
  }
  return out;
}

Estimate nonlocal_normal_derivative(const ScalarFn& u, const KernelSpec& J, const Domain& domain,
                                    Point y, const Tolerance& tol) {
  if (domain.contains(y) || !(domain.distance(y) > 0.0)) {
    throw std::domain_error("nonlocal_normal_derivative: y must lie outside the closed domain");
  }
  const double uy = u(y);
  auto f = [&](Point x) { return (uy - u(x)) * J(x, y); };
  Estimate e = nested_polar(f, domain, tol, 0.0);
  if (!std::isfinite(e.value) || e.error > 10.0 * tol.target(e.value) + 1e-300) {
    if (e.value != 0.0 || e.error != 0.0) {
      std::ostringstream os;
      os << "nonlocal_normal_derivative: quadrature unresolved at d_y = " << domain.distance(y)
         << "; loosen the tolerance or move y away from the boundary";
      throw QuadratureError(os.str());
    }
  }
  return e;
}


double truncation_tail(const KernelSpec& J, const Mesh& mesh, Point x, int order) {
  const double s = J.s();
  const Rule1D& g = gauss_legendre(order);
  const Rule1D radial = tail_rule(1.0, 2.0 * s, 8, 24);
  double total = 0.0;
  for (const auto& edge : mesh.boundary_edges) {
    if (edge.kind != BoundaryKind::kTruncation) continue;
    const Point a = mesh.vertices[edge.a] - x, b = mesh.vertices[edge.b] - x;
    const double ta = std::atan2(a.y(), a.x());
    double span = std::atan2(b.y(), b.x()) - ta;
    if (span > kPi) span -= 2.0 * kPi;
    if (span < -kPi) span += 2.0 * kPi;
    // Line of the edge: n . y = p with |n| = 1.
    const Point ab = b - a;
    Point n(ab.y(), -ab.x());
    n.normalize();
    double p = n.dot(a);
    if (p < 0.0) {
      n = -n;
      p = -p;
    }
    if (!(p > 0.0)) throw std::domain_error("truncation_tail: point on the truncation polygon");
    const double half = 0.5 * std::abs(span), mid = ta + 0.5 * span;
    for (int q = 0; q < g.size(); ++q) {
      const double th = mid + half * g.x[q];
      const Point e(std::cos(th), std::sin(th));
      const double rho0 = p / n.dot(e);
      double inner;
      if (J.translation_invariant()) {
        inner = J.profile(x, e) * std::pow(rho0, -2.0 * s) / (2.0 * s);
      } else {
        inner = 0.0;
        for (int k = 0; k < radial.size(); ++k) {
          const double rho = rho0 * radial.x[k];
          inner += radial.w[k] * rho0 * J(x, Point(x + rho * e)) * rho;
        }
      }
      total += half * g.w[q] * inner;
    }
  }
  return total;
}

}  // namespace fractrace
