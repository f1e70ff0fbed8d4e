#include "fractrace/norms.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

namespace fractrace {

namespace {

constexpr double kPi = std::numbers::pi;

double u01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Open-interval variant, for inverse transforms with singular endpoints.
double u01_open(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

double exterior_distance(const Domain& domain, Point x, double t) {
  return domain.is_disk() ? t : domain.distance(x);
}

// Nodes t_k, weights w_k with sum w_k H(t_k) ~ int_0^inf (1-s) t^{-s} H(t) dt.
struct RadialRule {
  std::vector<double> t, w;
};

RadialRule trace_radial_rule(double s, int order, int depth) {
  RadialRule r;
  // Panels dyadic in t, i.e. u-edges 2^{-k(1-s)}; dyadic u-panels leave
  // t in (0.1, 1) with one or two nodes once s is close to 1.
  std::vector<double> uedges{0.0}, edges{0.0};
  for (int k = depth; k >= 0; --k) {
    uedges.push_back(std::pow(2.0, -k * (1.0 - s)));
    edges.push_back(std::ldexp(1.0, -k));
  }
  const Rule1D& g = gauss_legendre(order);
  const double p = 1.0 / (1.0 - s);
  for (size_t k = 0; k + 1 < uedges.size(); ++k) {
    const double a = uedges[k], b = uedges[k + 1], h = 0.5 * (b - a), c = 0.5 * (a + b);
    for (int q = 0; q < g.size(); ++q) {
      const double u = c + h * g.x[q];
      r.t.push_back(std::pow(u, p));
      r.w.push_back(h * g.w[q]);
    }
  }
  for (size_t k = 0; k + 1 < edges.size(); ++k) {
    const double a = edges[k], b = edges[k + 1], h = 0.5 * (b - a), c = 0.5 * (a + b);
    for (int q = 0; q < g.size(); ++q) {
      const double v = c + h * g.x[q];
      const double t = 1.0 / v;
      r.t.push_back(t);
      r.w.push_back(h * g.w[q] / (v * v) * (1.0 - s) * std::pow(t, -s));
    }
  }
  return r;
}

double trace_seminorm_squared(const ScalarField& g, const Domain& domain, double s,
                              const TraceSeminormOptions& opt) {
  const RadialRule rad = trace_radial_rule(s, opt.order, opt.depth);
  const Rule1D theta = periodic_trapezoid(opt.n_theta);
  const Rule1D& gp = gauss_legendre(opt.phi_order);
  const int nr = static_cast<int>(rad.t.size());
  const Point c = domain.center();

  struct Node {
    Point x;
    double g, d, fac;
  };
  std::vector<double> r1(theta.size());
  std::vector<Node> nodes(static_cast<size_t>(theta.size()) * nr);
  for (int i = 0; i < theta.size(); ++i) {
    const double th = theta.x[i];
    r1[i] = domain.profile(th);
    const Point e(std::cos(th), std::sin(th));
    for (int k = 0; k < nr; ++k) {
      const double t = rad.t[k];
      const Point x = c + (r1[i] + t) * e;
      const double d = exterior_distance(domain, x, t);
      // (t/d)^s (1+d)^{-s} times the polar Jacobian.
      const double fac = std::pow(t / d, s) * std::pow(1.0 + d, -s) * (r1[i] + t);
      nodes[static_cast<size_t>(i) * nr + k] = {x, g(x), d, fac};
    }
  }

  // On a disk the y-side factor depends on t2 only.
  const bool disk = domain.is_disk();
  std::vector<double> disk_fac(nr);
  for (int k = 0; k < nr; ++k) disk_fac[k] = std::pow(1.0 + rad.t[k], -s) * (domain.base_radius() + rad.t[k]);

  auto y_side = [&](double th2, int k2, const Node& xn, double& acc, double w) {
    const double t2 = rad.t[k2];
    const double r2 = disk ? domain.base_radius() : domain.profile(th2);
    const Point e(std::cos(th2), std::sin(th2));
    const Point y = c + (r2 + t2) * e;
    const double diff = xn.g - g(y);
    if (diff == 0.0) return;
    double dy = t2, fy = disk_fac[k2];
    if (!disk) {
      dy = domain.distance(y);
      fy = std::pow(t2 / dy, s) * std::pow(1.0 + dy, -s) * (r2 + t2);
    }
    const double den = (xn.x - y).norm() + xn.d * dy + xn.d + dy;
    acc += w * fy * diff * diff / (den * den);
  };

  double total = 0.0;
  for (int k1 = 0; k1 < nr; ++k1) {
    for (int k2 = k1; k2 < nr; ++k2) {
      const double t1 = rad.t[k1], t2 = rad.t[k2];
      const double W = (k1 == k2 ? 1.0 : 2.0) * rad.w[k1] * rad.w[k2];
      double sum_theta = 0.0;
      for (int i = 0; i < theta.size(); ++i) {
        const Node& xn = nodes[static_cast<size_t>(i) * nr + k1];
        const double scale = std::max((t1 + t2) / (r1[i] + std::min(t1, t2)), opt.phi_floor);
        double lo = 0.0, hi = std::min(0.25 * scale, kPi), acc = 0.0;
        while (hi > lo) {
          const double h = 0.5 * (hi - lo), m = 0.5 * (hi + lo);
          for (int q = 0; q < gp.size(); ++q) {
            const double phi = m + h * gp.x[q];
            y_side(theta.x[i] + phi, k2, xn, acc, h * gp.w[q]);
            y_side(theta.x[i] - phi, k2, xn, acc, h * gp.w[q]);
          }
          lo = hi;
          hi = std::min(2.0 * hi, kPi);
        }
        sum_theta += theta.w[i] * xn.fac * acc;
      }
      total += W * sum_theta;
    }
  }
  return total;
}

Mesh mesh_for(const Domain& domain, double reach, double h, double R) {
  if (R <= 0.0) {
    const double base = domain.diameter() + (domain.center()).norm();
    R = std::max(1.2 * base + 2.0 * h, reach + 2.0 * h);
  }
  return build_mesh(domain, R, h);
}

double support_reach(const ScalarField& f, const Domain& domain) {
  return (f.support_center - domain.center()).norm() + f.support_radius;
}

}  // namespace

// ---------------------------------------------------------------------------

ScalarField ScalarField::bounded(std::function<double(Point)> f, double bound) {
  ScalarField out;
  out.fn = std::move(f);
  out.bound = bound;
  return out;
}

ScalarField ScalarField::lipschitz_field(std::function<double(Point)> f, double lipschitz,
                                         double bound) {
  ScalarField out;
  out.fn = std::move(f);
  out.lipschitz = lipschitz;
  out.bound = bound;
  return out;
}

ScalarField ScalarField::supported(std::function<double(Point)> f, Point center, double radius,
                                   double bound, double lipschitz) {
  ScalarField out;
  out.fn = std::move(f);
  out.support_center = center;
  out.support_radius = radius;
  out.bound = bound;
  out.lipschitz = lipschitz;
  return out;
}

Point ScalarField::grad(Point x) const {
  if (gradient) return gradient(x);
  const double h = 1e-6 * std::max(1.0, x.norm());
  return Point((fn(x + Point(h, 0)) - fn(x - Point(h, 0))) / (2.0 * h),
               (fn(x + Point(0, h)) - fn(x - Point(0, h))) / (2.0 * h));
}

void ScalarField::validate(const Domain& domain, double extent, int samples,
                           std::uint64_t seed) const {
  if (!fn) throw std::invalid_argument("ScalarField: no function");
  std::mt19937_64 rng(seed);
  const Point c = domain.center();
  auto draw = [&] { return Point(c + extent * Point(2.0 * u01(rng) - 1.0, 2.0 * u01(rng) - 1.0)); };
  for (int k = 0; k < samples; ++k) {
    const Point x = draw();
    const double v = fn(x);
    if (!std::isfinite(v)) throw std::invalid_argument("ScalarField: non-finite value");
    if (is_bounded() && std::abs(v) > bound * std::pow(1.0 + domain.distance(x), -decay) * (1.0 + 1e-12)) {
      throw std::invalid_argument("ScalarField: declared bound violated");
    }
    if (has_bounded_support() && (x - support_center).norm() > support_radius && v != 0.0) {
      throw std::invalid_argument("ScalarField: nonzero outside the declared support");
    }
    if (is_lipschitz()) {
      const double r = 0.05 * extent * u01(rng);
      const double a = 2.0 * kPi * u01(rng);
      const Point y = x + r * Point(std::cos(a), std::sin(a));
      if (r > 0.0 && std::abs(fn(y) - v) > lipschitz * r * (1.0 + 1e-9)) {
        throw std::invalid_argument("ScalarField: difference quotient above the Lipschitz constant");
      }
    }
  }
}

std::string NormReport::csv_header() { return "s,domain,quantity,value,l2_part,semi_part,err_est"; }

std::string NormReport::csv_row() const {
  std::ostringstream os;
  os << std::setprecision(17) << s << ',' << csv_field(domain) << ',' << csv_field(quantity) << ','
     << value << ',' << l2_part << ',' << semi_part << ',' << error;
  return os.str();
}

// ---------------------------------------------------------------------------

NormReport l2_tau_norm(const ScalarField& g, const Domain& domain, FracOrder s,
                       const Tolerance& tol) {
  if (!g.is_bounded()) {
    throw QuadratureError("l2_tau_norm: field needs a declared bound for the tau_s tail to converge");
  }
  const double sv = s.value();
  auto f = [&](Point x) {
    const double v = g(x);
    return v == 0.0 ? 0.0 : tau(domain, s, x) * v * v;
  };
  const ExteriorIntegral spec{(1.0 - sv) * g.bound * g.bound, 2.0 * sv + 2.0 * g.decay, -sv, 8.0,
                              TailMode::kMapped};
  const Estimate e = integrate_exterior(f, domain, spec, tol);
  NormReport r;
  r.quantity = "l2_tau";
  r.s = sv;
  r.domain = domain.descriptor();
  r.l2_part = std::sqrt(std::max(e.value, 0.0));
  r.value = r.l2_part;
  r.error = e.error;
  return r;
}

TraceSeminormOptions TraceSeminormOptions::refined() const {
  TraceSeminormOptions r = *this;
  r.order += 2;
  r.depth += 8;
  r.n_theta = n_theta * 3 / 2;
  r.phi_order += 2;
  r.phi_floor = phi_floor * 0.1;
  return r;
}

NormReport trace_seminorm(const ScalarField& g, const Domain& domain, FracOrder s,
                          const Tolerance& tol, const TraceSeminormOptions& opt) {
  tol.validate();
  if (!g.is_bounded()) throw QuadratureError("trace_seminorm: field needs a declared bound");
  const double sv = s.value();
  double value = trace_seminorm_squared(g, domain, sv, opt);
  double error = 0.0;
  if (opt.estimate_error) {
    const double fine = trace_seminorm_squared(g, domain, sv, opt.refined());
    error = std::abs(fine - value);
    value = fine;
    if (error > tol.target(value)) {
      std::ostringstream msg;
      msg << "trace_seminorm: two-level difference " << error << " above tolerance at s = " << sv;
      throw QuadratureError(msg.str());
    }
  }
  NormReport r;
  r.quantity = "trace_seminorm";
  r.s = sv;
  r.domain = domain.descriptor();
  r.semi_part = std::sqrt(std::max(value, 0.0));
  r.value = r.semi_part;
  r.error = error;
  return r;
}

NormReport trace_norm(const ScalarField& g, const Domain& domain, FracOrder s,
                      const Tolerance& tol, const TraceSeminormOptions& opt) {
  const NormReport a = l2_tau_norm(g, domain, s, tol);
  const NormReport b = trace_seminorm(g, domain, s, tol, opt);
  NormReport r = a;
  r.quantity = "trace_norm";
  r.semi_part = b.semi_part;
  r.value = std::hypot(a.l2_part, b.semi_part);
  r.error = a.error + b.error;
  return r;
}

NormReport h_half_boundary_norm(const BoundaryField& g, const Domain& domain, int n) {
  double l2 = 0.0;
  for (const auto& node : boundary_quadrature(domain, n).nodes) {
    const double v = g(node.point);
    l2 += node.weight * v * v;
  }
  auto F = [&](double a, double b) {
    const Point x = domain.boundary_point(a), y = domain.boundary_point(b);
    const double diff = g(x) - g(y);
    if (diff == 0.0) return 0.0;
    return diff * diff / (x - y).squaredNorm() * domain.boundary_tangent(a).norm() *
           domain.boundary_tangent(b).norm();
  };
  const Estimate semi = periodic_double_integral(F, n);
  NormReport r;
  r.quantity = "h_half_boundary";
  r.s = 1.0;
  r.domain = domain.descriptor();
  r.l2_part = std::sqrt(l2);
  r.semi_part = std::sqrt(std::max(semi.value, 0.0));
  r.value = std::hypot(r.l2_part, r.semi_part);
  r.error = semi.error;
  return r;
}

// ---------------------------------------------------------------------------

Estimate vs_energy(const ScalarField& u, const ScalarField& v, const Domain& domain,
                   const KernelSpec& J, const Tolerance& tol, const VsEnergyOptions& opt) {
  if (!u.has_bounded_support() || !v.has_bounded_support()) {
    throw std::invalid_argument("vs_energy: fields need a declared bounded support");
  }
  const double reach = std::max(support_reach(u, domain), support_reach(v, domain));
  const Mesh mesh = mesh_for(domain, reach, opt.h, opt.truncation_radius);
  if (reach + opt.h > mesh.truncation_radius) {
    throw std::invalid_argument("vs_energy: supports leave the truncation disk");
  }
  auto F = [&](Point x, Point y) {
    const double du = u(x) - u(y);
    if (du == 0.0) return 0.0;
    const double dv = v(x) - v(y);
    return dv == 0.0 ? 0.0 : du * dv * J(x, y);
  };
  const Estimate pairs =
      double_integral_singular(F, mesh, PairRegion::kAtLeastOneInterior, -2.0 * J.s(), opt.pairs, tol);
  // Pairs with y beyond the truncation polygon, where u(y) = v(y) = 0.
  double tail = 0.0;
  const TriangleRule& rule = triangle_gauss(4);
  for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
    if (mesh.triangles[t].region != Region::kInterior) continue;
    const Tri T = triangle_of(mesh, t);
    const double a2 = 2.0 * tri_area(T);
    for (int q = 0; q < rule.size(); ++q) {
      const Point x = tri_map(T, rule.uv[q]);
      const double uv = u(x) * v(x);
      if (uv != 0.0) tail += a2 * rule.w[q] * uv * truncation_tail(J, mesh, x);
    }
  }
  return {0.5 * pairs.value + tail, 0.5 * pairs.error};
}

NormReport vs_norm(const ScalarField& u, const Domain& domain, const KernelSpec& J,
                   const Tolerance& tol, const VsEnergyOptions& opt) {
  const Estimate e = vs_energy(u, u, domain, J, tol, opt);
  NormReport r;
  r.quantity = "vs_norm";
  r.s = J.s();
  r.domain = domain.descriptor();
  r.l2_part = std::sqrt(integrate_interior([&](Point x) { return u(x) * u(x); }, domain));
  r.semi_part = std::sqrt(std::max(e.value, 0.0));
  r.value = std::hypot(r.l2_part, r.semi_part);
  r.error = e.error;
  return r;
}

double integrate_interior(const std::function<double(Point)>& f, const Domain& domain, int n_theta,
                          int n_radial) {
  const Rule1D theta = periodic_trapezoid(n_theta);
  const Rule1D& g = gauss_legendre(n_radial);
  const Point c = domain.center();
  double total = 0.0;
  for (int i = 0; i < theta.size(); ++i) {
    const double r = domain.profile(theta.x[i]);
    const Point e(std::cos(theta.x[i]), std::sin(theta.x[i]));
    double acc = 0.0;
    for (int q = 0; q < g.size(); ++q) {
      const double rho = 0.5 * r * (1.0 + g.x[q]);
      acc += 0.5 * r * g.w[q] * f(c + rho * e) * rho;
    }
    total += theta.w[i] * acc;
  }
  return total;
}

double integrate_interior_graded(const std::function<double(Point)>& f, const Domain& domain,
                                 double gamma, int n_theta, int order, int depth) {
  const Rule1D theta = periodic_trapezoid(n_theta);
  const Point c = domain.center();
  double total = 0.0;
  for (int i = 0; i < theta.size(); ++i) {
    const double r = domain.profile(theta.x[i]);
    const Point e(std::cos(theta.x[i]), std::sin(theta.x[i]));
    const Rule1D radial = graded_rule(r, gamma, order, depth);
    double acc = 0.0;
    for (int q = 0; q < radial.size(); ++q) {
      const double t = radial.x[q];
      const Point x = c + (r - t) * e;
      const double d = domain.is_disk() ? t : domain.distance(x);
      acc += radial.w[q] * f(x) * std::pow(d, gamma) * (r - t);
    }
    total += theta.w[i] * acc;
  }
  return total;
}

double local_energy(const ScalarField& u, const ScalarField& v, const Domain& domain,
                    const MatrixField& A, int n_theta, int n_radial) {
  auto f = [&](Point x) { return (A(x) * u.grad(x)).dot(v.grad(x)); };
  return integrate_interior(f, domain, n_theta, n_radial);
}

// ---------------------------------------------------------------------------

Estimate poisson_extension(const ScalarField& g, const Domain& ball, FracOrder s, Point z,
                           const Tolerance& tol) {
  if (!ball.is_disk()) throw std::invalid_argument("poisson_extension: domain must be a disk");
  if (!ball.contains(z)) throw std::domain_error("poisson_extension: z must lie inside the disk");
  const double gap = ball.distance(g.support_center) - g.support_radius;
  if (g.has_bounded_support() && !ball.contains(g.support_center) && gap > 0.0) {
    auto rule = [&](int nr, int nt) {
      const Rule1D& gr = gauss_legendre(nr);
      const Rule1D th = periodic_trapezoid(nt);
      const double rho = g.support_radius;
      double acc = 0.0;
      for (int i = 0; i < th.size(); ++i) {
        const Point e(std::cos(th.x[i]), std::sin(th.x[i]));
        for (int q = 0; q < gr.size(); ++q) {
          const double r = 0.5 * rho * (1.0 + gr.x[q]);
          const Point x = g.support_center + r * e;
          const double gv = g(x);
          if (gv != 0.0) acc += th.w[i] * 0.5 * rho * gr.w[q] * r * gv * poisson_kernel_ball(ball, s, z, x);
        }
      }
      return acc;
    };
    const double a = rule(16, 32), b = rule(24, 48);
    return {b, std::abs(b - a)};
  }
  if (!g.is_bounded()) throw QuadratureError("poisson_extension: field needs a declared bound");
  auto f = [&](Point x) {
    const double gv = g(x);
    return gv == 0.0 ? 0.0 : gv * poisson_kernel_ball(ball, s, z, x);
  };
  const double sv = s.value();
  return integrate_exterior(f, ball, {g.bound, 2.0 * sv, -sv, 8.0, TailMode::kMapped}, tol);
}

ScalarField poisson_extended_field(const ScalarField& g, const Domain& ball, FracOrder s,
                                   const Tolerance& tol) {
  ScalarField out;
  out.fn = [g, ball, s, tol](Point z) {
    return ball.contains(z) ? poisson_extension(g, ball, s, z, tol).value : g(z);
  };
  out.bound = g.bound;
  if (g.has_bounded_support()) {
    out.support_center = ball.center();
    out.support_radius =
        std::max(ball.max_profile(), (g.support_center - ball.center()).norm() + g.support_radius);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

template <class Sample>
MonteCarloEstimate run_batches(const MonteCarloOptions& mc, const char* what, Sample&& sample) {
  if (mc.batch <= 0 || mc.max_samples <= 0) throw std::invalid_argument("Monte Carlo budget must be positive");
  std::mt19937_64 rng(mc.seed);
  double sum = 0.0, sum2 = 0.0;
  long n = 0;
  MonteCarloEstimate est;
  while (n < mc.max_samples) {
    const long stop = std::min(mc.max_samples, n + mc.batch);
    for (; n < stop; ++n) {
      const double v = sample(rng);
      sum += v;
      sum2 += v * v;
    }
    est.samples = n;
    est.value = sum / n;
    const double var = std::max(sum2 / n - est.value * est.value, 0.0);
    est.std_error = std::sqrt(var / (n - 1 > 0 ? n - 1 : 1));
    if (sum2 == 0.0 || est.std_error <= mc.rel_target * std::abs(est.value)) return est;
  }
  std::ostringstream msg;
  msg << what << ": sampling budget exhausted with estimate " << est.value << " +- " << est.std_error
      << " after " << est.samples << " samples";
  throw BudgetExhausted(msg.str(), est);
}

}  // namespace

MonteCarloEstimate cx_seminorm(const ScalarField& g, const Domain& ball, FracOrder s,
                               const MonteCarloOptions& mc, double kernel_tol) {
  if (!ball.is_disk()) throw std::invalid_argument("cx_seminorm: domain must be a disk");
  const double sv = s.value(), R0 = ball.base_radius();
  const Point c = ball.center();
  const bool use_support = g.has_bounded_support() &&
                           ball.distance(g.support_center) - g.support_radius > 0.0 &&
                           !ball.contains(g.support_center);
  const double alpha = use_support ? 0.5 : 1.0;
  const double support_area = use_support ? kPi * g.support_radius * g.support_radius : 0.0;

  // Exterior law: angle uniform, t = R0 w / (1 - w) with w = U^{1/(1-s)},
  // density (1-s) (t/R0)^{-s} (1 + t/R0)^{s-2} / R0 in t.
  auto density = [&](Point x) {
    const double rr = (x - c).norm(), t = rr - R0;
    const double a = t / R0;
    const double qt = (1.0 - sv) * std::pow(a, -sv) * std::pow(1.0 + a, sv - 2.0) / R0;
    double q = alpha * qt / (2.0 * kPi * rr);
    if (use_support && (x - g.support_center).norm() <= g.support_radius) {
      q += (1.0 - alpha) / support_area;
    }
    return q;
  };
  auto draw = [&](std::mt19937_64& rng) {
    if (u01(rng) < alpha) {
      const double w = std::pow(u01_open(rng), 1.0 / (1.0 - sv));
      const double t = R0 * w / (1.0 - w);
      const double th = 2.0 * kPi * u01(rng);
      return Point(c + (R0 + t) * Point(std::cos(th), std::sin(th)));
    }
    const double r = g.support_radius * std::sqrt(u01(rng));
    const double th = 2.0 * kPi * u01(rng);
    return Point(g.support_center + r * Point(std::cos(th), std::sin(th)));
  };
  Tolerance ktol;
  ktol.rel = kernel_tol;
  return run_batches(mc, "cx_seminorm", [&](std::mt19937_64& rng) {
    const Point x = draw(rng), y = draw(rng);
    const double diff = g(x) - g(y);
    if (diff == 0.0) return 0.0;
    const double k = bogdan_kernel(ball, s, x, y, ktol).value;
    return 0.5 * diff * diff * k / (density(x) * density(y));
  });
}

MonteCarloEstimate vs_energy_monte_carlo(const ScalarField& u, const Domain& domain,
                                         const KernelSpec& J, const MonteCarloOptions& mc,
                                         const std::vector<SamplingFocus>& focus) {
  const double s = J.s();
  const double ell = 0.5 * domain.diameter();
  const double area = domain.area();
  const Point c = domain.center();
  const double box = domain.max_profile();
  const int nf = static_cast<int>(focus.size());
  const double local = nf == 0 ? 1.0 : 0.5;
  // r-law: half on (2-2s) r^{1-2s} / ell^{2-2s} over (0, ell], half on the
  // Pareto law 2s ell^{2s} r^{-1-2s} over (ell, inf).
  auto pdf_r = [&](double r) {
    return r <= ell ? 0.5 * (2.0 - 2.0 * s) * std::pow(r, 1.0 - 2.0 * s) / std::pow(ell, 2.0 - 2.0 * s)
                    : 0.5 * 2.0 * s * std::pow(ell, 2.0 * s) * std::pow(r, -1.0 - 2.0 * s);
  };
  auto pdf_y = [&](Point x, Point y) {
    const double r = (y - x).norm();
    double p = local * pdf_r(r) / (2.0 * kPi * r);
    for (const auto& f : focus) {
      if ((y - f.center).norm() <= f.radius) p += (1.0 - local) / nf / (kPi * f.radius * f.radius);
    }
    return p;
  };
  return run_batches(mc, "vs_energy_monte_carlo", [&](std::mt19937_64& rng) {
    Point x;
    do {
      x = c + box * Point(2.0 * u01(rng) - 1.0, 2.0 * u01(rng) - 1.0);
    } while (!domain.contains(x));
    Point y;
    if (u01(rng) < local) {
      const double r = u01(rng) < 0.5 ? ell * std::pow(u01_open(rng), 1.0 / (2.0 - 2.0 * s))
                                      : ell * std::pow(u01_open(rng), -1.0 / (2.0 * s));
      const double th = 2.0 * kPi * u01(rng);
      y = x + r * Point(std::cos(th), std::sin(th));
    } else {
      const auto& f = focus[std::min(nf - 1, static_cast<int>(u01(rng) * nf))];
      const double r = f.radius * std::sqrt(u01(rng)), th = 2.0 * kPi * u01(rng);
      y = f.center + r * Point(std::cos(th), std::sin(th));
    }
    const double diff = u(x) - u(y);
    if (diff == 0.0) return 0.0;
    const double weight = domain.contains(y) ? 0.5 : 1.0;
    return area * J(x, y) * diff * diff * weight / pdf_y(x, y);
  });
}

// ---------------------------------------------------------------------------

double smooth_cutoff(double t) {
  if (t <= 0.5) return 1.0;
  if (t >= 1.0) return 0.0;
  auto psi = [](double a) { return a > 0.0 ? std::exp(-1.0 / a) : 0.0; };
  const double a = 2.0 * t - 1.0;
  return psi(1.0 - a) / (psi(1.0 - a) + psi(a));
}

ScalarField normal_ray_extension(const BoundaryField& g, const Domain& domain, double r0) {
  if (!(r0 > 0.0 && r0 < domain.ball_radius())) {
    throw std::invalid_argument("normal_ray_extension: cutoff width must lie in (0, ball radius)");
  }
  double sup = 0.0;
  for (const auto& n : boundary_quadrature(domain, 1024).nodes) sup = std::max(sup, std::abs(g(n.point)));
  ScalarField out;
  out.fn = [g, domain, r0](Point x) {
    const double d = domain.distance(x);
    const double chi = smooth_cutoff(d / r0);
    return chi == 0.0 ? 0.0 : g(domain.nearest_boundary_point(x)) * chi;
  };
  out.bound = sup;
  out.support_center = domain.center();
  out.support_radius = domain.max_profile() + r0;
  return out;
}

HardyRatio hardy_ratio(const ScalarField& u, const Domain& domain, FracOrder s,
                       const Tolerance& tol, const HardyOptions& opt) {
  const double sv = s.value();
  auto sq = [&](Point x) { return u(x) * u(x); };
  HardyRatio r;
  r.l2 = integrate_interior(sq, domain, opt.n_theta);
  if (!(r.l2 > 0.0)) throw std::domain_error("hardy_ratio: u vanishes on the domain");
  r.numerator = (1.0 - sv) * integrate_interior_graded(sq, domain, -sv, opt.n_theta);
  const Mesh mesh = mesh_for(domain, 0.0, opt.h, 0.0);
  auto F = [&](Point x, Point y) {
    const double d = u(x) - u(y);
    return d == 0.0 ? 0.0 : d * d * std::pow((x - y).squaredNorm(), -1.0 - sv);
  };
  r.seminorm = (1.0 - sv) *
               double_integral_singular(F, mesh, PairRegion::kBothInterior, -2.0 * sv, opt.pairs, tol).value;
  return r;
}

}  // namespace fractrace
