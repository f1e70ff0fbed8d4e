#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "fractrace/geometry.hpp"

namespace fractrace {

class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Tolerance {
  double rel = 1e-8;
  double abs = 0.0;
  int max_depth = 30;
  void validate() const;
  double target(double magnitude) const { return std::max(rel * std::abs(magnitude), abs); }
};

struct Estimate {
  double value = 0.0;
  double error = 0.0;
};

/// Nodes and weights of a one-dimensional rule: sum w_k f(x_k).
struct Rule1D {
  std::vector<double> x;
  std::vector<double> w;
  int size() const { return static_cast<int>(x.size()); }
  template <class F>
  double apply(F&& f) const {
    double acc = 0.0;
    for (int k = 0; k < size(); ++k) acc += w[k] * f(x[k]);
    return acc;
  }
  void append(const Rule1D& other);
};

/// n-point Gauss rule for the weight (1-x)^alpha (1+x)^beta on [-1, 1],
/// by Golub-Welsch. Results are cached.
const Rule1D& gauss_jacobi(int n, double alpha, double beta);
const Rule1D& gauss_legendre(int n);
Rule1D gauss_legendre(int n, double a, double b);

/// Rule on [a, b] for integrands behaving like (x - a)^gamma near a. The
/// weights absorb the singular factor, so the caller passes the full integrand.
Rule1D singular_panel(int n, double a, double b, double gamma);

/// Midpoint-shifted periodic trapezoid rule with n nodes on [start, start + period).
Rule1D periodic_trapezoid(int n, double start = 0.0,
                          double period = 2.0 * 3.14159265358979323846);

/// Rule on [0, L] for integrands ~ t^gamma at 0: geometric panels
/// [L r^{k+1}, L r^k], k < depth, Gauss-Legendre of the given order, and an
/// innermost Gauss-Jacobi panel [0, L r^depth].
Rule1D graded_rule(double L, double gamma, int order, int depth, double ratio = 0.5);

/// Rule on [T, inf) for integrands ~ t^{-1-p}, through u = T/t and a graded
/// rule toward u = 0.
Rule1D tail_rule(double T, double p, int order, int depth);

/// Depth of a geometric grading that shrinks the innermost panel below tol.
int grading_depth(double tol, double ratio = 0.5);

/// Global adaptive Gauss-Kronrod (7/15) integration on [a, b].
Estimate adaptive_integrate(const std::function<double(double)>& f, double a, double b,
                            const Tolerance& tol, int max_intervals = 2000);

// ---------------------------------------------------------------------------
// Triangles.

/// Rule on the reference triangle {(u,v): u,v >= 0, u+v <= 1}; weights sum to 1/2.
struct TriangleRule {
  std::vector<std::array<double, 2>> uv;
  std::vector<double> w;
  int size() const { return static_cast<int>(w.size()); }
};

/// Collapsed (Duffy) tensor Gauss rule with n points per direction; exact for
/// polynomials of degree 2n - 1.
const TriangleRule& triangle_gauss(int n);
/// Edge-midpoint rule, exact for quadratics.
const TriangleRule& triangle_midpoint();

using Tri = std::array<Point, 3>;

inline double tri_area(const Tri& t) {
  return 0.5 * std::abs((t[1] - t[0]).x() * (t[2] - t[0]).y() -
                        (t[1] - t[0]).y() * (t[2] - t[0]).x());
}

inline Point tri_map(const Tri& t, const std::array<double, 2>& uv) {
  return t[0] + uv[0] * (t[1] - t[0]) + uv[1] * (t[2] - t[0]);
}

/// Distance between two triangles (zero if they touch or overlap).
double tri_distance(const Tri& a, const Tri& b);
double tri_diameter(const Tri& t);

/// Clips a convex polygon against the counter-clockwise triangle t.
/// Returns the number of vertices written to out (capacity 9).
int clip_to_triangle(const Point* poly, int n, const Tri& t, Point* out);

/// Quadrature rule in polar relative coordinates for the pair integral
///   int_T int_{T'} F(x, y) dy dx,   z = y - x = r (cos th, sin th),
/// for F(x, x + z) ~ |z|^beta near the diagonal (beta > -2). Angular sectors
/// are split at the directions along which the clipped intersection
/// T cap (T' - z) changes combinatorially; radial panels are split at the
/// vertex/edge events. The innermost panel uses a Gauss-Jacobi rule with the
/// weight r^{beta + 1}, later panels Gauss-Legendre or, when long relative to
/// their distance from the origin, a logarithmic substitution.
/// For every node visit(x, z, w) is called, sum w F(x, x + z) approximating
/// the integral. The inner rule on each fan triangle is the edge-midpoint rule
/// (inner_degree 2) or a collapsed Gauss rule.
struct PolarPairOptions {
  int angular_order = 8;
  int radial_order = 6;
  int first_panel_order = 4;
  int inner_points = 0;  // 0: edge midpoints, otherwise Gauss points per direction
};

template <class Visit>
void polar_pair_rule(const Tri& T, const Tri& Tp, double beta, const PolarPairOptions& opt,
                     Visit&& visit);

/// Pair rule for separated triangles: tensor product of triangle rules,
/// refined by uniform subdivision until each sub-pair is separated by at
/// least `separation` times its diameter.
template <class Visit>
void tensor_pair_rule(const Tri& T, const Tri& Tp, int n, double separation, int max_level,
                      Visit&& visit);

// ---------------------------------------------------------------------------
// Exterior domains.

struct ExteriorNode {
  Point x;
  double w;
  double t;      // ray offset from the boundary
  double theta;  // polar angle about the domain center
};

enum class TailMode {
  kCertifiedBound,  // integrate inside B_R, bound the rest by the envelope
  kMapped,          // integrate the tail through the map u = T/t
};

struct ExteriorRuleOptions {
  double boundary_exponent = 0.0;  // integrand ~ t^gamma at the boundary
  double tail_exponent = 1.0;      // integrand ~ |x|^{-d-p}
  double collar = 1.0;             // width of the graded inner layer
  double truncation_radius = std::numeric_limits<double>::infinity();
  int order = 8;
  int depth = 24;
  int n_theta = 64;
};

/// Tensor rule over the exterior in coordinates x = c + (r(th) + t) e(th),
/// dx = (r(th) + t) dt dth. With a finite truncation radius the rule covers
/// only the part inside B_R.
std::vector<ExteriorNode> exterior_rule(const Domain& domain, const ExteriorRuleOptions& opt);

struct ExteriorIntegral {
  double envelope_constant = 1.0;  // |f(x)| <= M d_x^{-d-p} far away
  double tail_exponent = 1.0;      // p
  double boundary_exponent = 0.0;  // f ~ d_x^gamma at the boundary
  double split_radius = 8.0;       // R
  TailMode mode = TailMode::kCertifiedBound;
};

/// Integral of f over the complement of the domain. The error estimate is the
/// difference of two refinement levels plus, in certified mode, the envelope
/// bound of the part outside B_R. Throws when the envelope fails at sampled
/// far points.
Estimate integrate_exterior(const std::function<double(Point)>& f, const Domain& domain,
                            const ExteriorIntegral& spec, const Tolerance& tol);

/// Bound of int_{|x-c|>R} M d_x^{-2-p} dx using d_x >= |x-c| - max_profile.
double exterior_tail_bound(const Domain& domain, double M, double p, double R);

/// Rule on the exterior collar {0 < t < width} graded toward the boundary
/// for the weight (1-s) d_x^{-s}. Throws when the two refinement levels of
/// the collar measure disagree by more than tol.
std::vector<ExteriorNode> graded_boundary_quadrature(const Domain& domain, double s,
                                                     double width, int n_theta,
                                                     double tol = 1e-10);

/// Periodic double integral over [0, 2pi)^2 of F(a, b), bounded with a kink
/// on the diagonal, by the product midpoint rule in (a, b - a) with the
/// difference variable offset from zero. Two-level error estimate.
Estimate periodic_double_integral(const std::function<double(double, double)>& F, int n);

// ---------------------------------------------------------------------------
// Template implementations.

namespace detail {

inline double cross(const Point& a, const Point& b) { return a.x() * b.y() - a.y() * b.x(); }

template <class Visit>
void integrate_polygon(const Point* poly, int n, const TriangleRule* rule, double scale,
                       const Point& z, Visit& visit) {
  if (n < 3) return;
  for (int k = 1; k + 1 < n; ++k) {
    const Point& a = poly[0];
    const Point& b = poly[k];
    const Point& c = poly[k + 1];
    const double area = 0.5 * cross(b - a, c - a);
    if (area <= 0.0) continue;
    if (rule == nullptr) {
      const double w = scale * area / 3.0;
      visit(Point(0.5 * (a + b)), z, w);
      visit(Point(0.5 * (b + c)), z, w);
      visit(Point(0.5 * (c + a)), z, w);
    } else {
      for (int q = 0; q < rule->size(); ++q) {
        const Point x = a + rule->uv[q][0] * (b - a) + rule->uv[q][1] * (c - a);
        visit(x, z, scale * 2.0 * area * rule->w[q]);
      }
    }
  }
}

inline Tri ccw(Tri t) {
  if (cross(t[1] - t[0], t[2] - t[0]) < 0.0) std::swap(t[1], t[2]);
  return t;
}

}  // namespace detail

template <class Visit>
void polar_pair_rule(const Tri& T_in, const Tri& Tp_in, double beta, const PolarPairOptions& opt,
                     Visit&& visit) {
  constexpr double two_pi = 2.0 * 3.14159265358979323846;
  const Tri T = detail::ccw(T_in);
  const Tri Tp = detail::ccw(Tp_in);
  const TriangleRule* inner = opt.inner_points > 0 ? &triangle_gauss(opt.inner_points) : nullptr;

  // Sector boundaries: directions of vertex differences and edge directions.
  std::vector<double> cuts;
  cuts.reserve(32);
  auto add_dir = [&](const Point& v) {
    if (v.squaredNorm() < 1e-28) return;
    double a = std::atan2(v.y(), v.x());
    if (a < 0.0) a += two_pi;
    cuts.push_back(a);
  };
  double r_cap = 0.0;
  for (const auto& p : T) {
    for (const auto& q : Tp) {
      add_dir(q - p);
      r_cap = std::max(r_cap, (q - p).norm());
    }
  }
  for (int k = 0; k < 3; ++k) {
    const Point e1 = T[(k + 1) % 3] - T[k];
    const Point e2 = Tp[(k + 1) % 3] - Tp[k];
    add_dir(e1);
    add_dir(-e1);
    add_dir(e2);
    add_dir(-e2);
  }
  cuts.push_back(0.0);
  std::sort(cuts.begin(), cuts.end());
  // Events at a shared vertex come out as rounding noise rather than 0.
  const double r_min = 1e-12 * r_cap;
  cuts.push_back(two_pi);

  // Edge normals (unnormalized) and anchor points for event computation.
  std::array<Point, 3> nT, nTp;
  for (int k = 0; k < 3; ++k) {
    const Point e = T[(k + 1) % 3] - T[k];
    nT[k] = Point(e.y(), -e.x());
    const Point f = Tp[(k + 1) % 3] - Tp[k];
    nTp[k] = Point(f.y(), -f.x());
  }

  const Rule1D& gth = gauss_legendre(opt.angular_order);
  const Rule1D& grad = gauss_legendre(opt.radial_order);
  const double gamma = beta + 1.0;
  const Rule1D& gj = gauss_jacobi(opt.first_panel_order, 0.0, gamma);

  Point shifted[3];
  Point clipped[9];
  std::array<double, 24> events;

  auto radial_point = [&](const Point& e, double r, double wr) {
    const Point z = r * e;
    for (int k = 0; k < 3; ++k) shifted[k] = Tp[k] - z;
    const int m = clip_to_triangle(shifted, 3, T, clipped);
    detail::integrate_polygon(clipped, m, inner, wr, z, visit);
  };

  for (size_t sct = 0; sct + 1 < cuts.size(); ++sct) {
    const double a0 = cuts[sct], a1 = cuts[sct + 1];
    if (a1 - a0 < 1e-14) continue;
    const double half = 0.5 * (a1 - a0), mid = 0.5 * (a1 + a0);
    for (int qa = 0; qa < gth.size(); ++qa) {
      const double th = mid + half * gth.x[qa];
      const double wth = half * gth.w[qa];
      const Point e(std::cos(th), std::sin(th));
      int ne = 0;
      events[ne++] = 0.0;
      // Vertex of T on an edge line of T' - r e, and vice versa.
      for (int i = 0; i < 3; ++i) {
        for (int k = 0; k < 3; ++k) {
          const double den1 = nTp[k].dot(e);
          if (std::abs(den1) > 1e-14) {
            const double r = nTp[k].dot(Tp[k] - T[i]) / den1;
            if (r > r_min && r < r_cap) events[ne++] = r;
          }
          const double den2 = nT[k].dot(e);
          if (std::abs(den2) > 1e-14) {
            const double r = nT[k].dot(Tp[i] - T[k]) / den2;
            if (r > r_min && r < r_cap) events[ne++] = r;
          }
        }
      }
      events[ne++] = r_cap;
      std::sort(events.begin(), events.begin() + ne);
      for (int p = 0; p + 1 < ne; ++p) {
        const double ra = events[p], rb = events[p + 1];
        if (rb - ra <= 1e-14 * r_cap) continue;
        if (ra == 0.0) {
          // Weight r^gamma on [0, rb]; node weights carry r^{-gamma} r.
          const double scale = std::pow(0.5 * rb, gamma + 1.0);
          for (int q = 0; q < gj.size(); ++q) {
            const double r = 0.5 * rb * (1.0 + gj.x[q]);
            radial_point(e, r, wth * scale * gj.w[q] * r * std::pow(r, -gamma));
          }
        } else {
          // Gauss panels with end ratio at most 4.
          const int n_pan = std::max(1, static_cast<int>(std::ceil(std::log(rb / ra) / std::log(4.0))));
          const double ratio = std::pow(rb / ra, 1.0 / n_pan);
          double pa = ra;
          for (int k = 0; k < n_pan; ++k) {
            const double pb = k + 1 == n_pan ? rb : pa * ratio;
            const double h = 0.5 * (pb - pa), c = 0.5 * (pb + pa);
            for (int q = 0; q < grad.size(); ++q) {
              const double r = c + h * grad.x[q];
              radial_point(e, r, wth * h * grad.w[q] * r);
            }
            pa = pb;
          }
        }
      }
    }
  }
}

template <class Visit>
void tensor_pair_rule(const Tri& T, const Tri& Tp, int n, double separation, int max_level,
                      Visit&& visit) {
  const double dist = tri_distance(T, Tp);
  const double diam = std::max(tri_diameter(T), tri_diameter(Tp));
  if (dist >= separation * diam || max_level <= 0) {
    const TriangleRule& rule = triangle_gauss(n);
    const double a = 2.0 * tri_area(T), b = 2.0 * tri_area(Tp);
    for (int i = 0; i < rule.size(); ++i) {
      const Point x = tri_map(T, rule.uv[i]);
      for (int j = 0; j < rule.size(); ++j) {
        const Point y = tri_map(Tp, rule.uv[j]);
        visit(x, Point(y - x), a * b * rule.w[i] * rule.w[j]);
      }
    }
    return;
  }
  auto split = [](const Tri& t) {
    const Point m01 = 0.5 * (t[0] + t[1]), m12 = 0.5 * (t[1] + t[2]), m20 = 0.5 * (t[2] + t[0]);
    return std::array<Tri, 4>{Tri{t[0], m01, m20}, Tri{m01, t[1], m12}, Tri{m20, m12, t[2]},
                              Tri{m01, m12, m20}};
  };
  const bool split_first = tri_diameter(T) >= tri_diameter(Tp);
  if (split_first) {
    for (const Tri& c : split(T)) tensor_pair_rule(c, Tp, n, separation, max_level - 1, visit);
  } else {
    for (const Tri& c : split(Tp)) tensor_pair_rule(T, c, n, separation, max_level - 1, visit);
  }
}

}  // namespace fractrace
