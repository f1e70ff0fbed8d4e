#include "fractrace/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace fractrace {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Point unit(double angle) { return {std::cos(angle), std::sin(angle)}; }

double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  return a < 0.0 ? a + kTwoPi : a;
}

}  // namespace

Domain Domain::disk(Point center, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("disk radius must be positive");
  Domain d;
  d.center_ = center;
  d.base_radius_ = radius;
  d.finalize();
  return d;
}

Domain Domain::star_shaped(Point center, double base_radius,
                           std::vector<FourierMode> modes) {
  if (!(base_radius > 0.0)) throw std::invalid_argument("base radius must be positive");
  for (const auto& m : modes) {
    if (m.k < 1) throw std::invalid_argument("Fourier modes need k >= 1");
  }
  Domain d;
  d.center_ = center;
  d.base_radius_ = base_radius;
  d.modes_ = std::move(modes);
  d.finalize();
  if (d.min_profile_ <= 0.0) throw std::invalid_argument("radial profile must stay positive");
  return d;
}

void Domain::finalize() {
  if (is_disk()) {
    diameter_ = 2.0 * base_radius_;
    ball_radius_ = base_radius_;
    boundary_length_ = kTwoPi * base_radius_;
    area_ = std::numbers::pi * base_radius_ * base_radius_;
    max_profile_ = min_profile_ = base_radius_;
    return;
  }
  constexpr int n = 2048;
  std::vector<Point> pts(n);
  double length = 0.0, area = 0.0, max_curv = 0.0;
  max_profile_ = 0.0;
  min_profile_ = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double t = kTwoPi * i / n;
    const double r = profile(t), r1 = profile_d1(t), r2 = profile_d2(t);
    pts[i] = boundary_point(t);
    length += std::hypot(r, r1) * kTwoPi / n;
    area += 0.5 * r * r * kTwoPi / n;
    max_profile_ = std::max(max_profile_, r);
    min_profile_ = std::min(min_profile_, r);
    const double curv =
        (r * r + 2.0 * r1 * r1 - r * r2) / std::pow(r * r + r1 * r1, 1.5);
    max_curv = std::max(max_curv, std::abs(curv));
  }
  boundary_length_ = length;
  area_ = area;
  double diam = 0.0;
  for (int i = 0; i < n; i += 4) {
    for (int j = i + 4; j < n; j += 4) diam = std::max(diam, (pts[i] - pts[j]).norm());
  }
  diameter_ = diam;
  // Curvature bound; adequate for the mildly perturbed disks supported here.
  ball_radius_ = std::min(1.0 / max_curv, min_profile_);
}

std::string Domain::descriptor() const {
  std::ostringstream os;
  if (is_disk()) {
    os << "disk(c=(" << center_.x() << ";" << center_.y() << "),R=" << base_radius_ << ")";
  } else {
    os << "star(c=(" << center_.x() << ";" << center_.y() << "),r0=" << base_radius_;
    for (const auto& m : modes_) os << ",k" << m.k << "=" << m.cos_coeff << "/" << m.sin_coeff;
    os << ")";
  }
  return os.str();
}

double Domain::profile(double angle) const {
  double v = 1.0;
  for (const auto& m : modes_) {
    v += m.cos_coeff * std::cos(m.k * angle) + m.sin_coeff * std::sin(m.k * angle);
  }
  return base_radius_ * v;
}

double Domain::profile_d1(double angle) const {
  double v = 0.0;
  for (const auto& m : modes_) {
    v += m.k * (-m.cos_coeff * std::sin(m.k * angle) + m.sin_coeff * std::cos(m.k * angle));
  }
  return base_radius_ * v;
}

double Domain::profile_d2(double angle) const {
  double v = 0.0;
  for (const auto& m : modes_) {
    v -= m.k * m.k * (m.cos_coeff * std::cos(m.k * angle) + m.sin_coeff * std::sin(m.k * angle));
  }
  return base_radius_ * v;
}

Point Domain::boundary_point(double angle) const {
  return center_ + profile(angle) * unit(angle);
}

Point Domain::boundary_tangent(double angle) const {
  const Point e = unit(angle);
  const Point e_perp(-e.y(), e.x());
  return profile_d1(angle) * e + profile(angle) * e_perp;
}

Point Domain::outer_normal_at_angle(double angle) const {
  const Point t = boundary_tangent(angle);
  return Point(t.y(), -t.x()).normalized();
}

double Domain::polar_angle(Point x) const {
  const Point v = x - center_;
  if (v.squaredNorm() == 0.0) return 0.0;
  return wrap_angle(std::atan2(v.y(), v.x()));
}

double Domain::radial_offset(Point x) const {
  return (x - center_).norm() - profile(polar_angle(x));
}

bool Domain::contains(Point x) const { return radial_offset(x) < 0.0; }

double Domain::nearest_boundary_angle(Point x) const {
  if (is_disk()) return polar_angle(x);  // tie-break at the center: angle 0
  // Coarse scan then Newton on f(t) = |x - p(t)|^2.
  constexpr int n = 720;
  std::array<std::pair<double, double>, 3> best;
  best.fill({std::numeric_limits<double>::infinity(), 0.0});
  for (int i = 0; i < n; ++i) {
    const double t = kTwoPi * i / n;
    const double f = (x - boundary_point(t)).squaredNorm();
    if (f < best[2].first) {
      best[2] = {f, t};
      std::sort(best.begin(), best.end());
    }
  }
  double best_f = std::numeric_limits<double>::infinity(), best_t = 0.0;
  for (auto [f0, t] : best) {
    for (int it = 0; it < 50; ++it) {
      const Point p = boundary_point(t);
      const Point p1 = boundary_tangent(t);
      const Point e = unit(t), e_perp(-e.y(), e.x());
      const double r = profile(t), r1 = profile_d1(t), r2 = profile_d2(t);
      const Point p2 = (r2 - r) * e + 2.0 * r1 * e_perp;
      const Point diff = x - p;
      const double g = -2.0 * diff.dot(p1);
      const double h = 2.0 * (p1.dot(p1) - diff.dot(p2));
      double step = (h > 0.0) ? g / h : 0.0;
      step = std::clamp(step, -0.05, 0.05);
      t -= step;
      if (std::abs(step) < 1e-15) break;
    }
    const double f = (x - boundary_point(t)).squaredNorm();
    if (f < best_f) {
      best_f = f;
      best_t = t;
    }
  }
  return wrap_angle(best_t);
}

Point Domain::nearest_boundary_point(Point x) const {
  if (is_disk()) {
    const Point v = x - center_;
    const double n = v.norm();
    if (n == 0.0) return center_ + Point(base_radius_, 0.0);
    return center_ + base_radius_ * (v / n);
  }
  return boundary_point(nearest_boundary_angle(x));
}

double Domain::distance(Point x) const {
  if (is_disk()) return std::abs((x - center_).norm() - base_radius_);
  return (x - nearest_boundary_point(x)).norm();
}

Point Domain::outer_normal(Point on_boundary) const {
  if (is_disk()) {
    const Point v = on_boundary - center_;
    return v.norm() == 0.0 ? Point(1.0, 0.0) : Point(v.normalized());
  }
  return outer_normal_at_angle(nearest_boundary_angle(on_boundary));
}

std::vector<double> Domain::ray_crossings(Point x, Point dir, double r_max) const {
  std::vector<double> out;
  if (is_disk()) {
    const Point v = x - center_;
    const double b = v.dot(dir);
    const double c = v.squaredNorm() - base_radius_ * base_radius_;
    const double disc = b * b - c;
    if (disc <= 0.0) return out;
    const double sq = std::sqrt(disc);
    for (double r : {-b - sq, -b + sq}) {
      if (r > 0.0 && r < r_max) out.push_back(r);
    }
    return out;
  }
  const double step = 0.01 * min_profile_;
  const int n = std::max(8, static_cast<int>(std::ceil(r_max / step)));
  const double dr = r_max / n;
  double prev = radial_offset(x);
  for (int i = 1; i <= n; ++i) {
    double a = (i - 1) * dr, b = i * dr;
    const double fb = radial_offset(x + b * dir);
    if ((prev < 0.0) != (fb < 0.0)) {
      double fa = prev;
      for (int it = 0; it < 100 && b - a > 1e-15; ++it) {
        const double m = 0.5 * (a + b);
        const double fm = radial_offset(x + m * dir);
        if ((fa < 0.0) == (fm < 0.0)) {
          a = m;
          fa = fm;
        } else {
          b = m;
        }
      }
      const double root = 0.5 * (a + b);
      if (root > 0.0) out.push_back(root);
    }
    prev = fb;
  }
  return out;
}

double Domain::exit_distance(Point x, Point dir) const {
  const double r_max = (x - center_).norm() + max_profile_ + 1.0;
  const auto roots = ray_crossings(x, dir, r_max);
  return roots.empty() ? std::numeric_limits<double>::infinity() : roots.front();
}

double BoundaryQuadrature::total_weight() const {
  double w = 0.0;
  for (const auto& n : nodes) w += n.weight;
  return w;
}

BoundaryQuadrature boundary_quadrature(const Domain& domain, int n) {
  if (n < 8) throw std::invalid_argument("boundary_quadrature needs n >= 8");
  BoundaryQuadrature q;
  q.nodes.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double t = kTwoPi * i / n;
    q.nodes.push_back({domain.boundary_point(t),
                       domain.boundary_tangent(t).norm() * kTwoPi / n,
                       domain.outer_normal_at_angle(t), t});
  }
  return q;
}

std::array<double, 3> barycentric(const Point& a, const Point& b, const Point& c,
                                  const Point& x) {
  const double det = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
  const double l1 = ((b - x).x() * (c - x).y() - (b - x).y() * (c - x).x()) / det;
  const double l2 = ((c - x).x() * (a - x).y() - (c - x).y() * (a - x).x()) / det;
  return {l1, l2, 1.0 - l1 - l2};
}

}  // namespace fractrace
