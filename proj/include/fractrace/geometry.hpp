#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fractrace {

using Point = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// One term a*cos(k t) + b*sin(k t) of a radial boundary profile.
struct FourierMode {
  int k = 0;
  double cos_coeff = 0.0;
  double sin_coeff = 0.0;
};

/// Bounded C^{1,1} region in the plane.
///
/// Two shapes are supported: disks (all queries in closed form) and smooth
/// star-shaped regions r(t) = r0 * (1 + sum_k a_k cos(kt) + b_k sin(kt))
/// around a center, where nearest-point queries use Newton's method on the
/// boundary parametrisation. Distances are unsigned: d_x >= 0 everywhere and
/// d_x == 0 exactly on the boundary.
class Domain {
 public:
  static Domain disk(Point center = Point::Zero(), double radius = 1.0);
  static Domain star_shaped(Point center, double base_radius,
                            std::vector<FourierMode> modes);

  int dimension() const { return 2; }
  bool is_disk() const { return modes_.empty(); }
  const Point& center() const { return center_; }
  /// Disk radius, or the base radius r0 of a star-shaped profile.
  double base_radius() const { return base_radius_; }
  double diameter() const { return diameter_; }
  /// Common radius of the uniform interior and exterior ball condition.
  double ball_radius() const { return ball_radius_; }
  double boundary_length() const { return boundary_length_; }
  double area() const { return area_; }
  std::string descriptor() const;

  /// Boundary profile r(t) and its first two derivatives in the polar angle.
  double profile(double angle) const;
  double profile_d1(double angle) const;
  double profile_d2(double angle) const;
  double max_profile() const { return max_profile_; }
  double min_profile() const { return min_profile_; }

  Point boundary_point(double angle) const;
  /// Derivative of boundary_point with respect to the angle.
  Point boundary_tangent(double angle) const;
  Point outer_normal_at_angle(double angle) const;

  double distance(Point x) const;
  Point nearest_boundary_point(Point x) const;
  /// Polar angle (about center) of the nearest boundary point.
  double nearest_boundary_angle(Point x) const;
  Point outer_normal(Point on_boundary) const;
  /// Open interior test.
  bool contains(Point x) const;
  /// Signed offset along the ray through x: |x - c| - r(angle(x)).
  double radial_offset(Point x) const;
  double polar_angle(Point x) const;

  /// Smallest r >= 0 with x + r*dir on the boundary, searching rays that
  /// start inside the domain. Returns +inf when the ray never exits.
  double exit_distance(Point x, Point dir) const;
  /// All boundary crossings of the ray x + r*dir, r in (0, r_max), sorted.
  std::vector<double> ray_crossings(Point x, Point dir, double r_max) const;

 private:
  Domain() = default;
  void finalize();

  Point center_ = Point::Zero();
  double base_radius_ = 1.0;
  std::vector<FourierMode> modes_;
  double diameter_ = 2.0;
  double ball_radius_ = 1.0;
  double boundary_length_ = 0.0;
  double area_ = 0.0;
  double max_profile_ = 1.0;
  double min_profile_ = 1.0;
};

struct BoundaryNode {
  Point point;
  double weight;
  Point normal;
  double angle;
};

/// Composite trapezoidal rule on the boundary curve in the polar angle.
struct BoundaryQuadrature {
  std::vector<BoundaryNode> nodes;
  double total_weight() const;
};

BoundaryQuadrature boundary_quadrature(const Domain& domain, int n);

enum class Region : int { kInterior = 0, kExteriorCollar = 1 };
enum class BoundaryKind : int { kDomainBoundary = 0, kTruncation = 1 };

struct Triangle {
  std::array<int, 3> v;
  Region region;
};

struct BoundaryEdge {
  int a;
  int b;
  BoundaryKind kind;
};

/// Conforming triangulation of B_R(center) split into the domain and the
/// exterior collar. Boundary vertices lie exactly on the domain boundary.
struct Mesh {
  std::vector<Point> vertices;
  std::vector<Triangle> triangles;
  std::vector<BoundaryEdge> boundary_edges;
  Point center = Point::Zero();
  double truncation_radius = 0.0;

  double triangle_area(int t) const;
  Point centroid(int t) const;
  double region_area(Region region) const;
  /// Vertices lying on the truncation circle.
  std::vector<bool> truncation_vertices() const;
  std::vector<bool> interior_vertices() const;
  int count(Region region) const;
  /// Distance from x (inside the truncation polygon) along dir to its edge.
  double truncation_exit_distance(Point x, Point dir) const;
};

struct MeshOptions {
  /// Exterior edge length grows like h * (1 + grading * dist(x, boundary)).
  double exterior_grading = 1.0;
};

/// Ring-based mesher. Rejects R <= diam(domain) + |center offset| and
/// h >= ball_radius / 2.
Mesh build_mesh(const Domain& domain, double truncation_radius, double h,
                const MeshOptions& options = {});

void write_mesh(std::ostream& out, const Mesh& mesh);
Mesh read_mesh(std::istream& in);

/// Uniform-grid bucket search for the triangle containing a point.
class PointLocator {
 public:
  explicit PointLocator(const Mesh& mesh, int cells_per_side = 0);
  /// Index of a containing triangle or -1. Barycentric coordinates on success.
  int locate(Point x, std::array<double, 3>* bary = nullptr) const;

 private:
  const Mesh* mesh_;
  Point lo_;
  double cell_ = 1.0;
  int n_ = 1;
  std::vector<std::vector<int>> buckets_;
};

std::array<double, 3> barycentric(const Point& a, const Point& b,
                                  const Point& c, const Point& x);

}  // namespace fractrace
