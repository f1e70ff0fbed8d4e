#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "fractrace/geometry.hpp"

namespace fractrace {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Ring {
  std::vector<int> ids;
  std::vector<double> angles;  // increasing in [offset, offset + 2pi)
};

double signed_area(const Point& a, const Point& b, const Point& c) {
  return 0.5 * ((b - a).x() * (c - a).y() - (b - a).y() * (c - a).x());
}

void add_triangle(Mesh& mesh, int a, int b, int c, Region region) {
  const auto& v = mesh.vertices;
  if (signed_area(v[a], v[b], v[c]) < 0.0) std::swap(b, c);
  mesh.triangles.push_back({{a, b, c}, region});
}

// Triangulates the annular strip between two closed rings by merging their
// angle sequences.
void stitch(Mesh& mesh, const Ring& inner, const Ring& outer, Region region) {
  const int n1 = static_cast<int>(inner.ids.size());
  const int n2 = static_cast<int>(outer.ids.size());
  auto wrap = [](int k, int n) { return ((k % n) + n) % n; };
  auto angle = [&](const Ring& r, int k) {
    const int n = static_cast<int>(r.angles.size());
    const int q = (k >= 0) ? k / n : -((-k + n - 1) / n);
    return r.angles[wrap(k, n)] + kTwoPi * q;
  };
  // Outer start: last node at or before the first inner node.
  int j0 = -n2;
  while (angle(outer, j0 + 1) <= angle(inner, 0)) ++j0;
  int i = 0, j = j0;
  while (i < n1 || j < j0 + n2) {
    const bool advance_inner =
        (j >= j0 + n2) || (i < n1 && angle(inner, i + 1) < angle(outer, j + 1));
    if (advance_inner) {
      add_triangle(mesh, inner.ids[wrap(i, n1)], inner.ids[wrap(i + 1, n1)],
                   outer.ids[wrap(j, n2)], region);
      ++i;
    } else {
      add_triangle(mesh, inner.ids[wrap(i, n1)], outer.ids[wrap(j + 1, n2)],
                   outer.ids[wrap(j, n2)], region);
      ++j;
    }
  }
}

Ring make_ring(Mesh& mesh, int n, double offset, const auto& point_at) {
  Ring ring;
  for (int i = 0; i < n; ++i) {
    const double t = kTwoPi * (i + offset) / n;
    ring.ids.push_back(static_cast<int>(mesh.vertices.size()));
    ring.angles.push_back(t);
    mesh.vertices.push_back(point_at(t));
  }
  return ring;
}

}  // namespace

double Mesh::triangle_area(int t) const {
  const auto& tri = triangles[t].v;
  return std::abs(signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]));
}

Point Mesh::centroid(int t) const {
  const auto& tri = triangles[t].v;
  return (vertices[tri[0]] + vertices[tri[1]] + vertices[tri[2]]) / 3.0;
}

double Mesh::region_area(Region region) const {
  double a = 0.0;
  for (int t = 0; t < static_cast<int>(triangles.size()); ++t) {
    if (triangles[t].region == region) a += triangle_area(t);
  }
  return a;
}

int Mesh::count(Region region) const {
  return static_cast<int>(std::count_if(triangles.begin(), triangles.end(),
                                        [&](const Triangle& t) { return t.region == region; }));
}

std::vector<bool> Mesh::truncation_vertices() const {
  std::vector<bool> on(vertices.size(), false);
  for (const auto& e : boundary_edges) {
    if (e.kind == BoundaryKind::kTruncation) on[e.a] = on[e.b] = true;
  }
  return on;
}

std::vector<bool> Mesh::interior_vertices() const {
  std::vector<bool> in(vertices.size(), false);
  for (const auto& t : triangles) {
    if (t.region == Region::kInterior) {
      for (int v : t.v) in[v] = true;
    }
  }
  return in;
}

double Mesh::truncation_exit_distance(Point x, Point dir) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : boundary_edges) {
    if (e.kind != BoundaryKind::kTruncation) continue;
    const Point a = vertices[e.a], b = vertices[e.b];
    const Point ab = b - a;
    const double den = dir.x() * ab.y() - dir.y() * ab.x();
    if (den == 0.0) continue;
    const Point ax = a - x;
    const double r = (ax.x() * ab.y() - ax.y() * ab.x()) / den;
    const double u = (ax.x() * dir.y() - ax.y() * dir.x()) / den;
    if (r > 0.0 && u >= -1e-14 && u <= 1.0 + 1e-14) best = std::min(best, r);
  }
  return best;
}

Mesh build_mesh(const Domain& domain, double truncation_radius, double h,
                const MeshOptions& options) {
  const double R = truncation_radius;
  if (!(R > domain.diameter())) {
    throw std::invalid_argument("truncation radius must exceed the domain diameter");
  }
  if (!(h > 0.0) || !(h < 0.5 * domain.ball_radius())) {
    throw std::invalid_argument("mesh size must satisfy 0 < h < ball_radius/2");
  }
  const Point c = domain.center();
  Mesh mesh;
  mesh.center = c;
  mesh.truncation_radius = R;
  const double length = domain.boundary_length();

  // Interior rings at scaled copies of the boundary, plus a center fan.
  const int m = std::max(2, static_cast<int>(std::ceil(domain.max_profile() / h)));
  mesh.vertices.push_back(c);
  std::vector<Ring> rings;
  for (int k = 1; k <= m; ++k) {
    const double lam = static_cast<double>(k) / m;
    const int n = std::max(6, static_cast<int>(std::lround(lam * length / h)));
    const double offset = (k % 2) ? 0.0 : 0.5;
    rings.push_back(make_ring(mesh, n, offset, [&](double t) {
      return k == m ? domain.boundary_point(t) : Point(c + lam * domain.profile(t) * Point(std::cos(t), std::sin(t)));
    }));
  }
  {
    const Ring& first = rings.front();
    const int n = static_cast<int>(first.ids.size());
    for (int i = 0; i < n; ++i) {
      add_triangle(mesh, 0, first.ids[i], first.ids[(i + 1) % n], Region::kInterior);
    }
  }
  for (int k = 0; k + 1 < m; ++k) stitch(mesh, rings[k], rings[k + 1], Region::kInterior);

  // Exterior rings: distance steps h(1 + grading t) from the boundary.
  const double gap = R - domain.base_radius();
  std::vector<double> steps{0.0};
  while (steps.back() < gap) {
    steps.push_back(steps.back() + h * (1.0 + options.exterior_grading * steps.back()));
  }
  if (steps.size() > 2 && (gap - steps[steps.size() - 2]) <
                              0.5 * (steps.back() - steps[steps.size() - 2])) {
    steps.erase(steps.end() - 2);
  }
  const double scale = gap / steps.back();
  for (double& t : steps) t *= scale;

  Ring prev = rings.back();
  const int n_ext = static_cast<int>(steps.size());
  for (int j = 1; j < n_ext; ++j) {
    const double mu = steps[j] / gap;
    const double t = steps[j];
    const double perimeter = (1.0 - mu) * length + mu * kTwoPi * R;
    const double spacing = h * (1.0 + options.exterior_grading * t);
    const int n = std::max(6, static_cast<int>(std::lround(perimeter / spacing)));
    const double offset = ((m + j) % 2) ? 0.0 : 0.5;
    Ring ring = make_ring(mesh, n, offset, [&](double a) {
      const Point e(std::cos(a), std::sin(a));
      const double r = j == n_ext - 1 ? R : (1.0 - mu) * domain.profile(a) + mu * R;
      return Point(c + r * e);
    });
    stitch(mesh, prev, ring, Region::kExteriorCollar);
    prev = std::move(ring);
  }

  const Ring& boundary = rings.back();
  const int nb = static_cast<int>(boundary.ids.size());
  for (int i = 0; i < nb; ++i) {
    mesh.boundary_edges.push_back(
        {boundary.ids[i], boundary.ids[(i + 1) % nb], BoundaryKind::kDomainBoundary});
  }
  const int nt = static_cast<int>(prev.ids.size());
  for (int i = 0; i < nt; ++i) {
    mesh.boundary_edges.push_back(
        {prev.ids[i], prev.ids[(i + 1) % nt], BoundaryKind::kTruncation});
  }
  return mesh;
}

void write_mesh(std::ostream& out, const Mesh& mesh) {
  out.precision(17);
  out << "# truncation_radius " << mesh.truncation_radius << "\n";
  out << "# center " << mesh.center.x() << " " << mesh.center.y() << "\n";
  for (const auto& v : mesh.vertices) out << "v " << v.x() << " " << v.y() << "\n";
  for (const auto& t : mesh.triangles) {
    out << "t " << t.v[0] << " " << t.v[1] << " " << t.v[2] << " "
        << static_cast<int>(t.region) << "\n";
  }
  for (const auto& e : mesh.boundary_edges) {
    out << "b " << e.a << " " << e.b << " " << static_cast<int>(e.kind) << "\n";
  }
}

Mesh read_mesh(std::istream& in) {
  Mesh mesh;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& what) {
    throw std::runtime_error("mesh line " + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "#") {
      std::string key;
      ls >> key;
      if (key == "truncation_radius") ls >> mesh.truncation_radius;
      if (key == "center") ls >> mesh.center.x() >> mesh.center.y();
    } else if (tag == "v") {
      double x, y;
      if (!(ls >> x >> y)) fail("bad vertex");
      mesh.vertices.emplace_back(x, y);
    } else if (tag == "t") {
      int a, b, c, r;
      if (!(ls >> a >> b >> c >> r) || r < 0 || r > 1) fail("bad triangle");
      mesh.triangles.push_back({{a, b, c}, static_cast<Region>(r)});
    } else if (tag == "b") {
      int a, b, k;
      if (!(ls >> a >> b >> k) || k < 0 || k > 1) fail("bad boundary edge");
      mesh.boundary_edges.push_back({a, b, static_cast<BoundaryKind>(k)});
    } else {
      fail("unknown record '" + tag + "'");
    }
  }
  const int nv = static_cast<int>(mesh.vertices.size());
  auto valid = [nv](int i) { return i >= 0 && i < nv; };
  for (const auto& t : mesh.triangles) {
    for (int v : t.v) {
      if (!valid(v)) throw std::runtime_error("triangle references missing vertex");
    }
  }
  for (const auto& e : mesh.boundary_edges) {
    if (!valid(e.a) || !valid(e.b)) throw std::runtime_error("edge references missing vertex");
  }
  return mesh;
}

PointLocator::PointLocator(const Mesh& mesh, int cells_per_side) : mesh_(&mesh) {
  Point lo = mesh.vertices.front(), hi = lo;
  for (const auto& v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  if (cells_per_side <= 0) {
    cells_per_side = std::max(1, static_cast<int>(std::sqrt(mesh.triangles.size() / 2.0)));
  }
  n_ = cells_per_side;
  const double span = std::max(hi.x() - lo.x(), hi.y() - lo.y()) * (1.0 + 1e-9) + 1e-12;
  cell_ = span / n_;
  lo_ = lo;
  buckets_.assign(static_cast<size_t>(n_) * n_, {});
  for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
    Point tlo = mesh.vertices[mesh.triangles[t].v[0]], thi = tlo;
    for (int v : mesh.triangles[t].v) {
      tlo = tlo.cwiseMin(mesh.vertices[v]);
      thi = thi.cwiseMax(mesh.vertices[v]);
    }
    const int i0 = std::clamp(static_cast<int>((tlo.x() - lo_.x()) / cell_), 0, n_ - 1);
    const int i1 = std::clamp(static_cast<int>((thi.x() - lo_.x()) / cell_), 0, n_ - 1);
    const int j0 = std::clamp(static_cast<int>((tlo.y() - lo_.y()) / cell_), 0, n_ - 1);
    const int j1 = std::clamp(static_cast<int>((thi.y() - lo_.y()) / cell_), 0, n_ - 1);
    for (int i = i0; i <= i1; ++i) {
      for (int j = j0; j <= j1; ++j) buckets_[static_cast<size_t>(i) * n_ + j].push_back(t);
    }
  }
}

int PointLocator::locate(Point x, std::array<double, 3>* bary) const {
  const int i = static_cast<int>(std::floor((x.x() - lo_.x()) / cell_));
  const int j = static_cast<int>(std::floor((x.y() - lo_.y()) / cell_));
  if (i < 0 || j < 0 || i >= n_ || j >= n_) return -1;
  int best = -1;
  double best_min = -std::numeric_limits<double>::infinity();
  std::array<double, 3> best_bary{};
  for (int t : buckets_[static_cast<size_t>(i) * n_ + j]) {
    const auto& v = mesh_->triangles[t].v;
    const auto b = barycentric(mesh_->vertices[v[0]], mesh_->vertices[v[1]],
                               mesh_->vertices[v[2]], x);
    const double mn = std::min({b[0], b[1], b[2]});
    if (mn > best_min) {
      best_min = mn;
      best = t;
      best_bary = b;
    }
  }
  if (best < 0 || best_min < -1e-10) return -1;
  if (bary) *bary = best_bary;
  return best;
}

}  // namespace fractrace
