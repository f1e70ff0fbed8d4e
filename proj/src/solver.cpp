#include "fractrace/solver.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace fractrace {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Barycentric coordinates through a precomputed affine inverse.
struct Affine {
  Point p0;
  Mat2 inv;

  explicit Affine(const Tri& t) : p0(t[0]) {
    Mat2 m;
    m.col(0) = t[1] - t[0];
    m.col(1) = t[2] - t[0];
    inv = m.inverse();
  }
  std::array<double, 3> operator()(const Point& x) const {
    const Point l = inv * (x - p0);
    return {1.0 - l.x() - l.y(), l.x(), l.y()};
  }
};

// Local matrix of a pair on the union of its vertices.
struct PairBlock {
  std::array<int, 6> vertex{};
  std::array<int, 3> pos_a{}, pos_b{};
  int n = 0;
  Eigen::Matrix<double, 6, 6> L;

  PairBlock(const Mesh& mesh, int a, int b) {
    for (int k = 0; k < 3; ++k) {
      vertex[n] = mesh.triangles[a].v[k];
      pos_a[k] = n++;
    }
    for (int k = 0; k < 3; ++k) {
      const int v = mesh.triangles[b].v[k];
      int p = -1;
      for (int q = 0; q < 3; ++q) {
        if (vertex[q] == v) p = q;
      }
      if (p < 0) {
        vertex[n] = v;
        p = n++;
      }
      pos_b[k] = p;
    }
    L.setZero();
  }
};

template <class Kernel>
void accumulate_pair(const Mesh& mesh, const std::vector<Affine>& maps, const ElementPair& p,
                     const PairRuleOptions& rule, double beta, const Kernel& J, PairBlock& blk) {
  const Affine& A = maps[p.i];
  const Affine& B = maps[p.j];
  blk.L.setZero();
  visit_pair(mesh, p, beta, rule, [&](const Point& x, const Point& y, double w) {
    const auto la = A(x);
    const auto lb = B(y);
    Eigen::Matrix<double, 6, 1> d = Eigen::Matrix<double, 6, 1>::Zero();
    for (int k = 0; k < 3; ++k) {
      d[blk.pos_a[k]] += la[k];
      d[blk.pos_b[k]] -= lb[k];
    }
    const double c = w * J(x, y);
    for (int r = 0; r < blk.n; ++r) {
      const double cr = c * d[r];
      for (int q = r; q < blk.n; ++q) blk.L(r, q) += cr * d[q];
    }
  });
}

void scatter(const PairBlock& blk, double factor, Eigen::MatrixXd& K) {
  for (int r = 0; r < blk.n; ++r) {
    for (int q = r; q < blk.n; ++q) {
      const double v = factor * blk.L(r, q);
      const int i = blk.vertex[r], j = blk.vertex[q];
      K(i, j) += v;
      if (i != j) K(j, i) += v;
    }
  }
}

double domain_edge_length(const Mesh& mesh) {
  double total = 0.0;
  int count = 0;
  for (const auto& e : mesh.boundary_edges) {
    if (e.kind != BoundaryKind::kDomainBoundary) continue;
    total += (mesh.vertices[e.a] - mesh.vertices[e.b]).norm();
    ++count;
  }
  if (count == 0) throw std::invalid_argument("mesh has no domain boundary edges");
  return total / count;
}

void check_mesh(const DiscreteFunction& u) {
  if (u.mesh == nullptr) throw std::invalid_argument("discrete function without a mesh");
}

}  // namespace

// ---------------------------------------------------------------------------

DiscreteFunction::DiscreteFunction(const Mesh& m, Eigen::VectorXd v, bool zero_mean)
    : mesh(&m), values(std::move(v)), mean_zero(zero_mean) {
  if (values.size() != static_cast<Eigen::Index>(m.vertices.size())) {
    throw std::invalid_argument("coefficient count differs from the vertex count");
  }
}

DiscreteFunction DiscreteFunction::interpolate(const Mesh& mesh, const ScalarFn& f) {
  Eigen::VectorXd v(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) v[i] = f(mesh.vertices[i]);
  return DiscreteFunction(mesh, std::move(v));
}

double DiscreteFunction::operator()(Point x, const PointLocator& locator) const {
  check_mesh(*this);
  std::array<double, 3> bary;
  const int t = locator.locate(x, &bary);
  if (t < 0) return 0.0;
  const auto& v = mesh->triangles[t].v;
  return bary[0] * values[v[0]] + bary[1] * values[v[1]] + bary[2] * values[v[2]];
}

double DiscreteFunction::mean_integral() const {
  check_mesh(*this);
  return mean_vector(*mesh).dot(values);
}

void DiscreteFunction::write(std::ostream& out) const {
  std::ostringstream buf;
  buf << std::setprecision(17);
  for (Eigen::Index i = 0; i < values.size(); ++i) buf << "u " << i << ' ' << values[i] << '\n';
  out << buf.str();
}

DiscreteFunction DiscreteFunction::read(std::istream& in, const Mesh& mesh) {
  Eigen::VectorXd v = Eigen::VectorXd::Constant(mesh.vertices.size(), std::nan(""));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    long index;
    double value;
    if (!(ls >> tag >> index >> value) || tag != "u") {
      throw std::invalid_argument("malformed coefficient line: " + line);
    }
    if (index < 0 || index >= v.size()) throw std::invalid_argument("coefficient index out of range");
    v[index] = value;
  }
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::isnan(v[i])) throw std::invalid_argument("missing coefficient " + std::to_string(i));
  }
  return DiscreteFunction(mesh, std::move(v));
}

Mesh restrict_to_interior(const Mesh& mesh) {
  Mesh out;
  out.center = mesh.center;
  out.truncation_radius = 0.0;
  std::vector<int> map(mesh.vertices.size(), -1);
  for (const auto& t : mesh.triangles) {
    if (t.region != Region::kInterior) continue;
    Triangle r{{}, Region::kInterior};
    for (int k = 0; k < 3; ++k) {
      int& m = map[t.v[k]];
      if (m < 0) {
        m = static_cast<int>(out.vertices.size());
        out.vertices.push_back(mesh.vertices[t.v[k]]);
      }
      r.v[k] = m;
    }
    out.triangles.push_back(r);
  }
  for (const auto& e : mesh.boundary_edges) {
    if (e.kind == BoundaryKind::kDomainBoundary) {
      out.boundary_edges.push_back({map[e.a], map[e.b], e.kind});
    }
  }
  return out;
}

Eigen::VectorXd mean_vector(const Mesh& mesh) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(mesh.vertices.size());
  for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
    if (mesh.triangles[t].region != Region::kInterior) continue;
    const double a = mesh.triangle_area(t) / 3.0;
    for (int v : mesh.triangles[t].v) m[v] += a;
  }
  return m;
}

Eigen::MatrixXd assemble_nonlocal_stiffness(const Mesh& mesh, const KernelSpec& J,
                                            const Tolerance& tol, const StiffnessOptions& opt) {
  tol.validate();
  const int nv = static_cast<int>(mesh.vertices.size());
  const int nt = static_cast<int>(mesh.triangles.size());
  std::vector<Affine> maps;
  maps.reserve(nt);
  for (int t = 0; t < nt; ++t) maps.emplace_back(triangle_of(mesh, t));

  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nv, nv);
  const double beta = -2.0 * J.s();
  const PairRuleOptions fine = opt.pairs.refined();
  auto kernel = [&J](const Point& x, const Point& y) { return J(x, y); };
  for (const ElementPair& p : element_pairs(mesh, PairRegion::kAtLeastOneInterior)) {
    PairBlock blk(mesh, p.i, p.j);
    // The ordered pairs (i, j) and (j, i) each carry the factor 1/2 of the form.
    const double factor = p.i == p.j ? 0.5 : 1.0;
    if (!p.touching) {
      accumulate_pair(mesh, maps, p, opt.pairs, beta, kernel, blk);
      scatter(blk, factor, K);
      continue;
    }
    accumulate_pair(mesh, maps, p, opt.pairs, beta, kernel, blk);
    const Eigen::Matrix<double, 6, 6> coarse = blk.L;
    accumulate_pair(mesh, maps, p, fine, beta, kernel, blk);
    const double diff = (blk.L - coarse).cwiseAbs().maxCoeff();
    const double scale = blk.L.cwiseAbs().maxCoeff();
    if (diff > tol.target(scale)) {
      std::ostringstream msg;
      msg << "nonlocal stiffness: pair (" << p.i << ", " << p.j << ") unresolved, local change " << diff
          << " against entries of size " << scale;
      throw QuadratureError(msg.str());
    }
    scatter(blk, factor, K);
  }

  if (opt.include_tail) {
    const TriangleRule& rule = triangle_gauss(opt.tail_points);
    for (int t = 0; t < nt; ++t) {
      if (mesh.triangles[t].region != Region::kInterior) continue;
      const Tri T = triangle_of(mesh, t);
      const double a2 = 2.0 * tri_area(T);
      const auto& v = mesh.triangles[t].v;
      for (int q = 0; q < rule.size(); ++q) {
        const Point x = tri_map(T, rule.uv[q]);
        const double z = a2 * rule.w[q] * truncation_tail(J, mesh, x, opt.tail_order);
        const auto l = maps[t](x);
        for (int r = 0; r < 3; ++r) {
          for (int c = 0; c < 3; ++c) K(v[r], v[c]) += z * l[r] * l[c];
        }
      }
    }
  }
  return K;
}

Eigen::MatrixXd assemble_local_stiffness(const Mesh& mesh, const MatrixField& A) {
  const int nv = static_cast<int>(mesh.vertices.size());
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nv, nv);
  for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
    if (mesh.triangles[t].region != Region::kInterior) continue;
    const Tri T = triangle_of(mesh, t);
    const Affine map(T);
    // Rows: gradients of the three barycentric coordinates.
    Eigen::Matrix<double, 3, 2> G;
    G.row(1) = map.inv.row(0);
    G.row(2) = map.inv.row(1);
    G.row(0) = -G.row(1) - G.row(2);
    const Eigen::Matrix3d local = tri_area(T) * G * A(mesh.centroid(t)) * G.transpose();
    const auto& v = mesh.triangles[t].v;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) K(v[r], v[c]) += local(r, c);
    }
  }
  return K;
}

NeumannProblem NeumannProblem::nonlocal(KernelSpec J, ScalarFn f, ScalarFn g) {
  NeumannProblem p;
  p.kind = ProblemKind::kNonlocal;
  p.J = std::move(J);
  p.f = std::move(f);
  p.g = std::move(g);
  return p;
}

NeumannProblem NeumannProblem::local(MatrixField A, ScalarFn f, ScalarFn g) {
  NeumannProblem p;
  p.kind = ProblemKind::kLocal;
  p.A = std::move(A);
  p.f = std::move(f);
  p.g = std::move(g);
  return p;
}

Eigen::VectorXd assemble_loads(const Mesh& mesh, const Domain& domain, const NeumannProblem& problem,
                               const LoadOptions& opt) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(mesh.vertices.size());
  if (problem.f) {
    const TriangleRule& rule = triangle_gauss(opt.interior_degree);
    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
      if (mesh.triangles[t].region != Region::kInterior) continue;
      const Tri T = triangle_of(mesh, t);
      const Affine map(T);
      const double a2 = 2.0 * tri_area(T);
      const auto& v = mesh.triangles[t].v;
      for (int q = 0; q < rule.size(); ++q) {
        const Point x = tri_map(T, rule.uv[q]);
        const double fx = a2 * rule.w[q] * problem.f(x);
        if (fx == 0.0) continue;
        const auto l = map(x);
        for (int k = 0; k < 3; ++k) b[v[k]] += fx * l[k];
      }
    }
  }
  if (!problem.g) return b;

  if (problem.kind == ProblemKind::kLocal) {
    const Rule1D& gl = gauss_legendre(opt.boundary_points);
    for (const auto& e : mesh.boundary_edges) {
      if (e.kind != BoundaryKind::kDomainBoundary) continue;
      const Point pa = mesh.vertices[e.a], pb = mesh.vertices[e.b];
      const double len = (pb - pa).norm();
      for (int q = 0; q < gl.size(); ++q) {
        const double u = 0.5 * (gl.x[q] + 1.0);
        const Point x = (1.0 - u) * pa + u * pb;
        const double gx = 0.5 * len * gl.w[q] * problem.g(domain.nearest_boundary_point(x));
        b[e.a] += gx * (1.0 - u);
        b[e.b] += gx * u;
      }
    }
    return b;
  }

  // Exterior part: x = c + (r(th) + t) e(th), dx = (r(th) + t) dt dth.
  const double h0 = domain_edge_length(mesh);
  const double s = problem.J.s();
  int n_edges = 0;
  for (const auto& e : mesh.boundary_edges) n_edges += e.kind == BoundaryKind::kDomainBoundary;
  const Rule1D theta = periodic_trapezoid(opt.angular_per_edge * n_edges);
  const double dth = 2.0 * kPi / theta.size();
  const PointLocator locator(mesh);
  for (int i = 0; i < theta.size(); ++i) {
    const double th = theta.x[i];
    const Point e(std::cos(th), std::sin(th));
    const double r0 = domain.profile(th);
    const Point base = domain.center() + r0 * e;
    const double L = mesh.truncation_exit_distance(base, e);
    if (!std::isfinite(L)) throw std::invalid_argument("assemble_loads: mesh has no truncation polygon");
    Rule1D radial = singular_panel(opt.radial_order, 0.0, std::min(h0, L), -s);
    double a = std::min(h0, L);
    while (a < L * (1.0 - 1e-14)) {
      // Panels follow the exterior grading of the mesh.
      const double next = std::min(L, a + 0.5 * h0 * (1.0 + a));
      radial.append(gauss_legendre(opt.radial_order, a, next));
      a = next;
    }
    for (int k = 0; k < radial.size(); ++k) {
      const double t = radial.x[k];
      const Point x = base + t * e;
      std::array<double, 3> bary;
      const int tri = locator.locate(x, &bary);
      if (tri < 0) continue;
      const double gx = dth * radial.w[k] * (r0 + t) * problem.g(x);
      if (gx == 0.0) continue;
      const auto& v = mesh.triangles[tri].v;
      for (int q = 0; q < 3; ++q) b[v[q]] += gx * bary[q];
    }
  }
  return b;
}

DiscreteFunction solve_saddle(const Mesh& mesh, const LinearSystem& sys, const Tolerance& tol) {
  const Eigen::Index n = sys.K.rows();
  if (sys.K.cols() != n || sys.b.size() != n || sys.m.size() != n ||
      n != static_cast<Eigen::Index>(mesh.vertices.size())) {
    throw std::invalid_argument("solve_saddle: inconsistent system sizes");
  }
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n + 1, n + 1);
  S.topLeftCorner(n, n) = sys.K;
  S.block(0, n, n, 1) = sys.m;
  S.block(n, 0, 1, n) = sys.m.transpose();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
  rhs.head(n) = sys.b;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(S);
  lu.setThreshold(1e-13);
  if (!lu.isInvertible()) {
    std::ostringstream msg;
    msg << "solve_saddle: singular saddle matrix (rank " << lu.rank() << " of " << n + 1 << ")";
    throw std::runtime_error(msg.str());
  }
  const Eigen::VectorXd x = lu.solve(rhs);
  const double res = (S * x - rhs).norm();
  const double scale = S.norm() * x.norm() + rhs.norm();
  if (!std::isfinite(res) || res > std::max(tol.target(scale), 1e-10 * scale)) {
    std::ostringstream msg;
    msg << "solve_saddle: residual " << res << " too large";
    throw std::runtime_error(msg.str());
  }
  return DiscreteFunction(mesh, x.head(n), true);
}

DiscreteFunction solve_neumann(const NeumannProblem& problem, const Mesh& mesh, const Domain& domain,
                               const Tolerance& tol, const StiffnessOptions& opt) {
  LinearSystem sys;
  sys.K = problem.kind == ProblemKind::kLocal ? assemble_local_stiffness(mesh, problem.A)
                                              : assemble_nonlocal_stiffness(mesh, problem.J, tol, opt);
  sys.b = assemble_loads(mesh, domain, problem);
  sys.m = mean_vector(mesh);
  return solve_saddle(mesh, sys, tol);
}

double l2_error_on_omega(const DiscreteFunction& u, const DiscreteFunction& v) {
  check_mesh(u);
  check_mesh(v);
  std::vector<int> tu, tv;
  for (int t = 0; t < static_cast<int>(u.mesh->triangles.size()); ++t) {
    if (u.mesh->triangles[t].region == Region::kInterior) tu.push_back(t);
  }
  for (int t = 0; t < static_cast<int>(v.mesh->triangles.size()); ++t) {
    if (v.mesh->triangles[t].region == Region::kInterior) tv.push_back(t);
  }
  if (tu.size() != tv.size()) throw std::invalid_argument("l2_error_on_omega: interior meshes differ");
  double acc = 0.0;
  for (std::size_t k = 0; k < tu.size(); ++k) {
    const auto& a = u.mesh->triangles[tu[k]].v;
    const auto& b = v.mesh->triangles[tv[k]].v;
    std::array<double, 3> e;
    for (int q = 0; q < 3; ++q) {
      if ((u.mesh->vertices[a[q]] - v.mesh->vertices[b[q]]).norm() > 1e-12) {
        throw std::invalid_argument("l2_error_on_omega: interior meshes differ");
      }
      e[q] = u.values[a[q]] - v.values[b[q]];
    }
    // int_T (P1)^2 = |T|/6 (sum e_i^2 + sum_{i<j} e_i e_j).
    const double sq = e[0] * e[0] + e[1] * e[1] + e[2] * e[2] + e[0] * e[1] + e[1] * e[2] + e[0] * e[2];
    acc += u.mesh->triangle_area(tu[k]) / 6.0 * sq;
  }
  return std::sqrt(acc);
}

double l2_error_on_omega(const DiscreteFunction& u, const ScalarFn& f, int degree) {
  check_mesh(u);
  const TriangleRule& rule = triangle_gauss(degree);
  double acc = 0.0;
  for (int t = 0; t < static_cast<int>(u.mesh->triangles.size()); ++t) {
    if (u.mesh->triangles[t].region != Region::kInterior) continue;
    const Tri T = triangle_of(*u.mesh, t);
    const Affine map(T);
    const double a2 = 2.0 * tri_area(T);
    const auto& v = u.mesh->triangles[t].v;
    for (int q = 0; q < rule.size(); ++q) {
      const Point x = tri_map(T, rule.uv[q]);
      const auto l = map(x);
      const double e = l[0] * u.values[v[0]] + l[1] * u.values[v[1]] + l[2] * u.values[v[2]] - f(x);
      acc += a2 * rule.w[q] * e * e;
    }
  }
  return std::sqrt(acc);
}

}  // namespace fractrace
