#pragma once

#include <functional>
#include <vector>

#include "fractrace/geometry.hpp"
#include "fractrace/quadrature.hpp"

namespace fractrace {

enum class PairRegion {
  kAtLeastOneInterior,  // (Omega x R^d) u (R^d x Omega) restricted to the mesh
  kBothInterior,        // Omega x Omega
};

/// Unordered triangle pair, i <= j.
struct ElementPair {
  int i;
  int j;
  bool touching;  // shares at least one vertex
};

std::vector<ElementPair> element_pairs(const Mesh& mesh, PairRegion region);

struct PairRuleOptions {
  PolarPairOptions polar;
  int tensor_order = 3;
  /// Separated pairs closer than separation * diameter are subdivided.
  double separation = 1.0;
  int max_level = 2;

  PairRuleOptions refined() const;
};

/// Options for smooth, non-P1 integrands: the edge-midpoint rule on the
/// overlap polygons is exact only for quadratics in x.
inline PairRuleOptions smooth_pair_options() {
  PairRuleOptions o;
  o.polar.inner_points = 3;
  return o;
}

inline Tri triangle_of(const Mesh& mesh, int t) {
  const auto& v = mesh.triangles[t].v;
  return {mesh.vertices[v[0]], mesh.vertices[v[1]], mesh.vertices[v[2]]};
}

/// Nodes of int_{T_i} int_{T_j} F(x, y) dy dx. Touching pairs use the polar
/// rule with F ~ |x - y|^beta, other pairs the tensor rule.
template <class Visit>
void visit_pair(const Mesh& mesh, const ElementPair& p, double beta, const PairRuleOptions& opt,
                Visit&& visit) {
  const Tri a = triangle_of(mesh, p.i), b = triangle_of(mesh, p.j);
  auto relay = [&](const Point& x, const Point& z, double w) { visit(x, Point(x + z), w); };
  if (p.touching) {
    polar_pair_rule(a, b, beta, opt.polar, relay);
  } else {
    tensor_pair_rule(a, b, opt.tensor_order, opt.separation, opt.max_level, relay);
  }
}

/// Ordered double integral of a symmetric F over the selected pair region,
/// with the two-level difference (opt versus opt.refined()) as the error
/// estimate. Throws QuadratureError naming the worst pair when the estimate
/// exceeds tol.
Estimate double_integral_singular(const std::function<double(Point, Point)>& F, const Mesh& mesh,
                                  PairRegion region, double beta, const PairRuleOptions& opt,
                                  const Tolerance& tol);

}  // namespace fractrace
