#include "fractrace/pairs.hpp"

#include <cmath>
#include <sstream>

namespace fractrace {

std::vector<ElementPair> element_pairs(const Mesh& mesh, PairRegion region) {
  const int nt = static_cast<int>(mesh.triangles.size());
  std::vector<std::vector<int>> around(mesh.vertices.size());
  for (int t = 0; t < nt; ++t) {
    for (int v : mesh.triangles[t].v) around[v].push_back(t);
  }
  std::vector<int> mark(nt, -1);
  std::vector<ElementPair> out;
  for (int i = 0; i < nt; ++i) {
    const bool in_i = mesh.triangles[i].region == Region::kInterior;
    if (region == PairRegion::kBothInterior && !in_i) continue;
    for (int v : mesh.triangles[i].v) {
      for (int t : around[v]) mark[t] = i;
    }
    for (int j = i; j < nt; ++j) {
      const bool in_j = mesh.triangles[j].region == Region::kInterior;
      const bool keep = region == PairRegion::kBothInterior ? in_j : (in_i || in_j);
      if (keep) out.push_back({i, j, mark[j] == i});
    }
  }
  return out;
}

PairRuleOptions PairRuleOptions::refined() const {
  PairRuleOptions r = *this;
  r.polar.angular_order += 4;
  r.polar.radial_order += 2;
  r.polar.first_panel_order += 2;
  r.polar.inner_points = std::max(2, polar.inner_points + 1);
  r.tensor_order += 1;
  r.max_level += 1;
  return r;
}

Estimate double_integral_singular(const std::function<double(Point, Point)>& F, const Mesh& mesh,
                                  PairRegion region, double beta, const PairRuleOptions& opt,
                                  const Tolerance& tol) {
  tol.validate();
  const PairRuleOptions fine = opt.refined();
  double coarse_sum = 0.0, fine_sum = 0.0, scale = 0.0, worst = -1.0;
  ElementPair worst_pair{-1, -1, false};
  for (const ElementPair& p : element_pairs(mesh, region)) {
    const double mult = p.i == p.j ? 1.0 : 2.0;
    double a = 0.0, b = 0.0, m = 0.0;
    visit_pair(mesh, p, beta, opt, [&](const Point& x, const Point& y, double w) { a += w * F(x, y); });
    visit_pair(mesh, p, beta, fine, [&](const Point& x, const Point& y, double w) {
      const double v = w * F(x, y);
      b += v;
      m += std::abs(v);
    });
    coarse_sum += mult * a;
    fine_sum += mult * b;
    scale += mult * m;
    if (std::abs(a - b) > worst) {
      worst = std::abs(a - b);
      worst_pair = p;
    }
  }
  Estimate e{fine_sum, std::abs(fine_sum - coarse_sum)};
  if (e.error > std::max(tol.target(fine_sum), 1e-15 * scale)) {
    std::ostringstream msg;
    msg << "pair quadrature estimate " << e.error << " above tolerance; worst pair (" << worst_pair.i
        << ", " << worst_pair.j << ") differs by " << worst;
    throw QuadratureError(msg.str());
  }
  return e;
}

}  // namespace fractrace
