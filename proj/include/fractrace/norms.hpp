#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>

#include "fractrace/geometry.hpp"
#include "fractrace/kernels.hpp"
#include "fractrace/pairs.hpp"
#include "fractrace/quadrature.hpp"

namespace fractrace {

/// Real field on the plane with a declared regularity and decay class.
///   |f(x)| <= bound * (1 + d_x)^{-decay}
///   |f(x) - f(y)| <= lipschitz * |x - y|
///   f = 0 outside B(support_center, support_radius)
/// Infinite bound / lipschitz / support_radius mean "not declared".
struct ScalarField {
  std::function<double(Point)> fn;
  double bound = std::numeric_limits<double>::infinity();
  double lipschitz = std::numeric_limits<double>::infinity();
  double decay = 0.0;
  Point support_center = Point::Zero();
  double support_radius = std::numeric_limits<double>::infinity();
  /// Optional exact gradient; central differences otherwise.
  std::function<Point(Point)> gradient;

  static ScalarField bounded(std::function<double(Point)> f, double bound);
  static ScalarField lipschitz_field(std::function<double(Point)> f, double lipschitz,
                                     double bound = std::numeric_limits<double>::infinity());
  static ScalarField supported(std::function<double(Point)> f, Point center, double radius,
                               double bound, double lipschitz);

  double operator()(Point x) const { return fn(x); }
  Point grad(Point x) const;
  bool is_bounded() const { return std::isfinite(bound); }
  bool is_lipschitz() const { return std::isfinite(lipschitz); }
  bool has_bounded_support() const { return std::isfinite(support_radius); }

  /// Sampled check of the declared bound, Lipschitz constant and support on
  /// the box [-extent, extent]^2 around the domain center. Throws
  /// std::invalid_argument on the first violation.
  void validate(const Domain& domain, double extent = 6.0, int samples = 2000,
                std::uint64_t seed = 7) const;
};

/// Field on the boundary curve, evaluated at boundary points.
using BoundaryField = std::function<double(Point)>;

struct NormReport {
  std::string quantity;
  double s = 0.0;
  std::string domain;
  double value = 0.0;      // sqrt(l2_part^2 + semi_part^2)
  double l2_part = 0.0;
  double semi_part = 0.0;
  double error = 0.0;      // estimate for value^2

  static std::string csv_header();
  std::string csv_row() const;
};

/// ||g||_{L^2(Omega^c, tau_s)}, via the graded exterior rule with mapped tail.
/// Requires a declared bound or bounded support.
NormReport l2_tau_norm(const ScalarField& g, const Domain& domain, FracOrder s,
                       const Tolerance& tol);

struct TraceSeminormOptions {
  int order = 6;        // Gauss points per radial panel
  int depth = 22;       // dyadic radial panels toward the boundary and infinity
  int n_theta = 32;     // trapezoid nodes in the first angle
  int phi_order = 10;   // Gauss points per angular-difference panel
  double phi_floor = 1e-7;
  bool estimate_error = true;

  TraceSeminormOptions refined() const;
};

/// [g]_{T^s(Omega^c)} for a star-shaped domain. Exterior polar coordinates
/// x = c + (r(th) + t) e(th) on both factors; the radial measure
/// (1 - s) t^{-s} dt is mapped to du through u = t^{1-s} on dyadic
/// t-panels of (0, 1] and t = 1/v beyond. The angular difference is split into panels that double
/// from (t1 + t2)/4. Error estimate: difference to the refined rule.
NormReport trace_seminorm(const ScalarField& g, const Domain& domain, FracOrder s,
                          const Tolerance& tol, const TraceSeminormOptions& opt = {});

/// ||g||_{T^s}: L^2(tau_s) part and seminorm part.
NormReport trace_norm(const ScalarField& g, const Domain& domain, FracOrder s,
                      const Tolerance& tol, const TraceSeminormOptions& opt = {});

/// H^{1/2}(dOmega) norm with the |x - y|^{-d} seminorm, by the product rule
/// in the boundary angle.
NormReport h_half_boundary_norm(const BoundaryField& g, const Domain& domain, int n);

struct VsEnergyOptions {
  double h = 0.15;
  double truncation_radius = 0.0;  // 0: chosen from the domain and supports
  PairRuleOptions pairs = smooth_pair_options();
};

/// ½ int int_{R^2 x R^2 \ Omega^c x Omega^c} (u(x)-u(y))(v(x)-v(y)) J(x,y),
/// on the element pairs of a mesh of B_R with at least one interior element,
/// plus int_Omega u v zeta_R for the pairs leaving B_R. u and v need bounded
/// support inside B_R.
Estimate vs_energy(const ScalarField& u, const ScalarField& v, const Domain& domain,
                   const KernelSpec& J, const Tolerance& tol, const VsEnergyOptions& opt = {});

/// ||u||_{V^s} = ([u,u]_{V^s} + ||u||^2_{L^2(Omega)})^{1/2}.
NormReport vs_norm(const ScalarField& u, const Domain& domain, const KernelSpec& J,
                   const Tolerance& tol, const VsEnergyOptions& opt = {});

/// int_Omega (A grad u) . grad v.
double local_energy(const ScalarField& u, const ScalarField& v, const Domain& domain,
                    const MatrixField& A, int n_theta = 128, int n_radial = 24);

/// int_Omega f, tensor Gauss rule in polar coordinates about the center.
double integrate_interior(const std::function<double(Point)>& f, const Domain& domain,
                          int n_theta = 128, int n_radial = 24);

/// int_Omega f d_x^{gamma}, graded toward the boundary along rays.
double integrate_interior_graded(const std::function<double(Point)>& f, const Domain& domain,
                                 double gamma, int n_theta = 128, int order = 10, int depth = 6);

/// (P g)(z) = int_{Omega^c} P(z, x) g(x) dx for a disk domain. Supports away
/// from the disk use a polar rule on the support; otherwise the exterior rule.
Estimate poisson_extension(const ScalarField& g, const Domain& ball, FracOrder s, Point z,
                           const Tolerance& tol);

/// P g inside the ball and g outside.
ScalarField poisson_extended_field(const ScalarField& g, const Domain& ball, FracOrder s,
                                   const Tolerance& tol);

struct MonteCarloOptions {
  std::uint64_t seed = 20240607;
  long batch = 4000;
  long max_samples = 200000;
  double rel_target = 0.02;  // stop once std error <= rel_target |mean|
};

struct MonteCarloEstimate {
  double value = 0.0;
  double std_error = 0.0;
  long samples = 0;
};

class BudgetExhausted : public QuadratureError {
 public:
  BudgetExhausted(const std::string& what, MonteCarloEstimate achieved)
      : QuadratureError(what), achieved_(achieved) {}
  const MonteCarloEstimate& achieved() const { return achieved_; }

 private:
  MonteCarloEstimate achieved_;
};

/// [g, g]_{X^s(Omega^c)} = ½ int int_{Omega^c x Omega^c} (g(x) - g(y))^2 k*_s(x, y)
/// by importance sampling. The ½ matches the normalization of the V^s form,
/// under which [P g, P g]_{V^s} = [g, g]_{X^s}. The sampling density mixes a
/// boundary-concentrating exterior law with the uniform law on the support
/// of g; k*_s is evaluated by nested quadrature at each sample.
MonteCarloEstimate cx_seminorm(const ScalarField& g, const Domain& ball, FracOrder s,
                               const MonteCarloOptions& mc, double kernel_tol = 1e-6);

struct SamplingFocus {
  Point center;
  double radius;
};

/// [u, u]_{V^s} by importance sampling: x uniform in Omega, y = x + r e with r
/// drawn from a two-piece power law matched to the kernel, mixed with the
/// uniform law on each focus disk.
MonteCarloEstimate vs_energy_monte_carlo(const ScalarField& u, const Domain& domain,
                                         const KernelSpec& J, const MonteCarloOptions& mc,
                                         const std::vector<SamplingFocus>& focus = {});

/// Eg(x) = g(nearest boundary point) chi(d_x / r0) on the exterior, with chi a
/// smooth cutoff equal to 1 on [0, 1/2] and 0 on [1, inf).
ScalarField normal_ray_extension(const BoundaryField& g, const Domain& domain, double r0);

/// Smooth cutoff used by normal_ray_extension.
double smooth_cutoff(double t);

struct HardyOptions {
  double h = 0.15;
  PairRuleOptions pairs = smooth_pair_options();
  int n_theta = 128;
};

struct HardyRatio {
  double numerator = 0.0;  // (1-s) int_Omega u^2 d_x^{-s}
  double l2 = 0.0;         // ||u||^2_{L^2(Omega)}
  double seminorm = 0.0;   // (1-s) int int_{Omega x Omega} |u(x)-u(y)|^2 |x-y|^{-2-2s}
  double ratio() const { return numerator / (l2 + seminorm); }
};

/// Both sides of the robust Hardy-type inequality. Throws std::domain_error for u == 0.
HardyRatio hardy_ratio(const ScalarField& u, const Domain& domain, FracOrder s,
                       const Tolerance& tol, const HardyOptions& opt = {});

}  // namespace fractrace
