#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "fractrace/geometry.hpp"
#include "fractrace/quadrature.hpp"

namespace fractrace {

/// Fractional order, 0 < s < 1.
class FracOrder {
 public:
  explicit FracOrder(double s);
  double value() const { return s_; }
  operator double() const { return s_; }

 private:
  double s_;
};

using ScalarFn = std::function<double(Point)>;

/// kappa_{d,s} = 2^{2s} s Gamma((d+2s)/2) / (pi^{d/2} Gamma(1-s)).
double kappa(int d, FracOrder s);

/// tau_s(x) = (1-s) / (d_x^s (1+d_x)^{d+s}); throws std::domain_error on the boundary.
double tau(const Domain& domain, FracOrder s, Point x);
double tau_of_distance(double dx, double s, int d = 2);

/// k_s(x,y) = (1-s)^2 / [d_x^s (1+d_x)^s d_y^s (1+d_y)^s (|x-y| + d_x d_y + d_x + d_y)^d].
double trace_kernel(const Domain& domain, FracOrder s, Point x, Point y);
double trace_kernel_of(double dx, double dy, double dist, double s, int d = 2);

/// kappa_{d,s} |x-y|^{-d-2s}.
double fractional_kernel(int d, FracOrder s, Point x, Point y);

/// Poisson kernel of the ball B_R(0) for the fractional Laplacian:
/// Gamma(d/2) pi^{-d/2-1} sin(pi s) [(R^2-|z|^2)/(|x|^2-R^2)]^s |z-x|^{-d}.
double poisson_kernel_ball(double R, FracOrder s, Point z, Point x);
/// Same, for a disk domain (recentered).
double poisson_kernel_ball(const Domain& ball, FracOrder s, Point z, Point x);

/// k*_s(x,y) = kappa int_Omega |y-z|^{-d-2s} P(z,x) dz for a disk domain,
/// by nested adaptive Gauss-Kronrod in polar coordinates.
Estimate bogdan_kernel(const Domain& ball, FracOrder s, Point x, Point y, const Tolerance& tol);

/// Symmetric matrix field with ellipticity constant lambda:
/// lambda^{-1}|xi|^2 <= A(x) xi . xi <= lambda |xi|^2.
struct MatrixField {
  std::function<Mat2(Point)> eval;
  double lambda = 1.0;
  bool constant = false;

  static MatrixField identity();
  static MatrixField constant_matrix(const Mat2& A);
  /// A(x) = Q(w x_1) diag(a, b) Q(w x_1)^T with Q a rotation.
  static MatrixField rotation(double a, double b, double w);

  Mat2 operator()(Point x) const { return eval(x); }
  /// Sampled symmetry and ellipticity check on [-bound, bound]^2.
  void validate(double bound = 4.0, int samples = 400) const;
};

/// B = sqrt(A^{-1}).
Mat2 inverse_sqrt(const Mat2& A);

enum class KernelVariant { kFractional, kElliptic, kTabulated };

/// Interaction kernel J_s. For the elliptic variant, j_s(x, x+h) =
/// kappa |B(x) h|^{-d-2s} det B(x) and J_s is its symmetrization.
class KernelSpec {
 public:
  static KernelSpec fractional(FracOrder s, int d = 2);
  static KernelSpec tabulated(std::function<double(Point, Point)> J, FracOrder s, double Lambda,
                              bool translation_invariant = false);

  double operator()(Point x, Point y) const;
  /// Nonsymmetric kernel j_s; equals J_s for symmetric variants.
  double nonsymmetric(Point x, Point y) const;
  /// k(x, e) with J_s(x, x + rho e) = rho^{-d-2s} k(x, e); exact when
  /// translation_invariant(), otherwise the profile of j_s at x.
  double profile(Point x, Point e) const;

  double s() const { return s_; }
  int dimension() const { return d_; }
  double Lambda() const { return Lambda_; }
  double kappa_value() const { return kappa_; }
  bool symmetric() const { return variant_ != KernelVariant::kElliptic || A_.constant; }
  bool translation_invariant() const { return translation_invariant_; }
  KernelVariant variant() const { return variant_; }
  const MatrixField& matrix_field() const { return A_; }

 private:
  friend KernelSpec elliptic_kernel_factory(const MatrixField& A, FracOrder s);
  KernelVariant variant_ = KernelVariant::kFractional;
  double s_ = 0.5;
  int d_ = 2;
  double kappa_ = 0.0;
  double Lambda_ = 1.0;
  bool translation_invariant_ = true;
  MatrixField A_;
  Mat2 B_ = Mat2::Identity();  // constant fields
  double detB_ = 1.0;
  std::function<double(Point, Point)> table_;
};

/// Kernel factory for a symmetric elliptic matrix field; Lambda = lambda^{d+s}.
/// Throws std::invalid_argument when the sampled checks of A fail.
KernelSpec elliptic_kernel_factory(const MatrixField& A, FracOrder s);

struct DiffusionRecovery {
  Mat2 a = Mat2::Zero();              // extrapolated limit
  std::vector<double> s_grid;
  std::vector<Mat2> per_s;            // a(s) on the grid
};

/// a_ij(x) = lim ½ int_{B_delta} h_i h_j j_s(x, x+h) dh, evaluated on the
/// s-grid and extrapolated with a least-squares fit c0 + c1 (1-s).
/// Throws QuadratureError when the last two grid values differ by more than
/// max_change relative to the largest entry.
DiffusionRecovery recover_diffusion(const std::function<KernelSpec(double)>& family, Point x,
                                    double delta, std::vector<double> s_grid = {0.9, 0.95, 0.99},
                                    double max_change = 0.25);

/// N_s u(y) = int_Omega (u(y) - u(x)) J_s(x, y) dx for y outside the closure of Omega.
Estimate nonlocal_normal_derivative(const ScalarFn& u, const KernelSpec& J, const Domain& domain,
                                    Point y, const Tolerance& tol);

/// zeta_R(x) = int J(x, y) dy over the outside of the mesh's truncation
/// polygon, for x inside it. One Gauss rule per polygon edge in the angle
/// seen from x; the radial integral is exact for translation-invariant
/// kernels and uses the tail rule otherwise.
double truncation_tail(const KernelSpec& J, const Mesh& mesh, Point x, int order = 12);

/// Two-dimensional adaptive integral over the domain in polar coordinates
/// about its center, int_0^{2pi} int_0^{r(th)} f(c + rho e) rho drho dth.
Estimate integrate_domain(const std::function<double(Point)>& f, const Domain& domain,
                          const Tolerance& tol);

}  // namespace fractrace
