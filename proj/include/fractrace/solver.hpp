#pragma once

#include <iosfwd>

#include <Eigen/Dense>

#include "fractrace/geometry.hpp"
#include "fractrace/kernels.hpp"
#include "fractrace/pairs.hpp"
#include "fractrace/quadrature.hpp"

namespace fractrace {

/// P1 function on a mesh, one coefficient per vertex. The mesh must outlive it.
struct DiscreteFunction {
  const Mesh* mesh = nullptr;
  Eigen::VectorXd values;
  bool mean_zero = false;

  DiscreteFunction() = default;
  DiscreteFunction(const Mesh& m, Eigen::VectorXd v, bool zero_mean = false);

  static DiscreteFunction interpolate(const Mesh& mesh, const ScalarFn& f);

  /// Value at x, or 0 outside the mesh.
  double operator()(Point x, const PointLocator& locator) const;
  /// int_{Omega_h} u, exact for P1.
  double mean_integral() const;

  /// "u index value" lines, 17 significant digits.
  void write(std::ostream& out) const;
  static DiscreteFunction read(std::istream& in, const Mesh& mesh);
};

/// Dense saddle-point system [K m; m^T 0][u; mu] = [b; 0].
struct LinearSystem {
  Eigen::MatrixXd K;
  Eigen::VectorXd b;
  Eigen::VectorXd m;  // m_i = int_{Omega_h} phi_i
};

/// Interior-tagged triangles with their vertices renumbered in order of first use.
Mesh restrict_to_interior(const Mesh& mesh);

/// m_i = int_{Omega_h} phi_i.
Eigen::VectorXd mean_vector(const Mesh& mesh);

struct StiffnessOptions {
  PairRuleOptions pairs;
  int tail_points = 4;    // triangle rule degree for the zeta_R term
  int tail_order = 12;    // Gauss points per truncation edge
  bool include_tail = true;
};

/// K_ij = E^s(phi_i, phi_j): element pairs with at least one interior
/// triangle, plus int_Omega phi_i phi_j zeta_R. Touching pairs are also
/// evaluated with the refined rule; a pair whose local matrix moves by more
/// than tol raises QuadratureError naming it.
Eigen::MatrixXd assemble_nonlocal_stiffness(const Mesh& mesh, const KernelSpec& J,
                                            const Tolerance& tol, const StiffnessOptions& opt = {});

/// P1 stiffness of int (A grad u) . grad v over the interior-tagged
/// triangles, A taken at each triangle's centroid.
Eigen::MatrixXd assemble_local_stiffness(const Mesh& mesh, const MatrixField& A);

enum class ProblemKind { kNonlocal, kLocal };

struct NeumannProblem {
  ProblemKind kind = ProblemKind::kNonlocal;
  KernelSpec J;
  MatrixField A;
  ScalarFn f;  // on Omega; empty means 0
  ScalarFn g;  // on Omega^c (nonlocal) or on the boundary curve (local); empty means 0

  static NeumannProblem nonlocal(KernelSpec J, ScalarFn f, ScalarFn g);
  static NeumannProblem local(MatrixField A, ScalarFn f, ScalarFn g);
};

struct LoadOptions {
  int interior_degree = 6;    // triangle rule for f
  int boundary_points = 4;    // Gauss points per boundary edge (local case)
  int radial_order = 6;       // exterior rule (nonlocal case)
  int angular_per_edge = 4;   // exterior angles per boundary edge
};

/// b_i = int_{Omega_h} f phi_i + int_{Omega^c cap B_R} g phi_i (nonlocal),
/// or int_{Omega_h} f phi_i + sum over boundary chords of int g phi_i with g
/// evaluated at the nearest boundary point (local). The exterior part uses a
/// polar rule graded like t^{-s} toward the boundary, with panels of the
/// mesh width; nodes are mapped to elements by point location.
Eigen::VectorXd assemble_loads(const Mesh& mesh, const Domain& domain, const NeumannProblem& problem,
                               const LoadOptions& opt = {});

/// Solves the saddle system. Throws std::runtime_error when the
/// factorization is numerically singular or the residual exceeds tol.
DiscreteFunction solve_saddle(const Mesh& mesh, const LinearSystem& sys, const Tolerance& tol);

/// Assemble and solve. For the local problem pass the interior mesh
/// (restrict_to_interior); the nonlocal problem uses the full mesh.
DiscreteFunction solve_neumann(const NeumannProblem& problem, const Mesh& mesh, const Domain& domain,
                               const Tolerance& tol, const StiffnessOptions& opt = {});

/// ||u - v||_{L^2(Omega_h)}, exact for two P1 functions whose interior
/// triangles coincide. Throws std::invalid_argument on mismatch.
double l2_error_on_omega(const DiscreteFunction& u, const DiscreteFunction& v);

/// ||u - f||_{L^2(Omega_h)} with a degree-`degree` triangle rule.
double l2_error_on_omega(const DiscreteFunction& u, const ScalarFn& f, int degree = 6);

}  // namespace fractrace
