#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nocp/control_space.hpp"
#include "nocp/fem.hpp"

namespace nocp {

struct OCPData {
  CoefficientField coeff;
  ScalarField f;
  ScalarField y_d;
  ScalarField phi1, phi2;
  double gamma = 1.0;
};

struct OCPSolution {
  Vec y;              // fine coefficients of the state (y_dag - B u)
  Vec u;              // control-space coefficients
  Vec p;              // fine coefficients of the adjoint
  Vec lambda1, lambda2;
  int iterations = 0;
  double kkt_residual = 0.0;
  double cost = 0.0;
  bool converged = false;
  std::vector<double> cost_history;
};

struct CyclingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Reduced formulation of the discrete control problem over a state space
/// (standard P1 or multiscale) and a control space. The state is
/// y(u) = y_dag(u) - B u with a(B q, z) = 0 against the state space, so the
/// reduced cost stays quadratic and the reduced Hessian is a fixed SPD
/// operator on the control space.
class ReducedProblem {
 public:
  ReducedProblem(const P1Space& fine, const DiscreteSpace* space,
                 const ControlSpace* control, const OCPData& data,
                 const SpMat* B_star = nullptr);

  const DiscreteSpace& space() const { return *space_; }
  const ControlSpace& control() const { return *control_; }
  double gamma() const { return gamma_; }
  const SpMat& mass() const { return M_; }
  const Vec& f_load() const { return f_load_; }
  const Vec& yd_load() const { return yd_load_; }
  bool has_B() const { return B_ != nullptr; }

  Vec state(const Vec& u) const;
  Vec adjoint(const Vec& y) const;
  double cost(const Vec& u, const Vec& y) const;
  double cost(const Vec& u) const { return cost(u, state(u)); }
  double tracking_error_l2(const Vec& y) const;  // ||y - y_d||_{L2}

  /// Effective adjoint trace t with t_e = (1/|e|)[int_e p ds -
  /// <y - y_d, B chi_e>]; the optimality system reads t + gamma u = l1 + l2.
  Vec trace_term(const Vec& y, const Vec& p) const;

  /// Control-space Riesz representative of the reduced derivative.
  Vec gradient(const Vec& u) const;

  // homogeneous (linear) parts, used by the Hessian
  Vec state_hom(const Vec& du) const;
  Vec adjoint_hom(const Vec& y_lin) const;
  Vec trace_term_hom(const Vec& y_lin, const Vec& p_lin) const;

  /// H du = gamma du + linear trace part; SPD in the weighted inner product.
  Vec hessian_apply(const Vec& du) const;

  /// Affine offset t(0) so that gradient(u) = hessian_apply(u) + t0.
  const Vec& gradient_offset() const;

  /// Explicit reduced Hessian, built lazily column by column; only sensible
  /// for moderate control dimensions.
  const Eigen::MatrixXd& dense_hessian() const;

 private:
  const DiscreteSpace* space_;
  const ControlSpace* control_;
  const SpMat* B_;
  SpMat M_;
  Vec f_load_, yd_load_;
  double yd_sq_ = 0.0;
  double gamma_ = 1.0;
  mutable std::optional<Vec> t0_;
  mutable std::optional<Eigen::MatrixXd> dense_h_;
};

/// lambda1 = max(t + gamma*phi1, 0), lambda2 = min(t + gamma*phi2, 0).
std::pair<Vec, Vec> compute_multipliers(const Vec& trace_term, const Vec& phi1,
                                        const Vec& phi2, double gamma);

/// Max over stationarity, multiplier signs, complementarity integrals and
/// feasibility violation.
double kkt_residual(const ReducedProblem& pr, const OCPSolution& sol);

/// Primal-dual active set iteration started from clamp(0) (or from u0 when
/// given, e.g. a prolonged coarse solution). Non-convergence returns the best
/// iterate with converged = false; a revisited non-adjacent active set throws
/// CyclingError with the set history in the message. The inner equality-
/// constrained solves use the dense Hessian for small control dimensions and
/// a matrix-free conjugate gradient in the weighted inner product otherwise.
OCPSolution solve_ocp_pdas(const ReducedProblem& pr, double tol = 1e-10,
                           int maxit = 50, const Vec* u0 = nullptr);

/// Variational discretization: the same semismooth iteration run on the
/// quadrature-node control space (the caller builds the problem with
/// make_vd_control_space); the control is never projected onto W_rho.
OCPSolution solve_ocp_variational(const ReducedProblem& pr, double tol = 1e-10,
                                  int maxit = 50, const Vec* u0 = nullptr);

}  // namespace nocp
