#include "nocp/ocp.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

namespace nocp {

namespace {
constexpr int kDenseHessianLimit = 600;
}

ReducedProblem::ReducedProblem(const P1Space& fine, const DiscreteSpace* space,
                               const ControlSpace* control, const OCPData& data,
                               const SpMat* B_star)
    : space_(space), control_(control), B_(B_star), gamma_(data.gamma) {
  if (!(data.gamma > 0.0 && data.gamma <= 1.0))
    throw std::invalid_argument("ReducedProblem: gamma must lie in (0, 1]");
  if (space->fine_dim() != fine.dim)
    throw std::invalid_argument("ReducedProblem: space/fine dimension mismatch");
  if (control->coupling.rows() != fine.dim)
    throw std::invalid_argument("ReducedProblem: control coupling mismatch");
  if (B_ && (B_->rows() != fine.dim || B_->cols() != control->dim()))
    throw std::invalid_argument("ReducedProblem: B_star shape mismatch");
  M_ = assemble_mass(fine);
  f_load_ = assemble_domain_load(fine, data.f);
  yd_load_ = assemble_domain_load(fine, data.y_d);
  const ScalarField& yd = data.y_d;
  yd_sq_ = integrate_domain(*fine.mesh,
                            [&yd](const Eigen::Vector2d& x) { return yd(x) * yd(x); });
}

Vec ReducedProblem::state(const Vec& u) const {
  Vec y = space_->solve_fine(f_load_ + control_->coupling * u);
  if (B_) y -= *B_ * u;
  return y;
}

Vec ReducedProblem::adjoint(const Vec& y) const {
  return space_->solve_fine(M_ * y - yd_load_);
}

double ReducedProblem::tracking_error_l2(const Vec& y) const {
  const double sq = y.dot(M_ * y) - 2.0 * y.dot(yd_load_) + yd_sq_;
  return std::sqrt(std::max(0.0, sq));
}

double ReducedProblem::cost(const Vec& u, const Vec& y) const {
  const double track = tracking_error_l2(y);
  return 0.5 * track * track + 0.5 * gamma_ * control_->inner(u, u);
}

Vec ReducedProblem::trace_term(const Vec& y, const Vec& p) const {
  Vec t = control_->coupling.transpose() * p;
  if (B_) t -= B_->transpose() * (M_ * y - yd_load_);
  return t.cwiseQuotient(control_->weights);
}

Vec ReducedProblem::gradient(const Vec& u) const {
  const Vec y = state(u);
  const Vec p = adjoint(y);
  return gamma_ * u + trace_term(y, p);
}

Vec ReducedProblem::state_hom(const Vec& du) const {
  Vec y = space_->solve_fine(control_->coupling * du);
  if (B_) y -= *B_ * du;
  return y;
}

Vec ReducedProblem::adjoint_hom(const Vec& y_lin) const {
  return space_->solve_fine(M_ * y_lin);
}

Vec ReducedProblem::trace_term_hom(const Vec& y_lin, const Vec& p_lin) const {
  Vec t = control_->coupling.transpose() * p_lin;
  if (B_) t -= B_->transpose() * (M_ * y_lin);
  return t.cwiseQuotient(control_->weights);
}

Vec ReducedProblem::hessian_apply(const Vec& du) const {
  const Vec y_lin = state_hom(du);
  const Vec p_lin = adjoint_hom(y_lin);
  return gamma_ * du + trace_term_hom(y_lin, p_lin);
}

const Vec& ReducedProblem::gradient_offset() const {
  if (!t0_) {
    const Vec y0 = state(Vec::Zero(control_->dim()));
    t0_ = trace_term(y0, adjoint(y0));
  }
  return *t0_;
}

const Eigen::MatrixXd& ReducedProblem::dense_hessian() const {
  if (!dense_h_) {
    const int m = control_->dim();
    Eigen::MatrixXd H(m, m);
    Vec e = Vec::Zero(m);
    for (int j = 0; j < m; ++j) {
      e[j] = 1.0;
      H.col(j) = hessian_apply(e);
      e[j] = 0.0;
    }
    dense_h_ = std::move(H);
  }
  return *dense_h_;
}

std::pair<Vec, Vec> compute_multipliers(const Vec& trace_term, const Vec& phi1,
                                        const Vec& phi2, double gamma) {
  Vec l1 = (trace_term + gamma * phi1).cwiseMax(0.0);
  Vec l2 = (trace_term + gamma * phi2).cwiseMin(0.0);
  return {std::move(l1), std::move(l2)};
}

double kkt_residual(const ReducedProblem& pr, const OCPSolution& sol) {
  const ControlSpace& cs = pr.control();
  const Vec t = pr.trace_term(sol.y, sol.p);
  const double stat =
      cs.norm(t + pr.gamma() * sol.u - sol.lambda1 - sol.lambda2);
  const double sign1 = cs.norm(sol.lambda1.cwiseMin(0.0));
  const double sign2 = cs.norm(sol.lambda2.cwiseMax(0.0));
  const double comp1 = std::abs(
      (cs.weights.array() * sol.lambda1.array() * (sol.u - cs.lower).array()).sum());
  const double comp2 = std::abs(
      (cs.weights.array() * sol.lambda2.array() * (sol.u - cs.upper).array()).sum());
  double feas = 0.0;
  feas = std::max(feas, (cs.lower - sol.u).maxCoeff());
  feas = std::max(feas, (sol.u - cs.upper).maxCoeff());
  return std::max({stat, sign1, sign2, comp1, comp2, feas});
}

namespace {

// H_II u_I = rhs_I for the free set; active entries already fixed in u.
void solve_free_subsystem(const ReducedProblem& pr, const std::vector<int>& free,
                          const Vec& rhs_free, Vec& u) {
  const ControlSpace& cs = pr.control();
  const int nf = static_cast<int>(free.size());
  if (nf == 0) return;

  if (cs.dim() <= kDenseHessianLimit) {
    const Eigen::MatrixXd& H = pr.dense_hessian();
    // W H is symmetric positive definite (a(.,.)-type operator in the
    // weighted inner product), so solve the weighted subsystem by LDLT.
    Eigen::MatrixXd Hs(nf, nf);
    Vec b(nf);
    for (int i = 0; i < nf; ++i) {
      b[i] = cs.weights[free[i]] * rhs_free[i];
      for (int j = 0; j < nf; ++j)
        Hs(i, j) = cs.weights[free[i]] * H(free[i], free[j]);
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(0.5 * (Hs + Hs.transpose()));
    if (ldlt.info() != Eigen::Success)
      throw SolveFailure("pdas: dense reduced-Hessian factorization failed");
    const Vec x = ldlt.solve(b);
    for (int i = 0; i < nf; ++i) u[free[i]] = x[i];
    return;
  }

  // matrix-free CG in the weighted inner product, warm started from u
  const int m = cs.dim();
  std::vector<char> is_free(m, 0);
  for (int e : free) is_free[e] = 1;
  auto apply = [&](const Vec& x_free) {
    Vec full = Vec::Zero(m);
    for (int i = 0; i < nf; ++i) full[free[i]] = x_free[i];
    const Vec hv = pr.hessian_apply(full);
    Vec out(nf);
    for (int i = 0; i < nf; ++i) out[i] = hv[free[i]];
    return out;
  };
  Vec w_free(nf);
  for (int i = 0; i < nf; ++i) w_free[i] = cs.weights[free[i]];
  auto wdot = [&](const Vec& a, const Vec& b) {
    return (w_free.array() * a.array() * b.array()).sum();
  };

  Vec x(nf);
  for (int i = 0; i < nf; ++i) x[i] = u[free[i]];
  Vec r = rhs_free - apply(x);
  const double rhs_norm = std::sqrt(std::max(0.0, wdot(rhs_free, rhs_free)));
  const double tol = 1e-12 * std::max(rhs_norm, 1e-30);
  Vec d = r;
  double rr = wdot(r, r);
  const int maxit = 2000;
  int it = 0;
  for (; it < maxit && std::sqrt(rr) > tol; ++it) {
    const Vec hd = apply(d);
    const double dhd = wdot(d, hd);
    if (dhd <= 0.0)
      throw SolveFailure("pdas: reduced Hessian lost positivity in CG");
    const double alpha = rr / dhd;
    x += alpha * d;
    r -= alpha * hd;
    const double rr_new = wdot(r, r);
    d = r + (rr_new / rr) * d;
    rr = rr_new;
  }
  if (std::sqrt(rr) > tol) {
    std::ostringstream os;
    os << "pdas: reduced CG stalled at relative residual "
       << std::sqrt(rr) / std::max(rhs_norm, 1e-30) << " after " << it
       << " iterations";
    throw SolveFailure(os.str());
  }
  for (int i = 0; i < nf; ++i) u[free[i]] = x[i];
}

std::string format_set_history(const std::vector<std::vector<char>>& history) {
  std::ostringstream os;
  for (std::size_t k = 0; k < history.size(); ++k) {
    int a1 = 0, a2 = 0;
    for (char c : history[k]) {
      if (c == 1) ++a1;
      if (c == 2) ++a2;
    }
    os << (k ? ", " : "") << "it" << k + 1 << ":(" << a1 << "," << a2 << ")";
  }
  return os.str();
}

}  // namespace

OCPSolution solve_ocp_pdas(const ReducedProblem& pr, double tol, int maxit,
                           const Vec* u0) {
  const ControlSpace& cs = pr.control();
  const int m = cs.dim();
  const double gamma = pr.gamma();

  Vec u = u0 ? cs.clamp(*u0) : cs.clamp(Vec::Zero(m));

  OCPSolution best;
  best.kkt_residual = std::numeric_limits<double>::infinity();
  std::vector<double> cost_history;
  std::vector<std::vector<char>> set_history;

  for (int it = 1; it <= maxit; ++it) {
    OCPSolution cur;
    cur.u = u;
    cur.y = pr.state(u);
    cur.p = pr.adjoint(cur.y);
    const Vec t = pr.trace_term(cur.y, cur.p);
    auto [l1, l2] = compute_multipliers(t, cs.lower, cs.upper, gamma);
    cur.lambda1 = std::move(l1);
    cur.lambda2 = std::move(l2);
    cur.iterations = it;
    cur.cost = pr.cost(u, cur.y);
    cur.kkt_residual = kkt_residual(pr, cur);
    cost_history.push_back(cur.cost);
    cur.cost_history = cost_history;

    // active sets from the multiplier predictors; ties go inactive
    std::vector<char> sig(m, 0);
    for (int e = 0; e < m; ++e) {
      if (t[e] + gamma * cs.lower[e] > 0.0)
        sig[e] = 1;
      else if (t[e] + gamma * cs.upper[e] < 0.0)
        sig[e] = 2;
    }

    const bool sets_repeated = !set_history.empty() && sig == set_history.back();
    if (sets_repeated && cur.kkt_residual <= tol) {
      cur.converged = true;
      return cur;
    }
    if (cur.kkt_residual < best.kkt_residual) best = cur;

    if (!sets_repeated &&
        std::find(set_history.begin(), set_history.end(), sig) != set_history.end())
      throw CyclingError("pdas: active-set cycle detected; history " +
                         format_set_history(set_history));
    set_history.push_back(sig);
    if (it == maxit) break;

    // equality-constrained step for the predicted sets
    Vec u_next = Vec::Zero(m);
    std::vector<int> free;
    free.reserve(m);
    for (int e = 0; e < m; ++e) {
      if (sig[e] == 1)
        u_next[e] = cs.lower[e];
      else if (sig[e] == 2)
        u_next[e] = cs.upper[e];
      else
        free.push_back(e);
    }
    const Vec& t0 = pr.gradient_offset();
    const Vec t_lin_active =
        pr.hessian_apply(u_next) - gamma * u_next;  // T_lin(u on active part)
    Vec rhs(free.size());
    for (std::size_t i = 0; i < free.size(); ++i)
      rhs[i] = -t0[free[i]] - t_lin_active[free[i]];
    for (std::size_t i = 0; i < free.size(); ++i) u_next[free[i]] = u[free[i]];
    solve_free_subsystem(pr, free, rhs, u_next);
    u = u_next;
  }

  best.converged = false;
  best.cost_history = cost_history;
  return best;
}

OCPSolution solve_ocp_variational(const ReducedProblem& pr, double tol, int maxit,
                                  const Vec* u0) {
  if (pr.control().piecewise_constant)
    throw std::invalid_argument(
        "solve_ocp_variational: expected a quadrature-node control space");
  return solve_ocp_pdas(pr, tol, maxit, u0);
}

}  // namespace nocp
