#pragma once

#include <string>
#include <vector>

#include "nocp/ocp.hpp"

namespace nocp {

struct BenchmarkCase {
  std::string id;
  OCPData data;
  bool has_exact = false;
  // the exact triple when it is constant (const-exact case)
  double exact_y = 0.0, exact_u = 0.0, exact_p = 0.0;
};

/// "const-exact": interior optimum with known constant solution.
/// "smooth-active": smooth data tuned so both bounds are partially active.
/// "rough-random": same data over the seeded checkerboard coefficient.
BenchmarkCase benchmark_case(const std::string& id, unsigned seed = 123u);

/// Projected-gradient reference solver, deliberately independent of the
/// active-set machinery: fixed step 1/(gamma + L_est) with backtracking on
/// non-descent. Guarded to small problems (state dimension <= 200).
OCPSolution oracle_solve_pg(const ReducedProblem& pr, double tol = 1e-12,
                            long max_iters = 1000000);

struct RateFit {
  double rate = 0.0;             // least-squares slope of log err vs log h
  std::vector<double> pairwise;  // log2(e_i / e_{i+1}) / log2(h_i / h_{i+1})
  int used = 0;                  // positive samples that entered the fit
};

/// Log-log least-squares fit; nonpositive errors are excluded.
RateFit fit_rates(const std::vector<double>& h, const std::vector<double>& err);

struct AppendixBound {
  std::string name;
  double value = 0.0, bound = 0.0;
  bool ok = false;
};

struct AppendixReport {
  double C_sharp = 0.0;
  std::vector<AppendixBound> bounds;
  bool all_ok = true;
};

/// A-priori bounds on the optimal triple in terms of the data norms and the
/// estimated trace/Poincare constants. norm_f, norm_yd are L2(Omega) norms,
/// norm_phi* are L2(Gamma) norms of the bounds, track_err = ||y - y_d||,
/// norm_u the L2(Gamma) control norm, norm_*_h1 the H1 norms.
AppendixReport appendix_bounds_check(double gamma, double alpha,
                                     const ConstantEstimates& est,
                                     double norm_f, double norm_yd,
                                     double norm_phi1, double norm_phi2,
                                     double track_err, double norm_u,
                                     double norm_y_h1, double norm_p_h1);

}  // namespace nocp
