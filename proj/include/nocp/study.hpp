#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nocp/multiscale.hpp"
#include "nocp/ocp.hpp"
#include "nocp/verify.hpp"

namespace nocp {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat JSON config; unknown keys are rejected. `vary` selects the study
/// family: "h" (mesh refinement, default), "rho" (boundary mesh refinement at
/// fixed h) or "H" (multiscale coarse refinement at fixed h).
struct StudyConfig {
  std::string case_id = "smooth-active";  // key "case"
  std::string mode = "standard";          // standard | variational | multiscale
  std::string vary = "h";
  int levels = 3;
  int n0 = 8;        // base fine mesh (finest-h studies refine from here)
  int k = 1;         // boundary refinement factor per fine boundary edge
  int nH0 = 4;       // first coarse mesh for H studies
  double gamma = -1.0;  // < 0: benchmark default
  int layers = kGlobalLayers;  // 0 selects ceil(2 log 1/H) per level
  double tol = 1e-10;
  int maxit = 50;
  std::string out = ".";
  unsigned seed = 123u;
  // command-line only
  bool plot = true;
  int jobs = 1;
};

StudyConfig load_config(const std::string& path);

/// Criterion-style KKT audit of one converged solve.
struct KKTAudit {
  double lambda1_min = 0.0;   // must be >= -1e-12
  double lambda2_max = 0.0;   // must be <= 1e-12
  double comp1 = 0.0;         // |int lambda1 (u - phi1)| <= 1e-10
  double comp2 = 0.0;         // |int lambda2 (u - phi2)| <= 1e-10
  double stationarity = 0.0;  // L2(Gamma) norm <= 1e-8
  double feasibility = 0.0;   // <= 1e-12
  bool pass = false;
};
KKTAudit kkt_audit(const ReducedProblem& pr, const OCPSolution& sol);

struct LevelRow {
  int level = 0;
  double h = 0.0, rho = 0.0, H = 0.0;
  double err_y = 0.0, err_u = 0.0, err_p = 0.0;
  int iters = 0;
  double seconds = 0.0;
  bool converged = false;
};

struct StudyResult {
  std::vector<LevelRow> rows;
  RateFit rate_y, rate_u, rate_p;
  std::vector<KKTAudit> audits;  // one per converged level (+ reference)
  bool all_converged = false;
};

/// Mesh-refinement study (standard or variational mode) against an overkill
/// reference 8x finer in h and rho.
StudyResult run_h_study(const StudyConfig& cfg);

/// Boundary-mesh refinement at fixed fine mesh: k doubles per level, the
/// reference uses k_ref = 8 x finest k on the same mesh.
StudyResult run_rho_study(const StudyConfig& cfg);

/// Multiscale coarse-mesh study at fixed fine mesh and fixed rho: the
/// reference is the standard fine-mesh solution of the same problem.
StudyResult run_H_study(const StudyConfig& cfg);

std::string study_csv(const StudyResult& result);
std::string study_svg(const StudyResult& result);

/// CLI entry points; return process exit codes (0 ok, 1 config error,
/// 2 non-convergence, 3 numeric failure).
int run_solve(const StudyConfig& cfg);
int run_study(const StudyConfig& cfg);
int run_audit(const StudyConfig& cfg);

}  // namespace nocp
