#include "nocp/study.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace nocp {

namespace {

using json = nlohmann::json;

double wall_seconds(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

int int_log2(int v) {
  int l = 0;
  while (v > 1 && v % 2 == 0) {
    v /= 2;
    ++l;
  }
  if (v != 1) return -1;
  return l;
}

// ---------------------------------------------------------------------------
// per-level solve plumbing

struct LevelSolve {
  Mesh mesh;  // owned so the spaces below stay valid
  BoundaryMesh bmesh;
  std::unique_ptr<P1Space> space;
  SpMat A, M;
  std::unique_ptr<DiscreteSpace> dspace;
  std::unique_ptr<ControlSpace> control;
  std::unique_ptr<MultiscaleSpace> ms;
  std::unique_ptr<BoundaryCorrector> bstar;
  std::unique_ptr<ReducedProblem> problem;
  OCPSolution sol;
};

// Solves one configuration on `mesh`. mode: standard | variational |
// multiscale; for multiscale the mesh is the *coarse* mesh of `hier`.
void solve_on(LevelSolve& out, const OCPData& data, const StudyConfig& cfg,
              const std::string& mode, int k,
              const MeshHierarchy* hier = nullptr, int layers = kGlobalLayers) {
  out.space = std::make_unique<P1Space>(out.mesh);
  out.A = assemble_a(*out.space, data.coeff);
  out.M = assemble_mass(*out.space);
  out.bmesh = induced_boundary_mesh(out.mesh, k);
  if (mode == "variational") {
    out.control = std::make_unique<ControlSpace>(
        make_vd_control_space(*out.space, data.phi1, data.phi2));
  } else {
    out.control = std::make_unique<ControlSpace>(
        make_pc_control_space(*out.space, out.bmesh, data.phi1, data.phi2));
  }
  const SpMat* B = nullptr;
  if (mode == "multiscale") {
    if (!hier) throw ConfigError("multiscale solve needs a mesh hierarchy");
    CoarseInterpolation IH = build_IH(*hier);
    out.ms = std::make_unique<MultiscaleSpace>(
        build_ms_space(*hier, out.A, IH, layers));
    out.bstar = std::make_unique<BoundaryCorrector>(
        build_B_star(*hier, out.A, IH, out.bmesh, layers));
    B = &out.bstar->columns;
    out.problem = std::make_unique<ReducedProblem>(*out.space, &out.ms->space,
                                                   out.control.get(), data, B);
  } else {
    out.dspace = std::make_unique<DiscreteSpace>(make_standard_space(out.A));
    out.problem = std::make_unique<ReducedProblem>(
        *out.space, out.dspace.get(), out.control.get(), data, nullptr);
  }
  if (mode == "variational") {
    out.sol = solve_ocp_variational(*out.problem, cfg.tol, cfg.maxit);
  } else {
    out.sol = solve_ocp_pdas(*out.problem, cfg.tol, cfg.maxit);
  }
}

// Maps each element of a nested (finer, same arclength grid) boundary mesh to
// the coarser element containing it. Both meshes partition the unit-square
// boundary uniformly.
std::vector<int> nested_boundary_map(const BoundaryMesh& coarse,
                                     const BoundaryMesh& fine) {
  const int mc = coarse.num_elements();
  const double spacing = 4.0 / mc;
  std::vector<int> slot_to_elem(mc, -1);
  for (int e = 0; e < mc; ++e) {
    double s = unit_square_arclength(coarse.elements[e].midpoint());
    int slot = static_cast<int>(std::floor(s / spacing));
    slot_to_elem[std::min(std::max(slot, 0), mc - 1)] = e;
  }
  std::vector<int> map(fine.num_elements());
  for (int r = 0; r < fine.num_elements(); ++r) {
    double s = unit_square_arclength(fine.elements[r].midpoint());
    int slot = static_cast<int>(std::floor(s / spacing));
    map[r] = slot_to_elem[std::min(std::max(slot, 0), mc - 1)];
    if (map[r] < 0) throw SolveFailure("boundary meshes are not nested");
  }
  return map;
}

// ||u_c - u_f||_{L2(Gamma)} for piecewise-constant controls on nested meshes.
double pc_control_error(const BoundaryMesh& bm_c, const Vec& u_c,
                        const BoundaryMesh& bm_f, const ControlSpace& cs_f,
                        const Vec& u_f) {
  std::vector<int> map = nested_boundary_map(bm_c, bm_f);
  double acc = 0.0;
  for (int r = 0; r < bm_f.num_elements(); ++r) {
    double d = u_c[map[r]] - u_f[r];
    acc += cs_f.weights[r] * d * d;
  }
  return std::sqrt(acc);
}

// Variational-mode control error: both controls are recovered pointwise from
// the adjoints via u = clamp(-p/gamma) at the reference quadrature nodes.
double vd_control_error(const Vec& p_c_on_ref, const Vec& p_ref,
                        const ControlSpace& cs_ref, double gamma) {
  Vec u_c = cs_ref.clamp(-cs_ref.trace_means(p_c_on_ref) / gamma);
  Vec u_f = cs_ref.clamp(-cs_ref.trace_means(p_ref) / gamma);
  return cs_ref.norm(u_c - u_f);
}

void fill_rates(StudyResult& res, std::vector<double> xs) {
  std::vector<double> ey, eu, ep;
  for (const LevelRow& r : res.rows) {
    ey.push_back(r.err_y);
    eu.push_back(r.err_u);
    ep.push_back(r.err_p);
  }
  res.rate_y = fit_rates(xs, ey);
  res.rate_u = fit_rates(xs, eu);
  res.rate_p = fit_rates(xs, ep);
}

void run_levels(int count, int jobs, const std::function<void(int)>& work) {
  if (jobs <= 1) {
    for (int i = 0; i < count; ++i) work(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errs(count);
  for (int t = 0; t < std::min(jobs, count); ++t) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        try {
          work(i);
        } catch (...) {
          errs[i] = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errs)
    if (e) std::rethrow_exception(e);
}

std::string format_cell(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12e", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// config

StudyConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");

  static const std::vector<std::string> known = {
      "case", "mode", "vary",   "levels", "n0",  "k",   "nH0",
      "gamma", "layers", "tol", "maxit",  "out", "seed"};
  for (const auto& item : j.items()) {
    if (std::find(known.begin(), known.end(), item.key()) == known.end())
      throw ConfigError("unknown config key: " + item.key());
  }

  StudyConfig cfg;
  try {
    if (j.contains("case")) cfg.case_id = j.at("case").get<std::string>();
    if (j.contains("mode")) cfg.mode = j.at("mode").get<std::string>();
    if (j.contains("vary")) cfg.vary = j.at("vary").get<std::string>();
    if (j.contains("levels")) cfg.levels = j.at("levels").get<int>();
    if (j.contains("n0")) cfg.n0 = j.at("n0").get<int>();
    if (j.contains("k")) cfg.k = j.at("k").get<int>();
    if (j.contains("nH0")) cfg.nH0 = j.at("nH0").get<int>();
    if (j.contains("gamma")) cfg.gamma = j.at("gamma").get<double>();
    if (j.contains("layers")) cfg.layers = j.at("layers").get<int>();
    if (j.contains("tol")) cfg.tol = j.at("tol").get<double>();
    if (j.contains("maxit")) cfg.maxit = j.at("maxit").get<int>();
    if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<unsigned>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }

  if (cfg.mode != "standard" && cfg.mode != "variational" &&
      cfg.mode != "multiscale")
    throw ConfigError("mode must be standard, variational or multiscale");
  if (cfg.vary != "h" && cfg.vary != "rho" && cfg.vary != "H")
    throw ConfigError("vary must be h, rho or H");
  if (cfg.levels < 1) throw ConfigError("levels must be positive");
  if (cfg.n0 < 2) throw ConfigError("n0 must be at least 2");
  if (cfg.k < 1) throw ConfigError("k must be positive");
  if (cfg.nH0 < 3) throw ConfigError("nH0 must be at least 3");
  if (j.contains("gamma") && !(cfg.gamma > 0.0 && cfg.gamma <= 1.0))
    throw ConfigError("gamma must lie in (0, 1]");
  if (!(cfg.tol > 0.0)) throw ConfigError("tol must be positive");
  if (cfg.maxit < 1) throw ConfigError("maxit must be positive");
  if (cfg.layers < kGlobalLayers) throw ConfigError("invalid layers value");
  return cfg;
}

OCPData study_data(const StudyConfig& cfg) {
  BenchmarkCase bc = benchmark_case(cfg.case_id, cfg.seed);
  OCPData data = bc.data;
  if (cfg.gamma > 0.0) data.gamma = cfg.gamma;
  return data;
}

// ---------------------------------------------------------------------------
// KKT audit

KKTAudit kkt_audit(const ReducedProblem& pr, const OCPSolution& sol) {
  const ControlSpace& cs = pr.control();
  KKTAudit a;
  Vec t = pr.trace_term(sol.y, sol.p);
  Vec stat = t + pr.gamma() * sol.u - sol.lambda1 - sol.lambda2;
  a.stationarity = cs.norm(stat);
  a.lambda1_min = sol.lambda1.size() ? sol.lambda1.minCoeff() : 0.0;
  a.lambda2_max = sol.lambda2.size() ? sol.lambda2.maxCoeff() : 0.0;
  a.comp1 = std::abs(cs.inner(sol.lambda1, sol.u - cs.lower));
  a.comp2 = std::abs(cs.inner(sol.lambda2, sol.u - cs.upper));
  double lo = (cs.lower - sol.u).maxCoeff();
  double hi = (sol.u - cs.upper).maxCoeff();
  a.feasibility = std::max(0.0, std::max(lo, hi));
  a.pass = a.lambda1_min >= -1e-12 && a.lambda2_max <= 1e-12 &&
           a.comp1 <= 1e-10 && a.comp2 <= 1e-10 && a.stationarity <= 1e-8 &&
           a.feasibility <= 1e-12;
  return a;
}

// ---------------------------------------------------------------------------
// studies

StudyResult run_h_study(const StudyConfig& cfg) {
  if (cfg.mode == "multiscale")
    throw ConfigError("vary=h supports standard and variational modes");
  if (cfg.levels < 3) throw ConfigError("a study needs at least 3 levels");
  OCPData data = study_data(cfg);

  // chain of meshes: the study levels plus three extra refinements for the
  // 8x overkill reference
  const int extra = 3;
  const int total = cfg.levels + extra;
  std::vector<Mesh> chain;
  std::vector<SpMat> prolong;  // chain[i] -> chain[i+1]
  chain.reserve(total);
  chain.push_back(build_unit_square_mesh(cfg.n0));
  for (int i = 1; i < total; ++i) {
    chain.push_back(refine_uniform(chain.back()));
    prolong.push_back(
        prolongation_matrix(chain.back(), chain[i - 1].num_vertices()));
  }
  auto to_ref = [&](Vec v, int from) {
    for (int i = from; i < total - 1; ++i) v = prolong[i] * v;
    return v;
  };

  StudyResult res;
  res.rows.resize(cfg.levels);
  std::vector<KKTAudit> audits(cfg.levels + 1);

  // reference solve (solved first; shared read-only afterwards)
  LevelSolve ref;
  ref.mesh = chain.back();
  {
    auto t0 = std::chrono::steady_clock::now();
    solve_on(ref, data, cfg, cfg.mode, cfg.k);
    if (!ref.sol.converged)
      throw SolveFailure("reference solve did not converge (kkt " +
                         std::to_string(ref.sol.kkt_residual) + ")");
    audits[cfg.levels] = kkt_audit(*ref.problem, ref.sol);
    (void)t0;
  }

  run_levels(cfg.levels, cfg.jobs, [&](int l) {
    auto t0 = std::chrono::steady_clock::now();
    LevelSolve ls;
    ls.mesh = chain[l];
    solve_on(ls, data, cfg, cfg.mode, cfg.k);
    LevelRow& row = res.rows[l];
    row.level = l;
    row.h = ls.mesh.h;
    row.rho = ls.bmesh.rho;
    row.H = std::nan("");
    row.iters = ls.sol.iterations;
    row.converged = ls.sol.converged;
    if (ls.sol.converged) audits[l] = kkt_audit(*ls.problem, ls.sol);

    Vec dy = to_ref(ls.sol.y, l) - ref.sol.y;
    Vec dp_ref = to_ref(ls.sol.p, l);
    row.err_y = norm_bilinear(ref.M, dy);
    row.err_p = norm_bilinear(ref.A, dp_ref - ref.sol.p);
    if (cfg.mode == "variational") {
      row.err_u =
          vd_control_error(dp_ref, ref.sol.p, *ref.control, data.gamma);
    } else {
      row.err_u = pc_control_error(ls.bmesh, ls.sol.u, ref.bmesh,
                                   *ref.control, ref.sol.u);
    }
    row.seconds = wall_seconds(t0);
  });

  std::vector<double> hs;
  for (const LevelRow& r : res.rows) hs.push_back(r.h);
  fill_rates(res, hs);
  res.audits = audits;
  res.all_converged = true;
  for (const LevelRow& r : res.rows) res.all_converged &= r.converged;
  return res;
}

StudyResult run_rho_study(const StudyConfig& cfg) {
  if (cfg.mode != "standard")
    throw ConfigError("vary=rho requires standard mode");
  if (cfg.levels < 3) throw ConfigError("a study needs at least 3 levels");
  OCPData data = study_data(cfg);

  // fixed fine mesh; only the boundary mesh is refined
  Mesh mesh = build_unit_square_mesh(cfg.n0);
  P1Space space(mesh);
  SpMat A = assemble_a(space, data.coeff);
  SpMat M = assemble_mass(space);
  DiscreteSpace ds = make_standard_space(A);

  auto solve_k = [&](int k, OCPSolution& sol, BoundaryMesh& bm,
                     std::unique_ptr<ControlSpace>& cs,
                     std::unique_ptr<ReducedProblem>& pr) {
    bm = induced_boundary_mesh(mesh, k);
    cs = std::make_unique<ControlSpace>(
        make_pc_control_space(space, bm, data.phi1, data.phi2));
    pr = std::make_unique<ReducedProblem>(space, &ds, cs.get(), data);
    sol = solve_ocp_pdas(*pr, cfg.tol, cfg.maxit);
  };

  const int k_ref = cfg.k * (1 << (cfg.levels - 1)) * 8;
  BoundaryMesh bm_ref;
  std::unique_ptr<ControlSpace> cs_ref;
  std::unique_ptr<ReducedProblem> pr_ref;
  OCPSolution ref;
  solve_k(k_ref, ref, bm_ref, cs_ref, pr_ref);
  if (!ref.converged)
    throw SolveFailure("reference solve did not converge");

  StudyResult res;
  res.rows.resize(cfg.levels);
  std::vector<KKTAudit> audits(cfg.levels + 1);
  audits[cfg.levels] = kkt_audit(*pr_ref, ref);

  run_levels(cfg.levels, cfg.jobs, [&](int l) {
    auto t0 = std::chrono::steady_clock::now();
    int k = cfg.k * (1 << l);
    BoundaryMesh bm;
    std::unique_ptr<ControlSpace> cs;
    std::unique_ptr<ReducedProblem> pr;
    OCPSolution sol;
    solve_k(k, sol, bm, cs, pr);
    LevelRow& row = res.rows[l];
    row.level = l;
    row.h = mesh.h;
    row.rho = bm.rho;
    row.H = std::nan("");
    row.iters = sol.iterations;
    row.converged = sol.converged;
    if (sol.converged) audits[l] = kkt_audit(*pr, sol);
    row.err_y = norm_bilinear(M, sol.y - ref.y);
    row.err_p = norm_bilinear(A, sol.p - ref.p);
    row.err_u = pc_control_error(bm, sol.u, bm_ref, *cs_ref, ref.u);
    row.seconds = wall_seconds(t0);
  });

  std::vector<double> rhos;
  for (const LevelRow& r : res.rows) rhos.push_back(r.rho);
  fill_rates(res, rhos);
  res.audits = audits;
  res.all_converged = true;
  for (const LevelRow& r : res.rows) res.all_converged &= r.converged;
  return res;
}

StudyResult run_H_study(const StudyConfig& cfg) {
  if (cfg.mode != "multiscale")
    throw ConfigError("vary=H requires multiscale mode");
  if (cfg.levels < 3) throw ConfigError("a study needs at least 3 levels");
  const int nH_last = cfg.nH0 * (1 << (cfg.levels - 1));
  if (cfg.n0 % nH_last != 0 || int_log2(cfg.n0 / nH_last) < 1)
    throw ConfigError(
        "n0 must be a power-of-two multiple (>= 2) of the finest coarse mesh");
  OCPData data = study_data(cfg);

  // Coarse chain by uniform refinement so that every level refines to the
  // *identical* fine mesh (refinement is deterministic); a fresh
  // build_unit_square_mesh(n0) would triangulate the same points differently
  // and the solutions could not be compared coefficient-wise.
  const int total_refs = int_log2(cfg.n0 / cfg.nH0);
  std::vector<Mesh> coarse_chain;
  coarse_chain.push_back(build_unit_square_mesh(cfg.nH0));
  for (int l = 1; l < cfg.levels; ++l)
    coarse_chain.push_back(refine_uniform(coarse_chain.back()));

  // fixed fine mesh and boundary mesh; the reference is the standard
  // fine-space solution of the same discrete problem
  LevelSolve ref;
  {
    Mesh fine = coarse_chain.back();
    for (int r = 0; r < total_refs - (cfg.levels - 1); ++r)
      fine = refine_uniform(fine);
    ref.mesh = fine;
  }
  solve_on(ref, data, cfg, "standard", cfg.k);
  if (!ref.sol.converged)
    throw SolveFailure("reference solve did not converge");

  StudyResult res;
  res.rows.resize(cfg.levels);
  std::vector<KKTAudit> audits(cfg.levels + 1);
  audits[cfg.levels] = kkt_audit(*ref.problem, ref.sol);

  run_levels(cfg.levels, cfg.jobs, [&](int l) {
    auto t0 = std::chrono::steady_clock::now();
    int nH = cfg.nH0 * (1 << l);
    double H = std::sqrt(2.0) / nH;
    int layers = cfg.layers == 0 ? default_layers(H) : cfg.layers;
    MeshHierarchy hier = build_hierarchy(coarse_chain[l], total_refs - l);
    LevelSolve ls;
    ls.mesh = hier.fine;
    solve_on(ls, data, cfg, "multiscale", cfg.k, &hier, layers);
    LevelRow& row = res.rows[l];
    row.level = l;
    row.h = ls.mesh.h;
    row.rho = ls.bmesh.rho;
    row.H = H;
    row.iters = ls.sol.iterations;
    row.converged = ls.sol.converged;
    if (ls.sol.converged) audits[l] = kkt_audit(*ls.problem, ls.sol);
    row.err_y = norm_bilinear(ref.M, ls.sol.y - ref.sol.y);
    row.err_p = norm_bilinear(ref.A, ls.sol.p - ref.sol.p);
    row.err_u = ref.control->norm(ls.sol.u - ref.sol.u);
    row.seconds = wall_seconds(t0);
  });

  std::vector<double> Hs;
  for (const LevelRow& r : res.rows) Hs.push_back(r.H);
  fill_rates(res, Hs);
  res.audits = audits;
  res.all_converged = true;
  for (const LevelRow& r : res.rows) res.all_converged &= r.converged;
  return res;
}

// ---------------------------------------------------------------------------
// outputs

std::string study_csv(const StudyResult& result) {
  std::ostringstream os;
  os << "level,h,rho,H,err_y_L2,err_u_L2G,err_p_energy,"
        "rate_y,rate_u,rate_p,iters,seconds\n";
  for (size_t i = 0; i < result.rows.size(); ++i) {
    const LevelRow& r = result.rows[i];
    auto rate = [&](const RateFit& f) {
      if (i == 0 || i - 1 >= f.pairwise.size()) return std::string();
      return format_cell(f.pairwise[i - 1]);
    };
    char sec[32];
    std::snprintf(sec, sizeof(sec), "%.3f", r.seconds);
    os << r.level << ',' << format_cell(r.h) << ',' << format_cell(r.rho)
       << ',' << format_cell(r.H) << ',' << format_cell(r.err_y) << ','
       << format_cell(r.err_u) << ',' << format_cell(r.err_p) << ','
       << rate(result.rate_y) << ',' << rate(result.rate_u) << ','
       << rate(result.rate_p) << ',' << r.iters << ',' << sec << '\n';
  }
  return os.str();
}

std::string study_svg(const StudyResult& result) {
  // log-log error-vs-mesh-size plot with three series
  const double W = 640, Hgt = 480, ml = 70, mr = 20, mt = 30, mb = 50;
  std::vector<double> xs;
  for (const LevelRow& r : result.rows)
    xs.push_back(!std::isnan(r.H) ? r.H : r.rho);
  struct Series {
    const char* name;
    const char* color;
    std::vector<double> e;
  };
  std::vector<Series> series(3);
  series[0] = {"err_y_L2", "#1f77b4", {}};
  series[1] = {"err_u_L2G", "#d62728", {}};
  series[2] = {"err_p_energy", "#2ca02c", {}};
  for (const LevelRow& r : result.rows) {
    series[0].e.push_back(r.err_y);
    series[1].e.push_back(r.err_u);
    series[2].e.push_back(r.err_p);
  }
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (double x : xs) {
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
  }
  for (const Series& s : series)
    for (double e : s.e)
      if (e > 0) {
        ymin = std::min(ymin, e);
        ymax = std::max(ymax, e);
      }
  if (!(ymin < ymax)) {
    ymin = 1e-16;
    ymax = 1.0;
  }
  if (!(xmin < xmax)) {
    xmin *= 0.5;
    xmax *= 2.0;
  }
  auto px = [&](double x) {
    return ml + (std::log(x) - std::log(xmin)) /
                    (std::log(xmax) - std::log(xmin)) * (W - ml - mr);
  };
  auto py = [&](double e) {
    return Hgt - mb - (std::log(e) - std::log(ymin)) /
                          (std::log(ymax) - std::log(ymin)) * (Hgt - mt - mb);
  };
  std::ostringstream os;
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='"
     << Hgt << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
  os << "<line x1='" << ml << "' y1='" << Hgt - mb << "' x2='" << W - mr
     << "' y2='" << Hgt - mb << "' stroke='black'/>\n";
  os << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='"
     << Hgt - mb << "' stroke='black'/>\n";
  for (size_t i = 0; i < xs.size(); ++i) {
    os << "<text x='" << px(xs[i]) << "' y='" << Hgt - mb + 18
       << "' font-size='11' text-anchor='middle'>" << format_cell(xs[i]).substr(0, 8)
       << "</text>\n";
  }
  os << "<text x='" << (ml + W - mr) / 2 << "' y='" << Hgt - 10
     << "' font-size='13' text-anchor='middle'>mesh size (log)</text>\n";
  os << "<text x='18' y='" << (mt + Hgt - mb) / 2
     << "' font-size='13' text-anchor='middle' transform='rotate(-90 18 "
     << (mt + Hgt - mb) / 2 << ")'>error (log)</text>\n";
  double ly = mt + 8;
  for (const Series& s : series) {
    std::ostringstream pts;
    for (size_t i = 0; i < xs.size(); ++i)
      if (s.e[i] > 0) pts << px(xs[i]) << ',' << py(s.e[i]) << ' ';
    os << "<polyline fill='none' stroke='" << s.color
       << "' stroke-width='1.5' points='" << pts.str() << "'/>\n";
    for (size_t i = 0; i < xs.size(); ++i)
      if (s.e[i] > 0)
        os << "<circle cx='" << px(xs[i]) << "' cy='" << py(s.e[i])
           << "' r='3' fill='" << s.color << "'/>\n";
    os << "<rect x='" << W - mr - 150 << "' y='" << ly - 8
       << "' width='10' height='10' fill='" << s.color << "'/>\n";
    os << "<text x='" << W - mr - 135 << "' y='" << ly + 1
       << "' font-size='12'>" << s.name << "</text>\n";
    ly += 18;
  }
  os << "</svg>\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// CLI entry points

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path().empty()
                                          ? std::filesystem::path(".")
                                          : p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw SolveFailure("cannot write " + p.string());
  out << text;
}

int guard(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const CyclingError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const SolveFailure& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  }
}

// single solve used by `solve` and `audit-kkt`
LevelSolve single_solve(const StudyConfig& cfg, OCPData& data) {
  data = study_data(cfg);
  LevelSolve ls;
  if (cfg.mode == "multiscale") {
    int refs = int_log2(cfg.n0 / cfg.nH0);
    if (cfg.n0 % cfg.nH0 != 0 || refs < 1)
      throw ConfigError("n0 must be a power-of-two multiple (>= 2) of nH0");
    double H = std::sqrt(2.0) / cfg.nH0;
    int layers = cfg.layers == 0 ? default_layers(H) : cfg.layers;
    MeshHierarchy hier = build_hierarchy(build_unit_square_mesh(cfg.nH0), refs);
    ls.mesh = hier.fine;
    solve_on(ls, data, cfg, "multiscale", cfg.k, &hier, layers);
  } else {
    ls.mesh = build_unit_square_mesh(cfg.n0);
    solve_on(ls, data, cfg, cfg.mode, cfg.k);
  }
  return ls;
}

}  // namespace

int run_solve(const StudyConfig& cfg) {
  return guard([&] {
    OCPData data;
    auto t0 = std::chrono::steady_clock::now();
    LevelSolve ls = single_solve(cfg, data);
    double secs = wall_seconds(t0);
    const OCPSolution& s = ls.sol;
    double norm_u = ls.control->norm(s.u);
    double norm_y = norm_bilinear(ls.M, s.y);
    double norm_p = norm_bilinear(ls.M, s.p);
    std::ostringstream os;
    os << "cost,kkt_residual,iterations,converged,norm_u_L2G,norm_y_L2,"
          "norm_p_L2,seconds\n";
    char sec[32];
    std::snprintf(sec, sizeof(sec), "%.3f", secs);
    os << format_cell(s.cost) << ',' << format_cell(s.kkt_residual) << ','
       << s.iterations << ',' << (s.converged ? 1 : 0) << ','
       << format_cell(norm_u) << ',' << format_cell(norm_y) << ','
       << format_cell(norm_p) << ',' << sec << '\n';
    write_file(std::filesystem::path(cfg.out) / "solve.csv", os.str());
    std::cout << os.str();
    std::cout << (s.converged ? "converged" : "NOT converged (best iterate)")
              << " after " << s.iterations << " iterations, kkt residual "
              << s.kkt_residual << "\n";
    return s.converged ? 0 : 2;
  });
}

int run_study(const StudyConfig& cfg) {
  return guard([&] {
    StudyResult res;
    if (cfg.vary == "h")
      res = run_h_study(cfg);
    else if (cfg.vary == "rho")
      res = run_rho_study(cfg);
    else
      res = run_H_study(cfg);
    std::string csv = study_csv(res);
    write_file(std::filesystem::path(cfg.out) / "study.csv", csv);
    if (cfg.plot)
      write_file(std::filesystem::path(cfg.out) / "study.svg",
                 study_svg(res));
    std::cout << csv;
    std::cout << "fitted rates: y " << res.rate_y.rate << ", u "
              << res.rate_u.rate << ", p " << res.rate_p.rate << "\n";
    return res.all_converged ? 0 : 2;
  });
}

int run_audit(const StudyConfig& cfg) {
  return guard([&] {
    OCPData data;
    LevelSolve ls = single_solve(cfg, data);
    KKTAudit a = kkt_audit(*ls.problem, ls.sol);
    std::ostringstream os;
    os << "check,value,tolerance,pass\n";
    auto row = [&](const char* name, double v, double tol, bool ok) {
      os << name << ',' << format_cell(v) << ',' << format_cell(tol) << ','
         << (ok ? "1" : "0") << '\n';
    };
    row("lambda1_min", a.lambda1_min, -1e-12, a.lambda1_min >= -1e-12);
    row("lambda2_max", a.lambda2_max, 1e-12, a.lambda2_max <= 1e-12);
    row("complementarity_lower", a.comp1, 1e-10, a.comp1 <= 1e-10);
    row("complementarity_upper", a.comp2, 1e-10, a.comp2 <= 1e-10);
    row("stationarity_L2G", a.stationarity, 1e-8, a.stationarity <= 1e-8);
    row("feasibility", a.feasibility, 1e-12, a.feasibility <= 1e-12);
    write_file(std::filesystem::path(cfg.out) / "audit.csv", os.str());
    std::cout << os.str();
    std::cout << (a.pass && ls.sol.converged ? "KKT audit PASS"
                                             : "KKT audit FAIL")
              << "\n";
    return (a.pass && ls.sol.converged) ? 0 : 2;
  });
}

}  // namespace nocp
