// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion ids as
// arguments to run a subset. Exit status is nonzero when any criterion fails.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "micromech/micromech.hpp"
#include "support/dense_oracle.hpp"
#include "support/fixtures.hpp"

using namespace micromech;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const std::array<double, 2> kDomain{50.0, 50.0};

struct Material {
  const char* name;
  IsotropicProps fiber, matrix;
};

const Material kIndustrial[] = {
    {"E-glass/epoxy", {74.00, 0.2000}, {3.76, 0.39}},
    {"AS4/3501-6", {15.00, 0.0714}, {4.60, 0.34}},
    {"HTA/6376", {28.00, 0.3300}, {3.63, 0.34}},
    {"T300/TDE86", {40.00, 0.3986}, {4.35, 0.39}},
};

// 1 -------------------------------------------------------------------------
Outcome homogeneous_identity() {
  const auto t0 = Clock::now();
  Rng rng(2024);
  double worst = 0.0;
  int bad_iters = 0;
  for (int n = 0; n < 10; ++n) {
    const IsotropicProps p{0.5 + 200.0 * rng.uniform(), -0.9 + 1.39 * rng.uniform()};
    const StiffnessField c(Shape{64, 64}, stiffness_from_enu(p));
    const auto a = strain_concentration(c, SolverConfig{});
    for (const auto& v : a.a) worst = std::max(worst, (v - Voigt4::identity()).max_abs());
    for (const auto& l : a.loads) bad_iters += l.iterations != 1;
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-10 && bad_iters == 0 && t < 5.0,
          fmt("max |A - I| = %.2e, loads not in 1 iteration: %d, %.2f s", worst, bad_iters, t)};
}

// 2 -------------------------------------------------------------------------
Outcome dense_oracle() {
  const auto t0 = Clock::now();
  const Shape sh{16, 16};
  std::vector<Grid<std::uint8_t>> geoms{fixtures::disc(sh, 0.25), fixtures::disc(sh, 0.4)};
  Rng rng(99);
  for (int g = 0; g < 3; ++g) {
    Grid<std::uint8_t> m(sh);
    for (auto& v : m) v = rng.uniform() < 0.35 + 0.1 * g ? 1 : 0;
    geoms.push_back(m);
  }
  const double contrast[5] = {2.0, 5.0, 10.0, 17.0, 25.0};
  double worst = 0.0;
  for (auto scheme : {FreqScheme::RotatedGrid, FreqScheme::Continuous}) {
    SolverConfig cfg;
    cfg.scheme = scheme;
    cfg.tol = 1e-12;
    cfg.max_iter = 20000;
    const auto oscheme = scheme == FreqScheme::Continuous ? oracle::Scheme::Continuous : oracle::Scheme::RotatedGrid;
    for (int r = 0; r < 5; ++r) {
      const auto c = fixtures::phases(geoms[static_cast<std::size_t>(r)], {2.0 * contrast[r], 0.25}, {2.0, 0.35});
      const LSSolver solver(c, cfg);
      for (std::size_t j = 0; j < 3; ++j) {
        Voigt2 e;
        e[j] = 1.0;
        worst = std::max(worst, oracle::rel_l2(solver.solve(e).strain,
                                               oracle::solve(c, e, solver.reference_medium(), oscheme).strain));
      }
    }
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-6 && t < 60.0, fmt("max relative L2 = %.2e over 5 RVEs x 3 loads x 2 schemes, %.1f s", worst, t)};
}

// 3 -------------------------------------------------------------------------
Outcome convergence_contract() {
  // A dataset-style design over the property box plus its stiffest-fiber,
  // softest-matrix corner (contrast 85 / 2.5 = 34).
  const PropertyBounds bounds;
  auto rows = lhs_sample(6, bounds.columns(), 7);
  rows.push_back({85.0, 0.45, 2.5, 0.3});
  rows.push_back({85.0, 0.05, 2.5, 0.4});
  const auto vofs = stratify_vof(8, {0.4, 0.6}, 8);
  SolverConfig cfg;
  cfg.record_history = true;
  double worst_res = 0.0, worst_mean = 0.0, max_contrast = 0.0;
  int max_iters = 0, solves = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto m = generate_fiber_rve(vofs[i], 3.5, 0.01, kDomain, {128, 128}, derive_seed(31, i));
    const auto c = assign_properties(m, {rows[i][0], rows[i][1]}, {rows[i][2], rows[i][3]});
    max_contrast = std::max(max_contrast, rows[i][0] / rows[i][2]);
    for (std::size_t j = 0; j < 3; ++j) {
      Voigt2 e;
      e[j] = 1.0;
      const auto r = solve_unit_load(c, e, cfg, m.pixel_size());
      ++solves;
      worst_res = std::max(worst_res, r.residual());
      max_iters = std::max(max_iters, r.iterations);
      for (const auto& mean : r.mean_strain_history) worst_mean = std::max(worst_mean, (mean - e).norm());
    }
  }
  return {worst_res <= 1e-6 && worst_mean <= 1e-10,
          fmt("%d solves, contrast up to %.1f: max residual %.2e (max %d iterations), max |mean(eps) - E| %.2e", solves,
              max_contrast, worst_res, max_iters, worst_mean)};
}

// 4 -------------------------------------------------------------------------
Outcome bounds_sandwich() {
  bool ok = true;
  std::ostringstream os;
  for (const auto& mat : kIndustrial) {
    double prev[3] = {0.0, 0.0, 0.0};
    os << mat.name << " E:";
    for (double vof : {0.40, 0.50, 0.60}) {
      double sum = 0.0;
      for (int s = 0; s < 3; ++s) {
        const auto m = generate_fiber_rve(vof, 3.5, 0.01, kDomain, {128, 128}, derive_seed(400 + s, static_cast<std::uint64_t>(vof * 100)));
        const auto c = assign_properties(m, mat.fiber, mat.matrix);
        const auto h = homogenized_stiffness(c, strain_concentration(c, SolverConfig{}, m.pixel_size()));
        const auto b = stiffness_bounds(c);
        const double E = h.effective().E;
        if (!(E > b.E_reuss() && E < b.E_voigt())) ok = false;
        if (E < prev[s]) ok = false;
        prev[s] = E;
        sum += E;
      }
      os << fmt(" %.3f", sum / 3);
    }
    os << "; ";
  }
  return {ok, os.str() + "bounds strict and monotone in vof per seed"};
}

// 5 -------------------------------------------------------------------------
Outcome elasticity_round_trip() {
  Rng rng(5);
  double worst_E = 0.0, worst_nu = 0.0;
  for (int n = 0; n < 1000; ++n) {
    const IsotropicProps p{0.1 + 500.0 * rng.uniform(), -0.99 + 1.489 * rng.uniform()};
    const auto q = effective_enu(stiffness_from_lame(lame_from_enu(p)));
    worst_E = std::max(worst_E, std::abs(q.E - p.E) / p.E);
    worst_nu = std::max(worst_nu, std::abs(q.nu - p.nu) / std::abs(p.nu));
  }
  return {worst_E <= 1e-12 && worst_nu <= 1e-12,
          fmt("1000 samples: max relative error E %.2e, nu %.2e", worst_E, worst_nu)};
}

// 6 -------------------------------------------------------------------------
Outcome microstructure_statistics() {
  const auto t0 = Clock::now();
  const Shape sh{256, 256};
  double worst_vof = 0.0, worst_clear = std::numeric_limits<double>::infinity();
  int not_periodic = 0;
  for (int i = 0; i < 50; ++i) {
    const double target = 0.40 + 0.20 * i / 49.0;
    const auto m = generate_fiber_rve(target, 3.5, 0.01, kDomain, sh, derive_seed(600, static_cast<std::uint64_t>(i)));
    worst_vof = std::max(worst_vof, std::abs(m.achieved_vof - target));
    worst_clear = std::min(worst_clear, min_clearance(m.fibers, kDomain, 0.0));
    auto moved = m.fibers;
    for (auto& f : moved) {
      f.x += kDomain[0];
      f.y -= kDomain[1];
    }
    not_periodic += !(rasterize(moved, kDomain, sh) == m.grid);
  }
  const double t = seconds_since(t0);
  return {worst_vof <= 0.005 && worst_clear >= 0.0 && not_periodic == 0 && t < 120.0,
          fmt("max |vof - target| = %.2f pp, min clearance %.3f um, non-periodic %d, %.1f s", 100 * worst_vof,
              worst_clear, not_periodic, t)};
}

// 7 -------------------------------------------------------------------------
Outcome cahn_hilliard_conservation() {
  const SpinodalParams p;
  const auto run = cahn_hilliard(p, kDomain, {256, 256}, 77);
  std::size_t soft = 0;
  for (double v : run.concentration) soft += v > p.threshold;
  const double f_soft = static_cast<double>(soft) / static_cast<double>(run.concentration.size());
  const double drift = std::abs(run.final_mean - run.initial_mean);
  const bool ok = drift <= 1e-10 && f_soft >= 0.4 && f_soft <= 0.6 && 1 - f_soft >= 0.4 && 1 - f_soft <= 0.6;
  return {ok, fmt("%d steps: mean drift %.2e, phase fractions %.3f / %.3f", p.steps, drift, f_soft, 1 - f_soft)};
}

// 8 -------------------------------------------------------------------------
Outcome multiscale_plate() {
  std::ostringstream os;
  bool ok = true;
  {
    const auto mesh = make_plate_mesh(4, 8);
    const std::vector<Voigt4> t(mesh.elements.size(), stiffness_from_enu({3.35, 0.35}));
    const auto steps = solve_plate(mesh, t, 5, 0.1875);
    int max_newton = 0;
    double max_res = 0.0, lin = 0.0;
    for (const auto& st : steps) {
      max_newton = std::max(max_newton, st.newton_iterations);
      max_res = std::max(max_res, st.residual_norm);
      lin = std::max(lin, std::abs(st.reaction / st.applied - steps.back().reaction / steps.back().applied) /
                              std::abs(steps.back().reaction / steps.back().applied));
    }
    for (const auto& st : steps) ok = ok && st.newton_iterations == 1;

    // Direct dense solve of the same assembled system.
    std::vector<ElementGeometry> geo;
    for (std::size_t e = 0; e < mesh.elements.size(); ++e) geo.push_back(element_geometry(mesh, e, Integration::OnePoint));
    const Eigen::MatrixXd K(assemble_stiffness(mesh, geo, t, ElementOptions{}));
    const auto nf = static_cast<Eigen::Index>(mesh.free_dofs.size());
    Eigen::MatrixXd kff(nf, nf);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nf);
    const double s = steps.back().applied;
    for (Eigen::Index i = 0; i < nf; ++i) {
      const auto di = static_cast<Eigen::Index>(mesh.free_dofs[static_cast<std::size_t>(i)]);
      for (Eigen::Index j = 0; j < nf; ++j) kff(i, j) = K(di, static_cast<Eigen::Index>(mesh.free_dofs[static_cast<std::size_t>(j)]));
      for (auto d : mesh.loaded_dofs) rhs(i) -= K(di, static_cast<Eigen::Index>(d)) * s;
    }
    const Eigen::VectorXd sf = kff.fullPivLu().solve(rhs);
    Eigen::VectorXd full = Eigen::VectorXd::Zero(K.rows());
    for (Eigen::Index i = 0; i < nf; ++i) full(static_cast<Eigen::Index>(mesh.free_dofs[static_cast<std::size_t>(i)])) = sf(i);
    for (auto d : mesh.loaded_dofs) full(static_cast<Eigen::Index>(d)) = s;
    const double direct = (steps.back().s - full).cwiseAbs().maxCoeff() / full.cwiseAbs().maxCoeff();
    ok = ok && max_res <= 1e-7 && lin <= 1e-10 && direct <= 1e-10;
    os << fmt("4x8 patch: newton <= %d, |R_f| <= %.1e, linearity %.1e, vs dense %.1e; ", max_newton, max_res, lin, direct);
  }
  {
    const auto t0 = Clock::now();
    MultiscaleConfig cfg;  // 8 x 15 elements, 64^2 micro grids
    cfg.output_dir = (fs::temp_directory_path() / "micromech_acceptance_multiscale").string();
    const auto run = run_multiscale(cfg);
    const double t = seconds_since(t0);
    ok = ok && run.max_hill_error <= 1e-6 && t < 600.0;
    os << fmt("8x15 plate with 64^2 RVEs: reaction %.4f GPa mm, max Hill mismatch %.1e, %.0f s", run.steps.back().reaction,
              run.max_hill_error, t);
  }
  return {ok, os.str()};
}

// 9 -------------------------------------------------------------------------
Outcome dataset_determinism() {
  const auto a = fs::temp_directory_path() / "micromech_acceptance_ds_a";
  const auto b = fs::temp_directory_path() / "micromech_acceptance_ds_b";
  fs::remove_all(a);
  fs::remove_all(b);
  DatasetConfig cfg;
  cfg.n_samples = 4;
  cfg.n_vof_groups = 4;
  cfg.resolution = 64;
  cfg.master_seed = 2023;
  cfg.output_dir = a.string();
  generate_dataset(cfg);

  std::ifstream is(a / "config.json");
  Json echo = Json::parse(is);
  echo["output_dir"] = b.string();
  generate_dataset(dataset_config_from_json(echo));

  int files = 0, differ = 0;
  for (const auto& f : fs::recursive_directory_iterator(a)) {
    if (f.path().extension() != ".arr") continue;
    ++files;
    const auto rel = fs::relative(f.path(), a);
    if (!fs::exists(b / rel) || read_file_bytes(f.path().string()) != read_file_bytes((b / rel).string())) ++differ;
  }
  fs::remove_all(a);
  fs::remove_all(b);
  return {files == 8 && differ == 0, fmt("%d array files compared, %d differ", files, differ)};
}

// 10 ------------------------------------------------------------------------
Outcome contrast_iterations() {
  const auto m = generate_fiber_rve(0.5, 3.5, 0.01, kDomain, {128, 128}, 10);
  const double Em = 3.0;
  std::vector<std::array<int, 3>> counts;
  for (double ratio : {2.0, 10.0, 25.0}) {
    const auto c = assign_properties(m, {ratio * Em, 0.25}, {Em, 0.35});
    const auto a = strain_concentration(c, SolverConfig{}, m.pixel_size());
    counts.push_back({a.loads[0].iterations, a.loads[1].iterations, a.loads[2].iterations});
  }
  bool ok = true;
  for (std::size_t k = 1; k < counts.size(); ++k)
    for (std::size_t j = 0; j < 3; ++j) ok = ok && counts[k][j] >= counts[k - 1][j];
  std::ostringstream os;
  os << "iterations per load at contrast 2 / 10 / 25:";
  for (std::size_t j = 0; j < 3; ++j) os << fmt(" [%d %d %d]", counts[0][j], counts[1][j], counts[2][j]);
  return {ok, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"homogeneous medium gives A = I in one iteration", homogeneous_identity},
      {"FFT solution matches the dense oracle", dense_oracle},
      {"convergence and mean-strain contract at 128^2", convergence_contract},
      {"effective modulus between Reuss and Voigt, monotone in vof", bounds_sandwich},
      {"elasticity parameter round trip", elasticity_round_trip},
      {"fiber RVE statistics at 256^2", microstructure_statistics},
      {"Cahn-Hilliard mass conservation and phase split", cahn_hilliard_conservation},
      {"multiscale plate patch, linearity and Hill consistency", multiscale_plate},
      {"dataset rerun from echoed config is bitwise identical", dataset_determinism},
      {"iteration count nondecreasing with contrast", contrast_iterations},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s  %2d  %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
