// Command-line front end. Every subcommand builds a JSON config from its
// defaults, then --config, then --set overrides, then explicit flags, parses
// it strictly and echoes the effective config next to its outputs.
#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "micromech/micromech.hpp"

namespace micromech::cli {

namespace fs = std::filesystem;

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;
  int verbosity = 0;
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
};

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

inline Json load_config(const Json& defaults, const Common& c) {
  Json j = defaults;
  if (!c.config_path.empty()) {
    std::ifstream is(c.config_path);
    if (!is) throw ConfigError("cannot open config file " + c.config_path);
    Json file;
    try {
      file = Json::parse(is);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(c.config_path + ": " + e.what());
    }
    if (!file.is_object()) throw ConfigError(c.config_path + ": expected a JSON object");
    j.merge_patch(file);
  }
  for (const auto& s : c.overrides) apply_override(j, s);
  return j;
}

inline void write_json(const fs::path& p, const Json& j) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << j.dump(2) << "\n";
}

inline fs::path out_dir(const Common& c) {
  const fs::path p(c.out.empty() ? "." : c.out);
  fs::create_directories(p);
  return p;
}

// ---- per-command configs ----------------------------------------------------

struct RveConfig {
  double vof = 0.5;
  double r_mean = 3.5;
  double r_std_frac = 0.01;
  double domain_size = 50.0;
  std::size_t resolution = 512;
  std::uint64_t seed = 0;
  FiberPackingOptions packing;
};

inline Json to_json(const RveConfig& c) {
  return {{"vof", c.vof},
          {"r_mean", c.r_mean},
          {"r_std_frac", c.r_std_frac},
          {"domain_size", c.domain_size},
          {"resolution", c.resolution},
          {"seed", c.seed},
          {"packing", micromech::to_json(c.packing)}};
}

inline RveConfig rve_from_json(const Json& j) {
  RveConfig c;
  JsonReader(j, "")
      .get("vof", c.vof)
      .get("r_mean", c.r_mean)
      .get("r_std_frac", c.r_std_frac)
      .get("domain_size", c.domain_size)
      .get("resolution", c.resolution)
      .get("seed", c.seed)
      .nested("packing", [&](const Json& v, const std::string& w) { c.packing = packing_from_json(v, w); })
      .finish();
  return c;
}

struct SpinodalRunConfig {
  SpinodalParams params;
  double domain_size = 50.0;
  std::size_t resolution = 256;
  std::uint64_t seed = 0;
};

inline Json to_json(const SpinodalRunConfig& c) {
  return {{"spinodal", micromech::to_json(c.params)},
          {"domain_size", c.domain_size},
          {"resolution", c.resolution},
          {"seed", c.seed}};
}

inline SpinodalRunConfig spinodal_run_from_json(const Json& j) {
  SpinodalRunConfig c;
  JsonReader(j, "")
      .nested("spinodal", [&](const Json& v, const std::string& w) { c.params = spinodal_from_json(v, w); })
      .get("domain_size", c.domain_size)
      .get("resolution", c.resolution)
      .get("seed", c.seed)
      .finish();
  return c;
}

/// Shared by solve and homogenize: a phase map plus two materials.
struct MicroConfig {
  std::string rve;
  std::string concentration;  // homogenize only: reuse an existing A file
  IsotropicProps fiber{74.0, 0.2};
  IsotropicProps matrix{3.76, 0.39};
  double domain_size = 50.0;
  Voigt2 macro_strain{{1.0, 0.0, 0.0}};
  SolverConfig solver;
};

inline Json to_json(const MicroConfig& c, bool with_strain) {
  Json j = {{"rve", c.rve},
            {"fiber", micromech::to_json(c.fiber)},
            {"matrix", micromech::to_json(c.matrix)},
            {"domain_size", c.domain_size},
            {"solver", micromech::to_json(c.solver)}};
  if (with_strain)
    j["macro_strain"] = micromech::to_json(c.macro_strain);
  else
    j["concentration"] = c.concentration;
  return j;
}

inline MicroConfig micro_from_json(const Json& j, bool with_strain) {
  MicroConfig c;
  JsonReader r(j, "");
  r.get("rve", c.rve)
      .nested("fiber", [&](const Json& v, const std::string& w) { c.fiber = props_from_json(v, w); })
      .nested("matrix", [&](const Json& v, const std::string& w) { c.matrix = props_from_json(v, w); })
      .get("domain_size", c.domain_size)
      .nested("solver", [&](const Json& v, const std::string& w) { c.solver = solver_config_from_json(v, w); });
  if (with_strain)
    r.nested("macro_strain", [&](const Json& v, const std::string& w) { c.macro_strain = voigt2_from_json(v, w); });
  else
    r.get("concentration", c.concentration);
  r.finish();
  if (c.rve.empty()) throw ConfigError("rve: path to a phase map is required (--rve)");
  if (!(c.domain_size > 0.0)) throw ConfigError("domain_size must be > 0");
  return c;
}

inline Grid<std::uint8_t> load_phases(const std::string& path) { return to_phase_grid(read_array(path)); }

inline PixelSize pixel_size(const Grid<std::uint8_t>& g, double domain) {
  return {domain / static_cast<double>(g.rows()), domain / static_cast<double>(g.cols())};
}

// ---- commands ---------------------------------------------------------------

inline void log(const Common& c, const Streams& s, const std::string& msg) {
  if (c.verbosity > 0) s.err << msg << "\n";
}

inline void run_gen_rve(const Common& com, const Json& j, const Streams& io) {
  const auto cfg = rve_from_json(j);
  const auto dir = out_dir(com);
  log(com, io, "packing fibers...");
  const auto m = generate_fiber_rve(cfg.vof, cfg.r_mean, cfg.r_std_frac, {cfg.domain_size, cfg.domain_size},
                                    {cfg.resolution, cfg.resolution}, cfg.seed, cfg.packing);
  write_grid((dir / "rve.arr").string(), m.grid);
  write_pgm((dir / "rve.pgm").string(), phase_image(m.grid));
  Json fibers = Json::array();
  for (const auto& f : m.fibers) fibers.push_back({f.x, f.y, f.r});
  write_json(dir / "fibers.json", {{"achieved_vof", m.achieved_vof}, {"columns", {"x", "y", "r"}}, {"fibers", fibers}});
  write_json(dir / "config.json", to_json(cfg));
  io.out << "vof " << m.achieved_vof << " with " << m.fibers.size() << " fibers -> " << (dir / "rve.arr").string()
         << "\n";
}

inline void run_gen_spinodal(const Common& com, const Json& j, const Streams& io) {
  const auto cfg = spinodal_run_from_json(j);
  const auto dir = out_dir(com);
  const Shape shape{cfg.resolution, cfg.resolution};
  log(com, io, "integrating Cahn-Hilliard...");
  const auto run = cahn_hilliard(cfg.params, {cfg.domain_size, cfg.domain_size}, shape, cfg.seed);
  Grid<std::uint8_t> g(shape);
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = run.concentration[k] > cfg.params.threshold ? 0 : 1;
  write_grid((dir / "rve.arr").string(), g);
  write_array((dir / "concentration.arr").string(), run.concentration.span(), {shape.t1, shape.t2});
  write_pgm((dir / "rve.pgm").string(), phase_image(g));
  write_json(dir / "summary.json", {{"initial_mean", run.initial_mean},
                                    {"final_mean", run.final_mean},
                                    {"mean_drift", std::abs(run.final_mean - run.initial_mean)},
                                    {"hard_fraction", phase_fraction(g)}});
  write_json(dir / "config.json", to_json(cfg));
  io.out << "hard fraction " << phase_fraction(g) << " -> " << (dir / "rve.arr").string() << "\n";
}

inline void run_solve(const Common& com, const Json& j, const Streams& io) {
  const auto cfg = micro_from_json(j, true);
  const auto phases = load_phases(cfg.rve);
  const auto c = assign_properties(phases, cfg.fiber, cfg.matrix);
  const auto dir = out_dir(com);
  const auto r = solve_unit_load(c, cfg.macro_strain, cfg.solver, pixel_size(phases, cfg.domain_size));
  write_grid((dir / "strain.arr").string(), r.strain);
  write_grid((dir / "stress.arr").string(), r.stress);
  write_json(dir / "summary.json", {{"iterations", r.iterations},
                                    {"residual", r.residual()},
                                    {"residual_history", r.residual_history},
                                    {"mean_strain", micromech::to_json(pixel_mean(r.strain))},
                                    {"mean_stress", micromech::to_json(pixel_mean(r.stress))}});
  write_json(dir / "config.json", to_json(cfg, true));
  io.out << "converged in " << r.iterations << " iterations (residual " << r.residual() << ")\n";
}

inline void run_homogenize(const Common& com, const Json& j, const Streams& io) {
  const auto cfg = micro_from_json(j, false);
  const auto phases = load_phases(cfg.rve);
  const auto c = assign_properties(phases, cfg.fiber, cfg.matrix);
  const auto dir = out_dir(com);
  Grid<Voigt4> a;
  Json loads = Json::array();
  if (cfg.concentration.empty()) {
    auto conc = strain_concentration(c, cfg.solver, pixel_size(phases, cfg.domain_size), com.threads);
    for (const auto& l : conc.loads) loads.push_back({{"iterations", l.iterations}, {"residual", l.residual}});
    a = std::move(conc.a);
    write_grid((dir / "A.arr").string(), a);
  } else {
    a = to_voigt4_grid(read_array(cfg.concentration));
  }
  const auto h = homogenized_stiffness(c, a);
  const auto b = stiffness_bounds(c);
  const auto eff = h.effective();
  if (h.asymmetry_warning) io.err << "warning: homogenized stiffness asymmetry " << h.asymmetry << "\n";
  write_json(dir / "summary.json", {{"c_bar", micromech::to_json(h.c_bar)},
                                    {"c_bar_raw", micromech::to_json(h.raw)},
                                    {"asymmetry", h.asymmetry},
                                    {"anisotropy", h.anisotropy},
                                    {"E", eff.E},
                                    {"nu", eff.nu},
                                    {"E_voigt", b.E_voigt()},
                                    {"E_reuss", b.E_reuss()},
                                    {"vof", phase_fraction(phases)},
                                    {"loads", loads}});
  write_json(dir / "config.json", to_json(cfg, false));
  io.out << "E = " << eff.E << " GPa, nu = " << eff.nu << " (bounds " << b.E_reuss() << " .. " << b.E_voigt()
         << ")\n";
}

inline int run_dataset(const Common& com, Json j, const Streams& io) {
  if (!com.out.empty()) j["output_dir"] = com.out;
  const auto cfg = dataset_config_from_json(j);
  log(com, io, "generating " + std::to_string(cfg.n_samples) + " samples...");
  const auto r = generate_dataset(cfg, com.threads);
  for (const auto& s : r.samples)
    if (!s.ok) io.err << "sample " << s.index << " failed: " << s.failure << "\n";
  io.out << (cfg.n_samples - r.n_failed()) << " of " << cfg.n_samples << " samples written -> " << r.manifest_path
         << "\n";
  return r.n_failed() == 0 ? 0 : 1;
}

inline void run_multiscale_cmd(const Common& com, Json j, const Streams& io) {
  if (!com.out.empty()) j["output_dir"] = com.out;
  const auto cfg = multiscale_config_from_json(j);
  log(com, io, "solving " + std::to_string(cfg.nx * cfg.ny) + " micro problems...");
  const auto run = run_multiscale(cfg, com.threads);
  write_multiscale(run, cfg);
  for (const auto& st : run.steps)
    io.out << "step " << st.step << "  u = " << st.applied << " mm  reaction = " << st.reaction
           << "  newton = " << st.newton_iterations << "\n";
  io.out << "max Hill mismatch " << run.max_hill_error << "\n";
}

/// Picks a 2-D slice out of an array file. `component` selects the trailing
/// indices for (t1, t2, 3) and (t1, t2, 3, 3) arrays.
inline Grid<double> slice(const ArrayData& a, const std::vector<std::size_t>& component) {
  const auto& sh = a.header.shape;
  if (sh.size() < 2 || sh.size() > 4) throw FormatError("export-image: expected a 2-, 3- or 4-axis array");
  if (component.size() != sh.size() - 2)
    throw ConfigError("export-image: --component needs " + std::to_string(sh.size() - 2) + " indices for this array");
  std::size_t inner = 1, offset = 0;
  for (std::size_t d = 2; d < sh.size(); ++d) {
    if (component[d - 2] >= sh[d]) throw ConfigError("export-image: component index out of range");
    offset = offset * sh[d] + component[d - 2];
    inner *= sh[d];
  }
  Grid<double> g(Shape{sh[0], sh[1]});
  for (std::size_t k = 0; k < g.size(); ++k)
    g[k] = a.header.dtype == DType::U8 ? a.u8[k * inner + offset] : a.f64[k * inner + offset];
  return g;
}

inline void run_export_image(const Common& com, const std::string& input, const std::vector<std::size_t>& component,
                             const Streams& io) {
  if (input.empty()) throw ConfigError("export-image: --in is required");
  const auto g = slice(read_array(input), component);
  const auto [lo, hi] = std::minmax_element(g.begin(), g.end());
  const double mn = *lo, mx = *hi;
  Grid<std::uint8_t> img(g.shape(), 0);
  if (mx > mn) {
    for (std::size_t k = 0; k < g.size(); ++k)
      img[k] = static_cast<std::uint8_t>(std::lround(255.0 * (g[k] - mn) / (mx - mn)));
  } else {
    io.err << "warning: constant field (" << mn << "), image is all zero\n";
  }
  fs::path out = com.out.empty() ? fs::path(input).replace_extension(".pgm") : fs::path(com.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_pgm(out.string(), img);
  auto side = out;
  side.replace_extension(".json");
  write_json(side, {{"source", input}, {"component", component}, {"min", mn}, {"max", mx}});
  io.out << "wrote " << out.string() << " (min " << mn << ", max " << mx << ")\n";
}

inline int run_validate(const std::string& dir, const Streams& io) {
  if (dir.empty()) throw ConfigError("validate: --in is required");
  const auto rep = validate_dataset(dir);
  for (const auto& p : rep.problems) io.err << p << "\n";
  io.out << rep.samples_checked << " samples, " << rep.files_checked << " files checked: "
         << (rep.ok() ? "ok" : std::to_string(rep.problems.size()) + " problem(s)") << "\n";
  return rep.ok() ? 0 : 1;
}

// ---- dispatch ---------------------------------------------------------------

inline void add_common(CLI::App* sub, Common& c, bool configurable) {
  if (configurable) {
    sub->add_option("--config", c.config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--set", c.overrides, "override a config key, e.g. solver.tol=1e-8")->allow_extra_args(false);
  }
  sub->add_option("--out", c.out, "output directory (file for export-image)");
  sub->add_flag("-v,--verbose", c.verbosity, "progress on stderr");
  sub->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
}

/// Runs one command line (without the program name). Returns the exit code:
/// 0 success, 1 runtime failure, 2 usage or configuration error.
inline int dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  const Streams io{out, err};
  CLI::App app{"micromech: FFT micromechanics, RVE generation, datasets and two-scale plate analysis"};
  app.require_subcommand(1);
  Common com;

  // Explicit flags, applied after --config and --set.
  std::vector<std::string> flag_sets;
  auto flag = [&](CLI::App* sub, const std::string& name, const std::string& key, const std::string& help) {
    sub->add_option_function<std::string>(
        name, [&flag_sets, key](const std::string& v) { flag_sets.push_back(key + "=" + v); }, help);
  };

  auto* gen = app.add_subcommand("gen-rve", "pack a random periodic fiber RVE");
  add_common(gen, com, true);
  flag(gen, "--vof", "vof", "target fiber volume fraction");
  flag(gen, "--resolution", "resolution", "pixels per side");
  flag(gen, "--seed", "seed", "random seed");

  auto* spin = app.add_subcommand("gen-spinodal", "Cahn-Hilliard two-phase RVE");
  add_common(spin, com, true);
  flag(spin, "--steps", "spinodal.steps", "time steps");
  flag(spin, "--resolution", "resolution", "pixels per side");
  flag(spin, "--seed", "seed", "random seed");

  auto* solve = app.add_subcommand("solve", "strain and stress fields for one macro strain");
  add_common(solve, com, true);
  flag(solve, "--rve", "rve", "phase map array file");
  std::string strain_text;
  solve->add_option("--strain", strain_text, "macro strain e11,e22,e12 (tensorial shear)");

  auto* hom = app.add_subcommand("homogenize", "strain concentration tensor and homogenized stiffness");
  add_common(hom, com, true);
  flag(hom, "--rve", "rve", "phase map array file");
  flag(hom, "--concentration", "concentration", "existing A array file");

  auto* data = app.add_subcommand("dataset", "generate a dataset of RVEs and concentration tensors");
  add_common(data, com, true);
  flag(data, "--n-samples", "n_samples", "number of samples");
  flag(data, "--resolution", "resolution", "pixels per side");
  flag(data, "--seed", "master_seed", "master seed");

  auto* ms = app.add_subcommand("multiscale", "two-scale plate under uniaxial tension");
  add_common(ms, com, true);
  flag(ms, "--nx", "nx", "elements across");
  flag(ms, "--ny", "ny", "elements along the load");
  flag(ms, "--micro-resolution", "micro_resolution", "RVE pixels per side");

  auto* img = app.add_subcommand("export-image", "render an array slice as a PGM image");
  add_common(img, com, false);
  std::string input;
  std::vector<std::size_t> component;
  img->add_option("--in", input, "array file")->required();
  img->add_option("--component", component, "trailing indices, e.g. --component 0 1")->expected(0, 2);

  auto* val = app.add_subcommand("validate", "check a dataset directory");
  std::string dataset_dir;
  val->add_option("--dataset,--in", dataset_dir, "dataset directory")->required();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    auto config_for = [&](const Json& defaults) {
      Json j = load_config(defaults, com);
      for (const auto& s : flag_sets) apply_override(j, s);
      return j;
    };
    if (gen->parsed()) {
      run_gen_rve(com, config_for(to_json(RveConfig{})), io);
    } else if (spin->parsed()) {
      run_gen_spinodal(com, config_for(to_json(SpinodalRunConfig{})), io);
    } else if (solve->parsed()) {
      if (!strain_text.empty()) flag_sets.push_back("macro_strain=[" + strain_text + "]");
      run_solve(com, config_for(to_json(MicroConfig{}, true)), io);
    } else if (hom->parsed()) {
      run_homogenize(com, config_for(to_json(MicroConfig{}, false)), io);
    } else if (data->parsed()) {
      return run_dataset(com, config_for(to_json(DatasetConfig{})), io);
    } else if (ms->parsed()) {
      run_multiscale_cmd(com, config_for(to_json(MultiscaleConfig{})), io);
    } else if (img->parsed()) {
      run_export_image(com, input, component, io);
    } else if (val->parsed()) {
      return run_validate(dataset_dir, io);
    }
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace micromech::cli
