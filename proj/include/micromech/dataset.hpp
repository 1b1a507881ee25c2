/**
 * @brief Dataset pipeline: Latin hypercube material sampling, vof
 * stratification, batch concentration solves, and on-disk storage.
 *
 * Layout under output_dir:
 *
 *   config.json            fully resolved config echo
 *   manifest.json          one entry per sample, every stored file listed once
 *   sample_00000/rve.arr   u8 (t, t) phase map, 1 = fiber
 *   sample_00000/A.arr     f64 (t, t, 3, 3) strain concentration tensor
 *   sample_00000/C.arr     f64 (t, t, 3, 3), only with store_stiffness
 */
#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "micromech/array_file.hpp"
#include "micromech/config_io.hpp"
#include "micromech/errors.hpp"
#include "micromech/homogenize.hpp"
#include "micromech/microstructure.hpp"
#include "micromech/random.hpp"
#include "micromech/solver.hpp"

namespace micromech {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  friend bool operator==(const Range&, const Range&) = default;
};

/// Sampling box of the four material parameters, in LHS column order.
struct PropertyBounds {
  Range E_f{5.0, 85.0};
  Range nu_f{0.05, 0.45};
  Range E_m{2.5, 5.0};
  Range nu_m{0.3, 0.4};

  std::array<Range, 4> columns() const { return {E_f, nu_f, E_m, nu_m}; }
};

struct DatasetConfig {
  int n_samples = 20;
  std::size_t resolution = 512;
  double domain_size = 50.0;
  Range vof_range{0.40, 0.60};
  int n_vof_groups = 20;
  double r_mean = 3.5;
  double r_std_frac = 0.01;
  PropertyBounds property_bounds;
  std::uint64_t master_seed = 0;
  SolverConfig solver;
  FiberPackingOptions packing;
  bool store_stiffness = false;
  std::string output_dir = "dataset";

  void validate() const {
    if (n_samples < 1) throw ConfigError("dataset: n_samples must be >= 1");
    if (n_vof_groups < 1) throw ConfigError("dataset: n_vof_groups must be >= 1");
    if (n_samples % n_vof_groups != 0) throw ConfigError("dataset: n_samples must be divisible by n_vof_groups");
    if (resolution < 32) throw ConfigError("dataset: resolution must be >= 32");
    if (!(domain_size > 0.0)) throw ConfigError("dataset: domain_size must be > 0");
    if (!(vof_range.lo <= vof_range.hi)) throw ConfigError("dataset: vof_range must satisfy lo <= hi");
    for (const auto& r : property_bounds.columns())
      if (!(r.lo <= r.hi)) throw ConfigError("dataset: property bounds must satisfy lo <= hi");
    solver.validate();
  }
};

// ---- sampling ---------------------------------------------------------------

using PropertyRow = std::array<double, 4>;  // E_f, nu_f, E_m, nu_m

/// Latin hypercube design: in every column each of the n equal-width strata
/// holds exactly one sample, placed uniformly inside its stratum. A range
/// with lo == hi yields a constant column.
inline std::vector<PropertyRow> lhs_sample(int n, const std::array<Range, 4>& bounds, std::uint64_t seed) {
  if (n < 1) throw DomainError("lhs_sample: n must be >= 1");
  for (const auto& b : bounds)
    if (!(b.lo <= b.hi)) throw DomainError("lhs_sample: every range needs lo <= hi");
  Rng rng(seed);
  std::vector<PropertyRow> rows(static_cast<std::size_t>(n));
  std::vector<std::size_t> perm(static_cast<std::size_t>(n));
  for (std::size_t d = 0; d < 4; ++d) {
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double u = (static_cast<double>(perm[i]) + rng.uniform()) / static_cast<double>(n);
      rows[i][d] = bounds[d].lo + u * (bounds[d].hi - bounds[d].lo);
    }
  }
  return rows;
}

/// Equal blocks of n / groups samples; block g is labelled
/// lo + g (hi - lo) / (groups - 1).
inline std::vector<double> stratify_vof(int n, Range range, int groups) {
  if (groups < 1 || n < 1 || n % groups != 0)
    throw DomainError("stratify_vof: n must be a positive multiple of groups");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  const int block = n / groups;
  for (int g = 0; g < groups; ++g) {
    const double v = groups == 1 ? range.lo : range.lo + g * (range.hi - range.lo) / (groups - 1);
    out.insert(out.end(), static_cast<std::size_t>(block), v);
  }
  return out;
}

inline std::uint64_t sample_seed(std::uint64_t master, std::size_t index) { return derive_seed(master, index); }

/// Stream used for the LHS design, kept apart from every sample stream.
inline std::uint64_t design_seed(std::uint64_t master) { return derive_seed(master, UINT64_MAX); }

// ---- config JSON -------------------------------------------------------------

inline Json to_json(const Range& r) { return {r.lo, r.hi}; }

inline Range range_from_json(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ConfigError(where + ": expected [lo, hi]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline Json to_json(const DatasetConfig& c) {
  return {{"n_samples", c.n_samples},
          {"resolution", c.resolution},
          {"domain_size", c.domain_size},
          {"vof_range", to_json(c.vof_range)},
          {"n_vof_groups", c.n_vof_groups},
          {"r_mean", c.r_mean},
          {"r_std_frac", c.r_std_frac},
          {"property_bounds",
           {{"E_f", to_json(c.property_bounds.E_f)},
            {"nu_f", to_json(c.property_bounds.nu_f)},
            {"E_m", to_json(c.property_bounds.E_m)},
            {"nu_m", to_json(c.property_bounds.nu_m)}}},
          {"master_seed", c.master_seed},
          {"solver", to_json(c.solver)},
          {"packing", to_json(c.packing)},
          {"store_stiffness", c.store_stiffness},
          {"output_dir", c.output_dir}};
}

inline DatasetConfig dataset_config_from_json(const Json& j, const std::string& where = "") {
  DatasetConfig c;
  JsonReader r(j, where);
  r.get("n_samples", c.n_samples)
      .get("resolution", c.resolution)
      .get("domain_size", c.domain_size)
      .nested("vof_range", [&](const Json& v, const std::string& w) { c.vof_range = range_from_json(v, w); })
      .get("n_vof_groups", c.n_vof_groups)
      .get("r_mean", c.r_mean)
      .get("r_std_frac", c.r_std_frac)
      .nested("property_bounds",
              [&](const Json& v, const std::string& w) {
                auto& b = c.property_bounds;
                auto rd = [](Range& out) {
                  return [&out](const Json& x, const std::string& p) { out = range_from_json(x, p); };
                };
                JsonReader(v, w)
                    .nested("E_f", rd(b.E_f))
                    .nested("nu_f", rd(b.nu_f))
                    .nested("E_m", rd(b.E_m))
                    .nested("nu_m", rd(b.nu_m))
                    .finish();
              })
      .get("master_seed", c.master_seed)
      .nested("solver", [&](const Json& v, const std::string& w) { c.solver = solver_config_from_json(v, w); })
      .nested("packing", [&](const Json& v, const std::string& w) { c.packing = packing_from_json(v, w); })
      .get("store_stiffness", c.store_stiffness)
      .get("output_dir", c.output_dir)
      .finish();
  c.validate();
  return c;
}

/// Hash of everything that determines the stored arrays (output_dir excluded).
inline std::string config_hash(const DatasetConfig& c) {
  Json j = to_json(c);
  j.erase("output_dir");
  return hex64(fnv1a64(j.dump()));
}

// ---- generation --------------------------------------------------------------

struct SampleRecord {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  double vof_target = 0.0;
  PropertyRow properties{};
  bool ok = false;
  std::string failure;
  double vof_achieved = 0.0;
  std::size_t n_fibers = 0;
  Lame reference_medium;
  std::array<LoadCaseSummary, 3> loads;
  std::vector<std::string> files;
};

struct DatasetResult {
  std::vector<SampleRecord> samples;
  std::string manifest_path;
  int n_failed() const {
    return static_cast<int>(std::count_if(samples.begin(), samples.end(), [](const auto& s) { return !s.ok; }));
  }
};

inline std::string sample_dir_name(std::size_t i) {
  std::ostringstream os;
  os << "sample_" << std::setw(5) << std::setfill('0') << i;
  return os.str();
}

inline Json file_entry(const std::string& rel, const ArrayHeader& h) {
  return {{"path", rel}, {"dtype", to_string(h.dtype)}, {"shape", h.shape}};
}

namespace detail {

inline void run_sample(const DatasetConfig& cfg, const std::filesystem::path& root, SampleRecord& rec) {
  namespace fs = std::filesystem;
  const Shape shape{cfg.resolution, cfg.resolution};
  const std::array<double, 2> domain{cfg.domain_size, cfg.domain_size};
  const auto m = generate_fiber_rve(rec.vof_target, cfg.r_mean, cfg.r_std_frac, domain, shape,
                                    derive_seed(rec.seed, 0), cfg.packing);
  rec.vof_achieved = m.achieved_vof;
  rec.n_fibers = m.fibers.size();
  const IsotropicProps fiber{rec.properties[0], rec.properties[1]};
  const IsotropicProps matrix{rec.properties[2], rec.properties[3]};
  const auto c = assign_properties(m, fiber, matrix);
  const auto a = strain_concentration(c, cfg.solver, m.pixel_size());
  rec.reference_medium = a.reference_medium;
  rec.loads = a.loads;

  const std::string dir = sample_dir_name(rec.index);
  fs::create_directories(root / dir);
  write_grid((root / dir / "rve.arr").string(), m.grid);
  write_grid((root / dir / "A.arr").string(), a.a);
  rec.files = {dir + "/rve.arr", dir + "/A.arr"};
  if (cfg.store_stiffness) {
    write_grid((root / dir / "C.arr").string(), c);
    rec.files.push_back(dir + "/C.arr");
  }
}

inline Json sample_json(const SampleRecord& s, const std::filesystem::path& root) {
  Json j = {{"index", s.index},
            {"seed", s.seed},
            {"vof_target", s.vof_target},
            {"properties",
             {{"E_f", s.properties[0]}, {"nu_f", s.properties[1]}, {"E_m", s.properties[2]}, {"nu_m", s.properties[3]}}},
            {"status", s.ok ? "ok" : "failed"}};
  if (!s.ok) {
    j["reason"] = s.failure;
    return j;
  }
  j["vof_achieved"] = s.vof_achieved;
  j["n_fibers"] = s.n_fibers;
  j["reference_medium"] = {{"lambda", s.reference_medium.lambda}, {"mu", s.reference_medium.mu}};
  Json loads = Json::array();
  for (const auto& l : s.loads) loads.push_back({{"iterations", l.iterations}, {"residual", l.residual}});
  j["loads"] = loads;
  Json files = Json::object();
  for (const auto& rel : s.files) {
    const auto key = std::filesystem::path(rel).stem().string();
    files[key] = file_entry(rel, read_array_header((root / rel).string()));
  }
  j["files"] = files;
  return j;
}

}  // namespace detail

/// Runs the full pipeline. Samples are distributed over `threads` workers;
/// each worker writes only its own sample directories and the manifest is
/// written once at the end. A failing sample is recorded with its reason
/// and the run continues.
inline DatasetResult generate_dataset(const DatasetConfig& cfg, int threads = 1) {
  namespace fs = std::filesystem;
  cfg.validate();
  const fs::path root(cfg.output_dir);
  fs::create_directories(root);

  const auto rows = lhs_sample(cfg.n_samples, cfg.property_bounds.columns(), design_seed(cfg.master_seed));
  const auto vofs = stratify_vof(cfg.n_samples, cfg.vof_range, cfg.n_vof_groups);

  DatasetResult out;
  out.samples.resize(static_cast<std::size_t>(cfg.n_samples));
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    auto& s = out.samples[i];
    s.index = i;
    s.seed = sample_seed(cfg.master_seed, i);
    s.vof_target = vofs[i];
    s.properties = rows[i];
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < out.samples.size();) {
      auto& s = out.samples[i];
      try {
        detail::run_sample(cfg, root, s);
        s.ok = true;
      } catch (const Error& e) {
        s.ok = false;
        s.failure = e.what();
        s.files.clear();
        fs::remove_all(root / sample_dir_name(i));
      }
    }
  };
  const int n_workers = std::max(1, std::min(threads, cfg.n_samples));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  }

  Json manifest = {{"format", "micromech-dataset"},
                   {"version", 1},
                   {"rng", Rng::name},
                   {"config", to_json(cfg)},
                   {"config_hash", config_hash(cfg)}};
  Json samples = Json::array();
  for (const auto& s : out.samples) samples.push_back(detail::sample_json(s, root));
  manifest["samples"] = samples;
  manifest["n_ok"] = cfg.n_samples - out.n_failed();
  manifest["n_failed"] = out.n_failed();

  out.manifest_path = (root / "manifest.json").string();
  std::ofstream(out.manifest_path) << manifest.dump(2) << "\n";
  std::ofstream(root / "config.json") << to_json(cfg).dump(2) << "\n";
  return out;
}

// ---- validation --------------------------------------------------------------

struct ValidationReport {
  std::size_t samples_checked = 0;
  std::size_t files_checked = 0;
  std::vector<std::string> problems;
  bool ok() const { return problems.empty(); }
};

/// Re-checks a dataset on disk: manifest shapes against file headers,
/// payload lengths, phase values, mean(A) = I, and that every file in a
/// sample directory is referenced by the manifest exactly once.
inline ValidationReport validate_dataset(const std::string& dir, double mean_tol = 1e-8) {
  namespace fs = std::filesystem;
  ValidationReport rep;
  const fs::path root(dir);
  Json manifest;
  try {
    std::ifstream is(root / "manifest.json");
    if (!is) throw FormatError("missing manifest.json in " + dir);
    manifest = Json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest.json is not valid JSON: ") + e.what());
  }
  if (!manifest.contains("samples") || !manifest["samples"].is_array())
    throw FormatError("manifest.json has no samples array");

  std::set<std::string> referenced;
  auto problem = [&](const std::string& s) { rep.problems.push_back(s); };
  for (const auto& s : manifest["samples"]) {
    ++rep.samples_checked;
    const std::string tag = "sample " + s.value("index", Json(-1)).dump();
    if (s.value("status", "") != "ok") continue;
    if (!s.contains("files") || !s["files"].is_object()) {
      problem(tag + ": no files listed");
      continue;
    }
    std::vector<std::size_t> grid_shape;
    for (auto it = s["files"].begin(); it != s["files"].end(); ++it) {
      const auto& f = it.value();
      const std::string rel = f.value("path", "");
      if (!referenced.insert(rel).second) problem(rel + ": referenced more than once");
      ++rep.files_checked;
      ArrayData a;
      try {
        a = read_array((root / rel).string());
      } catch (const Error& e) {
        problem(rel + ": " + e.what());
        continue;
      }
      if (f.value("dtype", "") != to_string(a.header.dtype) ||
          f.value("shape", std::vector<std::size_t>{}) != a.header.shape)
        problem(rel + ": manifest dtype/shape disagree with file header");
      const auto& sh = a.header.shape;
      if (sh.size() < 2) {
        problem(rel + ": expected at least two grid axes");
        continue;
      }
      const std::vector<std::size_t> gs{sh[0], sh[1]};
      if (grid_shape.empty())
        grid_shape = gs;
      else if (grid_shape != gs)
        problem(rel + ": grid shape differs from the other files of " + tag);

      if (it.key() == "rve") {
        if (a.header.dtype != DType::U8 || sh.size() != 2) problem(rel + ": rve must be a 2-D u8 array");
        else if (std::any_of(a.u8.begin(), a.u8.end(), [](std::uint8_t v) { return v > 1; }))
          problem(rel + ": phase values outside {0, 1}");
      } else if (it.key() == "A") {
        Grid<Voigt4> g;
        try {
          g = to_voigt4_grid(a);
        } catch (const Error& e) {
          problem(rel + ": " + e.what());
          continue;
        }
        const double dev = (pixel_mean(g) - Voigt4::identity()).max_abs();
        if (!(dev <= mean_tol)) {
          std::ostringstream os;
          os << rel << ": mean(A) deviates from I by " << dev;
          problem(os.str());
        }
      }
    }
  }

  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    for (const auto& f : fs::recursive_directory_iterator(entry.path())) {
      if (!f.is_regular_file()) continue;
      const auto rel = fs::relative(f.path(), root).generic_string();
      if (!referenced.count(rel)) problem(rel + ": file not referenced by the manifest");
    }
  }
  return rep;
}

}  // namespace micromech
