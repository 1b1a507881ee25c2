/**
 * @brief Periodic two-phase microstructures: random fiber packings,
 * Cahn-Hilliard spinodal morphologies, and per-pixel stiffness assignment.
 *
 * Grid axis 0 runs along x1 (domain[0], t1 pixels), axis 1 along x2.
 * Pixel (i, j) has its center at ((i + 0.5) h1, (j + 0.5) h2).
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "micromech/errors.hpp"
#include "micromech/fft.hpp"
#include "micromech/grid.hpp"
#include "micromech/random.hpp"
#include "micromech/solver.hpp"
#include "micromech/tensor.hpp"

namespace micromech {

/// Fiber cross-section: center (x, y) and radius r, all in um.
struct Fiber {
  double x = 0.0;
  double y = 0.0;
  double r = 0.0;

  friend bool operator==(const Fiber&, const Fiber&) = default;
};

struct SpinodalParams {
  int steps = 500;
  double dt = 0.5;
  /// Gradient-energy length; the gradient coefficient is its square.
  double interface_width = 0.5;
  double mobility = 1.0;
  double threshold = 0.6;
  double initial_noise_amplitude = 0.01;
  /// Linear stabilization constant of the semi-implicit step.
  double stabilization = 2.0;

  void validate() const {
    if (!(threshold > 0.0 && threshold < 1.0)) throw DomainError("SpinodalParams: threshold must be in (0, 1)");
    if (steps < 0) throw DomainError("SpinodalParams: steps must be >= 0");
    if (!(dt > 0.0) || !(interface_width > 0.0) || !(mobility > 0.0))
      throw DomainError("SpinodalParams: dt, interface_width and mobility must be > 0");
    if (!(initial_noise_amplitude >= 0.0) || !(stabilization >= 0.0))
      throw DomainError("SpinodalParams: noise amplitude and stabilization must be >= 0");
  }
};

struct Microstructure {
  /// 1 = fiber / hard phase, 0 = matrix / soft phase.
  Grid<std::uint8_t> grid;
  std::array<double, 2> domain_size{50.0, 50.0};
  std::vector<Fiber> fibers;
  double achieved_vof = 0.0;
  std::uint64_t seed = 0;
  std::optional<SpinodalParams> spinodal;

  PixelSize pixel_size() const {
    return {domain_size[0] / static_cast<double>(grid.rows()),
            domain_size[1] / static_cast<double>(grid.cols())};
  }
};

inline double phase_fraction(const Grid<std::uint8_t>& g) {
  std::size_t ones = 0;
  for (auto v : g) ones += v != 0;
  return static_cast<double>(ones) / static_cast<double>(g.size());
}

/// Minimum-image separation vector from a to b on a periodic box.
inline std::array<double, 2> min_image(double ax, double ay, double bx, double by,
                                       const std::array<double, 2>& L) {
  double dx = bx - ax, dy = by - ay;
  dx -= L[0] * std::round(dx / L[0]);
  dy -= L[1] * std::round(dy / L[1]);
  return {dx, dy};
}

/// Pixel is fiber iff its center lies in some disc under the minimum-image metric.
inline Grid<std::uint8_t> rasterize(const std::vector<Fiber>& fibers, const std::array<double, 2>& L,
                                    Shape shape) {
  Grid<std::uint8_t> g(shape, 0);
  const double h1 = L[0] / static_cast<double>(shape.t1);
  const double h2 = L[1] / static_cast<double>(shape.t2);
  const auto t1 = static_cast<long>(shape.t1), t2 = static_cast<long>(shape.t2);
  for (const auto& f : fibers) {
    const double x = f.x - L[0] * std::floor(f.x / L[0]);
    const double y = f.y - L[1] * std::floor(f.y / L[1]);
    const long i0 = static_cast<long>(std::ceil((x - f.r) / h1 - 0.5));
    const long i1 = static_cast<long>(std::floor((x + f.r) / h1 - 0.5));
    const long j0 = static_cast<long>(std::ceil((y - f.r) / h2 - 0.5));
    const long j1 = static_cast<long>(std::floor((y + f.r) / h2 - 0.5));
    const double r2 = f.r * f.r;
    for (long i = i0; i <= i1; ++i) {
      const double dx = (static_cast<double>(i) + 0.5) * h1 - x;
      const long wi = ((i % t1) + t1) % t1;
      for (long j = j0; j <= j1; ++j) {
        const double dy = (static_cast<double>(j) + 0.5) * h2 - y;
        if (dx * dx + dy * dy < r2) g(static_cast<std::size_t>(wi), static_cast<std::size_t>(((j % t2) + t2) % t2)) = 1;
      }
    }
  }
  return g;
}

struct FiberPackingOptions {
  /// Minimum clearance between fiber surfaces, as a fraction of r_mean.
  double gap_frac = 0.1;
  int rsa_attempts = 500;
  int max_stir_sweeps = 20000;
  /// Sweeps without an overlap reduction before fibers get a random kick.
  int stall_sweeps = 50;
  /// Internal target for |achieved - target| before the radius correction stops.
  double raster_tolerance = 0.0025;
  /// Hard acceptance bound on |achieved - target|.
  double vof_tolerance = 0.005;
  int max_correction_rounds = 8;
};

/// Smallest pairwise surface clearance minus the required gap (negative = violation).
inline double min_clearance(const std::vector<Fiber>& fibers, const std::array<double, 2>& L,
                            double gap) {
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < fibers.size(); ++i)
    for (std::size_t j = i + 1; j < fibers.size(); ++j) {
      const auto d = min_image(fibers[i].x, fibers[i].y, fibers[j].x, fibers[j].y, L);
      worst = std::min(worst, std::hypot(d[0], d[1]) - fibers[i].r - fibers[j].r - gap);
    }
  return worst;
}

namespace detail {

// Pushes overlapping pairs apart until every pair clears `gap`, kicking the
// offending fibers randomly when progress stalls. Returns false on failure.
inline bool stir(std::vector<Fiber>& f, const std::array<double, 2>& L, double gap, Rng& rng,
                 const FiberPackingOptions& opt, double r_mean) {
  const std::size_t n = f.size();
  std::vector<std::array<double, 2>> shift(n);
  std::vector<char> bad(n);
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int sweep = 0; sweep < opt.max_stir_sweeps; ++sweep) {
    std::fill(shift.begin(), shift.end(), std::array<double, 2>{0.0, 0.0});
    std::fill(bad.begin(), bad.end(), 0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        auto d = min_image(f[i].x, f[i].y, f[j].x, f[j].y, L);
        double dist = std::hypot(d[0], d[1]);
        const double need = f[i].r + f[j].r + gap;
        if (dist >= need) continue;
        if (dist == 0.0) {
          const double a = 2.0 * std::numbers::pi * rng.uniform();
          d = {std::cos(a), std::sin(a)};
          dist = 1.0;
        }
        const double push = 0.55 * (need - dist) + 1e-9 * r_mean;
        const double ux = d[0] / dist, uy = d[1] / dist;
        shift[i][0] -= push * ux;
        shift[i][1] -= push * uy;
        shift[j][0] += push * ux;
        shift[j][1] += push * uy;
        bad[i] = bad[j] = 1;
        total += need - dist;
      }
    if (total == 0.0) return true;
    if (total < best * (1.0 - 1e-3)) {
      best = total;
      since_best = 0;
    } else if (++since_best >= opt.stall_sweeps) {
      for (std::size_t i = 0; i < n; ++i)
        if (bad[i]) {
          const double a = 2.0 * std::numbers::pi * rng.uniform();
          const double m = 0.2 * r_mean * rng.uniform();
          shift[i][0] += m * std::cos(a);
          shift[i][1] += m * std::sin(a);
        }
      best = std::numeric_limits<double>::infinity();
      since_best = 0;
    }
    for (std::size_t i = 0; i < n; ++i) {
      f[i].x += shift[i][0];
      f[i].y += shift[i][1];
      f[i].x -= L[0] * std::floor(f[i].x / L[0]);
      f[i].y -= L[1] * std::floor(f[i].y / L[1]);
    }
  }
  return false;
}

}  // namespace detail

/// Random periodic fiber packing.
///
/// The fiber count is the one whose mean-radius area is closest to the
/// target. Radii are drawn from N(r_mean, (r_std_frac r_mean)^2) clipped to
/// +-3 sigma, then scaled by one common factor so the total disc area hits
/// the target exactly. Placement is random sequential adsorption; fibers
/// that do not fit are dropped in anyway and the overlaps are resolved by
/// stirring. If rasterization misses the target, the common radius factor
/// is corrected and the packing re-stirred.
inline Microstructure generate_fiber_rve(double vof_target, double r_mean, double r_std_frac,
                                         std::array<double, 2> domain, Shape resolution,
                                         std::uint64_t seed, const FiberPackingOptions& opt = {}) {
  if (!(vof_target > 0.0 && vof_target <= 0.65))
    throw DomainError("generate_fiber_rve: vof_target must be in (0, 0.65]");
  if (resolution.t1 < 32 || resolution.t2 < 32)
    throw DomainError("generate_fiber_rve: resolution must be >= 32 per axis");
  if (!(r_mean > 0.0) || !(r_std_frac >= 0.0) || !(domain[0] > 0.0) || !(domain[1] > 0.0))
    throw DomainError("generate_fiber_rve: radius and domain must be positive");
  const double gap = opt.gap_frac * r_mean;
  const double r_max = r_mean * (1.0 + 3.0 * r_std_frac);
  if (2.0 * r_max + gap > std::min(domain[0], domain[1]))
    throw DomainError("generate_fiber_rve: fiber radius too large for the domain");

  Rng rng(seed);
  const double area = domain[0] * domain[1];
  const auto n = static_cast<std::size_t>(
      std::max(1L, std::lround(vof_target * area / (std::numbers::pi * r_mean * r_mean))));
  std::vector<Fiber> fibers(n);
  double sum_r2 = 0.0;
  for (auto& f : fibers) {
    f.r = r_mean + r_std_frac * r_mean * std::clamp(rng.normal(), -3.0, 3.0);
    sum_r2 += f.r * f.r;
  }
  const double s = std::sqrt(vof_target * area / (std::numbers::pi * sum_r2));
  for (auto& f : fibers) f.r *= s;
  std::stable_sort(fibers.begin(), fibers.end(), [](const Fiber& a, const Fiber& b) { return a.r > b.r; });

  for (std::size_t i = 0; i < n; ++i) {
    for (int attempt = 0; attempt < opt.rsa_attempts; ++attempt) {
      fibers[i].x = rng.uniform(0.0, domain[0]);
      fibers[i].y = rng.uniform(0.0, domain[1]);
      bool ok = true;
      for (std::size_t j = 0; j < i && ok; ++j) {
        const auto d = min_image(fibers[i].x, fibers[i].y, fibers[j].x, fibers[j].y, domain);
        ok = std::hypot(d[0], d[1]) >= fibers[i].r + fibers[j].r + gap;
      }
      if (ok) break;
    }
  }

  Microstructure m;
  m.domain_size = domain;
  m.seed = seed;
  for (int round = 0;; ++round) {
    if (!detail::stir(fibers, domain, gap, rng, opt, r_mean)) {
      std::ostringstream msg;
      msg << "generate_fiber_rve: could not resolve overlaps at vof " << vof_target << " after "
          << opt.max_stir_sweeps << " stirring sweeps";
      throw PackingError(msg.str());
    }
    m.grid = rasterize(fibers, domain, resolution);
    m.achieved_vof = phase_fraction(m.grid);
    const double err = m.achieved_vof - vof_target;
    if (std::abs(err) <= opt.raster_tolerance || round >= opt.max_correction_rounds) break;
    const double k = std::sqrt(vof_target / std::max(m.achieved_vof, 1e-12));
    for (auto& f : fibers) f.r *= k;
  }
  if (std::abs(m.achieved_vof - vof_target) > opt.vof_tolerance) {
    std::ostringstream msg;
    msg << "generate_fiber_rve: achieved vof " << m.achieved_vof << " misses target " << vof_target;
    throw PackingError(msg.str());
  }
  m.fibers = std::move(fibers);
  return m;
}

/// Concentration field from a Cahn-Hilliard run with free energy c^2 (1-c)^2.
struct CahnHilliardRun {
  Grid<double> concentration;
  double initial_mean = 0.0;
  double final_mean = 0.0;
};

/// Stabilized semi-implicit spectral integration of
///   dc/dt = M lap( f'(c) - kappa lap c ),  kappa = interface_width^2,
/// starting from 0.5 plus uniform noise. The mean mode is never touched by
/// the update, so the spatial mean is conserved to rounding.
inline CahnHilliardRun cahn_hilliard(const SpinodalParams& p, std::array<double, 2> domain,
                                     Shape shape, std::uint64_t seed) {
  p.validate();
  if (shape.t1 < 2 || shape.t2 < 2) throw DomainError("cahn_hilliard: grid too small");
  Rng rng(seed);
  const std::size_t n = shape.size();
  std::vector<double> c(n), fp(n);
  for (auto& v : c) v = 0.5 + p.initial_noise_amplitude * rng.uniform(-1.0, 1.0);

  RealFft2 fft(shape);
  const std::size_t hc = fft.half_cols();
  std::vector<Complex> c_hat(fft.spectral_size()), f_hat(fft.spectral_size());
  std::vector<double> k2(fft.spectral_size());
  const auto f1 = frequency_vector(shape.t1, domain[0] / static_cast<double>(shape.t1));
  const auto f2 = frequency_vector(shape.t2, domain[1] / static_cast<double>(shape.t2));
  for (std::size_t a = 0; a < shape.t1; ++a)
    for (std::size_t b = 0; b < hc; ++b) k2[a * hc + b] = f1[a] * f1[a] + f2[b] * f2[b];

  auto mean = [&] {
    double s = 0.0;
    for (double v : c) s += v;
    return s / static_cast<double>(n);
  };
  CahnHilliardRun run;
  run.initial_mean = mean();

  const double kappa = p.interface_width * p.interface_width;
  const double dtM = p.dt * p.mobility;
  fft.forward(c, c_hat);
  for (int step = 0; step < p.steps; ++step) {
    for (std::size_t k = 0; k < n; ++k) fp[k] = 2.0 * c[k] * (1.0 - c[k]) * (1.0 - 2.0 * c[k]);
    fft.forward(fp, f_hat);
    for (std::size_t k = 1; k < c_hat.size(); ++k) {
      const double q = k2[k];
      c_hat[k] = (c_hat[k] * (1.0 + dtM * p.stabilization * q) - dtM * q * f_hat[k]) /
                 (1.0 + dtM * (p.stabilization * q + kappa * q * q));
    }
    fft.inverse(c_hat, c);
    const auto [lo, hi] = std::minmax_element(c.begin(), c.end());
    if (!(*lo >= -0.5 && *hi <= 1.5)) {
      std::ostringstream msg;
      msg << "cahn_hilliard: concentration left [-0.5, 1.5] at step " << step + 1;
      throw InstabilityError(msg.str());
    }
  }
  run.final_mean = mean();
  run.concentration = Grid<double>(shape);
  std::copy(c.begin(), c.end(), run.concentration.begin());
  return run;
}

/// Spinodal RVE: pixels above the threshold are soft (0), the rest hard (1).
inline Microstructure generate_spinodal_rve(const SpinodalParams& p, std::array<double, 2> domain,
                                            Shape shape, std::uint64_t seed) {
  const auto run = cahn_hilliard(p, domain, shape, seed);
  Microstructure m;
  m.grid = Grid<std::uint8_t>(shape);
  for (std::size_t k = 0; k < shape.size(); ++k) m.grid[k] = run.concentration[k] > p.threshold ? 0 : 1;
  m.domain_size = domain;
  m.achieved_vof = phase_fraction(m.grid);
  m.seed = seed;
  m.spinodal = p;
  return m;
}

/// Per-pixel stiffness from the phase map.
inline StiffnessField assign_properties(const Grid<std::uint8_t>& grid, const IsotropicProps& fiber,
                                        const IsotropicProps& matrix) {
  const Voigt4 cf = stiffness_from_enu(fiber);
  const Voigt4 cm = stiffness_from_enu(matrix);
  StiffnessField c(grid.shape());
  for (std::size_t k = 0; k < grid.size(); ++k) c[k] = grid[k] ? cf : cm;
  return c;
}

inline StiffnessField assign_properties(const Microstructure& m, const IsotropicProps& fiber,
                                        const IsotropicProps& matrix) {
  return assign_properties(m.grid, fiber, matrix);
}

/// Binary PGM (P5) bytes: rows are grid axis 0, columns axis 1.
inline std::string encode_pgm(const Grid<std::uint8_t>& img) {
  std::string out = "P5\n" + std::to_string(img.cols()) + " " + std::to_string(img.rows()) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.data()), img.size());
  return out;
}

inline void write_pgm(const std::string& path, const Grid<std::uint8_t>& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  const auto bytes = encode_pgm(img);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("failed writing " + path);
}

/// Phase map as a 0/255 image.
inline Grid<std::uint8_t> phase_image(const Grid<std::uint8_t>& grid) {
  Grid<std::uint8_t> img(grid.shape());
  for (std::size_t k = 0; k < grid.size(); ++k) img[k] = grid[k] ? 255 : 0;
  return img;
}

}  // namespace micromech
