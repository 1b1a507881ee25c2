/**
 * @brief Fixed-point FFT solver for the periodic Lippmann-Schwinger equation
 * under an imposed mean strain.
 *
 * Iteration (n = 0, 1, ...):
 *   tau    = sigma - C0 : eps
 *   eps'   = mean_strain - IFFT( G0 : FFT(tau) )
 *   sigma' = C(x) : eps'
 * until the equilibrium index of sigma' drops below the tolerance.
 *
 * Transform convention: forward FFT unnormalized, inverse scaled by
 * 1 / (t1 t2). The convergence index depends on this choice.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <sstream>
#include <vector>

#include "micromech/errors.hpp"
#include "micromech/fft.hpp"
#include "micromech/green.hpp"
#include "micromech/grid.hpp"
#include "micromech/tensor.hpp"

namespace micromech {

using StiffnessField = Grid<Voigt4>;
using StrainField = Grid<Voigt2>;

/// Physical pixel extents (length units of the RVE).
struct PixelSize {
  double h1 = 1.0;
  double h2 = 1.0;
};

/// Which frequency vectors enter the equilibrium index.
enum class ResidualFrequencies {
  Continuous,  ///< the exact xi regardless of the Green scheme
  Scheme,      ///< the same vectors used to build the Green operator
};

struct SolverConfig {
  double tol = 1e-6;
  int max_iter = 5000;
  FreqScheme scheme = FreqScheme::RotatedGrid;
  ResidualFrequencies residual_freqs = ResidualFrequencies::Scheme;
  bool record_history = false;

  void validate() const {
    if (!(tol > 0.0)) throw DomainError("SolverConfig: tol must be > 0");
    if (max_iter < 1) throw DomainError("SolverConfig: max_iter must be >= 1");
  }
};

struct SolveResult {
  StrainField strain;
  StrainField stress;
  int iterations = 0;
  std::vector<double> residual_history;
  /// Pixel mean of the strain after every iteration; filled when record_history is set.
  std::vector<Voigt2> mean_strain_history;
  bool converged = false;

  double residual() const { return residual_history.empty() ? 0.0 : residual_history.back(); }
};

/// Half spectrum (t1 x (t2/2+1)) of a three-component real field.
struct Spectrum3 {
  Shape shape;
  std::array<std::vector<Complex>, 3> c;

  std::size_t half_cols() const { return shape.t2 / 2 + 1; }
  std::array<Complex, 3> at(std::size_t k) const { return {c[0][k], c[1][k], c[2][k]}; }
};

/// Forward transform of each Voigt component of a field.
inline Spectrum3 forward_spectrum(const StrainField& field) {
  RealFft2 fft(field.shape());
  Spectrum3 s{field.shape(), {}};
  std::vector<double> comp(field.size());
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t k = 0; k < field.size(); ++k) comp[k] = field[k][a];
    s.c[a].resize(fft.spectral_size());
    fft.forward(comp, s.c[a]);
  }
  return s;
}

/// Equilibrium index sqrt( sum |xi . sigma_hat|^2 / (t1 t2 sigma_hat(0):sigma_hat(0)) ),
/// summed over the full spectrum. Each bin of the half spectrum also stands
/// for its conjugate partner, which is evaluated with the partner's own
/// frequency (on an even Nyquist row that is not simply -xi).
inline double convergence_metric(const Spectrum3& s, const FreqGrid& f) {
  if (s.shape != f.shape) throw std::invalid_argument("convergence_metric: shape mismatch");
  const std::size_t hc = s.half_cols();
  const std::size_t t2 = s.shape.t2;
  const std::array<Complex, 3> s0 = s.at(0);
  const double mean_sq =
      std::norm(s0[0]) + std::norm(s0[1]) + 2.0 * std::norm(s0[2]);
  if (mean_sq == 0.0) throw ZeroMeanStressError("convergence_metric: zero mean stress");
  double sum = 0.0;
  const std::size_t t1 = s.shape.t1;
  auto term = [&](std::size_t k, double x1, double x2) {
    const Complex r1 = x1 * s.c[0][k] + x2 * s.c[2][k];
    const Complex r2 = x1 * s.c[2][k] + x2 * s.c[1][k];
    return std::norm(r1) + std::norm(r2);
  };
  for (std::size_t p = 0; p < t1; ++p) {
    const std::size_t pc = (t1 - p) % t1;
    for (std::size_t q = 0; q < hc; ++q) {
      const std::size_t k = p * hc + q;
      sum += term(k, f.xi1(p, q), f.xi2(p, q));
      const bool self_conj = q == 0 || (t2 % 2 == 0 && 2 * q == t2);
      if (!self_conj) sum += term(k, f.xi1(pc, t2 - q), f.xi2(pc, t2 - q));
    }
  }
  return std::sqrt(sum / (static_cast<double>(s.shape.size()) * mean_sq));
}

/// Lippmann-Schwinger solver bound to one stiffness field. The Green
/// operator is built once at construction and shared by every solve; solve()
/// is const and may be called concurrently.
class LSSolver {
 public:
  LSSolver(StiffnessField c_field, SolverConfig cfg, PixelSize h = {})
      : c_(std::make_shared<const StiffnessField>(std::move(c_field))), cfg_(cfg), h_(h) {
    cfg_.validate();
    if (c_->empty()) throw std::invalid_argument("LSSolver: empty stiffness field");
    std::vector<Lame> lame(c_->size());
    std::transform(c_->begin(), c_->end(), lame.begin(), [](const Voigt4& c) { return lame_of(c); });
    lame0_ = reference_material(lame);
    c0_ = stiffness_from_lame(lame0_);
    const auto exact = frequency_grid(c_->shape(), h_.h1, h_.h2);
    const auto scheme_freqs =
        cfg_.scheme == FreqScheme::Continuous ? exact : modified_frequencies(exact);
    green_ = std::make_shared<const GreenField>(green_operator(scheme_freqs, lame0_));
    residual_freqs_ = std::make_shared<const FreqGrid>(
        cfg_.residual_freqs == ResidualFrequencies::Continuous ? exact : scheme_freqs);
  }

  const SolverConfig& config() const { return cfg_; }
  const Lame& reference_medium() const { return lame0_; }
  const GreenField& green() const { return *green_; }
  const StiffnessField& stiffness() const { return *c_; }
  PixelSize pixel_size() const { return h_; }

  SolveResult solve(const Voigt2& macro) const;

 private:
  std::shared_ptr<const StiffnessField> c_;
  SolverConfig cfg_;
  PixelSize h_;
  Lame lame0_;
  Voigt4 c0_;
  std::shared_ptr<const GreenField> green_;
  std::shared_ptr<const FreqGrid> residual_freqs_;
};

inline SolveResult LSSolver::solve(const Voigt2& macro) const {
  const Shape shape = c_->shape();
  const std::size_t n = shape.size();
  const double dn = static_cast<double>(n);
  RealFft2 fft(shape);
  const std::size_t hc = fft.half_cols();
  const std::size_t ns = fft.spectral_size();
  const auto& C = *c_;

  std::array<std::vector<double>, 3> eps, sig;
  Spectrum3 sig_hat{shape, {}};
  std::array<std::vector<Complex>, 3> eps_hat;
  for (std::size_t a = 0; a < 3; ++a) {
    eps[a].assign(n, macro[a]);
    sig[a].resize(n);
    sig_hat.c[a].resize(ns);
    eps_hat[a].assign(ns, Complex{});
    eps_hat[a][0] = dn * macro[a];
  }

  auto update_stress = [&] {
    for (std::size_t k = 0; k < n; ++k) {
      const Voigt2 s = contract_42(C[k], Voigt2{{eps[0][k], eps[1][k], eps[2][k]}});
      sig[0][k] = s[0];
      sig[1][k] = s[1];
      sig[2][k] = s[2];
    }
    for (std::size_t a = 0; a < 3; ++a) fft.forward(sig[a], sig_hat.c[a]);
  };

  auto pack = [&](const std::array<std::vector<double>, 3>& f) {
    StrainField out(shape);
    for (std::size_t k = 0; k < n; ++k) out[k] = Voigt2{{f[0][k], f[1][k], f[2][k]}};
    return out;
  };

  SolveResult res;
  update_stress();
  const auto s0 = sig_hat.at(0);
  if (s0[0] == Complex{} && s0[1] == Complex{} && s0[2] == Complex{}) {
    // Zero mean stress: the metric is undefined and the solution is zero.
    res.strain = pack(eps);
    res.stress = pack(sig);
    res.converged = true;
    return res;
  }

  const auto& G = green_->g;
  for (int it = 1; it <= cfg_.max_iter; ++it) {
    // Polarization spectrum from the stress spectrum and the current strain
    // spectrum (FFT is linear), followed by the Green update.
    for (std::size_t p = 0; p < shape.t1; ++p) {
      for (std::size_t q = 0; q < hc; ++q) {
        const std::size_t k = p * hc + q;
        if (k == 0) {
          for (std::size_t a = 0; a < 3; ++a) eps_hat[a][0] = dn * macro[a];
          continue;
        }
        std::array<Complex, 3> tau;
        for (std::size_t a = 0; a < 3; ++a)
          tau[a] = sig_hat.c[a][k] - (c0_(a, 0) * eps_hat[0][k] + c0_(a, 1) * eps_hat[1][k] +
                                      c0_(a, 2) * eps_hat[2][k]);
        const auto de = apply_green(G(p, q), tau);
        for (std::size_t a = 0; a < 3; ++a) eps_hat[a][k] = -de[a];
      }
    }
    for (std::size_t a = 0; a < 3; ++a) fft.inverse(eps_hat[a], eps[a]);
    update_stress();

    const double tol = convergence_metric(sig_hat, *residual_freqs_);
    res.residual_history.push_back(tol);
    if (cfg_.record_history) {
      Voigt2 m;
      for (std::size_t a = 0; a < 3; ++a) {
        double s = 0.0;
        for (double x : eps[a]) s += x;
        m[a] = s / dn;
      }
      res.mean_strain_history.push_back(m);
    }
    res.iterations = it;
    if (tol <= cfg_.tol) {
      res.converged = true;
      break;
    }
  }

  if (!res.converged) {
    std::ostringstream msg;
    msg << "Lippmann-Schwinger iteration did not converge in " << cfg_.max_iter
        << " iterations (last residual " << res.residual() << ", tol " << cfg_.tol << ")";
    throw NonConvergenceError(msg.str(), res.residual_history);
  }
  res.strain = pack(eps);
  res.stress = pack(sig);
  return res;
}

inline SolveResult solve_unit_load(const StiffnessField& c_field, const Voigt2& macro,
                                   const SolverConfig& cfg, PixelSize h = {}) {
  return LSSolver(c_field, cfg, h).solve(macro);
}

}  // namespace micromech
