/**
 * @brief Strain concentration tensors from three unit-load solves, and the
 * homogenized stiffness they imply.
 *
 * Column j of A(x) is the strain field produced by the unit mean strain e_j
 * (tensorial shear), so eps(x) = A(x) : mean_strain for any mean strain.
 */
#pragma once

#include <array>
#include <cmath>
#include <exception>
#include <thread>
#include <vector>

#include "micromech/errors.hpp"
#include "micromech/grid.hpp"
#include "micromech/solver.hpp"
#include "micromech/tensor.hpp"

namespace micromech {

struct LoadCaseSummary {
  int iterations = 0;
  double residual = 0.0;
  std::vector<double> residual_history;
};

struct ConcentrationField {
  Grid<Voigt4> a;
  SolverConfig config;
  Lame reference_medium;
  std::array<LoadCaseSummary, 3> loads;
};

inline Voigt2 unit_load(std::size_t j) {
  Voigt2 e;
  e[j] = 1.0;
  return e;
}

/// Solves the three unit loads with one shared Green operator. With
/// threads > 1 the load cases run concurrently.
inline ConcentrationField strain_concentration(const StiffnessField& c_field, const SolverConfig& cfg,
                                               PixelSize h = {}, int threads = 1) {
  const LSSolver solver(c_field, cfg, h);
  std::array<SolveResult, 3> res;
  std::array<std::exception_ptr, 3> err;
  auto run = [&](std::size_t j) {
    try {
      res[j] = solver.solve(unit_load(j));
    } catch (const NonConvergenceError& e) {
      err[j] = std::make_exception_ptr(NonConvergenceError(
          std::string(e.what()) + " [load case " + std::to_string(j) + "]", e.residual_history(),
          static_cast<int>(j)));
    } catch (...) {
      err[j] = std::current_exception();
    }
  };
  if (threads > 1) {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < 3; ++j) pool.emplace_back(run, j);
  } else {
    for (std::size_t j = 0; j < 3; ++j) run(j);
  }
  for (auto& e : err)
    if (e) std::rethrow_exception(e);

  ConcentrationField out{Grid<Voigt4>(c_field.shape()), cfg, solver.reference_medium(), {}};
  for (std::size_t j = 0; j < 3; ++j) {
    const auto& s = res[j].strain;
    for (std::size_t k = 0; k < s.size(); ++k)
      for (std::size_t i = 0; i < 3; ++i) out.a[k](i, j) = s[k][i];
    out.loads[j] = {res[j].iterations, res[j].residual(), std::move(res[j].residual_history)};
  }
  return out;
}

/// Mean shifted by the first pixel; exact for constant fields.
template <class T>
T pixel_mean(const Grid<T>& g) {
  if (g.empty()) return T{};
  const T ref = g[0];
  T s{};
  for (const auto& v : g) s += v - ref;
  return ref + s * (1.0 / static_cast<double>(g.size()));
}

struct HomogenizedStiffness {
  /// Symmetrized result (tensorial-shear layout like every stiffness here).
  Voigt4 c_bar;
  /// Pixel average of C:A before symmetrization.
  Voigt4 raw;
  /// max |C - C^T| of the raw engineering-form matrix over its Frobenius norm.
  double asymmetry = 0.0;
  /// |C[0][0] - C[1][1]| / ||C||.
  double anisotropy = 0.0;
  bool asymmetry_warning = false;

  IsotropicProps effective() const { return effective_enu(c_bar); }
};

/// C_bar = mean over pixels of C(x) A(x). Major symmetry is checked and
/// imposed on the engineering-shear form, where it is plain matrix symmetry.
inline HomogenizedStiffness homogenized_stiffness(const StiffnessField& c_field,
                                                  const Grid<Voigt4>& a_field) {
  require_same_shape(c_field, a_field, "homogenized_stiffness");
  Grid<Voigt4> ca(c_field.shape());
  for (std::size_t k = 0; k < c_field.size(); ++k) ca[k] = contract_44(c_field[k], a_field[k]);
  HomogenizedStiffness h;
  h.raw = pixel_mean(ca);
  const Voigt4 eng = to_engineering(h.raw);
  const double scale = eng.norm();
  h.asymmetry = scale > 0.0 ? eng.asymmetry() / scale : 0.0;
  h.asymmetry_warning = h.asymmetry > 1e-6;
  h.c_bar = from_engineering(0.5 * (eng + eng.transpose()));
  const double n = h.c_bar.norm();
  h.anisotropy = n > 0.0 ? std::abs(h.c_bar(0, 0) - h.c_bar(1, 1)) / n : 0.0;
  return h;
}

inline HomogenizedStiffness homogenized_stiffness(const StiffnessField& c_field,
                                                  const ConcentrationField& a) {
  return homogenized_stiffness(c_field, a.a);
}

/// eps(x) = A(x) : macro.
inline StrainField reconstruct_strain(const Grid<Voigt4>& a_field, const Voigt2& macro) {
  StrainField out(a_field.shape());
  for (std::size_t k = 0; k < a_field.size(); ++k) out[k] = contract_42(a_field[k], macro);
  return out;
}

inline StrainField reconstruct_strain(const ConcentrationField& a, const Voigt2& macro) {
  return reconstruct_strain(a.a, macro);
}

/// Arithmetic (Voigt) and harmonic (Reuss) pixel averages of the stiffness.
struct StiffnessBounds {
  Voigt4 voigt;
  Voigt4 reuss;

  double E_voigt() const { return effective_enu(voigt).E; }
  double E_reuss() const { return effective_enu(reuss).E; }
};

inline StiffnessBounds stiffness_bounds(const StiffnessField& c_field) {
  Grid<Voigt4> s(c_field.shape());
  for (std::size_t k = 0; k < c_field.size(); ++k) s[k] = inverse(c_field[k]);
  return {pixel_mean(c_field), inverse(pixel_mean(s))};
}

}  // namespace micromech
