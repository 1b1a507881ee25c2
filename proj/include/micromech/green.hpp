/**
 * @brief Discrete frequency grids and the periodic isotropic Green operator.
 *
 * The Green matrices follow the Voigt layout in which the operator maps a
 * tensorial-shear polarization (tau11, tau22, tau12) to an
 * engineering-shear strain (e11, e22, 2 e12). Callers that keep strains in
 * tensorial form halve the third output row; apply_green() does this.
 */
#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "micromech/errors.hpp"
#include "micromech/fft.hpp"
#include "micromech/grid.hpp"
#include "micromech/tensor.hpp"

namespace micromech {

enum class FreqScheme { Continuous, RotatedGrid };

inline const char* to_string(FreqScheme s) {
  return s == FreqScheme::Continuous ? "continuous" : "rotated_grid";
}

/// Signed FFT index of bin k on an axis of T bins: 0, 1, ..., then negatives.
constexpr long signed_index(std::size_t k, std::size_t T) {
  const auto kk = static_cast<long>(k);
  return k <= (T - 1) / 2 ? kk : kk - static_cast<long>(T);
}

/// (2 pi / (h T)) * [0, 1, ..., -1] in FFT order.
inline std::vector<double> frequency_vector(std::size_t T, double h) {
  if (T < 1 || !(h > 0.0)) throw DomainError("frequency_vector: need T >= 1 and h > 0");
  std::vector<double> xi(T);
  const double scale = 2.0 * std::numbers::pi / (h * static_cast<double>(T));
  for (std::size_t k = 0; k < T; ++k) xi[k] = scale * static_cast<double>(signed_index(k, T));
  return xi;
}

struct FreqGrid {
  Shape shape;
  double h1 = 1.0;
  double h2 = 1.0;
  FreqScheme scheme = FreqScheme::Continuous;
  Grid<double> xi1;
  Grid<double> xi2;
};

inline FreqGrid frequency_grid(Shape shape, double h1, double h2) {
  const auto f1 = frequency_vector(shape.t1, h1);
  const auto f2 = frequency_vector(shape.t2, h2);
  FreqGrid g{shape, h1, h2, FreqScheme::Continuous, Grid<double>(shape), Grid<double>(shape)};
  for (std::size_t p = 0; p < shape.t1; ++p)
    for (std::size_t q = 0; q < shape.t2; ++q) {
      g.xi1(p, q) = f1[p];
      g.xi2(p, q) = f2[q];
    }
  return g;
}

/// Rotated-grid modified frequency for per-pixel phase angles theta_i = h_i xi_i.
inline std::array<double, 2> rotated_grid_frequency(double theta1, double theta2, double h1,
                                                    double h2) {
  const double s1 = std::sin(0.5 * theta1), c1 = std::cos(0.5 * theta1);
  const double s2 = std::sin(0.5 * theta2), c2 = std::cos(0.5 * theta2);
  return {2.0 / h1 * s1 * c2, 2.0 / h2 * c1 * s2};
}

namespace detail {

// sin and cos of the half phase angle pi*k/T. At the Nyquist bin of an even
// axis the cosine is set to exactly zero.
inline std::array<double, 2> half_angle(std::size_t k, std::size_t T) {
  const long s = signed_index(k, T);
  if (2 * std::labs(s) == static_cast<long>(T)) return {s < 0 ? -1.0 : 1.0, 0.0};
  const double a = std::numbers::pi * static_cast<double>(s) / static_cast<double>(T);
  return {std::sin(a), std::cos(a)};
}

}  // namespace detail

inline FreqGrid modified_frequencies(const FreqGrid& g) {
  if (g.scheme != FreqScheme::Continuous)
    throw std::invalid_argument("modified_frequencies: input grid must be continuous");
  FreqGrid r{g.shape, g.h1, g.h2, FreqScheme::RotatedGrid, Grid<double>(g.shape),
             Grid<double>(g.shape)};
  for (std::size_t p = 0; p < g.shape.t1; ++p) {
    const auto [s1, c1] = detail::half_angle(p, g.shape.t1);
    for (std::size_t q = 0; q < g.shape.t2; ++q) {
      const auto [s2, c2] = detail::half_angle(q, g.shape.t2);
      r.xi1(p, q) = 2.0 / g.h1 * s1 * c2;
      r.xi2(p, q) = 2.0 / g.h2 * c1 * s2;
    }
  }
  return r;
}

inline FreqGrid make_frequencies(Shape shape, double h1, double h2, FreqScheme scheme) {
  auto g = frequency_grid(shape, h1, h2);
  return scheme == FreqScheme::Continuous ? g : modified_frequencies(g);
}

/// The two Voigt building blocks at a nonzero frequency.
inline Voigt4 green_part1(double xi1, double xi2) {
  const double n2 = xi1 * xi1 + xi2 * xi2;
  const double a = xi1 * xi1 / n2, b = xi2 * xi2 / n2, c = xi1 * xi2 / n2;
  Voigt4 g;
  g.m = {{{4 * a, 0.0, 4 * c}, {0.0, 4 * b, 4 * c}, {4 * c, 4 * c, 4 * (a + b)}}};
  return g;
}

inline Voigt4 green_part2(double xi1, double xi2) {
  const double n2 = xi1 * xi1 + xi2 * xi2;
  const double n4 = n2 * n2;
  const double x1 = xi1, x2 = xi2;
  Voigt4 g;
  g.m = {{{x1 * x1 * x1 * x1 / n4, x1 * x1 * x2 * x2 / n4, 2 * x1 * x1 * x1 * x2 / n4},
          {x1 * x1 * x2 * x2 / n4, x2 * x2 * x2 * x2 / n4, 2 * x1 * x2 * x2 * x2 / n4},
          {2 * x1 * x1 * x1 * x2 / n4, 2 * x1 * x2 * x2 * x2 / n4, 4 * x1 * x1 * x2 * x2 / n4}}};
  return g * -1.0;
}

inline void check_reference_medium(const Lame& l0) {
  if (!(l0.mu > 0.0)) throw DomainError("reference medium needs mu0 > 0");
  if (2.0 * l0.mu + l0.lambda == 0.0)
    throw DegenerateMediumError("reference medium has 2*mu0 + lambda0 == 0");
}

/// G0(xi) at a single frequency; the zero vector maps to the zero matrix.
inline Voigt4 green_at(double xi1, double xi2, const Lame& l0) {
  if (xi1 == 0.0 && xi2 == 0.0) return Voigt4::zero();
  const double c1 = 1.0 / (4.0 * l0.mu);
  const double c2 = (l0.mu + l0.lambda) / (l0.mu * (2.0 * l0.mu + l0.lambda));
  return c1 * green_part1(xi1, xi2) + c2 * green_part2(xi1, xi2);
}

struct GreenField {
  Grid<Voigt4> g;
  Lame lame0;
  FreqScheme scheme = FreqScheme::Continuous;
};

/// Reference compliance in the same Voigt layout as the Green matrices
/// (tensorial stress in, engineering strain out).
inline Voigt4 reference_compliance(const Lame& l0) {
  return inverse(to_engineering(stiffness_from_lame(l0)));
}

/// Precomputes G0 over the grid.
///
/// Continuous scheme on an even axis: the Nyquist bin +-pi/h cannot carry
/// an equilibrated stress, so every frequency on a Nyquist line gets the
/// reference compliance instead, which drives the stress at those modes to
/// zero. The rotated grid needs no such treatment; its corner bin has a
/// zero modified frequency and gets the zero matrix like the mean.
inline GreenField green_operator(const FreqGrid& f, const Lame& l0) {
  check_reference_medium(l0);
  GreenField out{Grid<Voigt4>(f.shape), l0, f.scheme};
  const bool nyq1 = f.shape.t1 % 2 == 0, nyq2 = f.shape.t2 % 2 == 0;
  const Voigt4 s0 = reference_compliance(l0);
  out.g(0, 0) = Voigt4::zero();
  for (std::size_t p = 0; p < f.shape.t1; ++p) {
    const bool on1 = nyq1 && 2 * p == f.shape.t1;
    for (std::size_t q = 0; q < f.shape.t2; ++q) {
      if (p == 0 && q == 0) continue;
      const bool on2 = nyq2 && 2 * q == f.shape.t2;
      if (f.scheme == FreqScheme::Continuous && (on1 || on2)) {
        out.g(p, q) = s0;
        continue;
      }
      out.g(p, q) = green_at(f.xi1(p, q), f.xi2(p, q), l0);
    }
  }
  return out;
}

/// Strain-fluctuation spectrum from a polarization spectrum at one
/// frequency, returned with tensorial shear.
inline std::array<Complex, 3> apply_green(const Voigt4& g, const std::array<Complex, 3>& tau) {
  std::array<Complex, 3> e;
  for (std::size_t i = 0; i < 3; ++i) e[i] = g(i, 0) * tau[0] + g(i, 1) * tau[1] + g(i, 2) * tau[2];
  e[2] *= 0.5;
  return e;
}

/// Midpoint of the extreme Lame values over the field.
inline Lame reference_material(std::span<const Lame> field) {
  if (field.empty()) throw std::invalid_argument("reference_material: empty field");
  double lmin = field[0].lambda, lmax = lmin, mmin = field[0].mu, mmax = mmin;
  for (const auto& l : field) {
    lmin = std::min(lmin, l.lambda);
    lmax = std::max(lmax, l.lambda);
    mmin = std::min(mmin, l.mu);
    mmax = std::max(mmax, l.mu);
  }
  return {0.5 * (lmin + lmax), 0.5 * (mmin + mmax)};
}

}  // namespace micromech
