/**
 * @brief Two-dimensional Voigt algebra and isotropic elasticity conversions.
 *
 * Convention used throughout the library: strain-like vectors carry the
 * tensorial shear component (e11, e22, e12), NOT the doubled engineering
 * shear. Stiffness matrices therefore hold 2*mu in the (3,3) slot so that
 * sigma12 = 2 mu e12, and the tensor component C1212 equals m(2,2) / 2.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <sstream>

#include "micromech/errors.hpp"

namespace micromech {

/// Young's modulus (GPa) and Poisson ratio.
struct IsotropicProps {
  double E = 1.0;
  double nu = 0.0;

  friend bool operator==(const IsotropicProps&, const IsotropicProps&) = default;
};

/// Lame constants (GPa).
struct Lame {
  double lambda = 0.0;
  double mu = 0.5;

  friend bool operator==(const Lame&, const Lame&) = default;
};

/// Second-order symmetric tensor in Voigt form (tensorial shear).
struct Voigt2 {
  std::array<double, 3> v{0.0, 0.0, 0.0};

  constexpr double& operator[](std::size_t i) { return v[i]; }
  constexpr double operator[](std::size_t i) const { return v[i]; }

  constexpr Voigt2& operator+=(const Voigt2& o) {
    for (std::size_t i = 0; i < 3; ++i) v[i] += o.v[i];
    return *this;
  }
  constexpr Voigt2& operator-=(const Voigt2& o) {
    for (std::size_t i = 0; i < 3; ++i) v[i] -= o.v[i];
    return *this;
  }
  constexpr Voigt2& operator*=(double s) {
    for (auto& x : v) x *= s;
    return *this;
  }
  friend constexpr Voigt2 operator+(Voigt2 a, const Voigt2& b) { return a += b; }
  friend constexpr Voigt2 operator-(Voigt2 a, const Voigt2& b) { return a -= b; }
  friend constexpr Voigt2 operator*(Voigt2 a, double s) { return a *= s; }
  friend constexpr Voigt2 operator*(double s, Voigt2 a) { return a *= s; }
  friend bool operator==(const Voigt2&, const Voigt2&) = default;

  /// Full tensor contraction a:b, counting the off-diagonal term twice.
  friend constexpr double ddot(const Voigt2& a, const Voigt2& b) {
    return a.v[0] * b.v[0] + a.v[1] * b.v[1] + 2.0 * a.v[2] * b.v[2];
  }
  double norm() const { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }
};

/// Fourth-order tensor in 3x3 Voigt form, row-major.
struct Voigt4 {
  std::array<std::array<double, 3>, 3> m{};

  static constexpr Voigt4 zero() { return {}; }
  static constexpr Voigt4 identity() {
    Voigt4 r;
    r.m[0][0] = r.m[1][1] = r.m[2][2] = 1.0;
    return r;
  }
  static constexpr Voigt4 diagonal(double a, double b, double c) {
    Voigt4 r;
    r.m[0][0] = a;
    r.m[1][1] = b;
    r.m[2][2] = c;
    return r;
  }

  constexpr double& operator()(std::size_t i, std::size_t j) { return m[i][j]; }
  constexpr double operator()(std::size_t i, std::size_t j) const { return m[i][j]; }

  constexpr Voigt4 transpose() const {
    Voigt4 r;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) r.m[i][j] = m[j][i];
    return r;
  }
  constexpr Voigt4& operator+=(const Voigt4& o) {
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) m[i][j] += o.m[i][j];
    return *this;
  }
  constexpr Voigt4& operator-=(const Voigt4& o) {
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) m[i][j] -= o.m[i][j];
    return *this;
  }
  constexpr Voigt4& operator*=(double s) {
    for (auto& row : m)
      for (auto& x : row) x *= s;
    return *this;
  }
  friend constexpr Voigt4 operator+(Voigt4 a, const Voigt4& b) { return a += b; }
  friend constexpr Voigt4 operator-(Voigt4 a, const Voigt4& b) { return a -= b; }
  friend constexpr Voigt4 operator*(Voigt4 a, double s) { return a *= s; }
  friend constexpr Voigt4 operator*(double s, Voigt4 a) { return a *= s; }
  friend bool operator==(const Voigt4&, const Voigt4&) = default;

  /// Frobenius norm.
  double norm() const {
    double s = 0.0;
    for (const auto& row : m)
      for (double x : row) s += x * x;
    return std::sqrt(s);
  }
  double max_abs() const {
    double s = 0.0;
    for (const auto& row : m)
      for (double x : row) s = std::max(s, std::abs(x));
    return s;
  }
  /// Largest |m(i,j) - m(j,i)|.
  double asymmetry() const {
    double s = 0.0;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = i + 1; j < 3; ++j) s = std::max(s, std::abs(m[i][j] - m[j][i]));
    return s;
  }
};

inline std::ostream& operator<<(std::ostream& os, const Voigt2& e) {
  return os << '(' << e[0] << ", " << e[1] << ", " << e[2] << ')';
}

inline std::ostream& operator<<(std::ostream& os, const Voigt4& c) {
  os << '[';
  for (std::size_t i = 0; i < 3; ++i) {
    os << '[' << c(i, 0) << ", " << c(i, 1) << ", " << c(i, 2) << ']';
    if (i < 2) os << ", ";
  }
  return os << ']';
}

/// Throws DomainError unless E > 0 and -1 < nu < 0.5.
inline void check_props(const IsotropicProps& p) {
  if (!(std::isfinite(p.E) && std::isfinite(p.nu)) || !(p.E > 0.0) || !(p.nu > -1.0) ||
      !(p.nu < 0.5)) {
    std::ostringstream msg;
    msg << "isotropic properties out of range: E=" << p.E << ", nu=" << p.nu
        << " (need E > 0, -1 < nu < 0.5)";
    throw DomainError(msg.str());
  }
}

inline Lame lame_from_enu(const IsotropicProps& p) {
  check_props(p);
  return {p.E * p.nu / ((1.0 + p.nu) * (1.0 - 2.0 * p.nu)), p.E / (2.0 * (1.0 + p.nu))};
}

inline Voigt4 stiffness_from_lame(const Lame& l) {
  const double d = l.lambda + 2.0 * l.mu;
  Voigt4 c;
  c.m = {{{d, l.lambda, 0.0}, {l.lambda, d, 0.0}, {0.0, 0.0, 2.0 * l.mu}}};
  return c;
}

inline Voigt4 stiffness_from_enu(const IsotropicProps& p) {
  return stiffness_from_lame(lame_from_enu(p));
}

/// Reads (lambda, mu) back from an isotropic stiffness in the library convention.
inline Lame lame_of(const Voigt4& c) { return {c(0, 1), 0.5 * c(2, 2)}; }

/// Young's modulus and Poisson ratio from C1111 = m(0,0) and C1212 = m(2,2)/2.
inline IsotropicProps effective_enu(const Voigt4& cbar) {
  const double c1111 = cbar(0, 0);
  const double c1212 = 0.5 * cbar(2, 2);
  const double den = c1111 - c1212;
  if (den == 0.0 || !std::isfinite(den)) {
    throw SingularityError("effective_enu: C1111 == C1212");
  }
  return {c1212 * (3.0 * c1111 - 4.0 * c1212) / den, (c1111 - 2.0 * c1212) / (2.0 * den)};
}

constexpr Voigt2 contract_42(const Voigt4& c, const Voigt2& e) {
  Voigt2 r;
  for (std::size_t i = 0; i < 3; ++i)
    r[i] = c.m[i][0] * e[0] + c.m[i][1] * e[1] + c.m[i][2] * e[2];
  return r;
}

constexpr Voigt4 contract_44(const Voigt4& c, const Voigt4& a) {
  Voigt4 r;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      r.m[i][j] = c.m[i][0] * a.m[0][j] + c.m[i][1] * a.m[1][j] + c.m[i][2] * a.m[2][j];
  return r;
}

/// General 3x3 inverse; throws SingularityError on a vanishing determinant.
inline Voigt4 inverse(const Voigt4& a) {
  const auto& m = a.m;
  const double c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
  const double c01 = m[1][2] * m[2][0] - m[1][0] * m[2][2];
  const double c02 = m[1][0] * m[2][1] - m[1][1] * m[2][0];
  const double det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
  if (det == 0.0 || !std::isfinite(det)) throw SingularityError("inverse: singular 3x3 matrix");
  Voigt4 r;
  r.m[0][0] = c00 / det;
  r.m[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
  r.m[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
  r.m[1][0] = c01 / det;
  r.m[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
  r.m[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
  r.m[2][0] = c02 / det;
  r.m[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
  r.m[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
  return r;
}

// Conversions between the tensorial-shear form (stress <- tensorial strain)
// and the engineering-shear form (stress <- engineering strain). Major
// symmetry of a stiffness shows up as plain matrix symmetry only in the
// engineering form.
constexpr Voigt4 to_engineering(const Voigt4& c) {
  Voigt4 r = c;
  for (std::size_t i = 0; i < 3; ++i) r.m[i][2] *= 0.5;
  return r;
}
constexpr Voigt4 from_engineering(const Voigt4& c) {
  Voigt4 r = c;
  for (std::size_t i = 0; i < 3; ++i) r.m[i][2] *= 2.0;
  return r;
}

}  // namespace micromech
