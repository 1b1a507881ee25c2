#pragma once

#include <cmath>
#include <cstdint>

#include "micromech/grid.hpp"
#include "micromech/solver.hpp"
#include "micromech/tensor.hpp"

namespace fixtures {

using namespace micromech;

// Centered circular inclusion of radius r_frac * min(t1, t2) in pixel units.
inline Grid<std::uint8_t> disc(Shape sh, double r_frac) {
  Grid<std::uint8_t> g(sh);
  const double r = r_frac * static_cast<double>(std::min(sh.t1, sh.t2));
  const double c1 = 0.5 * static_cast<double>(sh.t1), c2 = 0.5 * static_cast<double>(sh.t2);
  for (std::size_t i = 0; i < sh.t1; ++i)
    for (std::size_t j = 0; j < sh.t2; ++j) {
      const double d1 = i + 0.5 - c1, d2 = j + 0.5 - c2;
      g(i, j) = d1 * d1 + d2 * d2 < r * r ? 1 : 0;
    }
  return g;
}

inline StiffnessField phases(const Grid<std::uint8_t>& g, const IsotropicProps& f, const IsotropicProps& m) {
  const auto cf = stiffness_from_enu(f), cm = stiffness_from_enu(m);
  StiffnessField c(g.shape());
  for (std::size_t k = 0; k < g.size(); ++k) c[k] = g[k] ? cf : cm;
  return c;
}

inline StiffnessField inclusion(Shape sh, double r_frac, const IsotropicProps& f, const IsotropicProps& m) {
  return phases(disc(sh, r_frac), f, m);
}

}  // namespace fixtures
