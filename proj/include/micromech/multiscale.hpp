/**
 * @brief Concurrent two-scale plate solver.
 *
 * Macroscale: four-node plane-strain quadrilaterals, one RVE per element,
 * one-point quadrature with perturbation hourglass control (or full 2x2
 * quadrature). Microscale: per-element strain concentration fields whose
 * homogenized stiffness is the element tangent. Young's moduli of both
 * phases vary over the plate as Karhunen-Loeve Gaussian random fields.
 *
 * Units: mesh in mm, moduli in GPa, forces in GPa mm (unit thickness).
 */
#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "micromech/array_file.hpp"
#include "micromech/config_io.hpp"
#include "micromech/dataset.hpp"
#include "micromech/errors.hpp"
#include "micromech/homogenize.hpp"
#include "micromech/microstructure.hpp"
#include "micromech/random.hpp"
#include "micromech/solver.hpp"
#include "micromech/tensor.hpp"

namespace micromech {

// ---- mesh --------------------------------------------------------------------

struct MacroMesh {
  std::vector<std::array<double, 2>> nodes;
  /// Counter-clockwise node ids.
  std::vector<std::array<std::size_t, 4>> elements;
  /// DOFs held at zero.
  std::vector<std::size_t> fixed_dofs;
  /// DOFs with prescribed (loading) displacement.
  std::vector<std::size_t> loaded_dofs;
  /// Everything else: the stress-free DOFs the residual is checked on.
  std::vector<std::size_t> free_dofs;

  std::size_t n_dofs() const { return 2 * nodes.size(); }

  std::array<double, 2> centroid(std::size_t e) const {
    std::array<double, 2> c{0.0, 0.0};
    for (auto n : elements[e]) {
      c[0] += 0.25 * nodes[n][0];
      c[1] += 0.25 * nodes[n][1];
    }
    return c;
  }

  /// Rebuilds free_dofs as the complement of fixed and loaded DOFs.
  void update_free_dofs() {
    std::vector<char> used(n_dofs(), 0);
    for (auto d : fixed_dofs) used.at(d) = 1;
    for (auto d : loaded_dofs) {
      if (used.at(d)) throw DomainError("MacroMesh: DOF " + std::to_string(d) + " is both fixed and loaded");
      used[d] = 1;
    }
    free_dofs.clear();
    for (std::size_t d = 0; d < used.size(); ++d)
      if (!used[d]) free_dofs.push_back(d);
  }
};

/// Regular nx x ny plate of square elements: bottom edge clamped, vertical
/// displacement prescribed on the top edge, all other edges traction free.
/// Node (i, j) has id j (nx + 1) + i; element (i, j) has id j nx + i.
inline MacroMesh make_plate_mesh(std::size_t nx, std::size_t ny, double dx = 0.05, double dy = 0.05) {
  if (nx < 1 || ny < 1 || !(dx > 0.0) || !(dy > 0.0)) throw DomainError("make_plate_mesh: bad dimensions");
  MacroMesh m;
  const std::size_t row = nx + 1;
  for (std::size_t j = 0; j <= ny; ++j)
    for (std::size_t i = 0; i <= nx; ++i) m.nodes.push_back({static_cast<double>(i) * dx, static_cast<double>(j) * dy});
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i < nx; ++i) {
      const std::size_t n0 = j * row + i;
      m.elements.push_back({n0, n0 + 1, n0 + 1 + row, n0 + row});
    }
  for (std::size_t i = 0; i <= nx; ++i) {
    m.fixed_dofs.push_back(2 * i);
    m.fixed_dofs.push_back(2 * i + 1);
    m.loaded_dofs.push_back(2 * (ny * row + i) + 1);
  }
  m.update_free_dofs();
  return m;
}

// ---- element ----------------------------------------------------------------

enum class Integration { OnePoint, Full };

inline const char* integration_key(Integration i) { return i == Integration::OnePoint ? "one_point" : "full"; }

inline Integration parse_integration(const std::string& s) {
  if (s == "one_point") return Integration::OnePoint;
  if (s == "full") return Integration::Full;
  throw ConfigError("unknown integration '" + s + "' (expected one_point or full)");
}

using Mat38 = Eigen::Matrix<double, 3, 8>;
using Mat88 = Eigen::Matrix<double, 8, 8>;
using Vec8 = Eigen::Matrix<double, 8, 1>;

/// Strain-displacement data of one element at one quadrature point.
struct QuadPoint {
  Mat38 B;  ///< tensorial-shear strain from nodal displacements
  double weight = 0.0;  ///< quadrature weight times det J
};

struct ElementGeometry {
  QuadPoint center;
  std::vector<QuadPoint> gauss;  ///< 2x2 points, filled for full integration
  /// Flanagan-Belytschko hourglass vector (orthogonal to linear fields).
  Eigen::Matrix<double, 4, 1> gamma;
  double grad_norm2 = 0.0;  ///< sum of squared center shape-function gradients
};

namespace detail {

inline QuadPoint quad_point(const std::array<std::array<double, 2>, 4>& x, double xi, double eta, double w) {
  const double dxi[4] = {-(1 - eta) / 4, (1 - eta) / 4, (1 + eta) / 4, -(1 + eta) / 4};
  const double deta[4] = {-(1 - xi) / 4, -(1 + xi) / 4, (1 + xi) / 4, (1 - xi) / 4};
  double j11 = 0, j12 = 0, j21 = 0, j22 = 0;
  for (int a = 0; a < 4; ++a) {
    j11 += dxi[a] * x[a][0];
    j12 += dxi[a] * x[a][1];
    j21 += deta[a] * x[a][0];
    j22 += deta[a] * x[a][1];
  }
  const double det = j11 * j22 - j12 * j21;
  if (!(det > 0.0)) throw DomainError("element Jacobian determinant is not positive");
  QuadPoint q;
  q.B.setZero();
  for (int a = 0; a < 4; ++a) {
    const double nx = (j22 * dxi[a] - j12 * deta[a]) / det;
    const double ny = (-j21 * dxi[a] + j11 * deta[a]) / det;
    q.B(0, 2 * a) = nx;
    q.B(1, 2 * a + 1) = ny;
    q.B(2, 2 * a) = 0.5 * ny;
    q.B(2, 2 * a + 1) = 0.5 * nx;
  }
  q.weight = w * det;
  return q;
}

}  // namespace detail

inline ElementGeometry element_geometry(const MacroMesh& mesh, std::size_t e, Integration integ) {
  std::array<std::array<double, 2>, 4> x;
  for (int a = 0; a < 4; ++a) x[a] = mesh.nodes.at(mesh.elements[e][a]);
  ElementGeometry g;
  g.center = detail::quad_point(x, 0.0, 0.0, 4.0);
  if (integ == Integration::Full) {
    const double p = 1.0 / std::sqrt(3.0);
    for (double eta : {-p, p})
      for (double xi : {-p, p}) g.gauss.push_back(detail::quad_point(x, xi, eta, 1.0));
  }
  const Eigen::Vector4d h(1.0, -1.0, 1.0, -1.0);
  Eigen::Vector4d bx, by, X, Y;
  for (int a = 0; a < 4; ++a) {
    bx(a) = g.center.B(0, 2 * a);
    by(a) = g.center.B(1, 2 * a + 1);
    X(a) = x[a][0];
    Y(a) = x[a][1];
  }
  g.gamma = 0.5 * (h - h.dot(X) * bx - h.dot(Y) * by);
  g.grad_norm2 = bx.squaredNorm() + by.squaredNorm();
  return g;
}

/// Maps a tensorial-shear stiffness to the symmetric bilinear-form matrix
/// used in B^T D B (shear row doubled).
inline Eigen::Matrix3d work_matrix(const Voigt4& c) {
  Eigen::Matrix3d d;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) d(i, j) = (i == 2 ? 2.0 : 1.0) * c(i, j);
  return d;
}

struct ElementOptions {
  Integration integration = Integration::OnePoint;
  /// Hourglass stiffness as a fraction of the element stiffness scale.
  double hourglass = 0.005;
};

inline Mat88 element_stiffness(const ElementGeometry& g, const Voigt4& c, const ElementOptions& opt) {
  const Eigen::Matrix3d d = work_matrix(c);
  Mat88 k = Mat88::Zero();
  if (opt.integration == Integration::Full) {
    for (const auto& q : g.gauss) k += q.weight * q.B.transpose() * d * q.B;
    return k;
  }
  k = g.center.weight * g.center.B.transpose() * d * g.center.B;
  const double scale = opt.hourglass * d.diagonal().maxCoeff() * g.center.weight * g.grad_norm2;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int i = 0; i < 2; ++i) k(2 * a + i, 2 * b + i) += scale * g.gamma(a) * g.gamma(b);
  return k;
}

// ---- random fields ----------------------------------------------------------

struct GRFConfig {
  double mean = 0.0;
  double std = 0.0;
  double correlation_length = 0.1;
  /// Number of retained modes; unset selects the smallest count that
  /// captures 95% of the covariance trace.
  std::optional<int> n_modes;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(std >= 0.0)) throw DomainError("GRFConfig: std must be >= 0");
    if (!(correlation_length > 0.0)) throw DomainError("GRFConfig: correlation_length must be > 0");
    if (n_modes && *n_modes < 0) throw DomainError("GRFConfig: n_modes must be >= 0");
  }
};

struct KLBasis {
  /// Descending eigenvalues of the retained modes.
  std::vector<double> eigenvalues;
  /// Orthonormal eigenvectors, one column per retained mode.
  Eigen::MatrixXd modes;
  double trace = 0.0;
};

/// Eigen-decomposition of std^2 exp(-|X - X'|^2 / (2 l^2)) at the points.
/// Eigenvectors are orthonormal, so summing all modes reproduces the
/// covariance matrix exactly.
inline KLBasis kl_basis(const std::vector<std::array<double, 2>>& pts, double std, double ell,
                        std::optional<int> n_modes) {
  const auto n = static_cast<Eigen::Index>(pts.size());
  KLBasis b;
  if (n == 0 || std == 0.0 || n_modes == 0) {
    b.modes.resize(n, 0);
    return b;
  }
  Eigen::MatrixXd cov(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double dx = pts[i][0] - pts[j][0], dy = pts[i][1] - pts[j][1];
      cov(i, j) = std * std * std::exp(-(dx * dx + dy * dy) / (2.0 * ell * ell));
    }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw DomainError("kl_basis: eigendecomposition failed");
  b.trace = cov.trace();
  Eigen::Index keep = n_modes ? std::min<Eigen::Index>(*n_modes, n) : 0;
  if (!n_modes) {
    double acc = 0.0;
    for (Eigen::Index k = n - 1; k >= 0; --k) {
      acc += std::max(0.0, es.eigenvalues()(k));
      ++keep;
      if (acc >= 0.95 * b.trace) break;
    }
  }
  b.modes.resize(n, keep);
  for (Eigen::Index k = 0; k < keep; ++k) {
    b.eigenvalues.push_back(std::max(0.0, es.eigenvalues()(n - 1 - k)));
    b.modes.col(k) = es.eigenvectors().col(n - 1 - k);
  }
  return b;
}

/// One realization: mean + sum_k sqrt(zeta_k) gamma_k rho_k, rho_k ~ N(0, 1).
inline std::vector<double> kl_sample(const KLBasis& b, double mean, std::uint64_t seed) {
  std::vector<double> out(static_cast<std::size_t>(b.modes.rows()), mean);
  Rng rng(seed);
  for (std::size_t k = 0; k < b.eigenvalues.size(); ++k) {
    const double w = std::sqrt(b.eigenvalues[k]) * rng.normal();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += w * b.modes(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
  }
  return out;
}

inline std::vector<std::array<double, 2>> element_centroids(const MacroMesh& mesh) {
  std::vector<std::array<double, 2>> c(mesh.elements.size());
  for (std::size_t e = 0; e < c.size(); ++e) c[e] = mesh.centroid(e);
  return c;
}

/// Per-element random field at the element centroids.
inline std::vector<double> kl_field(const MacroMesh& mesh, const GRFConfig& cfg) {
  cfg.validate();
  const auto b = kl_basis(element_centroids(mesh), cfg.std, cfg.correlation_length, cfg.n_modes);
  return kl_sample(b, cfg.mean, cfg.seed);
}

// ---- micro side ---------------------------------------------------------------

struct MicroElement {
  StiffnessField c;
  Grid<Voigt4> a;
  HomogenizedStiffness tangent;
  std::array<LoadCaseSummary, 3> loads;
};

inline MicroElement prepare_micro(StiffnessField c, const SolverConfig& cfg, PixelSize h = {}) {
  auto conc = strain_concentration(c, cfg, h);
  MicroElement m;
  m.tangent = homogenized_stiffness(c, conc.a);
  m.a = std::move(conc.a);
  m.c = std::move(c);
  m.loads = conc.loads;
  return m;
}

/// Element backed by a precomputed concentration field, e.g. a surrogate
/// prediction stored as an array file.
inline MicroElement micro_from_concentration(StiffnessField c, Grid<Voigt4> a) {
  require_same_shape(c, a, "micro_from_concentration");
  MicroElement m;
  m.tangent = homogenized_stiffness(c, a);
  m.c = std::move(c);
  m.a = std::move(a);
  return m;
}

struct MicroFields {
  StrainField strain;
  StrainField stress;
};

/// eps(x) = A(x) : eps_M and sigma(x) = C(x) : eps(x).
inline MicroFields recover_micro(const Grid<Voigt4>& a, const StiffnessField& c, const Voigt2& macro_strain) {
  require_same_shape(a, c, "recover_micro");
  MicroFields f{reconstruct_strain(a, macro_strain), StrainField(c.shape())};
  for (std::size_t k = 0; k < c.size(); ++k) f.stress[k] = contract_42(c[k], f.strain[k]);
  return f;
}

inline MicroFields recover_micro(const MicroElement& m, const Voigt2& macro_strain) {
  return recover_micro(m.a, m.c, macro_strain);
}

// ---- macro solve ----------------------------------------------------------------

struct PlateOptions {
  ElementOptions element;
  double newton_tol = 1e-7;
  int max_newton = 25;
};

struct MacroState {
  int step = 0;
  double applied = 0.0;
  Eigen::VectorXd s;
  std::vector<Voigt2> eps_M;
  std::vector<Voigt2> sig_M;
  std::vector<Voigt4> tangent;
  Eigen::VectorXd f_int;
  Eigen::VectorXd f_ext;
  Eigen::VectorXd residual;
  double residual_norm = 0.0;
  double reaction = 0.0;
  int newton_iterations = 0;
};

/// Sparse global stiffness for per-element tangents.
inline Eigen::SparseMatrix<double> assemble_stiffness(const MacroMesh& mesh, const std::vector<ElementGeometry>& geo,
                                                     const std::vector<Voigt4>& tangents, const ElementOptions& opt) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(mesh.elements.size() * 64);
  for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
    const Mat88 k = element_stiffness(geo[e], tangents[e], opt);
    for (int a = 0; a < 8; ++a)
      for (int b = 0; b < 8; ++b)
        trip.emplace_back(static_cast<int>(2 * mesh.elements[e][a / 2] + a % 2),
                          static_cast<int>(2 * mesh.elements[e][b / 2] + b % 2), k(a, b));
  }
  const auto n = static_cast<Eigen::Index>(mesh.n_dofs());
  Eigen::SparseMatrix<double> K(n, n);
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

inline Vec8 element_dofs(const MacroMesh& mesh, std::size_t e, const Eigen::VectorXd& s) {
  Vec8 u;
  for (int a = 0; a < 8; ++a) u(a) = s(static_cast<Eigen::Index>(2 * mesh.elements[e][a / 2] + a % 2));
  return u;
}

inline Voigt2 to_voigt2(const Eigen::Vector3d& v) { return Voigt2{{v(0), v(1), v(2)}}; }

/// Linear plate problem driven by per-element tangents. The top-edge
/// displacement s_total is applied in `load_steps` equal increments; each
/// step runs Newton iterations s += K_ff^-1 R_f until ||R(free)|| <= tol.
inline std::vector<MacroState> solve_plate(const MacroMesh& mesh, const std::vector<Voigt4>& tangents, int load_steps,
                                           double s_total, const PlateOptions& opt = {}) {
  if (tangents.size() != mesh.elements.size()) throw DomainError("solve_plate: one tangent per element required");
  if (load_steps < 1) throw DomainError("solve_plate: load_steps must be >= 1");
  std::vector<ElementGeometry> geo;
  geo.reserve(mesh.elements.size());
  for (std::size_t e = 0; e < mesh.elements.size(); ++e) geo.push_back(element_geometry(mesh, e, opt.element.integration));

  const auto K = assemble_stiffness(mesh, geo, tangents, opt.element);
  const auto nf = static_cast<Eigen::Index>(mesh.free_dofs.size());
  std::vector<Eigen::Index> pos(mesh.n_dofs(), -1);
  for (Eigen::Index i = 0; i < nf; ++i) pos[mesh.free_dofs[static_cast<std::size_t>(i)]] = i;
  std::vector<Eigen::Triplet<double>> trip;
  for (Eigen::Index col = 0; col < K.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(K, col); it; ++it)
      if (pos[static_cast<std::size_t>(it.row())] >= 0 && pos[static_cast<std::size_t>(it.col())] >= 0)
        trip.emplace_back(static_cast<int>(pos[static_cast<std::size_t>(it.row())]),
                          static_cast<int>(pos[static_cast<std::size_t>(it.col())]), it.value());
  Eigen::SparseMatrix<double> Kff(nf, nf);
  Kff.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  if (nf > 0) {
    ldlt.compute(Kff);
    if (ldlt.info() != Eigen::Success) throw SingularStiffnessError("solve_plate: stiffness factorization failed");
    const auto& D = ldlt.vectorD();
    if (!(D.minCoeff() > 1e-12 * D.cwiseAbs().maxCoeff()))
      throw SingularStiffnessError("solve_plate: stiffness matrix is singular (mechanism or missing constraints)");
  }

  const auto n = static_cast<Eigen::Index>(mesh.n_dofs());
  Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
  std::vector<MacroState> out;
  for (int step = 1; step <= load_steps; ++step) {
    MacroState st;
    st.step = step;
    st.applied = s_total * step / load_steps;
    st.f_ext = Eigen::VectorXd::Zero(n);
    st.tangent = tangents;
    for (auto d : mesh.fixed_dofs) s(static_cast<Eigen::Index>(d)) = 0.0;
    for (auto d : mesh.loaded_dofs) s(static_cast<Eigen::Index>(d)) = st.applied;

    auto evaluate = [&] {
      st.f_int = Eigen::VectorXd::Zero(n);
      st.eps_M.resize(mesh.elements.size());
      st.sig_M.resize(mesh.elements.size());
      for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
        const Vec8 u = element_dofs(mesh, e, s);
        const Eigen::Vector3d eps = geo[e].center.B * u;
        st.eps_M[e] = to_voigt2(eps);
        st.sig_M[e] = contract_42(tangents[e], st.eps_M[e]);
        Vec8 f;
        if (opt.element.integration == Integration::Full) {
          f.setZero();
          const Eigen::Matrix3d d = work_matrix(tangents[e]);
          for (const auto& q : geo[e].gauss) f += q.weight * q.B.transpose() * d * (q.B * u);
        } else {
          Eigen::Vector3d w(st.sig_M[e][0], st.sig_M[e][1], 2.0 * st.sig_M[e][2]);
          f = geo[e].center.weight * geo[e].center.B.transpose() * w;
          ElementOptions hg = opt.element;
          const Mat88 kfull = element_stiffness(geo[e], tangents[e], hg);
          const Mat88 kc = geo[e].center.weight * geo[e].center.B.transpose() * work_matrix(tangents[e]) * geo[e].center.B;
          f += (kfull - kc) * u;
        }
        for (int a = 0; a < 8; ++a) st.f_int(static_cast<Eigen::Index>(2 * mesh.elements[e][a / 2] + a % 2)) += f(a);
      }
      st.residual = st.f_ext - st.f_int;
      double r2 = 0.0;
      for (auto d : mesh.free_dofs) r2 += st.residual(static_cast<Eigen::Index>(d)) * st.residual(static_cast<Eigen::Index>(d));
      st.residual_norm = std::sqrt(r2);
    };

    evaluate();
    while (st.residual_norm > opt.newton_tol) {
      if (st.newton_iterations >= opt.max_newton) {
        std::ostringstream msg;
        msg << "solve_plate: Newton did not converge in " << opt.max_newton << " iterations at step " << step
            << " (|R_f| = " << st.residual_norm << ")";
        throw NonConvergenceError(msg.str(), {st.residual_norm});
      }
      Eigen::VectorXd rf(nf);
      for (Eigen::Index i = 0; i < nf; ++i) rf(i) = st.residual(static_cast<Eigen::Index>(mesh.free_dofs[static_cast<std::size_t>(i)]));
      const Eigen::VectorXd ds = ldlt.solve(rf);
      for (Eigen::Index i = 0; i < nf; ++i) s(static_cast<Eigen::Index>(mesh.free_dofs[static_cast<std::size_t>(i)])) += ds(i);
      ++st.newton_iterations;
      evaluate();
    }
    st.s = s;
    st.reaction = 0.0;
    for (auto d : mesh.loaded_dofs) st.reaction += st.f_int(static_cast<Eigen::Index>(d));
    out.push_back(std::move(st));
  }
  return out;
}

inline std::vector<MacroState> solve_plate(const MacroMesh& mesh, const std::vector<MicroElement>& micro, int load_steps,
                                           double s_total, const PlateOptions& opt = {}) {
  std::vector<Voigt4> t(micro.size());
  std::transform(micro.begin(), micro.end(), t.begin(), [](const MicroElement& m) { return m.tangent.c_bar; });
  return solve_plate(mesh, t, load_steps, s_total, opt);
}

// ---- full run -------------------------------------------------------------------

struct MultiscaleConfig {
  std::size_t nx = 8;
  std::size_t ny = 15;
  double element_size = 0.05;
  double s_total = 0.1875;
  int load_steps = 5;
  PlateOptions plate;

  std::size_t micro_resolution = 64;
  double rve_size = 50.0;
  Range vof_range{0.40, 0.60};
  int n_vof_groups = 20;
  double r_mean = 3.5;
  double r_std_frac = 0.01;
  FiberPackingOptions packing;
  GRFConfig fiber_E{74.0, 2.0, 0.1, std::nullopt, 1};
  GRFConfig matrix_E{3.35, 0.1, 0.1, std::nullopt, 2};
  double nu_f = 0.2;
  double nu_m = 0.35;
  SolverConfig solver{1e-8, 5000, FreqScheme::RotatedGrid, ResidualFrequencies::Scheme, false};
  std::uint64_t seed = 0;
  /// When set, element e reads its concentration field from
  /// <dir>/element_<e>/A.arr instead of solving the micro problem.
  std::string concentration_dir;
  /// Also write every element's concentration field to the output.
  bool write_micro = false;
  std::string output_dir = "multiscale";

  void validate() const {
    if (nx < 1 || ny < 1 || !(element_size > 0.0)) throw ConfigError("multiscale: bad mesh dimensions");
    if (load_steps < 1) throw ConfigError("multiscale: load_steps must be >= 1");
    if (micro_resolution < 32) throw ConfigError("multiscale: micro_resolution must be >= 32");
    if (n_vof_groups < 1 || !(vof_range.lo <= vof_range.hi)) throw ConfigError("multiscale: bad vof grouping");
    if (!(plate.newton_tol > 0.0) || plate.max_newton < 1) throw ConfigError("multiscale: bad Newton settings");
    if (!(plate.element.hourglass >= 0.0)) throw ConfigError("multiscale: hourglass must be >= 0");
    try {
      fiber_E.validate();
      matrix_E.validate();
      solver.validate();
    } catch (const DomainError& e) {
      throw ConfigError(std::string("multiscale: ") + e.what());
    }
  }
};

struct ElementMicroInfo {
  double vof_target = 0.0;
  double vof_achieved = 0.0;
  double E_f = 0.0;
  double E_m = 0.0;
  double hill_error = 0.0;
};

struct MultiscaleRun {
  MacroMesh mesh;
  std::vector<MicroElement> micro;
  std::vector<ElementMicroInfo> info;
  std::vector<MacroState> steps;
  double max_hill_error = 0.0;
};

/// Per-element vof labels: groups evenly spaced over the range, repeated
/// round-robin and shuffled over the plate.
inline std::vector<double> element_vofs(std::size_t n, Range range, int groups, std::uint64_t seed) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto g = static_cast<int>(i % static_cast<std::size_t>(groups));
    v[i] = groups == 1 ? range.lo : range.lo + g * (range.hi - range.lo) / (groups - 1);
  }
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
  return v;
}

/// Relative mismatch between the mean micro stress and C_bar : eps_M.
inline double hill_error(const MicroElement& m, const Voigt2& eps_M) {
  const auto f = recover_micro(m, eps_M);
  const Voigt2 mean = pixel_mean(f.stress);
  const Voigt2 macro = contract_42(m.tangent.c_bar, eps_M);
  const double n = macro.norm();
  return n > 0.0 ? (mean - macro).norm() / n : (mean - macro).norm();
}

/// Generates one RVE per element, solves all micro problems (concurrently
/// over `threads` workers), then runs the macro load steps.
inline std::string element_dir_name(std::size_t e) {
  std::ostringstream os;
  os << "element_" << std::setw(5) << std::setfill('0') << e;
  return os.str();
}

inline MultiscaleRun run_multiscale(const MultiscaleConfig& cfg, int threads = 1) {
  cfg.validate();
  MultiscaleRun run;
  run.mesh = make_plate_mesh(cfg.nx, cfg.ny, cfg.element_size, cfg.element_size);
  const std::size_t ne = run.mesh.elements.size();
  const auto Ef = kl_field(run.mesh, cfg.fiber_E);
  const auto Em = kl_field(run.mesh, cfg.matrix_E);
  const auto vofs = element_vofs(ne, cfg.vof_range, cfg.n_vof_groups, derive_seed(cfg.seed, UINT64_MAX));

  run.micro.resize(ne);
  run.info.resize(ne);
  std::vector<std::exception_ptr> errors(ne);
  std::atomic<std::size_t> next{0};
  const Shape shape{cfg.micro_resolution, cfg.micro_resolution};
  auto worker = [&] {
    for (std::size_t e; (e = next.fetch_add(1)) < ne;) {
      try {
        const auto m = generate_fiber_rve(vofs[e], cfg.r_mean, cfg.r_std_frac, {cfg.rve_size, cfg.rve_size}, shape,
                                          derive_seed(cfg.seed, e), cfg.packing);
        auto c = assign_properties(m, {Ef[e], cfg.nu_f}, {Em[e], cfg.nu_m});
        if (cfg.concentration_dir.empty()) {
          run.micro[e] = prepare_micro(std::move(c), cfg.solver, m.pixel_size());
        } else {
          const auto path = std::filesystem::path(cfg.concentration_dir) / element_dir_name(e) / "A.arr";
          run.micro[e] = micro_from_concentration(std::move(c), to_voigt4_grid(read_array(path.string())));
        }
        run.info[e] = {vofs[e], m.achieved_vof, Ef[e], Em[e], 0.0};
      } catch (...) {
        errors[e] = std::current_exception();
      }
    }
  };
  if (threads > 1) {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  } else {
    worker();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  run.steps = solve_plate(run.mesh, run.micro, cfg.load_steps, cfg.s_total, cfg.plate);
  const auto& last = run.steps.back();
  for (std::size_t e = 0; e < ne; ++e) {
    run.info[e].hill_error = hill_error(run.micro[e], last.eps_M[e]);
    run.max_hill_error = std::max(run.max_hill_error, run.info[e].hill_error);
  }
  return run;
}

// ---- config and output ----------------------------------------------------------

inline Json to_json(const GRFConfig& g) {
  return {{"mean", g.mean},
          {"std", g.std},
          {"correlation_length", g.correlation_length},
          {"n_modes", g.n_modes ? Json(*g.n_modes) : Json(nullptr)},
          {"seed", g.seed}};
}

inline GRFConfig grf_from_json(const Json& j, const std::string& where, GRFConfig g) {
  JsonReader(j, where)
      .get("mean", g.mean)
      .get("std", g.std)
      .get("correlation_length", g.correlation_length)
      .nested("n_modes",
              [&](const Json& v, const std::string& w) {
                if (v.is_null())
                  g.n_modes.reset();
                else if (v.is_number_integer())
                  g.n_modes = v.get<int>();
                else
                  throw ConfigError(w + ": expected an integer or null (automatic)");
              })
      .get("seed", g.seed)
      .finish();
  return g;
}

inline Json to_json(const MultiscaleConfig& c) {
  return {{"nx", c.nx},
          {"ny", c.ny},
          {"element_size", c.element_size},
          {"s_total", c.s_total},
          {"load_steps", c.load_steps},
          {"integration", integration_key(c.plate.element.integration)},
          {"hourglass", c.plate.element.hourglass},
          {"newton_tol", c.plate.newton_tol},
          {"max_newton", c.plate.max_newton},
          {"micro_resolution", c.micro_resolution},
          {"rve_size", c.rve_size},
          {"vof_range", to_json(c.vof_range)},
          {"n_vof_groups", c.n_vof_groups},
          {"r_mean", c.r_mean},
          {"r_std_frac", c.r_std_frac},
          {"packing", to_json(c.packing)},
          {"fiber_E", to_json(c.fiber_E)},
          {"matrix_E", to_json(c.matrix_E)},
          {"nu_f", c.nu_f},
          {"nu_m", c.nu_m},
          {"solver", to_json(c.solver)},
          {"seed", c.seed},
          {"concentration_dir", c.concentration_dir},
          {"write_micro", c.write_micro},
          {"output_dir", c.output_dir}};
}

inline MultiscaleConfig multiscale_config_from_json(const Json& j, const std::string& where = "") {
  MultiscaleConfig c;
  std::string integ = integration_key(c.plate.element.integration);
  JsonReader r(j, where);
  r.get("nx", c.nx)
      .get("ny", c.ny)
      .get("element_size", c.element_size)
      .get("s_total", c.s_total)
      .get("load_steps", c.load_steps)
      .get("integration", integ)
      .get("hourglass", c.plate.element.hourglass)
      .get("newton_tol", c.plate.newton_tol)
      .get("max_newton", c.plate.max_newton)
      .get("micro_resolution", c.micro_resolution)
      .get("rve_size", c.rve_size)
      .nested("vof_range", [&](const Json& v, const std::string& w) { c.vof_range = range_from_json(v, w); })
      .get("n_vof_groups", c.n_vof_groups)
      .get("r_mean", c.r_mean)
      .get("r_std_frac", c.r_std_frac)
      .nested("packing", [&](const Json& v, const std::string& w) { c.packing = packing_from_json(v, w); })
      .nested("fiber_E", [&](const Json& v, const std::string& w) { c.fiber_E = grf_from_json(v, w, c.fiber_E); })
      .nested("matrix_E", [&](const Json& v, const std::string& w) { c.matrix_E = grf_from_json(v, w, c.matrix_E); })
      .get("nu_f", c.nu_f)
      .get("nu_m", c.nu_m)
      .nested("solver", [&](const Json& v, const std::string& w) { c.solver = solver_config_from_json(v, w); })
      .get("seed", c.seed)
      .get("concentration_dir", c.concentration_dir)
      .get("write_micro", c.write_micro)
      .get("output_dir", c.output_dir)
      .finish();
  c.plate.element.integration = parse_integration(integ);
  c.validate();
  return c;
}

/// Writes the per-step macro state as array files plus summary.json with
/// the reaction-displacement table.
inline Json write_multiscale(const MultiscaleRun& run, const MultiscaleConfig& cfg) {
  namespace fs = std::filesystem;
  const fs::path root(cfg.output_dir);
  fs::create_directories(root);
  const std::size_t ne = run.mesh.elements.size();

  std::vector<double> tan(9 * ne), elem(6 * ne);
  for (std::size_t e = 0; e < ne; ++e) {
    const auto& t = run.micro[e].tangent.c_bar;
    for (std::size_t i = 0; i < 9; ++i) tan[9 * e + i] = t(i / 3, i % 3);
    const auto& in = run.info[e];
    const double row[6] = {in.vof_target, in.vof_achieved, in.E_f, in.E_m, in.hill_error,
                           run.micro[e].tangent.asymmetry};
    std::copy(row, row + 6, elem.begin() + static_cast<long>(6 * e));
  }
  write_array((root / "tangent.arr").string(), tan, {ne, 3, 3});
  write_array((root / "elements.arr").string(), elem, {ne, 6});
  if (cfg.write_micro)
    for (std::size_t e = 0; e < ne; ++e) {
      fs::create_directories(root / element_dir_name(e));
      write_grid((root / element_dir_name(e) / "A.arr").string(), run.micro[e].a);
    }

  Json table = Json::array();
  for (const auto& st : run.steps) {
    const std::string dir = "step_" + std::to_string(st.step);
    fs::create_directories(root / dir);
    std::vector<double> eps(3 * ne), sig(3 * ne);
    for (std::size_t e = 0; e < ne; ++e)
      for (std::size_t i = 0; i < 3; ++i) {
        eps[3 * e + i] = st.eps_M[e][i];
        sig[3 * e + i] = st.sig_M[e][i];
      }
    write_array((root / dir / "s.arr").string(), std::span<const double>(st.s.data(), static_cast<std::size_t>(st.s.size())),
                {static_cast<std::size_t>(st.s.size())});
    write_array((root / dir / "f_int.arr").string(),
                std::span<const double>(st.f_int.data(), static_cast<std::size_t>(st.f_int.size())),
                {static_cast<std::size_t>(st.f_int.size())});
    write_array((root / dir / "eps_M.arr").string(), eps, {ne, 3});
    write_array((root / dir / "sig_M.arr").string(), sig, {ne, 3});
    table.push_back({{"step", st.step},
                     {"applied_displacement", st.applied},
                     {"reaction", st.reaction},
                     {"newton_iterations", st.newton_iterations},
                     {"residual_norm", st.residual_norm}});
  }
  Json summary = {{"config", to_json(cfg)},
                  {"n_elements", ne},
                  {"n_nodes", run.mesh.nodes.size()},
                  {"elements_columns", {"vof_target", "vof_achieved", "E_f", "E_m", "hill_error", "asymmetry"}},
                  {"max_hill_error", run.max_hill_error},
                  {"reaction_displacement", table}};
  std::ofstream(root / "summary.json") << summary.dump(2) << "\n";
  std::ofstream(root / "config.json") << to_json(cfg).dump(2) << "\n";
  return summary;
}

}  // namespace micromech
