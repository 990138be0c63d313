#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "sgflow/mesh.hpp"
#include "sgflow/quadrature.hpp"
#include "sgflow/types.hpp"

namespace sgflow {

// ---------------------------------------------------------------------------
// reference-element shape functions
// ---------------------------------------------------------------------------

namespace shape {

// 1D quadratic Lagrange on [-1,1], nodes {-1,0,1}
inline double q2_1d(int i, double s) {
  switch (i) {
    case 0: return 0.5 * s * (s - 1.0);
    case 1: return 1.0 - s * s;
    default: return 0.5 * s * (s + 1.0);
  }
}
inline double q2_1d_deriv(int i, double s) {
  switch (i) {
    case 0: return s - 0.5;
    case 1: return -2.0 * s;
    default: return s + 0.5;
  }
}

// Q2 local node a = 3*iy+ix (tensor order matching Mesh::cell_q2)
inline double q2(int a, double xi, double eta) {
  return q2_1d(a % 3, xi) * q2_1d(a / 3, eta);
}
inline std::array<double, 2> q2_grad(int a, double xi, double eta) {
  return {q2_1d_deriv(a % 3, xi) * q2_1d(a / 3, eta),
          q2_1d(a % 3, xi) * q2_1d_deriv(a / 3, eta)};
}

// Q1 (bilinear), vertex order SW,SE,NE,NW
inline double q1(int a, double xi, double eta) {
  static const double sx[4] = {-1, 1, 1, -1};
  static const double sy[4] = {-1, -1, 1, 1};
  return 0.25 * (1.0 + sx[a] * xi) * (1.0 + sy[a] * eta);
}
inline std::array<double, 2> q1_grad(int a, double xi, double eta) {
  static const double sx[4] = {-1, 1, 1, -1};
  static const double sy[4] = {-1, -1, 1, 1};
  return {0.25 * sx[a] * (1.0 + sy[a] * eta),
          0.25 * sy[a] * (1.0 + sx[a] * xi)};
}

}  // namespace shape

// Values and reference gradients of all basis functions at the points of a
// tensor Gauss rule, plus the bilinear geometry tables.
struct ElementTables {
  struct Point {
    double xi, eta, w;
    std::array<double, 9> q2v;
    std::array<std::array<double, 2>, 9> q2g;
    std::array<double, 4> q1v;
    std::array<std::array<double, 2>, 4> q1g;
  };
  std::vector<Point> pts;

  explicit ElementTables(int n1d = 3) {
    const QuadRule1d g = gauss_legendre(n1d);
    for (int j = 0; j < g.size(); ++j)
      for (int i = 0; i < g.size(); ++i) {
        Point p;
        p.xi = g.points[i];
        p.eta = g.points[j];
        p.w = g.weights[i] * g.weights[j];
        for (int a = 0; a < 9; ++a) {
          p.q2v[a] = shape::q2(a, p.xi, p.eta);
          p.q2g[a] = shape::q2_grad(a, p.xi, p.eta);
        }
        for (int a = 0; a < 4; ++a) {
          p.q1v[a] = shape::q1(a, p.xi, p.eta);
          p.q1g[a] = shape::q1_grad(a, p.xi, p.eta);
        }
        pts.push_back(p);
      }
  }
};

inline const ElementTables& element_tables() {
  static const ElementTables t(3);
  return t;
}

// Jacobian of the bilinear map at a quadrature point. Throws if the
// orientation is wrong (non-positive determinant).
struct ElementGeometry {
  double detJ;
  double ixx, ixy, iyx, iyy;  // inverse-transpose entries
  double x, y;                // physical point
};

inline ElementGeometry element_geometry(const Mesh& m, int cell,
                                        const ElementTables::Point& p) {
  const auto& v = m.cells[cell];
  double jxx = 0, jxy = 0, jyx = 0, jyy = 0, x = 0, y = 0;
  for (int a = 0; a < 4; ++a) {
    const auto g = shape::q1_grad(a, p.xi, p.eta);
    jxx += m.vx[v[a]] * g[0];
    jxy += m.vx[v[a]] * g[1];
    jyx += m.vy[v[a]] * g[0];
    jyy += m.vy[v[a]] * g[1];
    x += m.vx[v[a]] * p.q1v[a];
    y += m.vy[v[a]] * p.q1v[a];
  }
  const double det = jxx * jyy - jxy * jyx;
  if (det <= 0) throw GeometryError("element with non-positive Jacobian");
  ElementGeometry eg;
  eg.detJ = det;
  // rows of J^{-T}: d(xi)/dx etc.
  eg.ixx = jyy / det;
  eg.ixy = -jyx / det;
  eg.iyx = -jxy / det;
  eg.iyy = jxx / det;
  eg.x = x;
  eg.y = y;
  return eg;
}

// ---------------------------------------------------------------------------
// degrees of freedom
// ---------------------------------------------------------------------------

// Velocity dofs are component-blocked: dof i in [0,n_q2) is the x component
// at Q2 node i, dof n_q2+i the y component. Pressure dofs are the vertices.
struct DofMap {
  int n_q2 = 0;
  int n_u = 0;
  int n_p = 0;
  std::vector<char> dirichlet;        // length n_u
  std::vector<int> dirichlet_nodes;   // Q2 node ids on Dirichlet boundary
};

inline DofMap build_dofmap(const Mesh& mesh) {
  DofMap d;
  d.n_q2 = mesh.n_q2_nodes();
  d.n_u = 2 * d.n_q2;
  d.n_p = mesh.n_vertices();
  d.dirichlet.assign(d.n_u, 0);
  std::vector<char> node_dir(d.n_q2, 0);
  for (const auto& be : mesh.boundary) {
    if (be.tag == BoundaryTag::outflow) continue;
    node_dir[be.v0] = node_dir[be.v1] = node_dir[be.mid] = 1;
  }
  for (int i = 0; i < d.n_q2; ++i)
    if (node_dir[i]) {
      d.dirichlet_nodes.push_back(i);
      d.dirichlet[i] = 1;
      d.dirichlet[d.n_q2 + i] = 1;
    }
  return d;
}

// ---------------------------------------------------------------------------
// boundary data
// ---------------------------------------------------------------------------

// Dirichlet velocity data: Poiseuille profile on the inflow, smoothly ramped
// in time, zero on walls and obstacle. values(0) is identically zero.
struct BoundaryData {
  double ramp_rate = 5.0;
  Vector steady;  // length n_u, nonzero only on Dirichlet dofs

  double ramp(double t) const { return 1.0 - std::exp(-ramp_rate * t); }

  Vector values(double t) const { return ramp(t) * steady; }
};

inline BoundaryData make_poiseuille_ramp(const Mesh& mesh, const DofMap& dof,
                                         double ramp_rate = 5.0,
                                         double u_max = 1.0) {
  BoundaryData bd;
  bd.ramp_rate = ramp_rate;
  bd.steady = Vector::Zero(dof.n_u);
  const double H = mesh.channel_halfheight;
  std::vector<char> inflow_node(dof.n_q2, 0);
  for (const auto& be : mesh.boundary)
    if (be.tag == BoundaryTag::inflow)
      inflow_node[be.v0] = inflow_node[be.v1] = inflow_node[be.mid] = 1;
  for (int i : dof.dirichlet_nodes)
    if (inflow_node[i]) {
      const double y = mesh.q2y[i];
      bd.steady(i) = u_max * (1.0 - (y / H) * (y / H));
    }
  return bd;
}

// ---------------------------------------------------------------------------
// assembly
// ---------------------------------------------------------------------------

namespace detail {

// Deterministic assembly: stable sort by (row, col), then accumulate in
// insertion order, so entry (i,j) and entry (j,i) of a symmetric element
// contribution sum in the same order and stay bitwise equal.
inline SparseMatrix from_triplets(int rows, int cols, std::vector<Triplet> t) {
  std::stable_sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
    return a.row() != b.row() ? a.row() < b.row() : a.col() < b.col();
  });
  SparseMatrix A(rows, cols);
  std::vector<int> counts(rows, 0);
  {
    int last_r = -1, last_c = -1;
    for (const auto& e : t)
      if (e.row() != last_r || e.col() != last_c) {
        ++counts[e.row()];
        last_r = e.row();
        last_c = e.col();
      }
  }
  A.reserve(counts);
  int last_r = -1, last_c = -1;
  double acc = 0;
  auto flush = [&]() {
    if (last_r >= 0) A.insert(last_r, last_c) = acc;
  };
  for (const auto& e : t) {
    if (e.row() == last_r && e.col() == last_c) {
      acc += e.value();
    } else {
      flush();
      last_r = e.row();
      last_c = e.col();
      acc = e.value();
    }
  }
  flush();
  A.makeCompressed();
  return A;
}

// expand a scalar Q2 operator to both velocity components
inline SparseMatrix vector_expand(const SparseMatrix& S, int n_q2) {
  std::vector<Triplet> t;
  t.reserve(2 * S.nonZeros());
  for (int r = 0; r < S.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(S, r); it; ++it) {
      t.emplace_back(it.row(), it.col(), it.value());
      t.emplace_back(n_q2 + it.row(), n_q2 + it.col(), it.value());
    }
  return from_triplets(2 * n_q2, 2 * n_q2, t);
}

}  // namespace detail

// scalar Q2 mass matrix (one velocity component)
inline SparseMatrix assemble_scalar_mass(const Mesh& mesh) {
  const auto& tab = element_tables();
  std::vector<Triplet> t;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const auto& dofs = mesh.cell_q2[c];
    double loc[9][9] = {};
    for (const auto& p : tab.pts) {
      const auto eg = element_geometry(mesh, c, p);
      const double s = p.w * eg.detJ;
      for (int a = 0; a < 9; ++a)
        for (int b = 0; b < 9; ++b) loc[a][b] += s * (p.q2v[a] * p.q2v[b]);
    }
    for (int a = 0; a < 9; ++a)
      for (int b = 0; b < 9; ++b) t.emplace_back(dofs[a], dofs[b], loc[a][b]);
  }
  return detail::from_triplets(mesh.n_q2_nodes(), mesh.n_q2_nodes(), t);
}

inline SparseMatrix assemble_mass(const Mesh& mesh, const DofMap& dof) {
  return detail::vector_expand(assemble_scalar_mass(mesh), dof.n_q2);
}

// diffusion with a Q2-nodal coefficient field, interpolated to quad points
inline SparseMatrix assemble_diffusion(const Mesh& mesh, const DofMap& dof,
                                       const Vector& nu_nodal) {
  require(nu_nodal.size() == dof.n_q2,
          "assemble_diffusion: coefficient field must be nodal on Q2 nodes");
  const auto& tab = element_tables();
  std::vector<Triplet> t;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const auto& dofs = mesh.cell_q2[c];
    double loc[9][9] = {};
    for (const auto& p : tab.pts) {
      const auto eg = element_geometry(mesh, c, p);
      double nu = 0;
      double gx[9], gy[9];
      for (int a = 0; a < 9; ++a) {
        nu += nu_nodal(dofs[a]) * p.q2v[a];
        gx[a] = eg.ixx * p.q2g[a][0] + eg.ixy * p.q2g[a][1];
        gy[a] = eg.iyx * p.q2g[a][0] + eg.iyy * p.q2g[a][1];
      }
      const double s = p.w * eg.detJ * nu;
      for (int a = 0; a < 9; ++a)
        for (int b = 0; b < 9; ++b)
          loc[a][b] += s * (gx[a] * gx[b] + gy[a] * gy[b]);
    }
    for (int a = 0; a < 9; ++a)
      for (int b = 0; b < 9; ++b) t.emplace_back(dofs[a], dofs[b], loc[a][b]);
  }
  const SparseMatrix S =
      detail::from_triplets(mesh.n_q2_nodes(), mesh.n_q2_nodes(), t);
  return detail::vector_expand(S, dof.n_q2);
}

// convection N(w), entries (w . grad phi_b, phi_a); linear in the wind
inline SparseMatrix assemble_convection(const Mesh& mesh, const DofMap& dof,
                                        const Vector& wind) {
  require(wind.size() == dof.n_u, "assemble_convection: wind must have n_u entries");
  const auto& tab = element_tables();
  std::vector<Triplet> t;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const auto& dofs = mesh.cell_q2[c];
    double loc[9][9] = {};
    for (const auto& p : tab.pts) {
      const auto eg = element_geometry(mesh, c, p);
      double wx = 0, wy = 0;
      double gx[9], gy[9];
      for (int a = 0; a < 9; ++a) {
        wx += wind(dofs[a]) * p.q2v[a];
        wy += wind(dof.n_q2 + dofs[a]) * p.q2v[a];
        gx[a] = eg.ixx * p.q2g[a][0] + eg.ixy * p.q2g[a][1];
        gy[a] = eg.iyx * p.q2g[a][0] + eg.iyy * p.q2g[a][1];
      }
      const double s = p.w * eg.detJ;
      for (int a = 0; a < 9; ++a)
        for (int b = 0; b < 9; ++b)
          loc[a][b] += s * (wx * gx[b] + wy * gy[b]) * p.q2v[a];
    }
    for (int a = 0; a < 9; ++a)
      for (int b = 0; b < 9; ++b) t.emplace_back(dofs[a], dofs[b], loc[a][b]);
  }
  const SparseMatrix S =
      detail::from_triplets(mesh.n_q2_nodes(), mesh.n_q2_nodes(), t);
  return detail::vector_expand(S, dof.n_q2);
}

// divergence matrix, b_cd = -(phi_c, div Phi_d), shape n_p x n_u
inline SparseMatrix assemble_divergence(const Mesh& mesh, const DofMap& dof) {
  const auto& tab = element_tables();
  std::vector<Triplet> t;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const auto& vdofs = mesh.cell_q2[c];
    const auto& pdofs = mesh.cells[c];
    double locx[4][9] = {}, locy[4][9] = {};
    for (const auto& p : tab.pts) {
      const auto eg = element_geometry(mesh, c, p);
      const double s = p.w * eg.detJ;
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 9; ++b) {
          const double gx = eg.ixx * p.q2g[b][0] + eg.ixy * p.q2g[b][1];
          const double gy = eg.iyx * p.q2g[b][0] + eg.iyy * p.q2g[b][1];
          locx[a][b] -= s * p.q1v[a] * gx;
          locy[a][b] -= s * p.q1v[a] * gy;
        }
    }
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 9; ++b) {
        t.emplace_back(pdofs[a], vdofs[b], locx[a][b]);
        t.emplace_back(pdofs[a], dof.n_q2 + vdofs[b], locy[a][b]);
      }
  }
  return detail::from_triplets(dof.n_p, dof.n_u, t);
}

// ---- Q1 pressure-space operators (used by the PCD preconditioner) ----

inline SparseMatrix assemble_pressure_mass(const Mesh& mesh) {
  const auto& tab = element_tables();
  std::vector<Triplet> t;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const auto& dofs = mesh.cells[c];
    double loc[4][4] = {};
    for (const auto& p : tab.pts) {
      const auto eg = element_geometry(mesh, c, p);
      const double s = p.w * eg.detJ;
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) loc[a][b] += s * (p.q1v[a] * p.q1v[b]);
    }
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) t.emplace_back(dofs[a], dofs[b], loc[a][b]);
  }
  return detail::from_triplets(mesh.n_vertices(), mesh.n_vertices(), t);
}

inline SparseMatrix assemble_pressure_diffusion(const Mesh& mesh,
                                                const Vector& nu_nodal_q2) {
  const auto& tab = element_tables();
  std::vector<Triplet> t;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const auto& dofs = mesh.cells[c];
    const auto& q2d = mesh.cell_q2[c];
    double loc[4][4] = {};
    for (const auto& p : tab.pts) {
      const auto eg = element_geometry(mesh, c, p);
      double nu = 0;
      for (int a = 0; a < 9; ++a) nu += nu_nodal_q2(q2d[a]) * p.q2v[a];
      const double s = p.w * eg.detJ * nu;
      double gx[4], gy[4];
      for (int a = 0; a < 4; ++a) {
        gx[a] = eg.ixx * p.q1g[a][0] + eg.ixy * p.q1g[a][1];
        gy[a] = eg.iyx * p.q1g[a][0] + eg.iyy * p.q1g[a][1];
      }
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
          loc[a][b] += s * (gx[a] * gx[b] + gy[a] * gy[b]);
    }
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) t.emplace_back(dofs[a], dofs[b], loc[a][b]);
  }
  return detail::from_triplets(mesh.n_vertices(), mesh.n_vertices(), t);
}

inline SparseMatrix assemble_pressure_convection(const Mesh& mesh,
                                                 const DofMap& dof,
                                                 const Vector& wind) {
  const auto& tab = element_tables();
  std::vector<Triplet> t;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const auto& dofs = mesh.cells[c];
    const auto& q2d = mesh.cell_q2[c];
    double loc[4][4] = {};
    for (const auto& p : tab.pts) {
      const auto eg = element_geometry(mesh, c, p);
      double wx = 0, wy = 0;
      for (int a = 0; a < 9; ++a) {
        wx += wind(q2d[a]) * p.q2v[a];
        wy += wind(dof.n_q2 + q2d[a]) * p.q2v[a];
      }
      const double s = p.w * eg.detJ;
      double gx[4], gy[4];
      for (int a = 0; a < 4; ++a) {
        gx[a] = eg.ixx * p.q1g[a][0] + eg.ixy * p.q1g[a][1];
        gy[a] = eg.iyx * p.q1g[a][0] + eg.iyy * p.q1g[a][1];
      }
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
          loc[a][b] += s * (wx * gx[b] + wy * gy[b]) * p.q1v[a];
    }
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) t.emplace_back(dofs[a], dofs[b], loc[a][b]);
  }
  return detail::from_triplets(mesh.n_vertices(), mesh.n_vertices(), t);
}

// ---------------------------------------------------------------------------
// Dirichlet elimination
// ---------------------------------------------------------------------------

// rows and columns of constrained dofs replaced by identity
inline SparseMatrix eliminate_rows_cols(const SparseMatrix& A,
                                        const std::vector<char>& mask) {
  std::vector<Triplet> t;
  t.reserve(A.nonZeros());
  for (int r = 0; r < A.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(A, r); it; ++it)
      if (!mask[it.row()] && !mask[it.col()])
        t.emplace_back(it.row(), it.col(), it.value());
  for (int i = 0; i < static_cast<int>(mask.size()); ++i)
    if (mask[i]) t.emplace_back(i, i, 1.0);
  return detail::from_triplets(A.rows(), A.cols(), t);
}

// rows and columns of constrained dofs set to zero (no identity)
inline SparseMatrix zero_rows_cols(const SparseMatrix& A,
                                   const std::vector<char>& mask) {
  std::vector<Triplet> t;
  t.reserve(A.nonZeros());
  for (int r = 0; r < A.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(A, r); it; ++it)
      if (!mask[it.row()] && !mask[it.col()])
        t.emplace_back(it.row(), it.col(), it.value());
  return detail::from_triplets(A.rows(), A.cols(), t);
}

// zero the constrained columns of B (velocity space is the column space)
inline SparseMatrix zero_cols(const SparseMatrix& B,
                              const std::vector<char>& mask) {
  std::vector<Triplet> t;
  t.reserve(B.nonZeros());
  for (int r = 0; r < B.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(B, r); it; ++it)
      if (!mask[it.col()]) t.emplace_back(it.row(), it.col(), it.value());
  return detail::from_triplets(B.rows(), B.cols(), t);
}

struct SaddleSystem {
  SparseMatrix F;   // n_u x n_u
  SparseMatrix B;   // n_p x n_u
  Vector rhs_u;
  Vector rhs_p;
};

// Symmetric elimination of Dirichlet velocity dofs. `values` is a full-length
// vector carrying the boundary values on constrained dofs (zero elsewhere).
// Eliminated couplings are moved to the right-hand side; constrained rows
// become identity rows with the boundary value on the right.
inline void apply_dirichlet(SaddleSystem& sys, const std::vector<char>& mask,
                            const Vector& values) {
  require(values.size() == sys.F.rows(),
          "apply_dirichlet: boundary value vector has wrong length");
  Vector lift = Vector::Zero(values.size());
  for (int i = 0; i < values.size(); ++i)
    if (mask[i]) {
      require(std::isfinite(values(i)),
              "apply_dirichlet: missing boundary value");
      lift(i) = values(i);
    }
  sys.rhs_u -= sys.F * lift;
  sys.rhs_p -= sys.B * lift;
  for (int i = 0; i < values.size(); ++i)
    if (mask[i]) sys.rhs_u(i) = lift(i);
  sys.F = eliminate_rows_cols(sys.F, mask);
  sys.B = zero_cols(sys.B, mask);
}

// Full saddle-point matrix [[F, B^T],[B, 0]] for monolithic solves.
inline SparseMatrix saddle_matrix(const SparseMatrix& F,
                                  const SparseMatrix& B) {
  const int nu = static_cast<int>(F.rows());
  const int np = static_cast<int>(B.rows());
  std::vector<Triplet> t;
  t.reserve(F.nonZeros() + 2 * B.nonZeros());
  for (int r = 0; r < F.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(F, r); it; ++it)
      t.emplace_back(it.row(), it.col(), it.value());
  for (int r = 0; r < B.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(B, r); it; ++it) {
      t.emplace_back(nu + it.row(), it.col(), it.value());
      t.emplace_back(it.col(), nu + it.row(), it.value());
    }
  return detail::from_triplets(nu + np, nu + np, t);
}

// ---------------------------------------------------------------------------
// interpolation and point evaluation
// ---------------------------------------------------------------------------

inline Vector interpolate_q2(const Mesh& mesh,
                             const std::function<double(double, double)>& f) {
  Vector v(mesh.n_q2_nodes());
  for (int i = 0; i < mesh.n_q2_nodes(); ++i) v(i) = f(mesh.q2x[i], mesh.q2y[i]);
  return v;
}

inline Vector interpolate_velocity(
    const Mesh& mesh, const std::function<double(double, double)>& fx,
    const std::function<double(double, double)>& fy) {
  const int n = mesh.n_q2_nodes();
  Vector v(2 * n);
  for (int i = 0; i < n; ++i) {
    v(i) = fx(mesh.q2x[i], mesh.q2y[i]);
    v(n + i) = fy(mesh.q2x[i], mesh.q2y[i]);
  }
  return v;
}

// reference coordinates of (x,y) inside an axis-aligned cell
inline std::array<double, 2> reference_coords(const Mesh& mesh, int cell,
                                              double x, double y) {
  const auto& v = mesh.cells[cell];
  const double x0 = mesh.vx[v[0]], x1 = mesh.vx[v[1]];
  const double y0 = mesh.vy[v[0]], y1 = mesh.vy[v[3]];
  return {(2.0 * x - (x0 + x1)) / (x1 - x0), (2.0 * y - (y0 + y1)) / (y1 - y0)};
}

inline Eigen::Vector2d eval_velocity(const Mesh& mesh, const DofMap& dof,
                                     const Vector& u, double x, double y) {
  const int c = mesh.locate(x, y);
  require(c >= 0, "eval_velocity: point outside the fluid domain");
  const auto rc = reference_coords(mesh, c, x, y);
  Eigen::Vector2d out(0, 0);
  for (int a = 0; a < 9; ++a) {
    const double s = shape::q2(a, rc[0], rc[1]);
    out(0) += u(mesh.cell_q2[c][a]) * s;
    out(1) += u(dof.n_q2 + mesh.cell_q2[c][a]) * s;
  }
  return out;
}

inline double eval_pressure(const Mesh& mesh, const Vector& p, double x,
                            double y) {
  const int c = mesh.locate(x, y);
  require(c >= 0, "eval_pressure: point outside the fluid domain");
  const auto rc = reference_coords(mesh, c, x, y);
  double out = 0;
  for (int a = 0; a < 4; ++a)
    out += p(mesh.cells[c][a]) * shape::q1(a, rc[0], rc[1]);
  return out;
}

}  // namespace sgflow
