#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sgflow/types.hpp"

namespace sgflow {

struct Rect {
  double x0 = 0, x1 = 0, y0 = 0, y1 = 0;
  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  bool contains(double x, double y) const {
    return x > x0 && x < x1 && y > y0 && y < y1;
  }
};

enum class BoundaryTag { inflow, wall, obstacle, outflow };

inline const char* to_string(BoundaryTag t) {
  switch (t) {
    case BoundaryTag::inflow: return "inflow";
    case BoundaryTag::wall: return "wall";
    case BoundaryTag::obstacle: return "obstacle";
    case BoundaryTag::outflow: return "outflow";
  }
  return "?";
}

struct BoundaryEdge {
  int v0 = -1, v1 = -1;   // vertex (Q1) node ids
  int mid = -1;           // Q2 edge-midpoint node id
  BoundaryTag tag = BoundaryTag::wall;
};

// Quadrilateral channel mesh with an optional rectangular hole.
// Vertices double as Q1 pressure nodes; Q2 velocity nodes are
// vertices + edge midpoints + cell centers.
struct Mesh {
  std::vector<double> vx, vy;                // vertex coordinates
  std::vector<std::array<int, 4>> cells;     // SW,SE,NE,NW vertex ids
  std::vector<std::array<int, 9>> cell_q2;   // tensor-ordered Q2 node ids
  std::vector<double> q2x, q2y;              // Q2 node coordinates
  std::vector<BoundaryEdge> boundary;
  int refinement = 1;
  double channel_length = 0, channel_halfheight = 0;
  std::optional<Rect> obstacle;
  double area = 0;

  // structured-grid bookkeeping used for point location
  std::vector<double> grid_x, grid_y;        // axis breakpoints
  std::vector<int> cell_of_box;              // (nx*ny), -1 for hole cells

  int n_vertices() const { return static_cast<int>(vx.size()); }
  int n_q2_nodes() const { return static_cast<int>(q2x.size()); }
  int n_cells() const { return static_cast<int>(cells.size()); }

  // Index of the structured cell containing (x,y); -1 if outside the fluid.
  int locate(double x, double y) const {
    const int nx = static_cast<int>(grid_x.size()) - 1;
    const int ny = static_cast<int>(grid_y.size()) - 1;
    if (x < grid_x.front() || x > grid_x.back() || y < grid_y.front() ||
        y > grid_y.back())
      return -1;
    auto find_interval = [](const std::vector<double>& g, double v) {
      auto it = std::upper_bound(g.begin(), g.end(), v);
      int i = static_cast<int>(it - g.begin()) - 1;
      return std::min(std::max(i, 0), static_cast<int>(g.size()) - 2);
    };
    const int i = find_interval(grid_x, x);
    const int j = find_interval(grid_y, y);
    return cell_of_box[j * nx + i];
  }
};

namespace detail {

// Uniform subdivision of [a,b] split at the required interior breakpoints,
// each segment meshed with spacing as close to h as possible.
inline std::vector<double> axis_breakpoints(double a, double b,
                                            std::vector<double> interior,
                                            double h) {
  std::vector<double> seg{a};
  std::sort(interior.begin(), interior.end());
  for (double v : interior)
    if (v > a + 1e-14 && v < b - 1e-14) seg.push_back(v);
  seg.push_back(b);
  std::vector<double> out;
  for (std::size_t s = 0; s + 1 < seg.size(); ++s) {
    const double len = seg[s + 1] - seg[s];
    const int n = std::max(1, static_cast<int>(std::llround(len / h)));
    for (int i = 0; i < n; ++i)
      out.push_back(seg[s] + len * static_cast<double>(i) / n);
  }
  out.push_back(b);
  return out;
}

}  // namespace detail

// Structured Taylor-Hood mesh of [0,L] x [-H,H], minus an optional
// axis-aligned obstacle box whose edges must lie on grid lines of the
// level-1 grid (base spacing 0.25 by default, halved per level).
inline Mesh generate_channel_mesh(double channel_length,
                                  double channel_halfheight,
                                  std::optional<Rect> obstacle_box,
                                  int refinement, double base_h = 0.25) {
  require(refinement >= 1, "mesh: refinement must be >= 1");
  require(channel_length > 0 && channel_halfheight > 0,
          "mesh: channel dimensions must be positive");
  const double L = channel_length, H = channel_halfheight;
  if (obstacle_box) {
    const Rect& r = *obstacle_box;
    if (!(r.x0 < r.x1 && r.y0 < r.y1))
      throw GeometryError("mesh: obstacle box is degenerate");
    if (!(r.x0 > 0 && r.x1 < L && r.y0 > -H && r.y1 < H))
      throw GeometryError("mesh: obstacle box must lie strictly inside the channel");
  }

  const double h = base_h / static_cast<double>(1 << (refinement - 1));
  std::vector<double> req_x, req_y;
  if (obstacle_box) {
    req_x = {obstacle_box->x0, obstacle_box->x1};
    req_y = {obstacle_box->y0, obstacle_box->y1};
  }
  Mesh m;
  m.refinement = refinement;
  m.channel_length = L;
  m.channel_halfheight = H;
  m.obstacle = obstacle_box;
  m.grid_x = detail::axis_breakpoints(0.0, L, req_x, h);
  m.grid_y = detail::axis_breakpoints(-H, H, req_y, h);
  const int nx = static_cast<int>(m.grid_x.size()) - 1;
  const int ny = static_cast<int>(m.grid_y.size()) - 1;

  auto gv = [&](int i, int j) { return j * (nx + 1) + i; };  // grid vertex id

  // fluid cells
  std::vector<char> fluid(static_cast<std::size_t>(nx) * ny, 1);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const double cx = 0.5 * (m.grid_x[i] + m.grid_x[i + 1]);
      const double cy = 0.5 * (m.grid_y[j] + m.grid_y[j + 1]);
      if (obstacle_box && obstacle_box->contains(cx, cy)) fluid[j * nx + i] = 0;
    }

  // compress vertices used by fluid cells, in grid order
  std::vector<int> vid(static_cast<std::size_t>(nx + 1) * (ny + 1), -1);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      if (fluid[j * nx + i])
        for (int dj = 0; dj <= 1; ++dj)
          for (int di = 0; di <= 1; ++di) vid[gv(i + di, j + dj)] = 0;
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      const int g = gv(i, j);
      if (vid[g] == 0) {
        vid[g] = static_cast<int>(m.vx.size());
        m.vx.push_back(m.grid_x[i]);
        m.vy.push_back(m.grid_y[j]);
      }
    }

  m.cell_of_box.assign(static_cast<std::size_t>(nx) * ny, -1);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      if (fluid[j * nx + i]) {
        m.cell_of_box[j * nx + i] = static_cast<int>(m.cells.size());
        m.cells.push_back({vid[gv(i, j)], vid[gv(i + 1, j)],
                           vid[gv(i + 1, j + 1)], vid[gv(i, j + 1)]});
        m.area += (m.grid_x[i + 1] - m.grid_x[i]) * (m.grid_y[j + 1] - m.grid_y[j]);
      }

  // Q2 nodes: vertices, then edge midpoints in sorted-key order, then centers
  std::map<std::pair<int, int>, int> edge_id;
  auto edge_key = [](int a, int b) {
    return std::make_pair(std::min(a, b), std::max(a, b));
  };
  std::map<std::pair<int, int>, int> edge_count;
  for (const auto& c : m.cells) {
    const int e[4][2] = {{c[0], c[1]}, {c[1], c[2]}, {c[3], c[2]}, {c[0], c[3]}};
    for (auto& p : e) edge_count[edge_key(p[0], p[1])]++;
  }
  m.q2x = m.vx;
  m.q2y = m.vy;
  for (const auto& [key, cnt] : edge_count) {
    edge_id[key] = static_cast<int>(m.q2x.size());
    m.q2x.push_back(0.5 * (m.vx[key.first] + m.vx[key.second]));
    m.q2y.push_back(0.5 * (m.vy[key.first] + m.vy[key.second]));
  }
  m.cell_q2.resize(m.cells.size());
  for (std::size_t c = 0; c < m.cells.size(); ++c) {
    const auto& v = m.cells[c];
    const int center = static_cast<int>(m.q2x.size());
    m.q2x.push_back(0.25 * (m.vx[v[0]] + m.vx[v[1]] + m.vx[v[2]] + m.vx[v[3]]));
    m.q2y.push_back(0.25 * (m.vy[v[0]] + m.vy[v[1]] + m.vy[v[2]] + m.vy[v[3]]));
    m.cell_q2[c] = {v[0],
                    edge_id[edge_key(v[0], v[1])],
                    v[1],
                    edge_id[edge_key(v[0], v[3])],
                    center,
                    edge_id[edge_key(v[1], v[2])],
                    v[3],
                    edge_id[edge_key(v[3], v[2])],
                    v[2]};
  }

  // boundary edges: used by exactly one fluid cell
  const double tol = 1e-10 * std::max(L, H);
  for (const auto& [key, cnt] : edge_count) {
    if (cnt != 1) continue;
    BoundaryEdge be;
    be.v0 = key.first;
    be.v1 = key.second;
    be.mid = edge_id[key];
    const double mx = m.q2x[be.mid], my = m.q2y[be.mid];
    if (std::abs(mx) < tol)
      be.tag = BoundaryTag::inflow;
    else if (std::abs(mx - L) < tol)
      be.tag = BoundaryTag::outflow;
    else if (std::abs(my - H) < tol || std::abs(my + H) < tol)
      be.tag = BoundaryTag::wall;
    else
      be.tag = BoundaryTag::obstacle;
    m.boundary.push_back(be);
  }
  return m;
}

inline Mesh generate_obstacle_mesh(double channel_length,
                                   double channel_halfheight,
                                   const Rect& obstacle_box, int refinement,
                                   double base_h = 0.25) {
  return generate_channel_mesh(channel_length, channel_halfheight,
                               obstacle_box, refinement, base_h);
}

inline Rect default_obstacle() { return Rect{1.75, 2.25, -0.25, 0.25}; }

// Plain-text node/element/tag export.
inline void write_mesh_text(const Mesh& m, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw SolverError("cannot open " + path);
  char buf[64];
  f << "nodes " << m.n_vertices() << "\n";
  for (int i = 0; i < m.n_vertices(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g", m.vx[i], m.vy[i]);
    f << buf << "\n";
  }
  f << "elements " << m.n_cells() << "\n";
  for (const auto& c : m.cells)
    f << c[0] << " " << c[1] << " " << c[2] << " " << c[3] << "\n";
  f << "boundary " << m.boundary.size() << "\n";
  for (const auto& b : m.boundary)
    f << b.v0 << " " << b.v1 << " " << to_string(b.tag) << "\n";
}

// Legacy-VTK unstructured grid with optional named vertex scalar fields.
inline void write_mesh_vtk(
    const Mesh& m, const std::string& path,
    const std::vector<std::pair<std::string, std::vector<double>>>& point_data =
        {}) {
  std::ofstream f(path);
  if (!f) throw SolverError("cannot open " + path);
  f << "# vtk DataFile Version 2.0\nsgflow mesh\nASCII\n"
    << "DATASET UNSTRUCTURED_GRID\n";
  f << "POINTS " << m.n_vertices() << " double\n";
  char buf[96];
  for (int i = 0; i < m.n_vertices(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g 0", m.vx[i], m.vy[i]);
    f << buf << "\n";
  }
  f << "CELLS " << m.n_cells() << " " << 5 * m.n_cells() << "\n";
  for (const auto& c : m.cells)
    f << "4 " << c[0] << " " << c[1] << " " << c[2] << " " << c[3] << "\n";
  f << "CELL_TYPES " << m.n_cells() << "\n";
  for (int i = 0; i < m.n_cells(); ++i) f << "9\n";
  if (!point_data.empty()) {
    f << "POINT_DATA " << m.n_vertices() << "\n";
    for (const auto& [name, vals] : point_data) {
      f << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (int i = 0; i < m.n_vertices(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", vals[i]);
        f << buf << "\n";
      }
    }
  }
}

}  // namespace sgflow
