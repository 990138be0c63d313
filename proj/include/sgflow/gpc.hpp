#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "sgflow/quadrature.hpp"
#include "sgflow/types.hpp"

namespace sgflow {

using MultiIndex = std::vector<int>;

// All multi-indices in m variables of total degree <= p, graded
// lexicographic: ascending degree, lexicographically descending within a
// degree, so the zero index comes first.
struct MultiIndexSet {
  int m = 0;
  int p = 0;
  std::vector<MultiIndex> indices;

  int size() const { return static_cast<int>(indices.size()); }
  int degree(int k) const {
    int d = 0;
    for (int v : indices[k]) d += v;
    return d;
  }
};

namespace detail {

inline void enumerate_degree(int m, int d, MultiIndex& cur,
                             std::vector<MultiIndex>& out, int pos) {
  if (pos == m - 1) {
    cur[pos] = d;
    out.push_back(cur);
    return;
  }
  for (int v = d; v >= 0; --v) {
    cur[pos] = v;
    enumerate_degree(m, d - v, cur, out, pos + 1);
  }
}

}  // namespace detail

inline MultiIndexSet build_multiindices(int m, int p) {
  require(m >= 1, "build_multiindices: m must be >= 1");
  require(p >= 0, "build_multiindices: p must be >= 0");
  MultiIndexSet s;
  s.m = m;
  s.p = p;
  MultiIndex cur(m, 0);
  for (int d = 0; d <= p; ++d) detail::enumerate_degree(m, d, cur, s.indices, 0);
  return s;
}

inline long binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// probabilists' Hermite polynomial He_n(x)
inline double hermite_he(int n, double x) {
  if (n == 0) return 1.0;
  double hm = 1.0, h = x;
  for (int k = 1; k < n; ++k) {
    const double hn = x * h - k * hm;
    hm = h;
    h = hn;
  }
  return h;
}

// Orthonormal multivariate Hermite basis: psi_k(xi) = prod_j
// He_{a_j}(xi_j) / sqrt(a_j!), so that E[psi_k psi_l] = delta_kl under the
// standard Gaussian measure and psi_1 = 1.
struct GpcBasis {
  MultiIndexSet set;
  std::vector<double> norm;  // prod sqrt(a_j!) per basis function

  int size() const { return set.size(); }
  int dim() const { return set.m; }
  int degree() const { return set.p; }

  double evaluate(int k, const Vector& xi) const {
    const MultiIndex& a = set.indices[k];
    double v = 1.0;
    for (int j = 0; j < set.m; ++j) v *= hermite_he(a[j], xi(j));
    return v / norm[k];
  }
};

inline GpcBasis make_gpc_basis(int m, int p) {
  GpcBasis b;
  b.set = build_multiindices(m, p);
  b.norm.resize(b.set.size());
  for (int k = 0; k < b.set.size(); ++k) {
    double n2 = 1.0;
    for (int j = 0; j < m; ++j)
      for (int i = 1; i <= b.set.indices[k][j]; ++i) n2 *= i;
    b.norm[k] = std::sqrt(n2);
  }
  return b;
}

// Coupling matrices H_l with entries E[psi_l psi_j psi_k], l indexing the
// large (viscosity) basis and j,k the solution basis. H_1 is the identity.
struct TripleProductTensor {
  int n_hat = 0;  // number of matrices
  int n_xi = 0;   // order of each matrix
  std::vector<SparseMatrix> H;         // sparse storage
  std::vector<Matrix> H_dense;         // dense copies (small)

  const Matrix& dense(int l) const { return H_dense[l]; }
};

// Full-tensor Gauss-Hermite evaluation of all E[psi_l psi_j psi_k]. The
// integrand has per-dimension degree at most deg(large) + 2 deg(small), so
// the default point count is exact. Too few points is a contract violation.
inline TripleProductTensor triple_products(const GpcBasis& basis_large,
                                           const GpcBasis& basis_small,
                                           int points_per_dim = 0) {
  require(basis_large.dim() == basis_small.dim(),
          "triple_products: bases must share the stochastic dimension");
  require(basis_large.degree() >= 2 * basis_small.degree(),
          "triple_products: large basis degree must be at least twice the small");
  const int m = basis_small.dim();
  const int need = basis_large.degree() + 2 * basis_small.degree();
  if (points_per_dim == 0) points_per_dim = need / 2 + 1;
  require(2 * points_per_dim - 1 >= need,
          "triple_products: quadrature order too low for exactness");

  const QuadRule1d g1 = gauss_hermite(points_per_dim);
  // tensor grid
  std::vector<Vector> pts;
  std::vector<double> wts;
  std::vector<int> idx(m, 0);
  while (true) {
    Vector x(m);
    double w = 1.0;
    for (int j = 0; j < m; ++j) {
      x(j) = g1.points[idx[j]];
      w *= g1.weights[idx[j]];
    }
    pts.push_back(x);
    wts.push_back(w);
    int j = 0;
    for (; j < m; ++j) {
      if (++idx[j] < g1.size()) break;
      idx[j] = 0;
    }
    if (j == m) break;
  }

  const int nL = basis_large.size();
  const int nS = basis_small.size();
  Matrix VL(static_cast<int>(pts.size()), nL), VS(static_cast<int>(pts.size()), nS);
  for (std::size_t q = 0; q < pts.size(); ++q) {
    for (int l = 0; l < nL; ++l) VL(static_cast<int>(q), l) = basis_large.evaluate(l, pts[q]);
    for (int k = 0; k < nS; ++k) VS(static_cast<int>(q), k) = basis_small.evaluate(k, pts[q]);
  }

  TripleProductTensor T;
  T.n_hat = nL;
  T.n_xi = nS;
  T.H.reserve(nL);
  T.H_dense.reserve(nL);
  Vector wv = Eigen::Map<const Vector>(wts.data(), static_cast<int>(wts.size()));
  for (int l = 0; l < nL; ++l) {
    Matrix Hl(nS, nS);
    for (int j = 0; j < nS; ++j)
      for (int k = j; k < nS; ++k) {
        double s = 0;
        for (std::size_t q = 0; q < pts.size(); ++q)
          s += wv(static_cast<int>(q)) * VL(static_cast<int>(q), l) *
               VS(static_cast<int>(q), j) * VS(static_cast<int>(q), k);
        if (std::abs(s) < 1e-12) s = 0.0;  // drop quadrature noise
        Hl(j, k) = s;
        Hl(k, j) = s;
      }
    std::vector<Triplet> t;
    for (int j = 0; j < nS; ++j)
      for (int k = 0; k < nS; ++k)
        if (Hl(j, k) != 0.0) t.emplace_back(j, k, Hl(j, k));
    SparseMatrix Hs(nS, nS);
    Hs.setFromTriplets(t.begin(), t.end());
    Hs.makeCompressed();
    T.H.push_back(std::move(Hs));
    T.H_dense.push_back(std::move(Hl));
  }
  return T;
}

}  // namespace sgflow
