#pragma once

#include <Eigen/SparseLU>

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "sgflow/types.hpp"

namespace sgflow {

struct LinearOperator {
  virtual ~LinearOperator() = default;
  virtual int size() const = 0;
  virtual Vector apply(const Vector& x) const = 0;
};

struct Preconditioner {
  virtual ~Preconditioner() = default;
  virtual Vector apply(const Vector& r) const = 0;
};

struct IdentityPreconditioner final : Preconditioner {
  Vector apply(const Vector& r) const override { return r; }
};

struct SolveReport {
  int iterations = 0;
  double relative_residual = 0.0;
  double rhs_norm = 0.0;
  bool converged = false;
  bool breakdown = false;
};

// ---------------------------------------------------------------------------
// sparse direct factorization
// ---------------------------------------------------------------------------

class SparseLu {
 public:
  SparseLu() = default;

  explicit SparseLu(const SparseMatrix& A) { factorize(A); }

  void factorize(const SparseMatrix& A) {
    require(A.rows() == A.cols(), "sparse_lu: matrix must be square");
    n_ = static_cast<int>(A.rows());
    SparseMatrixCol Ac = A;  // SparseLU wants column-major
    Ac.makeCompressed();
    lu_ = std::make_shared<Eigen::SparseLU<SparseMatrixCol>>();
    lu_->compute(Ac);
    if (lu_->info() != Eigen::Success)
      throw SolverError("sparse_lu: factorization failed (singular pivot?)");
  }

  Vector solve(const Vector& b) const {
    require(lu_ != nullptr, "sparse_lu: not factorized");
    require(b.size() == n_, "sparse_lu: right-hand side has wrong length");
    return lu_->solve(b);
  }

  int size() const { return n_; }

 private:
  int n_ = 0;
  std::shared_ptr<Eigen::SparseLU<SparseMatrixCol>> lu_;
};

struct SparseLuPreconditioner final : Preconditioner {
  SparseLu lu;
  explicit SparseLuPreconditioner(const SparseMatrix& A) : lu(A) {}
  Vector apply(const Vector& r) const override { return lu.solve(r); }
};

struct MatrixOperator final : LinearOperator {
  SparseMatrix A;
  explicit MatrixOperator(SparseMatrix m) : A(std::move(m)) {}
  int size() const override { return static_cast<int>(A.rows()); }
  Vector apply(const Vector& x) const override { return A * x; }
};

// ---------------------------------------------------------------------------
// right-preconditioned flexible GMRES
// ---------------------------------------------------------------------------

// Starts from a zero iterate and stops at the first iterate whose true
// (recursively updated) residual satisfies ||b - A x|| <= tol * ||b||.
// No restarting unless restart > 0.
inline std::pair<Vector, SolveReport> fgmres(const LinearOperator& op,
                                             const Preconditioner& precond,
                                             const Vector& rhs, double tol,
                                             int max_iter, int restart = 0) {
  require(tol > 0, "fgmres: tolerance must be positive");
  require(rhs.size() == op.size(), "fgmres: dimension mismatch");
  const int n = op.size();
  Vector x = Vector::Zero(n);
  SolveReport rep;

  const double bnorm = rhs.norm();
  rep.rhs_norm = bnorm;
  if (bnorm == 0.0) {
    rep.converged = true;
    return {x, rep};
  }
  const int m = (restart > 0) ? restart : max_iter;

  int total_it = 0;
  while (total_it < max_iter) {
    Vector r = rhs - op.apply(x);
    double beta = r.norm();
    if (beta / bnorm <= tol) {
      rep.converged = true;
      rep.relative_residual = beta / bnorm;
      return {x, rep};
    }

    std::vector<Vector> V, Z;
    V.push_back(r / beta);
    Matrix Hm = Matrix::Zero(m + 1, m);
    std::vector<double> cs(m, 0), sn(m, 0);
    Vector g = Vector::Zero(m + 1);
    g(0) = beta;

    int j = 0;
    for (; j < m && total_it < max_iter; ++j, ++total_it) {
      Z.push_back(precond.apply(V[j]));
      Vector w = op.apply(Z[j]);
      for (int i = 0; i <= j; ++i) {  // modified Gram-Schmidt
        Hm(i, j) = w.dot(V[i]);
        w -= Hm(i, j) * V[i];
      }
      Hm(j + 1, j) = w.norm();
      const bool lucky = Hm(j + 1, j) <= 1e-14 * beta;
      if (!lucky) V.push_back(w / Hm(j + 1, j));

      for (int i = 0; i < j; ++i) {  // apply stored Givens rotations
        const double t = cs[i] * Hm(i, j) + sn[i] * Hm(i + 1, j);
        Hm(i + 1, j) = -sn[i] * Hm(i, j) + cs[i] * Hm(i + 1, j);
        Hm(i, j) = t;
      }
      const double denom = std::hypot(Hm(j, j), Hm(j + 1, j));
      if (denom == 0) {
        rep.breakdown = true;
        break;
      }
      cs[j] = Hm(j, j) / denom;
      sn[j] = Hm(j + 1, j) / denom;
      Hm(j, j) = denom;
      Hm(j + 1, j) = 0;
      g(j + 1) = -sn[j] * g(j);
      g(j) = cs[j] * g(j);

      const double res = std::abs(g(j + 1));
      if (res / bnorm <= tol || lucky) {
        ++j;
        ++total_it;
        break;
      }
    }

    if (j > 0) {  // assemble the current iterate
      Vector y =
          Hm.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(g.head(j));
      for (int i = 0; i < j; ++i) x += y(i) * Z[i];
    }
    const double true_res = (rhs - op.apply(x)).norm() / bnorm;
    rep.iterations = total_it;
    rep.relative_residual = true_res;
    if (true_res <= tol) {
      rep.converged = true;
      return {x, rep};
    }
    if (rep.breakdown || restart == 0) break;
  }
  return {x, rep};
}

// ---------------------------------------------------------------------------
// Chebyshev semi-iteration for SPD mass-matrix solves
// ---------------------------------------------------------------------------

struct ChebyshevBounds {
  double lmin = 0;
  double lmax = 0;
};

// Gershgorin bounds of the symmetrically diagonal-scaled matrix. The lower
// bound can come out nonpositive for bilinear mass matrices; fall back to the
// classical 1:9 eigenvalue spread known for those.
inline ChebyshevBounds estimate_mass_bounds(const SparseMatrix& M) {
  double worst = 0;
  for (int r = 0; r < M.outerSize(); ++r) {
    double diag = 0, off = 0;
    for (SparseMatrix::InnerIterator it(M, r); it; ++it) {
      if (it.col() == it.row())
        diag = it.value();
      else
        off += std::abs(it.value()) /
               std::sqrt(M.coeff(it.row(), it.row()) * M.coeff(it.col(), it.col()));
    }
    require(diag > 0, "estimate_mass_bounds: nonpositive diagonal");
    worst = std::max(worst, off);
  }
  ChebyshevBounds b;
  b.lmax = 1.0 + worst;
  b.lmin = 1.0 - worst;
  if (b.lmin <= 0) b.lmin = b.lmax / 9.0;
  return b;
}

// Fixed number of Chebyshev iterations on the diagonally scaled system.
inline Vector chebyshev_mass_solve(const SparseMatrix& M, const Vector& rhs,
                                   int iters,
                                   std::optional<ChebyshevBounds> bounds = {}) {
  require(M.rows() == M.cols() && rhs.size() == M.rows(),
          "chebyshev_mass_solve: dimension mismatch");
  require(iters >= 1, "chebyshev_mass_solve: need at least one iteration");
  const ChebyshevBounds b = bounds ? *bounds : estimate_mass_bounds(M);
  if (b.lmin > b.lmax) throw ConfigError("chebyshev_mass_solve: bounds inverted");

  const int n = static_cast<int>(M.rows());
  Vector dinv_sqrt(n);
  for (int i = 0; i < n; ++i) dinv_sqrt(i) = 1.0 / std::sqrt(M.coeff(i, i));
  auto scaled_mult = [&](const Vector& v) {
    return (dinv_sqrt.array() * (M * (dinv_sqrt.array() * v.array()).matrix()).array())
        .matrix();
  };

  const double theta = 0.5 * (b.lmax + b.lmin);
  const double delta = 0.5 * (b.lmax - b.lmin);
  Vector bb = (dinv_sqrt.array() * rhs.array()).matrix();
  Vector x = Vector::Zero(n);
  Vector r = bb;
  Vector d = r / theta;
  if (delta <= 1e-14 * theta) {  // equal bounds: plain Richardson is exact
    for (int k = 0; k < iters; ++k) {
      x += d;
      r = bb - scaled_mult(x);
      d = r / theta;
    }
    return (dinv_sqrt.array() * x.array()).matrix();
  }
  const double sigma1 = theta / delta;
  double rho = 1.0 / sigma1;
  for (int k = 0; k < iters; ++k) {
    x += d;
    if (k + 1 == iters) break;
    r -= scaled_mult(d);
    const double rho_next = 1.0 / (2.0 * sigma1 - rho);
    d = (rho_next * rho) * d + (2.0 * rho_next / delta) * r;
    rho = rho_next;
  }
  return (dinv_sqrt.array() * x.array()).matrix();
}

}  // namespace sgflow
