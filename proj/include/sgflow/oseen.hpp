#pragma once

#include <memory>
#include <utility>

#include "sgflow/fem.hpp"
#include "sgflow/krylov.hpp"
#include "sgflow/types.hpp"

namespace sgflow {

// ---------------------------------------------------------------------------
// time-independent operators of one Navier-Stokes discretization
// ---------------------------------------------------------------------------

struct DetOperators {
  const Mesh* mesh = nullptr;
  const DofMap* dof = nullptr;
  SparseMatrix M;        // velocity mass (raw, no boundary treatment)
  SparseMatrix A;        // diffusion with the given viscosity field
  SparseMatrix B;        // divergence
  SparseMatrix B_hat;    // divergence with Dirichlet columns zeroed
  SparseMatrix Mp;       // pressure mass
  SparseMatrix Fp_diff;  // pressure diffusion with the viscosity field
  SparseMatrix Ap;       // B T^{-1} B^T, T = diag velocity mass, inflow-pinned
  std::vector<char> p_inflow;  // inflow pressure-node mask
  double area = 0;
};

inline DetOperators build_det_operators(const Mesh& mesh, const DofMap& dof,
                                        const Vector& nu_field) {
  DetOperators ops;
  ops.mesh = &mesh;
  ops.dof = &dof;
  ops.M = assemble_mass(mesh, dof);
  ops.A = assemble_diffusion(mesh, dof, nu_field);
  ops.B = assemble_divergence(mesh, dof);
  ops.B_hat = zero_cols(ops.B, dof.dirichlet);
  ops.Mp = assemble_pressure_mass(mesh);
  ops.Fp_diff = assemble_pressure_diffusion(mesh, nu_field);
  ops.area = mesh.area;

  ops.p_inflow.assign(dof.n_p, 0);
  for (const auto& be : mesh.boundary)
    if (be.tag == BoundaryTag::inflow)
      ops.p_inflow[be.v0] = ops.p_inflow[be.v1] = 1;

  // pressure "Laplacian" for the Schur approximation, consistent with the
  // Dirichlet-eliminated divergence block
  Vector tinv(dof.n_u);
  for (int i = 0; i < dof.n_u; ++i) tinv(i) = 1.0 / ops.M.coeff(i, i);
  SparseMatrix Bt = SparseMatrix(ops.B_hat.transpose());
  SparseMatrix scaledBt(dof.n_u, dof.n_p);
  {
    std::vector<Triplet> t;
    for (int r = 0; r < Bt.outerSize(); ++r)
      for (SparseMatrix::InnerIterator it(Bt, r); it; ++it)
        t.emplace_back(it.row(), it.col(), it.value() * tinv(it.row()));
    scaledBt.setFromTriplets(t.begin(), t.end());
  }
  // No explicit pressure boundary conditions: building Ap from the
  // eliminated divergence block already carries the velocity Dirichlet
  // information, and pinning rows was measurably counterproductive here.
  ops.Ap = SparseMatrix(ops.B_hat * scaledBt);
  return ops;
}

// F^{n+1} = 2M + k A + k N(w), assembled raw
inline SparseMatrix oseen_velocity_matrix(const DetOperators& ops, double k,
                                          const SparseMatrix& N) {
  return SparseMatrix(2.0 * ops.M + k * ops.A + k * N);
}

// pressure convection-diffusion operator for the PCD Schur approximation,
// same time scaling as the velocity matrix
inline SparseMatrix pcd_pressure_matrix(const DetOperators& ops, double k,
                                        const Vector& wind, const DofMap& dof) {
  const SparseMatrix Np = assemble_pressure_convection(*ops.mesh, dof, wind);
  return SparseMatrix(2.0 * ops.Mp + k * ops.Fp_diff + k * Np);
}

// ---------------------------------------------------------------------------
// inner solvers for the preconditioner blocks
// ---------------------------------------------------------------------------

enum class PcdMode { exact_lu, iterated };
enum class InnerSolver { lu, ssor };

struct PcdOptions {
  PcdMode mode = PcdMode::exact_lu;
  InnerSolver inner = InnerSolver::lu;  // slot used by the iterated variant
  int ssor_sweeps = 8;
  // Five steps (the classical choice) solve the Q1 mass matrix to ~6%,
  // which costs up to four extra outer fGMRES iterations per solve; ten
  // steps reach ~0.2% and keep the iterated variant within two.
  int chebyshev_iterations = 10;
};

// fixed-sweep symmetric Gauss-Seidel, zero initial guess
class SsorSolver {
 public:
  SsorSolver() = default;
  SsorSolver(const SparseMatrix& A, int sweeps) : A_(&A), sweeps_(sweeps) {
    diag_.resize(A.rows());
    for (int i = 0; i < A.rows(); ++i) {
      diag_(i) = A.coeff(i, i);
      require(diag_(i) != 0.0, "ssor: zero diagonal");
    }
  }

  Vector solve(const Vector& b) const {
    const int n = static_cast<int>(A_->rows());
    Vector x = Vector::Zero(n);
    for (int s = 0; s < sweeps_; ++s) {
      for (int r = 0; r < n; ++r) sweep_row(b, x, r);
      for (int r = n - 1; r >= 0; --r) sweep_row(b, x, r);
    }
    return x;
  }

 private:
  void sweep_row(const Vector& b, Vector& x, int r) const {
    double acc = b(r);
    for (SparseMatrix::InnerIterator it(*A_, r); it; ++it)
      if (it.col() != r) acc -= it.value() * x(it.col());
    x(r) = acc / diag_(r);
  }

  const SparseMatrix* A_ = nullptr;
  int sweeps_ = 1;
  Vector diag_;
};

// One solver slot: exact LU or fixed stationary sweeps.
class InnerSolve {
 public:
  InnerSolve() = default;
  InnerSolve(const SparseMatrix& A, InnerSolver kind, int sweeps) {
    if (kind == InnerSolver::lu)
      lu_ = std::make_shared<SparseLu>(A);
    else
      ssor_ = std::make_shared<SsorSolver>(A, sweeps);
  }
  Vector solve(const Vector& b) const {
    return lu_ ? lu_->solve(b) : ssor_->solve(b);
  }

 private:
  std::shared_ptr<SparseLu> lu_;
  std::shared_ptr<SsorSolver> ssor_;
};

// ---------------------------------------------------------------------------
// pressure convection-diffusion preconditioner for one saddle block
// ---------------------------------------------------------------------------

// Solvers that stay fixed over a whole run: the pressure-Laplacian core and
// Mp do not depend on the time step.
//
// The Schur core approximates B M^{-1} B^T. Its exact action is obtained
// from one factorization of the velocity-mass saddle system
// [[M, B^T],[B, 0]]: the pressure block of the solve with right-hand side
// (0, -r) applies (B M^{-1} B^T)^{-1} r. The diagonally lumped matrix
// Ap = B T^{-1} B^T (T = diag M) realizes the same operator approximately
// and backs the stationary-smoother slot of the iterated variant; using it
// as the exact-mode factorization caps the preconditioner at around eight
// fGMRES iterations per solve regardless of the mesh, which is why the
// consistent-mass core is the default here.
struct PcdShared {
  PcdShared() = default;
  PcdShared(const DetOperators& ops, const PcdOptions& opt) : ops_(&ops) {
    const bool exact = opt.mode == PcdMode::exact_lu;
    if (exact || opt.inner == InnerSolver::lu) {
      SparseMatrix Mhat = eliminate_rows_cols(ops.M, ops.dof->dirichlet);
      schur_lu_ = std::make_shared<SparseLu>(saddle_matrix(Mhat, ops.B_hat));
    } else {
      ap_ssor_ = std::make_shared<SsorSolver>(ops.Ap, opt.ssor_sweeps);
    }
    if (exact)
      mp_lu = std::make_shared<SparseLu>(ops.Mp);
    else
      mp_bounds = estimate_mass_bounds(ops.Mp);
    cheb_iters = opt.chebyshev_iterations;
  }

  Vector mp_solve(const Vector& r) const {
    return mp_lu ? mp_lu->solve(r)
                 : chebyshev_mass_solve(ops_->Mp, r, cheb_iters, mp_bounds);
  }

  // action of (B M^{-1} B^T)^{-1} (or its lumped stand-in)
  Vector schur_core_solve(const Vector& r) const {
    if (ap_ssor_) return ap_ssor_->solve(r);
    const int n_u = static_cast<int>(ops_->B.cols());
    Vector rhs = Vector::Zero(n_u + r.size());
    rhs.tail(r.size()) = -r;
    return schur_lu_->solve(rhs).tail(r.size());
  }

  std::shared_ptr<SparseLu> mp_lu;
  ChebyshevBounds mp_bounds;
  int cheb_iters = 5;

 private:
  const DetOperators* ops_ = nullptr;
  std::shared_ptr<SparseLu> schur_lu_;
  std::shared_ptr<SsorSolver> ap_ssor_;
};

// Block upper-triangular action
//   [ F^{-1}  F^{-1} B^T X^{-1} ]          X^{-1} = Ap^{-1} Fp Mp^{-1}
//   [   0        -X^{-1}        ]
// with F the eliminated velocity convection-diffusion matrix. Rebuilt every
// time step (F and Fp change with k and the wind).
class DetPcd final : public Preconditioner {
 public:
  DetPcd(const DetOperators& ops, const PcdShared& shared,
         const SparseMatrix& F_hat, double k, const Vector& mean_wind,
         const PcdOptions& opt)
      : shared_(&shared) {
    n_u_ = static_cast<int>(F_hat.rows());
    n_p_ = static_cast<int>(ops.B.rows());
    Bt_hat_ = SparseMatrix(ops.B_hat.transpose());
    Fp_ = pcd_pressure_matrix(ops, k, mean_wind, *ops.dof);
    F_solve_ = (opt.mode == PcdMode::exact_lu)
                   ? InnerSolve(F_hat, InnerSolver::lu, 0)
                   : InnerSolve(F_hat, opt.inner, opt.ssor_sweeps);
  }

  int size() const { return n_u_ + n_p_; }

  Vector apply(const Vector& r) const override {
    require(r.size() == n_u_ + n_p_, "pcd: dimension mismatch");
    Vector v(n_u_ + n_p_);
    const Vector p =
        -shared_->schur_core_solve(Fp_ * shared_->mp_solve(r.tail(n_p_)));
    v.tail(n_p_) = p;
    v.head(n_u_) = F_solve_.solve(r.head(n_u_) - Bt_hat_ * p);
    return v;
  }

 private:
  const PcdShared* shared_;
  int n_u_ = 0, n_p_ = 0;
  SparseMatrix Bt_hat_;
  SparseMatrix Fp_;
  InnerSolve F_solve_;
};

}  // namespace sgflow
