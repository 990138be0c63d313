#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "sgflow/gpc.hpp"
#include "sgflow/random_field.hpp"
#include "sgflow/stepper.hpp"
#include "sgflow/types.hpp"

namespace sgflow {

// ---------------------------------------------------------------------------
// run-constant stochastic Galerkin operators
// ---------------------------------------------------------------------------

// Index convention: position l in every list below corresponds to gPC mode
// l+1 of the text; position 0 is the mean.
struct SgOperators {
  const Mesh* mesh = nullptr;
  const DofMap* dof = nullptr;
  DetOperators mean;                 // built with the mean viscosity
  std::vector<SparseMatrix> A;       // diffusion per viscosity mode (raw)
  std::vector<char> A_nonzero;
  const TripleProductTensor* H = nullptr;
  int n_xi = 0;
  int n_hat = 0;  // max(n_nu, n_xi)
};

inline SgOperators build_sg_operators(const Mesh& mesh, const DofMap& dof,
                                      const LognormalViscosity& visc,
                                      const TripleProductTensor& H, int n_xi) {
  SgOperators ops;
  ops.mesh = &mesh;
  ops.dof = &dof;
  ops.H = &H;
  ops.n_xi = n_xi;
  ops.n_hat = std::max(visc.n_nu(), n_xi);
  require(H.n_hat >= ops.n_hat,
          "build_sg_operators: triple-product tensor shorter than max(n_nu, n_xi)");
  require(H.n_xi == n_xi, "build_sg_operators: tensor order must equal n_xi");
  ops.mean = build_det_operators(mesh, dof, visc.mean_field());
  ops.A.resize(ops.n_hat);
  ops.A_nonzero.assign(ops.n_hat, 0);
  ops.A[0] = ops.mean.A;
  ops.A_nonzero[0] = 1;
  for (int l = 1; l < ops.n_hat; ++l) {
    if (l < visc.n_nu() && visc.coeffs[l].lpNorm<Eigen::Infinity>() > 0.0) {
      ops.A[l] = assemble_diffusion(mesh, dof, visc.coeffs[l]);
      ops.A_nonzero[l] = 1;
    }
  }
  return ops;
}

// ---------------------------------------------------------------------------
// the Kronecker-sum Oseen operator of one time step, applied matrix-free
// ---------------------------------------------------------------------------

struct SgOseenOperator final : LinearOperator {
  int n_u = 0, n_p = 0, n_xi = 0;
  SparseMatrix F1_hat;               // saddle-block velocity matrix, bc rows = I
  SparseMatrix B_hat, Bt_hat;
  std::vector<SparseMatrix> F_hat;   // modes >= 2, bc rows/cols zeroed
  std::vector<char> active;          // per mode >= 2
  const TripleProductTensor* H = nullptr;

  int n_x() const { return n_u + n_p; }
  int size() const override { return n_x() * n_xi; }

  // Y = sum_l Fcal_l V H_l in matricized form
  Matrix matvec(const Matrix& V) const {
    require(V.rows() == n_x() && V.cols() == n_xi, "sg_matvec: bad shape");
    const auto U = V.topRows(n_u);
    const auto P = V.bottomRows(n_p);
    Matrix Y(n_x(), n_xi);
    Y.topRows(n_u) = F1_hat * U + Bt_hat * P;
    Y.bottomRows(n_p) = B_hat * U;
    for (std::size_t l = 0; l < F_hat.size(); ++l)
      if (active[l + 1])
        Y.topRows(n_u) += (F_hat[l] * U) * H->H[l + 1];
    return Y;
  }

  Vector apply(const Vector& x) const override {
    Eigen::Map<const Matrix> V(x.data(), n_x(), n_xi);
    const Matrix Y = matvec(V);
    return Eigen::Map<const Vector>(Y.data(), Y.size());
  }
};

inline Matrix sg_matvec(const SgOseenOperator& op, const Matrix& V) {
  return op.matvec(V);
}

// Per-step assembly product: the eliminated operator plus the raw pieces the
// right-hand side needs.
struct SgStepSystem {
  SgOseenOperator op;
  SparseMatrix F1_raw;
  std::vector<SparseMatrix> G;   // raw A_l + N_l per mode (index 0 = mean)
  std::vector<char> active;
  double k = 0;
  Matrix winds;                  // n_u x n_xi, kept for the preconditioner
};

// F_1 = 2M + k A_1 + k N_1, F_l = k A_l + k N_l with zero-padding up to
// n_hat; convection matrices exist only for modes with a nonzero wind.
inline SgStepSystem assemble_sg_operator(const SgOperators& base, double k,
                                         const Matrix& winds) {
  require(winds.rows() == base.dof->n_u && winds.cols() == base.n_xi,
          "assemble_sg_operator: wind block has wrong shape");
  SgStepSystem s;
  s.k = k;
  s.winds = winds;
  s.active.assign(base.n_hat, 0);
  s.G.resize(base.n_hat);

  for (int l = 0; l < base.n_hat; ++l) {
    const bool has_wind =
        l < base.n_xi && winds.col(l).lpNorm<Eigen::Infinity>() > 0.0;
    const bool has_visc = base.A_nonzero[l];
    if (!has_wind && !has_visc) continue;
    s.active[l] = 1;
    if (has_wind) {
      SparseMatrix N = assemble_convection(*base.mesh, *base.dof, winds.col(l));
      s.G[l] = has_visc ? SparseMatrix(base.A[l] + N) : std::move(N);
    } else {
      s.G[l] = base.A[l];
    }
  }

  s.F1_raw = SparseMatrix(2.0 * base.mean.M + k * s.G[0]);
  auto& op = s.op;
  op.n_u = base.dof->n_u;
  op.n_p = base.dof->n_p;
  op.n_xi = base.n_xi;
  op.H = base.H;
  op.active = s.active;
  op.F1_hat = eliminate_rows_cols(s.F1_raw, base.dof->dirichlet);
  op.B_hat = base.mean.B_hat;
  op.Bt_hat = SparseMatrix(base.mean.B_hat.transpose());
  op.F_hat.resize(base.n_hat - 1);
  for (int l = 1; l < base.n_hat; ++l)
    if (s.active[l])
      op.F_hat[l - 1] =
          zero_rows_cols(SparseMatrix(k * s.G[l]), base.dof->dirichlet);
  return s;
}

// Matricized right-hand side of the stochastic Oseen problem, with the
// deterministic (mode-1) Dirichlet update eliminated symmetrically.
inline std::pair<Matrix, Matrix> sg_rhs(const SgOperators& base,
                                        const SgStepSystem& sys,
                                        const Matrix& U, const Matrix& Udot,
                                        const Vector& g_update) {
  const int n_u = base.dof->n_u, n_p = base.dof->n_p, n_xi = base.n_xi;
  Matrix Ru = base.mean.M * Udot;
  for (int l = 0; l < base.n_hat; ++l)
    if (sys.active[l]) Ru -= (sys.G[l] * U) * base.H->H[l];

  Matrix Rp = Matrix::Zero(n_p, n_xi);

  // lift of the boundary update, carried by mode 1 only
  Vector lift = Vector::Zero(n_u);
  for (int i = 0; i < n_u; ++i)
    if (base.dof->dirichlet[i]) lift(i) = g_update(i);
  for (int l = 0; l < base.n_hat; ++l) {
    if (l > 0 && !sys.active[l]) continue;
    const Vector c = (l == 0) ? Vector(sys.F1_raw * lift)
                              : Vector(sys.k * (sys.G[l] * lift));
    for (int j = 0; j < n_xi; ++j) {
      const double h = base.H->dense(l)(0, j);
      if (h != 0.0) Ru.col(j) -= h * c;
    }
  }
  Rp.col(0) -= base.mean.B * lift;
  for (int i = 0; i < n_u; ++i)
    if (base.dof->dirichlet[i]) {
      Ru.row(i).setZero();
      Ru(i, 0) = lift(i);
    }
  return {Ru, Rp};
}

// ---------------------------------------------------------------------------
// mean-based preconditioner: I (x) M_1^{-1}, applied column by column
// ---------------------------------------------------------------------------

class MeanBasedPcd final : public Preconditioner {
 public:
  MeanBasedPcd(const SgOperators& base, const PcdShared& shared,
               const SgStepSystem& sys, const PcdOptions& opt)
      : block_(base.mean, shared, sys.op.F1_hat, sys.k, sys.winds.col(0), opt),
        n_x_(sys.op.n_x()),
        n_xi_(sys.op.n_xi) {}

  Matrix apply_mat(const Matrix& R) const {
    require(R.rows() == n_x_ && R.cols() == n_xi_, "pcd_apply: bad shape");
    Matrix V(n_x_, n_xi_);
    for (int j = 0; j < n_xi_; ++j) V.col(j) = block_.apply(R.col(j));
    return V;
  }

  Vector apply(const Vector& r) const override {
    Eigen::Map<const Matrix> R(r.data(), n_x_, n_xi_);
    const Matrix V = apply_mat(R);
    return Eigen::Map<const Vector>(V.data(), V.size());
  }

  const DetPcd& block() const { return block_; }

 private:
  DetPcd block_;
  int n_x_ = 0, n_xi_ = 0;
};

inline Matrix pcd_apply(const MeanBasedPcd& pcd, const Matrix& R) {
  return pcd.apply_mat(R);
}

// fGMRES on the matricized system, zero initial iterate.
inline std::tuple<Matrix, Matrix, SolveReport> sg_oseen_solve(
    const SgOseenOperator& op, const MeanBasedPcd& pcd, const Matrix& Ru,
    const Matrix& Rp, double tol = 1e-8, int max_iter = 200, int restart = 0) {
  Matrix R(op.n_x(), op.n_xi);
  R.topRows(op.n_u) = Ru;
  R.bottomRows(op.n_p) = Rp;
  const Vector rhs = Eigen::Map<const Vector>(R.data(), R.size());
  auto [x, rep] = fgmres(op, pcd, rhs, tol, max_iter, restart);
  if (!rep.converged)
    throw SolverError("sg_oseen_solve: fGMRES did not converge (reached " +
                      std::to_string(rep.iterations) + " iterations, rel res " +
                      std::to_string(rep.relative_residual) + ")");
  Eigen::Map<const Matrix> V(x.data(), op.n_x(), op.n_xi);
  return {V.topRows(op.n_u), V.bottomRows(op.n_p), rep};
}

// ---------------------------------------------------------------------------
// mean-informed step schedule
// ---------------------------------------------------------------------------

// Divide each deterministic interval by n_xi, round the sub-step down to the
// nearest power of ten, truncate the last sub-step to land on the interval
// end. Barriers must already be landings of the deterministic history.
inline StepSchedule build_sg_schedule(const std::vector<double>& det_times,
                                      int n_xi,
                                      const std::vector<double>& barriers) {
  if (det_times.size() < 2)
    throw ConfigError("build_sg_schedule: empty deterministic history");
  require(n_xi >= 1, "build_sg_schedule: n_xi must be positive");
  for (double b : barriers) {
    if (b <= det_times.front() + 1e-300) continue;
    bool found = false;
    for (double t : det_times)
      if (std::abs(t - b) <= 1e-9 * std::max(1.0, std::abs(b))) {
        found = true;
        break;
      }
    if (!found)
      throw ConfigError("build_sg_schedule: barrier not present in the "
                        "deterministic history");
  }
  StepSchedule sched;
  sched.t_start = det_times.front();
  for (std::size_t i = 0; i + 1 < det_times.size(); ++i) {
    const double len = det_times[i + 1] - det_times[i];
    require(len > 0, "build_sg_schedule: history times must increase");
    const double e = std::floor(std::log10(len / n_xi) + 1e-12);
    sched.segments.push_back({det_times[i + 1], std::pow(10.0, e)});
  }
  return sched;
}

// ---------------------------------------------------------------------------
// the stochastic Galerkin time loop
// ---------------------------------------------------------------------------

struct SgState {
  double t = 0, t_prev = 0;
  Matrix U, Udot, P;
  Matrix U_prev, Udot_prev;
  double k_n() const { return t - t_prev; }
};

struct SgRunResult {
  std::vector<StepRecord> history;
  std::vector<double> barrier_times;
  std::vector<Matrix> snapshot_U;   // velocity coefficients, n_u x n_xi
  std::vector<Matrix> snapshot_P;
  std::vector<double> series_t;     // per accepted step
  std::vector<Vector> series_mode_norms;  // ||u_k||_2 per mode
  SgState final_state;
  double max_div_residual = 0;
  double max_rhs_norm = 0;
};

struct SgSolveOptions {
  PcdOptions pcd;
  double tol = 1e-8;
  int max_iter = 200;
  int restart = 0;
};

// Columnwise TR evolution on the prescribed schedule: per-mode extrapolated
// winds, one coupled solve per step, averaging stabilization every n_star
// accepted steps (skipped on steps that land on a segment end).
inline SgRunResult sg_run(const SgOperators& base, const BoundaryData& bd,
                          const StepSchedule& schedule,
                          const StepperConfig& cfg,
                          const SgSolveOptions& opt = {}) {
  cfg.validate();
  require(!schedule.segments.empty(), "sg_run: empty schedule");
  const DofMap& dof = *base.dof;
  const int n_xi = base.n_xi;
  PcdShared pcd_shared(base.mean, opt.pcd);

  SgRunResult out;
  SgState s;
  s.t = schedule.t_start;
  s.t_prev = s.t;
  s.U = Matrix::Zero(dof.n_u, n_xi);
  s.Udot = Matrix::Zero(dof.n_u, n_xi);
  s.P = Matrix::Zero(dof.n_p, n_xi);

  auto snapshot = [&](double t) {
    if (!detail::is_barrier(t, cfg.barriers)) return;
    out.barrier_times.push_back(t);
    out.snapshot_U.push_back(s.U);
    out.snapshot_P.push_back(s.P);
  };

  // startup: deterministic data, so only mode 1 sees the mass solve
  {
    const auto& seg = schedule.segments.front();
    const double k1 = std::min(seg.dt, seg.t_end - schedule.t_start);
    require(k1 > 0, "sg_run: degenerate first segment");
    const Vector g = (bd.values(s.t + k1) - bd.values(s.t)) / k1;
    auto [udot0, p0] = initial_acceleration(base.mean, dof, Vector(s.U.col(0)), g);
    s.Udot.col(0) = udot0;
    s.P.col(0) = p0;
  }
  s.U_prev = s.U;
  s.Udot_prev = s.Udot;
  snapshot(s.t);

  int step_index = 0;
  int accepted = 0;
  std::size_t seg_idx = 0;
  const double t_final = schedule.total_time();

  while (s.t < t_final - 1e-12 * std::max(1.0, t_final)) {
    while (seg_idx < schedule.segments.size() &&
           s.t >= schedule.segments[seg_idx].t_end -
                      1e-12 * std::max(1.0, schedule.segments[seg_idx].t_end))
      ++seg_idx;
    if (seg_idx >= schedule.segments.size()) break;
    const auto& seg = schedule.segments[seg_idx];
    const double remain = seg.t_end - s.t;
    const double k_use = std::min(seg.dt, remain);
    const bool landing =
        (k_use >= remain - 1e-12 * std::max(1.0, seg.t_end));

    // per-mode winds
    Matrix winds(dof.n_u, n_xi);
    if (step_index == 0)
      winds = s.U + k_use * s.Udot;
    else {
      const double r = k_use / s.k_n();
      winds = (1.0 + r) * s.U - r * s.U_prev;
    }

    const SgStepSystem sys = assemble_sg_operator(base, k_use, winds);
    const Vector g_update = (bd.values(s.t + k_use) - bd.values(s.t)) / k_use;
    const auto [Ru, Rp] = sg_rhs(base, sys, s.U, s.Udot, g_update);
    MeanBasedPcd pcd(base, pcd_shared, sys, opt.pcd);
    auto [D, Pnew, rep] =
        sg_oseen_solve(sys.op, pcd, Ru, Rp, opt.tol, opt.max_iter, opt.restart);

    ++accepted;
    const bool average_now =
        accepted % cfg.n_star == 0 && step_index >= 2 && !landing;
    if (average_now) {
      auto lv = average_step(s.t_prev, s.t, s.U_prev, s.U, s.Udot_prev, s.Udot,
                             Matrix(D), k_use);
      s.t_prev = lv.t_prev;
      s.U_prev = std::move(lv.u_prev);
      s.Udot_prev = std::move(lv.udot_prev);
      s.t = lv.t;
      s.U = std::move(lv.u);
      s.Udot = std::move(lv.udot);
      s.P = Pnew;
    } else {
      s.t_prev = s.t;
      s.U_prev = s.U;
      s.Udot_prev = s.Udot;
      s.t = landing ? seg.t_end : s.t + k_use;
      s.U += k_use * D;
      s.Udot = 2.0 * D - s.Udot;
      s.P = Pnew;
    }

    out.history.push_back({step_index, s.t, average_now ? 0.5 * k_use : k_use,
                           true, 0.0, rep.iterations, average_now});
    out.series_t.push_back(s.t);
    Vector norms(n_xi);
    const Matrix BU = base.mean.B * s.U;
    for (int j = 0; j < n_xi; ++j) {
      norms(j) = s.U.col(j).norm();
      out.max_div_residual = std::max(out.max_div_residual, BU.col(j).norm());
    }
    out.series_mode_norms.push_back(std::move(norms));
    out.max_rhs_norm = std::max(out.max_rhs_norm, rep.rhs_norm);
    snapshot(s.t);
    ++step_index;
  }

  out.final_state = std::move(s);
  return out;
}

}  // namespace sgflow
