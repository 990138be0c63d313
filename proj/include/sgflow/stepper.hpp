#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <tuple>
#include <vector>

#include "sgflow/oseen.hpp"
#include "sgflow/types.hpp"

namespace sgflow {

// ---------------------------------------------------------------------------
// TR-AB2 kinematics (pure vector algebra, shared by all solver variants)
// ---------------------------------------------------------------------------

// w^{n+1} = (1 + k/k_n) u^n - (k/k_n) u^{n-1}
inline Vector extrapolate_wind(const Vector& u, const Vector& u_prev,
                               double k_next, double k_n) {
  require(k_n > 0, "extrapolate_wind: previous step size must be positive");
  const double r = k_next / k_n;
  return (1.0 + r) * u - r * u_prev;
}

// u^{n+1} = u^n + k d,  du/dt^{n+1} = 2 d - du/dt^n
inline std::pair<Vector, Vector> tr_update(const Vector& u, const Vector& udot,
                                           const Vector& d, double k) {
  return {u + k * d, 2.0 * d - udot};
}

// u_*^{n+1} = u^n + (k/2) [(2 + k/k_n) du/dt^n - (k/k_n) du/dt^{n-1}]
inline Vector ab2_predict(const Vector& u, const Vector& udot,
                          const Vector& udot_prev, double k_next, double k_n) {
  require(k_n > 0, "ab2_predict: previous step size must be positive");
  const double r = k_next / k_n;
  return u + 0.5 * k_next * ((2.0 + r) * udot - r * udot_prev);
}

// e^{n+1} = (u^{n+1} - u_*^{n+1}) / (3 (1 + k_n / k_{n+1}))
inline Vector local_error_vector(const Vector& u_new, const Vector& u_star,
                                 double k_n, double k_next) {
  return (u_new - u_star) / (3.0 * (1.0 + k_n / k_next));
}

// Time-step averaging: annihilates (-1)^n components of the solution and its
// time derivative. Produces the shifted level-n data and the new level n+1
// from the saved state and the TR update of the current step.
template <class X>
struct AveragedLevels {
  double t_prev = 0, t = 0;
  X u_prev, u, udot_prev, udot;
};

template <class X>
AveragedLevels<X> average_step(double t_prev, double t, const X& u_prev,
                               const X& u, const X& udot_prev, const X& udot,
                               const X& d, double k_next) {
  AveragedLevels<X> out;
  out.t_prev = t_prev + 0.5 * (t - t_prev);
  out.u_prev = 0.5 * (u + u_prev);
  out.udot_prev = 0.5 * (udot + udot_prev);
  out.t = t + 0.5 * k_next;
  out.u = u + 0.5 * k_next * d;
  out.udot = d;
  return out;
}

// mesh-size-independent norm sqrt(e^T M e / area)
inline double mass_norm(const Vector& e, const SparseMatrix& M, double area) {
  return std::sqrt(std::max(0.0, e.dot(M * e)) / area);
}

struct StepperConfig {
  double eps = 1e-4;            // local error tolerance
  double k0 = 1e-9;             // initial step size
  double reject_factor = 0.7;   // reject when the proposed factor drops below
  int n_star = 10;              // averaging period (accepted steps)
  double T = 10.0;              // stopping time
  std::vector<double> barriers; // times every solver must land on exactly
  double zero_error_threshold = 1e-250;  // "near-zero" error estimate
  double zero_error_growth = 10.0;       // growth cap for that case
  int max_consecutive_rejections = 20;

  void validate() const {
    require(eps > 0, "stepper: eps must be positive");
    require(k0 > 0, "stepper: k0 must be positive");
    require(reject_factor > 0 && reject_factor < 1,
            "stepper: rejection threshold factor must lie in (0,1)");
    require(n_star >= 2, "stepper: averaging period must be >= 2");
    require(T > 0, "stepper: stopping time must be positive");
    double last = 0.0;
    for (double b : barriers) {
      require(b >= last - 1e-15 && b <= T + 1e-12,
              "stepper: barriers must be sorted within [0, T]");
      last = b;
    }
  }
};

// k_{n+2} = k_{n+1} (eps / ||e||)^{1/3}; reject iff k_{n+2} < 0.7 k_{n+1}.
// A (near-)zero estimate grows by the configured cap instead.
inline std::pair<double, bool> select_step(double k, double err_norm,
                                           double eps,
                                           const StepperConfig& cfg) {
  double factor;
  if (err_norm <= cfg.zero_error_threshold)
    factor = cfg.zero_error_growth;
  else
    factor = std::cbrt(eps / err_norm);
  const bool reject = factor < cfg.reject_factor;
  return {k * factor, reject};
}

struct StepRecord {
  int index = 0;
  double t = 0;
  double k = 0;
  bool accepted = true;
  double err_norm = 0;
  int gmres_iters = 0;
  bool averaged = false;
};

struct FlowState {
  double t = 0, t_prev = 0;
  Vector u, udot, p;
  Vector u_prev, udot_prev;
  double k_n() const { return t - t_prev; }
};

// Piecewise-constant step plan: within each segment, steps of size dt with
// the final sub-step truncated to land exactly on t_end.
struct StepSchedule {
  struct Segment {
    double t_end = 0;
    double dt = 0;
  };
  double t_start = 0;
  std::vector<Segment> segments;

  double total_time() const {
    return segments.empty() ? t_start : segments.back().t_end;
  }
};

// ---------------------------------------------------------------------------
// startup: solve the mass saddle-point system for the initial acceleration
// ---------------------------------------------------------------------------

// Given u^0 (discretely divergence free) and the boundary update g, find
// (du/dt^0, p^0) from
//    (du/dt^0, v) - (p^0, div v) = -(nu grad u^0, grad v) - ((u^0.grad u^0), v)
//    (q, div du/dt^0)            = 0
// with du/dt^0 = g on the Dirichlet boundary.
inline std::pair<Vector, Vector> initial_acceleration(const DetOperators& ops,
                                                      const DofMap& dof,
                                                      const Vector& u0,
                                                      const Vector& g_update) {
  SaddleSystem sys;
  sys.F = ops.M;
  sys.B = ops.B;
  const SparseMatrix N0 = assemble_convection(*ops.mesh, dof, u0);
  sys.rhs_u = -(ops.A * u0) - N0 * u0;
  sys.rhs_p = Vector::Zero(dof.n_p);
  apply_dirichlet(sys, dof.dirichlet, g_update);
  SparseLu lu(saddle_matrix(sys.F, sys.B));
  Vector sol = lu.solve((Vector(dof.n_u + dof.n_p) << sys.rhs_u, sys.rhs_p).finished());
  return {sol.head(dof.n_u), sol.tail(dof.n_p)};
}

// ---------------------------------------------------------------------------
// one Oseen solve
// ---------------------------------------------------------------------------

enum class DetSolver { direct, pcd };

struct DetSolverOptions {
  DetSolver variant = DetSolver::direct;
  PcdOptions pcd;
  double tol = 1e-8;
  int max_iter = 200;
  int restart = 0;
};

// Assembles and solves the discrete Oseen problem for the TR update d^n and
// the new pressure. `g_update` carries (g^{n+1}-g^n)/k on Dirichlet dofs.
inline std::tuple<Vector, Vector, SolveReport> oseen_step(
    const DetOperators& ops, const DofMap& dof, const PcdShared* pcd_shared,
    const Vector& u, const Vector& udot, double k, const Vector& wind,
    const Vector& g_update, const DetSolverOptions& opt) {
  const SparseMatrix N = assemble_convection(*ops.mesh, dof, wind);
  SaddleSystem sys;
  sys.F = oseen_velocity_matrix(ops, k, N);
  sys.B = ops.B;
  sys.rhs_u = ops.M * udot - ops.A * u - N * u;
  sys.rhs_p = Vector::Zero(dof.n_p);
  apply_dirichlet(sys, dof.dirichlet, g_update);

  Vector rhs(dof.n_u + dof.n_p);
  rhs << sys.rhs_u, sys.rhs_p;

  Vector sol;
  SolveReport rep;
  if (opt.variant == DetSolver::direct) {
    SparseLu lu(saddle_matrix(sys.F, sys.B));
    sol = lu.solve(rhs);
    rep.converged = true;
    rep.rhs_norm = rhs.norm();
  } else {
    MatrixOperator op(saddle_matrix(sys.F, sys.B));
    DetPcd pcd(ops, *pcd_shared, sys.F, k, wind, opt.pcd);
    auto [x, r] = fgmres(op, pcd, rhs, opt.tol, opt.max_iter, opt.restart);
    if (!r.converged)
      throw SolverError("oseen_step: fGMRES did not converge in " +
                        std::to_string(r.iterations) + " iterations");
    sol = std::move(x);
    rep = r;
  }
  return {sol.head(dof.n_u), sol.tail(dof.n_p), rep};
}

// ---------------------------------------------------------------------------
// time loop
// ---------------------------------------------------------------------------

struct DetRunResult {
  std::vector<StepRecord> history;
  std::vector<double> accepted_times;             // 0, t_1, ..., T
  std::vector<std::pair<double, int>> barrier_hits;  // (barrier, snapshot idx)
  std::vector<Vector> snapshot_u, snapshot_p;
  FlowState final_state;
  double max_div_residual = 0;   // max ||B u|| over accepted steps
  double max_rhs_norm = 0;
};

namespace detail {

inline std::vector<double> landing_times(const StepperConfig& cfg) {
  std::vector<double> v;
  for (double b : cfg.barriers)
    if (b > 1e-300 && b <= cfg.T + 1e-12) v.push_back(std::min(b, cfg.T));
  v.push_back(cfg.T);
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end(),
                      [](double a, double b) {
                        return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b));
                      }),
          v.end());
  return v;
}

inline bool is_barrier(double t, const std::vector<double>& barriers) {
  for (double b : barriers)
    if (std::abs(t - b) <= 1e-9 * std::max(1.0, std::abs(b))) return true;
  return false;
}

}  // namespace detail

// Deterministic TR-AB2 run on prebuilt operators. With `schedule == nullptr`
// the adaptive controller of the configuration drives the step size (startup
// with k_1 = k_0, control switched on at the third step); otherwise the
// prescribed schedule is followed and error control is off.
inline DetRunResult run_deterministic_ops(const DetOperators& ops,
                                          const BoundaryData& bd,
                                          const StepperConfig& cfg,
                                          const DetSolverOptions& solver_opt = {},
                                          const StepSchedule* schedule = nullptr) {
  cfg.validate();
  const DofMap& dof = *ops.dof;
  PcdShared pcd_shared;
  if (solver_opt.variant == DetSolver::pcd)
    pcd_shared = PcdShared(ops, solver_opt.pcd);

  DetRunResult out;
  const std::vector<double> landings = detail::landing_times(cfg);
  std::size_t landing_idx = 0;

  FlowState s;
  s.t = 0;
  s.t_prev = 0;
  s.u = Vector::Zero(dof.n_u);
  s.p = Vector::Zero(dof.n_p);

  auto snapshot = [&](double t) {
    if (!detail::is_barrier(t, cfg.barriers)) return;
    out.barrier_hits.emplace_back(t, static_cast<int>(out.snapshot_u.size()));
    out.snapshot_u.push_back(s.u);
    out.snapshot_p.push_back(s.p);
  };

  out.accepted_times.push_back(0.0);
  snapshot(0.0);

  // startup: first step size fixes the boundary-update scale
  std::size_t seg_idx = 0;
  auto first_k = [&]() {
    if (!schedule) return std::min(cfg.k0, landings.front());
    const auto& seg = schedule->segments.front();
    return std::min(seg.dt, seg.t_end - schedule->t_start);
  };
  {
    const double k1 = first_k();
    require(k1 > 0, "run_deterministic: empty time range");
    const Vector g =
        (bd.values(k1) - bd.values(0.0)) / k1;
    auto [udot0, p0] = initial_acceleration(ops, dof, s.u, g);
    s.udot = std::move(udot0);
    s.p = std::move(p0);
  }
  s.u_prev = s.u;
  s.udot_prev = s.udot;

  double controller_k = cfg.k0;
  int step_index = 0;  // counts accepted steps
  int accepted = 0;
  int consecutive_rejections = 0;
  const double t_final = schedule ? schedule->total_time() : cfg.T;

  while (s.t < t_final - 1e-12 * std::max(1.0, t_final)) {
    // --- propose a step size
    double k_use = 0;
    bool truncated = false;
    bool landing = false;
    double land_t = 0;
    if (schedule) {
      while (seg_idx < schedule->segments.size() &&
             s.t >= schedule->segments[seg_idx].t_end -
                        1e-12 * std::max(1.0, schedule->segments[seg_idx].t_end))
        ++seg_idx;
      if (seg_idx >= schedule->segments.size()) break;
      const auto& seg = schedule->segments[seg_idx];
      const double remain = seg.t_end - s.t;
      k_use = std::min(seg.dt, remain);
      landing = (k_use >= remain - 1e-12 * std::max(1.0, seg.t_end));
      land_t = seg.t_end;
    } else {
      while (landing_idx < landings.size() &&
             s.t >= landings[landing_idx] -
                        1e-12 * std::max(1.0, landings[landing_idx]))
        ++landing_idx;
      if (landing_idx >= landings.size()) break;
      const double next_land = landings[landing_idx];
      k_use = (step_index < 2) ? std::min(cfg.k0, next_land - s.t) : controller_k;
      if (s.t + k_use >= next_land - 1e-12 * std::max(1.0, next_land)) {
        k_use = next_land - s.t;
        truncated = (controller_k > k_use);
        landing = true;
        land_t = next_land;
      }
    }

    // --- wind and Oseen solve
    const Vector wind = (step_index == 0)
                            ? Vector(s.u + k_use * s.udot)
                            : extrapolate_wind(s.u, s.u_prev, k_use, s.k_n());
    const Vector g_update =
        (bd.values(s.t + k_use) - bd.values(s.t)) / k_use;
    auto [d, p_new, rep] =
        oseen_step(ops, dof, &pcd_shared, s.u, s.udot, k_use, wind, g_update,
                   solver_opt);

    auto [u_new, udot_new] = tr_update(s.u, s.udot, d, k_use);

    // --- error estimate and acceptance
    double err = 0;
    bool have_estimate = false;
    if (!schedule && step_index >= 1) {
      const Vector u_star =
          ab2_predict(s.u, s.udot, s.udot_prev, k_use, s.k_n());
      err = mass_norm(local_error_vector(u_new, u_star, s.k_n(), k_use),
                      ops.M, ops.area);
      have_estimate = true;
    }
    if (have_estimate && step_index >= 2) {
      auto [k_next, reject] = select_step(k_use, err, cfg.eps, cfg);
      if (reject) {
        out.history.push_back({step_index, s.t + k_use, k_use, false, err,
                               rep.iterations, false});
        controller_k = k_next;
        if (++consecutive_rejections > cfg.max_consecutive_rejections)
          throw SolverError("run_deterministic: step " +
                            std::to_string(step_index) +
                            " rejected too many times");
        continue;
      }
      if (!truncated && !landing) controller_k = k_next;
    } else if (have_estimate) {
      // end of the second step: switch the controller on for step three
      auto [k_next, reject] = select_step(k_use, err, cfg.eps, cfg);
      (void)reject;
      if (!truncated && !landing) controller_k = k_next;
    }
    consecutive_rejections = 0;
    ++accepted;

    // --- averaging stabilization or plain level shift
    const bool average_now = accepted % cfg.n_star == 0 && step_index >= 2 &&
                             !landing;
    if (average_now) {
      auto lv = average_step(s.t_prev, s.t, s.u_prev, s.u, s.udot_prev, s.udot,
                             d, k_use);
      s.t_prev = lv.t_prev;
      s.u_prev = std::move(lv.u_prev);
      s.udot_prev = std::move(lv.udot_prev);
      s.t = lv.t;
      s.u = std::move(lv.u);
      s.udot = std::move(lv.udot);
      s.p = p_new;
    } else {
      s.t_prev = s.t;
      s.u_prev = s.u;
      s.udot_prev = s.udot;
      s.t = landing ? land_t : s.t + k_use;
      s.u = u_new;
      s.udot = udot_new;
      s.p = p_new;
    }

    out.history.push_back({step_index, s.t, average_now ? 0.5 * k_use : k_use,
                           true, err, rep.iterations, average_now});
    out.accepted_times.push_back(s.t);
    out.max_div_residual = std::max(out.max_div_residual, (ops.B * s.u).norm());
    out.max_rhs_norm = std::max(out.max_rhs_norm, rep.rhs_norm);
    snapshot(s.t);
    ++step_index;
  }

  out.final_state = std::move(s);
  return out;
}

inline DetRunResult run_deterministic(const Mesh& mesh, const DofMap& dof,
                                      const BoundaryData& bd,
                                      const Vector& nu_field,
                                      const StepperConfig& cfg,
                                      const DetSolverOptions& solver_opt = {},
                                      const StepSchedule* schedule = nullptr) {
  const DetOperators ops = build_det_operators(mesh, dof, nu_field);
  return run_deterministic_ops(ops, bd, cfg, solver_opt, schedule);
}

}  // namespace sgflow
