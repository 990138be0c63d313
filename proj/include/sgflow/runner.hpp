#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include "sgflow/config.hpp"
#include "sgflow/io.hpp"
#include "sgflow/postprocess.hpp"
#include "sgflow/sampling.hpp"
#include "sgflow/sg.hpp"

namespace sgflow {

// Everything derived from a RunConfig that the run modes share.
struct Problem {
  RunConfig cfg;
  Mesh mesh;
  DofMap dof;
  BoundaryData bd;
  GpcBasis basis_small, basis_large;
  TripleProductTensor H;
  GaussianFieldKL kl;
  LognormalViscosity visc;
};

inline Problem build_problem(const RunConfig& cfg) {
  Problem p;
  p.cfg = cfg;
  p.mesh = generate_obstacle_mesh(cfg.channel_length, cfg.channel_halfheight,
                                  cfg.obstacle_rect(), cfg.refinement);
  p.dof = build_dofmap(p.mesh);
  p.bd = make_poiseuille_ramp(p.mesh, p.dof, cfg.ramp_rate, cfg.u_max);
  p.basis_small = make_gpc_basis(cfg.m_xi, cfg.p_xi);
  p.basis_large = make_gpc_basis(cfg.m_xi, 2 * cfg.p_xi);
  p.H = triple_products(p.basis_large, p.basis_small);
  p.kl = build_calibrated_field(p.mesh, cfg.nu1, cfg.cov, cfg.Lx, cfg.Ly,
                                cfg.m_xi);
  p.visc = lognormal_coeffs(p.kl, p.basis_large);
  return p;
}

namespace detail {

inline void ensure_dir(const std::string& dir) {
  std::filesystem::create_directories(dir);
}

inline std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

inline void write_history_csv(const std::vector<StepRecord>& hist,
                              const std::string& path) {
  CsvTable t;
  t.header = {"step", "t", "k", "accepted", "err_norm", "gmres_iters",
              "averaged"};
  for (const auto& r : hist)
    t.rows.push_back({static_cast<double>(r.index), r.t, r.k,
                      r.accepted ? 1.0 : 0.0, r.err_norm,
                      static_cast<double>(r.gmres_iters),
                      r.averaged ? 1.0 : 0.0});
  write_csv(path, t);
}

// probe velocities of a coefficient block, one row per (probe, comp, mode)
inline void append_probe_coeffs(const Problem& p, double t, const Matrix& U,
                                CsvTable& table) {
  for (std::size_t pi = 0; pi < p.cfg.probes.size(); ++pi)
    for (int k = 0; k < U.cols(); ++k) {
      const Eigen::Vector2d v = eval_velocity(
          p.mesh, p.dof, U.col(k), p.cfg.probes[pi][0], p.cfg.probes[pi][1]);
      table.rows.push_back(
          {t, static_cast<double>(pi), 0.0, static_cast<double>(k), v(0)});
      table.rows.push_back(
          {t, static_cast<double>(pi), 1.0, static_cast<double>(k), v(1)});
    }
}

inline void write_velocity_snapshot(const Problem& p, const Vector& u,
                                    const std::string& path) {
  CsvTable t;
  t.header = {"x", "y", "ux", "uy"};
  for (int i = 0; i < p.dof.n_q2; ++i)
    t.rows.push_back({p.mesh.q2x[i], p.mesh.q2y[i], u(i), u(p.dof.n_q2 + i)});
  write_csv(path, t);
}

inline std::vector<double> vertex_restrict(const Problem& p, const Vector& q2_field) {
  std::vector<double> v(p.mesh.n_vertices());
  for (int i = 0; i < p.mesh.n_vertices(); ++i) v[i] = q2_field(i);
  return v;
}

inline json base_summary(const Problem& p, const std::string& mode,
                         double wall_s) {
  json s;
  s["mode"] = mode;
  s["n_u"] = p.dof.n_u;
  s["n_p"] = p.dof.n_p;
  s["n_xi"] = p.basis_small.size();
  s["n_nu"] = p.basis_large.size();
  s["area"] = p.mesh.area;
  s["seed"] = p.cfg.seed;
  s["wall_clock_s"] = wall_s;
  return s;
}

struct WallClock {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// run modes
// ---------------------------------------------------------------------------

inline DetRunResult run_det_mode(const Problem& p, const std::string& out_dir) {
  detail::ensure_dir(out_dir);
  detail::WallClock clock;
  echo_config(p.cfg, detail::join(out_dir, "config.json"));
  write_mesh_text(p.mesh, detail::join(out_dir, "mesh.txt"));
  write_mesh_vtk(p.mesh, detail::join(out_dir, "mesh.vtk"));

  const DetRunResult res =
      run_deterministic(p.mesh, p.dof, p.bd, p.visc.mean_field(),
                        p.cfg.stepper_config(), p.cfg.det_solver_options());

  detail::write_history_csv(res.history, detail::join(out_dir, "history.csv"));
  write_gnuplot_timestep(detail::join(out_dir, "plot_timestep.gp"),
                         "history.csv");
  CsvTable probes;
  probes.header = {"t", "probe", "comp", "mode", "value"};
  for (std::size_t bi = 0; bi < res.barrier_hits.size(); ++bi) {
    const auto& [t, si] = res.barrier_hits[bi];
    char name[64];
    std::snprintf(name, sizeof name, "snapshot_%02zu_velocity.csv", bi);
    detail::write_velocity_snapshot(p, res.snapshot_u[si],
                                    detail::join(out_dir, name));
    std::snprintf(name, sizeof name, "snapshot_%02zu_pressure.csv", bi);
    export_field_csv(res.snapshot_p[si], p.mesh.vx, p.mesh.vy,
                     detail::join(out_dir, name));
    detail::append_probe_coeffs(p, t, res.snapshot_u[si], probes);
    std::snprintf(name, sizeof name, "snapshot_%02zu.vtk", bi);
    write_mesh_vtk(p.mesh, detail::join(out_dir, name),
                   {{"ux", detail::vertex_restrict(p, res.snapshot_u[si])},
                    {"uy", detail::vertex_restrict(
                               p, res.snapshot_u[si].tail(p.dof.n_q2))}});
  }
  write_csv(detail::join(out_dir, "probes_det.csv"), probes);

  json summary = detail::base_summary(p, "det", clock.seconds());
  summary["final_t"] = res.final_state.t;
  summary["accepted_steps"] = res.accepted_times.size() - 1;
  summary["max_div_residual"] = res.max_div_residual;
  summary["barriers_hit"] = res.barrier_hits.size();
  std::ofstream(detail::join(out_dir, "summary.json")) << summary.dump(2) << "\n";
  return res;
}

struct SgModeResult {
  DetRunResult det;
  StepSchedule schedule;
  SgRunResult sg;
};

inline SgModeResult run_sg_mode(const Problem& p, const std::string& out_dir) {
  detail::ensure_dir(out_dir);
  detail::WallClock clock;
  echo_config(p.cfg, detail::join(out_dir, "config.json"));

  SgModeResult out;
  // mean-viscosity deterministic run drives the schedule
  out.det = run_deterministic(p.mesh, p.dof, p.bd, p.visc.mean_field(),
                              p.cfg.stepper_config(),
                              p.cfg.det_solver_options());
  out.schedule = build_sg_schedule(out.det.accepted_times,
                                   p.basis_small.size(), p.cfg.barriers);
  {
    CsvTable t;
    t.header = {"segment_end", "dt"};
    for (const auto& s : out.schedule.segments)
      t.rows.push_back({s.t_end, s.dt});
    write_csv(detail::join(out_dir, "schedule.csv"), t);
  }

  const SgOperators ops =
      build_sg_operators(p.mesh, p.dof, p.visc, p.H, p.basis_small.size());
  SgSolveOptions sopt;
  sopt.pcd = p.cfg.pcd_options();
  sopt.tol = p.cfg.tol;
  sopt.max_iter = p.cfg.max_iter;
  sopt.restart = p.cfg.restart;
  out.sg = sg_run(ops, p.bd, out.schedule, p.cfg.stepper_config(), sopt);

  detail::write_history_csv(out.sg.history, detail::join(out_dir, "history.csv"));
  const NormSeries ns = coefficient_norm_series(out.sg);
  {
    CsvTable t;
    t.header = {"t"};
    for (int k = 0; k < p.basis_small.size(); ++k)
      t.header.push_back("mode_" + std::to_string(k + 1));
    for (std::size_t i = 0; i < ns.t.size(); ++i) {
      std::vector<double> row{ns.t[i]};
      for (int k = 0; k < ns.norms[i].size(); ++k) row.push_back(ns.norms[i](k));
      t.rows.push_back(std::move(row));
    }
    write_csv(detail::join(out_dir, "coeff_norms.csv"), t);
    write_gnuplot_coeff_norms(detail::join(out_dir, "plot_coeff_norms.gp"),
                              "coeff_norms.csv", p.basis_small.size());
  }

  CsvTable probes;
  probes.header = {"t", "probe", "comp", "mode", "value"};
  for (std::size_t bi = 0; bi < out.sg.barrier_times.size(); ++bi) {
    const double t = out.sg.barrier_times[bi];
    detail::append_probe_coeffs(p, t, out.sg.snapshot_U[bi], probes);
    char name[64];
    std::snprintf(name, sizeof name, "coeff_%02zu_velocity.csv", bi);
    {
      CsvTable ct;
      ct.header = {"x", "y"};
      for (int k = 0; k < out.sg.snapshot_U[bi].cols(); ++k) {
        ct.header.push_back("ux_" + std::to_string(k + 1));
        ct.header.push_back("uy_" + std::to_string(k + 1));
      }
      for (int i = 0; i < p.dof.n_q2; ++i) {
        std::vector<double> row{p.mesh.q2x[i], p.mesh.q2y[i]};
        for (int k = 0; k < out.sg.snapshot_U[bi].cols(); ++k) {
          row.push_back(out.sg.snapshot_U[bi](i, k));
          row.push_back(out.sg.snapshot_U[bi](p.dof.n_q2 + i, k));
        }
        ct.rows.push_back(std::move(row));
      }
      write_csv(detail::join(out_dir, name), ct);
    }
    // mean and variance fields
    const MomentFields mom = coeff_moments(out.sg.snapshot_U[bi]);
    std::snprintf(name, sizeof name, "mean_%02zu_velocity.csv", bi);
    detail::write_velocity_snapshot(p, mom.mean, detail::join(out_dir, name));
    std::snprintf(name, sizeof name, "variance_%02zu_velocity.csv", bi);
    detail::write_velocity_snapshot(p, mom.variance, detail::join(out_dir, name));
    std::snprintf(name, sizeof name, "moments_%02zu.vtk", bi);
    write_mesh_vtk(
        p.mesh, detail::join(out_dir, name),
        {{"mean_ux", detail::vertex_restrict(p, mom.mean)},
         {"var_ux", detail::vertex_restrict(p, mom.variance)},
         {"mean_uy", detail::vertex_restrict(p, mom.mean.tail(p.dof.n_q2))},
         {"var_uy", detail::vertex_restrict(p, mom.variance.tail(p.dof.n_q2))}});
  }
  write_csv(detail::join(out_dir, "probes_sg.csv"), probes);
  {
    CsvTable bt;
    bt.header = {"t"};
    for (double t : out.sg.barrier_times) bt.rows.push_back({t});
    write_csv(detail::join(out_dir, "barriers.csv"), bt);
  }

  json summary = detail::base_summary(p, "sg", clock.seconds());
  summary["final_t"] = out.sg.final_state.t;
  summary["sg_steps"] = out.sg.history.size();
  summary["det_steps"] = out.det.accepted_times.size() - 1;
  summary["max_div_residual"] = out.sg.max_div_residual;
  summary["max_rhs_norm"] = out.sg.max_rhs_norm;
  int imax = 0;
  long itotal = 0;
  for (const auto& r : out.sg.history) {
    imax = std::max(imax, r.gmres_iters);
    itotal += r.gmres_iters;
  }
  summary["gmres_max"] = imax;
  summary["gmres_total"] = itotal;
  std::ofstream(detail::join(out_dir, "summary.json")) << summary.dump(2) << "\n";
  return out;
}

struct SamplingModeResult {
  SampleSet samples;
  EnsembleResult ensemble;
  ProjectedCoeffs coeffs;  // sc only
};

inline SamplingModeResult run_sampling_mode(const Problem& p, bool collocation,
                                            const std::string& out_dir) {
  detail::ensure_dir(out_dir);
  detail::WallClock clock;
  echo_config(p.cfg, detail::join(out_dir, "config.json"));

  SamplingModeResult out;
  out.samples = collocation
                    ? build_sparse_grid(p.cfg.m_xi, p.cfg.effective_sc_level())
                    : draw_mc(p.cfg.n_mc, p.cfg.m_xi, p.cfg.seed);
  {
    CsvTable t;
    t.header = {"q", "weight"};
    for (int j = 0; j < p.cfg.m_xi; ++j)
      t.header.push_back("xi_" + std::to_string(j + 1));
    for (int q = 0; q < out.samples.size(); ++q) {
      std::vector<double> row{static_cast<double>(q), out.samples.weights(q)};
      for (int j = 0; j < p.cfg.m_xi; ++j)
        row.push_back(out.samples.points(q, j));
      t.rows.push_back(std::move(row));
    }
    write_csv(detail::join(out_dir, "samples.csv"), t);
  }

  out.ensemble = run_ensemble(out.samples, p.mesh, p.dof, p.bd, p.visc,
                              p.basis_large, p.cfg.stepper_config(),
                              p.cfg.det_solver_options(), p.cfg.threads);

  int failed = 0;
  for (const auto& r : out.ensemble.runs)
    if (!r.ok) ++failed;

  CsvTable probes;
  json summary = detail::base_summary(p, collocation ? "sc" : "mc",
                                      clock.seconds());
  if (collocation) {
    out.coeffs = project_pseudospectral(out.ensemble, out.samples, p.basis_small);
    probes.header = {"t", "probe", "comp", "mode", "value"};
    for (std::size_t bi = 0; bi < out.coeffs.barrier_times.size(); ++bi)
      detail::append_probe_coeffs(p, out.coeffs.barrier_times[bi],
                                  out.coeffs.u[bi], probes);
    write_csv(detail::join(out_dir, "probes_sc.csv"), probes);
    for (std::size_t bi = 0; bi < out.coeffs.barrier_times.size(); ++bi) {
      const MomentFields mom = coeff_moments(out.coeffs.u[bi]);
      char name[64];
      std::snprintf(name, sizeof name, "mean_%02zu_velocity.csv", bi);
      detail::write_velocity_snapshot(p, mom.mean, detail::join(out_dir, name));
      std::snprintf(name, sizeof name, "variance_%02zu_velocity.csv", bi);
      detail::write_velocity_snapshot(p, mom.variance,
                                      detail::join(out_dir, name));
    }
  } else {
    probes.header = {"t", "probe", "comp", "sample", "value"};
    for (int q = 0; q < out.samples.size(); ++q) {
      const auto& r = out.ensemble.runs[q];
      if (!r.ok) continue;
      for (std::size_t bi = 0; bi < r.barrier_times.size(); ++bi)
        for (std::size_t pi = 0; pi < p.cfg.probes.size(); ++pi) {
          const Eigen::Vector2d v =
              eval_velocity(p.mesh, p.dof, r.u[bi], p.cfg.probes[pi][0],
                            p.cfg.probes[pi][1]);
          probes.rows.push_back({r.barrier_times[bi], static_cast<double>(pi),
                                 0.0, static_cast<double>(q), v(0)});
          probes.rows.push_back({r.barrier_times[bi], static_cast<double>(pi),
                                 1.0, static_cast<double>(q), v(1)});
        }
    }
    write_csv(detail::join(out_dir, "probes_mc.csv"), probes);
    // ensemble moments at barriers over successful runs
    const auto& bts = out.ensemble.barrier_times;
    for (std::size_t bi = 0; bi < bts.size(); ++bi) {
      std::vector<Vector> fields;
      for (const auto& r : out.ensemble.runs)
        if (r.ok && bi < r.u.size()) fields.push_back(r.u[bi]);
      if (fields.empty()) continue;
      const MomentFields mom = mc_moments(fields);
      char name[64];
      std::snprintf(name, sizeof name, "mean_%02zu_velocity.csv", bi);
      detail::write_velocity_snapshot(p, mom.mean, detail::join(out_dir, name));
      std::snprintf(name, sizeof name, "variance_%02zu_velocity.csv", bi);
      detail::write_velocity_snapshot(p, mom.variance,
                                      detail::join(out_dir, name));
    }
  }

  summary["n_samples"] = out.samples.size();
  summary["failed_samples"] = failed;
  std::ofstream(detail::join(out_dir, "summary.json")) << summary.dump(2) << "\n";
  return out;
}

// ---------------------------------------------------------------------------
// report mode: comparison tables and pdf estimates from exported probe CSVs
// ---------------------------------------------------------------------------

namespace detail {

inline CoeffProbeSet load_coeff_probes(const std::string& csv_path) {
  const CsvTable t = read_csv(csv_path);
  const int ct = t.col("t"), cp = t.col("probe"), cc = t.col("comp"),
            cm = t.col("mode"), cv = t.col("value");
  CoeffProbeSet out;
  int n_probes = 0, n_modes = 0;
  for (const auto& r : t.rows) {
    n_probes = std::max(n_probes, static_cast<int>(r[cp]) + 1);
    n_modes = std::max(n_modes, static_cast<int>(r[cm]) + 1);
    bool found = false;
    for (double b : out.barriers)
      if (std::abs(b - r[ct]) <= 1e-9 * std::max(1.0, std::abs(b))) found = true;
    if (!found) out.barriers.push_back(r[ct]);
  }
  out.coeffs.assign(out.barriers.size(),
                    std::vector<Matrix>(n_probes, Matrix::Zero(2, n_modes)));
  for (const auto& r : t.rows) {
    int bi = 0;
    for (std::size_t i = 0; i < out.barriers.size(); ++i)
      if (std::abs(out.barriers[i] - r[ct]) <=
          1e-9 * std::max(1.0, std::abs(out.barriers[i])))
        bi = static_cast<int>(i);
    out.coeffs[bi][static_cast<int>(r[cp])](static_cast<int>(r[cc]),
                                            static_cast<int>(r[cm])) = r[cv];
  }
  return out;
}

inline SampleProbeSet load_sample_probes(const std::string& csv_path) {
  const CsvTable t = read_csv(csv_path);
  const int ct = t.col("t"), cp = t.col("probe"), cc = t.col("comp"),
            cq = t.col("sample"), cv = t.col("value");
  SampleProbeSet out;
  int n_probes = 0, n_samples = 0;
  for (const auto& r : t.rows) {
    n_probes = std::max(n_probes, static_cast<int>(r[cp]) + 1);
    n_samples = std::max(n_samples, static_cast<int>(r[cq]) + 1);
    bool found = false;
    for (double b : out.barriers)
      if (std::abs(b - r[ct]) <= 1e-9 * std::max(1.0, std::abs(b))) found = true;
    if (!found) out.barriers.push_back(r[ct]);
  }
  out.values.assign(out.barriers.size(),
                    std::vector<Matrix>(n_probes, Matrix::Zero(2, n_samples)));
  for (const auto& r : t.rows) {
    int bi = 0;
    for (std::size_t i = 0; i < out.barriers.size(); ++i)
      if (std::abs(out.barriers[i] - r[ct]) <=
          1e-9 * std::max(1.0, std::abs(out.barriers[i])))
        bi = static_cast<int>(i);
    out.values[bi][static_cast<int>(r[cp])](static_cast<int>(r[cc]),
                                            static_cast<int>(r[cq])) = r[cv];
  }
  return out;
}

}  // namespace detail

inline void run_report_mode(const Problem& p, const std::string& sg_dir,
                            const std::string& sc_dir,
                            const std::string& mc_dir,
                            const std::string& out_dir) {
  detail::ensure_dir(out_dir);
  const CoeffProbeSet sg =
      detail::load_coeff_probes(detail::join(sg_dir, "probes_sg.csv"));
  const CoeffProbeSet sc =
      detail::load_coeff_probes(detail::join(sc_dir, "probes_sc.csv"));
  const SampleProbeSet mc =
      detail::load_sample_probes(detail::join(mc_dir, "probes_mc.csv"));

  const std::vector<CompareRow> rows = compare_report(sg, sc, mc);
  CsvTable t;
  t.header = {"t",       "probe",     "comp",     "sg_mean",  "sc_mean",
              "mc_mean", "mc_se",     "sg_var",   "sc_var",   "mc_var",
              "mean_abs_diff", "mean_rel_diff", "var_abs_diff", "var_rel_diff"};
  for (const auto& r : rows)
    t.rows.push_back({r.t, static_cast<double>(r.probe),
                      static_cast<double>(r.comp), r.sg_mean, r.sc_mean,
                      r.mc_mean, r.mc_se, r.sg_var, r.sc_var, r.mc_var,
                      r.mean_abs_diff, r.mean_rel_diff, r.var_abs_diff,
                      r.var_rel_diff});
  write_csv(detail::join(out_dir, "compare.csv"), t);

  // pdf estimates at each (barrier, probe, component) for all three sources
  std::vector<std::string> pdf_files;
  for (std::size_t bi = 0; bi < sg.barriers.size(); ++bi) {
    const double tb = sg.barriers[bi];
    int bs = 0, bm = 0;
    for (std::size_t i = 0; i < sc.barriers.size(); ++i)
      if (std::abs(sc.barriers[i] - tb) <= 1e-9 * std::max(1.0, tb)) bs = static_cast<int>(i);
    for (std::size_t i = 0; i < mc.barriers.size(); ++i)
      if (std::abs(mc.barriers[i] - tb) <= 1e-9 * std::max(1.0, tb)) bm = static_cast<int>(i);
    for (std::size_t pi = 0; pi < sg.coeffs[bi].size(); ++pi)
      for (int comp = 0; comp < 2; ++comp) {
        struct Src {
          const char* name;
          std::vector<double> vals;
        };
        std::vector<Src> sources;
        sources.push_back(
            {"sg", sample_surrogate(sg.coeffs[bi][pi].row(comp).transpose(),
                                    p.basis_small, 10000, p.cfg.seed + 7919)});
        sources.push_back(
            {"sc", sample_surrogate(sc.coeffs[bs][pi].row(comp).transpose(),
                                    p.basis_small, 10000, p.cfg.seed + 7919)});
        {
          const auto row = mc.values[bm][pi].row(comp);
          std::vector<double> vals(row.data(), row.data() + row.size());
          sources.push_back({"mc", std::move(vals)});
        }
        for (auto& src : sources) {
          const PdfEstimate est = probe_pdf(src.vals, src.name, tb);
          CsvTable pt;
          pt.header = {"value", "density"};
          for (std::size_t i = 0; i < est.grid.size(); ++i)
            pt.rows.push_back({est.grid[i], est.density[i]});
          char name[96];
          std::snprintf(name, sizeof name, "pdf_t%g_p%zu_c%d_%s.csv", tb, pi,
                        comp, src.name);
          write_csv(detail::join(out_dir, name), pt);
          pdf_files.push_back(name);
        }
      }
  }
  write_gnuplot_pdf(detail::join(out_dir, "plot_pdf.gp"), pdf_files);
}

}  // namespace sgflow
