// Command-line driver: deterministic, stochastic Galerkin, Monte Carlo and
// stochastic collocation runs plus cross-method reporting.

#include <CLI11.hpp>

#include <cstdio>
#include <string>

#include "sgflow/sgflow.hpp"

namespace {

sgflow::RunConfig load_config(const std::string& config_path, long long seed,
                              int threads) {
  sgflow::RunConfig cfg =
      config_path.empty() ? sgflow::RunConfig{} : sgflow::parse_config(config_path);
  if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
  if (threads > 0) cfg.threads = threads;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Navier-Stokes solver suite with stochastic viscosity"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  long long seed = -1;
  int threads = 0;

  auto add_common = [&](CLI::App* cmd, bool needs_out = true) {
    cmd->add_option("--config", config_path, "JSON configuration file");
    auto* o = cmd->add_option("--out", out_dir, "output directory");
    if (needs_out) o->required();
    cmd->add_option("--seed", seed, "override RNG seed");
    cmd->add_option("--threads", threads, "worker threads for ensembles");
  };

  auto* det = app.add_subcommand("run-det", "deterministic mean-viscosity run");
  add_common(det);
  auto* sg = app.add_subcommand("run-sg", "stochastic Galerkin run");
  add_common(sg);
  auto* mc = app.add_subcommand("run-mc", "Monte Carlo ensemble");
  add_common(mc);
  auto* sc = app.add_subcommand("run-sc", "sparse-grid collocation ensemble");
  add_common(sc);

  auto* rep = app.add_subcommand("report", "cross-method comparison report");
  std::string sg_dir, sc_dir, mc_dir;
  add_common(rep);
  rep->add_option("--sg", sg_dir, "directory of a run-sg output")->required();
  rep->add_option("--sc", sc_dir, "directory of a run-sc output")->required();
  rep->add_option("--mc", mc_dir, "directory of a run-mc output")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const sgflow::RunConfig cfg = load_config(config_path, seed, threads);
    const sgflow::Problem problem = sgflow::build_problem(cfg);
    if (det->parsed()) {
      const auto res = sgflow::run_det_mode(problem, out_dir);
      std::printf("run-det: %zu accepted steps, final t = %g\n",
                  res.accepted_times.size() - 1, res.final_state.t);
    } else if (sg->parsed()) {
      const auto res = sgflow::run_sg_mode(problem, out_dir);
      std::printf("run-sg: %zu SG steps on %zu segments, final t = %g\n",
                  res.sg.history.size(), res.schedule.segments.size(),
                  res.sg.final_state.t);
    } else if (mc->parsed()) {
      const auto res = sgflow::run_sampling_mode(problem, false, out_dir);
      std::printf("run-mc: %d samples\n", res.samples.size());
    } else if (sc->parsed()) {
      const auto res = sgflow::run_sampling_mode(problem, true, out_dir);
      std::printf("run-sc: %d collocation points\n", res.samples.size());
    } else if (rep->parsed()) {
      sgflow::run_report_mode(problem, sg_dir, sc_dir, mc_dir, out_dir);
      std::printf("report written to %s\n", out_dir.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
