#pragma once

#include <array>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgflow/oseen.hpp"
#include "sgflow/stepper.hpp"
#include "sgflow/types.hpp"

namespace sgflow {

using json = nlohmann::json;

struct RunConfig {
  // mesh
  double channel_length = 12.0;
  double channel_halfheight = 1.0;
  std::array<double, 4> obstacle = {1.75, 2.25, -0.25, 0.25};
  int refinement = 2;

  // random viscosity
  double nu1 = 0.02;
  double cov = 0.10;
  double Lx = 3.0;
  double Ly = 0.5;
  int m_xi = 2;
  int p_xi = 3;

  // stepper
  double eps = 1e-4;
  double k0 = 1e-9;
  int n_star = 10;
  double T = 10.0;
  std::vector<double> barriers = {0, 0.1, 0.2, 0.5, 1, 2, 5, 6, 8, 10};
  double ramp_rate = 5.0;
  double u_max = 1.0;

  // probes
  std::vector<std::array<double, 2>> probes = {
      {4.0100, -0.4339}, {4.0100, 0.4339}, {3.6436, 0.0}};

  // solvers
  std::string sg_precond = "exact-lu";  // or "iterated"
  std::string det_solver = "direct";    // or "pcd"
  std::string inner_solver = "lu";      // iterated-variant slot: "lu" | "ssor"
  double tol = 1e-8;
  int max_iter = 200;
  int restart = 0;
  int ssor_sweeps = 8;
  int chebyshev_iterations = 10;

  // sampling
  int n_mc = 200;
  int sc_level = 0;  // 0: smallest level exact for degree 2 p_xi
  std::uint64_t seed = 1;
  int threads = 1;

  int effective_sc_level() const { return sc_level > 0 ? sc_level : p_xi; }

  StepperConfig stepper_config() const {
    StepperConfig c;
    c.eps = eps;
    c.k0 = k0;
    c.n_star = n_star;
    c.T = T;
    c.barriers = barriers;
    return c;
  }

  PcdOptions pcd_options() const {
    PcdOptions o;
    o.mode = (sg_precond == "iterated") ? PcdMode::iterated : PcdMode::exact_lu;
    o.inner = (inner_solver == "ssor") ? InnerSolver::ssor : InnerSolver::lu;
    o.ssor_sweeps = ssor_sweeps;
    o.chebyshev_iterations = chebyshev_iterations;
    return o;
  }

  DetSolverOptions det_solver_options() const {
    DetSolverOptions o;
    o.variant = (det_solver == "pcd") ? DetSolver::pcd : DetSolver::direct;
    o.pcd = pcd_options();
    o.tol = tol;
    o.max_iter = max_iter;
    o.restart = restart;
    return o;
  }

  Rect obstacle_rect() const {
    return Rect{obstacle[0], obstacle[1], obstacle[2], obstacle[3]};
  }
};

namespace detail {

inline void fail_key(const std::string& path, const std::string& what) {
  throw ConfigError("config: " + path + ": " + what);
}

template <class T>
void read_field(const json& j, const std::string& key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    fail_key(key, "wrong type");
  }
}

}  // namespace detail

inline json to_json(const RunConfig& c) {
  json j;
  j["channel_length"] = c.channel_length;
  j["channel_halfheight"] = c.channel_halfheight;
  j["obstacle"] = c.obstacle;
  j["refinement"] = c.refinement;
  j["nu1"] = c.nu1;
  j["cov"] = c.cov;
  j["Lx"] = c.Lx;
  j["Ly"] = c.Ly;
  j["m_xi"] = c.m_xi;
  j["p_xi"] = c.p_xi;
  j["eps"] = c.eps;
  j["k0"] = c.k0;
  j["n_star"] = c.n_star;
  j["T"] = c.T;
  j["barriers"] = c.barriers;
  j["ramp_rate"] = c.ramp_rate;
  j["u_max"] = c.u_max;
  j["probes"] = c.probes;
  j["sg_precond"] = c.sg_precond;
  j["det_solver"] = c.det_solver;
  j["inner_solver"] = c.inner_solver;
  j["tol"] = c.tol;
  j["max_iter"] = c.max_iter;
  j["restart"] = c.restart;
  j["ssor_sweeps"] = c.ssor_sweeps;
  j["chebyshev_iterations"] = c.chebyshev_iterations;
  j["n_mc"] = c.n_mc;
  j["sc_level"] = c.sc_level;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  return j;
}

inline RunConfig parse_config_json(const json& j) {
  static const std::set<std::string> known = {
      "channel_length", "channel_halfheight", "obstacle", "refinement",
      "nu1", "cov", "Lx", "Ly", "m_xi", "p_xi",
      "eps", "k0", "n_star", "T", "barriers", "ramp_rate", "u_max", "probes",
      "sg_precond", "det_solver", "inner_solver", "tol", "max_iter", "restart",
      "ssor_sweeps", "chebyshev_iterations",
      "n_mc", "sc_level", "seed", "threads"};
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) detail::fail_key(it.key(), "unknown key");

  RunConfig c;
  detail::read_field(j, "channel_length", c.channel_length);
  detail::read_field(j, "channel_halfheight", c.channel_halfheight);
  detail::read_field(j, "obstacle", c.obstacle);
  detail::read_field(j, "refinement", c.refinement);
  detail::read_field(j, "nu1", c.nu1);
  detail::read_field(j, "cov", c.cov);
  detail::read_field(j, "Lx", c.Lx);
  detail::read_field(j, "Ly", c.Ly);
  detail::read_field(j, "m_xi", c.m_xi);
  detail::read_field(j, "p_xi", c.p_xi);
  detail::read_field(j, "eps", c.eps);
  detail::read_field(j, "k0", c.k0);
  detail::read_field(j, "n_star", c.n_star);
  detail::read_field(j, "T", c.T);
  detail::read_field(j, "barriers", c.barriers);
  detail::read_field(j, "ramp_rate", c.ramp_rate);
  detail::read_field(j, "u_max", c.u_max);
  detail::read_field(j, "probes", c.probes);
  detail::read_field(j, "sg_precond", c.sg_precond);
  detail::read_field(j, "det_solver", c.det_solver);
  detail::read_field(j, "inner_solver", c.inner_solver);
  detail::read_field(j, "tol", c.tol);
  detail::read_field(j, "max_iter", c.max_iter);
  detail::read_field(j, "restart", c.restart);
  detail::read_field(j, "ssor_sweeps", c.ssor_sweeps);
  detail::read_field(j, "chebyshev_iterations", c.chebyshev_iterations);
  detail::read_field(j, "n_mc", c.n_mc);
  detail::read_field(j, "sc_level", c.sc_level);
  detail::read_field(j, "seed", c.seed);
  detail::read_field(j, "threads", c.threads);

  // validation, with the offending key in the message
  if (c.channel_length <= 0) detail::fail_key("channel_length", "must be positive");
  if (c.channel_halfheight <= 0)
    detail::fail_key("channel_halfheight", "must be positive");
  if (c.refinement < 1) detail::fail_key("refinement", "must be >= 1");
  if (c.nu1 <= 0) detail::fail_key("nu1", "must be positive");
  if (c.cov < 0) detail::fail_key("cov", "must be nonnegative");
  if (c.Lx <= 0) detail::fail_key("Lx", "must be positive");
  if (c.Ly <= 0) detail::fail_key("Ly", "must be positive");
  if (c.m_xi < 1) detail::fail_key("m_xi", "must be >= 1");
  if (c.p_xi < 0) detail::fail_key("p_xi", "must be >= 0");
  if (c.eps <= 0) detail::fail_key("eps", "must be positive");
  if (c.k0 <= 0) detail::fail_key("k0", "must be positive");
  if (c.n_star < 2) detail::fail_key("n_star", "must be >= 2");
  if (c.T <= 0) detail::fail_key("T", "must be positive");
  for (std::size_t i = 1; i < c.barriers.size(); ++i)
    if (c.barriers[i] < c.barriers[i - 1])
      detail::fail_key("barriers", "must be sorted");
  if (!c.barriers.empty() &&
      (c.barriers.front() < 0 || c.barriers.back() > c.T + 1e-12))
    detail::fail_key("barriers", "must lie within [0, T]");
  if (c.ramp_rate <= 0) detail::fail_key("ramp_rate", "must be positive");
  if (c.tol <= 0) detail::fail_key("tol", "must be positive");
  if (c.max_iter < 1) detail::fail_key("max_iter", "must be >= 1");
  if (c.restart < 0) detail::fail_key("restart", "must be >= 0");
  if (c.ssor_sweeps < 1) detail::fail_key("ssor_sweeps", "must be >= 1");
  if (c.chebyshev_iterations < 1)
    detail::fail_key("chebyshev_iterations", "must be >= 1");
  if (c.n_mc < 1) detail::fail_key("n_mc", "must be >= 1");
  if (c.sc_level < 0) detail::fail_key("sc_level", "must be >= 0");
  if (c.threads < 1) detail::fail_key("threads", "must be >= 1");
  if (c.sg_precond != "exact-lu" && c.sg_precond != "iterated")
    detail::fail_key("sg_precond", "must be 'exact-lu' or 'iterated'");
  if (c.det_solver != "direct" && c.det_solver != "pcd")
    detail::fail_key("det_solver", "must be 'direct' or 'pcd'");
  if (c.inner_solver != "lu" && c.inner_solver != "ssor")
    detail::fail_key("inner_solver", "must be 'lu' or 'ssor'");
  const Rect r = c.obstacle_rect();
  if (!(r.x0 < r.x1 && r.y0 < r.y1))
    detail::fail_key("obstacle", "box is degenerate");
  if (!(r.x0 > 0 && r.x1 < c.channel_length &&
        r.y0 > -c.channel_halfheight && r.y1 < c.channel_halfheight))
    detail::fail_key("obstacle", "box must lie strictly inside the channel");
  for (const auto& p : c.probes) {
    const bool inside = p[0] > 0 && p[0] < c.channel_length &&
                        std::abs(p[1]) < c.channel_halfheight &&
                        !r.contains(p[0], p[1]);
    if (!inside) detail::fail_key("probes", "probe outside the fluid domain");
  }
  return c;
}

// Parses a JSON config file; an empty file (or "{}") yields all defaults.
inline RunConfig parse_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  if (text.find_first_not_of(" \t\r\n") == std::string::npos)
    return RunConfig{};
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: parse error: ") + e.what());
  }
  return parse_config_json(j);
}

inline void echo_config(const RunConfig& c, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw SolverError("cannot open " + path);
  f << to_json(c).dump(2) << "\n";
}

}  // namespace sgflow
