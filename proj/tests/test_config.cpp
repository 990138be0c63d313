#include <catch2/catch_amalgamated.hpp>

#include <fstream>

#include "sgflow/config.hpp"

using namespace sgflow;

TEST_CASE("empty configuration file yields the experiment defaults") {
  std::ofstream("cfg_empty.json") << "";
  const RunConfig c = parse_config("cfg_empty.json");
  CHECK(c.channel_length == 12.0);
  CHECK(c.refinement == 2);
  CHECK(c.nu1 == 0.02);
  CHECK(c.cov == 0.10);
  CHECK(c.Lx == 3.0);
  CHECK(c.Ly == 0.5);
  CHECK(c.m_xi == 2);
  CHECK(c.p_xi == 3);
  CHECK(c.eps == 1e-4);
  CHECK(c.k0 == 1e-9);
  CHECK(c.n_star == 10);
  CHECK(c.T == 10.0);
  REQUIRE(c.barriers.size() == 10);
  CHECK(c.barriers.back() == 10.0);
  REQUIRE(c.probes.size() == 3);
  CHECK(c.probes[0][1] == -0.4339);
  CHECK(c.sg_precond == "exact-lu");
  CHECK(c.tol == 1e-8);
  CHECK(c.n_mc == 200);
}

TEST_CASE("validation names the offending key") {
  auto expect_error = [](const std::string& body, const std::string& key) {
    std::ofstream("cfg_bad.json") << body;
    try {
      parse_config("cfg_bad.json");
      FAIL("expected ConfigError for " + key);
    } catch (const ConfigError& e) {
      INFO(e.what());
      CHECK(std::string(e.what()).find(key) != std::string::npos);
    }
  };
  expect_error(R"({"cov": -0.1})", "cov");
  expect_error(R"({"nu1": 0})", "nu1");
  expect_error(R"({"unknown_option": 1})", "unknown_option");
  expect_error(R"({"barriers": [2.0, 1.0]})", "barriers");
  expect_error(R"({"probes": [[2.0, 0.0]]})", "probes");  // inside the obstacle
  expect_error(R"({"sg_precond": "cholesky"})", "sg_precond");
  expect_error(R"({"T": "soon"})", "T");
}

TEST_CASE("echoed configuration round-trips to the same effective config") {
  std::ofstream("cfg_some.json") << R"({
    "channel_length": 6.0, "refinement": 1, "cov": 0.01, "p_xi": 2,
    "T": 2.0, "barriers": [0, 0.1, 1, 2], "seed": 31,
    "probes": [[4.0, 0.25]], "sg_precond": "iterated"
  })";
  const RunConfig c = parse_config("cfg_some.json");
  echo_config(c, "cfg_echo.json");
  const RunConfig d = parse_config("cfg_echo.json");
  CHECK(to_json(c) == to_json(d));
  CHECK(d.cov == 0.01);
  CHECK(d.sg_precond == "iterated");
  CHECK(d.seed == 31);
}

TEST_CASE("derived options") {
  RunConfig c;
  c.p_xi = 3;
  CHECK(c.effective_sc_level() == 3);
  c.sc_level = 5;
  CHECK(c.effective_sc_level() == 5);
  c.sg_precond = "iterated";
  c.inner_solver = "ssor";
  const PcdOptions o = c.pcd_options();
  CHECK(o.mode == PcdMode::iterated);
  CHECK(o.inner == InnerSolver::ssor);
  const StepperConfig sc = c.stepper_config();
  CHECK(sc.T == c.T);
  CHECK(sc.eps == c.eps);
}
