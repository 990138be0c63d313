#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "sgflow/sg.hpp"

using namespace sgflow;

namespace {

Mesh tiny_mesh() { return generate_obstacle_mesh(3.0, 1.0, default_obstacle(), 1); }

struct TinyProblem {
  Mesh mesh;
  DofMap dof;
  BoundaryData bd;
  GpcBasis basis_small, basis_large;
  TripleProductTensor H;
  LognormalViscosity visc;
};

TinyProblem make_tiny(double cov, int m = 2, int p = 2) {
  TinyProblem t{tiny_mesh(), {}, {}, make_gpc_basis(m, p),
                make_gpc_basis(m, 2 * p), {}, {}};
  t.dof = build_dofmap(t.mesh);
  t.bd = make_poiseuille_ramp(t.mesh, t.dof);
  t.H = triple_products(t.basis_large, t.basis_small);
  const GaussianFieldKL kl =
      build_calibrated_field(t.mesh, 0.02, cov, 3.0, 0.5, m);
  t.visc = lognormal_coeffs(kl, t.basis_large);
  return t;
}

// dense matrix of one structural block
Matrix dense_fcal(const SgOseenOperator& op, int l) {
  const int n_x = op.n_x();
  Matrix F = Matrix::Zero(n_x, n_x);
  if (l == 0) {
    F.topLeftCorner(op.n_u, op.n_u) = Matrix(op.F1_hat);
    F.topRightCorner(op.n_u, op.n_p) = Matrix(op.Bt_hat);
    F.bottomLeftCorner(op.n_p, op.n_u) = Matrix(op.B_hat);
  } else if (op.active[l]) {
    F.topLeftCorner(op.n_u, op.n_u) = Matrix(op.F_hat[l - 1]);
  }
  return F;
}

Matrix dense_kron(const Matrix& H, const Matrix& F) {
  Matrix K(H.rows() * F.rows(), H.cols() * F.cols());
  for (int i = 0; i < H.rows(); ++i)
    for (int j = 0; j < H.cols(); ++j)
      K.block(i * F.rows(), j * F.cols(), F.rows(), F.cols()) = H(i, j) * F;
  return K;
}

// hand-built random operator and tensor for structure tests
struct RandomInstance {
  TripleProductTensor H;
  SgOseenOperator op;
};

RandomInstance random_instance(int n_u, int n_p, int n_xi, int n_hat,
                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  RandomInstance inst;
  inst.H.n_hat = n_hat;
  inst.H.n_xi = n_xi;
  for (int l = 0; l < n_hat; ++l) {
    Matrix Hl;
    if (l == 0) {
      Hl = Matrix::Identity(n_xi, n_xi);
    } else {
      Hl = Matrix::Zero(n_xi, n_xi);
      for (int i = 0; i < n_xi; ++i)
        for (int j = i; j < n_xi; ++j) {
          const double v = (rng() % 3 == 0) ? uni(rng) : 0.0;  // sparse-ish
          Hl(i, j) = v;
          Hl(j, i) = v;
        }
    }
    std::vector<Triplet> t;
    for (int i = 0; i < n_xi; ++i)
      for (int j = 0; j < n_xi; ++j)
        if (Hl(i, j) != 0.0) t.emplace_back(i, j, Hl(i, j));
    SparseMatrix Hs(n_xi, n_xi);
    Hs.setFromTriplets(t.begin(), t.end());
    inst.H.H.push_back(Hs);
    inst.H.H_dense.push_back(Hl);
  }
  auto random_sparse = [&](int r, int c) {
    std::vector<Triplet> t;
    for (int i = 0; i < r; ++i)
      for (int k = 0; k < 3; ++k)
        t.emplace_back(i, static_cast<int>(rng() % c), uni(rng));
    SparseMatrix A(r, c);
    A.setFromTriplets(t.begin(), t.end());
    return A;
  };
  auto& op = inst.op;
  op.n_u = n_u;
  op.n_p = n_p;
  op.n_xi = n_xi;
  op.H = &inst.H;
  op.F1_hat = random_sparse(n_u, n_u);
  op.B_hat = random_sparse(n_p, n_u);
  op.Bt_hat = SparseMatrix(op.B_hat.transpose());
  op.active.assign(n_hat, 1);
  for (int l = 1; l < n_hat; ++l) op.F_hat.push_back(random_sparse(n_u, n_u));
  return inst;
}

}  // namespace

TEST_CASE("kronecker identity (V (x) W) vec(X) = vec(W X V^T)") {
  std::mt19937_64 rng(42);
  const int n = 5, m = 4;
  Matrix V = Matrix::Random(m, m), W = Matrix::Random(n, n),
         X = Matrix::Random(n, m);
  const Matrix K = dense_kron(V, W);
  const Vector lhs = K * Eigen::Map<const Vector>(X.data(), X.size());
  const Matrix R = W * X * V.transpose();
  const Vector rhs = Eigen::Map<const Vector>(R.data(), R.size());
  CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() <= 1e-13);
}

TEST_CASE("sg_matvec equals the dense Kronecker-sum action") {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    const RandomInstance inst = random_instance(12, 5, 4, 3, seed);
    const int n_x = inst.op.n_x();
    Matrix K = Matrix::Zero(n_x * 4, n_x * 4);
    for (int l = 0; l < 3; ++l)
      K += dense_kron(inst.H.H_dense[l], dense_fcal(inst.op, l));
    const Matrix V = Matrix::Random(n_x, 4);
    const Matrix Y = sg_matvec(inst.op, V);
    const Vector y2 = K * Eigen::Map<const Vector>(V.data(), V.size());
    const double scale = Y.cwiseAbs().maxCoeff();
    CHECK((Eigen::Map<const Vector>(Y.data(), Y.size()) - y2)
              .lpNorm<Eigen::Infinity>() <= 1e-12 * scale);
  }
}

TEST_CASE("single-term operator is plain matrix action") {
  const RandomInstance inst = random_instance(9, 4, 3, 1, 7);
  const Matrix V = Matrix::Random(13, 3);
  const Matrix Y = sg_matvec(inst.op, V);
  const Matrix F = dense_fcal(inst.op, 0);
  CHECK((Y - F * V).lpNorm<Eigen::Infinity>() <= 1e-13);
}

TEST_CASE("assembled SG operator") {
  const TinyProblem t = make_tiny(0.1);
  const int n_xi = t.basis_small.size();
  const SgOperators base =
      build_sg_operators(t.mesh, t.dof, t.visc, t.H, n_xi);

  SECTION("small instance matches the dense Kronecker oracle") {
    Matrix winds = Matrix::Zero(t.dof.n_u, n_xi);
    winds.col(0) = interpolate_velocity(
        t.mesh, [](double, double y) { return 1 - y * y; },
        [](double, double) { return 0.0; });
    winds.col(1) = 0.1 * winds.col(0);
    const SgStepSystem sys = assemble_sg_operator(base, 1e-2, winds);
    const int n_x = sys.op.n_x();
    Matrix K = Matrix::Zero(n_x * n_xi, n_x * n_xi);
    for (int l = 0; l < base.n_hat; ++l)
      K += dense_kron(t.H.dense(l), dense_fcal(sys.op, l));
    const Matrix V = Matrix::Random(n_x, n_xi);
    const Matrix Y = sg_matvec(sys.op, V);
    const Vector y2 = K * Eigen::Map<const Vector>(V.data(), V.size());
    CHECK((Eigen::Map<const Vector>(Y.data(), Y.size()) - y2)
              .lpNorm<Eigen::Infinity>() <= 1e-12 * Y.cwiseAbs().maxCoeff());
  }

  SECTION("block diagonal carries the saddle-point structure") {
    Matrix winds = Matrix::Random(t.dof.n_u, n_xi) * 0.05;
    const SgStepSystem sys = assemble_sg_operator(base, 1e-2, winds);
    const int n_x = sys.op.n_x();
    Matrix K = Matrix::Zero(n_x * n_xi, n_x * n_xi);
    for (int l = 0; l < base.n_hat; ++l)
      K += dense_kron(t.H.dense(l), dense_fcal(sys.op, l));
    for (int j : {0, n_xi - 1}) {
      Matrix Dj = K.block(j * n_x, j * n_x, n_x, n_x);
      Matrix expect = dense_fcal(sys.op, 0);
      for (int l = 1; l < base.n_hat; ++l)
        if (sys.op.active[l])
          expect += t.H.dense(l)(j, j) * dense_fcal(sys.op, l);
      CHECK((Dj - expect).lpNorm<Eigen::Infinity>() <=
            1e-13 * expect.cwiseAbs().maxCoeff());
    }
  }

  SECTION("single nonzero input column spreads only to coupled modes") {
    Matrix winds = Matrix::Random(t.dof.n_u, n_xi) * 0.05;
    const SgStepSystem sys = assemble_sg_operator(base, 1e-2, winds);
    const int j = 2;
    Matrix V = Matrix::Zero(sys.op.n_x(), n_xi);
    V.col(j) = Vector::Random(sys.op.n_x());
    const Matrix Y = sg_matvec(sys.op, V);
    for (int k = 0; k < n_xi; ++k) {
      bool coupled = false;
      for (int l = 0; l < base.n_hat; ++l)
        if ((l == 0 || sys.op.active[l]) && t.H.dense(l)(j, k) != 0.0)
          coupled = true;
      if (!coupled) CHECK(Y.col(k).norm() == 0.0);
    }
  }

  SECTION("CoV = 0 leaves only the mean block") {
    const TinyProblem t0 = make_tiny(0.0);
    const SgOperators base0 =
        build_sg_operators(t0.mesh, t0.dof, t0.visc, t0.H, n_xi);
    Matrix winds = Matrix::Zero(t0.dof.n_u, n_xi);
    winds.col(0) = Vector::Random(t0.dof.n_u);
    const SgStepSystem sys = assemble_sg_operator(base0, 1e-2, winds);
    for (int l = 1; l < base0.n_hat; ++l) CHECK_FALSE(sys.active[l]);
    // block-diagonal action with identical mean blocks
    Matrix V = Matrix::Random(sys.op.n_x(), n_xi);
    const Matrix Y = sg_matvec(sys.op, V);
    const Matrix F = dense_fcal(sys.op, 0);
    CHECK((Y - F * V).lpNorm<Eigen::Infinity>() <=
          1e-12 * Y.cwiseAbs().maxCoeff());
  }

  SECTION("coupling strength decays with the viscosity coefficient degree") {
    double prev = 1e300;
    for (int d = 1; d <= 2 * 2; ++d) {
      double dmax = 0;
      for (int l = 1; l < base.n_hat; ++l) {
        if (t.basis_large.set.degree(l) != d || !base.A_nonzero[l]) continue;
        double amax = 0;
        for (int r = 0; r < base.A[l].outerSize(); ++r)
          for (SparseMatrix::InnerIterator it(base.A[l], r); it; ++it)
            amax = std::max(amax, std::abs(it.value()));
        dmax = std::max(dmax, amax);
      }
      CHECK(dmax < prev);
      prev = dmax;
    }
  }
}

TEST_CASE("n_xi = 1 reduces to the deterministic operator") {
  const TinyProblem t = make_tiny(0.1, 1, 0);  // m=1, p=0
  const SgOperators base = build_sg_operators(t.mesh, t.dof, t.visc, t.H, 1);
  const Vector wind = interpolate_velocity(
      t.mesh, [](double, double y) { return 1 - y * y; },
      [](double, double) { return 0.0; });
  const double k = 5e-3;
  const SgStepSystem sys = assemble_sg_operator(base, k, Matrix(wind));

  // deterministic reference
  const SparseMatrix N = assemble_convection(t.mesh, t.dof, wind);
  const SparseMatrix F =
      eliminate_rows_cols(oseen_velocity_matrix(base.mean, k, N), t.dof.dirichlet);
  const Vector v = Vector::Random(t.dof.n_u);
  CHECK(((sys.op.F1_hat - F) * v).lpNorm<Eigen::Infinity>() <=
        1e-13 * (F * v).lpNorm<Eigen::Infinity>());
}

TEST_CASE("mean-based preconditioner structure") {
  const TinyProblem t = make_tiny(0.1);
  const int n_xi = t.basis_small.size();
  const SgOperators base =
      build_sg_operators(t.mesh, t.dof, t.visc, t.H, n_xi);
  Matrix winds = Matrix::Zero(t.dof.n_u, n_xi);
  winds.col(0) = interpolate_velocity(
      t.mesh, [](double, double y) { return 1 - y * y; },
      [](double, double) { return 0.0; });
  const SgStepSystem sys = assemble_sg_operator(base, 1e-2, winds);
  PcdOptions opt;
  const PcdShared shared(base.mean, opt);
  const MeanBasedPcd pcd(base, shared, sys, opt);
  const int n_x = sys.op.n_x();

  SECTION("acts column by column") {
    Matrix R = Matrix::Zero(n_x, n_xi);
    R.col(3) = Vector::Random(n_x);
    const Matrix V = pcd_apply(pcd, R);
    for (int j = 0; j < n_xi; ++j)
      if (j != 3) CHECK(V.col(j).norm() == 0.0);
    CHECK(V.col(3).norm() > 0.0);
    // independence: the same column alone gives the same answer
    const Vector direct = pcd.block().apply(R.col(3));
    CHECK((V.col(3) - direct).lpNorm<Eigen::Infinity>() == 0.0);
  }

  SECTION("upper-triangular action: zero pressure residual") {
    Matrix R = Matrix::Zero(n_x, n_xi);
    R.col(0).head(t.dof.n_u) = Vector::Random(t.dof.n_u);
    const Matrix V = pcd_apply(pcd, R);
    CHECK(V.col(0).tail(t.dof.n_p).norm() == 0.0);
    const Vector direct = SparseLu(sys.op.F1_hat).solve(
        Vector(R.col(0).head(t.dof.n_u)));
    CHECK((V.col(0).head(t.dof.n_u) - direct).lpNorm<Eigen::Infinity>() <=
          1e-13 * direct.lpNorm<Eigen::Infinity>());
  }

  SECTION("preconditioned Stokes-limit spectrum stays away from zero") {
    // dense preconditioned matrix on the mean block (n_xi = 1 view)
    const SgStepSystem stokes =
        assemble_sg_operator(base, 1e-2, Matrix(Matrix::Zero(t.dof.n_u, n_xi)));
    const MeanBasedPcd pcd0(base, shared, stokes, opt);
    const Matrix F = dense_fcal(stokes.op, 0);
    Matrix P(n_x, n_x);
    for (int j = 0; j < n_x; ++j) {
      Matrix R = Matrix::Zero(n_x, n_xi);
      R.col(0) = Vector::Unit(n_x, j);
      P.col(j) = (F * pcd_apply(pcd0, R)).col(0);
    }
    // inverse power iteration for the smallest-magnitude eigenvalue
    Eigen::PartialPivLU<Matrix> lu(P);
    Vector v = Vector::Constant(n_x, 1.0 / std::sqrt(n_x));
    double mu = 0;
    for (int it = 0; it < 60; ++it) {
      v = lu.solve(v);
      mu = v.lpNorm<Eigen::Infinity>();
      v /= mu;
    }
    const double min_eig = 1.0 / mu;
    CHECK(min_eig > 0.02);
  }
}

TEST_CASE("sg schedule construction") {
  SECTION("rounds interval fractions down to powers of ten") {
    const StepSchedule s =
        build_sg_schedule({0.0, 0.0123}, 10, {});
    REQUIRE(s.segments.size() == 1);
    CHECK(s.segments[0].dt == Catch::Approx(1e-3).epsilon(1e-12));
  }
  SECTION("exact powers of ten survive") {
    const StepSchedule s = build_sg_schedule({0.0, 1e-8}, 10, {});
    CHECK(s.segments[0].dt == Catch::Approx(1e-9).epsilon(1e-12));
  }
  SECTION("barriers must be deterministic landings") {
    CHECK_THROWS_AS(build_sg_schedule({0.0, 0.2, 0.4}, 4, {0.3}), ConfigError);
    CHECK_NOTHROW(build_sg_schedule({0.0, 0.2, 0.4}, 4, {0.2, 0.4}));
  }
  SECTION("empty history is a configuration error") {
    CHECK_THROWS_AS(build_sg_schedule({0.0}, 4, {}), ConfigError);
  }
}

TEST_CASE("CoV = 0 stochastic Galerkin run degenerates to the deterministic run") {
  const TinyProblem t = make_tiny(0.0);
  const int n_xi = t.basis_small.size();

  StepperConfig cfg;
  cfg.T = 2e-3;
  cfg.barriers = {1e-3, 2e-3};
  cfg.k0 = 1e-6;

  // adaptive deterministic run gives the schedule
  const DetRunResult det_adapt =
      run_deterministic(t.mesh, t.dof, t.bd, t.visc.mean_field(), cfg);
  const StepSchedule sched =
      build_sg_schedule(det_adapt.accepted_times, n_xi, cfg.barriers);

  // deterministic run on the schedule with the PCD solver
  DetSolverOptions dopt;
  dopt.variant = DetSolver::pcd;
  dopt.tol = 1e-10;
  const DetRunResult det = run_deterministic(t.mesh, t.dof, t.bd,
                                             t.visc.mean_field(), cfg, dopt,
                                             &sched);

  const SgOperators base = build_sg_operators(t.mesh, t.dof, t.visc, t.H, n_xi);
  SgSolveOptions sopt;
  sopt.tol = 1e-10;
  const SgRunResult sg = sg_run(base, t.bd, sched, cfg, sopt);

  REQUIRE(sg.barrier_times.size() == 2);
  REQUIRE(det.barrier_hits.size() == 2);
  for (std::size_t b = 0; b < 2; ++b) {
    const Matrix& U = sg.snapshot_U[b];
    const Vector& u = det.snapshot_u[det.barrier_hits[b].second];
    CHECK((U.col(0) - u).lpNorm<Eigen::Infinity>() <= 1e-10);
    for (int k = 1; k < n_xi; ++k) CHECK(U.col(k).norm() == 0.0);
  }

  SECTION("same per-step fGMRES iteration counts as the deterministic solve") {
    REQUIRE(sg.history.size() == det.history.size());
    for (std::size_t i = 0; i < sg.history.size(); ++i)
      CHECK(sg.history[i].gmres_iters == det.history[i].gmres_iters);
  }

  SECTION("mode-wise incompressibility") {
    CHECK(sg.max_div_residual <=
          10.0 * sopt.tol * std::max(1.0, sg.max_rhs_norm));
  }
}
