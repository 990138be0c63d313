#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "sgflow/gpc.hpp"
#include "sgflow/random_field.hpp"
#include "sgflow/stepper.hpp"
#include "sgflow/types.hpp"

namespace sgflow {

struct SampleSet {
  Matrix points;   // one sample per row, m columns
  Vector weights;  // MC: 1/n each; sparse grid: Smolyak weights
  std::string provenance;
  std::uint64_t seed = 0;

  int size() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }
};

// i.i.d. standard Gaussian sample points, reproducible for a fixed seed
// (explicit Box-Muller on top of mt19937_64, so the stream does not depend
// on the standard library's distribution internals).
inline SampleSet draw_mc(int n, int m_xi, std::uint64_t seed) {
  require(n >= 1, "draw_mc: need at least one sample");
  require(m_xi >= 1, "draw_mc: dimension must be positive");
  std::mt19937_64 rng(seed);
  auto uniform01 = [&rng]() {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
  };
  SampleSet s;
  s.points.resize(n, m_xi);
  s.weights = Vector::Constant(n, 1.0 / n);
  s.provenance = "mc";
  s.seed = seed;
  double spare = 0;
  bool have_spare = false;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m_xi; ++j) {
      if (have_spare) {
        s.points(i, j) = spare;
        have_spare = false;
      } else {
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        s.points(i, j) = r * std::cos(2.0 * M_PI * u2);
        spare = r * std::sin(2.0 * M_PI * u2);
        have_spare = true;
      }
    }
  return s;
}

// Smolyak sparse grid built from 1D Gauss-Hermite rules with linear growth
// (rule i has i points). Level w is exact for total degree <= 2w+1.
inline SampleSet build_sparse_grid(int m_xi, int level) {
  require(m_xi >= 1, "build_sparse_grid: dimension must be positive");
  require(level >= 0, "build_sparse_grid: level must be nonnegative");
  const int q = m_xi + level;

  std::vector<QuadRule1d> rules(q + 1);
  for (int i = 1; i <= q; ++i) rules[i] = gauss_hermite(i);

  std::map<std::vector<long long>, std::pair<Vector, double>> merged;
  std::vector<int> idx(m_xi, 1);

  std::function<void(int, int, std::vector<int>&)> recurse =
      [&](int pos, int remaining_max, std::vector<int>& iv) {
        if (pos == m_xi) {
          int total = 0;
          for (int v : iv) total += v;
          if (total < std::max(m_xi, q - m_xi + 1)) return;
          const double coeff = ((q - total) % 2 == 0 ? 1.0 : -1.0) *
                               static_cast<double>(binomial(m_xi - 1, q - total));
          if (coeff == 0.0) return;
          // tensor points of this index
          std::vector<int> p(m_xi, 0);
          while (true) {
            Vector x(m_xi);
            double w = coeff;
            std::vector<long long> key(m_xi);
            for (int j = 0; j < m_xi; ++j) {
              x(j) = rules[iv[j]].points[p[j]];
              w *= rules[iv[j]].weights[p[j]];
              key[j] = std::llround(x(j) * 1e12);
            }
            auto it = merged.find(key);
            if (it == merged.end())
              merged.emplace(std::move(key), std::make_pair(x, w));
            else
              it->second.second += w;
            int j = 0;
            for (; j < m_xi; ++j) {
              if (++p[j] < rules[iv[j]].size()) break;
              p[j] = 0;
            }
            if (j == m_xi) break;
          }
          return;
        }
        for (int v = 1; v <= remaining_max - (m_xi - 1 - pos); ++v) {
          iv[pos] = v;
          recurse(pos + 1, remaining_max - v, iv);
        }
      };
  recurse(0, q, idx);

  SampleSet s;
  s.points.resize(static_cast<int>(merged.size()), m_xi);
  s.weights.resize(static_cast<int>(merged.size()));
  int r = 0;
  for (const auto& [key, pw] : merged) {
    s.points.row(r) = pw.first.transpose();
    s.weights(r) = pw.second;
    ++r;
  }
  s.provenance = "smolyak-" + std::to_string(level);
  return s;
}

// ---------------------------------------------------------------------------
// ensembles of deterministic runs
// ---------------------------------------------------------------------------

struct SampleRun {
  bool ok = false;
  std::string error;
  std::vector<double> barrier_times;
  std::vector<Vector> u, p;  // per barrier
  int accepted_steps = 0;
};

struct EnsembleResult {
  std::vector<SampleRun> runs;
  std::vector<double> barrier_times;
};

// Runs the deterministic solver once per sample point, all barriers
// enforced. Samples are independent; failures are recorded per sample.
// With a schedule, every instance follows the prescribed steps instead of
// the adaptive controller (useful for barrier-aligned comparisons against
// the coupled solver).
inline EnsembleResult run_ensemble(const SampleSet& samples, const Mesh& mesh,
                                   const DofMap& dof, const BoundaryData& bd,
                                   const LognormalViscosity& visc,
                                   const GpcBasis& basis_2p,
                                   const StepperConfig& cfg,
                                   const DetSolverOptions& solver_opt = {},
                                   int threads = 1,
                                   const StepSchedule* schedule = nullptr) {
  EnsembleResult out;
  out.runs.resize(samples.size());
  for (double b : cfg.barriers)
    if (b <= cfg.T + 1e-12) out.barrier_times.push_back(b);

  auto run_one = [&](int q) {
    SampleRun& r = out.runs[q];
    try {
      bool warn = false;
      const Vector nu =
          sample_viscosity(visc, basis_2p, samples.points.row(q).transpose(), &warn);
      if (nu.minCoeff() <= 0.0)
        throw SolverError("nonpositive viscosity realization");
      const DetRunResult det =
          run_deterministic(mesh, dof, bd, nu, cfg, solver_opt, schedule);
      for (const auto& [t, si] : det.barrier_hits) {
        r.barrier_times.push_back(t);
        r.u.push_back(det.snapshot_u[si]);
        r.p.push_back(det.snapshot_p[si]);
      }
      r.accepted_steps = static_cast<int>(det.accepted_times.size()) - 1;
      r.ok = true;
    } catch (const std::exception& e) {
      r.ok = false;
      r.error = e.what();
    }
  };

  if (threads <= 1) {
    for (int q = 0; q < samples.size(); ++q) run_one(q);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&]() {
        while (true) {
          const int q = next.fetch_add(1);
          if (q >= samples.size()) return;
          run_one(q);
        }
      });
    for (auto& th : pool) th.join();
  }
  return out;
}

// discrete projection u_k = sum_q u^{(q)} psi_k(xi^{(q)}) w^{(q)}
struct ProjectedCoeffs {
  std::vector<double> barrier_times;
  std::vector<Matrix> u;  // per barrier, n_u x n_xi
  std::vector<Matrix> p;  // per barrier, n_p x n_xi
};

inline ProjectedCoeffs project_pseudospectral(const EnsembleResult& ensemble,
                                              const SampleSet& samples,
                                              const GpcBasis& basis) {
  for (const auto& r : ensemble.runs)
    if (!r.ok)
      throw SolverError("project_pseudospectral: ensemble contains failed "
                        "samples: " + r.error);
  require(!ensemble.runs.empty(), "project_pseudospectral: empty ensemble");
  const int nb = static_cast<int>(ensemble.runs[0].barrier_times.size());
  const int n_u = static_cast<int>(ensemble.runs[0].u[0].size());
  const int n_p = static_cast<int>(ensemble.runs[0].p[0].size());
  const int n_xi = basis.size();

  ProjectedCoeffs out;
  out.barrier_times = ensemble.runs[0].barrier_times;
  out.u.assign(nb, Matrix::Zero(n_u, n_xi));
  out.p.assign(nb, Matrix::Zero(n_p, n_xi));
  for (int q = 0; q < samples.size(); ++q) {
    const Vector xi = samples.points.row(q).transpose();
    for (int k = 0; k < n_xi; ++k) {
      const double f = basis.evaluate(k, xi) * samples.weights(q);
      for (int b = 0; b < nb; ++b) {
        out.u[b].col(k) += f * ensemble.runs[q].u[b];
        out.p[b].col(k) += f * ensemble.runs[q].p[b];
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// moments
// ---------------------------------------------------------------------------

struct MomentFields {
  Vector mean;
  Vector variance;
  bool variance_defined = true;
};

// sample mean and (n-1)-normalized variance of an equal-weight ensemble
inline MomentFields mc_moments(const std::vector<Vector>& fields) {
  require(!fields.empty(), "mc_moments: empty ensemble");
  const int n = static_cast<int>(fields.size());
  MomentFields m;
  m.mean = Vector::Zero(fields[0].size());
  for (const auto& f : fields) m.mean += f;
  m.mean /= n;
  m.variance = Vector::Zero(fields[0].size());
  if (n == 1) {
    m.variance_defined = false;
    return m;
  }
  for (const auto& f : fields)
    m.variance += (f - m.mean).cwiseProduct(f - m.mean);
  m.variance /= (n - 1);
  return m;
}

// gPC moments by orthonormality: mean = mode 1, variance = sum of squares of
// the higher modes (safe under negative quadrature weights).
inline MomentFields coeff_moments(const Matrix& coeffs) {
  MomentFields m;
  m.mean = coeffs.col(0);
  m.variance = Vector::Zero(coeffs.rows());
  for (int k = 1; k < coeffs.cols(); ++k)
    m.variance += coeffs.col(k).cwiseProduct(coeffs.col(k));
  return m;
}

}  // namespace sgflow
