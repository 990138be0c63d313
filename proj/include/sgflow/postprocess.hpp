#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "sgflow/gpc.hpp"
#include "sgflow/sampling.hpp"
#include "sgflow/sg.hpp"
#include "sgflow/types.hpp"

namespace sgflow {

// ---------------------------------------------------------------------------
// kernel density estimation
// ---------------------------------------------------------------------------

struct PdfEstimate {
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0;
  std::string source;
  double barrier_time = 0;
  bool degenerate = false;

  double trapezoid_mass() const {
    double s = 0;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i)
      s += 0.5 * (density[i] + density[i + 1]) * (grid[i + 1] - grid[i]);
    return s;
  }
};

// Gaussian-kernel estimate with Silverman's bandwidth, evaluated on the data
// range extended by three bandwidths. Degenerate (all-equal) data produces a
// delta-like bump and sets the warning flag.
inline PdfEstimate probe_pdf(std::vector<double> values,
                             const std::string& source, double barrier_time,
                             int grid_size = 256, double forced_bandwidth = 0) {
  require(!values.empty(), "probe_pdf: no data");
  PdfEstimate est;
  est.source = source;
  est.barrier_time = barrier_time;

  const int n = static_cast<int>(values.size());
  std::sort(values.begin(), values.end());
  double mean = 0;
  for (double v : values) mean += v;
  mean /= n;
  double var = 0;
  for (double v : values) var += (v - mean) * (v - mean);
  var = (n > 1) ? var / (n - 1) : 0.0;
  const double sd = std::sqrt(var);
  const double q1 = values[static_cast<int>(0.25 * (n - 1))];
  const double q3 = values[static_cast<int>(0.75 * (n - 1))];
  const double iqr = q3 - q1;

  double h = forced_bandwidth;
  if (h <= 0) {
    double spread = std::min(sd, iqr / 1.34);
    if (spread <= 0) spread = std::max(sd, iqr / 1.34);
    if (spread <= 0) {  // all values identical
      est.degenerate = true;
      spread = std::max(std::abs(values[0]), 1.0) * 1e-3;
      h = spread;
    } else {
      h = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
    }
  }
  est.bandwidth = h;

  const double lo = values.front() - 3.0 * h;
  const double hi = values.back() + 3.0 * h;
  est.grid.resize(grid_size);
  est.density.assign(grid_size, 0.0);
  const double inv = 1.0 / (n * h * std::sqrt(2.0 * M_PI));
  for (int i = 0; i < grid_size; ++i) {
    const double x = lo + (hi - lo) * i / (grid_size - 1);
    est.grid[i] = x;
    double s = 0;
    for (double v : values) {
      const double z = (x - v) / h;
      s += std::exp(-0.5 * z * z);
    }
    est.density[i] = s * inv;
  }
  return est;
}

// Samples the gPC surrogate sum_k c_k psi_k(xi) at Gaussian points, so the
// spectral sources feed the same KDE path as the sampling ones.
inline std::vector<double> sample_surrogate(const Vector& coeffs,
                                            const GpcBasis& basis,
                                            int n_samples, std::uint64_t seed) {
  require(coeffs.size() == basis.size(),
          "sample_surrogate: coefficient/basis size mismatch");
  const SampleSet pts = draw_mc(n_samples, basis.dim(), seed);
  std::vector<double> out(n_samples);
  for (int q = 0; q < n_samples; ++q) {
    const Vector xi = pts.points.row(q).transpose();
    double v = 0;
    for (int k = 0; k < basis.size(); ++k) v += coeffs(k) * basis.evaluate(k, xi);
    out[q] = v;
  }
  return out;
}

// ---------------------------------------------------------------------------
// gPC coefficient norms over time
// ---------------------------------------------------------------------------

struct NormSeries {
  std::vector<double> t;
  std::vector<Vector> norms;  // per time, one entry per mode
};

inline NormSeries coefficient_norm_series(const SgRunResult& run) {
  NormSeries s;
  s.t = run.series_t;
  s.norms = run.series_mode_norms;
  return s;
}

// ---------------------------------------------------------------------------
// cross-method comparison at probes
// ---------------------------------------------------------------------------

// gPC coefficients at probe points: coeffs[b][probe] is 2 x n_xi
// (velocity components by row).
struct CoeffProbeSet {
  std::vector<double> barriers;
  std::vector<std::vector<Matrix>> coeffs;
};

// per-sample probe values: values[b][probe] is 2 x n_samples
struct SampleProbeSet {
  std::vector<double> barriers;
  std::vector<std::vector<Matrix>> values;
};

struct CompareRow {
  double t = 0;
  int probe = 0;
  int comp = 0;
  double sg_mean = 0, sc_mean = 0, mc_mean = 0, mc_se = 0;
  double sg_var = 0, sc_var = 0, mc_var = 0;
  double mean_abs_diff = 0, mean_rel_diff = 0;
  double var_abs_diff = 0, var_rel_diff = 0;
};

namespace detail {

inline std::pair<double, double> coeff_scalar_moments(const Vector& c) {
  double var = 0;
  for (int k = 1; k < c.size(); ++k) var += c(k) * c(k);
  return {c(0), var};
}

}  // namespace detail

// Aligns the three result sets on common barriers and tabulates mean and
// variance per probe and component, with SG-vs-SC differences and the Monte
// Carlo standard error of the mean.
inline std::vector<CompareRow> compare_report(const CoeffProbeSet& sg,
                                              const CoeffProbeSet& sc,
                                              const SampleProbeSet& mc) {
  auto find_barrier = [](const std::vector<double>& list, double b) {
    for (std::size_t i = 0; i < list.size(); ++i)
      if (std::abs(list[i] - b) <= 1e-9 * std::max(1.0, std::abs(b)))
        return static_cast<int>(i);
    return -1;
  };
  std::string missing;
  for (double b : sg.barriers) {
    if (find_barrier(sc.barriers, b) < 0)
      missing += " sc:" + std::to_string(b);
    if (find_barrier(mc.barriers, b) < 0)
      missing += " mc:" + std::to_string(b);
  }
  if (!missing.empty())
    throw ConfigError("compare_report: missing barriers:" + missing);

  std::vector<CompareRow> rows;
  for (std::size_t bi = 0; bi < sg.barriers.size(); ++bi) {
    const int bs = find_barrier(sc.barriers, sg.barriers[bi]);
    const int bm = find_barrier(mc.barriers, sg.barriers[bi]);
    const int n_probes = static_cast<int>(sg.coeffs[bi].size());
    for (int p = 0; p < n_probes; ++p)
      for (int comp = 0; comp < 2; ++comp) {
        CompareRow r;
        r.t = sg.barriers[bi];
        r.probe = p;
        r.comp = comp;
        std::tie(r.sg_mean, r.sg_var) =
            detail::coeff_scalar_moments(sg.coeffs[bi][p].row(comp).transpose());
        std::tie(r.sc_mean, r.sc_var) =
            detail::coeff_scalar_moments(sc.coeffs[bs][p].row(comp).transpose());
        const auto vals = mc.values[bm][p].row(comp);
        const int n = static_cast<int>(vals.size());
        r.mc_mean = vals.mean();
        double var = 0;
        for (int q = 0; q < n; ++q)
          var += (vals(q) - r.mc_mean) * (vals(q) - r.mc_mean);
        r.mc_var = (n > 1) ? var / (n - 1) : 0.0;
        r.mc_se = (n > 1) ? std::sqrt(r.mc_var / n) : 0.0;
        r.mean_abs_diff = std::abs(r.sg_mean - r.sc_mean);
        r.mean_rel_diff =
            r.mean_abs_diff / std::max(std::abs(r.sc_mean), 1e-300);
        r.var_abs_diff = std::abs(r.sg_var - r.sc_var);
        r.var_rel_diff = r.var_abs_diff / std::max(r.sc_var, 1e-300);
        rows.push_back(r);
      }
  }
  return rows;
}

}  // namespace sgflow
