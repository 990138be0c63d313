#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "sgflow/fem.hpp"
#include "sgflow/gpc.hpp"
#include "sgflow/mesh.hpp"
#include "sgflow/types.hpp"

namespace sgflow {

// ---------------------------------------------------------------------------
// analytic 1D Karhunen-Loeve eigenpairs of the exponential kernel
// exp(-|s-t|/L) on an interval of length len (centered form on [-T,T])
// ---------------------------------------------------------------------------

struct Kl1dMode {
  double lambda = 0;
  double omega = 0;   // frequency of cos/sin
  bool even = true;
  double normalizer = 0;

  // eigenfunction on the centered interval
  double eval(double s) const {
    return even ? normalizer * std::cos(omega * s)
                : normalizer * std::sin(omega * s);
  }
};

namespace detail {

// bisection for a strictly bracketed root
template <class F>
double bisect(F f, double lo, double hi) {
  double flo = f(lo);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((flo < 0) == (fm < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

// First n eigenpairs (descending lambda) of the exponential kernel on an
// interval of length len. The even modes solve c = w tan(wT) and the odd
// modes w = -c tan(wT), with T = len/2 and c = 1/corr_length; the
// eigenvalues are 2c/(w^2+c^2).
inline std::vector<Kl1dMode> kl_modes_1d(double len, double corr_length,
                                         int n) {
  require(len > 0 && corr_length > 0, "kl_modes_1d: positive length scales");
  require(n >= 1, "kl_modes_1d: need at least one mode");
  const double T = 0.5 * len;
  const double c = 1.0 / corr_length;
  const double pi = M_PI;
  std::vector<Kl1dMode> modes;
  const int per_family = n + 1;
  // even family: roots of f(w) = c - w tan(wT) in ((i-1)pi/T, (i-1/2)pi/T)
  for (int i = 1; i <= per_family; ++i) {
    const double lo = ((i - 1) * pi) / T + 1e-12;
    const double hi = ((i - 0.5) * pi) / T - 1e-12;
    const double w =
        detail::bisect([&](double x) { return c - x * std::tan(x * T); }, lo, hi);
    Kl1dMode m;
    m.even = true;
    m.omega = w;
    m.lambda = 2.0 * c / (w * w + c * c);
    m.normalizer = 1.0 / std::sqrt(T + std::sin(2.0 * w * T) / (2.0 * w));
    modes.push_back(m);
  }
  // odd family: roots of f(w) = w + c tan(wT) in ((i-1/2)pi/T, i pi/T)
  for (int i = 1; i <= per_family; ++i) {
    const double lo = ((i - 0.5) * pi) / T + 1e-12;
    const double hi = (i * pi) / T - 1e-12;
    const double w =
        detail::bisect([&](double x) { return x + c * std::tan(x * T); }, lo, hi);
    Kl1dMode m;
    m.even = false;
    m.omega = w;
    m.lambda = 2.0 * c / (w * w + c * c);
    m.normalizer = 1.0 / std::sqrt(T - std::sin(2.0 * w * T) / (2.0 * w));
    modes.push_back(m);
  }
  std::sort(modes.begin(), modes.end(),
            [](const Kl1dMode& a, const Kl1dMode& b) { return a.lambda > b.lambda; });
  modes.resize(n);
  return modes;
}

// ---------------------------------------------------------------------------
// 2D separable Gaussian field
// ---------------------------------------------------------------------------

struct CovarianceParams {
  double sigma_g = 1.0;  // standard deviation of the Gaussian field
  double Lx = 3.0;       // correlation lengths
  double Ly = 0.5;
};

// Truncated KL expansion of the Gaussian field on the channel bounding box:
// G(x,xi) = g0 + sum_j g_j(x) xi_j with g_j = sigma * sqrt(lx_i*ly_k) *
// fx_i(x) * fy_k(y), ordered by decreasing variance contribution. Fields are
// stored nodally on the Q2 nodes.
struct GaussianFieldKL {
  double g0 = 0.0;            // spatially constant mean (see calibrate)
  double sigma_g = 0.0;
  double Lx = 0.0, Ly = 0.0;
  std::vector<double> lambdas;  // per retained mode, includes sigma^2 factor
  std::vector<Vector> modes;    // g_j on Q2 nodes, eigenvalue-scaled
  double total_variance = 0.0;  // sigma^2 * bounding-box area

  int m_xi() const { return static_cast<int>(modes.size()); }

  // sum_j g_j(x)^2 at a node
  double variance_at(int node) const {
    double s = 0;
    for (const auto& g : modes) s += g(node) * g(node);
    return s;
  }
};

inline GaussianFieldKL kl_expand(const CovarianceParams& cov, const Mesh& mesh,
                                 int m_xi) {
  require(cov.sigma_g >= 0, "kl_expand: sigma_g must be nonnegative");
  require(cov.Lx > 0 && cov.Ly > 0, "kl_expand: correlation lengths positive");
  if (m_xi < 1) throw ConfigError("kl_expand: m_xi must be >= 1");

  GaussianFieldKL out;
  out.sigma_g = cov.sigma_g;
  out.Lx = cov.Lx;
  out.Ly = cov.Ly;
  const double L = mesh.channel_length;
  const double H = mesh.channel_halfheight;
  out.total_variance = cov.sigma_g * cov.sigma_g * (L * 2.0 * H);

  // the top m products of two decreasing sequences live in the m x m block
  const auto mx = kl_modes_1d(L, cov.Lx, m_xi);
  const auto my = kl_modes_1d(2.0 * H, cov.Ly, m_xi);
  if (static_cast<int>(mx.size()) < m_xi || static_cast<int>(my.size()) < m_xi)
    throw ConfigError("kl_expand: not enough 1D eigenpairs available");

  struct Prod {
    double lambda;
    int i, k;
  };
  std::vector<Prod> prods;
  for (int i = 0; i < m_xi; ++i)
    for (int k = 0; k < m_xi; ++k)
      prods.push_back({mx[i].lambda * my[k].lambda, i, k});
  std::sort(prods.begin(), prods.end(), [](const Prod& a, const Prod& b) {
    if (a.lambda != b.lambda) return a.lambda > b.lambda;
    return std::make_pair(a.i, a.k) < std::make_pair(b.i, b.k);
  });

  const double cx = 0.5 * L;  // centered coordinates for the 1D modes
  for (int j = 0; j < m_xi; ++j) {
    const auto& p = prods[j];
    const double lam = cov.sigma_g * cov.sigma_g * p.lambda;
    Vector g(mesh.n_q2_nodes());
    for (int n = 0; n < mesh.n_q2_nodes(); ++n)
      g(n) = cov.sigma_g * std::sqrt(p.lambda) * mx[p.i].eval(mesh.q2x[n] - cx) *
             my[p.k].eval(mesh.q2y[n]);
    out.lambdas.push_back(lam);
    out.modes.push_back(std::move(g));
  }
  return out;
}

// ---------------------------------------------------------------------------
// lognormal viscosity
// ---------------------------------------------------------------------------

// Coefficients of nu(x,xi) = sum_l nu_l(x) psi_l(xi) in the degree-2p basis.
// For the orthonormal Hermite basis the projection of exp(g0 + sum g_j xi_j)
// has the closed form nu_l(x) = exp(g0 + 0.5 sum g_j^2) prod_j
// g_j(x)^{a_j} / sqrt(a_j!); the Monte Carlo projection oracle in the test
// suite pins the (positive) sign convention.
struct LognormalViscosity {
  std::vector<Vector> coeffs;  // nu_l on Q2 nodes, l = 1..n_nu
  double mean_target = 0.0;
  double cov_target = 0.0;

  int n_nu() const { return static_cast<int>(coeffs.size()); }
  const Vector& mean_field() const { return coeffs[0]; }
};

inline LognormalViscosity lognormal_coeffs(const GaussianFieldKL& kl,
                                           const GpcBasis& basis_2p) {
  require(basis_2p.dim() == kl.m_xi(),
          "lognormal_coeffs: basis dimension must match the KL expansion");
  const int n_nodes =
      kl.modes.empty() ? 0 : static_cast<int>(kl.modes[0].size());
  require(n_nodes > 0, "lognormal_coeffs: KL expansion carries no nodal data");
  LognormalViscosity v;
  v.coeffs.assign(basis_2p.size(), Vector::Zero(n_nodes));
  for (int n = 0; n < n_nodes; ++n) {
    double s2 = 0;
    for (const auto& g : kl.modes) s2 += g(n) * g(n);
    const double base = std::exp(kl.g0 + 0.5 * s2);
    for (int l = 0; l < basis_2p.size(); ++l) {
      const MultiIndex& a = basis_2p.set.indices[l];
      double prod = 1.0;
      for (int j = 0; j < basis_2p.dim(); ++j)
        for (int i = 1; i <= a[j]; ++i) prod *= kl.modes[j](n) / std::sqrt(i);
      v.coeffs[l](n) = base * prod;
    }
  }
  return v;
}

// Calibration of (g0, sigma_g): at the spatial point maximizing the field
// variance, the lognormal mean equals nu1 and the coefficient of variation
// equals cov, using CoV = sqrt(exp(s^2)-1) with s^2 the variance there.
struct Calibration {
  double g0 = 0;
  double sigma_g = 0;
  int calibration_node = 0;
};

inline Calibration calibrate(double nu1, double cov,
                             const GaussianFieldKL& unit_kl) {
  require(nu1 > 0, "calibrate: mean viscosity must be positive");
  if (cov < 0) throw ConfigError("calibrate: CoV must be nonnegative");
  Calibration c;
  const double s2_target = std::log1p(cov * cov);
  if (cov == 0) {
    c.sigma_g = 0.0;
    c.g0 = std::log(nu1);
    return c;
  }
  // unit_kl was built with sigma_g = 1; find the variance maximizer
  double smax = -1.0;
  const int n = static_cast<int>(unit_kl.modes[0].size());
  for (int i = 0; i < n; ++i) {
    const double s = unit_kl.variance_at(i);
    if (s > smax) {
      smax = s;
      c.calibration_node = i;
    }
  }
  require(smax > 0, "calibrate: degenerate KL expansion");
  c.sigma_g = std::sqrt(s2_target / smax);
  c.g0 = std::log(nu1) - 0.5 * s2_target;
  return c;
}

// Convenience: build the calibrated field in one shot.
inline GaussianFieldKL build_calibrated_field(const Mesh& mesh, double nu1,
                                              double cov, double Lx, double Ly,
                                              int m_xi) {
  CovarianceParams unit{1.0, Lx, Ly};
  GaussianFieldKL kl = kl_expand(unit, mesh, m_xi);
  const Calibration cal = calibrate(nu1, cov, kl);
  kl.g0 = cal.g0;
  kl.sigma_g = cal.sigma_g;
  for (auto& g : kl.modes) g *= cal.sigma_g;
  for (auto& l : kl.lambdas) l *= cal.sigma_g * cal.sigma_g;
  return kl;
}

// nu(x, xi) = sum_l nu_l(x) psi_l(xi). Realizations should stay positive;
// a nonpositive value signals expansion truncation and is reported through
// the optional flag rather than an exception.
inline Vector sample_viscosity(const LognormalViscosity& visc,
                               const GpcBasis& basis_2p, const Vector& xi,
                               bool* truncation_warning = nullptr) {
  require(xi.allFinite(), "sample_viscosity: sample point must be finite");
  require(basis_2p.size() == visc.n_nu(),
          "sample_viscosity: basis size must match the expansion length");
  Vector field = Vector::Zero(visc.coeffs[0].size());
  for (int l = 0; l < visc.n_nu(); ++l)
    field += visc.coeffs[l] * basis_2p.evaluate(l, xi);
  if (truncation_warning) *truncation_warning = (field.minCoeff() <= 0.0);
  return field;
}

}  // namespace sgflow
