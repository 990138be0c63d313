#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <vector>

#include "sgflow/types.hpp"

namespace sgflow {

struct QuadRule1d {
  std::vector<double> points;
  std::vector<double> weights;
  int size() const { return static_cast<int>(points.size()); }
};

// Gauss-Legendre on [-1,1]. Hardcoded up to 5 points (exact to degree 9),
// which covers every integrand assembled here.
inline QuadRule1d gauss_legendre(int n) {
  QuadRule1d q;
  switch (n) {
    case 1:
      q.points = {0.0};
      q.weights = {2.0};
      break;
    case 2: {
      const double a = 1.0 / std::sqrt(3.0);
      q.points = {-a, a};
      q.weights = {1.0, 1.0};
      break;
    }
    case 3: {
      const double a = std::sqrt(0.6);
      q.points = {-a, 0.0, a};
      q.weights = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
      break;
    }
    case 4: {
      const double a = std::sqrt(3.0 / 7.0 - 2.0 / 7.0 * std::sqrt(1.2));
      const double b = std::sqrt(3.0 / 7.0 + 2.0 / 7.0 * std::sqrt(1.2));
      const double wa = 0.5 + std::sqrt(30.0) / 36.0;
      const double wb = 0.5 - std::sqrt(30.0) / 36.0;
      q.points = {-b, -a, a, b};
      q.weights = {wb, wa, wa, wb};
      break;
    }
    case 5: {
      const double a = std::sqrt(5.0 - 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
      const double b = std::sqrt(5.0 + 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
      const double wa = (322.0 + 13.0 * std::sqrt(70.0)) / 900.0;
      const double wb = (322.0 - 13.0 * std::sqrt(70.0)) / 900.0;
      q.points = {-b, -a, 0.0, a, b};
      q.weights = {wb, wa, 128.0 / 225.0, wa, wb};
      break;
    }
    default:
      throw ContractViolation("gauss_legendre: unsupported point count " +
                              std::to_string(n));
  }
  return q;
}

// Gauss-Hermite for the standard Gaussian weight exp(-x^2/2)/sqrt(2*pi)
// (probabilists' convention), via Golub-Welsch on the He recurrence.
// Weights sum to 1; exact for polynomials of degree <= 2n-1.
inline QuadRule1d gauss_hermite(int n) {
  require(n >= 1, "gauss_hermite: need at least one point");
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double b = std::sqrt(static_cast<double>(i));
    J(i, i - 1) = b;
    J(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  QuadRule1d q;
  q.points.resize(n);
  q.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    q.points[i] = es.eigenvalues()(i);
    const double v = es.eigenvectors()(0, i);
    q.weights[i] = v * v;
  }
  return q;
}

}  // namespace sgflow
