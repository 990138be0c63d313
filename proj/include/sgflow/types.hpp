#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <stdexcept>
#include <string>

namespace sgflow {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Compressed row storage throughout: Eigen's RowMajor sparse matrix in
// compressed mode is CRS (outer offsets = row pointers, sorted unique
// column indices per row).
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using SparseMatrixCol = Eigen::SparseMatrix<double, Eigen::ColMajor>;
using Triplet = Eigen::Triplet<double>;

struct ContractViolation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct GeometryError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractViolation(msg);
}

}  // namespace sgflow
