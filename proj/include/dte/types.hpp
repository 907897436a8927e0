#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace dte {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;

using NodeId = int;
using EdgeId = int;

// Thrown on malformed inputs (files, configs, inconsistent instances).
struct InputError : std::runtime_error {
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when a solver is invoked with stale derived state (e.g. a null-space
// factorization that predates a topology mutation).
struct StaleStateError : std::runtime_error {
  explicit StaleStateError(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace dte
