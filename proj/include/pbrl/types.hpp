#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace pbrl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Invalid data passed to an operation (non-stochastic rows, NaNs, shape
/// mismatches).
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A configuration that can never work (e.g. regularizer None with tau > 0).
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// The requested computation needs structure the inputs do not have
/// (e.g. an x-gradient through an x-dependent transition without a
/// score-function form).
struct UnsupportedStructureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The lower-level oracle returned a policy inconsistent with its certified
/// gap (a penalty came out more negative than the certificate allows).
struct OracleFailureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

}  // namespace pbrl
