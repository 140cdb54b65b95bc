#pragma once

#include <optional>

#include "pbrl/mdp.hpp"

namespace pbrl {

/// Approximately optimal lower-level policy with a certified suboptimality
/// bound. gap_is_value says whether gap_bound bounds the value gap
/// V*(rho) - V^pi(rho) (true) or the policy distance ||pi - pi*|| (false).
struct OracleCertificate {
  Policy policy_hat;
  double gap_bound = 0.0;
  bool gap_is_value = true;
  int iterations_used = 0;
  bool near_tie = false;  // brute force found another policy within 1e-9
};

struct PmdConfig {
  double eta = 0.1;
  int max_iters = 500;
  double tol = 1e-10;  // stop when the per-state argmin moves less than this
};

struct PgConfig {
  double eta = 0.1;
  int iters = 100;
};

/// Policy mirror descent with the regularizer's own mirror map. Per state,
///   pi^{i+1}(.|s) = argmin_p { -<p, Q^i(s,.)> + tau h_s(p) + (1/eta) D_h(p, pi^i; xi^i) }
/// with the auxiliary recursion xi^{i+1} = (xi^i + eta Q^i) / (1 + eta tau).
/// The per-state argmin reduces to maximizing <p, Q^i + xi^i/eta> - (tau + 1/eta) h_s(p),
/// which is closed form for every supported regularizer. Requires tau > 0.
OracleCertificate pmd_solve(const ParamMDP& mdp, const Vec& x, const PmdConfig& cfg);

/// Soft (entropy-regularized) value iteration: V <- tau logsumexp(Q/tau) - tau log|A|
/// until the sup-norm change is <= tol * (1 - gamma). NegEntropy only.
OracleCertificate soft_value_iteration(const ParamMDP& mdp, const Vec& x, double tol);

/// Exact projected policy-gradient ascent on V(rho) over the simplex product.
OracleCertificate projected_pg_solve(const ParamMDP& mdp, const Vec& x, const PgConfig& cfg);

/// Enumerates all |A|^|S| deterministic policies (tau = 0 only, capped at 1e6)
/// and returns an exact maximizer with gap_bound = 0.
OracleCertificate brute_force_optimal(const ParamMDP& mdp, const Vec& x);

/// Inner-loop solver configuration shared by the outer algorithms.
struct OracleConfig {
  enum class Kind { PMD, SoftVI, ProjectedPG, BruteForce };
  Kind kind = Kind::PMD;
  double eta = 0.1;
  int inner_iters = 1;   // T, the per-outer-iteration budget
  double tol = 1e-10;
};

/// Warm-started inner oracle: keeps the iterate (and PMD's xi recursion)
/// across outer iterations, running `inner_iters` updates per step() call.
class InnerOracle {
 public:
  explicit InnerOracle(OracleConfig cfg) : cfg_(cfg) {}

  OracleCertificate step(const ParamMDP& mdp, const Vec& x);
  /// Same, on already-materialized tables.
  OracleCertificate step_tables(const MdpTables& t, const ParamMDP& mdp);

  void reset();
  const OracleConfig& config() const { return cfg_; }
  /// Model interactions consumed so far (state-action sweeps), for the
  /// environment-step accounting of the experiment traces.
  double env_steps() const { return env_steps_; }

 private:
  OracleConfig cfg_;
  std::optional<Mat> pi_;
  std::optional<Mat> xi_;
  std::optional<Vec> v_;  // SoftVI warm value
  double env_steps_ = 0.0;
};

}  // namespace pbrl
