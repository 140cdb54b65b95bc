#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pbrl/penalty.hpp"

namespace pbrl {

/// Bilevel problem instance: upper objective f, x-parameterized lower-level
/// MDP, the gradient structure of the x-dependence, and the feasible set of x
/// (box or unconstrained; y always lives on the simplex product).
struct BilevelProblem {
  ParamMDP lower;
  UpperObjective upper;
  Vec x0;
  std::shared_ptr<const StackelbergGame> game;  // set for Stackelberg structure
  std::optional<std::pair<Vec, Vec>> x_bounds;  // elementwise lower/upper

  GradStructure structure() const {
    return game ? GradStructure::stackelberg(*game) : GradStructure::reward_only();
  }
  Vec project_x(Vec x) const {
    if (x_bounds)
      x = x.cwiseMax(x_bounds->first).cwiseMin(x_bounds->second);
    return x;
  }
};

enum class GradMode { Exact, MonteCarlo };

struct PBRLConfig {
  PenaltyKind penalty = PenaltyKind::Value;
  double lambda = 2.0;
  double alpha = 0.1;
  int outer_iters = 100;
  OracleConfig oracle;
  GradMode grad_mode = GradMode::Exact;
  int traj_len = 5;
  int batch = 16;
  uint64_t seed = 0;
  double divergence_guard = 1e12;
  /// Tight-oracle tolerance for the follower-gap metric column.
  double metric_tol = 1e-8;
  /// Also evaluate the exact projected gradient per iteration (tight oracle;
  /// slow, meant for convergence studies).
  bool record_exact_pg = false;
  /// Optional per-iteration application metric, stored in TraceRow::extra.
  std::string extra_name = "none";
  std::function<double(int k, const Vec& x, const Policy& y)> extra_metric;
};

struct TraceRow {
  int k = 0;
  double f = 0.0;
  double p = 0.0;
  double F = 0.0;
  double grad_norm_sq = 0.0;  // ||(z_{k+1} - z_k) / alpha||^2 movement surrogate
  double exact_pg_norm_sq = std::numeric_limits<double>::quiet_NaN();
  double follower_gap = 0.0;
  double oracle_gap = 0.0;
  double env_steps = 0.0;
  double wall_time = 0.0;
  double extra = 0.0;  // application metric (see RunTrace::extra_name)
};

struct RunTrace {
  std::string experiment;
  std::string algorithm;
  std::string steps_formula;
  std::string extra_name = "none";
  uint64_t seed = 0;
  uint64_t config_hash = 0;
  bool diverged = false;
  std::vector<TraceRow> rows;
  double avg_grad_norm_sq = 0.0;
  double min_follower_gap = std::numeric_limits<double>::infinity();

  void finalize_summary();
  /// Hash over every deterministic column (wall_time excluded).
  uint64_t fingerprint() const;
};

/// Iterates diverged past the guard; carries the partial trace.
struct DivergenceError : std::runtime_error {
  RunTrace trace;
  explicit DivergenceError(RunTrace t)
      : std::runtime_error("penalized objective diverged"), trace(std::move(t)) {}
};

/// Algorithm-1 loop: per iteration, advance the warm-started inner oracle,
/// build the inexact penalized gradient from its policy, and take one joint
/// projected step on (x, y). Deterministic given cfg.seed.
RunTrace pbrl_run(const BilevelProblem& problem, const PBRLConfig& cfg);

/// Exact squared projected-gradient norm ||(z - Proj(z - alpha grad F))/alpha||^2
/// at (x, pi), with the penalty gradient computed against a tight oracle.
double projected_grad_norm(const BilevelProblem& problem, const PBRLConfig& cfg, const Vec& x,
                           const Policy& pi);

/// Independent policy gradient baseline on a Stackelberg game: leader and
/// follower each ascend their own value simultaneously.
RunTrace independent_pg_run(const StackelbergGame& game, const PBRLConfig& cfg);

/// Tight lower-level solve used for metric columns; picks soft value
/// iteration for entropy-regularized problems and brute force at tau = 0.
OracleCertificate tight_oracle(const ParamMDP& mdp, const Vec& x, double tol);

}  // namespace pbrl
