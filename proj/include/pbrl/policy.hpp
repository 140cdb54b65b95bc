#pragma once

#include <cstdint>
#include <vector>

#include "pbrl/types.hpp"

namespace pbrl {

struct ParamMDP;

enum class ParamKind { Direct, Softmax };

/// Tabular policy. Direct holds the row-stochastic matrix itself (y = pi);
/// Softmax holds per-state logits.
struct Policy {
  ParamKind kind = ParamKind::Direct;
  Mat table;  // |S| x |A|

  int n_states() const { return int(table.rows()); }
  int n_actions() const { return int(table.cols()); }

  /// Row-stochastic action distributions (identity for Direct).
  Mat distribution() const;
  Vec distribution_row(int state) const;

  /// Throws ValidationError unless rows are finite and (for Direct) on the
  /// simplex within 1e-12.
  void validate() const;

  static Policy direct(Mat rows);
  static Policy softmax(Mat logits);
  static Policy uniform(int n_states, int n_actions);
};

/// Row-major flatten / unflatten (index s * cols + a).
Vec flatten_rows(const Mat& m);
Mat unflatten_rows(const Vec& v, int rows, int cols);

/// Euclidean projection onto the probability simplex (sort-based O(n log n)).
/// Output satisfies the KKT form out_i = max(v_i - theta, 0), sums to 1.
Vec project_simplex(const Vec& v);

/// Row-wise simplex projection of a policy table.
Mat project_simplex_rows(const Mat& m);

/// Max-subtracted row-wise softmax.
Mat softmax_materialize(const Mat& logits);
Vec softmax_row(const Vec& logits);

/// Pulls a gradient w.r.t. the materialized distribution back to the logits:
/// grad_logits(s,a) = pi(s,a) * (g(s,a) - sum_b pi(s,b) g(s,b)).
Mat softmax_chain_gradient(const Mat& logits, const Mat& grad_wrt_pi);

/// One sampled rollout of fixed length.
struct Trajectory {
  std::vector<int> states;
  std::vector<int> actions;
  std::vector<double> rewards;
};

struct McConfig {
  int traj_len = 5;
  int batch = 16;
  uint64_t rng_seed = 0;
};

/// REINFORCE-with-Q estimate of the direct-parameterization policy gradient,
/// truncated at traj_len. Q is evaluated exactly at the current policy, so
/// the estimator's mean is the exact gradient with the visitation sum
/// truncated at traj_len; the truncation bias is bounded by
/// gamma^traj_len * V_max / (1 - gamma). Deterministic given rng_seed.
Mat mc_policy_gradient(const ParamMDP& mdp, const Vec& x, const Policy& pi,
                       const McConfig& cfg);

}  // namespace pbrl
