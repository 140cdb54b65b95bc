#pragma once

#include <functional>

#include "pbrl/policy.hpp"
#include "pbrl/regularizer.hpp"
#include "pbrl/types.hpp"

namespace pbrl {

/// Differentiable map x -> reward table. The only gradient access pattern is
/// the dense Jacobian (row s*|A|+a, column j = d r(s,a) / d x_j), which is
/// all the desk-scale problems here need.
struct RewardMap {
  int dim_x = 0;
  std::function<Mat(const Vec&)> eval;      // -> |S| x |A|
  std::function<Mat(const Vec&)> jacobian;  // -> (|S|*|A|) x dim_x, empty fn if constant
};

/// Map x -> transition tensor, stored as a (|S|*|A|) x |S| matrix with row
/// s*|A|+a holding P(.|s,a). A general transition Jacobian is unsupported;
/// x-dependent transitions are only differentiated through the Stackelberg
/// score-function path.
struct TransitionMap {
  bool depends_on_x = false;
  std::function<Mat(const Vec&)> eval;  // -> (|S|*|A|) x |S|
};

RewardMap fixed_reward(Mat r);
/// r_x(s,a) = x[s*|A|+a] (identity table map).
RewardMap table_reward(int n_states, int n_actions);
/// r_x = base + scale * sigmoid(x) entrywise, x one entry per (s,a).
RewardMap sigmoid_incentive_reward(Mat base, double scale);
TransitionMap fixed_transition(Mat p);

/// Tabular regularized MDP whose reward (and possibly transition) depend on
/// an upper-level parameter x.
struct ParamMDP {
  int n_states = 0;
  int n_actions = 0;
  double gamma = 0.9;
  double tau = 0.0;
  Regularizer regularizer;
  RewardMap reward_map;
  TransitionMap transition_map;
  Vec initial_dist;

  /// Checks stochastic transitions, positive initial distribution, gamma < 1,
  /// and that tau > 0 has a non-None regularizer. Uses x only to materialize
  /// the tensors being checked.
  void validate(const Vec& x) const;
};

/// Materialized (r, P) pair at a fixed x, plus an optional per-state reward
/// bonus b(s) added to every action's reward. The bonus is how opponent
/// regularization terms enter marginalized game views.
struct MdpTables {
  Mat reward;      // |S| x |A|
  Mat transition;  // (|S|*|A|) x |S|
  Vec state_bonus; // |S|, zero when unused
};

MdpTables materialize(const ParamMDP& mdp, const Vec& x);

// Exact solvers on materialized tables. `tau_sign` lets a caller flip the
// regularizer's sign (+1 normal); a marginalized two-player view needs -1
// when the regularized player is the opponent.
namespace exact {

Vec value(const MdpTables& t, double gamma, double tau, const Regularizer& reg,
          const Policy& pi, double tau_sign = 1.0);
Mat q_values(const MdpTables& t, double gamma, const Vec& v);
Vec visitation(const MdpTables& t, double gamma, const Policy& pi, const Vec& start);

/// Direct-parameterization policy gradient
///   grad(s,a) = d(s)/(1-gamma) * (Q(s,a) - tau_sign * tau * [grad h_s(pi(s))]_a).
Mat policy_gradient(const MdpTables& t, double gamma, double tau, const Regularizer& reg,
                    const Policy& pi, const Vec& rho, double tau_sign = 1.0);

}  // namespace exact

/// V with (I - gamma P^pi) V = r^pi - tau h^pi solved by dense LU; residual
/// is checked against 1e-10.
Vec evaluate_value_exact(const ParamMDP& mdp, const Vec& x, const Policy& pi);
double evaluate_value_exact_rho(const ParamMDP& mdp, const Vec& x, const Policy& pi);

/// Q(s,a) = r_x(s,a) + gamma E_{s'}[V(s')].
Mat evaluate_q_exact(const ParamMDP& mdp, const Vec& x, const Policy& pi);

/// Discounted visitation d = (1-gamma) (I - gamma (P^pi)^T)^{-1} start.
Vec visitation_distribution(const ParamMDP& mdp, const Vec& x, const Policy& pi,
                            const Vec& start);

/// Exact direct-parameterization gradient of V(rho) w.r.t. the policy table.
/// Rejects softmax policies; chain through softmax_chain_gradient instead.
Mat policy_gradient_exact(const ParamMDP& mdp, const Vec& x, const Policy& pi);

/// Exact gradient of V(rho) w.r.t. x for reward-only x-dependence:
/// sum_{s,a} d(s)/(1-gamma) pi(a|s) grad_x r_x(s,a).
Vec value_gradient_x_exact(const ParamMDP& mdp, const Vec& x, const Policy& pi);

}  // namespace pbrl
