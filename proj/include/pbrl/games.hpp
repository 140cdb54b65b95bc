#pragma once

#include "pbrl/mdp.hpp"

namespace pbrl {

/// Two-player general-sum Markov game with a leader (player over A_l,
/// policy parameterized by softmax logits x) and a follower (player over
/// A_f). Joint-action tensors are stored with columns indexed a_l * A_f + a_f.
struct StackelbergGame {
  int n_states = 0;
  int n_actions_leader = 0;
  int n_actions_follower = 0;
  double gamma = 0.9;
  double tau = 0.0;
  Regularizer reg_leader;
  Regularizer reg_follower;
  Mat reward_leader;    // |S| x (A_l*A_f)
  Mat reward_follower;  // |S| x (A_l*A_f)
  Mat transition;       // (|S|*A_l*A_f) x |S|
  Vec initial_dist;

  void validate() const;
};

/// Parameterized two-player zero-sum Markov game. Player 1 maximizes the
/// value, player 2 minimizes it; regularization enters as
/// -tau h(pi1) + tau h(pi2). Joint columns are indexed a1 * A2 + a2.
/// Only the reward depends on x.
struct ZeroSumGame {
  int n_states = 0;
  int n_actions1 = 0;
  int n_actions2 = 0;
  double gamma = 0.9;
  double tau = 0.0;
  Regularizer regularizer;
  RewardMap reward_map;  // eval -> |S| x (A1*A2)
  Mat transition;        // (|S|*A1*A2) x |S|
  Vec initial_dist;

  void validate(const Vec& x) const;
};

struct JointPolicy {
  Policy pi1;
  Policy pi2;
};

/// E_{a2 ~ dist2}[tensor(s, a1, a2)] -> |S| x A1. `tensor` has joint columns.
Mat marginalize_second(const Mat& tensor, const Mat& dist2, int a1_count, int a2_count);
/// E_{a1 ~ dist1}[tensor(s, a1, a2)] -> |S| x A2.
Mat marginalize_first(const Mat& tensor, const Mat& dist1, int a1_count, int a2_count);
/// Same marginalizations for a joint transition tensor (|S|*A1*A2) x |S|.
Mat marginalize_transition_second(const Mat& p, const Mat& dist2, int a1_count, int a2_count);
Mat marginalize_transition_first(const Mat& p, const Mat& dist1, int a1_count, int a2_count);

/// Single-agent view of one player of a two-player game, with the opponent
/// folded into the environment. `tables.state_bonus` carries any per-state
/// reward terms contributed by the opponent (its regularizer, designer costs).
/// The view's reward is always from the viewing player's maximization
/// perspective.
struct PlayerView {
  MdpTables tables;
  double tau = 0.0;        // viewing player's own regularization weight
  Regularizer regularizer; // viewing player's own per-state h
};

/// Follower's view of a Stackelberg game at a fixed leader distribution
/// (the parametric MDP of Lemma-style reduction: r_x = E_{a_l}[r_f],
/// P_x = E_{a_l}[P], regularizer tau h_f).
PlayerView stackelberg_follower_view(const StackelbergGame& g, const Mat& leader_dist);

/// Leader's view with the follower folded in. `reward` selects which payoff
/// tensor the view accumulates (the leader's own for V_l, the follower's for
/// the score-function penalty gradients). `own_reg` toggles the leader's
/// regularizer; `follower_reg_bonus` folds -tau h_f(pi_f(s)) into the state
/// bonus (needed when the accumulated payoff is the follower's regularized
/// return).
PlayerView stackelberg_leader_view(const StackelbergGame& g, const Mat& follower_dist,
                                   const Mat& reward, bool own_reg, bool follower_reg_bonus);

/// Follower-side view that accumulates an arbitrary payoff tensor (used for
/// gradients of the leader's value w.r.t. the follower policy). `own_reg`
/// toggles tau h_f on the follower; `leader_reg_bonus` folds
/// -tau h_l(pi_x(s)) into the state bonus.
PlayerView stackelberg_follower_view_of(const StackelbergGame& g, const Mat& leader_dist,
                                        const Mat& reward, bool own_reg, bool leader_reg_bonus);

/// Single-agent MDP equivalent to a player view at fixed opponent (state
/// bonus folded into the reward, which leaves values and gradients intact).
ParamMDP view_to_mdp(const PlayerView& v, double gamma, Vec rho);

/// Player i's view of a zero-sum game from its own maximization perspective:
/// player 1 sees E_{a2}[r_x] with bonus +tau h(pi2(s)); player 2 sees
/// E_{a1}[-r_x] with bonus +tau h(pi1(s)). Both keep their own tau h.
PlayerView zs_player_view(const ZeroSumGame& g, const Mat& reward_at_x,
                          const Mat& opponent_dist, int player);

/// Exact value of a player view under its own policy.
Vec view_value(const PlayerView& v, double gamma, const Policy& own);
Mat view_q_values(const PlayerView& v, double gamma, const Policy& own);
/// Direct-parameterization gradient of the view's value w.r.t. the own policy.
Mat view_policy_gradient(const PlayerView& v, double gamma, const Policy& own, const Vec& rho);

class SplitMix64;

/// REINFORCE-with-Q estimators on a player view: trajectories truncated at
/// traj_len, Q evaluated exactly at the current policy. The direct variant
/// differentiates w.r.t. the policy table, the softmax variant w.r.t. logits.
Mat mc_view_policy_gradient(const PlayerView& v, double gamma, const Policy& own, const Vec& rho,
                            int traj_len, int batch, SplitMix64& rng);
Mat mc_view_softmax_gradient(const PlayerView& v, double gamma, const Mat& logits, const Vec& rho,
                             int traj_len, int batch, SplitMix64& rng);

}  // namespace pbrl
