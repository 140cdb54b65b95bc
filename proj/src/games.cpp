#include "pbrl/games.hpp"

#include <cmath>

#include "pbrl/rng.hpp"

namespace pbrl {

namespace {
void check_transition_rows(const Mat& p) {
  for (int row = 0; row < p.rows(); ++row) {
    require(p.row(row).minCoeff() >= 0.0, "transition row has a negative entry");
    require(std::abs(p.row(row).sum() - 1.0) <= 1e-12, "transition row does not sum to 1");
  }
}
}  // namespace

void StackelbergGame::validate() const {
  require(n_states > 0 && n_actions_leader > 0 && n_actions_follower > 0,
          "game sizes must be positive");
  require(gamma >= 0.0 && gamma < 1.0, "gamma must lie in [0, 1)");
  const int ja = n_actions_leader * n_actions_follower;
  require(reward_leader.rows() == n_states && reward_leader.cols() == ja,
          "leader reward shape mismatch");
  require(reward_follower.rows() == n_states && reward_follower.cols() == ja,
          "follower reward shape mismatch");
  require(reward_leader.allFinite() && reward_follower.allFinite(),
          "reward tensors must be finite");
  require(transition.rows() == n_states * ja && transition.cols() == n_states,
          "transition shape mismatch");
  check_transition_rows(transition);
  require(int(initial_dist.size()) == n_states && initial_dist.minCoeff() > 0.0 &&
              std::abs(initial_dist.sum() - 1.0) <= 1e-12,
          "initial distribution must be positive and sum to 1");
}

void ZeroSumGame::validate(const Vec& x) const {
  require(n_states > 0 && n_actions1 > 0 && n_actions2 > 0, "game sizes must be positive");
  require(gamma >= 0.0 && gamma < 1.0, "gamma must lie in [0, 1)");
  const int ja = n_actions1 * n_actions2;
  Mat r = reward_map.eval(x);
  require(r.rows() == n_states && r.cols() == ja, "reward shape mismatch");
  require(r.allFinite(), "reward tensor must be finite");
  require(transition.rows() == n_states * ja && transition.cols() == n_states,
          "transition shape mismatch");
  check_transition_rows(transition);
  require(int(initial_dist.size()) == n_states && initial_dist.minCoeff() > 0.0 &&
              std::abs(initial_dist.sum() - 1.0) <= 1e-12,
          "initial distribution must be positive and sum to 1");
  if (tau > 0.0 && regularizer.kind == Regularizer::Kind::None)
    throw ConfigError("tau > 0 requires a regularizer");
}

Mat marginalize_second(const Mat& tensor, const Mat& dist2, int a1_count, int a2_count) {
  const int S = int(tensor.rows());
  Mat out = Mat::Zero(S, a1_count);
  for (int s = 0; s < S; ++s)
    for (int a1 = 0; a1 < a1_count; ++a1)
      for (int a2 = 0; a2 < a2_count; ++a2)
        out(s, a1) += dist2(s, a2) * tensor(s, a1 * a2_count + a2);
  return out;
}

Mat marginalize_first(const Mat& tensor, const Mat& dist1, int a1_count, int a2_count) {
  const int S = int(tensor.rows());
  Mat out = Mat::Zero(S, a2_count);
  for (int s = 0; s < S; ++s)
    for (int a1 = 0; a1 < a1_count; ++a1)
      for (int a2 = 0; a2 < a2_count; ++a2)
        out(s, a2) += dist1(s, a1) * tensor(s, a1 * a2_count + a2);
  return out;
}

Mat marginalize_transition_second(const Mat& p, const Mat& dist2, int a1_count, int a2_count) {
  const int S = int(p.cols());
  Mat out = Mat::Zero(S * a1_count, S);
  for (int s = 0; s < S; ++s)
    for (int a1 = 0; a1 < a1_count; ++a1)
      for (int a2 = 0; a2 < a2_count; ++a2)
        out.row(s * a1_count + a1) +=
            dist2(s, a2) * p.row((s * a1_count + a1) * a2_count + a2);
  return out;
}

Mat marginalize_transition_first(const Mat& p, const Mat& dist1, int a1_count, int a2_count) {
  const int S = int(p.cols());
  Mat out = Mat::Zero(S * a2_count, S);
  for (int s = 0; s < S; ++s)
    for (int a2 = 0; a2 < a2_count; ++a2)
      for (int a1 = 0; a1 < a1_count; ++a1)
        out.row(s * a2_count + a2) +=
            dist1(s, a1) * p.row((s * a1_count + a1) * a2_count + a2);
  return out;
}

PlayerView stackelberg_follower_view(const StackelbergGame& g, const Mat& leader_dist) {
  PlayerView v;
  v.tables.reward = marginalize_first(g.reward_follower, leader_dist, g.n_actions_leader,
                                      g.n_actions_follower);
  v.tables.transition = marginalize_transition_first(g.transition, leader_dist,
                                                     g.n_actions_leader, g.n_actions_follower);
  v.tables.state_bonus = Vec::Zero(g.n_states);
  v.tau = g.tau;
  v.regularizer = g.reg_follower;
  return v;
}

PlayerView stackelberg_leader_view(const StackelbergGame& g, const Mat& follower_dist,
                                   const Mat& reward, bool own_reg, bool follower_reg_bonus) {
  PlayerView v;
  v.tables.reward =
      marginalize_second(reward, follower_dist, g.n_actions_leader, g.n_actions_follower);
  v.tables.transition = marginalize_transition_second(g.transition, follower_dist,
                                                      g.n_actions_leader, g.n_actions_follower);
  v.tables.state_bonus = Vec::Zero(g.n_states);
  if (follower_reg_bonus && g.tau != 0.0)
    for (int s = 0; s < g.n_states; ++s)
      v.tables.state_bonus[s] = -g.tau * g.reg_follower.value(s, follower_dist.row(s));
  v.tau = own_reg ? g.tau : 0.0;
  v.regularizer = own_reg ? g.reg_leader : make_none();
  return v;
}

PlayerView stackelberg_follower_view_of(const StackelbergGame& g, const Mat& leader_dist,
                                        const Mat& reward, bool own_reg, bool leader_reg_bonus) {
  PlayerView v;
  v.tables.reward =
      marginalize_first(reward, leader_dist, g.n_actions_leader, g.n_actions_follower);
  v.tables.transition = marginalize_transition_first(g.transition, leader_dist,
                                                     g.n_actions_leader, g.n_actions_follower);
  v.tables.state_bonus = Vec::Zero(g.n_states);
  if (leader_reg_bonus && g.tau != 0.0)
    for (int s = 0; s < g.n_states; ++s)
      v.tables.state_bonus[s] = -g.tau * g.reg_leader.value(s, leader_dist.row(s));
  v.tau = own_reg ? g.tau : 0.0;
  v.regularizer = own_reg ? g.reg_follower : make_none();
  return v;
}

ParamMDP view_to_mdp(const PlayerView& v, double gamma, Vec rho) {
  ParamMDP mdp;
  mdp.n_states = int(v.tables.reward.rows());
  mdp.n_actions = int(v.tables.reward.cols());
  mdp.gamma = gamma;
  mdp.tau = v.tau;
  mdp.regularizer = v.regularizer;
  Mat r = v.tables.reward;
  r.colwise() += v.tables.state_bonus;
  mdp.reward_map = fixed_reward(std::move(r));
  mdp.transition_map = fixed_transition(v.tables.transition);
  mdp.initial_dist = std::move(rho);
  return mdp;
}

PlayerView zs_player_view(const ZeroSumGame& g, const Mat& reward_at_x,
                          const Mat& opponent_dist, int player) {
  require(player == 1 || player == 2, "player must be 1 or 2");
  PlayerView v;
  if (player == 1) {
    v.tables.reward =
        marginalize_second(reward_at_x, opponent_dist, g.n_actions1, g.n_actions2);
    v.tables.transition =
        marginalize_transition_second(g.transition, opponent_dist, g.n_actions1, g.n_actions2);
  } else {
    v.tables.reward =
        -marginalize_first(reward_at_x, opponent_dist, g.n_actions1, g.n_actions2);
    v.tables.transition =
        marginalize_transition_first(g.transition, opponent_dist, g.n_actions1, g.n_actions2);
  }
  v.tables.state_bonus = Vec::Zero(g.n_states);
  if (g.tau != 0.0)
    for (int s = 0; s < g.n_states; ++s)
      v.tables.state_bonus[s] = g.tau * g.regularizer.value(s, opponent_dist.row(s));
  v.tau = g.tau;
  v.regularizer = g.regularizer;
  return v;
}

Vec view_value(const PlayerView& v, double gamma, const Policy& own) {
  return exact::value(v.tables, gamma, v.tau, v.regularizer, own);
}

Mat view_q_values(const PlayerView& v, double gamma, const Policy& own) {
  return exact::q_values(v.tables, gamma, view_value(v, gamma, own));
}

Mat view_policy_gradient(const PlayerView& v, double gamma, const Policy& own, const Vec& rho) {
  return exact::policy_gradient(v.tables, gamma, v.tau, v.regularizer, own, rho);
}

Mat mc_view_policy_gradient(const PlayerView& view, double gamma, const Policy& pi,
                            const Vec& rho, int traj_len, int batch, SplitMix64& rng) {
  const int S = int(view.tables.reward.rows()), A = int(view.tables.reward.cols());
  const Mat dist = pi.distribution();
  const Mat q = view_q_values(view, gamma, pi);
  Mat grad = Mat::Zero(S, A);
  for (int b = 0; b < batch; ++b) {
    int s = rng.next_categorical(rho);
    double disc = 1.0;
    for (int step = 0; step < traj_len; ++step) {
      int a = rng.next_categorical(Vec(dist.row(s)));
      // Score of the direct parameterization is the indicator over pi(a|s);
      // the regularizer term is deterministic given the visited state.
      grad(s, a) += disc * q(s, a) / dist(s, a);
      if (view.tau != 0.0)
        grad.row(s) -= disc * view.tau * view.regularizer.grad(s, dist.row(s)).transpose();
      disc *= gamma;
      s = rng.next_categorical(Vec(view.tables.transition.row(s * A + a)));
      if (disc == 0.0) break;
    }
  }
  return grad / double(batch);
}

Mat mc_view_softmax_gradient(const PlayerView& view, double gamma, const Mat& logits,
                             const Vec& rho, int traj_len, int batch, SplitMix64& rng) {
  const int S = int(view.tables.reward.rows()), A = int(view.tables.reward.cols());
  const Mat dist = softmax_materialize(logits);
  const Mat q = view_q_values(view, gamma, Policy::direct(dist));
  Mat grad = Mat::Zero(S, A);
  for (int b = 0; b < batch; ++b) {
    int s = rng.next_categorical(rho);
    double disc = 1.0;
    for (int step = 0; step < traj_len; ++step) {
      int a = rng.next_categorical(Vec(dist.row(s)));
      // Softmax score is e_a - pi(.|s); the own regularizer contributes its
      // softmax-chained gradient at the visited state.
      grad.row(s) -= disc * q(s, a) * dist.row(s);
      grad(s, a) += disc * q(s, a);
      if (view.tau != 0.0) {
        Vec h_grad = view.regularizer.grad(s, dist.row(s));
        double inner = dist.row(s).dot(h_grad);
        grad.row(s) -= disc * view.tau *
                       (dist.row(s).array() * (h_grad.transpose().array() - inner)).matrix();
      }
      disc *= gamma;
      s = rng.next_categorical(Vec(view.tables.transition.row(s * A + a)));
      if (disc == 0.0) break;
    }
  }
  return grad / double(batch);
}

}  // namespace pbrl
