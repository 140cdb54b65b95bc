#include "pbrl/penalty.hpp"

#include <cmath>

namespace pbrl {

namespace {

// Per-state minimizer of <p, q> + tau h_s(p) over the simplex, via the
// closed-form regularized argmax of -q.
Vec per_state_g_argmin(const Regularizer& reg, int state, const Vec& q, double tau) {
  switch (reg.kind) {
    case Regularizer::Kind::NegEntropy:
      return softmax_row(-q / tau);
    case Regularizer::Kind::KLToReference: {
      Vec z = -q / tau;
      double m = z.maxCoeff();
      Vec p(q.size());
      for (int a = 0; a < q.size(); ++a)
        p[a] = std::max(reg.reference(state, a), 1e-12) * std::exp(z[a] - m);
      return p / p.sum();
    }
    case Regularizer::Kind::SquaredL2:
      return project_simplex(-q / tau);
    case Regularizer::Kind::None:
      break;
  }
  throw ConfigError("Bellman penalty needs a strongly convex regularizer");
}

// Visitation matrix D with D(s0, s) = d_{s0}(s), all start states at once.
Mat visitation_all_starts(const MdpTables& t, double gamma, const Mat& dist) {
  const int S = int(t.reward.rows()), A = int(t.reward.cols());
  Mat p_pi = Mat::Zero(S, S);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) p_pi.row(s) += dist(s, a) * t.transition.row(s * A + a);
  Mat lhs = Mat::Identity(S, S) - gamma * p_pi;
  // D^T solves (I - gamma P^T) D^T = (1-gamma) I, i.e. D = (1-gamma)(I - gamma P)^{-1}.
  return (1.0 - gamma) * lhs.partialPivLu().solve(Mat::Identity(S, S));
}

// d Q^{pi}(s,a) / dx for all (s,a), stacked (S*A) x dim_x, reward-only case.
Mat q_x_jacobian_reward_only(const ParamMDP& mdp, const Vec& x, const Policy& pi) {
  if (mdp.transition_map.depends_on_x)
    throw UnsupportedStructureError(
        "reward-only x-gradient requested on an x-dependent transition");
  const int S = mdp.n_states, A = mdp.n_actions;
  if (!mdp.reward_map.jacobian) return Mat::Zero(S * A, std::max(mdp.reward_map.dim_x, 0));
  MdpTables t = materialize(mdp, x);
  Mat jr = mdp.reward_map.jacobian(x);  // (S*A) x dim_x
  Mat vjac = value_x_jacobian_reward_only(mdp, x, pi);  // S x dim_x
  Mat out = jr;
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a)
      out.row(s * A + a) += mdp.gamma * t.transition.row(s * A + a) * vjac;
  return out;
}

// Score-function x-jacobian of V^{pi_x, follower}(s0) for every start state,
// S x (S*A_l) with x flattened s*A_l + a_l.
Mat stackelberg_value_x_jacobian(const StackelbergGame& g, const Mat& leader_dist,
                                 const Mat& follower_dist) {
  const int S = g.n_states, Al = g.n_actions_leader;
  PlayerView view = stackelberg_leader_view(g, follower_dist, g.reward_follower, false, true);
  Mat q = view_q_values(view, g.gamma, Policy::direct(leader_dist));
  Mat d_all = visitation_all_starts(view.tables, g.gamma, leader_dist);  // S x S

  Mat out = Mat::Zero(S, S * Al);
  for (int s0 = 0; s0 < S; ++s0)
    for (int s = 0; s < S; ++s) {
      double w = d_all(s0, s) / (1.0 - g.gamma);
      if (w == 0.0) continue;
      double baseline = leader_dist.row(s).dot(q.row(s));
      for (int b = 0; b < Al; ++b)
        out(s0, s * Al + b) += w * leader_dist(s, b) * (q(s, b) - baseline);
    }
  return out;
}

}  // namespace

Mat value_x_jacobian_reward_only(const ParamMDP& mdp, const Vec& x, const Policy& pi) {
  if (mdp.transition_map.depends_on_x)
    throw UnsupportedStructureError(
        "reward-only x-gradient requested on an x-dependent transition");
  const int S = mdp.n_states, A = mdp.n_actions;
  if (!mdp.reward_map.jacobian) return Mat::Zero(S, std::max(mdp.reward_map.dim_x, 0));
  MdpTables t = materialize(mdp, x);
  const Mat dist = pi.distribution();
  Mat d_all = visitation_all_starts(t, mdp.gamma, dist);  // S x S
  Mat jr = mdp.reward_map.jacobian(x);                    // (S*A) x dim_x

  // weights(s0, s*A+a) = d_{s0}(s) pi(a|s) / (1-gamma)
  Mat weights(S, S * A);
  for (int s0 = 0; s0 < S; ++s0)
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a)
        weights(s0, s * A + a) = d_all(s0, s) * dist(s, a) / (1.0 - mdp.gamma);
  return weights * jr;
}

Mat value_x_jacobian_stackelberg(const StackelbergGame& g, const Vec& leader_logits,
                                 const Policy& follower) {
  const int S = g.n_states, Al = g.n_actions_leader;
  require(int(leader_logits.size()) == S * Al, "leader logits have wrong size");
  Mat logits = unflatten_rows(leader_logits, S, Al);
  return stackelberg_value_x_jacobian(g, softmax_materialize(logits), follower.distribution());
}

double value_penalty_eval(const ParamMDP& mdp, const Vec& x, const Policy& pi,
                          const OracleCertificate& oracle) {
  MdpTables t = materialize(mdp, x);
  double v_pi = mdp.initial_dist.dot(
      exact::value(t, mdp.gamma, mdp.tau, mdp.regularizer, pi));
  double v_hat = mdp.initial_dist.dot(
      exact::value(t, mdp.gamma, mdp.tau, mdp.regularizer, oracle.policy_hat));
  double p = v_hat - v_pi;
  if (p < -(oracle.gap_bound + 1e-8))
    throw OracleFailureError("value penalty is negative beyond the oracle's certified gap");
  return std::max(p, 0.0);
}

PenaltyGrads value_penalty_grad(const ParamMDP& mdp, const Vec& x, const Policy& pi,
                                const OracleCertificate& oracle,
                                const GradStructure& structure) {
  PenaltyGrads g;
  g.grad_y = -policy_gradient_exact(mdp, x, pi);

  switch (structure.kind) {
    case GradStructure::Kind::RewardOnly: {
      Mat j_pi = value_x_jacobian_reward_only(mdp, x, pi);
      Mat j_hat = value_x_jacobian_reward_only(mdp, x, oracle.policy_hat);
      g.grad_x = (j_hat - j_pi).transpose() * mdp.initial_dist;
      return g;
    }
    case GradStructure::Kind::Stackelberg: {
      require(structure.game != nullptr, "Stackelberg structure needs the game");
      Mat j_pi = value_x_jacobian_stackelberg(*structure.game, x, pi);
      Mat j_hat = value_x_jacobian_stackelberg(*structure.game, x, oracle.policy_hat);
      g.grad_x = (j_hat - j_pi).transpose() * mdp.initial_dist;
      return g;
    }
  }
  throw UnsupportedStructureError("unknown gradient structure");
}

double bellman_penalty_eval(const ParamMDP& mdp, const Vec& x, const Policy& pi,
                            const OracleCertificate& oracle) {
  if (mdp.tau <= 0.0)
    throw ConfigError("Bellman penalty requires tau > 0");
  if (pi.kind != ParamKind::Direct)
    throw UnsupportedStructureError("Bellman penalty requires a direct policy");
  const int S = mdp.n_states;
  Mat q_star = evaluate_q_exact(mdp, x, oracle.policy_hat);

  double g = 0.0, v = 0.0;
  for (int s = 0; s < S; ++s) {
    Vec q_s = -q_star.row(s).transpose();
    Vec y_s = pi.table.row(s);
    g += mdp.initial_dist[s] *
         (y_s.dot(q_s) + mdp.tau * mdp.regularizer.value(s, y_s));
    Vec p_s = per_state_g_argmin(mdp.regularizer, s, q_s, mdp.tau);
    v += mdp.initial_dist[s] *
         (p_s.dot(q_s) + mdp.tau * mdp.regularizer.value(s, p_s));
  }
  double p = g - v;
  if (p < -(oracle.gap_bound + 1e-8))
    throw OracleFailureError("Bellman penalty is negative beyond the oracle's certified gap");
  return std::max(p, 0.0);
}

PenaltyGrads bellman_penalty_grad(const ParamMDP& mdp, const Vec& x, const Policy& pi,
                                  const OracleCertificate& oracle,
                                  const GradStructure& structure) {
  if (mdp.tau <= 0.0)
    throw ConfigError("Bellman penalty requires tau > 0");
  if (pi.kind != ParamKind::Direct)
    throw UnsupportedStructureError("Bellman penalty requires a direct policy");
  const int S = mdp.n_states, A = mdp.n_actions;
  const Policy& pi_star = oracle.policy_hat;
  Mat q_star = evaluate_q_exact(mdp, x, pi_star);

  PenaltyGrads g;
  g.grad_y = Mat::Zero(S, A);
  for (int s = 0; s < S; ++s) {
    Vec q_s = -q_star.row(s).transpose();
    g.grad_y.row(s) =
        mdp.initial_dist[s] *
        (q_s + mdp.tau * mdp.regularizer.grad(s, pi.table.row(s))).transpose();
  }

  // grad_x = E_{s~rho}[ sum_a (pi*(a|s) - pi(a|s)) dQ^{pi*}(s,a)/dx ].
  Vec weights(S * A);
  const Mat dist_pi = pi.distribution();
  const Mat dist_star = pi_star.distribution();
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a)
      weights[s * A + a] = mdp.initial_dist[s] * (dist_star(s, a) - dist_pi(s, a));

  switch (structure.kind) {
    case GradStructure::Kind::RewardOnly: {
      Mat qjac = q_x_jacobian_reward_only(mdp, x, pi_star);
      g.grad_x = qjac.transpose() * weights;
      return g;
    }
    case GradStructure::Kind::Stackelberg: {
      require(structure.game != nullptr, "Stackelberg structure needs the game");
      const StackelbergGame& game = *structure.game;
      const int Al = game.n_actions_leader, Af = game.n_actions_follower;
      require(A == Af, "follower MDP is inconsistent with the game");
      Mat leader_dist = softmax_materialize(unflatten_rows(x, S, Al));

      MdpTables t = materialize(mdp, x);
      Vec v_star = exact::value(t, mdp.gamma, mdp.tau, mdp.regularizer, pi_star);
      Mat vjac = stackelberg_value_x_jacobian(game, leader_dist, dist_star);  // S x S*Al

      // dQ(s,a_f)/dx = d r_x/dx + gamma [dP_x/dx] V* + gamma P_x dV*/dx,
      // with d r_x/dx and dP_x/dx given by the softmax score at state s.
      Mat qjac = Mat::Zero(S * Af, S * Al);
      for (int s = 0; s < S; ++s) {
        for (int af = 0; af < Af; ++af) {
          Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(S * Al);
          // r_x and P_x only involve the leader's policy at this state.
          double r_mean = 0.0;
          Vec p_mean = Vec::Zero(S);
          for (int al = 0; al < Al; ++al) {
            r_mean += leader_dist(s, al) * game.reward_follower(s, al * Af + af);
            p_mean += leader_dist(s, al) * game.transition.row((s * Al + al) * Af + af).transpose();
          }
          for (int b = 0; b < Al; ++b) {
            double dr = leader_dist(s, b) * (game.reward_follower(s, b * Af + af) - r_mean);
            double dpv = leader_dist(s, b) *
                         (game.transition.row((s * Al + b) * Af + af).dot(v_star) -
                          p_mean.dot(v_star));
            row[s * Al + b] += dr + mdp.gamma * dpv;
          }
          row += mdp.gamma * t.transition.row(s * Af + af) * vjac;
          qjac.row(s * Af + af) = row;
        }
      }
      g.grad_x = qjac.transpose() * weights;
      return g;
    }
  }
  throw UnsupportedStructureError("unknown gradient structure");
}

PenalizedEval penalized_objective(const UpperObjective& upper, const PenaltySpec& spec,
                                  const ParamMDP& mdp, const Vec& x, const Policy& pi,
                                  const OracleCertificate& oracle,
                                  const GradStructure& structure) {
  PenalizedEval out;
  out.f = upper.value(x, pi);
  auto [fgx, fgy] = upper.grad(x, pi);

  switch (spec.kind) {
    case PenaltyKind::Value:
      out.p = value_penalty_eval(mdp, x, pi, oracle);
      break;
    case PenaltyKind::Bellman:
      out.p = bellman_penalty_eval(mdp, x, pi, oracle);
      break;
    case PenaltyKind::NikaidoIsoda:
      throw UnsupportedStructureError(
          "Nikaido-Isoda penalties live on zero-sum problems; use the zero-sum loop");
  }
  out.F = out.f + spec.lambda * out.p;

  if (spec.lambda == 0.0) {
    out.grad_x = fgx;
    out.grad_y = fgy;
    return out;
  }
  PenaltyGrads pg = spec.kind == PenaltyKind::Value
                        ? value_penalty_grad(mdp, x, pi, oracle, structure)
                        : bellman_penalty_grad(mdp, x, pi, oracle, structure);
  out.grad_x = fgx + spec.lambda * pg.grad_x;
  out.grad_y = fgy + spec.lambda * pg.grad_y;
  return out;
}

}  // namespace pbrl
