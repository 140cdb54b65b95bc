#include "pbrl/mdp.hpp"

#include <cmath>

namespace pbrl {

RewardMap fixed_reward(Mat r) {
  RewardMap m;
  m.dim_x = 0;
  m.eval = [r = std::move(r)](const Vec&) { return r; };
  return m;
}

RewardMap table_reward(int n_states, int n_actions) {
  RewardMap m;
  m.dim_x = n_states * n_actions;
  m.eval = [=](const Vec& x) {
    require(int(x.size()) == n_states * n_actions, "table_reward: bad x size");
    Mat r(n_states, n_actions);
    for (int s = 0; s < n_states; ++s)
      for (int a = 0; a < n_actions; ++a) r(s, a) = x[s * n_actions + a];
    return r;
  };
  m.jacobian = [=](const Vec&) {
    return Mat(Mat::Identity(n_states * n_actions, n_states * n_actions));
  };
  return m;
}

RewardMap sigmoid_incentive_reward(Mat base, double scale) {
  RewardMap m;
  const int S = int(base.rows()), A = int(base.cols());
  m.dim_x = S * A;
  m.eval = [base = std::move(base), scale, S, A](const Vec& x) {
    require(int(x.size()) == S * A, "sigmoid_incentive_reward: bad x size");
    Mat r = base;
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) r(s, a) += scale / (1.0 + std::exp(-x[s * A + a]));
    return r;
  };
  m.jacobian = [scale, S, A](const Vec& x) {
    Mat j = Mat::Zero(S * A, S * A);
    for (int i = 0; i < S * A; ++i) {
      double sig = 1.0 / (1.0 + std::exp(-x[i]));
      j(i, i) = scale * sig * (1.0 - sig);
    }
    return j;
  };
  return m;
}

TransitionMap fixed_transition(Mat p) {
  TransitionMap m;
  m.depends_on_x = false;
  m.eval = [p = std::move(p)](const Vec&) { return p; };
  return m;
}

void ParamMDP::validate(const Vec& x) const {
  require(n_states > 0 && n_actions > 0, "MDP must have positive state/action counts");
  require(gamma >= 0.0 && gamma < 1.0, "gamma must lie in [0, 1)");
  require(tau >= 0.0, "tau must be nonnegative");
  if (tau > 0.0 && regularizer.kind == Regularizer::Kind::None)
    throw ConfigError("tau > 0 requires a regularizer");
  require(int(initial_dist.size()) == n_states, "initial_dist has wrong size");
  require(std::abs(initial_dist.sum() - 1.0) <= 1e-12, "initial_dist must sum to 1");
  require(initial_dist.minCoeff() > 0.0, "initial_dist must be entrywise positive");

  Mat r = reward_map.eval(x);
  require(int(r.rows()) == n_states && int(r.cols()) == n_actions, "reward table shape mismatch");
  require(r.allFinite(), "reward table has non-finite entries");
  Mat p = transition_map.eval(x);
  require(int(p.rows()) == n_states * n_actions && int(p.cols()) == n_states,
          "transition tensor shape mismatch");
  for (int row = 0; row < p.rows(); ++row) {
    require(p.row(row).minCoeff() >= 0.0, "transition row has a negative entry");
    require(std::abs(p.row(row).sum() - 1.0) <= 1e-12, "transition row does not sum to 1");
  }
}

MdpTables materialize(const ParamMDP& mdp, const Vec& x) {
  MdpTables t;
  t.reward = mdp.reward_map.eval(x);
  t.transition = mdp.transition_map.eval(x);
  t.state_bonus = Vec::Zero(mdp.n_states);
  return t;
}

namespace exact {

namespace {

// Policy-averaged transition P^pi(s, s') and reward r^pi(s).
void policy_average(const MdpTables& t, const Mat& dist, Mat& p_pi, Vec& r_pi) {
  const int S = int(t.reward.rows()), A = int(t.reward.cols());
  p_pi.setZero(S, S);
  r_pi.setZero(S);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      p_pi.row(s) += dist(s, a) * t.transition.row(s * A + a);
      r_pi[s] += dist(s, a) * t.reward(s, a);
    }
    r_pi[s] += t.state_bonus[s];
  }
}

}  // namespace

Vec value(const MdpTables& t, double gamma, double tau, const Regularizer& reg,
          const Policy& pi, double tau_sign) {
  pi.validate();
  const int S = int(t.reward.rows());
  const Mat dist = pi.distribution();
  Mat p_pi;
  Vec r_pi;
  policy_average(t, dist, p_pi, r_pi);
  if (tau != 0.0)
    for (int s = 0; s < S; ++s) r_pi[s] -= tau_sign * tau * reg.value(s, dist.row(s));

  Mat lhs = Mat::Identity(S, S) - gamma * p_pi;
  Vec v = lhs.partialPivLu().solve(r_pi);
  double residual = (lhs * v - r_pi).cwiseAbs().maxCoeff();
  require(residual <= 1e-10, "Bellman linear system residual too large");
  return v;
}

Mat q_values(const MdpTables& t, double gamma, const Vec& v) {
  const int S = int(t.reward.rows()), A = int(t.reward.cols());
  Mat q(S, A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a)
      q(s, a) = t.reward(s, a) + t.state_bonus[s] + gamma * t.transition.row(s * A + a).dot(v);
  return q;
}

Vec visitation(const MdpTables& t, double gamma, const Policy& pi, const Vec& start) {
  require(std::abs(start.sum() - 1.0) <= 1e-9 && start.minCoeff() >= 0.0,
          "visitation: start must be a probability vector");
  const int S = int(t.reward.rows());
  Mat p_pi;
  Vec r_pi;
  policy_average(t, pi.distribution(), p_pi, r_pi);
  Mat lhs = Mat::Identity(S, S) - gamma * p_pi.transpose();
  Vec d = (1.0 - gamma) * lhs.partialPivLu().solve(start);
  require(std::abs(d.sum() - 1.0) <= 1e-10, "visitation does not sum to 1");
  return d;
}

Mat policy_gradient(const MdpTables& t, double gamma, double tau, const Regularizer& reg,
                    const Policy& pi, const Vec& rho, double tau_sign) {
  const int S = int(t.reward.rows()), A = int(t.reward.cols());
  Vec v = value(t, gamma, tau, reg, pi, tau_sign);
  Mat q = q_values(t, gamma, v);
  Vec d = visitation(t, gamma, pi, rho);
  const Mat dist = pi.distribution();
  Mat grad(S, A);
  for (int s = 0; s < S; ++s) {
    Vec row = q.row(s);
    if (tau != 0.0) row -= tau_sign * tau * reg.grad(s, dist.row(s));
    grad.row(s) = (d[s] / (1.0 - gamma)) * row.transpose();
  }
  return grad;
}

}  // namespace exact

Vec evaluate_value_exact(const ParamMDP& mdp, const Vec& x, const Policy& pi) {
  return exact::value(materialize(mdp, x), mdp.gamma, mdp.tau, mdp.regularizer, pi);
}

double evaluate_value_exact_rho(const ParamMDP& mdp, const Vec& x, const Policy& pi) {
  return mdp.initial_dist.dot(evaluate_value_exact(mdp, x, pi));
}

Mat evaluate_q_exact(const ParamMDP& mdp, const Vec& x, const Policy& pi) {
  MdpTables t = materialize(mdp, x);
  return exact::q_values(t, mdp.gamma, exact::value(t, mdp.gamma, mdp.tau, mdp.regularizer, pi));
}

Vec visitation_distribution(const ParamMDP& mdp, const Vec& x, const Policy& pi,
                            const Vec& start) {
  return exact::visitation(materialize(mdp, x), mdp.gamma, pi, start);
}

Mat policy_gradient_exact(const ParamMDP& mdp, const Vec& x, const Policy& pi) {
  if (pi.kind != ParamKind::Direct)
    throw UnsupportedStructureError(
        "policy_gradient_exact expects a direct policy; chain softmax gradients separately");
  return exact::policy_gradient(materialize(mdp, x), mdp.gamma, mdp.tau, mdp.regularizer, pi,
                                mdp.initial_dist);
}

Vec value_gradient_x_exact(const ParamMDP& mdp, const Vec& x, const Policy& pi) {
  if (mdp.transition_map.depends_on_x)
    throw UnsupportedStructureError(
        "value_gradient_x_exact requires an x-independent transition; use the Stackelberg "
        "score-function path instead");
  if (!mdp.reward_map.jacobian) return Vec::Zero(mdp.reward_map.dim_x);
  MdpTables t = materialize(mdp, x);
  Vec d = exact::visitation(t, mdp.gamma, pi, mdp.initial_dist);
  Mat jac = mdp.reward_map.jacobian(x);  // (S*A) x dim_x
  const Mat dist = pi.distribution();
  Vec weights(mdp.n_states * mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      weights[s * mdp.n_actions + a] = d[s] * dist(s, a) / (1.0 - mdp.gamma);
  return jac.transpose() * weights;
}

}  // namespace pbrl
