#pragma once

#include <functional>

#include "pbrl/games.hpp"
#include "pbrl/oracle.hpp"

namespace pbrl {

enum class PenaltyKind { Value, Bellman, NikaidoIsoda };

struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::Value;
  double lambda = 1.0;
};

/// How the lower-level MDP depends on x, which picks the formula used for
/// the penalty's x-gradient. RewardOnly differentiates through the reward
/// Jacobian; Stackelberg differentiates through the leader's softmax policy
/// with the score-function form.
struct GradStructure {
  enum class Kind { RewardOnly, Stackelberg };
  Kind kind = Kind::RewardOnly;
  const StackelbergGame* game = nullptr;  // required when kind == Stackelberg

  static GradStructure reward_only() { return {}; }
  static GradStructure stackelberg(const StackelbergGame& g) {
    return {Kind::Stackelberg, &g};
  }
};

struct PenaltyGrads {
  Vec grad_x;
  Mat grad_y;  // w.r.t. the direct policy table
};

/// Upper-level objective f(x, y) with its gradients.
struct UpperObjective {
  std::function<double(const Vec& x, const Policy& y)> value;
  std::function<std::pair<Vec, Mat>(const Vec& x, const Policy& y)> grad;
};

/// d V^pi(s0) / dx for every start state, stacked |S| x dim_x.
Mat value_x_jacobian_reward_only(const ParamMDP& mdp, const Vec& x, const Policy& pi);
Mat value_x_jacobian_stackelberg(const StackelbergGame& g, const Vec& leader_logits,
                                 const Policy& follower);

/// Lower-level optimality gap in value: V^{pi_hat}(rho) - V^{pi}(rho).
/// Negative values within the oracle's certified gap are clamped to zero;
/// anything more negative raises OracleFailureError.
double value_penalty_eval(const ParamMDP& mdp, const Vec& x, const Policy& pi,
                          const OracleCertificate& oracle);

PenaltyGrads value_penalty_grad(const ParamMDP& mdp, const Vec& x, const Policy& pi,
                                const OracleCertificate& oracle, const GradStructure& structure);

/// Bellman penalty g(x,y) - v(x) with g(x,y) = E_rho[<y_s, q_s(x)> + tau h_s(y_s)],
/// q_s(x) = -Q^{pi*}(s,.), v(x) = min_y g(x,y) solved per state in closed form.
/// Requires tau > 0 and a direct policy.
double bellman_penalty_eval(const ParamMDP& mdp, const Vec& x, const Policy& pi,
                            const OracleCertificate& oracle);

PenaltyGrads bellman_penalty_grad(const ParamMDP& mdp, const Vec& x, const Policy& pi,
                                  const OracleCertificate& oracle,
                                  const GradStructure& structure);

struct PenalizedEval {
  double f = 0.0;
  double p = 0.0;
  double F = 0.0;
  Vec grad_x;
  Mat grad_y;
};

/// F_lambda = f + lambda p with the inexact penalty gradient built from the
/// oracle's policy. lambda = 0 skips the penalty gradients entirely.
PenalizedEval penalized_objective(const UpperObjective& upper, const PenaltySpec& spec,
                                  const ParamMDP& mdp, const Vec& x, const Policy& pi,
                                  const OracleCertificate& oracle,
                                  const GradStructure& structure);

}  // namespace pbrl
