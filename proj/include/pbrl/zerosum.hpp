#pragma once

#include <functional>

#include "pbrl/loop.hpp"

namespace pbrl {

/// Exact value of the regularized zero-sum game under a joint policy
/// (player 1's perspective; regularization enters as -tau h(pi1) + tau h(pi2)).
Vec zs_value_eval(const ZeroSumGame& g, const Vec& x, const JointPolicy& joint);
double zs_value_eval_rho(const ZeroSumGame& g, const Vec& x, const JointPolicy& joint);

/// Best response of one player holding the opponent fixed: a single-agent
/// regularized solve on the marginalized view. Player 1 maximizes V, player 2
/// maximizes -V.
OracleCertificate zs_best_response(const ZeroSumGame& g, const Vec& x, const JointPolicy& joint,
                                   int player, const OracleConfig& cfg);
/// Tight best response for metrics and tests (soft VI / brute force / PMD by
/// regularizer, like tight_oracle).
OracleCertificate zs_tight_best_response(const ZeroSumGame& g, const Vec& x,
                                         const JointPolicy& joint, int player, double tol);

/// Nikaido-Isoda function psi = V(pi1*, pi2) - V(pi1, pi2*) evaluated with the
/// supplied best responses. Small negatives within the certified gaps clamp
/// to zero; worse raises OracleFailureError.
double ni_eval(const ZeroSumGame& g, const Vec& x, const JointPolicy& joint,
               const OracleCertificate& br1, const OracleCertificate& br2);

struct NiGrads {
  Vec grad_x;
  Mat grad_pi1;
  Mat grad_pi2;
};

/// Estimator of grad psi with the best responses in place of the exact ones:
/// grad_pi = (-grad_{pi1} V^{pi1, br2}, +grad_{pi2} V^{br1, pi2}),
/// grad_x  = grad_x V^{br1, pi2} - grad_x V^{pi1, br2} (reward-only x).
NiGrads ni_grad(const ZeroSumGame& g, const Vec& x, const JointPolicy& joint,
                const OracleCertificate& br1, const OracleCertificate& br2);

/// Bilevel problem with a zero-sum lower level: minimize f(x, pi) subject to
/// pi being a Nash equilibrium of the game at x.
struct ZeroSumBilevelProblem {
  ZeroSumGame game;
  std::function<double(const Vec&, const JointPolicy&)> f;
  std::function<std::tuple<Vec, Mat, Mat>(const Vec&, const JointPolicy&)> grad_f;
  /// Optional sampled variant used in Monte-Carlo mode.
  std::function<std::tuple<Vec, Mat, Mat>(const Vec&, const JointPolicy&, const McConfig&)>
      grad_f_mc;
  Vec x0;
  std::optional<std::pair<Vec, Vec>> x_bounds;

  Vec project_x(Vec x) const {
    if (x_bounds) x = x.cwiseMax(x_bounds->first).cwiseMin(x_bounds->second);
    return x;
  }
};

/// Projected-gradient loop on f + lambda psi with two warm-started
/// best-response oracles per iteration. The trace's follower_gap column holds
/// the tight NE gap, p holds the estimated psi, and extra holds the designer
/// reward -f.
RunTrace pbrl_zs_run(const ZeroSumBilevelProblem& problem, const PBRLConfig& cfg);

struct MatrixGameSolution {
  Vec row_strategy;
  Vec col_strategy;
  double value = 0.0;
  double duality_gap = 0.0;
  int pivots = 0;
};

/// Exact minimax solution of a matrix game (row player maximizes) via the
/// standard LP formulation solved with a dense Bland-rule simplex.
MatrixGameSolution matrix_game_lp_oracle(const Mat& payoff);

}  // namespace pbrl
