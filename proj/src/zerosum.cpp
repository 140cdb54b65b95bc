#include "pbrl/zerosum.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "pbrl/io.hpp"
#include "pbrl/rng.hpp"

namespace pbrl {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Joint discounted visitation under (pi1, pi2) from rho.
Vec joint_visitation(const ZeroSumGame& g, const Mat& dist1, const Mat& dist2) {
  const int S = g.n_states, A1 = g.n_actions1, A2 = g.n_actions2;
  Mat p_pi = Mat::Zero(S, S);
  for (int s = 0; s < S; ++s)
    for (int a1 = 0; a1 < A1; ++a1)
      for (int a2 = 0; a2 < A2; ++a2)
        p_pi.row(s) +=
            dist1(s, a1) * dist2(s, a2) * g.transition.row((s * A1 + a1) * A2 + a2);
  Mat lhs = Mat::Identity(S, S) - g.gamma * p_pi.transpose();
  Vec d = (1.0 - g.gamma) * lhs.partialPivLu().solve(g.initial_dist);
  return d;
}

// grad_x V^{pi1,pi2}(rho) for reward-only x-dependence.
Vec zs_value_grad_x(const ZeroSumGame& g, const Vec& x, const Mat& dist1, const Mat& dist2) {
  if (!g.reward_map.jacobian) return Vec::Zero(std::max(g.reward_map.dim_x, 0));
  const int S = g.n_states, A1 = g.n_actions1, A2 = g.n_actions2;
  Vec d = joint_visitation(g, dist1, dist2);
  Mat jr = g.reward_map.jacobian(x);  // (S*A1*A2) x dim_x
  Vec w(S * A1 * A2);
  for (int s = 0; s < S; ++s)
    for (int a1 = 0; a1 < A1; ++a1)
      for (int a2 = 0; a2 < A2; ++a2)
        w[(s * A1 + a1) * A2 + a2] = d[s] * dist1(s, a1) * dist2(s, a2) / (1.0 - g.gamma);
  return jr.transpose() * w;
}

OracleCertificate solve_view(const ParamMDP& view_mdp, const OracleConfig& cfg) {
  switch (cfg.kind) {
    case OracleConfig::Kind::PMD:
      return pmd_solve(view_mdp, Vec::Zero(0), PmdConfig{cfg.eta, cfg.inner_iters, cfg.tol});
    case OracleConfig::Kind::SoftVI:
      return soft_value_iteration(view_mdp, Vec::Zero(0), cfg.tol);
    case OracleConfig::Kind::ProjectedPG:
      return projected_pg_solve(view_mdp, Vec::Zero(0), PgConfig{cfg.eta, cfg.inner_iters});
    case OracleConfig::Kind::BruteForce:
      return brute_force_optimal(view_mdp, Vec::Zero(0));
  }
  throw ConfigError("unknown oracle kind");
}

}  // namespace

Vec zs_value_eval(const ZeroSumGame& g, const Vec& x, const JointPolicy& joint) {
  joint.pi1.validate();
  joint.pi2.validate();
  PlayerView v1 = zs_player_view(g, g.reward_map.eval(x), joint.pi2.distribution(), 1);
  return view_value(v1, g.gamma, joint.pi1);
}

double zs_value_eval_rho(const ZeroSumGame& g, const Vec& x, const JointPolicy& joint) {
  return g.initial_dist.dot(zs_value_eval(g, x, joint));
}

OracleCertificate zs_best_response(const ZeroSumGame& g, const Vec& x, const JointPolicy& joint,
                                   int player, const OracleConfig& cfg) {
  const Mat opp = player == 1 ? joint.pi2.distribution() : joint.pi1.distribution();
  PlayerView view = zs_player_view(g, g.reward_map.eval(x), opp, player);
  return solve_view(view_to_mdp(view, g.gamma, g.initial_dist), cfg);
}

OracleCertificate zs_tight_best_response(const ZeroSumGame& g, const Vec& x,
                                         const JointPolicy& joint, int player, double tol) {
  const Mat opp = player == 1 ? joint.pi2.distribution() : joint.pi1.distribution();
  PlayerView view = zs_player_view(g, g.reward_map.eval(x), opp, player);
  return tight_oracle(view_to_mdp(view, g.gamma, g.initial_dist), Vec::Zero(0), tol);
}

double ni_eval(const ZeroSumGame& g, const Vec& x, const JointPolicy& joint,
               const OracleCertificate& br1, const OracleCertificate& br2) {
  const Mat r = g.reward_map.eval(x);
  PlayerView v1 = zs_player_view(g, r, joint.pi2.distribution(), 1);
  PlayerView v2 = zs_player_view(g, r, joint.pi1.distribution(), 2);
  double best1 = g.initial_dist.dot(view_value(v1, g.gamma, br1.policy_hat));
  double worst2 = -g.initial_dist.dot(view_value(v2, g.gamma, br2.policy_hat));
  double psi = best1 - worst2;
  if (psi < -(br1.gap_bound + br2.gap_bound + 1e-8))
    throw OracleFailureError("NI value negative beyond the oracles' certified gaps");
  return std::max(psi, 0.0);
}

NiGrads ni_grad(const ZeroSumGame& g, const Vec& x, const JointPolicy& joint,
                const OracleCertificate& br1, const OracleCertificate& br2) {
  if (g.tau <= 0.0)
    throw UnsupportedStructureError("NI gradients need tau > 0 (unique best responses)");
  const Mat r = g.reward_map.eval(x);
  const Mat dist1 = joint.pi1.distribution();
  const Mat dist2 = joint.pi2.distribution();
  const Mat hat1 = br1.policy_hat.distribution();
  const Mat hat2 = br2.policy_hat.distribution();

  NiGrads out;
  // d psi / d pi1 = -d V^{pi1, br2} / d pi1.
  PlayerView v1_at_hat2 = zs_player_view(g, r, hat2, 1);
  out.grad_pi1 = -view_policy_gradient(v1_at_hat2, g.gamma, joint.pi1, g.initial_dist);
  // d psi / d pi2 = +d V^{br1, pi2} / d pi2 = -d(-V)/d pi2 on player 2's view.
  PlayerView v2_at_hat1 = zs_player_view(g, r, hat1, 2);
  out.grad_pi2 = -view_policy_gradient(v2_at_hat1, g.gamma, joint.pi2, g.initial_dist);
  // d psi / dx = grad_x V^{br1, pi2} - grad_x V^{pi1, br2}.
  out.grad_x = zs_value_grad_x(g, x, hat1, dist2) - zs_value_grad_x(g, x, dist1, hat2);
  return out;
}

RunTrace pbrl_zs_run(const ZeroSumBilevelProblem& problem, const PBRLConfig& cfg) {
  const ZeroSumGame& g = problem.game;
  Vec x = problem.project_x(problem.x0);
  g.validate(x);
  JointPolicy pi{Policy::uniform(g.n_states, g.n_actions1),
                 Policy::uniform(g.n_states, g.n_actions2)};

  InnerOracle inner1(cfg.oracle), inner2(cfg.oracle);
  SplitMix64 rng(SplitMix64::derive(cfg.seed, 0x25a1));
  const double mc_cost = double(cfg.batch) * cfg.traj_len;
  const double exact_cost = double(g.n_states) * g.n_actions1 * g.n_actions2;

  RunTrace trace;
  trace.algorithm = cfg.penalty == PenaltyKind::NikaidoIsoda ? "pbrl_ni" : "pbrl_zs";
  trace.extra_name = "designer_reward";
  trace.seed = cfg.seed;
  std::ostringstream formula;
  formula << "env_steps accumulates batch*traj_len (= " << cfg.batch << "*" << cfg.traj_len
          << ") per Monte-Carlo gradient estimate, |S|*|A1|*|A2| per exact gradient "
             "evaluation used by the update, and |S|*|A| per inner-oracle sweep; metric-only "
             "evaluations are free";
  trace.steps_formula = formula.str();
  const auto t0 = Clock::now();
  double env_steps = 0.0;

  for (int k = 1; k <= cfg.outer_iters; ++k) {
    const Mat r = g.reward_map.eval(x);
    PlayerView view1 = zs_player_view(g, r, pi.pi2.distribution(), 1);
    PlayerView view2 = zs_player_view(g, r, pi.pi1.distribution(), 2);
    OracleCertificate br1 = inner1.step_tables(view1.tables, view_to_mdp(view1, g.gamma, g.initial_dist));
    OracleCertificate br2 = inner2.step_tables(view2.tables, view_to_mdp(view2, g.gamma, g.initial_dist));

    double f = problem.f(x, pi);
    double psi_hat = ni_eval(g, x, pi, br1, br2);
    double F = f + cfg.lambda * psi_hat;

    Vec fgx;
    Mat fg1, fg2;
    if (cfg.grad_mode == GradMode::MonteCarlo && problem.grad_f_mc) {
      std::tie(fgx, fg1, fg2) = problem.grad_f_mc(x, pi, McConfig{cfg.traj_len, cfg.batch,
                                                                  rng.next_u64()});
      env_steps += 2 * mc_cost;
    } else {
      std::tie(fgx, fg1, fg2) = problem.grad_f(x, pi);
      env_steps += exact_cost;
    }
    NiGrads ng;
    if (cfg.grad_mode == GradMode::MonteCarlo) {
      PlayerView v1_at_hat2 = zs_player_view(g, r, br2.policy_hat.distribution(), 1);
      PlayerView v2_at_hat1 = zs_player_view(g, r, br1.policy_hat.distribution(), 2);
      ng.grad_pi1 = -mc_view_policy_gradient(v1_at_hat2, g.gamma, pi.pi1, g.initial_dist,
                                             cfg.traj_len, cfg.batch, rng);
      ng.grad_pi2 = -mc_view_policy_gradient(v2_at_hat1, g.gamma, pi.pi2, g.initial_dist,
                                             cfg.traj_len, cfg.batch, rng);
      ng.grad_x = ni_grad(g, x, pi, br1, br2).grad_x;
      env_steps += 2 * mc_cost + exact_cost;
    } else {
      ng = ni_grad(g, x, pi, br1, br2);
      env_steps += 3 * exact_cost;
    }

    Vec x_next = problem.project_x(x - cfg.alpha * (fgx + cfg.lambda * ng.grad_x));
    Mat pi1_next = project_simplex_rows(pi.pi1.table - cfg.alpha * (fg1 + cfg.lambda * ng.grad_pi1));
    Mat pi2_next = project_simplex_rows(pi.pi2.table - cfg.alpha * (fg2 + cfg.lambda * ng.grad_pi2));

    OracleCertificate t1 = zs_tight_best_response(g, x, pi, 1, cfg.metric_tol);
    OracleCertificate t2 = zs_tight_best_response(g, x, pi, 2, cfg.metric_tol);
    double ne_gap = ni_eval(g, x, pi, t1, t2);

    TraceRow row;
    row.k = k;
    row.f = f;
    row.p = psi_hat;
    row.F = F;
    row.grad_norm_sq =
        cfg.alpha > 0.0
            ? ((x - x_next).squaredNorm() + (pi.pi1.table - pi1_next).squaredNorm() +
               (pi.pi2.table - pi2_next).squaredNorm()) /
                  (cfg.alpha * cfg.alpha)
            : 0.0;
    row.follower_gap = ne_gap;
    row.oracle_gap = br1.gap_bound + br2.gap_bound;
    row.env_steps = env_steps + inner1.env_steps() + inner2.env_steps();
    row.wall_time = seconds_since(t0);
    row.extra = -f;
    trace.rows.push_back(row);

    if (!std::isfinite(F) || std::abs(F) > cfg.divergence_guard) {
      trace.diverged = true;
      trace.finalize_summary();
      throw DivergenceError(std::move(trace));
    }

    x = std::move(x_next);
    pi.pi1.table = std::move(pi1_next);
    pi.pi2.table = std::move(pi2_next);
  }

  trace.finalize_summary();
  return trace;
}

MatrixGameSolution matrix_game_lp_oracle(const Mat& payoff) {
  require(payoff.allFinite(), "matrix game payoff must be finite");
  const int m = int(payoff.rows()), n = int(payoff.cols());
  // Shift so every entry is positive; the shifted game value is then > 0 and
  // the standard reciprocal LP applies.
  const double shift = 1.0 - std::min(payoff.minCoeff(), 0.0);
  Mat a = payoff.array() + shift;

  // max 1'w  s.t.  A w <= 1, w >= 0  (w = q / v_shifted), dual reads off p.
  const int cols = n + m + 1;  // variables, slacks, rhs
  Mat tab = Mat::Zero(m + 1, cols);
  tab.block(1, 0, m, n) = a;
  tab.block(1, n, m, m) = Mat::Identity(m, m);
  tab.block(1, cols - 1, m, 1).setOnes();
  tab.block(0, 0, 1, n).setConstant(-1.0);

  std::vector<int> basis(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) basis[size_t(i)] = n + i;

  const double eps = 1e-12;
  int pivots = 0;
  while (true) {
    int enter = -1;
    for (int j = 0; j < cols - 1; ++j)
      if (tab(0, j) < -eps) {  // Bland: first improving column
        enter = j;
        break;
      }
    if (enter < 0) break;
    int leave = -1;
    double best_ratio = 0.0;
    for (int i = 1; i <= m; ++i) {
      if (tab(i, enter) > eps) {
        double ratio = tab(i, cols - 1) / tab(i, enter);
        if (leave < 0 || ratio < best_ratio - eps ||
            (ratio < best_ratio + eps && basis[size_t(i - 1)] < basis[size_t(leave - 1)])) {
          leave = i;
          best_ratio = ratio;
        }
      }
    }
    require(leave > 0, "matrix game LP is unbounded (cannot happen for shifted payoffs)");
    tab.row(leave) /= tab(leave, enter);
    for (int i = 0; i <= m; ++i)
      if (i != leave && std::abs(tab(i, enter)) > 0.0) tab.row(i) -= tab(i, enter) * tab.row(leave);
    basis[size_t(leave - 1)] = enter;
    ++pivots;
    require(pivots < 10000, "matrix game LP failed to terminate");
  }

  double z = tab(0, cols - 1);
  require(z > eps, "matrix game LP returned a nonpositive objective");
  double v_shifted = 1.0 / z;

  Vec w = Vec::Zero(n);
  for (int i = 0; i < m; ++i)
    if (basis[size_t(i)] < n) w[basis[size_t(i)]] = tab(i + 1, cols - 1);
  Vec u(m);
  for (int i = 0; i < m; ++i) u[i] = tab(0, n + i);

  MatrixGameSolution sol;
  sol.col_strategy = w * v_shifted;
  sol.row_strategy = u * v_shifted;
  sol.col_strategy /= sol.col_strategy.sum();
  sol.row_strategy /= sol.row_strategy.sum();
  sol.value = sol.row_strategy.dot(payoff * sol.col_strategy);
  // Honest optimality check on the original payoff: best responses to the
  // returned pair.
  double best_row = (payoff * sol.col_strategy).maxCoeff();
  double best_col = (payoff.transpose() * sol.row_strategy).minCoeff();
  sol.duality_gap = best_row - best_col;
  sol.pivots = pivots;
  return sol;
}

}  // namespace pbrl
