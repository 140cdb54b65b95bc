#include "pbrl/loop.hpp"

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

// Monte-Carlo counterpart of penalized_objective. The penalty value and the
// Bellman-penalty gradients stay exact given pi_hat; every policy-gradient
// piece (penalty y-gradient, and for Stackelberg problems both f gradients
// and the score-function x-gradient) is estimated by REINFORCE-with-Q.
PenalizedEval penalized_objective_mc(const BilevelProblem& problem, const PenaltySpec& spec,
                                     const Vec& x, const Policy& pi,
                                     const OracleCertificate& cert, const PBRLConfig& cfg,
                                     SplitMix64& rng, double& env_steps) {
  const ParamMDP& mdp = problem.lower;
  const double mc_cost = double(cfg.batch) * cfg.traj_len;
  const double exact_cost = double(mdp.n_states) * mdp.n_actions;

  PenalizedEval out;
  out.f = problem.upper.value(x, pi);
  switch (spec.kind) {
    case PenaltyKind::Value:
      out.p = value_penalty_eval(mdp, x, pi, cert);
      break;
    case PenaltyKind::Bellman:
      out.p = bellman_penalty_eval(mdp, x, pi, cert);
      break;
    case PenaltyKind::NikaidoIsoda:
      throw UnsupportedStructureError("use the zero-sum loop for the NI penalty");
  }
  out.F = out.f + spec.lambda * out.p;

  if (problem.game) {
    const StackelbergGame& g = *problem.game;
    Mat logits = unflatten_rows(x, g.n_states, g.n_actions_leader);
    Mat leader_dist = softmax_materialize(logits);
    Mat y_dist = pi.distribution();

    // f = -V_l: leader ascends own value, follower view sees leader's payoff.
    PlayerView lead_own = stackelberg_leader_view(g, y_dist, g.reward_leader,
                                                  /*own_reg=*/true, /*follower_reg_bonus=*/false);
    out.grad_x = -flatten_rows(mc_view_softmax_gradient(lead_own, g.gamma, logits, g.initial_dist,
                                              cfg.traj_len, cfg.batch, rng));
    PlayerView foll_of_l = stackelberg_follower_view_of(g, leader_dist, g.reward_leader,
                                                        /*own_reg=*/false,
                                                        /*leader_reg_bonus=*/true);
    out.grad_y = -mc_view_policy_gradient(foll_of_l, g.gamma, pi, g.initial_dist, cfg.traj_len,
                                     cfg.batch, rng);
    env_steps += 2 * mc_cost;

    if (spec.lambda != 0.0) {
      if (spec.kind == PenaltyKind::Value) {
        PlayerView foll = stackelberg_follower_view(g, leader_dist);
        out.grad_y -= spec.lambda * mc_view_policy_gradient(foll, g.gamma, pi, g.initial_dist,
                                                       cfg.traj_len, cfg.batch, rng);
        PlayerView lead_f_pi = stackelberg_leader_view(g, y_dist, g.reward_follower, false, true);
        PlayerView lead_f_hat = stackelberg_leader_view(g, cert.policy_hat.distribution(),
                                                        g.reward_follower, false, true);
        out.grad_x += spec.lambda *
                      (flatten_rows(mc_view_softmax_gradient(lead_f_hat, g.gamma, logits, g.initial_dist,
                                                   cfg.traj_len, cfg.batch, rng)) -
                       flatten_rows(mc_view_softmax_gradient(lead_f_pi, g.gamma, logits, g.initial_dist,
                                                   cfg.traj_len, cfg.batch, rng)));
        env_steps += 3 * mc_cost;
      } else {
        PenaltyGrads pg = bellman_penalty_grad(mdp, x, pi, cert, problem.structure());
        out.grad_x += spec.lambda * pg.grad_x;
        out.grad_y += spec.lambda * pg.grad_y;
        env_steps += 2 * exact_cost;
      }
    }
    return out;
  }

  // Reward-only problems: f gradients and the penalty's x-gradient are
  // closed-form; only the penalty's policy-gradient piece is sampled.
  auto [fgx, fgy] = problem.upper.grad(x, pi);
  out.grad_x = fgx;
  out.grad_y = fgy;
  env_steps += exact_cost;
  if (spec.lambda != 0.0) {
    if (spec.kind == PenaltyKind::Value) {
      McConfig mc{cfg.traj_len, cfg.batch, rng.next_u64()};
      out.grad_y -= spec.lambda * mc_policy_gradient(mdp, x, pi, mc);
      Mat j_pi = value_x_jacobian_reward_only(mdp, x, pi);
      Mat j_hat = value_x_jacobian_reward_only(mdp, x, cert.policy_hat);
      out.grad_x += spec.lambda * ((j_hat - j_pi).transpose() * mdp.initial_dist);
      env_steps += mc_cost + 2 * exact_cost;
    } else {
      PenaltyGrads pg = bellman_penalty_grad(mdp, x, pi, cert, problem.structure());
      out.grad_x += spec.lambda * pg.grad_x;
      out.grad_y += spec.lambda * pg.grad_y;
      env_steps += 2 * exact_cost;
    }
  }
  return out;
}

std::string steps_formula_for(const PBRLConfig& cfg) {
  std::ostringstream os;
  os << "env_steps accumulates batch*traj_len (= " << cfg.batch << "*" << cfg.traj_len
     << ") per Monte-Carlo gradient estimate, |S|*|A| per exact gradient evaluation used by "
        "the update, and |S|*|A| per inner-oracle sweep; metric-only evaluations are free";
  return os.str();
}

}  // namespace

void RunTrace::finalize_summary() {
  avg_grad_norm_sq = 0.0;
  min_follower_gap = std::numeric_limits<double>::infinity();
  for (const TraceRow& r : rows) {
    avg_grad_norm_sq += r.grad_norm_sq;
    min_follower_gap = std::min(min_follower_gap, r.follower_gap);
  }
  if (!rows.empty()) avg_grad_norm_sq /= double(rows.size());
}

uint64_t RunTrace::fingerprint() const {
  std::ostringstream os;
  os << experiment << '|' << algorithm << '|' << extra_name << '|' << seed << '|' << config_hash
     << '|' << diverged << '|';
  for (const TraceRow& r : rows) {
    os << r.k;
    for (double v : {r.f, r.p, r.F, r.grad_norm_sq, r.exact_pg_norm_sq, r.follower_gap,
                     r.oracle_gap, r.env_steps, r.extra})
      os << ' ' << io::format_double(v);
    os << '\n';
  }
  return io::fnv1a(os.str());
}

OracleCertificate tight_oracle(const ParamMDP& mdp, const Vec& x, double tol) {
  if (mdp.tau > 0.0 && mdp.regularizer.kind == Regularizer::Kind::NegEntropy)
    return soft_value_iteration(mdp, x, tol);
  if (mdp.tau == 0.0 &&
      std::pow(double(mdp.n_actions), double(mdp.n_states)) <= 1e6)
    return brute_force_optimal(mdp, x);
  if (mdp.tau > 0.0) return pmd_solve(mdp, x, PmdConfig{1.0, 2000, tol});
  return projected_pg_solve(mdp, x, PgConfig{0.1, 2000});
}

RunTrace pbrl_run(const BilevelProblem& problem, const PBRLConfig& cfg) {
  require(cfg.alpha >= 0.0, "alpha must be nonnegative");
  require(cfg.outer_iters >= 0, "outer_iters must be nonnegative");
  const ParamMDP& mdp = problem.lower;

  Vec x = problem.project_x(problem.x0);
  mdp.validate(x);
  Policy y = Policy::uniform(mdp.n_states, mdp.n_actions);

  InnerOracle inner(cfg.oracle);
  SplitMix64 rng(SplitMix64::derive(cfg.seed, 0x9c0f));
  PenaltySpec spec{cfg.penalty, cfg.lambda};
  const double exact_cost = double(mdp.n_states) * mdp.n_actions;

  RunTrace trace;
  trace.steps_formula = steps_formula_for(cfg);
  trace.extra_name = cfg.extra_name;
  trace.seed = cfg.seed;
  trace.rows.reserve(size_t(cfg.outer_iters));
  const auto t0 = Clock::now();
  double env_steps = 0.0;

  for (int k = 1; k <= cfg.outer_iters; ++k) {
    OracleCertificate cert = inner.step(mdp, x);

    PenalizedEval eval;
    if (cfg.grad_mode == GradMode::Exact) {
      eval = penalized_objective(problem.upper, spec, mdp, x, y, cert, problem.structure());
      env_steps += (spec.kind == PenaltyKind::Value ? 4.0 : 3.0) * exact_cost;
    } else {
      eval = penalized_objective_mc(problem, spec, x, y, cert, cfg, rng, env_steps);
    }

    Vec x_next = problem.project_x(x - cfg.alpha * eval.grad_x);
    Mat y_next = project_simplex_rows(y.table - cfg.alpha * eval.grad_y);

    TraceRow row;
    row.k = k;
    row.f = eval.f;
    row.p = eval.p;
    row.F = eval.F;
    row.grad_norm_sq = cfg.alpha > 0.0
                           ? ((x - x_next).squaredNorm() + (y.table - y_next).squaredNorm()) /
                                 (cfg.alpha * cfg.alpha)
                           : 0.0;
    OracleCertificate tight = tight_oracle(mdp, x, cfg.metric_tol);
    MdpTables t = materialize(mdp, x);
    double v_star = mdp.initial_dist.dot(
        exact::value(t, mdp.gamma, mdp.tau, mdp.regularizer, tight.policy_hat));
    double v_y =
        mdp.initial_dist.dot(exact::value(t, mdp.gamma, mdp.tau, mdp.regularizer, y));
    row.follower_gap = v_star - v_y;
    row.oracle_gap = cert.gap_bound;
    if (cfg.record_exact_pg) row.exact_pg_norm_sq = projected_grad_norm(problem, cfg, x, y);
    row.env_steps = env_steps + inner.env_steps();
    row.wall_time = seconds_since(t0);
    if (cfg.extra_metric) row.extra = cfg.extra_metric(k, x, y);
    trace.rows.push_back(row);

    if (!std::isfinite(eval.F) || std::abs(eval.F) > cfg.divergence_guard) {
      trace.diverged = true;
      trace.finalize_summary();
      throw DivergenceError(std::move(trace));
    }

    x = std::move(x_next);
    y.table = std::move(y_next);
  }

  trace.finalize_summary();
  return trace;
}

double projected_grad_norm(const BilevelProblem& problem, const PBRLConfig& cfg, const Vec& x,
                           const Policy& pi) {
  OracleCertificate cert = tight_oracle(problem.lower, x, 1e-12);
  PenaltySpec spec{cfg.penalty, cfg.lambda};
  PenalizedEval eval =
      penalized_objective(problem.upper, spec, problem.lower, x, pi, cert, problem.structure());
  Vec x_next = problem.project_x(x - cfg.alpha * eval.grad_x);
  Mat y_next = project_simplex_rows(pi.table - cfg.alpha * eval.grad_y);
  return ((x - x_next).squaredNorm() + (pi.table - y_next).squaredNorm()) /
         (cfg.alpha * cfg.alpha);
}

RunTrace independent_pg_run(const StackelbergGame& game, const PBRLConfig& cfg) {
  game.validate();
  const int S = game.n_states, Al = game.n_actions_leader, Af = game.n_actions_follower;

  Mat leader_logits = Mat::Zero(S, Al);
  Policy y = Policy::uniform(S, Af);
  SplitMix64 rng(SplitMix64::derive(cfg.seed, 0x1b9d));
  const double mc_cost = double(cfg.batch) * cfg.traj_len;
  const double exact_cost = double(S) * std::max(Al, Af);

  RunTrace trace;
  trace.algorithm = "independent_pg";
  trace.steps_formula = steps_formula_for(cfg);
  trace.seed = cfg.seed;
  const auto t0 = Clock::now();
  double env_steps = 0.0;

  for (int k = 1; k <= cfg.outer_iters; ++k) {
    Mat leader_dist = softmax_materialize(leader_logits);
    Mat y_dist = y.distribution();

    PlayerView lead = stackelberg_leader_view(game, y_dist, game.reward_leader, true, false);
    PlayerView foll = stackelberg_follower_view(game, leader_dist);

    Mat gx, gy;
    if (cfg.grad_mode == GradMode::Exact) {
      gx = softmax_chain_gradient(
          leader_logits, view_policy_gradient(lead, game.gamma, Policy::direct(leader_dist),
                                              game.initial_dist));
      gy = view_policy_gradient(foll, game.gamma, y, game.initial_dist);
      env_steps += 2 * exact_cost;
    } else {
      gx = mc_view_softmax_gradient(lead, game.gamma, leader_logits, game.initial_dist, cfg.traj_len,
                               cfg.batch, rng);
      gy = mc_view_policy_gradient(foll, game.gamma, y, game.initial_dist, cfg.traj_len, cfg.batch,
                              rng);
      env_steps += 2 * mc_cost;
    }

    // Each player myopically ascends its own value.
    Mat logits_next = leader_logits + cfg.alpha * gx;
    Mat y_next = project_simplex_rows(y.table + cfg.alpha * gy);

    double v_l = game.initial_dist.dot(view_value(lead, game.gamma, Policy::direct(leader_dist)));
    ParamMDP foll_mdp = view_to_mdp(foll, game.gamma, game.initial_dist);
    OracleCertificate tight = tight_oracle(foll_mdp, Vec::Zero(0), cfg.metric_tol);
    double v_star = game.initial_dist.dot(view_value(foll, game.gamma, tight.policy_hat));
    double v_y = game.initial_dist.dot(view_value(foll, game.gamma, y));

    TraceRow row;
    row.k = k;
    row.f = -v_l;
    row.p = 0.0;
    row.F = row.f;
    row.grad_norm_sq = cfg.alpha > 0.0
                           ? ((leader_logits - logits_next).squaredNorm() +
                              (y.table - y_next).squaredNorm()) /
                                 (cfg.alpha * cfg.alpha)
                           : 0.0;
    row.follower_gap = v_star - v_y;
    row.oracle_gap = tight.gap_bound;
    row.env_steps = env_steps;
    row.wall_time = seconds_since(t0);
    trace.rows.push_back(row);

    if (!std::isfinite(row.F) || std::abs(row.F) > cfg.divergence_guard) {
      trace.diverged = true;
      trace.finalize_summary();
      throw DivergenceError(std::move(trace));
    }

    leader_logits = std::move(logits_next);
    y.table = std::move(y_next);
  }

  trace.finalize_summary();
  return trace;
}

}  // namespace pbrl
