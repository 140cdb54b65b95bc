#include "pbrl/applications.hpp"

#include <cmath>

#include "pbrl/rng.hpp"

namespace pbrl {

namespace {

double softplus(double z) { return z > 30.0 ? z : std::log1p(std::exp(z)); }
double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Designer-chain view for one player: opponent marginalized, cost folded
// into the state bonus, no regularization (the designer's return is plain).
PlayerView designer_view(const DesignerSpec& d, const Mat& opp_dist, int player, int a1, int a2) {
  PlayerView v;
  if (player == 1) {
    v.tables.reward = marginalize_second(d.reward, opp_dist, a1, a2);
    v.tables.transition = marginalize_transition_second(d.transition, opp_dist, a1, a2);
  } else {
    v.tables.reward = marginalize_first(d.reward, opp_dist, a1, a2);
    v.tables.transition = marginalize_transition_first(d.transition, opp_dist, a1, a2);
  }
  v.tables.state_bonus = -d.cost;
  v.tau = 0.0;
  v.regularizer = make_none();
  return v;
}

}  // namespace

ParamMDP stackelberg_reduce(std::shared_ptr<const StackelbergGame> game) {
  game->validate();
  const int S = game->n_states, Al = game->n_actions_leader, Af = game->n_actions_follower;
  ParamMDP mdp;
  mdp.n_states = S;
  mdp.n_actions = Af;
  mdp.gamma = game->gamma;
  mdp.tau = game->tau;
  mdp.regularizer = game->reg_follower;
  mdp.initial_dist = game->initial_dist;
  mdp.reward_map.dim_x = S * Al;
  mdp.reward_map.eval = [game, S, Al](const Vec& x) {
    Mat leader = softmax_materialize(unflatten_rows(x, S, Al));
    return marginalize_first(game->reward_follower, leader, game->n_actions_leader,
                             game->n_actions_follower);
  };
  mdp.transition_map.depends_on_x = true;
  mdp.transition_map.eval = [game, S, Al](const Vec& x) {
    Mat leader = softmax_materialize(unflatten_rows(x, S, Al));
    return marginalize_transition_first(game->transition, leader, game->n_actions_leader,
                                        game->n_actions_follower);
  };
  return mdp;
}

double stackelberg_leader_value(const StackelbergGame& g, const Vec& leader_logits,
                                const Policy& follower) {
  Mat logits = unflatten_rows(leader_logits, g.n_states, g.n_actions_leader);
  PlayerView lead = stackelberg_leader_view(g, follower.distribution(), g.reward_leader,
                                            /*own_reg=*/true, /*follower_reg_bonus=*/false);
  return g.initial_dist.dot(
      view_value(lead, g.gamma, Policy::direct(softmax_materialize(logits))));
}

BilevelProblem make_stackelberg_problem(StackelbergGame game) {
  auto shared = std::make_shared<const StackelbergGame>(std::move(game));
  const int S = shared->n_states, Al = shared->n_actions_leader;

  BilevelProblem problem;
  problem.lower = stackelberg_reduce(shared);
  problem.game = shared;
  problem.x0 = Vec::Zero(S * Al);
  problem.upper.value = [shared](const Vec& x, const Policy& y) {
    return -stackelberg_leader_value(*shared, x, y);
  };
  problem.upper.grad = [shared, S, Al](const Vec& x, const Policy& y) {
    const StackelbergGame& g = *shared;
    Mat logits = unflatten_rows(x, S, Al);
    Mat leader_dist = softmax_materialize(logits);
    Mat y_dist = y.distribution();

    PlayerView lead = stackelberg_leader_view(g, y_dist, g.reward_leader, true, false);
    Mat gx = softmax_chain_gradient(
        logits,
        view_policy_gradient(lead, g.gamma, Policy::direct(leader_dist), g.initial_dist));

    PlayerView foll = stackelberg_follower_view_of(g, leader_dist, g.reward_leader,
                                                   /*own_reg=*/false, /*leader_reg_bonus=*/true);
    Mat gy = view_policy_gradient(foll, g.gamma, y, g.initial_dist);
    return std::make_pair(Vec(-flatten_rows(gx)), Mat(-gy));
  };
  return problem;
}

UpperObjective preference_upper_objective(std::shared_ptr<const PreferenceDataset> data,
                                          const RewardMap& reward_map) {
  require(data != nullptr && !data->pairs.empty(), "preference dataset is empty");

  auto segment_sum = [](const Mat& r, const std::vector<std::pair<int, int>>& seg) {
    double sum = 0.0;
    for (auto [s, a] : seg) sum += r(s, a);
    return sum;
  };

  UpperObjective obj;
  obj.value = [data, reward_map, segment_sum](const Vec& x, const Policy&) {
    Mat r = reward_map.eval(x);
    double loss = 0.0;
    for (const auto& pair : data->pairs) {
      double u = segment_sum(r, pair.seg0) - segment_sum(r, pair.seg1);
      // -log P(label): log sigma(u) = -softplus(-u).
      loss += pair.label == 0 ? softplus(-u) : softplus(u);
    }
    return loss;
  };
  obj.grad = [data, reward_map, segment_sum](const Vec& x, const Policy& y) {
    Mat r = reward_map.eval(x);
    require(bool(reward_map.jacobian), "preference objective needs a reward Jacobian");
    Mat jac = reward_map.jacobian(x);
    const int A = int(r.cols());
    Vec gx = Vec::Zero(reward_map.dim_x);
    for (const auto& pair : data->pairs) {
      double u = segment_sum(r, pair.seg0) - segment_sum(r, pair.seg1);
      double l0 = pair.label == 0 ? 1.0 : 0.0;
      double residual = sigmoid(u) - l0;  // dL/du
      for (auto [s, a] : pair.seg0) gx += residual * jac.row(s * A + a).transpose();
      for (auto [s, a] : pair.seg1) gx -= residual * jac.row(s * A + a).transpose();
    }
    return std::make_pair(gx, Mat(Mat::Zero(y.table.rows(), y.table.cols())));
  };
  return obj;
}

PreferenceDataset collect_and_label_segments(const ParamMDP& mdp, const Vec& x,
                                             const Mat& true_reward, const Policy& pi,
                                             const SegmentConfig& cfg) {
  require(true_reward.rows() == mdp.n_states && true_reward.cols() == mdp.n_actions,
          "ground-truth reward shape mismatch");
  require(cfg.segment_len >= 1 && cfg.n_pairs >= 1, "segment config must be positive");
  const MdpTables t = materialize(mdp, x);
  const Mat dist = pi.distribution();
  SplitMix64 rng(cfg.seed);

  auto rollout = [&](std::vector<std::pair<int, int>>& seg, double& truth) {
    seg.clear();
    truth = 0.0;
    int s = rng.next_categorical(mdp.initial_dist);
    for (int step = 0; step < cfg.segment_len; ++step) {
      int a = rng.next_categorical(Vec(dist.row(s)));
      seg.emplace_back(s, a);
      truth += true_reward(s, a);
      s = rng.next_categorical(Vec(t.transition.row(s * mdp.n_actions + a)));
    }
  };

  PreferenceDataset data;
  data.segment_len = cfg.segment_len;
  data.pairs.reserve(size_t(cfg.n_pairs));
  for (int i = 0; i < cfg.n_pairs; ++i) {
    PreferenceDataset::LabeledPair pair;
    double truth0 = 0.0, truth1 = 0.0;
    rollout(pair.seg0, truth0);
    rollout(pair.seg1, truth1);
    if (truth0 == truth1) {
      pair.label = 0;  // tie: first segment wins
      ++data.ties;
    } else {
      pair.label = truth0 > truth1 ? 0 : 1;
    }
    data.pairs.push_back(std::move(pair));
  }
  return data;
}

double kendall_tau(const Mat& a, const Mat& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "kendall_tau: shape mismatch");
  const long n = a.size();
  require(n >= 2, "kendall_tau needs at least two entries");
  long concordant = 0, discordant = 0;
  for (long i = 0; i < n; ++i)
    for (long j = i + 1; j < n; ++j) {
      double da = a(i % a.rows(), i / a.rows()) - a(j % a.rows(), j / a.rows());
      double db = b(i % b.rows(), i / b.rows()) - b(j % b.rows(), j / b.rows());
      double prod = da * db;
      if (prod > 0) ++concordant;
      else if (prod < 0) ++discordant;
    }
  return double(concordant - discordant) / (0.5 * double(n) * double(n - 1));
}

UpperObjective reward_shaping_objective(const ParamMDP& original, int dim_x) {
  UpperObjective obj;
  obj.value = [original](const Vec&, const Policy& y) {
    return -evaluate_value_exact_rho(original, Vec::Zero(0), y);
  };
  obj.grad = [original, dim_x](const Vec&, const Policy& y) {
    Mat gy = -policy_gradient_exact(original, Vec::Zero(0), y);
    return std::make_pair(Vec(Vec::Zero(dim_x)), gy);
  };
  return obj;
}

double designer_value(const DesignerSpec& d, const JointPolicy& pi) {
  const int A1 = pi.pi1.n_actions(), A2 = pi.pi2.n_actions();
  PlayerView view = designer_view(d, pi.pi2.distribution(), 1, A1, A2);
  return d.initial_dist.dot(view_value(view, d.gamma, pi.pi1));
}

ZeroSumBilevelProblem incentive_problem(DesignerSpec designer, ZeroSumGame game) {
  const int S = game.n_states, A1 = game.n_actions1, A2 = game.n_actions2;
  require(designer.transition.rows() == S * A1 * A2 && designer.transition.cols() == S,
          "designer transition shape mismatch");
  require(designer.reward.rows() == S && designer.reward.cols() == A1 * A2,
          "designer reward shape mismatch");
  require(int(designer.cost.size()) == S, "designer cost shape mismatch");
  require(designer.gamma == game.gamma, "designer and game discount factors must match");

  auto d = std::make_shared<const DesignerSpec>(std::move(designer));
  ZeroSumBilevelProblem problem;
  problem.x0 = Vec::Zero(game.reward_map.dim_x);
  problem.game = std::move(game);
  problem.f = [d](const Vec&, const JointPolicy& pi) { return -designer_value(*d, pi); };
  problem.grad_f = [d, A1, A2](const Vec& x, const JointPolicy& pi) {
    PlayerView v1 = designer_view(*d, pi.pi2.distribution(), 1, A1, A2);
    PlayerView v2 = designer_view(*d, pi.pi1.distribution(), 2, A1, A2);
    Mat g1 = -view_policy_gradient(v1, d->gamma, pi.pi1, d->initial_dist);
    Mat g2 = -view_policy_gradient(v2, d->gamma, pi.pi2, d->initial_dist);
    return std::make_tuple(Vec(Vec::Zero(x.size())), g1, g2);
  };
  problem.grad_f_mc = [d, A1, A2](const Vec& x, const JointPolicy& pi, const McConfig& mc) {
    SplitMix64 rng(mc.rng_seed);
    PlayerView v1 = designer_view(*d, pi.pi2.distribution(), 1, A1, A2);
    PlayerView v2 = designer_view(*d, pi.pi1.distribution(), 2, A1, A2);
    Mat g1 = -mc_view_policy_gradient(v1, d->gamma, pi.pi1, d->initial_dist, mc.traj_len,
                                      mc.batch, rng);
    Mat g2 = -mc_view_policy_gradient(v2, d->gamma, pi.pi2, d->initial_dist, mc.traj_len,
                                      mc.batch, rng);
    return std::make_tuple(Vec(Vec::Zero(x.size())), g1, g2);
  };
  return problem;
}

}  // namespace pbrl
