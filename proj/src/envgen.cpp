#include "pbrl/envgen.hpp"

#include <fstream>
#include <sstream>

#include "pbrl/io.hpp"
#include "pbrl/rng.hpp"

namespace pbrl {

namespace {

Mat uniform_matrix(SplitMix64& rng, int rows, int cols) {
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.next_double();
  return m;
}

Mat sparsified_rewards(SplitMix64& rng, int rows, int cols, double threshold) {
  Mat m = uniform_matrix(rng, rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      if (m(i, j) < threshold) m(i, j) = 0.0;
  return m;
}

// Uniform [0,1] entries normalized per row; strictly positive rows, so the
// chain is irreducible under any policy.
Mat random_transitions(SplitMix64& rng, int rows, int n_states) {
  Mat p(rows, n_states);
  for (int i = 0; i < rows; ++i) {
    double sum = 0.0;
    for (int j = 0; j < n_states; ++j) {
      // Bound entries away from zero so normalized rows stay positive.
      p(i, j) = 1e-3 + rng.next_double();
      sum += p(i, j);
    }
    p.row(i) /= sum;
  }
  return p;
}

std::string reg_kind_name(Regularizer::Kind k) {
  switch (k) {
    case Regularizer::Kind::None: return "none";
    case Regularizer::Kind::NegEntropy: return "neg_entropy";
    case Regularizer::Kind::KLToReference: return "kl";
    case Regularizer::Kind::SquaredL2: return "squared_l2";
  }
  return "none";
}

Regularizer::Kind reg_kind_from_name(const std::string& name) {
  if (name == "none") return Regularizer::Kind::None;
  if (name == "neg_entropy") return Regularizer::Kind::NegEntropy;
  if (name == "kl") return Regularizer::Kind::KLToReference;
  if (name == "squared_l2") return Regularizer::Kind::SquaredL2;
  throw ValidationError("unknown regularizer kind '" + name + "'");
}

}  // namespace

void EnvRecipe::validate() const {
  require(n_states > 0 && n_actions1 > 0 && n_actions2 > 0, "recipe sizes must be positive");
  require(sparsity >= 0.0 && sparsity <= 1.0, "sparsity threshold must lie in [0, 1]");
  require(gamma >= 0.0 && gamma < 1.0, "gamma must lie in [0, 1)");
  require(tau >= 0.0, "tau must be nonnegative");
}

StackelbergGame gen_stackelberg(const EnvRecipe& recipe) {
  recipe.validate();
  SplitMix64 rng(SplitMix64::derive(recipe.seed, 0x57ac));
  const int S = recipe.n_states, Al = recipe.n_actions1, Af = recipe.n_actions2;

  StackelbergGame g;
  g.n_states = S;
  g.n_actions_leader = Al;
  g.n_actions_follower = Af;
  g.gamma = recipe.gamma;
  g.tau = recipe.tau;
  g.reg_leader = make_neg_entropy();
  g.reg_follower = make_neg_entropy();
  g.reward_leader = sparsified_rewards(rng, S, Al * Af, recipe.sparsity);
  g.reward_follower = sparsified_rewards(rng, S, Al * Af, recipe.sparsity);
  g.transition = random_transitions(rng, S * Al * Af, S);
  g.initial_dist = Vec::Constant(S, 1.0 / S);
  g.validate();
  return g;
}

IncentiveInstance gen_incentive(const EnvRecipe& recipe) {
  recipe.validate();
  SplitMix64 rng(SplitMix64::derive(recipe.seed, 0x1ce2));
  const int S = recipe.n_states, A1 = recipe.n_actions1, A2 = recipe.n_actions2;

  IncentiveInstance inst;
  inst.game.n_states = S;
  inst.game.n_actions1 = A1;
  inst.game.n_actions2 = A2;
  inst.game.gamma = recipe.gamma;
  inst.game.tau = recipe.tau;
  inst.game.regularizer = make_neg_entropy();
  inst.base_reward = uniform_matrix(rng, S, A1 * A2);
  inst.incentive_scale = 0.2;
  inst.game.reward_map = sigmoid_incentive_reward(inst.base_reward, inst.incentive_scale);
  inst.game.transition = random_transitions(rng, S * A1 * A2, S);
  inst.game.initial_dist = Vec::Constant(S, 1.0 / S);

  inst.designer.transition = random_transitions(rng, S * A1 * A2, S);
  inst.designer.reward = uniform_matrix(rng, S, A1 * A2);
  inst.designer.cost = Vec::Zero(S);
  inst.designer.initial_dist = Vec::Constant(S, 1.0 / S);
  inst.designer.gamma = recipe.gamma;

  inst.game.validate(Vec::Zero(S * A1 * A2));
  return inst;
}

ParamMDP gen_sparse_chain(const EnvRecipe& recipe) {
  recipe.validate();
  const int n = recipe.n_states;
  ParamMDP mdp;
  mdp.n_states = n;
  mdp.n_actions = 2;
  mdp.gamma = recipe.gamma;
  mdp.tau = 0.0;
  mdp.regularizer = make_none();

  Mat r = Mat::Zero(n, 2);
  r.row(n - 1).setOnes();
  mdp.reward_map = fixed_reward(r);

  Mat p = Mat::Zero(n * 2, n);
  for (int s = 0; s < n; ++s) {
    p(s * 2 + 0, std::min(s + 1, n - 1)) = 1.0;  // advance
    p(s * 2 + 1, s) = 1.0;                       // stay
  }
  mdp.transition_map = fixed_transition(p);

  // Mass concentrated at the head of the chain; strictly positive everywhere
  // so the dominance constants stay defined.
  Vec rho(n);
  rho.setConstant(0.1 / std::max(n - 1, 1));
  rho[0] = 0.9;
  mdp.initial_dist = rho / rho.sum();
  mdp.validate(Vec::Zero(0));
  return mdp;
}

ParamMDP gen_random_mdp(const EnvRecipe& recipe) {
  recipe.validate();
  SplitMix64 rng(SplitMix64::derive(recipe.seed, 0x4d9b));
  const int S = recipe.n_states, A = recipe.n_actions1;
  ParamMDP mdp;
  mdp.n_states = S;
  mdp.n_actions = A;
  mdp.gamma = recipe.gamma;
  mdp.tau = recipe.tau;
  mdp.regularizer = recipe.tau > 0.0 ? make_neg_entropy() : make_none();
  mdp.reward_map = fixed_reward(uniform_matrix(rng, S, A));
  mdp.transition_map = fixed_transition(random_transitions(rng, S * A, S));
  mdp.initial_dist = Vec::Constant(S, 1.0 / S);
  mdp.validate(Vec::Zero(0));
  return mdp;
}

void save_stackelberg(std::ostream& out, const StackelbergGame& g) {
  io::write_kv(out, "pbrl-env", "v1");
  io::write_kv(out, "kind", "stackelberg");
  io::write_kv(out, "n_states", std::to_string(g.n_states));
  io::write_kv(out, "n_actions_leader", std::to_string(g.n_actions_leader));
  io::write_kv(out, "n_actions_follower", std::to_string(g.n_actions_follower));
  io::write_kv(out, "gamma", io::format_double(g.gamma));
  io::write_kv(out, "tau", io::format_double(g.tau));
  io::write_kv(out, "reg_leader", reg_kind_name(g.reg_leader.kind));
  io::write_kv(out, "reg_follower", reg_kind_name(g.reg_follower.kind));
  io::write_matrix(out, "reward_leader", g.reward_leader);
  io::write_matrix(out, "reward_follower", g.reward_follower);
  io::write_matrix(out, "transition", g.transition);
  io::write_vector(out, "initial_dist", g.initial_dist);
}

StackelbergGame load_stackelberg(std::istream& in) {
  require(io::expect_kv(in, "pbrl-env") == "v1", "unsupported env version");
  require(io::expect_kv(in, "kind") == "stackelberg", "not a stackelberg env");
  StackelbergGame g;
  g.n_states = std::stoi(io::expect_kv(in, "n_states"));
  g.n_actions_leader = std::stoi(io::expect_kv(in, "n_actions_leader"));
  g.n_actions_follower = std::stoi(io::expect_kv(in, "n_actions_follower"));
  g.gamma = io::parse_double(io::expect_kv(in, "gamma"));
  g.tau = io::parse_double(io::expect_kv(in, "tau"));
  Regularizer::Kind kl = reg_kind_from_name(io::expect_kv(in, "reg_leader"));
  Regularizer::Kind kf = reg_kind_from_name(io::expect_kv(in, "reg_follower"));
  g.reg_leader.kind = kl;
  g.reg_follower.kind = kf;
  const int ja = g.n_actions_leader * g.n_actions_follower;
  g.reward_leader = io::read_matrix(in, "reward_leader", g.n_states, ja);
  g.reward_follower = io::read_matrix(in, "reward_follower", g.n_states, ja);
  g.transition = io::read_matrix(in, "transition", g.n_states * ja, g.n_states);
  g.initial_dist = io::read_vector(in, "initial_dist", g.n_states);
  g.validate();
  return g;
}

void save_incentive(std::ostream& out, const IncentiveInstance& inst) {
  const ZeroSumGame& g = inst.game;
  io::write_kv(out, "pbrl-env", "v1");
  io::write_kv(out, "kind", "incentive");
  io::write_kv(out, "n_states", std::to_string(g.n_states));
  io::write_kv(out, "n_actions1", std::to_string(g.n_actions1));
  io::write_kv(out, "n_actions2", std::to_string(g.n_actions2));
  io::write_kv(out, "gamma", io::format_double(g.gamma));
  io::write_kv(out, "tau", io::format_double(g.tau));
  io::write_kv(out, "regularizer", reg_kind_name(g.regularizer.kind));
  io::write_kv(out, "incentive_scale", io::format_double(inst.incentive_scale));
  io::write_matrix(out, "base_reward", inst.base_reward);
  io::write_matrix(out, "transition", g.transition);
  io::write_vector(out, "initial_dist", g.initial_dist);
  io::write_matrix(out, "designer_transition", inst.designer.transition);
  io::write_matrix(out, "designer_reward", inst.designer.reward);
  io::write_vector(out, "designer_cost", inst.designer.cost);
  io::write_vector(out, "designer_initial_dist", inst.designer.initial_dist);
}

IncentiveInstance load_incentive(std::istream& in) {
  require(io::expect_kv(in, "pbrl-env") == "v1", "unsupported env version");
  require(io::expect_kv(in, "kind") == "incentive", "not an incentive env");
  IncentiveInstance inst;
  ZeroSumGame& g = inst.game;
  g.n_states = std::stoi(io::expect_kv(in, "n_states"));
  g.n_actions1 = std::stoi(io::expect_kv(in, "n_actions1"));
  g.n_actions2 = std::stoi(io::expect_kv(in, "n_actions2"));
  g.gamma = io::parse_double(io::expect_kv(in, "gamma"));
  g.tau = io::parse_double(io::expect_kv(in, "tau"));
  g.regularizer.kind = reg_kind_from_name(io::expect_kv(in, "regularizer"));
  inst.incentive_scale = io::parse_double(io::expect_kv(in, "incentive_scale"));
  const int ja = g.n_actions1 * g.n_actions2;
  inst.base_reward = io::read_matrix(in, "base_reward", g.n_states, ja);
  g.reward_map = sigmoid_incentive_reward(inst.base_reward, inst.incentive_scale);
  g.transition = io::read_matrix(in, "transition", g.n_states * ja, g.n_states);
  g.initial_dist = io::read_vector(in, "initial_dist", g.n_states);
  inst.designer.transition = io::read_matrix(in, "designer_transition", g.n_states * ja, g.n_states);
  inst.designer.reward = io::read_matrix(in, "designer_reward", g.n_states, ja);
  inst.designer.cost = io::read_vector(in, "designer_cost", g.n_states);
  inst.designer.initial_dist = io::read_vector(in, "designer_initial_dist", g.n_states);
  inst.designer.gamma = g.gamma;
  g.validate(Vec::Zero(g.reward_map.dim_x));
  return inst;
}

void save_mdp(std::ostream& out, const ParamMDP& mdp, const Vec& x) {
  io::write_kv(out, "pbrl-env", "v1");
  io::write_kv(out, "kind", "mdp");
  io::write_kv(out, "n_states", std::to_string(mdp.n_states));
  io::write_kv(out, "n_actions", std::to_string(mdp.n_actions));
  io::write_kv(out, "gamma", io::format_double(mdp.gamma));
  io::write_kv(out, "tau", io::format_double(mdp.tau));
  io::write_kv(out, "regularizer", reg_kind_name(mdp.regularizer.kind));
  io::write_matrix(out, "reward", mdp.reward_map.eval(x));
  io::write_matrix(out, "transition", mdp.transition_map.eval(x));
  io::write_vector(out, "initial_dist", mdp.initial_dist);
  if (mdp.regularizer.kind == Regularizer::Kind::KLToReference)
    io::write_matrix(out, "kl_reference", mdp.regularizer.reference);
}

ParamMDP load_mdp(std::istream& in) {
  require(io::expect_kv(in, "pbrl-env") == "v1", "unsupported env version");
  require(io::expect_kv(in, "kind") == "mdp", "not an mdp env");
  ParamMDP mdp;
  mdp.n_states = std::stoi(io::expect_kv(in, "n_states"));
  mdp.n_actions = std::stoi(io::expect_kv(in, "n_actions"));
  mdp.gamma = io::parse_double(io::expect_kv(in, "gamma"));
  mdp.tau = io::parse_double(io::expect_kv(in, "tau"));
  mdp.regularizer.kind = reg_kind_from_name(io::expect_kv(in, "regularizer"));
  mdp.reward_map = fixed_reward(io::read_matrix(in, "reward", mdp.n_states, mdp.n_actions));
  mdp.transition_map = fixed_transition(
      io::read_matrix(in, "transition", mdp.n_states * mdp.n_actions, mdp.n_states));
  mdp.initial_dist = io::read_vector(in, "initial_dist", mdp.n_states);
  if (mdp.regularizer.kind == Regularizer::Kind::KLToReference)
    mdp.regularizer.reference = io::read_matrix(in, "kl_reference", mdp.n_states, mdp.n_actions);
  mdp.validate(Vec::Zero(0));
  return mdp;
}

void save_stackelberg_file(const std::string& path, const StackelbergGame& g) {
  std::ofstream out(path);
  require(bool(out), "cannot open '" + path + "' for writing");
  save_stackelberg(out, g);
}

StackelbergGame load_stackelberg_file(const std::string& path) {
  std::ifstream in(path);
  require(bool(in), "cannot open '" + path + "'");
  return load_stackelberg(in);
}

}  // namespace pbrl
