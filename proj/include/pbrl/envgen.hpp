#pragma once

#include <iosfwd>
#include <string>

#include "pbrl/applications.hpp"

namespace pbrl {

/// Random-environment recipe. seed + fields fully determine the instance
/// (SplitMix64 streams; see rng.hpp for the exact generator).
struct EnvRecipe {
  enum class Kind { RandomStackelberg, RandomIncentive, SparseChain, RandomMDP };
  Kind kind = Kind::RandomStackelberg;
  int n_states = 20;
  int n_actions1 = 5;  // leader / player 1 / plain action count
  int n_actions2 = 5;  // follower / player 2 (ignored by SparseChain, RandomMDP)
  double sparsity = 0.7;  // rewards below this are zeroed (Stackelberg only)
  double gamma = 0.9;
  double tau = 0.5;
  uint64_t seed = 0;

  void validate() const;
};

/// Rewards uniform on [0,1] with entries below the sparsity threshold zeroed
/// (transitions are never sparsified); transitions uniform, row-normalized;
/// uniform initial distribution; entropy regularizers for both players.
StackelbergGame gen_stackelberg(const EnvRecipe& recipe);

struct IncentiveInstance {
  DesignerSpec designer;
  ZeroSumGame game;  // reward map wired to base_reward + scale * sigmoid(x)
  Mat base_reward;
  double incentive_scale = 0.2;
};

/// Random designer and lower-level chains; r and r_id uniform on [0,1];
/// zero designer cost; players' reward r_x = r + 0.2 sigmoid(x(s,a1,a2)).
IncentiveInstance gen_incentive(const EnvRecipe& recipe);

/// Deterministic n-state chain, 2 actions (advance / stay), reward 1 in the
/// terminal absorbing state and 0 elsewhere. The reward-shaping testbed.
ParamMDP gen_sparse_chain(const EnvRecipe& recipe);

/// Dense random single-agent MDP (rewards uniform [0,1], random stochastic
/// transitions, uniform rho, entropy regularizer at recipe tau).
ParamMDP gen_random_mdp(const EnvRecipe& recipe);

// Structured-text environment fixtures ("pbrl-env v1" header, key/value
// lines, dense row-major tensors in round-trippable decimals). The MDP form
// stores the tables materialized at a given x.
void save_stackelberg(std::ostream& out, const StackelbergGame& g);
StackelbergGame load_stackelberg(std::istream& in);
void save_incentive(std::ostream& out, const IncentiveInstance& inst);
IncentiveInstance load_incentive(std::istream& in);
void save_mdp(std::ostream& out, const ParamMDP& mdp, const Vec& x);
ParamMDP load_mdp(std::istream& in);

void save_stackelberg_file(const std::string& path, const StackelbergGame& g);
StackelbergGame load_stackelberg_file(const std::string& path);

}  // namespace pbrl
