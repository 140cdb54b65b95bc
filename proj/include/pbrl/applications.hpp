#pragma once

#include <memory>
#include <vector>

#include "pbrl/loop.hpp"
#include "pbrl/zerosum.hpp"

namespace pbrl {

/// Follower-side parametric MDP of a Stackelberg game: x is the leader's
/// flattened softmax logits, r_x(s,a_f) = E_{a_l ~ pi_x}[r_f] and
/// P_x = E_{a_l ~ pi_x}[P]. The transition depends on x, so x-gradients go
/// through the Stackelberg score-function path, never the reward Jacobian.
ParamMDP stackelberg_reduce(std::shared_ptr<const StackelbergGame> game);

/// Full bilevel problem for a Stackelberg game: f(x,y) = -V_l^{pi_x,pi_y}(rho)
/// on the joint chain, lower level the reduction above, x0 = zero logits.
BilevelProblem make_stackelberg_problem(StackelbergGame game);

/// Leader's value V_l^{pi_x,pi_y}(rho) (includes the leader's regularizer).
double stackelberg_leader_value(const StackelbergGame& g, const Vec& leader_logits,
                                const Policy& follower);

/// Buffer of labeled segment pairs; label = 0 means the first segment is
/// preferred, 1 the second.
struct PreferenceDataset {
  struct LabeledPair {
    std::vector<std::pair<int, int>> seg0;  // (state, action)
    std::vector<std::pair<int, int>> seg1;
    int label = 0;
  };
  int segment_len = 0;
  std::vector<LabeledPair> pairs;
  int ties = 0;  // pairs whose ground-truth sums tied (labeled 0 by convention)
};

/// Bradley-Terry negative log-likelihood of the buffer under r_x, with its
/// closed-form gradient (logistic residuals times segment reward-sum
/// Jacobians). The y-gradient is zero: the buffer is fixed within a window.
UpperObjective preference_upper_objective(std::shared_ptr<const PreferenceDataset> data,
                                          const RewardMap& reward_map);

struct SegmentConfig {
  int segment_len = 5;
  int n_pairs = 500;
  uint64_t seed = 0;
};

/// Rolls out 2*n_pairs segments of length T under pi on the MDP's dynamics at
/// x and labels each pair by the higher ground-truth reward sum.
PreferenceDataset collect_and_label_segments(const ParamMDP& mdp, const Vec& x,
                                             const Mat& true_reward, const Policy& pi,
                                             const SegmentConfig& cfg);

/// Kendall tau-a rank correlation between two flattened score tables.
double kendall_tau(const Mat& a, const Mat& b);

/// Reward-shaping upper objective: f(x,y) = -V under the ORIGINAL reward for
/// pi_y; grad_x is identically zero (x only enters through the lower level).
UpperObjective reward_shaping_objective(const ParamMDP& original, int dim_x);

/// Incentive designer: own chain, reward and per-state cost. Shares the
/// state and joint-action spaces (and gamma) with the lower-level game.
struct DesignerSpec {
  Mat transition;  // (|S|*A1*A2) x |S|
  Mat reward;      // |S| x (A1*A2)
  Vec cost;        // |S|
  Vec initial_dist;
  double gamma = 0.9;
};

/// Designer's value E_{pi, P_id}[sum gamma^t (r_id - c)] from its initial
/// distribution.
double designer_value(const DesignerSpec& d, const JointPolicy& pi);

/// Bilevel incentive-design problem: f = -designer value, lower level the
/// zero-sum game whose reward map carries the incentive parameterization.
ZeroSumBilevelProblem incentive_problem(DesignerSpec designer, ZeroSumGame game);

}  // namespace pbrl
