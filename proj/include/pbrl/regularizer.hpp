#pragma once

#include "pbrl/types.hpp"

namespace pbrl {

/// Per-state convex regularizer h_s on the action simplex.
///
/// All kinds are nonnegative on the simplex and 1-strongly convex in the
/// Euclidean norm on their effective domain (NegEntropy and KL are 1-strongly
/// convex w.r.t. the l1 norm, which dominates l2 on the simplex); SquaredL2
/// is 1-strongly convex in l2 exactly. None is only legal when tau = 0.
struct Regularizer {
  enum class Kind { None, NegEntropy, KLToReference, SquaredL2 };

  Kind kind = Kind::None;
  Mat reference;  // row-stochastic |S| x |A|, used by KLToReference only

  /// h_s(dist). NegEntropy is shifted by log|A| so its minimum (uniform) is 0.
  double value(int state, const Vec& dist) const;

  /// grad of h_s at dist. Probabilities are clamped at 1e-12 before logs so
  /// boundary points stay finite.
  Vec grad(int state, const Vec& dist) const;

  /// Strong-convexity modulus documented above (1.0 for all non-None kinds).
  double strong_convexity() const { return kind == Kind::None ? 0.0 : 1.0; }
};

Regularizer make_none();
Regularizer make_neg_entropy();
Regularizer make_kl(Mat reference);
Regularizer make_squared_l2();

/// (h_s(dist), grad h_s(dist)) in one call.
std::pair<double, Vec> regularizer_value_and_grad(const Regularizer& reg, int state,
                                                  const Vec& dist);

}  // namespace pbrl
