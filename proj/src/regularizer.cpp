#include "pbrl/regularizer.hpp"

#include <cmath>

namespace pbrl {

namespace {
constexpr double kProbFloor = 1e-12;

double xlogx(double p) { return p <= kProbFloor ? 0.0 : p * std::log(p); }
}  // namespace

double Regularizer::value(int state, const Vec& dist) const {
  switch (kind) {
    case Kind::None:
      return 0.0;
    case Kind::NegEntropy: {
      double s = 0.0;
      for (int a = 0; a < dist.size(); ++a) s += xlogx(dist[a]);
      return s + std::log(double(dist.size()));
    }
    case Kind::KLToReference: {
      double s = 0.0;
      for (int a = 0; a < dist.size(); ++a) {
        double ref = std::max(reference(state, a), kProbFloor);
        if (dist[a] > kProbFloor) s += dist[a] * std::log(dist[a] / ref);
      }
      return s;
    }
    case Kind::SquaredL2:
      return 0.5 * dist.squaredNorm();
  }
  return 0.0;
}

Vec Regularizer::grad(int state, const Vec& dist) const {
  Vec g = Vec::Zero(dist.size());
  switch (kind) {
    case Kind::None:
      break;
    case Kind::NegEntropy:
      for (int a = 0; a < dist.size(); ++a)
        g[a] = std::log(std::max(dist[a], kProbFloor)) + 1.0;
      break;
    case Kind::KLToReference:
      for (int a = 0; a < dist.size(); ++a) {
        double ref = std::max(reference(state, a), kProbFloor);
        g[a] = std::log(std::max(dist[a], kProbFloor) / ref) + 1.0;
      }
      break;
    case Kind::SquaredL2:
      g = dist;
      break;
  }
  return g;
}

Regularizer make_none() { return {}; }

Regularizer make_neg_entropy() {
  Regularizer r;
  r.kind = Regularizer::Kind::NegEntropy;
  return r;
}

Regularizer make_kl(Mat reference) {
  Regularizer r;
  r.kind = Regularizer::Kind::KLToReference;
  r.reference = std::move(reference);
  return r;
}

Regularizer make_squared_l2() {
  Regularizer r;
  r.kind = Regularizer::Kind::SquaredL2;
  return r;
}

std::pair<double, Vec> regularizer_value_and_grad(const Regularizer& reg, int state,
                                                  const Vec& dist) {
  return {reg.value(state, dist), reg.grad(state, dist)};
}

}  // namespace pbrl
