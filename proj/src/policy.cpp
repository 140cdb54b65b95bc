#include "pbrl/policy.hpp"

#include <algorithm>
#include <cmath>

#include "pbrl/mdp.hpp"
#include "pbrl/rng.hpp"

namespace pbrl {

Mat Policy::distribution() const {
  return kind == ParamKind::Direct ? table : softmax_materialize(table);
}

Vec Policy::distribution_row(int state) const {
  return kind == ParamKind::Direct ? Vec(table.row(state))
                                   : softmax_row(table.row(state));
}

void Policy::validate() const {
  require(table.allFinite(), "policy table has non-finite entries");
  if (kind == ParamKind::Direct) {
    for (int s = 0; s < table.rows(); ++s) {
      require(table.row(s).minCoeff() >= -1e-12,
              "direct policy row has a negative entry");
      require(std::abs(table.row(s).sum() - 1.0) <= 1e-12,
              "direct policy row does not sum to 1");
    }
  }
}

Policy Policy::direct(Mat rows) { return Policy{ParamKind::Direct, std::move(rows)}; }

Policy Policy::softmax(Mat logits) { return Policy{ParamKind::Softmax, std::move(logits)}; }

Policy Policy::uniform(int n_states, int n_actions) {
  return direct(Mat::Constant(n_states, n_actions, 1.0 / n_actions));
}

Vec flatten_rows(const Mat& m) {
  Vec v(m.rows() * m.cols());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) v[i * m.cols() + j] = m(i, j);
  return v;
}

Mat unflatten_rows(const Vec& v, int rows, int cols) {
  require(int(v.size()) == rows * cols, "unflatten_rows: size mismatch");
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = v[i * cols + j];
  return m;
}

Vec project_simplex(const Vec& v) {
  require(v.allFinite(), "project_simplex: non-finite input");
  const int n = int(v.size());
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double css = 0.0, theta = 0.0;
  int k = 0;
  for (int j = 0; j < n; ++j) {
    css += u[size_t(j)];
    double t = (css - 1.0) / (j + 1);
    if (u[size_t(j)] - t > 0.0) {
      k = j + 1;
      theta = t;
    }
  }
  (void)k;
  Vec out(n);
  for (int i = 0; i < n; ++i) out[i] = std::max(v[i] - theta, 0.0);
  return out;
}

Mat project_simplex_rows(const Mat& m) {
  Mat out(m.rows(), m.cols());
  for (int s = 0; s < m.rows(); ++s) out.row(s) = project_simplex(m.row(s)).transpose();
  return out;
}

Vec softmax_row(const Vec& logits) {
  Vec z = (logits.array() - logits.maxCoeff()).exp();
  return z / z.sum();
}

Mat softmax_materialize(const Mat& logits) {
  require(logits.allFinite(), "softmax: non-finite logits");
  Mat out(logits.rows(), logits.cols());
  for (int s = 0; s < logits.rows(); ++s) out.row(s) = softmax_row(logits.row(s)).transpose();
  return out;
}

Mat softmax_chain_gradient(const Mat& logits, const Mat& grad_wrt_pi) {
  require(logits.rows() == grad_wrt_pi.rows() && logits.cols() == grad_wrt_pi.cols(),
          "softmax_chain_gradient: shape mismatch");
  Mat pi = softmax_materialize(logits);
  Mat out(logits.rows(), logits.cols());
  for (int s = 0; s < logits.rows(); ++s) {
    double inner = pi.row(s).dot(grad_wrt_pi.row(s));
    out.row(s) = pi.row(s).array() * (grad_wrt_pi.row(s).array() - inner);
  }
  return out;
}

Mat mc_policy_gradient(const ParamMDP& mdp, const Vec& x, const Policy& pi,
                       const McConfig& cfg) {
  require(cfg.traj_len >= 1, "mc_policy_gradient: traj_len must be >= 1");
  require(cfg.batch >= 1, "mc_policy_gradient: batch must be >= 1");
  const Mat dist = pi.distribution();
  const MdpTables t = materialize(mdp, x);
  const Mat q = exact::q_values(t, mdp.gamma, exact::value(t, mdp.gamma, mdp.tau, mdp.regularizer, pi));

  SplitMix64 rng(cfg.rng_seed);
  Mat grad = Mat::Zero(mdp.n_states, mdp.n_actions);
  for (int b = 0; b < cfg.batch; ++b) {
    int s = rng.next_categorical(mdp.initial_dist);
    double disc = 1.0;
    for (int step = 0; step < cfg.traj_len; ++step) {
      Vec row = dist.row(s);
      int a = rng.next_categorical(row);
      // Score of a direct parameterization is the indicator over pi(a|s);
      // the regularizer term is deterministic given the visited state.
      grad(s, a) += disc * q(s, a) / dist(s, a);
      if (mdp.tau != 0.0)
        grad.row(s) -= disc * mdp.tau * mdp.regularizer.grad(s, dist.row(s)).transpose();
      disc *= mdp.gamma;
      s = rng.next_categorical(Vec(t.transition.row(s * mdp.n_actions + a)));
      if (disc == 0.0) break;
    }
  }
  return grad / double(cfg.batch);
}

}  // namespace pbrl
