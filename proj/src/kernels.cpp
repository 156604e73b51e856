#include "uarl/kernels.hpp"

#include <algorithm>
#include <limits>

#include "uarl/error.hpp"

namespace uarl::kernels {

Vec column_variance(const Mat& predictions) {
  const Eigen::Index n = predictions.rows();
  const Eigen::Index cols = predictions.cols();
  if (n < 2) throw InvalidArgument("column_variance needs at least two rows");
  Vec out(cols);
#pragma omp parallel for schedule(static)
  for (Eigen::Index c = 0; c < cols; ++c) {
    double mu = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) mu += predictions(i, c);
    mu /= static_cast<double>(n);
    double ss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = predictions(i, c) - mu;
      ss += d * d;
    }
    out[c] = ss / static_cast<double>(n);
  }
  return out;
}

Vec ensemble_variance(const CriticEnsemble& ensemble, const Mat& states, const Mat& actions,
                      Eigen::Index chunk) {
  const Eigen::Index total = states.cols();
  Vec out(total);
  const Eigen::Index n_chunks = (total + chunk - 1) / chunk;
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index k = 0; k < n_chunks; ++k) {
    const Eigen::Index begin = k * chunk;
    const Eigen::Index len = std::min(chunk, total - begin);
    const Mat preds = ensemble.predict(Mat(states.middleCols(begin, len)),
                                       Mat(actions.middleCols(begin, len)));
    out.segment(begin, len) = reference::column_variance(preds);
  }
  return out;
}

void bellman_backup(const TabularMDP& mdp, const std::vector<int>& policy, const Vec& q, Vec& out) {
  const int na = mdp.n_actions;
  const int ns = mdp.n_states;
  out.resize(mdp.n_pairs());
#pragma omp parallel for schedule(static)
  for (int sa = 0; sa < mdp.n_pairs(); ++sa) {
    const int s = sa / na;
    const int a = sa % na;
    double ev = 0.0;
    for (int s2 = 0; s2 < ns; ++s2) ev += mdp.T(s, a, s2) * q[s2 * na + policy[s2]];
    out[sa] = mdp.R(s, a) + mdp.gamma * ev;
  }
}

void optimality_backup(const TabularMDP& mdp, const Vec& q, Vec& out) {
  const int na = mdp.n_actions;
  const int ns = mdp.n_states;
  Vec v(ns);
  for (int s = 0; s < ns; ++s) v[s] = q.segment(s * na, na).maxCoeff();
  out.resize(mdp.n_pairs());
#pragma omp parallel for schedule(static)
  for (int sa = 0; sa < mdp.n_pairs(); ++sa) {
    const int s = sa / na;
    const int a = sa % na;
    double ev = 0.0;
    for (int s2 = 0; s2 < ns; ++s2) ev += mdp.T(s, a, s2) * v[s2];
    out[sa] = mdp.R(s, a) + mdp.gamma * ev;
  }
}

namespace reference {

Vec column_variance(const Mat& predictions) {
  Vec out(predictions.cols());
  for (Eigen::Index c = 0; c < predictions.cols(); ++c) {
    out[c] = mean_var(Vec(predictions.col(c))).sigma2;
  }
  return out;
}

Vec ensemble_variance(const CriticEnsemble& ensemble, const Mat& states, const Mat& actions) {
  Vec out(states.cols());
  for (Eigen::Index c = 0; c < states.cols(); ++c) {
    out[c] = mean_var(ensemble.predict(Vec(states.col(c)), Vec(actions.col(c)))).sigma2;
  }
  return out;
}

void bellman_backup(const TabularMDP& mdp, const std::vector<int>& policy, const Vec& q, Vec& out) {
  out.resize(mdp.n_pairs());
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      double ev = 0.0;
      for (int s2 = 0; s2 < mdp.n_states; ++s2) {
        ev += mdp.T(s, a, s2) * q[s2 * mdp.n_actions + policy[s2]];
      }
      out[s * mdp.n_actions + a] = mdp.R(s, a) + mdp.gamma * ev;
    }
  }
}

void optimality_backup(const TabularMDP& mdp, const Vec& q, Vec& out) {
  out.resize(mdp.n_pairs());
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      double ev = 0.0;
      for (int s2 = 0; s2 < mdp.n_states; ++s2) {
        double best = -std::numeric_limits<double>::infinity();
        for (int a2 = 0; a2 < mdp.n_actions; ++a2) best = std::max(best, q[s2 * mdp.n_actions + a2]);
        ev += mdp.T(s, a, s2) * best;
      }
      out[s * mdp.n_actions + a] = mdp.R(s, a) + mdp.gamma * ev;
    }
  }
}

}  // namespace reference

}  // namespace uarl::kernels
