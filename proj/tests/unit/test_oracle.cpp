#include <doctest.h>

#include <random>

#include "uarl/error.hpp"
#include "uarl/kernels.hpp"
#include "uarl/oracle.hpp"

using namespace uarl;

namespace {

Mat line_metric(int n) {
  Mat g(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) g(i, j) = std::abs(i - j);
  }
  return g;
}

std::vector<double> random_simplex(int n, Rng& rng) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> p(static_cast<std::size_t>(n));
  double s = 0;
  for (auto& v : p) s += (v = e(rng));
  for (auto& v : p) v /= s;
  return p;
}

}  // namespace

TEST_CASE("W1 on a line equals the CDF difference area") {
  const Mat g = line_metric(6);
  const std::vector<double> a{1, 0, 0, 0, 0, 0}, b{0, 0, 1, 0, 0, 0};
  CHECK(w1_discrete(a, b, g) == doctest::Approx(2.0));
  CHECK(w1_discrete(a, a, g) == 0.0);
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    const auto p = random_simplex(6, rng);
    const auto q = random_simplex(6, rng);
    double cp = 0, cq = 0, area = 0;
    for (int i = 0; i < 5; ++i) {
      cp += p[i];
      cq += q[i];
      area += std::abs(cp - cq);
    }
    CHECK(w1_discrete(p, q, g) == doctest::Approx(area).epsilon(1e-10));
  }
}

TEST_CASE("W1 is symmetric and obeys the triangle inequality") {
  Rng rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  const int n = 5;
  std::vector<Eigen::Vector2d> pts(n);
  for (auto& x : pts) x = {u(rng), u(rng)};
  Mat g(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) g(i, j) = (pts[i] - pts[j]).norm();
  }
  for (int t = 0; t < 30; ++t) {
    const auto p = random_simplex(n, rng), q = random_simplex(n, rng), r = random_simplex(n, rng);
    const double pq = w1_discrete(p, q, g);
    CHECK(pq == doctest::Approx(w1_discrete(q, p, g)).epsilon(1e-10));
    CHECK(pq <= w1_discrete(p, r, g) + w1_discrete(r, q, g) + 1e-12);
  }
  const std::vector<double> bad{0.5, 0.6, 0, 0, 0};
  CHECK_THROWS_AS(w1_discrete(bad, bad, g), InvalidArgument);
}

TEST_CASE("policy evaluation agrees with a direct linear solve") {
  const auto mdp = build_slipgrid(3, 3, 0.2, 0.9);
  const TabularPolicy pi{0, 2, 1, 3, 0, 0, 2, 2, 1};
  const auto q = exact_q(mdp, pi);
  const int np = mdp.n_pairs();
  Mat A = Mat::Identity(np, np);
  Vec r(np);
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      const int i = s * mdp.n_actions + a;
      r[i] = mdp.R(s, a);
      for (int s2 = 0; s2 < mdp.n_states; ++s2) A(i, s2 * mdp.n_actions + pi[s2]) -= mdp.gamma * mdp.T(s, a, s2);
    }
  }
  const Vec direct = A.partialPivLu().solve(r);
  CHECK((direct - q.q).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((exact_q(mdp, pi, false).q - q.q).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("optimal values dominate every policy's values") {
  const auto mdp = build_slipgrid(3, 3, 0.1, 0.9);
  const auto qs = optimal_q(mdp);
  const auto greedy = greedy_policy(qs);
  const Vec vstar = state_values(qs, greedy);
  const Vec vg = state_values(exact_q(mdp, greedy), greedy);
  CHECK((vstar - vg).cwiseAbs().maxCoeff() < 1e-9);
  const TabularPolicy stay(9, 1);
  CHECK((vstar - state_values(exact_q(mdp, stay), stay)).minCoeff() >= -1e-12);
}

TEST_CASE("Bellman kernels match their serial references") {
  const auto mdp = build_slipgrid(6, 5, 0.3, 0.95);
  Rng rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  Vec q(mdp.n_pairs());
  for (auto& v : q) v = u(rng);
  TabularPolicy pi(static_cast<std::size_t>(mdp.n_states));
  for (auto& a : pi) a = static_cast<int>(rng() % 4);
  Vec a1, a2, b1, b2;
  kernels::bellman_backup(mdp, pi, q, a1);
  kernels::reference::bellman_backup(mdp, pi, q, a2);
  kernels::optimality_backup(mdp, q, b1);
  kernels::reference::optimality_backup(mdp, q, b2);
  CHECK((a1 - a2).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((b1 - b2).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((bellman_apply(mdp, pi, q) - a1).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("perturbation and value-error certificates hold on random mixtures") {
  for (const char* check : {"operator_perturbation", "value_error_bound"}) {
    for (const auto& c : run_certificate_sweep(check, 20, 4)) {
      CHECK(c.holds);
      CHECK_FALSE(c.counterexample.has_value());
    }
  }
}

TEST_CASE("critic gap always exceeds the residual lower bound") {
  for (const auto& c : run_certificate_sweep("critic_gap", 20, 6)) {
    CHECK(c.lhs + 1e-10 >= c.details.at("residual_lower_bound").get<double>());
  }
}

TEST_CASE("weighted mean distance equals the covariance identity") {
  Rng rng(11);
  for (int t = 0; t < 20; ++t) {
    const auto b = random_bias_construction(rng, 100);
    const auto c = check_bias_reduction(b.phi, b.sigma2, b.roles, b.phi_t);
    CHECK(c.lhs == doctest::Approx(c.details.at("identity_rhs").get<double>()).epsilon(1e-10));
  }
}

TEST_CASE("fitted Q on the target's own data recovers the optimal policy") {
  const auto certs = check_fitted_q(200);
  REQUIRE(certs.size() == 2);
  CHECK(certs[1].lhs < 1e-8);
  CHECK(certs[0].lhs <= certs[0].rhs);
}

TEST_CASE("weighted backup refuses pairs without samples") {
  const auto sc = bundled_fitted_q_scenario();
  const std::vector<TaggedSample> one{{0, 0, 0.0}};
  const std::vector<double> w{1.0};
  CHECK_THROWS_AS(weighted_bellman_apply(sc.family, one, w, Vec::Zero(sc.family(0.0).n_pairs()), {}),
                  InvalidArgument);
}
