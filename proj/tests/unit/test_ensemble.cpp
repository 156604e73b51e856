#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "uarl/ensemble.hpp"
#include "uarl/error.hpp"

using namespace uarl;

namespace {

// Max-norm relative error between two gradient vectors.
double rel_err(const Vec& a, const Vec& b) {
  const double scale = std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
  if (scale == 0.0) return 0.0;
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

template <class F>
Vec central_diff(Vec& params, F&& f, double h = 1e-6) {
  Vec g(params.size());
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double up = f();
    params[i] = keep - h;
    const double down = f();
    params[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("mean_var uses the population divisor") {
  const auto s = mean_var(Vec{{1.0, 2.0, 3.0, 4.0}});
  CHECK(s.mu == doctest::Approx(2.5));
  CHECK(s.sigma2 == doctest::Approx(1.25));
  CHECK_THROWS_AS(mean_var(Vec{{1.0}}), InvalidArgument);
}

TEST_CASE("squared distance to a reference splits into variance and bias") {
  Rng rng(3);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 7;
    Vec q(n);
    for (auto& v : q) v = u(rng);
    const double ref = u(rng);
    const auto s = mean_var(q);
    const double lhs = (q.array() - ref).square().mean();
    CHECK(std::abs(lhs - (s.sigma2 + (s.mu - ref) * (s.mu - ref))) < 1e-9);
  }
}

TEST_CASE("ensemble members are independent and predict rejects bad input") {
  const auto e = init_ensemble(4, 4, 2, 11);
  const Vec s = Vec::Ones(4);
  const Vec a = Vec::Zero(2);
  const Vec q = e.predict(s, a);
  CHECK(q.size() == 4);
  CHECK(mean_var(q).sigma2 > 0.0);
  Vec bad = s;
  bad[0] = std::nan("");
  CHECK_THROWS_AS(e.predict(bad, a), InvalidArgument);
  CHECK_THROWS_AS(e.predict(Vec::Ones(3), a), InvalidArgument);
  CHECK_THROWS_AS(init_ensemble(1, 4, 2, 0), InvalidArgument);
}

TEST_CASE("critic and diversity gradients match finite differences") {
  const auto nom = testing::small_dataset(Role::nominal);
  const auto rep = testing::small_dataset(Role::repulsive, 5.0);
  auto e = init_ensemble(3, 4, 2, 5, StateNormalizer::fit(nom), 8);
  Rng rng(9);
  std::vector<std::size_t> idx(12);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = (i * 37) % nom.size();
  const Batch nb = make_batch(nom, idx);
  Batch rb = make_batch(rep, idx);
  rb.role = Role::repulsive;
  const Vec y = Vec::NullaryExpr(nb.size(), [&] { return std::normal_distribution<>(0, 1)(rng); });
  const Mat next = testing::random_mat(2, rb.size(), rng, 0.3);

  for (double delta : {0.5, 2.0}) {
    CriticLossInputs in{&nb, &y, &rb, &next, 0.7, delta, 0.95};
    for (int m = 0; m < e.size(); ++m) {
      const auto loss = critic_loss(e, m, in);
      auto& p = e.member(m).online.params();
      const Vec fd = central_diff(p, [&] { return critic_loss(e, m, in).total; });
      CHECK(rel_err(loss.grad, fd) < 1e-4);

      const auto div = diversity_loss(e, m, rb, next, delta, 0.95);
      const Vec fd_div = central_diff(p, [&] { return diversity_loss(e, m, rb, next, delta, 0.95).value; });
      CHECK(rel_err(div.grad, fd_div) < 1e-4);
    }
  }
}

TEST_CASE("diversity term refuses non-repulsive batches") {
  const auto nom = testing::small_dataset(Role::nominal);
  const auto e = init_ensemble(2, 4, 2, 1);
  const Batch b = full_batch(nom);
  const Mat next = Mat::Zero(2, b.size());
  CHECK_THROWS_AS(diversity_loss(e, 0, b, next, 0.1, 0.9), RoleError);
  const Vec y = Vec::Zero(b.size());
  CriticLossInputs in{&b, &y, &b, &next, 1.0, 0.1, 0.9};
  CHECK_THROWS_AS(critic_loss(e, 0, in), RoleError);
}

TEST_CASE("adaptive lambda keeps the diversity share at the target fraction") {
  const double l = adaptive_lambda(2.0, 0.5, 0.1);
  CHECK(l * 0.5 / (2.0 + l * 0.5) == doctest::Approx(0.1));
  CHECK(adaptive_lambda(0.0, 1.0, 0.1, 3.0) == 0.0);
  CHECK(adaptive_lambda(1.0, 0.0, 0.1, 3.0) == 3.0);
  CHECK(adaptive_lambda(std::nan(""), 1.0, 0.1, 4.0) == 4.0);
  CHECK_THROWS_AS(adaptive_lambda(1.0, 1.0, 1.0), InvalidArgument);
}

TEST_CASE("ensemble checkpoint round trip is exact") {
  const auto e = init_ensemble(3, 4, 2, 17, StateNormalizer::identity(4), 8);
  const auto path = std::filesystem::temp_directory_path() / "uarl_ens_roundtrip.json";
  save_ensemble(e, path);
  const auto back = load_ensemble(path);
  REQUIRE(back.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(back.member(i).online.params() == e.member(i).online.params());
    CHECK(back.member(i).target.params() == e.member(i).target.params());
  }
  std::filesystem::remove(path);
}
