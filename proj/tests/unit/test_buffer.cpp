#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include "helpers.hpp"
#include "uarl/buffer.hpp"
#include "uarl/error.hpp"

using namespace uarl;

TEST_CASE("weights follow the role rule") {
  CHECK(sample_weight(0.5, Role::nominal) == 0.5);
  CHECK(sample_weight(0.5, Role::repulsive) == 2.0);
  CHECK(sample_weight(0.0, Role::repulsive) == 1.0 / kVarianceFloor);
  CHECK(sample_weight(0.0, Role::nominal) == kVarianceFloor);
  CHECK_THROWS_AS(sample_weight(1.0, Role::target_proxy), RoleError);
}

TEST_CASE("three transitions with weights 1 and 3 are drawn in proportion") {
  const auto d = testing::small_dataset(Role::nominal, 1.0, 1);
  std::vector<std::vector<Transition>> eps{{d[0], d[1]}};
  const Dataset two(Role::nominal, d.provenance(), eps);
  const BalancedBuffer buf({two}, {1.0, 3.0}, {1.0, 3.0});
  Rng rng(4);
  const auto idx = buf.sample_indices(100000, rng);
  double ones = 0;
  for (auto i : idx) ones += (i == 1);
  CHECK(ones / 1e5 == doctest::Approx(0.75).epsilon(0.01));
}

TEST_CASE("sampling frequencies pass a chi-square test against the weights") {
  const auto d = testing::small_dataset(Role::nominal, 1.0, 1);
  const auto n = d.size();
  Rng rng(12);
  std::uniform_real_distribution<double> u(0.05, 2.0);
  std::vector<double> s2(n), w(n);
  for (std::size_t i = 0; i < n; ++i) {
    s2[i] = u(rng);
    w[i] = sample_weight(s2[i], Role::repulsive);
  }
  const BalancedBuffer buf({d}, s2, w);
  const std::size_t draws = 100000;
  std::vector<double> counts(n, 0.0);
  for (auto i : buf.sample_indices(draws, rng)) counts[i] += 1;
  double stat = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = buf.probabilities()[i] * draws;
    stat += (counts[i] - e) * (counts[i] - e) / e;
  }
  const boost::math::chi_squared chi(static_cast<double>(n - 1));
  CHECK(boost::math::cdf(boost::math::complement(chi, stat)) > 0.01);
}

TEST_CASE("buffer construction is validated") {
  const auto d = testing::small_dataset(Role::nominal, 1.0, 1);
  const std::vector<double> ok(d.size(), 1.0);
  std::vector<double> bad = ok;
  bad[0] = 0.0;
  CHECK_THROWS_AS(BalancedBuffer({d}, ok, bad), InvalidArgument);
  CHECK_THROWS_AS(BalancedBuffer({d}, ok, std::vector<double>(3, 1.0)), InvalidArgument);
  CHECK_THROWS_AS(BalancedBuffer({}, {}, {}), InvalidArgument);
  CHECK(BalancedBuffer::uniform({d}).is_uniform());
}

TEST_CASE("merging refuses target-proxy data") {
  const auto d = testing::small_dataset(Role::nominal);
  const auto e = init_ensemble(2, 4, 2, 1);
  CHECK_THROWS_AS(merge_balanced({d, d.retagged(Role::target_proxy)}, e), RoleError);
  const auto buf = merge_balanced({d, d}, e);
  CHECK(buf.size() == 2 * d.size());
  for (std::size_t i = 0; i < buf.size(); ++i) CHECK(buf.weights()[i] == doctest::Approx(std::max(buf.sigma2()[i], kVarianceFloor)));
}
