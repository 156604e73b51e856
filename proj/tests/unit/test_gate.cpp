#include <doctest.h>

#include <numeric>

#include "helpers.hpp"
#include "uarl/error.hpp"
#include "uarl/gate.hpp"

using namespace uarl;

TEST_CASE("percentile threshold interpolates linearly") {
  std::vector<double> x(100);
  std::iota(x.begin(), x.end(), 1.0);
  CHECK(threshold_percentile(x, 95) == doctest::Approx(95.05));
  CHECK(threshold_percentile(x, 100) == 100.0);
  CHECK_THROWS_AS(threshold_percentile(std::vector<double>(19, 1.0), 95), InvalidArgument);
  CHECK_THROWS_AS(threshold_percentile(x, 0), InvalidArgument);
}

TEST_CASE("samples above the percentile threshold match the interpolation rank") {
  Rng rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (int n : {20, 21, 57, 100, 333}) {
    for (double p : {50.0, 90.0, 95.0, 99.0}) {
      std::vector<double> x(static_cast<std::size_t>(n));
      for (auto& v : x) v = u(rng);
      const double tau = threshold_percentile(x, p);
      const auto above = std::count_if(x.begin(), x.end(), [&](double v) { return v > tau; });
      const auto expected = n - 1 - static_cast<long>(std::floor(p / 100.0 * (n - 1)));
      CHECK(above == expected);
    }
  }
}

TEST_CASE("Gaussian threshold matches the normal quantile and shrinks with N") {
  CHECK(threshold_gaussian(1.0, 4, 0.05) == doctest::Approx(1.8224).epsilon(1e-4));
  double prev = threshold_gaussian(1.0, 2, 0.05);
  for (int n = 3; n <= 64; ++n) {
    const double t = threshold_gaussian(1.0, n, 0.05);
    CHECK(t < prev);
    prev = t;
  }
  CHECK_THROWS_AS(threshold_gaussian(1.0, 1, 0.05), InvalidArgument);
  CHECK_THROWS_AS(threshold_gaussian(0.0, 4, 0.05), InvalidArgument);
}

TEST_CASE("gate deploys when the target variance does not exceed tau") {
  const auto nom = testing::small_dataset(Role::nominal);
  const auto e = init_ensemble(3, 4, 2, 2, StateNormalizer::fit(nom), 8);
  const auto tp = nom.retagged(Role::target_proxy);
  const double m = variance_trace(e, tp).mean();
  GateConfig cfg;
  const std::vector<double> low(30, m * 0.5);
  const std::vector<double> high(30, m);
  CHECK(gate_decision(e, tp, cfg, low).decision == Decision::proceed);
  CHECK(gate_decision(e, tp, cfg, high).decision == Decision::deploy);
  const auto r = gate_decision(e, tp, cfg, high);
  CHECK(r.traces.size() == tp.episodes().size());
  CHECK(to_string(Decision::proceed) == "continue");
}

TEST_CASE("episode means average each episode's trace") {
  const auto nom = testing::small_dataset(Role::nominal);
  const auto e = init_ensemble(3, 4, 2, 2, StateNormalizer::fit(nom), 8);
  const Vec trace = variance_trace(e, nom);
  const auto means = episode_mean_variances(e, nom);
  REQUIRE(means.size() == nom.episodes().size());
  const auto len = static_cast<Eigen::Index>(nom.episodes()[0].size());
  CHECK(means[0] == doctest::Approx(trace.head(len).mean()));
}

TEST_CASE("KL coverage separates uniform from concentrated samples") {
  Rng rng(1);
  std::uniform_real_distribution<double> u(1.0, 5.0);
  std::vector<double> flat(2000), spike(2000, 1.1);
  for (auto& v : flat) v = u(rng);
  CHECK(kl_coverage(flat, {1.0, 5.0}, 0.25).covered);
  const auto c = kl_coverage(spike, {1.0, 5.0}, 0.25);
  CHECK_FALSE(c.covered);
  CHECK(c.kl == doctest::Approx(std::log(16.0)));
  CHECK(kl_coverage(spike, {1.1, 1.1}, 0.25).kl == 0.0);
  CHECK_THROWS_AS(kl_coverage(std::vector<double>(10, 1.0), {1.0, 2.0}, 0.25), InvalidArgument);
}

TEST_CASE("gate config validates fields") {
  GateConfig c;
  c.id_episodes = 5;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  nlohmann::json j = GateConfig{};
  j["mode"] = "gaussian";
  CHECK(j.get<GateConfig>().mode == ThresholdMode::gaussian);
  j["extra"] = true;
  CHECK_THROWS_AS(j.get<GateConfig>(), InvalidArgument);
}
