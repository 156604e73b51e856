#include <doctest.h>

#include <filesystem>

#include "helpers.hpp"
#include "uarl/agent.hpp"
#include "uarl/buffer.hpp"
#include "uarl/error.hpp"

using namespace uarl;

TEST_CASE("target smoothing noise stays within the clip") {
  TrainConfig c;
  Rng rng(1);
  const Mat n = target_policy_noise(2, 5000, 2.0, c, rng);
  CHECK(n.cwiseAbs().maxCoeff() <= c.noise_clip * 2.0);
  CHECK(std::abs(n.mean()) < 0.05);
}

TEST_CASE("TD targets take the minimum over target critics and stop at terminals") {
  const auto nom = testing::small_dataset(Role::nominal);
  const auto e = init_ensemble(3, 4, 2, 4, StateNormalizer::fit(nom), 8);
  const Actor actor(4, 2, 1.0, StateNormalizer::fit(nom), 3, 8);
  Batch b = full_batch(nom);
  b.not_done[0] = 0.0;
  const Mat noise = Mat::Zero(2, b.size());
  const Vec y = td_targets(b, actor, e, 0.9, noise);
  const Mat q = e.predict_target(b.s2, actor.act_target(b.s2).cwiseMax(-1.0).cwiseMin(1.0));
  CHECK(y[0] == b.r[0]);
  for (Eigen::Index i = 1; i < 5; ++i) CHECK(y[i] == doctest::Approx(b.r[i] + 0.9 * q.col(i).minCoeff()));
}

TEST_CASE("actor gradient matches finite differences at a fixed Q scale") {
  const auto nom = testing::small_dataset(Role::nominal);
  const auto norm = StateNormalizer::fit(nom);
  const auto e = init_ensemble(2, 4, 2, 8, norm, 8);
  Actor actor(4, 2, 1.0, norm, 6, 8);
  const Batch b = full_batch(nom);
  const auto loss = actor_loss(actor, e, b, 2.5);
  auto& p = actor.net().params();
  Vec fd(p.size());
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double keep = p[i];
    p[i] = keep + h;
    const double up = actor_loss(actor, e, b, 2.5, loss.q_scale).value;
    p[i] = keep - h;
    const double down = actor_loss(actor, e, b, 2.5, loss.q_scale).value;
    p[i] = keep;
    fd[i] = (up - down) / (2 * h);
  }
  const double scale = std::max(fd.cwiseAbs().maxCoeff(), loss.grad.cwiseAbs().maxCoeff());
  CHECK((fd - loss.grad).cwiseAbs().maxCoeff() / scale < 1e-4);
}

TEST_CASE("soft updates move targets by the Polyak fraction") {
  auto e = init_ensemble(2, 4, 2, 1);
  e.member(0).online.params().setConstant(1.0);
  e.member(0).target.params().setZero();
  soft_update_targets(e, 0.25);
  CHECK(e.member(0).target.params()[0] == doctest::Approx(0.25));
  CHECK_THROWS_AS(soft_update_targets(e, 0.0), InvalidArgument);
}

TEST_CASE("parallel and serial member updates give identical parameters") {
  const auto nom = testing::small_dataset(Role::nominal);
  const auto rep = testing::small_dataset(Role::repulsive, 5.0);
  auto cfg = testing::tiny_config();
  const auto env = testing::short_point_mass();
  cfg.parallel = true;
  const auto a = train_offline(nom, rep, env, cfg);
  cfg.parallel = false;
  const auto b = train_offline(nom, rep, env, cfg);
  for (int i = 0; i < a.ensemble.size(); ++i) {
    CHECK(a.ensemble.member(i).online.params() == b.ensemble.member(i).online.params());
  }
  CHECK(a.actor->net().params() == b.actor->net().params());
}

TEST_CASE("lambda fraction zero reproduces the backbone") {
  const auto nom = testing::small_dataset(Role::nominal);
  const auto rep = testing::small_dataset(Role::repulsive, 5.0);
  auto cfg = testing::tiny_config();
  cfg.lambda_fraction = 0.0;
  const auto env = testing::short_point_mass();
  const auto with_div = train_offline(nom, rep, env, cfg);
  const auto plain = train_backbone(nom, env, cfg);
  REQUIRE(with_div.metrics.size() == plain.metrics.size());
  for (std::size_t i = 0; i < plain.metrics.size(); ++i) {
    CHECK(with_div.metrics[i].rl_loss == plain.metrics[i].rl_loss);
    CHECK(with_div.metrics[i].lambda == 0.0);
  }
  CHECK(with_div.actor->net().params() == plain.actor->net().params());
}

TEST_CASE("fine-tuning from fresh models on a uniform buffer equals offline training") {
  const auto nom = testing::small_dataset(Role::nominal);
  const auto rep = testing::small_dataset(Role::repulsive, 5.0);
  const auto cfg = testing::tiny_config();
  const auto env = testing::short_point_mass();
  const auto offline = train_offline(nom, rep, env, cfg);
  const auto fresh = init_models(nom, env, cfg);
  const auto tuned = finetune(*fresh.actor, fresh.ensemble, BalancedBuffer::uniform({nom}), rep, env, cfg);
  CHECK(tuned.actor->net().params() == offline.actor->net().params());
  CHECK(tuned.ensemble.member(0).online.params() == offline.ensemble.member(0).online.params());
}

TEST_CASE("training entry points check dataset roles") {
  const auto nom = testing::small_dataset(Role::nominal);
  const auto env = testing::short_point_mass();
  const auto cfg = testing::tiny_config();
  CHECK_THROWS_AS(train_offline(nom, nom, env, cfg), RoleError);
  CHECK_THROWS_AS(train_backbone(nom.retagged(Role::target_proxy), env, cfg), RoleError);
}

TEST_CASE("train config rejects bad values and unknown keys") {
  TrainConfig c;
  c.batch_size = 0;
  CHECK_THROWS(c.validate());
  nlohmann::json j = TrainConfig{};
  j["bogus"] = 1;
  CHECK_THROWS(j.get<TrainConfig>());
}

TEST_CASE("actor checkpoint round trip is exact") {
  const Actor a(4, 2, 1.0, StateNormalizer::identity(4), 2, 8);
  const auto path = std::filesystem::temp_directory_path() / "uarl_actor_roundtrip.json";
  save_actor(a, path);
  const Actor b = load_actor(path);
  CHECK(b.net().params() == a.net().params());
  CHECK(b.target().params() == a.target().params());
  CHECK(b.bound() == a.bound());
  std::filesystem::remove(path);
}
