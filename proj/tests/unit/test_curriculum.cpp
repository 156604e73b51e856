#include <doctest.h>

#include "helpers.hpp"
#include "uarl/audit.hpp"
#include "uarl/curriculum.hpp"

using namespace uarl;

TEST_CASE("a small curriculum walks every stage, persists artifacts and never leaks the proxy") {
  const auto env = testing::short_point_mass();
  const Schedule sch{Param::mass_mult, {{1.0, 3.0}, {1.0, 6.0}, {1.0, 9.0}}};
  DomainParams far = env.nominal_params;
  far.mass_mult = 8.0;
  const auto policy = scripted_behavior_policy(env);
  const auto tp = collect_rollouts(env, ParamRange::around(far, Param::mass_mult), *policy, 3, 5,
                                   Role::target_proxy);
  GateConfig gate;
  gate.id_episodes = 20;
  auto train = testing::tiny_config();
  CurriculumConfig cc;
  cc.nominal_episodes = 4;
  cc.repulsive_episodes = 4;
  cc.finetune_steps = 10;
  cc.stop_on_deploy = false;
  cc.report_params = far;
  cc.report_episodes = 2;
  cc.run_dir = std::filesystem::temp_directory_path() / "uarl_curriculum_unit";
  std::filesystem::remove_all(cc.run_dir);

  AccessAudit audit;
  const auto st = run_curriculum(env, sch, tp, gate, train, cc, &audit);
  REQUIRE(st.records.size() == 3);
  CHECK(st.datasets.size() == 4);
  CHECK(st.records[2].repulsive_range.active_interval() == Interval{1.0, 9.0});
  CHECK(st.records[1].buffer_datasets.size() == 2);
  CHECK(st.status != CurriculumStatus::running);
  CHECK(audit.violations() == 0);
  CHECK(audit.reads() >= 3);
  for (const auto& r : st.records) CHECK(std::isfinite(r.target_return));
  for (const char* f : {"reports/state.json", "reports/summary.csv", "reports/gate_2.json",
                        "reports/trace_0.csv", "reports/buffer_1.csv", "checkpoints/actor_2.json",
                        "datasets/D_3.jsonl", "datasets/target_proxy.jsonl"}) {
    CHECK_MESSAGE(std::filesystem::exists(cc.run_dir / f), f);
  }
  std::filesystem::remove_all(cc.run_dir);
}

TEST_CASE("a curriculum stopping on deploy ends at the first deploy decision") {
  const auto env = testing::short_point_mass();
  const Schedule sch{Param::mass_mult, {{1.0, 3.0}, {1.0, 6.0}}};
  const auto policy = scripted_behavior_policy(env);
  const auto tp = collect_rollouts(env, ParamRange::around(env.nominal_params, Param::mass_mult),
                                   *policy, 3, 5, Role::target_proxy);
  GateConfig gate;
  gate.id_episodes = 20;
  gate.percentile = 100;
  CurriculumConfig cc;
  cc.nominal_episodes = 4;
  cc.repulsive_episodes = 4;
  const auto st = run_curriculum(env, sch, tp, gate, testing::tiny_config(), cc);
  if (st.records.front().gate.decision == Decision::deploy) {
    CHECK(st.records.size() == 1);
    CHECK(st.status == CurriculumStatus::deployed);
  } else {
    CHECK(st.records.size() > 1);
  }
}
