#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "uarl/error.hpp"

using namespace uarl;

namespace {

std::filesystem::path tmp(const char* name) { return std::filesystem::temp_directory_path() / name; }

}  // namespace

TEST_CASE("rollouts are reproducible and independent of scheduling") {
  const auto spec = testing::short_point_mass();
  auto range = ParamRange::around(spec.nominal_params, Param::mass_mult);
  range.interval(Param::mass_mult).hi = 5.0;
  const auto policy = scripted_behavior_policy(spec);
  const auto a = collect_rollouts(spec, range, *policy, 6, 3, Role::repulsive, {.parallel = true});
  const auto b = collect_rollouts(spec, range, *policy, 6, 3, Role::repulsive, {.parallel = false});
  CHECK(a == b);
  CHECK(a.episodes().size() == 6);
  for (const auto& ep : a.episodes()) {
    CHECK(range.contains(ep.front().phi));
    CHECK(ep.front().phi.mass_mult >= 1.0);
  }
  const auto c = collect_rollouts(spec, range, *policy, 6, 4, Role::repulsive);
  CHECK_FALSE(a == c);
}

TEST_CASE("dataset JSONL round trip is bit exact") {
  const auto d = testing::small_dataset(Role::repulsive, 5.0);
  const auto path = tmp("uarl_ds_roundtrip.jsonl");
  save_dataset(d, path);
  const auto back = load_dataset(path);
  CHECK(back == d);
  CHECK(back.role() == Role::repulsive);
  CHECK(back.provenance().seed == d.provenance().seed);
  std::filesystem::remove(path);
}

TEST_CASE("malformed dataset lines report their line number") {
  const auto d = testing::small_dataset(Role::nominal, 1.0, 1);
  const auto path = tmp("uarl_ds_bad.jsonl");
  save_dataset(d, path);
  std::vector<std::string> lines;
  {
    std::ifstream in(path);
    for (std::string l; std::getline(in, l);) lines.push_back(l);
  }
  lines[3] = "{not json";
  {
    std::ofstream out(path);
    for (const auto& l : lines) out << l << '\n';
  }
  try {
    (void)load_dataset(path);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
  }
  std::filesystem::remove(path);
}

TEST_CASE("retagging keeps transitions and changes the role") {
  const auto d = testing::small_dataset(Role::repulsive, 5.0);
  const auto n = d.retagged(Role::nominal);
  CHECK(n.role() == Role::nominal);
  CHECK(n.size() == d.size());
  CHECK(n[3] == d[3]);
  CHECK(role_from_string("target_proxy") == Role::target_proxy);
  CHECK_THROWS_AS(role_from_string("other"), InvalidArgument);
}

TEST_CASE("heavier point mass responds less to the same action") {
  const auto spec = testing::short_point_mass();
  DomainParams light = spec.nominal_params, heavy = spec.nominal_params;
  light.noise_scale = heavy.noise_scale = 0.0;
  heavy.mass_mult = 10.0;
  auto e1 = make_env(spec, light, 0);
  auto e2 = make_env(spec, heavy, 0);
  e1->reset();
  e2->reset();
  const Vec push = Vec::Constant(2, 1.0);
  const Vec s1 = e1->step(push).next_state;
  const Vec s2 = e2->step(push).next_state;
  CHECK(s1.tail(2).norm() > s2.tail(2).norm());
  CHECK_THROWS(e1->step(Vec::Constant(2, 5.0)));
}

TEST_CASE("range expansion takes the hull and stops after the last stage") {
  const auto spec = testing::short_point_mass();
  const auto e0 = ParamRange::around(spec.nominal_params, Param::mass_mult);
  const Schedule sch{Param::mass_mult, {{1.0, 5.0}, {1.0, 10.0}}};
  const auto e1 = expand_range(e0, sch, 0);
  CHECK(e1.active_interval() == Interval{1.0, 5.0});
  CHECK(e1.contains(e0));
  CHECK(expand_range(e1, sch, 1).active_interval() == Interval{1.0, 10.0});
  CHECK_THROWS_AS(expand_range(e1, sch, 2), BudgetExhausted);
}
