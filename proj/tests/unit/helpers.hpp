#pragma once

#include <random>

#include "uarl/agent.hpp"
#include "uarl/data.hpp"
#include "uarl/envs.hpp"

namespace testing {

inline uarl::EnvSpec short_point_mass(int horizon = 20) {
  auto spec = uarl::EnvSpec::point_mass();
  spec.horizon = horizon;
  return spec;
}

inline uarl::Dataset small_dataset(uarl::Role role, double mass_hi = 1.0, int episodes = 4,
                                   std::uint64_t seed = 7) {
  const auto spec = short_point_mass();
  auto range = uarl::ParamRange::around(spec.nominal_params, uarl::Param::mass_mult);
  range.interval(uarl::Param::mass_mult).hi = mass_hi;
  const auto policy = uarl::scripted_behavior_policy(spec);
  return uarl::collect_rollouts(spec, range, *policy, episodes, seed, role);
}

inline uarl::TrainConfig tiny_config() {
  uarl::TrainConfig c;
  c.batch_size = 16;
  c.hidden = 8;
  c.n_critics = 3;
  c.steps = 20;
  c.eval_every = 0;
  c.lambda_refresh = 5;
  return c;
}

inline uarl::Mat random_mat(Eigen::Index rows, Eigen::Index cols, uarl::Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  return uarl::Mat::NullaryExpr(rows, cols, [&] { return g(rng); });
}

}  // namespace testing
