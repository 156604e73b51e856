#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "uarl/envs.hpp"

namespace uarl {

struct Transition {
  Vec state;
  Vec action;
  double reward = 0.0;
  Vec next_state;
  bool done = false;  // terminal: no bootstrapping past this transition
  DomainParams phi;   // parameters of the episode that generated it
};

enum class Role { nominal, repulsive, target_proxy };

std::string_view to_string(Role r);
Role role_from_string(std::string_view name);

struct Provenance {
  std::string behavior_policy;
  EnvSpec env;
  ParamRange range;
  std::uint64_t seed = 0;
};

/// Tagged, immutable-after-construction collection of episodes.
class Dataset {
 public:
  Dataset() = default;
  Dataset(Role role, Provenance provenance, std::vector<std::vector<Transition>> episodes);

  Role role() const { return role_; }
  const Provenance& provenance() const { return provenance_; }
  const std::vector<std::vector<Transition>>& episodes() const { return episodes_; }

  std::size_t size() const { return flat_.size(); }
  bool empty() const { return flat_.empty(); }
  /// Flat access in (episode, t) order.
  const Transition& operator[](std::size_t i) const {
    return episodes_[flat_[i].first][flat_[i].second];
  }
  std::size_t episode_of(std::size_t i) const { return flat_[i].first; }

  /// Same transitions under a different role, e.g. a repulsive set promoted to the nominal pool.
  Dataset retagged(Role role) const;

  std::vector<double> episode_returns() const;

  friend bool operator==(const Dataset& a, const Dataset& b);

 private:
  void index();

  Role role_ = Role::nominal;
  Provenance provenance_;
  std::vector<std::vector<Transition>> episodes_;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> flat_;
};

bool operator==(const Transition& a, const Transition& b);

/// Stochastic state-to-action map used to generate rollouts. Must be safe to call
/// concurrently; all randomness comes from the caller's generator.
class RolloutPolicy {
 public:
  virtual ~RolloutPolicy() = default;
  virtual Vec act(const Vec& obs, Rng& rng) const = 0;
  virtual std::string id() const = 0;
};

/// PD controller toward the goal (point_mass) or energy-shaping swing-up (pendulum),
/// plus Gaussian exploration noise.
std::shared_ptr<const RolloutPolicy> scripted_behavior_policy(const EnvSpec& spec,
                                                              double exploration_sigma = 0.1);

struct CollectOptions {
  bool parallel = true;
};

/// One parameter draw per episode; episode k uses seeds derived from (seed, k), so the
/// result does not depend on scheduling.
Dataset collect_rollouts(const EnvSpec& spec, const ParamRange& range,
                         const RolloutPolicy& policy, int n_episodes, std::uint64_t seed,
                         Role role, CollectOptions options = {});

/// Mean undiscounted return of `policy` over episodes at fixed parameters.
double evaluate_return(const EnvSpec& spec, const DomainParams& params,
                       const RolloutPolicy& policy, int n_episodes, std::uint64_t seed);

/// JSONL: header object, then one transition per line {ep, t, s, a, r, s2, done, phi}.
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

/// CSV with header `episode,return,<active param>`.
void export_returns_csv(const Dataset& dataset, const std::filesystem::path& path);

}  // namespace uarl
