#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "uarl/rng.hpp"

namespace uarl {

using Vec = Eigen::VectorXd;

/// Physics parameters that index the transition dynamics.
struct DomainParams {
  double noise_scale = 0.0;  // std of the Gaussian reset perturbation
  double friction = 0.0;     // per-second velocity damping coefficient
  double mass_mult = 1.0;    // multiplier on the nominal mass

  /// Throws InvalidArgument naming the first offending field.
  void validate() const;

  bool operator==(const DomainParams&) const = default;
};

enum class Param { noise_scale = 0, friction = 1, mass_mult = 2 };

std::string_view to_string(Param p);
Param param_from_string(std::string_view name);

double get(const DomainParams& p, Param which);
void set(DomainParams& p, Param which, double value);

/// Euclidean distance between two parameter vectors.
double distance(const DomainParams& a, const DomainParams& b);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x) const { return lo <= x && x <= hi; }
  bool contains(const Interval& other) const { return lo <= other.lo && other.hi <= hi; }
  bool operator==(const Interval&) const = default;
};

/// Per-parameter closed intervals with exactly one randomized parameter.
///
/// Inactive parameters carry degenerate intervals pinned at the nominal value,
/// so a range also records the nominal parameters it was built around.
struct ParamRange {
  std::array<Interval, 3> intervals{};
  Param active = Param::mass_mult;

  /// Degenerate range at `nominal`, randomizing `active`.
  static ParamRange around(const DomainParams& nominal, Param active);

  const Interval& interval(Param p) const { return intervals[static_cast<int>(p)]; }
  Interval& interval(Param p) { return intervals[static_cast<int>(p)]; }
  const Interval& active_interval() const { return interval(active); }

  bool contains(const DomainParams& p) const;
  bool contains(const ParamRange& other) const;
  void validate() const;

  bool operator==(const ParamRange&) const = default;
};

enum class EnvFamily { point_mass, pendulum, slip_grid };

std::string_view to_string(EnvFamily f);
EnvFamily family_from_string(std::string_view name);

struct EnvSpec {
  EnvFamily family = EnvFamily::point_mass;
  int horizon = 200;
  DomainParams nominal_params{};
  // slip_grid only
  int grid_width = 4;
  int grid_height = 4;

  void validate() const;
  int obs_dim() const;
  int act_dim() const;
  double action_bound() const;

  /// Desk-scale defaults per family.
  static EnvSpec point_mass();
  static EnvSpec pendulum();
  static EnvSpec slip_grid(int width = 4, int height = 4);
};

struct StepResult {
  Vec next_state;
  double reward = 0.0;
  bool done = false;      // episode over (terminal or horizon reached)
  bool terminal = false;  // true absorbing termination, bootstrapping stops
};

/// Single-threaded episodic state machine.
class Environment {
 public:
  virtual ~Environment() = default;

  /// Starts a new episode. Passing a seed reseeds the reset-noise stream.
  virtual Vec reset(std::optional<std::uint64_t> seed = std::nullopt) = 0;
  virtual StepResult step(const Vec& action) = 0;

  virtual const Vec& state() const = 0;
  virtual int obs_dim() const = 0;
  virtual int act_dim() const = 0;
  virtual double action_bound() const = 0;

  const EnvSpec& spec() const { return spec_; }
  const DomainParams& params() const { return params_; }
  bool done() const { return done_; }
  int t() const { return t_; }

 protected:
  Environment(EnvSpec spec, DomainParams params, std::uint64_t seed)
      : spec_(std::move(spec)), params_(params), rng_(seed) {}

  void check_action(const Vec& action) const;

  EnvSpec spec_;
  DomainParams params_;
  Rng rng_;
  bool done_ = true;
  int t_ = 0;
};

inline constexpr double kDt = 0.05;

std::unique_ptr<Environment> make_env(const EnvSpec& spec, const DomainParams& params,
                                      std::uint64_t seed);

/// Active parameter uniform on its interval; inactive parameters at their pinned value.
DomainParams sample_params(const ParamRange& range, Rng& rng);

/// Randomization ladder for one parameter, e.g. mass 1x -> 5x -> 10x -> 15x.
struct Schedule {
  Param param = Param::mass_mult;
  std::vector<Interval> stages;

  void validate() const;
};

/// Range for curriculum stage `iteration`: the hull of `range` and the scheduled interval.
/// Throws BudgetExhausted past the last stage.
ParamRange expand_range(const ParamRange& range, const Schedule& schedule, int iteration);

/// Finite MDP with a ground metric over state-action pairs.
struct TabularMDP {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> transition;  // [s][a][s']
  std::vector<double> reward;      // [s][a]
  double gamma = 0.9;
  std::vector<double> metric;      // [(s,a)][(s',a')], row index s*n_actions+a
  std::vector<bool> absorbing;     // per state, informational

  int n_pairs() const { return n_states * n_actions; }
  double T(int s, int a, int s2) const {
    return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
  }
  double& T(int s, int a, int s2) {
    return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
  }
  double R(int s, int a) const { return reward[static_cast<std::size_t>(s) * n_actions + a]; }
  double& R(int s, int a) { return reward[static_cast<std::size_t>(s) * n_actions + a]; }
  double d(int s, int a, int s2, int a2) const {
    return metric[static_cast<std::size_t>(s * n_actions + a) * n_pairs() + s2 * n_actions + a2];
  }
  /// State distance induced by the pair metric at a common action.
  double state_distance(int s, int s2) const { return d(s, 0, s2, 0); }
  double r_max() const;

  void validate() const;
};

enum class GridMove { right = 0, left = 1, up = 2, down = 3 };

/// Gridworld where the intended move succeeds with prob 1 - slip and each lateral
/// direction takes slip / 2. Moves into walls stay put. The top-right cell is an
/// absorbing goal paying reward 1 per step. Metric: Manhattan cell distance plus
/// a unit cost for differing actions.
TabularMDP build_slipgrid(int width, int height, double slip_prob, double gamma);

void to_json(nlohmann::json& j, const DomainParams& p);
void from_json(const nlohmann::json& j, DomainParams& p);
void to_json(nlohmann::json& j, const ParamRange& r);
void from_json(const nlohmann::json& j, ParamRange& r);
void to_json(nlohmann::json& j, const EnvSpec& s);
void from_json(const nlohmann::json& j, EnvSpec& s);
void to_json(nlohmann::json& j, const Schedule& s);
void from_json(const nlohmann::json& j, Schedule& s);

}  // namespace uarl
