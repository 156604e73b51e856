#include "uarl/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "uarl/error.hpp"

namespace uarl {

namespace {

constexpr std::array<std::string_view, 3> kParamNames = {"noise_scale", "friction", "mass_mult"};

void require_finite(double v, std::string_view field) {
  if (!std::isfinite(v)) {
    throw InvalidArgument("DomainParams." + std::string(field) + " must be finite");
  }
}

}  // namespace

void DomainParams::validate() const {
  require_finite(noise_scale, "noise_scale");
  require_finite(friction, "friction");
  require_finite(mass_mult, "mass_mult");
  if (noise_scale < 0) throw InvalidArgument("DomainParams.noise_scale must be >= 0");
  if (friction < 0) throw InvalidArgument("DomainParams.friction must be >= 0");
  if (friction * kDt > 1.0) {
    throw InvalidArgument("DomainParams.friction must satisfy friction * dt <= 1");
  }
  if (mass_mult <= 0) throw InvalidArgument("DomainParams.mass_mult must be > 0");
}

std::string_view to_string(Param p) { return kParamNames[static_cast<int>(p)]; }

Param param_from_string(std::string_view name) {
  for (int i = 0; i < 3; ++i) {
    if (kParamNames[i] == name) return static_cast<Param>(i);
  }
  throw InvalidArgument("unknown domain parameter '" + std::string(name) + "'");
}

double get(const DomainParams& p, Param which) {
  switch (which) {
    case Param::noise_scale: return p.noise_scale;
    case Param::friction: return p.friction;
    case Param::mass_mult: return p.mass_mult;
  }
  return 0.0;
}

void set(DomainParams& p, Param which, double value) {
  switch (which) {
    case Param::noise_scale: p.noise_scale = value; break;
    case Param::friction: p.friction = value; break;
    case Param::mass_mult: p.mass_mult = value; break;
  }
}

double distance(const DomainParams& a, const DomainParams& b) {
  const double dn = a.noise_scale - b.noise_scale;
  const double df = a.friction - b.friction;
  const double dm = a.mass_mult - b.mass_mult;
  return std::sqrt(dn * dn + df * df + dm * dm);
}

ParamRange ParamRange::around(const DomainParams& nominal, Param active) {
  ParamRange r;
  r.active = active;
  for (int i = 0; i < 3; ++i) {
    const double v = get(nominal, static_cast<Param>(i));
    r.intervals[i] = {v, v};
  }
  return r;
}

bool ParamRange::contains(const DomainParams& p) const {
  for (int i = 0; i < 3; ++i) {
    if (!intervals[i].contains(get(p, static_cast<Param>(i)))) return false;
  }
  return true;
}

bool ParamRange::contains(const ParamRange& other) const {
  for (int i = 0; i < 3; ++i) {
    if (!intervals[i].contains(other.intervals[i])) return false;
  }
  return true;
}

void ParamRange::validate() const {
  for (int i = 0; i < 3; ++i) {
    const auto& iv = intervals[i];
    const auto name = std::string(kParamNames[i]);
    if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi)) {
      throw InvalidArgument("ParamRange." + name + " bounds must be finite");
    }
    if (iv.lo > iv.hi) throw InvalidArgument("ParamRange." + name + " has lo > hi");
    if (static_cast<Param>(i) != active && iv.lo != iv.hi) {
      throw InvalidArgument("ParamRange." + name +
                            " is inactive but not pinned; only one parameter may be randomized");
    }
  }
  DomainParams lo{intervals[0].lo, intervals[1].lo, intervals[2].lo};
  DomainParams hi{intervals[0].hi, intervals[1].hi, intervals[2].hi};
  lo.validate();
  hi.validate();
}

std::string_view to_string(EnvFamily f) {
  switch (f) {
    case EnvFamily::point_mass: return "point_mass";
    case EnvFamily::pendulum: return "pendulum";
    case EnvFamily::slip_grid: return "slip_grid";
  }
  return "?";
}

EnvFamily family_from_string(std::string_view name) {
  if (name == "point_mass") return EnvFamily::point_mass;
  if (name == "pendulum") return EnvFamily::pendulum;
  if (name == "slip_grid") return EnvFamily::slip_grid;
  throw InvalidArgument("unsupported env family '" + std::string(name) + "'");
}

void EnvSpec::validate() const {
  if (horizon < 1) throw InvalidArgument("EnvSpec.horizon must be >= 1");
  nominal_params.validate();
  if (family == EnvFamily::slip_grid) {
    if (grid_width < 1 || grid_height < 1) {
      throw InvalidArgument("EnvSpec.grid dimensions must be positive");
    }
    if (nominal_params.noise_scale > 1.0) {
      throw InvalidArgument("EnvSpec.nominal_params.noise_scale is the slip probability and must be <= 1");
    }
  }
}

int EnvSpec::obs_dim() const {
  switch (family) {
    case EnvFamily::point_mass: return 4;
    case EnvFamily::pendulum: return 3;
    case EnvFamily::slip_grid: return 2;
  }
  return 0;
}

int EnvSpec::act_dim() const {
  switch (family) {
    case EnvFamily::point_mass: return 2;
    case EnvFamily::pendulum: return 1;
    case EnvFamily::slip_grid: return 1;
  }
  return 0;
}

double EnvSpec::action_bound() const {
  switch (family) {
    case EnvFamily::point_mass: return 1.0;
    case EnvFamily::pendulum: return 2.0;
    case EnvFamily::slip_grid: return 3.0;
  }
  return 0.0;
}

EnvSpec EnvSpec::point_mass() {
  EnvSpec s;
  s.family = EnvFamily::point_mass;
  s.horizon = 200;
  s.nominal_params = {0.1, 0.5, 1.0};
  return s;
}

EnvSpec EnvSpec::pendulum() {
  EnvSpec s;
  s.family = EnvFamily::pendulum;
  s.horizon = 200;
  s.nominal_params = {0.05, 0.1, 1.0};
  return s;
}

EnvSpec EnvSpec::slip_grid(int width, int height) {
  EnvSpec s;
  s.family = EnvFamily::slip_grid;
  s.horizon = 50;
  s.nominal_params = {0.0, 0.0, 1.0};
  s.grid_width = width;
  s.grid_height = height;
  return s;
}

void Environment::check_action(const Vec& action) const {
  if (done_) throw Error("step() called on a finished episode; call reset()");
  if (action.size() != act_dim()) {
    throw InvalidArgument("action has dimension " + std::to_string(action.size()) +
                          ", expected " + std::to_string(act_dim()));
  }
  const double bound = action_bound();
  for (Eigen::Index i = 0; i < action.size(); ++i) {
    if (std::isnan(action[i])) throw InvalidArgument("action contains NaN");
    if (std::abs(action[i]) > bound + 1e-12 && spec_.family != EnvFamily::slip_grid) {
      throw InvalidArgument("action component outside the action box");
    }
  }
}

namespace {

/// 2-D point mass driven by a force toward a goal at the origin.
class PointMassEnv final : public Environment {
 public:
  PointMassEnv(const EnvSpec& spec, const DomainParams& params, std::uint64_t seed)
      : Environment(spec, params, seed), state_(Vec::Zero(4)) {}

  Vec reset(std::optional<std::uint64_t> seed) override {
    if (seed) rng_.seed(*seed);
    state_ = nominal_start();
    if (params_.noise_scale > 0) {
      std::normal_distribution<double> n(0.0, params_.noise_scale);
      for (int i = 0; i < 4; ++i) state_[i] += n(rng_);
    }
    done_ = false;
    t_ = 0;
    return state_;
  }

  StepResult step(const Vec& action) override {
    check_action(action);
    const double dist = state_.head<2>().norm();
    const double reward = -dist - 0.01 * action.squaredNorm();

    Eigen::Vector2d v = state_.segment<2>(2);
    v += kDt * action / params_.mass_mult;
    v *= (1.0 - params_.friction * kDt);
    state_.head<2>() += kDt * v;
    state_.segment<2>(2) = v;

    ++t_;
    done_ = t_ >= spec_.horizon;
    return {state_, reward, done_, false};
  }

  const Vec& state() const override { return state_; }
  int obs_dim() const override { return 4; }
  int act_dim() const override { return 2; }
  double action_bound() const override { return 1.0; }

  static Vec nominal_start() {
    Vec s(4);
    s << 1.0, 1.0, 0.0, 0.0;
    return s;
  }

 private:
  Vec state_;
};

double angle_normalize(double x) {
  return std::remainder(x, 2.0 * std::numbers::pi);
}

/// Torque-limited rod pendulum; angle 0 is upright. Observation (cos, sin, rate).
class PendulumEnv final : public Environment {
 public:
  static constexpr double kGravity = 10.0;
  static constexpr double kLength = 1.0;
  static constexpr double kMaxSpeed = 8.0;

  PendulumEnv(const EnvSpec& spec, const DomainParams& params, std::uint64_t seed)
      : Environment(spec, params, seed), obs_(Vec::Zero(3)) {}

  Vec reset(std::optional<std::uint64_t> seed) override {
    if (seed) rng_.seed(*seed);
    theta_ = std::numbers::pi;
    rate_ = 0.0;
    if (params_.noise_scale > 0) {
      std::normal_distribution<double> n(0.0, params_.noise_scale);
      theta_ += n(rng_);
      rate_ += n(rng_);
    }
    done_ = false;
    t_ = 0;
    refresh();
    return obs_;
  }

  StepResult step(const Vec& action) override {
    check_action(action);
    const double u = action[0];
    const double th = angle_normalize(theta_);
    const double reward = -(th * th + 0.1 * rate_ * rate_ + 0.001 * u * u);

    const double m = params_.mass_mult;
    rate_ += (3.0 * kGravity / (2.0 * kLength) * std::sin(theta_) +
              3.0 / (m * kLength * kLength) * u) * kDt;
    rate_ *= (1.0 - params_.friction * kDt);
    rate_ = std::clamp(rate_, -kMaxSpeed, kMaxSpeed);
    theta_ += rate_ * kDt;

    ++t_;
    done_ = t_ >= spec_.horizon;
    refresh();
    return {obs_, reward, done_, false};
  }

  const Vec& state() const override { return obs_; }
  int obs_dim() const override { return 3; }
  int act_dim() const override { return 1; }
  double action_bound() const override { return 2.0; }

 private:
  void refresh() {
    obs_ << std::cos(theta_), std::sin(theta_), rate_;
  }

  double theta_ = 0.0;
  double rate_ = 0.0;
  Vec obs_;
};

/// Sampled dynamics of build_slipgrid. The slip probability is DomainParams::noise_scale.
class SlipGridEnv final : public Environment {
 public:
  SlipGridEnv(const EnvSpec& spec, const DomainParams& params, std::uint64_t seed)
      : Environment(spec, params, seed),
        mdp_(build_slipgrid(spec.grid_width, spec.grid_height, params.noise_scale, 0.9)),
        obs_(Vec::Zero(2)) {}

  Vec reset(std::optional<std::uint64_t> seed) override {
    if (seed) rng_.seed(*seed);
    cell_ = 0;
    done_ = false;
    t_ = 0;
    refresh();
    return obs_;
  }

  StepResult step(const Vec& action) override {
    check_action(action);
    const double raw = action[0];
    const int a = static_cast<int>(std::lround(raw));
    if (a < 0 || a >= mdp_.n_actions || std::abs(raw - a) > 1e-9) {
      throw InvalidArgument("slip_grid action must be an integer move index in [0, 3]");
    }
    const double reward = mdp_.R(cell_, a);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double draw = u(rng_);
    double acc = 0.0;
    int next = mdp_.n_states - 1;
    for (int s2 = 0; s2 < mdp_.n_states; ++s2) {
      acc += mdp_.T(cell_, a, s2);
      if (draw < acc) {
        next = s2;
        break;
      }
    }
    cell_ = next;
    ++t_;
    done_ = t_ >= spec_.horizon;
    refresh();
    return {obs_, reward, done_, false};
  }

  const Vec& state() const override { return obs_; }
  int obs_dim() const override { return 2; }
  int act_dim() const override { return 1; }
  double action_bound() const override { return 3.0; }

 private:
  void refresh() {
    obs_ << cell_ % spec_.grid_width, cell_ / spec_.grid_width;
  }

  TabularMDP mdp_;
  int cell_ = 0;
  Vec obs_;
};

}  // namespace

std::unique_ptr<Environment> make_env(const EnvSpec& spec, const DomainParams& params,
                                      std::uint64_t seed) {
  spec.validate();
  params.validate();
  switch (spec.family) {
    case EnvFamily::point_mass: return std::make_unique<PointMassEnv>(spec, params, seed);
    case EnvFamily::pendulum: return std::make_unique<PendulumEnv>(spec, params, seed);
    case EnvFamily::slip_grid:
      if (params.noise_scale > 1.0) {
        throw InvalidArgument("DomainParams.noise_scale is the slip probability and must be <= 1");
      }
      return std::make_unique<SlipGridEnv>(spec, params, seed);
  }
  throw InvalidArgument("unsupported env family");
}

DomainParams sample_params(const ParamRange& range, Rng& rng) {
  DomainParams p{range.intervals[0].lo, range.intervals[1].lo, range.intervals[2].lo};
  const auto& iv = range.active_interval();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  set(p, range.active, iv.lo + (iv.hi - iv.lo) * u(rng));
  return p;
}

void Schedule::validate() const {
  if (stages.empty()) throw InvalidArgument("Schedule.stages must be non-empty");
  for (const auto& iv : stages) {
    if (!(iv.lo <= iv.hi)) throw InvalidArgument("Schedule stage has lo > hi");
  }
}

ParamRange expand_range(const ParamRange& range, const Schedule& schedule, int iteration) {
  if (iteration < 0) throw InvalidArgument("expand_range: negative iteration");
  if (iteration >= static_cast<int>(schedule.stages.size())) {
    throw BudgetExhausted("randomization budget exhausted: schedule has " +
                          std::to_string(schedule.stages.size()) + " stages, requested stage " +
                          std::to_string(iteration));
  }
  if (schedule.param != range.active) {
    throw InvalidArgument("expand_range: schedule parameter differs from the range's active parameter");
  }
  ParamRange out = range;
  auto& iv = out.interval(range.active);
  const auto& stage = schedule.stages[iteration];
  iv.lo = std::min(iv.lo, stage.lo);
  iv.hi = std::max(iv.hi, stage.hi);
  out.validate();
  return out;
}

double TabularMDP::r_max() const {
  double m = 0.0;
  for (double r : reward) m = std::max(m, std::abs(r));
  return m;
}

void TabularMDP::validate() const {
  if (n_states < 1 || n_actions < 1) throw InvalidArgument("TabularMDP dimensions must be positive");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidArgument("TabularMDP.gamma must lie in [0,1)");
  const auto nsa = static_cast<std::size_t>(n_pairs());
  if (transition.size() != nsa * n_states || reward.size() != nsa ||
      metric.size() != nsa * nsa) {
    throw InvalidArgument("TabularMDP storage has inconsistent sizes");
  }
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      double sum = 0.0;
      for (int s2 = 0; s2 < n_states; ++s2) {
        const double p = T(s, a, s2);
        if (!(p >= 0.0)) throw InvalidArgument("TabularMDP transition has a negative entry");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-12) {
        throw InvalidArgument("TabularMDP transition row does not sum to 1");
      }
      if (!std::isfinite(R(s, a))) throw InvalidArgument("TabularMDP reward is not finite");
    }
  }
  for (std::size_t i = 0; i < nsa; ++i) {
    for (std::size_t j = 0; j < nsa; ++j) {
      const double dij = metric[i * nsa + j];
      if (dij < 0 || dij != metric[j * nsa + i]) {
        throw InvalidArgument("TabularMDP metric must be nonnegative and symmetric");
      }
      if ((i == j) != (dij == 0.0)) {
        throw InvalidArgument("TabularMDP metric must vanish exactly on the diagonal");
      }
    }
  }
}

TabularMDP build_slipgrid(int width, int height, double slip_prob, double gamma) {
  if (width < 1 || height < 1) throw InvalidArgument("build_slipgrid: nonpositive dimensions");
  if (!(slip_prob >= 0.0 && slip_prob <= 1.0)) {
    throw InvalidArgument("build_slipgrid: slip_prob must lie in [0,1]");
  }
  TabularMDP m;
  m.n_states = width * height;
  m.n_actions = 4;
  m.gamma = gamma;
  const int nsa = m.n_pairs();
  m.transition.assign(static_cast<std::size_t>(nsa) * m.n_states, 0.0);
  m.reward.assign(nsa, 0.0);
  m.metric.assign(static_cast<std::size_t>(nsa) * nsa, 0.0);
  m.absorbing.assign(m.n_states, false);

  const std::array<std::array<int, 2>, 4> dirs = {{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
  const int goal = m.n_states - 1;
  m.absorbing[goal] = true;

  auto move = [&](int x, int y, std::array<int, 2> d) {
    const int nx = x + d[0];
    const int ny = y + d[1];
    if (nx < 0 || nx >= width || ny < 0 || ny >= height) return y * width + x;
    return ny * width + nx;
  };

  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const int s = y * width + x;
      for (int a = 0; a < 4; ++a) {
        if (s == goal) {
          m.T(s, a, s) = 1.0;
          m.R(s, a) = 1.0;
          continue;
        }
        const auto d = dirs[a];
        const std::array<int, 2> lat1 = {d[1], d[0]};
        const std::array<int, 2> lat2 = {-d[1], -d[0]};
        m.T(s, a, move(x, y, d)) += 1.0 - slip_prob;
        m.T(s, a, move(x, y, lat1)) += 0.5 * slip_prob;
        m.T(s, a, move(x, y, lat2)) += 0.5 * slip_prob;
      }
    }
  }

  for (int s = 0; s < m.n_states; ++s) {
    for (int a = 0; a < 4; ++a) {
      for (int s2 = 0; s2 < m.n_states; ++s2) {
        for (int a2 = 0; a2 < 4; ++a2) {
          const double cell = std::abs(s % width - s2 % width) + std::abs(s / width - s2 / width);
          m.metric[static_cast<std::size_t>(s * 4 + a) * nsa + s2 * 4 + a2] =
              cell + (a != a2 ? 1.0 : 0.0);
        }
      }
    }
  }
  return m;
}

void to_json(nlohmann::json& j, const DomainParams& p) {
  j = {{"noise_scale", p.noise_scale}, {"friction", p.friction}, {"mass_mult", p.mass_mult}};
}

void from_json(const nlohmann::json& j, DomainParams& p) {
  p.noise_scale = j.at("noise_scale").get<double>();
  p.friction = j.at("friction").get<double>();
  p.mass_mult = j.at("mass_mult").get<double>();
}

void to_json(nlohmann::json& j, const ParamRange& r) {
  nlohmann::json iv = nlohmann::json::object();
  for (int i = 0; i < 3; ++i) {
    iv[std::string(kParamNames[i])] = {r.intervals[i].lo, r.intervals[i].hi};
  }
  j = {{"active_param", std::string(to_string(r.active))}, {"intervals", iv}};
}

void from_json(const nlohmann::json& j, ParamRange& r) {
  r.active = param_from_string(j.at("active_param").get<std::string>());
  const auto& iv = j.at("intervals");
  for (int i = 0; i < 3; ++i) {
    const auto& pair = iv.at(std::string(kParamNames[i]));
    r.intervals[i] = {pair.at(0).get<double>(), pair.at(1).get<double>()};
  }
}

void to_json(nlohmann::json& j, const EnvSpec& s) {
  j = {{"family", std::string(to_string(s.family))},
       {"horizon", s.horizon},
       {"nominal_params", s.nominal_params}};
  if (s.family == EnvFamily::slip_grid) {
    j["grid_width"] = s.grid_width;
    j["grid_height"] = s.grid_height;
  }
}

void from_json(const nlohmann::json& j, EnvSpec& s) {
  s.family = family_from_string(j.at("family").get<std::string>());
  s.horizon = j.at("horizon").get<int>();
  s.nominal_params = j.at("nominal_params").get<DomainParams>();
  s.grid_width = j.value("grid_width", 4);
  s.grid_height = j.value("grid_height", 4);
}

void to_json(nlohmann::json& j, const Schedule& s) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& iv : s.stages) stages.push_back({iv.lo, iv.hi});
  j = {{"param", std::string(to_string(s.param))}, {"stages", stages}};
}

void from_json(const nlohmann::json& j, Schedule& s) {
  s.param = param_from_string(j.at("param").get<std::string>());
  s.stages.clear();
  for (const auto& st : j.at("stages")) {
    s.stages.push_back({st.at(0).get<double>(), st.at(1).get<double>()});
  }
}

}  // namespace uarl
