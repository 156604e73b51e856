#include "uarl/data.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "uarl/error.hpp"
#include "uarl/log.hpp"

namespace uarl {

using nlohmann::json;

std::string_view to_string(Role r) {
  switch (r) {
    case Role::nominal: return "nominal";
    case Role::repulsive: return "repulsive";
    case Role::target_proxy: return "target_proxy";
  }
  return "?";
}

Role role_from_string(std::string_view name) {
  if (name == "nominal") return Role::nominal;
  if (name == "repulsive") return Role::repulsive;
  if (name == "target_proxy") return Role::target_proxy;
  throw InvalidArgument("unknown dataset role '" + std::string(name) + "'");
}

Dataset::Dataset(Role role, Provenance provenance, std::vector<std::vector<Transition>> episodes)
    : role_(role), provenance_(std::move(provenance)), episodes_(std::move(episodes)) {
  for (const auto& ep : episodes_) {
    if (ep.empty()) throw InvalidArgument("Dataset episodes must be non-empty");
  }
  index();
}

void Dataset::index() {
  flat_.clear();
  for (std::uint32_t e = 0; e < episodes_.size(); ++e) {
    for (std::uint32_t t = 0; t < episodes_[e].size(); ++t) flat_.emplace_back(e, t);
  }
}

Dataset Dataset::retagged(Role role) const {
  Dataset out = *this;
  out.role_ = role;
  return out;
}

std::vector<double> Dataset::episode_returns() const {
  std::vector<double> out;
  out.reserve(episodes_.size());
  for (const auto& ep : episodes_) {
    double r = 0.0;
    for (const auto& tr : ep) r += tr.reward;
    out.push_back(r);
  }
  return out;
}

bool operator==(const Transition& a, const Transition& b) {
  return a.state == b.state && a.action == b.action && a.reward == b.reward &&
         a.next_state == b.next_state && a.done == b.done && a.phi == b.phi;
}

bool operator==(const Dataset& a, const Dataset& b) {
  const auto& pa = a.provenance_;
  const auto& pb = b.provenance_;
  return a.role_ == b.role_ && pa.behavior_policy == pb.behavior_policy &&
         pa.env.family == pb.env.family && pa.env.horizon == pb.env.horizon &&
         pa.env.nominal_params == pb.env.nominal_params && pa.range == pb.range &&
         pa.seed == pb.seed && a.episodes_ == b.episodes_;
}

namespace {

Vec clip(const Vec& a, double bound) { return a.cwiseMax(-bound).cwiseMin(bound); }

class PointMassPd final : public RolloutPolicy {
 public:
  explicit PointMassPd(double sigma) : sigma_(sigma) {}

  Vec act(const Vec& obs, Rng& rng) const override {
    Vec a = -kKp * obs.head<2>() - kKd * obs.segment<2>(2);
    if (sigma_ > 0) {
      std::normal_distribution<double> n(0.0, sigma_);
      for (int i = 0; i < 2; ++i) a[i] += n(rng);
    }
    return clip(a, 1.0);
  }

  std::string id() const override {
    std::ostringstream os;
    os << "point_mass_pd(kp=" << kKp << ",kd=" << kKd << ",sigma=" << sigma_ << ")";
    return os.str();
  }

 private:
  static constexpr double kKp = 2.0;
  static constexpr double kKd = 2.0;
  double sigma_;
};

class PendulumSwingUp final : public RolloutPolicy {
 public:
  explicit PendulumSwingUp(double sigma) : sigma_(sigma) {}

  Vec act(const Vec& obs, Rng& rng) const override {
    const double theta = std::atan2(obs[1], obs[0]);
    const double rate = obs[2];
    double u;
    if (std::abs(theta) < 0.6) {
      u = -(10.0 * theta + 2.0 * rate);
    } else {
      // Unit-mass rod energy; upright equilibrium has energy 5.
      const double energy = rate * rate / 6.0 + 5.0 * std::cos(theta);
      u = 1.0 * (5.0 - energy) * (rate >= 0 ? 1.0 : -1.0);
    }
    Vec a(1);
    a[0] = u;
    if (sigma_ > 0) {
      std::normal_distribution<double> n(0.0, sigma_);
      a[0] += n(rng);
    }
    return clip(a, 2.0);
  }

  std::string id() const override {
    std::ostringstream os;
    os << "pendulum_energy_swingup(sigma=" << sigma_ << ")";
    return os.str();
  }

 private:
  double sigma_;
};

}  // namespace

std::shared_ptr<const RolloutPolicy> scripted_behavior_policy(const EnvSpec& spec,
                                                              double exploration_sigma) {
  if (exploration_sigma < 0) throw InvalidArgument("exploration sigma must be >= 0");
  switch (spec.family) {
    case EnvFamily::point_mass: return std::make_shared<PointMassPd>(exploration_sigma);
    case EnvFamily::pendulum: return std::make_shared<PendulumSwingUp>(exploration_sigma);
    case EnvFamily::slip_grid: break;
  }
  throw InvalidArgument("no scripted behavior policy for env family '" +
                        std::string(to_string(spec.family)) + "'");
}

Dataset collect_rollouts(const EnvSpec& spec, const ParamRange& range,
                         const RolloutPolicy& policy, int n_episodes, std::uint64_t seed,
                         Role role, CollectOptions options) {
  if (n_episodes < 1) throw InvalidArgument("collect_rollouts: n_episodes must be >= 1");
  spec.validate();
  range.validate();

  std::vector<std::vector<Transition>> episodes(n_episodes);
  std::atomic<long> clipped{0};
  const double bound = spec.action_bound();

  auto run_episode = [&](int ep) {
    Rng rng(derive_seed(seed, stream::kEpisodes, static_cast<std::uint64_t>(ep)));
    const DomainParams phi = sample_params(range, rng);
    auto env = make_env(spec, phi, rng());
    Vec obs = env->reset();
    auto& out = episodes[ep];
    out.reserve(spec.horizon);
    while (!env->done()) {
      Vec a = policy.act(obs, rng);
      if ((a.array().abs() > bound).any()) {
        a = clip(a, bound);
        clipped.fetch_add(1, std::memory_order_relaxed);
      }
      StepResult r = env->step(a);
      out.push_back({obs, a, r.reward, r.next_state, r.terminal, phi});
      obs = std::move(r.next_state);
    }
  };

  if (options.parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int ep = 0; ep < n_episodes; ++ep) run_episode(ep);
  } else {
    for (int ep = 0; ep < n_episodes; ++ep) run_episode(ep);
  }

  if (clipped > 0) {
    log(LogLevel::warn, "collect_rollouts: clipped " + std::to_string(clipped.load()) +
                            " policy actions into the action box");
  }
  return Dataset(role, Provenance{policy.id(), spec, range, seed}, std::move(episodes));
}

double evaluate_return(const EnvSpec& spec, const DomainParams& params,
                       const RolloutPolicy& policy, int n_episodes, std::uint64_t seed) {
  if (n_episodes < 1) throw InvalidArgument("evaluate_return: n_episodes must be >= 1");
  std::vector<double> returns(n_episodes, 0.0);
#pragma omp parallel for schedule(dynamic)
  for (int ep = 0; ep < n_episodes; ++ep) {
    Rng rng(derive_seed(seed, stream::kEval, static_cast<std::uint64_t>(ep)));
    auto env = make_env(spec, params, rng());
    Vec obs = env->reset();
    double total = 0.0;
    while (!env->done()) {
      const Vec a = clip(policy.act(obs, rng), spec.action_bound());
      StepResult r = env->step(a);
      total += r.reward;
      obs = std::move(r.next_state);
    }
    returns[ep] = total;
  }
  double sum = 0.0;
  for (double r : returns) sum += r;
  return sum / n_episodes;
}

namespace {

json vec_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec json_vec(const json& a) {
  Vec v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  const auto& p = dataset.provenance();
  json header = {{"role", std::string(to_string(dataset.role()))},
                 {"provenance",
                  {{"behavior_policy", p.behavior_policy},
                   {"env", p.env},
                   {"range", p.range},
                   {"seed", p.seed}}},
                 {"n_episodes", dataset.episodes().size()},
                 {"n_transitions", dataset.size()}};
  out << header.dump() << '\n';
  const auto& eps = dataset.episodes();
  for (std::size_t e = 0; e < eps.size(); ++e) {
    for (std::size_t t = 0; t < eps[e].size(); ++t) {
      const auto& tr = eps[e][t];
      // nlohmann emits the shortest decimal that round-trips, so reals are bit-exact.
      json line = {{"ep", e},
                   {"t", t},
                   {"s", vec_json(tr.state)},
                   {"a", vec_json(tr.action)},
                   {"r", tr.reward},
                   {"s2", vec_json(tr.next_state)},
                   {"done", tr.done},
                   {"phi", tr.phi}};
      out << line.dump() << '\n';
    }
  }
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::string line;
  long lineno = 0;

  auto parse = [&](const std::string& text) {
    try {
      return json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), lineno);
    }
  };

  if (!std::getline(in, line)) throw ParseError("missing header line", 1);
  ++lineno;
  Role role;
  Provenance prov;
  std::size_t n_episodes = 0;
  std::size_t n_transitions = 0;
  try {
    const json header = parse(line);
    role = role_from_string(header.at("role").get<std::string>());
    const auto& p = header.at("provenance");
    prov.behavior_policy = p.at("behavior_policy").get<std::string>();
    prov.env = p.at("env").get<EnvSpec>();
    prov.range = p.at("range").get<ParamRange>();
    prov.seed = p.at("seed").get<std::uint64_t>();
    n_episodes = header.at("n_episodes").get<std::size_t>();
    n_transitions = header.at("n_transitions").get<std::size_t>();
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(std::string("invalid header: ") + e.what(), lineno);
  }

  std::vector<std::vector<Transition>> episodes;
  std::size_t count = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const json j = parse(line);
    try {
      const auto ep = j.at("ep").get<std::size_t>();
      const auto t = j.at("t").get<std::size_t>();
      if (ep == episodes.size()) episodes.emplace_back();
      if (ep + 1 != episodes.size() || t != episodes.back().size()) {
        throw ParseError("transition (ep=" + std::to_string(ep) + ", t=" + std::to_string(t) +
                             ") is out of sequence",
                         lineno);
      }
      episodes.back().push_back({json_vec(j.at("s")), json_vec(j.at("a")), j.at("r").get<double>(),
                                 json_vec(j.at("s2")), j.at("done").get<bool>(),
                                 j.at("phi").get<DomainParams>()});
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(std::string("invalid transition: ") + e.what(), lineno);
    }
    ++count;
  }
  if (count != n_transitions || episodes.size() != n_episodes) {
    throw ParseError("truncated dataset: header declares " + std::to_string(n_transitions) +
                         " transitions in " + std::to_string(n_episodes) + " episodes, found " +
                         std::to_string(count) + " in " + std::to_string(episodes.size()),
                     lineno);
  }
  return Dataset(role, std::move(prov), std::move(episodes));
}

void export_returns_csv(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  const Param active = dataset.provenance().range.active;
  out << "episode,return," << to_string(active) << '\n';
  const auto returns = dataset.episode_returns();
  out.precision(17);
  for (std::size_t e = 0; e < returns.size(); ++e) {
    out << e << ',' << returns[e] << ',' << get(dataset.episodes()[e].front().phi, active) << '\n';
  }
}

}  // namespace uarl
