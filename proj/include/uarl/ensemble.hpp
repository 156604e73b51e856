#pragma once

#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "uarl/actor.hpp"
#include "uarl/batch.hpp"
#include "uarl/nn.hpp"

namespace uarl {

/// Population mean and variance (divisor N) of ensemble predictions.
struct VarianceStats {
  double mu = 0.0;
  double sigma2 = 0.0;
};

VarianceStats mean_var(std::span<const double> values);
inline VarianceStats mean_var(const Vec& values) {
  return mean_var(std::span<const double>(values.data(), static_cast<std::size_t>(values.size())));
}

/// One state-action value approximator with its Polyak target copy.
struct Critic {
  Mlp online;
  Mlp target;
  Adam opt;
};

class CriticEnsemble {
 public:
  CriticEnsemble() = default;

  int size() const { return static_cast<int>(members_.size()); }
  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }
  const StateNormalizer& normalizer() const { return norm_; }

  Critic& member(int i) { return members_.at(static_cast<std::size_t>(i)); }
  const Critic& member(int i) const { return members_.at(static_cast<std::size_t>(i)); }
  std::vector<Critic>& members() { return members_; }

  /// Network input: normalized state stacked over action.
  Mat input(const Mat& states, const Mat& actions) const;

  /// N predictions at one (s, a), in member order. Throws on NaN input.
  Vec predict(const Vec& state, const Vec& action) const;
  Vec predict_target(const Vec& state, const Vec& action) const;
  /// N x B online predictions.
  Mat predict(const Mat& states, const Mat& actions) const;
  Mat predict_target(const Mat& states, const Mat& actions) const;

  void set_learning_rate(double lr);
  void reset_optimizers();

  friend CriticEnsemble init_ensemble(int n, int obs_dim, int act_dim, std::uint64_t seed,
                                      StateNormalizer norm, int hidden);
  friend void from_json(const nlohmann::json& j, CriticEnsemble& e);

 private:
  int obs_dim_ = 0;
  int act_dim_ = 0;
  StateNormalizer norm_;
  std::vector<Critic> members_;
};

/// N >= 2 independently initialized members; targets start equal to members.
CriticEnsemble init_ensemble(int n, int obs_dim, int act_dim, std::uint64_t seed,
                             StateNormalizer norm, int hidden = 64);
inline CriticEnsemble init_ensemble(int n, int obs_dim, int act_dim, std::uint64_t seed) {
  return init_ensemble(n, obs_dim, act_dim, seed, StateNormalizer::identity(obs_dim));
}

struct LossAndGrad {
  double value = 0.0;
  Vec grad;
};

/// Sum over the repulsive batch of exp(-|Q_i(s,a) - (r + gamma Q_i(s',a'))|^2 / (2 delta^2)).
/// The online member appears on both sides and the gradient flows through both.
/// `next_actions` are a' ~ pi(.|s'). Throws RoleError unless the batch is repulsive.
LossAndGrad diversity_loss(const CriticEnsemble& ensemble, int member, const Batch& repulsive,
                           const Mat& next_actions, double delta, double gamma);

/// Per-member critic objective pieces, reported separately.
struct CriticLoss {
  double rl = 0.0;         // mean squared TD error on the nominal batch
  double diversity = 0.0;  // mean diversity term on the repulsive batch
  double total = 0.0;      // rl + lambda * diversity
  Vec grad;
};

struct CriticLossInputs {
  const Batch* nominal = nullptr;
  const Vec* td_targets = nullptr;     // y per nominal column
  const Batch* repulsive = nullptr;    // may be null when lambda is unused
  const Mat* repulsive_next_actions = nullptr;
  double lambda = 0.0;
  double delta = 1e-2;
  double gamma = 0.99;
};

CriticLoss critic_loss(const CriticEnsemble& ensemble, int member, const CriticLossInputs& in);

/// Coefficient keeping lambda * div at `target_fraction` of rl + lambda * div.
/// Returns `previous` when div <= 0 or inputs are not finite.
double adaptive_lambda(double rl_loss, double div_loss, double target_fraction,
                       double previous = 0.0);

void to_json(nlohmann::json& j, const StateNormalizer& n);
void from_json(const nlohmann::json& j, StateNormalizer& n);
void to_json(nlohmann::json& j, const Mlp& m);
void from_json(const nlohmann::json& j, Mlp& m);
/// {"obs_dim", "act_dim", "normalizer", "members": [{"sizes", "online", "target"}]}
void to_json(nlohmann::json& j, const CriticEnsemble& e);
void from_json(const nlohmann::json& j, CriticEnsemble& e);

void save_ensemble(const CriticEnsemble& e, const std::filesystem::path& path);
CriticEnsemble load_ensemble(const std::filesystem::path& path);

}  // namespace uarl
