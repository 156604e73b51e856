#pragma once

#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "uarl/actor.hpp"
#include "uarl/batch.hpp"
#include "uarl/data.hpp"
#include "uarl/ensemble.hpp"

namespace uarl {

class BalancedBuffer;

/// TD3+BC backbone hyperparameters plus the diversity-term settings.
struct TrainConfig {
  double gamma = 0.99;
  int batch_size = 256;
  double polyak = 5e-3;
  int actor_delay = 2;
  double bc_alpha = 2.5;
  int steps = 5000;
  std::uint64_t seed = 0;
  double delta = 1e-2;
  double lambda_fraction = 0.1;  // diversity share of the total critic loss
  int lambda_refresh = 100;      // optimizer steps between lambda updates
  double lambda_max = 10.0;      // cap when the diversity term is vanishingly small
  double lr = 3e-4;
  int n_critics = 4;
  int hidden = 64;
  double policy_noise = 0.2;     // target smoothing noise, fraction of the action bound
  double noise_clip = 0.5;
  int eval_every = 1000;
  int eval_episodes = 5;
  double exploration_sigma = 0.1;  // rollouts of the current policy between iterations
  bool exploratory_rollouts = true;
  bool parallel = true;            // update ensemble members concurrently

  void validate() const;
};

struct StepMetrics;
/// Called after every optimizer step with the models as they stand. Not serialized.
using StepObserver = std::function<void(const StepMetrics&, const Actor&, const CriticEnsemble&)>;

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Clipped Gaussian smoothing noise for target actions, act_dim x n.
Mat target_policy_noise(int act_dim, Eigen::Index n, double bound, const TrainConfig& cfg, Rng& rng);

/// y = r + gamma * not_done * min_i Q_i^target(s', clip(pi_target(s') + noise)).
Vec td_targets(const Batch& batch, const Actor& actor, const CriticEnsemble& ensemble,
               double gamma, const Mat& noise);

struct CriticReport {
  double rl = 0.0;         // mean over members
  double diversity = 0.0;  // mean over members
  double lambda = 0.0;
  double total = 0.0;
};

/// One optimizer step per member on critic_loss. Members are independent, so the
/// parallel and serial paths produce identical parameters.
CriticReport update_critics(CriticEnsemble& ensemble, const Actor& actor, const Batch& nominal,
                            const Batch* repulsive, const TrainConfig& cfg, double lambda,
                            Rng& target_noise_rng, Rng& diversity_noise_rng);

struct ActorLoss {
  double value = 0.0;
  double q_term = 0.0;  // mean Q1(s, pi(s))
  double bc_term = 0.0; // mean squared deviation from dataset actions
  double q_scale = 0.0; // alpha / mean |Q1|, held constant for the gradient
  Vec grad;
};

/// -q_scale * mean Q1(s, pi(s)) + mean (pi(s) - a)^2. When `q_scale` is unset it is
/// alpha / mean|Q1(s, pi(s))| evaluated at the current parameters.
ActorLoss actor_loss(const Actor& actor, const CriticEnsemble& ensemble, const Batch& nominal,
                     double alpha, std::optional<double> q_scale = std::nullopt);

ActorLoss update_actor(Actor& actor, const CriticEnsemble& ensemble, const Batch& nominal,
                       const TrainConfig& cfg);

/// target <- (1 - polyak) target + polyak online.
void soft_update_targets(CriticEnsemble& ensemble, double polyak);
void soft_update_targets(Actor& actor, double polyak);

struct StepMetrics {
  int step = 0;
  double rl_loss = 0.0;
  double div_loss = 0.0;
  double lambda = 0.0;
  double eval_return = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  std::shared_ptr<Actor> actor;
  CriticEnsemble ensemble;
  std::vector<StepMetrics> metrics;
  int actor_updates = 0;
};

/// Fresh actor and ensemble as train_offline creates them.
struct Models {
  std::shared_ptr<Actor> actor;
  CriticEnsemble ensemble;
};
Models init_models(const Dataset& nominal, const EnvSpec& env, const TrainConfig& cfg);

/// Backbone training with the diversity term on `repulsive`.
TrainResult train_offline(const Dataset& nominal, const Dataset& repulsive, const EnvSpec& env,
                          const TrainConfig& cfg, const StepObserver& observer = {});

/// Plain TD3+BC: no repulsive data and no diversity computation.
TrainResult train_backbone(const Dataset& nominal, const EnvSpec& env, const TrainConfig& cfg,
                           const StepObserver& observer = {});

/// Continues training from (actor, ensemble), drawing nominal batches weight-proportionally
/// from `buffer`. Optimizer moments are reset first.
TrainResult finetune(const Actor& actor, const CriticEnsemble& ensemble,
                     const BalancedBuffer& buffer, const Dataset& new_repulsive,
                     const EnvSpec& env, const TrainConfig& cfg);

/// CSV: step,rl_loss,div_loss,lambda,eval_return (eval_return empty when not evaluated).
void write_metrics_csv(const std::vector<StepMetrics>& metrics, const std::filesystem::path& path);

void to_json(nlohmann::json& j, const Actor& a);
void from_json(const nlohmann::json& j, Actor& a);
void save_actor(const Actor& a, const std::filesystem::path& path);
Actor load_actor(const std::filesystem::path& path);

}  // namespace uarl
