#include "uarl/agent.hpp"

#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <random>
#include <set>

#include "uarl/buffer.hpp"
#include "uarl/error.hpp"
#include "uarl/log.hpp"

namespace uarl {

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw InvalidArgument(std::string("train.") + msg);
  };
  require(gamma >= 0 && gamma < 1, "gamma: must lie in [0,1)");
  require(batch_size >= 1, "batch_size: must be >= 1");
  require(polyak > 0 && polyak <= 1, "polyak: must lie in (0,1]");
  require(actor_delay >= 1, "actor_delay: must be >= 1");
  require(bc_alpha >= 0, "bc_alpha: must be >= 0");
  require(steps >= 0, "steps: must be >= 0");
  require(delta > 0, "delta: must be > 0");
  require(lambda_fraction >= 0 && lambda_fraction < 1, "lambda_fraction: must lie in [0,1)");
  require(lambda_refresh >= 1, "lambda_refresh: must be >= 1");
  require(lambda_max >= 0, "lambda_max: must be >= 0");
  require(lr >= 0, "lr: must be >= 0");
  require(n_critics >= 2, "n_critics: must be >= 2");
  require(hidden >= 1, "hidden: must be >= 1");
  require(policy_noise >= 0 && noise_clip >= 0, "policy_noise: policy_noise and noise_clip must be >= 0");
  require(eval_every >= 0 && eval_episodes >= 1, "eval_every: eval_every must be >= 0 and eval_episodes >= 1");
  require(exploration_sigma >= 0, "exploration_sigma: must be >= 0");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"gamma", c.gamma},
       {"batch_size", c.batch_size},
       {"polyak", c.polyak},
       {"actor_delay", c.actor_delay},
       {"bc_alpha", c.bc_alpha},
       {"steps", c.steps},
       {"seed", c.seed},
       {"delta", c.delta},
       {"lambda_fraction", c.lambda_fraction},
       {"lambda_refresh", c.lambda_refresh},
       {"lambda_max", c.lambda_max},
       {"lr", c.lr},
       {"n_critics", c.n_critics},
       {"hidden", c.hidden},
       {"policy_noise", c.policy_noise},
       {"noise_clip", c.noise_clip},
       {"eval_every", c.eval_every},
       {"eval_episodes", c.eval_episodes},
       {"exploration_sigma", c.exploration_sigma},
       {"exploratory_rollouts", c.exploratory_rollouts},
       {"parallel", c.parallel}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  static const std::set<std::string> known = {
      "gamma",        "batch_size",     "polyak",     "actor_delay",  "bc_alpha",
      "steps",        "seed",           "delta",      "lambda_fraction", "lambda_refresh", "lambda_max",
      "lr",           "n_critics",      "hidden",     "policy_noise", "noise_clip",
      "eval_every",   "eval_episodes",  "exploration_sigma", "exploratory_rollouts", "parallel"};
  if (!j.is_object()) throw InvalidArgument("train: expected an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw InvalidArgument("train." + key + ": unknown field");
  }
  TrainConfig d;
  auto get = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const nlohmann::json::exception&) {
      throw InvalidArgument(std::string("train.") + key + ": wrong type");
    }
  };
  c = d;
  get("gamma", c.gamma);
  get("batch_size", c.batch_size);
  get("polyak", c.polyak);
  get("actor_delay", c.actor_delay);
  get("bc_alpha", c.bc_alpha);
  get("steps", c.steps);
  get("seed", c.seed);
  get("delta", c.delta);
  get("lambda_fraction", c.lambda_fraction);
  get("lambda_refresh", c.lambda_refresh);
  get("lambda_max", c.lambda_max);
  get("lr", c.lr);
  get("n_critics", c.n_critics);
  get("hidden", c.hidden);
  get("policy_noise", c.policy_noise);
  get("noise_clip", c.noise_clip);
  get("eval_every", c.eval_every);
  get("eval_episodes", c.eval_episodes);
  get("exploration_sigma", c.exploration_sigma);
  get("exploratory_rollouts", c.exploratory_rollouts);
  get("parallel", c.parallel);
}

Mat target_policy_noise(int act_dim, Eigen::Index n, double bound, const TrainConfig& cfg, Rng& rng) {
  Mat noise(act_dim, n);
  std::normal_distribution<double> g(0.0, 1.0);
  const double sd = cfg.policy_noise * bound;
  const double clip = cfg.noise_clip * bound;
  for (Eigen::Index c = 0; c < n; ++c) {
    for (int r = 0; r < act_dim; ++r) noise(r, c) = std::clamp(sd * g(rng), -clip, clip);
  }
  return noise;
}

namespace {

Mat clip_actions(Mat a, double bound) { return a.cwiseMax(-bound).cwiseMin(bound); }

}  // namespace

Vec td_targets(const Batch& batch, const Actor& actor, const CriticEnsemble& ensemble,
               double gamma, const Mat& noise) {
  const Mat next = clip_actions(actor.act_target(batch.s2) + noise, actor.bound());
  const Mat q = ensemble.predict_target(batch.s2, next);
  const Vec qmin = q.colwise().minCoeff().transpose();
  return batch.r + gamma * batch.not_done.cwiseProduct(qmin);
}

namespace {

/// Inputs shared by every member for one critic step.
struct CriticStepInputs {
  Vec y;
  Mat repulsive_next;
};

CriticStepInputs prepare_critic_step(const CriticEnsemble& ensemble, const Actor& actor,
                                     const Batch& nominal, const Batch* repulsive,
                                     const TrainConfig& cfg, Rng& target_noise_rng,
                                     Rng& diversity_noise_rng) {
  CriticStepInputs in;
  const Mat noise =
      target_policy_noise(actor.act_dim(), nominal.size(), actor.bound(), cfg, target_noise_rng);
  in.y = td_targets(nominal, actor, ensemble, cfg.gamma, noise);
  if (repulsive != nullptr) {
    const Mat dn = target_policy_noise(actor.act_dim(), repulsive->size(), actor.bound(), cfg,
                                       diversity_noise_rng);
    in.repulsive_next = clip_actions(actor.act(repulsive->s2) + dn, actor.bound());
  }
  return in;
}

CriticLossInputs loss_inputs(const Batch& nominal, const Batch* repulsive,
                             const CriticStepInputs& in, const TrainConfig& cfg, double lambda) {
  CriticLossInputs li;
  li.nominal = &nominal;
  li.td_targets = &in.y;
  li.repulsive = repulsive;
  li.repulsive_next_actions = repulsive != nullptr ? &in.repulsive_next : nullptr;
  li.lambda = lambda;
  li.delta = cfg.delta;
  li.gamma = cfg.gamma;
  return li;
}

/// Loss values at the current parameters without stepping.
CriticReport evaluate_critics(const CriticEnsemble& ensemble, const Batch& nominal,
                              const Batch* repulsive, const CriticStepInputs& in,
                              const TrainConfig& cfg) {
  CriticReport rep;
  const auto li = loss_inputs(nominal, repulsive, in, cfg, 0.0);
  for (int i = 0; i < ensemble.size(); ++i) {
    const auto l = critic_loss(ensemble, i, li);
    rep.rl += l.rl;
    rep.diversity += l.diversity;
  }
  rep.rl /= ensemble.size();
  rep.diversity /= ensemble.size();
  rep.total = rep.rl;
  return rep;
}

CriticReport apply_critic_step(CriticEnsemble& ensemble, const Batch& nominal,
                               const Batch* repulsive, const CriticStepInputs& in,
                               const TrainConfig& cfg, double lambda) {
  const auto li = loss_inputs(nominal, repulsive, in, cfg, lambda);
  const int n = ensemble.size();
  std::vector<CriticLoss> losses(static_cast<std::size_t>(n));
  std::exception_ptr failure;
#pragma omp parallel for schedule(static) if (cfg.parallel)
  for (int i = 0; i < n; ++i) {
    try {
      auto l = critic_loss(ensemble, i, li);
      auto& m = ensemble.member(i);
      m.opt.step(m.online.params(), l.grad);
      l.grad = Vec();
      losses[static_cast<std::size_t>(i)] = std::move(l);
    } catch (...) {
#pragma omp critical(uarl_critic_failure)
      failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  CriticReport rep;
  rep.lambda = lambda;
  for (const auto& l : losses) {
    rep.rl += l.rl;
    rep.diversity += l.diversity;
    rep.total += l.total;
  }
  rep.rl /= n;
  rep.diversity /= n;
  rep.total /= n;
  if (!std::isfinite(rep.total)) {
    throw DivergenceError("critic loss is not finite (rl=" + std::to_string(rep.rl) +
                          ", diversity=" + std::to_string(rep.diversity) +
                          ", lambda=" + std::to_string(lambda) + ")");
  }
  return rep;
}

}  // namespace

CriticReport update_critics(CriticEnsemble& ensemble, const Actor& actor, const Batch& nominal,
                            const Batch* repulsive, const TrainConfig& cfg, double lambda,
                            Rng& target_noise_rng, Rng& diversity_noise_rng) {
  if (nominal.size() == 0) throw InvalidArgument("update_critics: empty nominal batch");
  if (repulsive != nullptr && repulsive->size() == 0) {
    throw InvalidArgument("update_critics: empty repulsive batch");
  }
  const auto in = prepare_critic_step(ensemble, actor, nominal, repulsive, cfg, target_noise_rng,
                                      diversity_noise_rng);
  return apply_critic_step(ensemble, nominal, repulsive, in, cfg, lambda);
}

ActorLoss actor_loss(const Actor& actor, const CriticEnsemble& ensemble, const Batch& nominal,
                     double alpha, std::optional<double> q_scale) {
  const auto b = nominal.size();
  if (b == 0) throw InvalidArgument("actor_loss: empty batch");
  Mlp::Tape actor_tape;
  const Mat pi = actor.act(nominal.s, actor_tape);
  const auto& q1 = ensemble.member(0).online;
  Mlp::Tape critic_tape;
  const Mat q = q1.forward(ensemble.input(nominal.s, pi), critic_tape);

  ActorLoss out;
  out.q_term = q.mean();
  const double mean_abs = q.cwiseAbs().mean();
  out.q_scale = q_scale.value_or(mean_abs > 0 ? alpha / mean_abs : 0.0);
  const Mat diff = pi - nominal.a;
  const double count = static_cast<double>(diff.size());
  out.bc_term = diff.squaredNorm() / count;
  out.value = -out.q_scale * out.q_term + out.bc_term;

  Vec unused = Vec::Zero(q1.n_params());
  const Mat dq = Mat::Constant(1, b, -out.q_scale / static_cast<double>(b));
  const Mat dx = q1.backward(critic_tape, dq, unused);
  const Mat dpi = dx.bottomRows(actor.act_dim()) + (2.0 / count) * diff;
  out.grad = Vec::Zero(actor.net().n_params());
  actor.backward(actor_tape, dpi, out.grad);
  return out;
}

ActorLoss update_actor(Actor& actor, const CriticEnsemble& ensemble, const Batch& nominal,
                       const TrainConfig& cfg) {
  auto loss = actor_loss(actor, ensemble, nominal, cfg.bc_alpha);
  if (!std::isfinite(loss.value)) throw DivergenceError("actor loss is not finite");
  actor.optimizer().step(actor.net().params(), loss.grad);
  return loss;
}

void soft_update_targets(CriticEnsemble& ensemble, double polyak) {
  if (!(polyak > 0 && polyak <= 1)) throw InvalidArgument("polyak must lie in (0,1]");
  for (auto& m : ensemble.members()) {
    m.target.params() = (1.0 - polyak) * m.target.params() + polyak * m.online.params();
  }
}

void soft_update_targets(Actor& actor, double polyak) {
  if (!(polyak > 0 && polyak <= 1)) throw InvalidArgument("polyak must lie in (0,1]");
  actor.target().params() = (1.0 - polyak) * actor.target().params() + polyak * actor.net().params();
}

Models init_models(const Dataset& nominal, const EnvSpec& env, const TrainConfig& cfg) {
  cfg.validate();
  if (nominal.empty()) throw InvalidArgument("init_models: empty nominal dataset");
  auto norm = StateNormalizer::fit(nominal);
  Models m;
  m.actor = std::make_shared<Actor>(env.obs_dim(), env.act_dim(), env.action_bound(), norm,
                                    derive_seed(cfg.seed, stream::kInit, 1u << 20), cfg.hidden);
  m.actor->optimizer().lr = cfg.lr;
  m.ensemble = init_ensemble(cfg.n_critics, env.obs_dim(), env.act_dim(), cfg.seed, norm, cfg.hidden);
  m.ensemble.set_learning_rate(cfg.lr);
  return m;
}

namespace {

TrainResult run_training(Models models, const BalancedBuffer& buffer, const Dataset* repulsive,
                         const EnvSpec& env, const TrainConfig& cfg,
                         const StepObserver& observer = {}) {
  cfg.validate();
  Rng nominal_rng(derive_seed(cfg.seed, stream::kNominalBatch));
  Rng repulsive_rng(derive_seed(cfg.seed, stream::kRepulsiveBatch));
  Rng target_noise_rng(derive_seed(cfg.seed, stream::kTargetNoise));
  Rng diversity_noise_rng(derive_seed(cfg.seed, stream::kDiversityNoise));

  TrainResult result;
  result.metrics.reserve(static_cast<std::size_t>(cfg.steps));
  Actor& actor = *models.actor;
  CriticEnsemble& ensemble = models.ensemble;
  const auto bsize = static_cast<std::size_t>(cfg.batch_size);
  double lambda = 0.0;
  CriticReport last;

  for (int step = 0; step < cfg.steps; ++step) {
    const Batch nominal = buffer.sample_batch(bsize, nominal_rng);
    Batch rep_batch;
    if (repulsive != nullptr) {
      std::uniform_int_distribution<std::size_t> pick(0, repulsive->size() - 1);
      std::vector<std::size_t> idx(bsize);
      for (auto& i : idx) i = pick(repulsive_rng);
      rep_batch = make_batch(*repulsive, idx);
    }
    const Batch* rep = repulsive != nullptr ? &rep_batch : nullptr;
    const auto in = prepare_critic_step(ensemble, actor, nominal, rep, cfg, target_noise_rng,
                                        diversity_noise_rng);
    if (rep != nullptr && cfg.lambda_fraction > 0 && step % cfg.lambda_refresh == 0) {
      if (step == 0) last = evaluate_critics(ensemble, nominal, rep, in, cfg);
      lambda = std::min(adaptive_lambda(last.rl, last.diversity, cfg.lambda_fraction, lambda),
                        cfg.lambda_max);
    }
    last = apply_critic_step(ensemble, nominal, rep, in, cfg, lambda);

    if ((step + 1) % cfg.actor_delay == 0) {
      update_actor(actor, ensemble, nominal, cfg);
      ++result.actor_updates;
      soft_update_targets(ensemble, cfg.polyak);
      soft_update_targets(actor, cfg.polyak);
    }

    StepMetrics m;
    m.step = step;
    m.rl_loss = last.rl;
    m.div_loss = last.diversity;
    m.lambda = lambda;
    if (cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0) {
      const ActorRolloutPolicy greedy(models.actor, 0.0, "eval");
      m.eval_return = evaluate_return(env, env.nominal_params, greedy, cfg.eval_episodes,
                                      derive_seed(cfg.seed, stream::kEval, static_cast<std::uint64_t>(step)));
      log(LogLevel::debug, "step " + std::to_string(step + 1) + " eval return " +
                               std::to_string(m.eval_return));
    }
    if (observer) observer(m, actor, ensemble);
    result.metrics.push_back(m);
  }
  result.actor = std::move(models.actor);
  result.ensemble = std::move(models.ensemble);
  return result;
}

void require_role(const Dataset& d, Role role, const char* what) {
  if (d.role() != role) {
    throw RoleError(std::string(what) + ": expected a " + std::string(to_string(role)) +
                    " dataset, got " + std::string(to_string(d.role())));
  }
  if (d.empty()) throw InvalidArgument(std::string(what) + ": empty dataset");
}

}  // namespace

TrainResult train_offline(const Dataset& nominal, const Dataset& repulsive, const EnvSpec& env,
                          const TrainConfig& cfg, const StepObserver& observer) {
  require_role(nominal, Role::nominal, "train_offline");
  require_role(repulsive, Role::repulsive, "train_offline");
  return run_training(init_models(nominal, env, cfg), BalancedBuffer::uniform({nominal}),
                      &repulsive, env, cfg, observer);
}

TrainResult train_backbone(const Dataset& nominal, const EnvSpec& env, const TrainConfig& cfg,
                           const StepObserver& observer) {
  require_role(nominal, Role::nominal, "train_backbone");
  return run_training(init_models(nominal, env, cfg), BalancedBuffer::uniform({nominal}), nullptr,
                      env, cfg, observer);
}

TrainResult finetune(const Actor& actor, const CriticEnsemble& ensemble,
                     const BalancedBuffer& buffer, const Dataset& new_repulsive,
                     const EnvSpec& env, const TrainConfig& cfg) {
  require_role(new_repulsive, Role::repulsive, "finetune");
  if (buffer.size() == 0) throw InvalidArgument("finetune: empty buffer");
  Models m{std::make_shared<Actor>(actor), ensemble};
  m.actor->optimizer().reset(m.actor->net().n_params());
  m.actor->optimizer().lr = cfg.lr;
  m.ensemble.reset_optimizers();
  m.ensemble.set_learning_rate(cfg.lr);
  return run_training(std::move(m), buffer, &new_repulsive, env, cfg);
}

void write_metrics_csv(const std::vector<StepMetrics>& metrics, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.precision(17);
  out << "step,rl_loss,div_loss,lambda,eval_return\n";
  for (const auto& m : metrics) {
    out << m.step << ',' << m.rl_loss << ',' << m.div_loss << ',' << m.lambda << ',';
    if (std::isfinite(m.eval_return)) out << m.eval_return;
    out << '\n';
  }
}

void to_json(nlohmann::json& j, const Actor& a) {
  j = {{"action_bound", a.bound()},
       {"normalizer", a.normalizer()},
       {"net", a.net()},
       {"target", a.target()}};
}

void from_json(const nlohmann::json& j, Actor& a) {
  a = Actor(j.at("net").get<Mlp>(), j.at("target").get<Mlp>(), j.at("action_bound").get<double>(),
            j.at("normalizer").get<StateNormalizer>());
}

void save_actor(const Actor& a, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << nlohmann::json(a).dump() << '\n';
}

Actor load_actor(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in).get<Actor>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid actor checkpoint: ") + e.what(), 1);
  }
}

}  // namespace uarl
