#include "uarl/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "uarl/buffer.hpp"
#include "uarl/error.hpp"
#include "uarl/log.hpp"

namespace uarl {

std::string_view to_string(CurriculumStatus s) {
  switch (s) {
    case CurriculumStatus::running: return "running";
    case CurriculumStatus::deployed: return "deployed";
    case CurriculumStatus::budget_exhausted: return "budget_exhausted";
  }
  return "unknown";
}

namespace {

std::string dataset_name(std::size_t k) { return "D_" + std::to_string(k); }

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
}

nlohmann::json record_json(const IterationRecord& r) {
  return {{"iteration", r.iteration},
          {"nominal_range", r.nominal_range},
          {"repulsive_range", r.repulsive_range},
          {"buffer_datasets", r.buffer_datasets},
          {"repulsive_dataset", r.repulsive_dataset},
          {"sigma2_mean", r.gate.sigma2_mean},
          {"tau", r.gate.tau},
          {"decision", to_string(r.gate.decision)},
          {"target_return", std::isfinite(r.target_return) ? nlohmann::json(r.target_return)
                                                           : nlohmann::json(nullptr)},
          {"repulsive_coverage_kl", std::isfinite(r.repulsive_coverage_kl)
                                        ? nlohmann::json(r.repulsive_coverage_kl)
                                        : nlohmann::json(nullptr)}};
}

}  // namespace

std::vector<ParamRange> ring(const ParamRange& inner, const ParamRange& outer) {
  if (!outer.contains(inner)) throw InvalidArgument("ring: outer range does not contain the inner range");
  const Interval in = inner.active_interval();
  const Interval out = outer.active_interval();
  if (in.lo == in.hi || in == out) return {outer};
  std::vector<ParamRange> parts;
  for (const Interval piece : {Interval{out.lo, in.lo}, Interval{in.hi, out.hi}}) {
    if (piece.hi > piece.lo) {
      ParamRange r = outer;
      r.interval(outer.active) = piece;
      parts.push_back(r);
    }
  }
  return parts;
}

Dataset collect_repulsive(const EnvSpec& env, const ParamRange& inner, const ParamRange& outer,
                          const RolloutPolicy& policy, int n_episodes, std::uint64_t seed) {
  const auto parts = ring(inner, outer);
  if (parts.size() == 1) {
    auto d = collect_rollouts(env, parts[0], policy, n_episodes, seed, Role::repulsive);
    Provenance p = d.provenance();
    p.range = outer;
    return Dataset(Role::repulsive, p, d.episodes());
  }
  const double l0 = parts[0].active_interval().hi - parts[0].active_interval().lo;
  const double l1 = parts[1].active_interval().hi - parts[1].active_interval().lo;
  const int n0 = std::clamp(static_cast<int>(std::lround(n_episodes * l0 / (l0 + l1))), 1,
                            std::max(1, n_episodes - 1));
  auto eps = collect_rollouts(env, parts[0], policy, n0, derive_seed(seed, 0), Role::repulsive).episodes();
  const auto upper = collect_rollouts(env, parts[1], policy, std::max(1, n_episodes - n0),
                                      derive_seed(seed, 1), Role::repulsive);
  eps.insert(eps.end(), upper.episodes().begin(), upper.episodes().end());
  Provenance p = upper.provenance();
  p.range = outer;
  p.seed = seed;
  return Dataset(Role::repulsive, p, std::move(eps));
}

namespace {

class Runner {
 public:
  Runner(const EnvSpec& env, const Schedule& schedule, const Dataset& target_proxy,
         const GateConfig& gate, const TrainConfig& train, const CurriculumConfig& config,
         AccessAudit& audit)
      : env_(env),
        schedule_(schedule),
        gate_(gate),
        train_(train),
        config_(config),
        audit_(audit),
        proxy_(target_proxy, audit),
        behavior_(scripted_behavior_policy(env)) {}

  CurriculumState run() {
    if (!config_.run_dir.empty()) {
      for (const char* sub : {"datasets", "checkpoints", "reports"}) {
        std::filesystem::create_directories(config_.run_dir / sub);
      }
      save_dataset(proxy_.read("persist"), config_.run_dir / "datasets" / "target_proxy.jsonl");
    }
    const ParamRange e0 = ParamRange::around(env_.nominal_params, schedule_.param);
    const ParamRange e1 = expand_range(e0, schedule_, 0);
    add_dataset(collect(e0, *behavior_, config_.nominal_episodes, Role::nominal));
    add_dataset(collect_ring(e0, e1, *behavior_));

    IterationRecord rec;
    rec.iteration = 0;
    rec.nominal_range = e0;
    rec.repulsive_range = e1;
    rec.buffer_datasets = {dataset_name(0)};
    rec.repulsive_dataset = dataset_name(1);
    rec.repulsive_coverage_kl = coverage(state_.datasets[1], e0, e1);
    {
      const auto scope = audit_.training_scope();
      audit_.check_training_data(state_.datasets[0]);
      audit_.check_training_data(state_.datasets[1]);
      auto result = train_offline(state_.datasets[0], state_.datasets[1], env_, train_);
      adopt(std::move(result), rec);
    }
    state_.nominal_range = e0;
    state_.repulsive_range = e1;
    finish_iteration(std::move(rec));

    const int max_iters = config_.max_iters < 0 ? static_cast<int>(schedule_.stages.size())
                                                : config_.max_iters;
    int i = 0;
    while (true) {
      if (state_.latest->decision == Decision::deploy && config_.stop_on_deploy) {
        state_.status = CurriculumStatus::deployed;
        break;
      }
      if (i >= max_iters) break;
      ParamRange next;
      try {
        next = expand_range(state_.repulsive_range, schedule_, i + 1);
      } catch (const BudgetExhausted&) {
        break;
      }
      const double sigma = train_.exploratory_rollouts ? train_.exploration_sigma : 0.0;
      const ActorRolloutPolicy rollout(state_.actor, sigma, "policy_" + std::to_string(i));
      add_dataset(collect_ring(state_.repulsive_range, next, rollout));

      IterationRecord r;
      r.iteration = i + 1;
      r.nominal_range = state_.repulsive_range;
      r.repulsive_range = next;
      r.repulsive_dataset = dataset_name(state_.datasets.size() - 1);
      r.repulsive_coverage_kl = coverage(state_.datasets.back(), state_.repulsive_range, next);
      std::vector<Dataset> pool;
      for (std::size_t k = 0; k + 1 < state_.datasets.size(); ++k) {
        pool.push_back(state_.datasets[k].retagged(Role::nominal));
        r.buffer_datasets.push_back(dataset_name(k));
      }
      const BalancedBuffer buffer = merge_balanced(pool, state_.ensemble);
      if (!config_.run_dir.empty()) {
        buffer.write_csv(config_.run_dir / "reports" / ("buffer_" + std::to_string(i + 1) + ".csv"));
      }
      TrainConfig ft = train_;
      if (config_.finetune_steps >= 0) ft.steps = config_.finetune_steps;
      ft.seed = derive_seed(train_.seed, stream::kCurriculum, static_cast<std::uint64_t>(i + 1));
      {
        const auto scope = audit_.training_scope();
        for (const auto& d : pool) audit_.check_training_data(d);
        audit_.check_training_data(state_.datasets.back());
        auto result = finetune(*state_.actor, state_.ensemble, buffer, state_.datasets.back(), env_, ft);
        adopt(std::move(result), r);
      }
      state_.nominal_range = r.nominal_range;
      state_.repulsive_range = next;
      state_.iteration = i + 1;
      finish_iteration(std::move(r));
      ++i;
    }
    if (state_.status == CurriculumStatus::running) {
      if (state_.latest->decision == Decision::deploy) {
        state_.status = CurriculumStatus::deployed;
      } else {
        state_.status = CurriculumStatus::budget_exhausted;
        state_.diagnostic = "randomization budget exhausted with sigma2 = " +
                            std::to_string(state_.latest->sigma2_mean) + " above tau = " +
                            std::to_string(state_.latest->tau) +
                            ": the agent has not generalized to the target domain";
        log(LogLevel::warn, state_.diagnostic);
      }
    }
    state_.audit = audit_;
    if (!config_.run_dir.empty()) {
      nlohmann::json iters = nlohmann::json::array();
      for (const auto& r : state_.records) iters.push_back(record_json(r));
      write_json({{"status", to_string(state_.status)},
                  {"diagnostic", state_.diagnostic},
                  {"iterations", iters},
                  {"audit", state_.audit}},
                 config_.run_dir / "reports" / "state.json");
      write_summary_csv(iteration_summary(state_), config_.run_dir / "reports" / "summary.csv");
    }
    return std::move(state_);
  }

 private:
  Dataset collect(const ParamRange& range, const RolloutPolicy& policy, int episodes, Role role) {
    const auto k = static_cast<std::uint64_t>(state_.datasets.size());
    return collect_rollouts(env_, range, policy, episodes,
                            derive_seed(config_.seed, stream::kCurriculum, k), role);
  }

  Dataset collect_ring(const ParamRange& inner, const ParamRange& outer, const RolloutPolicy& policy) {
    const auto k = static_cast<std::uint64_t>(state_.datasets.size());
    return collect_repulsive(env_, inner, outer, policy, config_.repulsive_episodes,
                             derive_seed(config_.seed, stream::kCurriculum, k));
  }

  void add_dataset(Dataset d) {
    if (!config_.run_dir.empty()) {
      save_dataset(d, config_.run_dir / "datasets" / (dataset_name(state_.datasets.size()) + ".jsonl"));
    }
    state_.datasets.push_back(std::move(d));
  }

  double coverage(const Dataset& d, const ParamRange& inner, const ParamRange& outer) const {
    const auto parts = ring(inner, outer);
    if (parts.size() != 1 || d.episodes().size() < 50) return std::numeric_limits<double>::quiet_NaN();
    const ParamRange& range = parts[0];
    std::vector<double> phi;
    for (const auto& ep : d.episodes()) phi.push_back(get(ep.front().phi, range.active));
    return kl_coverage(phi, range.active_interval(), gate_.tau_kl).kl;
  }

  void adopt(TrainResult result, IterationRecord& rec) {
    state_.actor = std::move(result.actor);
    state_.ensemble = std::move(result.ensemble);
    rec.metrics = std::move(result.metrics);
  }

  void finish_iteration(IterationRecord rec) {
    const auto k = static_cast<std::uint64_t>(rec.iteration);
    const Dataset id = collect_rollouts(env_, rec.nominal_range, *behavior_, gate_.id_episodes,
                                        derive_seed(config_.seed, stream::kIdRollouts, k),
                                        Role::nominal);
    const auto id_var = episode_mean_variances(state_.ensemble, id);
    rec.gate = gate_decision(state_.ensemble, proxy_.read("gate"), gate_, id_var);
    if (config_.report_params) {
      const ActorRolloutPolicy greedy(state_.actor, 0.0, "report");
      rec.target_return = evaluate_return(env_, *config_.report_params, greedy,
                                          config_.report_episodes,
                                          derive_seed(config_.seed, stream::kEval, k));
    }
    log(LogLevel::info, "iteration " + std::to_string(rec.iteration) + ": sigma2 " +
                            std::to_string(rec.gate.sigma2_mean) + " tau " +
                            std::to_string(rec.gate.tau) + " -> " +
                            std::string(to_string(rec.gate.decision)));
    if (!config_.run_dir.empty()) {
      const auto tag = std::to_string(rec.iteration);
      const auto ck = config_.run_dir / "checkpoints";
      const auto rp = config_.run_dir / "reports";
      save_actor(*state_.actor, ck / ("actor_" + tag + ".json"));
      save_ensemble(state_.ensemble, ck / ("critics_" + tag + ".json"));
      auto gj = nlohmann::json(rec.gate);
      gj["iteration"] = rec.iteration;
      write_json(gj, rp / ("gate_" + tag + ".json"));
      write_trace_csv(rec.gate, rp / ("trace_" + tag + ".csv"));
      write_metrics_csv(rec.metrics, rp / ("metrics_" + tag + ".csv"));
    }
    state_.latest = rec.gate;
    state_.records.push_back(std::move(rec));
  }

  const EnvSpec& env_;
  const Schedule& schedule_;
  const GateConfig& gate_;
  const TrainConfig& train_;
  const CurriculumConfig& config_;
  AccessAudit& audit_;
  TargetProxy proxy_;
  std::shared_ptr<const RolloutPolicy> behavior_;
  CurriculumState state_;
};

}  // namespace

CurriculumState run_curriculum(const EnvSpec& env, const Schedule& schedule,
                               const Dataset& target_proxy, const GateConfig& gate,
                               const TrainConfig& train, const CurriculumConfig& config,
                               AccessAudit* audit) {
  env.validate();
  schedule.validate();
  if (schedule.stages.empty()) throw InvalidArgument("run_curriculum: empty schedule");
  gate.validate();
  train.validate();
  if (config.nominal_episodes < 1 || config.repulsive_episodes < 1) {
    throw InvalidArgument("run_curriculum: episode counts must be >= 1");
  }
  AccessAudit local;
  Runner runner(env, schedule, target_proxy, gate, train, config, audit != nullptr ? *audit : local);
  return runner.run();
}

std::vector<SummaryRow> iteration_summary(const CurriculumState& state) {
  std::vector<SummaryRow> rows;
  for (const auto& r : state.records) {
    rows.push_back({r.iteration, r.gate.sigma2_mean, r.gate.tau, r.gate.decision, r.target_return});
  }
  return rows;
}

void write_summary_csv(const std::vector<SummaryRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.precision(17);
  out << "iteration,sigma2_mean,tau,decision,target_return\n";
  for (const auto& r : rows) {
    out << r.iteration << ',' << r.sigma2_mean << ',' << r.tau << ',' << to_string(r.decision) << ',';
    if (std::isfinite(r.target_return)) out << r.target_return;
    out << '\n';
  }
}

}  // namespace uarl
