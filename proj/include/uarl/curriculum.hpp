#pragma once

#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uarl/agent.hpp"
#include "uarl/audit.hpp"
#include "uarl/data.hpp"
#include "uarl/gate.hpp"

namespace uarl {

struct CurriculumConfig {
  int nominal_episodes = 200;
  int repulsive_episodes = 200;
  int finetune_steps = -1;     // -1: same as train.steps
  int max_iters = -1;          // -1: one fine-tune per remaining schedule stage
  bool stop_on_deploy = true;  // false keeps expanding after a deploy decision
  std::uint64_t seed = 0;
  /// Parameters at which a return is measured after every iteration, for reporting only.
  std::optional<DomainParams> report_params;
  int report_episodes = 10;
  /// Artifact root; empty disables persistence.
  std::filesystem::path run_dir;
};

enum class CurriculumStatus { running, deployed, budget_exhausted };

std::string_view to_string(CurriculumStatus s);

struct IterationRecord {
  int iteration = 0;
  ParamRange nominal_range;    // range the critics treat as in-distribution
  ParamRange repulsive_range;  // range of the repulsive side of the loss
  std::vector<std::string> buffer_datasets;  // nominal side of the loss
  std::string repulsive_dataset;
  GateReport gate;
  double target_return = std::numeric_limits<double>::quiet_NaN();
  double repulsive_coverage_kl = std::numeric_limits<double>::quiet_NaN();
  std::vector<StepMetrics> metrics;
};

struct CurriculumState {
  int iteration = 0;
  ParamRange nominal_range;
  ParamRange repulsive_range;
  std::vector<Dataset> datasets;  // D_0, D_1, ... in collection order
  std::optional<GateReport> latest;
  CurriculumStatus status = CurriculumStatus::running;
  std::string diagnostic;
  std::vector<IterationRecord> records;
  std::shared_ptr<Actor> actor;
  CriticEnsemble ensemble;
  nlohmann::json audit;
};

/// Expand, collect, fine-tune on a balanced buffer and gate on D_t until the gate
/// deploys or the schedule runs out. `target_proxy` is only ever read by the gate.
/// Parts of `outer` outside `inner` along the active parameter. A degenerate or equal
/// `inner` yields `outer` itself.
std::vector<ParamRange> ring(const ParamRange& inner, const ParamRange& outer);

/// Repulsive rollouts on ring(inner, outer), episodes split over the parts by length.
/// Provenance records `outer`.
Dataset collect_repulsive(const EnvSpec& env, const ParamRange& inner, const ParamRange& outer,
                          const RolloutPolicy& policy, int n_episodes, std::uint64_t seed);

CurriculumState run_curriculum(const EnvSpec& env, const Schedule& schedule,
                               const Dataset& target_proxy, const GateConfig& gate,
                               const TrainConfig& train, const CurriculumConfig& config,
                               AccessAudit* audit = nullptr);

struct SummaryRow {
  int iteration = 0;
  double sigma2_mean = 0.0;
  double tau = 0.0;
  Decision decision = Decision::proceed;
  double target_return = std::numeric_limits<double>::quiet_NaN();
};

std::vector<SummaryRow> iteration_summary(const CurriculumState& state);

/// CSV: iteration,sigma2_mean,tau,decision,target_return.
void write_summary_csv(const std::vector<SummaryRow>& rows, const std::filesystem::path& path);

}  // namespace uarl
