#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uarl/data.hpp"
#include "uarl/ensemble.hpp"

namespace uarl {

enum class ThresholdMode { percentile, gaussian };

std::string_view to_string(ThresholdMode m);
ThresholdMode threshold_mode_from_string(std::string_view name);

struct GateConfig {
  double percentile = 95.0;
  double alpha = 0.05;
  ThresholdMode mode = ThresholdMode::percentile;
  double tau_kl = 0.25;
  int id_episodes = 100;  // fresh in-distribution rollouts per threshold

  void validate() const;
};

void to_json(nlohmann::json& j, const GateConfig& c);
void from_json(const nlohmann::json& j, GateConfig& c);

enum class Decision { deploy, proceed };  // proceed: keep expanding the randomization range

std::string_view to_string(Decision d);

struct GateReport {
  double sigma2_mean = 0.0;
  double tau = 0.0;
  Decision decision = Decision::proceed;
  ThresholdMode mode = ThresholdMode::percentile;
  std::vector<double> id_variances;
  std::vector<std::vector<double>> traces;  // sigma^2 per step of each target-proxy episode
};

void to_json(nlohmann::json& j, const GateReport& r);

/// sigma^2 at every transition of the dataset, in flat order.
Vec variance_trace(const CriticEnsemble& ensemble, const Dataset& dataset);

/// Per-episode mean of variance_trace.
std::vector<double> episode_mean_variances(const CriticEnsemble& ensemble, const Dataset& dataset);

/// Linearly interpolated order statistic at `percentile` in (0, 100]. Needs >= 20 samples.
double threshold_percentile(std::span<const double> id_variances, double percentile);

/// sigma_in^2 + z_{1-alpha} * sigma_in / sqrt(n).
double threshold_gaussian(double sigma_in2, int n, double alpha);

/// Threshold from ID variances under the configured rule; `ensemble_size` feeds the
/// Gaussian rule.
double gate_threshold(std::span<const double> id_variances, int ensemble_size,
                      const GateConfig& config);

/// Deploy iff the mean sigma^2 over every transition of the target proxy is <= tau.
GateReport gate_decision(const CriticEnsemble& ensemble, const Dataset& target_proxy,
                         const GateConfig& config, std::span<const double> id_variances);

/// CSV: episode,t,sigma2.
void write_trace_csv(const GateReport& report, const std::filesystem::path& path);

struct Coverage {
  double kl = 0.0;
  bool covered = false;
  std::vector<int> counts;
  int out_of_range = 0;
};

/// 16-bin histogram of phi over `range` against the uniform density on it.
/// Samples outside the range land in the boundary bins.
Coverage kl_coverage(std::span<const double> phi_samples, const Interval& range, double tau_kl);

}  // namespace uarl
