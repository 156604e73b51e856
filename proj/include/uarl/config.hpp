#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "uarl/agent.hpp"
#include "uarl/curriculum.hpp"
#include "uarl/envs.hpp"
#include "uarl/gate.hpp"

namespace uarl {

struct DataConfig {
  int nominal_episodes = 200;
  int repulsive_episodes = 200;
  int target_episodes = 40;
  DomainParams target_params{};  // dynamics of the target-proxy domain
};

struct SeedConfig {
  std::uint64_t data = 0;
  std::uint64_t train = 0;
  std::uint64_t target = 1;
  std::uint64_t curriculum = 0;
};

struct CurriculumSection {
  int finetune_steps = -1;
  int max_iters = -1;
  bool stop_on_deploy = true;
  int report_episodes = 10;
};

struct ExperimentConfig {
  std::string name = "run";
  EnvSpec env;
  Schedule schedule;
  TrainConfig train;
  GateConfig gate;
  DataConfig data;
  SeedConfig seeds;
  CurriculumSection curriculum;
  std::filesystem::path output_root = "runs";

  /// runs/<name>, with UARL_RUNS_DIR replacing the root when set.
  std::filesystem::path run_dir() const;
  /// Curriculum options with report parameters set to the target domain.
  CurriculumConfig curriculum_config() const;
};

/// Parses and validates; throws ConfigError naming the offending field.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& c);

/// Every seed derived from one master value.
void apply_seed_override(ExperimentConfig& c, std::uint64_t seed);

/// 16-hex-digit digest of the canonical JSON form.
std::string config_digest(const ExperimentConfig& c);

inline constexpr const char* kVersion = "0.1.0";

/// manifest.json: config digest, version, seeds, subcommand and the full config.
void write_manifest(const ExperimentConfig& c, const std::string& subcommand,
                    const std::filesystem::path& run_dir);

}  // namespace uarl
