#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace uarl {

/// Outcome of one acceptance criterion.
struct CriterionResult {
  int id = 0;
  std::string name;
  std::string status;  // pass | fail | not_evaluated
  std::string detail;
};

/// The acceptance criteria, in order, with status not_evaluated.
std::vector<CriterionResult> acceptance_criteria();

void to_json(nlohmann::json& j, const CriterionResult& r);
void from_json(const nlohmann::json& j, CriterionResult& r);

struct ReportBundle {
  std::filesystem::path directory;
  std::vector<std::filesystem::path> files;
  std::vector<CriterionResult> acceptance;
};

/// Reads a curriculum run directory and writes reports/bundle/ with
///   variance_traces.csv  label,role,iteration,episode,sigma2 (episode means; ID rollouts
///                        labeled ID, target-proxy episodes labeled OOD)
///   summary.csv          one row per iteration
///   acceptance.json      every criterion by id; criteria measured by the acceptance suite
///                        are merged from acceptance_results.json when present
/// Throws Error listing every missing artifact by name.
ReportBundle build_report(const std::filesystem::path& run_dir);

}  // namespace uarl
