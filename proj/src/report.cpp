#include "uarl/report.hpp"

#include <fstream>

#include "uarl/error.hpp"

namespace uarl {

std::vector<CriterionResult> acceptance_criteria() {
  const std::vector<std::string> names = {
      "variance decomposition identity",
      "gradient correctness",
      "backbone reduction",
      "OOD separation",
      "gatekeeper trend",
      "gate end-to-end",
      "tabular certificates",
      "weighted fitted-Q",
      "balanced buffer statistics",
      "safety firewall",
      "Gaussian threshold formula"};
  std::vector<CriterionResult> out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    out.push_back({static_cast<int>(i + 1), names[i], "not_evaluated", ""});
  }
  return out;
}

void to_json(nlohmann::json& j, const CriterionResult& r) {
  j = {{"id", r.id}, {"name", r.name}, {"status", r.status}, {"detail", r.detail}};
}

void from_json(const nlohmann::json& j, CriterionResult& r) {
  r.id = j.at("id").get<int>();
  r.name = j.value("name", "");
  r.status = j.at("status").get<std::string>();
  r.detail = j.value("detail", "");
}

namespace {

nlohmann::json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("cannot open '" + p.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(p.filename().string() + ": " + e.what(), 1);
  }
}

}  // namespace

ReportBundle build_report(const std::filesystem::path& run_dir) {
  const auto reports = run_dir / "reports";
  std::vector<std::string> missing;
  for (const char* name : {"manifest.json", "reports/state.json"}) {
    if (!std::filesystem::exists(run_dir / name)) missing.emplace_back(name);
  }
  nlohmann::json state;
  if (missing.empty()) {
    state = read_json(reports / "state.json");
    for (const auto& it : state.at("iterations")) {
      const auto tag = std::to_string(it.at("iteration").get<int>());
      for (const auto& f : {"gate_" + tag + ".json", "trace_" + tag + ".csv", "metrics_" + tag + ".csv"}) {
        if (!std::filesystem::exists(reports / f)) missing.push_back("reports/" + f);
      }
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw Error("missing artifacts: " + list);
  }

  ReportBundle b;
  b.directory = reports / "bundle";
  std::filesystem::create_directories(b.directory);

  const auto traces_path = b.directory / "variance_traces.csv";
  {
    std::ofstream out(traces_path);
    out.precision(17);
    out << "label,role,iteration,episode,sigma2\n";
    for (const auto& it : state.at("iterations")) {
      const int k = it.at("iteration").get<int>();
      const auto gate = read_json(reports / ("gate_" + std::to_string(k) + ".json"));
      const auto id = gate.at("id_variances").get<std::vector<double>>();
      for (std::size_t e = 0; e < id.size(); ++e) out << "ID,nominal," << k << ',' << e << ',' << id[e] << '\n';
      const auto tp = gate.at("episode_means").get<std::vector<double>>();
      for (std::size_t e = 0; e < tp.size(); ++e) {
        out << "OOD,target_proxy," << k << ',' << e << ',' << tp[e] << '\n';
      }
    }
  }
  b.files.push_back(traces_path);

  const auto summary_path = b.directory / "summary.csv";
  {
    std::ofstream out(summary_path);
    out.precision(17);
    out << "iteration,sigma2_mean,tau,decision,target_return\n";
    for (const auto& it : state.at("iterations")) {
      out << it.at("iteration").get<int>() << ',' << it.at("sigma2_mean").get<double>() << ','
          << it.at("tau").get<double>() << ',' << it.at("decision").get<std::string>() << ',';
      if (!it.at("target_return").is_null()) out << it.at("target_return").get<double>();
      out << '\n';
    }
  }
  b.files.push_back(summary_path);

  b.acceptance = acceptance_criteria();
  const auto measured = run_dir / "acceptance_results.json";
  if (std::filesystem::exists(measured)) {
    for (const auto& r : read_json(measured).at("criteria")) {
      const auto c = r.get<CriterionResult>();
      if (c.id >= 1 && c.id <= static_cast<int>(b.acceptance.size())) {
        b.acceptance[static_cast<std::size_t>(c.id - 1)].status = c.status;
        b.acceptance[static_cast<std::size_t>(c.id - 1)].detail = c.detail;
      }
    }
  }
  // The firewall criterion is decidable from the run itself.
  auto& firewall = b.acceptance[9];
  const auto violations = state.at("audit").at("violations").get<long>();
  firewall.status = violations == 0 ? "pass" : "fail";
  firewall.detail = std::to_string(violations) + " training-path reads of the target proxy";

  const auto sheet_path = b.directory / "acceptance.json";
  {
    std::ofstream out(sheet_path);
    out << nlohmann::json({{"run", run_dir.filename().string()},
                           {"status", state.at("status")},
                           {"criteria", b.acceptance}})
               .dump(2)
        << '\n';
  }
  b.files.push_back(sheet_path);
  return b;
}

}  // namespace uarl
