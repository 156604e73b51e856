// Command-line runner for data collection, training, gating, curricula, tabular
// certificates and reports.
//
// Exit codes: 0 success, 1 usage or invalid config, 2 runtime error,
// 3 failed certificate or acceptance criterion.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "uarl/agent.hpp"
#include "uarl/audit.hpp"
#include "uarl/buffer.hpp"
#include "uarl/config.hpp"
#include "uarl/curriculum.hpp"
#include "uarl/data.hpp"
#include "uarl/error.hpp"
#include "uarl/gate.hpp"
#include "uarl/log.hpp"
#include "uarl/oracle.hpp"
#include "uarl/report.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kRuntime = 2;
constexpr int kFailed = 3;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string log_level;
  std::string which = "all";
  int checkpoint = 0;
  std::string check = "all";
  int trials = 100;
  std::uint64_t oracle_seed = 0;
  std::string out;
  std::string run;
};

uarl::ExperimentConfig load(const Options& o) {
  auto cfg = uarl::load_config(o.config);
  if (o.seed) uarl::apply_seed_override(cfg, *o.seed);
  return cfg;
}

std::filesystem::path datasets_dir(const uarl::ExperimentConfig& c) { return c.run_dir() / "datasets"; }
std::filesystem::path checkpoints_dir(const uarl::ExperimentConfig& c) { return c.run_dir() / "checkpoints"; }
std::filesystem::path reports_dir(const uarl::ExperimentConfig& c) { return c.run_dir() / "reports"; }

void prepare_dirs(const uarl::ExperimentConfig& c, const std::string& sub) {
  for (const auto& d : {datasets_dir(c), checkpoints_dir(c), reports_dir(c)}) {
    std::filesystem::create_directories(d);
  }
  uarl::write_manifest(c, sub, c.run_dir());
}

uarl::Dataset collect_target(const uarl::ExperimentConfig& c) {
  uarl::ParamRange r = uarl::ParamRange::around(c.data.target_params, c.schedule.param);
  return uarl::collect_rollouts(c.env, r, *uarl::scripted_behavior_policy(c.env),
                                c.data.target_episodes, c.seeds.target, uarl::Role::target_proxy);
}

uarl::ParamRange nominal_range(const uarl::ExperimentConfig& c) {
  return uarl::ParamRange::around(c.env.nominal_params, c.schedule.param);
}

int cmd_collect(const Options& o) {
  const auto c = load(o);
  prepare_dirs(c, "collect");
  const auto behavior = uarl::scripted_behavior_policy(c.env);
  const auto e0 = nominal_range(c);
  auto save = [&](const uarl::Dataset& d, const std::string& name) {
    uarl::save_dataset(d, datasets_dir(c) / (name + ".jsonl"));
    uarl::export_returns_csv(d, reports_dir(c) / (name + "_returns.csv"));
    std::cout << name << ": " << d.episodes().size() << " episodes, " << d.size() << " transitions\n";
  };
  if (o.which == "all" || o.which == "nominal") {
    save(uarl::collect_rollouts(c.env, e0, *behavior, c.data.nominal_episodes, c.seeds.data,
                                uarl::Role::nominal),
         "nominal");
  }
  if (o.which == "all" || o.which == "repulsive") {
    save(uarl::collect_rollouts(c.env, uarl::expand_range(e0, c.schedule, 0), *behavior,
                                c.data.repulsive_episodes, uarl::derive_seed(c.seeds.data, 1),
                                uarl::Role::repulsive),
         "repulsive");
  }
  if (o.which == "all" || o.which == "target") save(collect_target(c), "target_proxy");
  return kOk;
}

int cmd_train(const Options& o) {
  const auto c = load(o);
  prepare_dirs(c, "train");
  const auto nominal = uarl::load_dataset(datasets_dir(c) / "nominal.jsonl");
  const auto repulsive = uarl::load_dataset(datasets_dir(c) / "repulsive.jsonl");
  const auto result = uarl::train_offline(nominal, repulsive, c.env, c.train);
  uarl::save_actor(*result.actor, checkpoints_dir(c) / "actor_0.json");
  uarl::save_ensemble(result.ensemble, checkpoints_dir(c) / "critics_0.json");
  uarl::write_metrics_csv(result.metrics, reports_dir(c) / "metrics_train.csv");
  std::cout << "trained " << c.train.steps << " steps, " << result.actor_updates << " actor updates\n";
  return kOk;
}

int cmd_finetune(const Options& o) {
  const auto c = load(o);
  prepare_dirs(c, "finetune");
  const int k = o.checkpoint;
  const auto tag = std::to_string(k);
  const auto actor = std::make_shared<uarl::Actor>(uarl::load_actor(checkpoints_dir(c) / ("actor_" + tag + ".json")));
  const auto critics = uarl::load_ensemble(checkpoints_dir(c) / ("critics_" + tag + ".json"));
  std::vector<uarl::Dataset> pool = {uarl::load_dataset(datasets_dir(c) / "nominal.jsonl"),
                                     uarl::load_dataset(datasets_dir(c) / "repulsive.jsonl").retagged(uarl::Role::nominal)};
  for (int i = 1; i <= k; ++i) {
    pool.push_back(uarl::load_dataset(datasets_dir(c) / ("repulsive_" + std::to_string(i) + ".jsonl"))
                       .retagged(uarl::Role::nominal));
  }
  uarl::ParamRange inner = nominal_range(c);
  for (int s = 0; s <= k; ++s) inner = uarl::expand_range(inner, c.schedule, s);
  const uarl::ParamRange range = uarl::expand_range(inner, c.schedule, k + 1);
  const double sigma = c.train.exploratory_rollouts ? c.train.exploration_sigma : 0.0;
  const uarl::ActorRolloutPolicy rollout(actor, sigma, "policy_" + tag);
  const auto fresh = uarl::collect_repulsive(c.env, inner, range, rollout, c.data.repulsive_episodes,
                                             uarl::derive_seed(c.seeds.data, static_cast<std::uint64_t>(k + 2)));
  uarl::save_dataset(fresh, datasets_dir(c) / ("repulsive_" + std::to_string(k + 1) + ".jsonl"));
  const auto buffer = uarl::merge_balanced(pool, critics);
  buffer.write_csv(reports_dir(c) / ("buffer_" + std::to_string(k + 1) + ".csv"));
  auto cfg = c.train;
  if (c.curriculum.finetune_steps >= 0) cfg.steps = c.curriculum.finetune_steps;
  cfg.seed = uarl::derive_seed(c.train.seed, uarl::stream::kCurriculum, static_cast<std::uint64_t>(k + 1));
  const auto result = uarl::finetune(*actor, critics, buffer, fresh, c.env, cfg);
  const auto next = std::to_string(k + 1);
  uarl::save_actor(*result.actor, checkpoints_dir(c) / ("actor_" + next + ".json"));
  uarl::save_ensemble(result.ensemble, checkpoints_dir(c) / ("critics_" + next + ".json"));
  uarl::write_metrics_csv(result.metrics, reports_dir(c) / ("metrics_finetune_" + next + ".csv"));
  std::cout << "fine-tuned checkpoint " << k << " -> " << k + 1 << " on " << buffer.size()
            << " buffered transitions\n";
  return kOk;
}

int cmd_gate(const Options& o) {
  const auto c = load(o);
  prepare_dirs(c, "gate");
  const auto tag = std::to_string(o.checkpoint);
  const auto critics = uarl::load_ensemble(checkpoints_dir(c) / ("critics_" + tag + ".json"));
  const auto target_path = datasets_dir(c) / "target_proxy.jsonl";
  const auto target = std::filesystem::exists(target_path) ? uarl::load_dataset(target_path) : collect_target(c);
  uarl::ParamRange id_range = nominal_range(c);
  for (int s = 0; s < o.checkpoint; ++s) id_range = uarl::expand_range(id_range, c.schedule, s);
  const auto id = uarl::collect_rollouts(c.env, id_range, *uarl::scripted_behavior_policy(c.env),
                                         c.gate.id_episodes,
                                         uarl::derive_seed(c.seeds.curriculum, uarl::stream::kIdRollouts,
                                                           static_cast<std::uint64_t>(o.checkpoint)),
                                         uarl::Role::nominal);
  const auto report = uarl::gate_decision(critics, target, c.gate, uarl::episode_mean_variances(critics, id));
  std::ofstream(reports_dir(c) / ("gate_checkpoint_" + tag + ".json")) << nlohmann::json(report).dump(2) << '\n';
  uarl::write_trace_csv(report, reports_dir(c) / ("trace_checkpoint_" + tag + ".csv"));
  std::cout << "sigma2_mean " << report.sigma2_mean << " tau " << report.tau << " -> "
            << uarl::to_string(report.decision) << '\n';
  return kOk;
}

int cmd_curriculum(const Options& o) {
  const auto c = load(o);
  std::filesystem::create_directories(c.run_dir());
  uarl::write_manifest(c, "curriculum", c.run_dir());
  uarl::AccessAudit audit;
  const auto state = uarl::run_curriculum(c.env, c.schedule, collect_target(c), c.gate, c.train,
                                          c.curriculum_config(), &audit);
  for (const auto& row : uarl::iteration_summary(state)) {
    std::cout << "iteration " << row.iteration << ": sigma2 " << row.sigma2_mean << " tau " << row.tau
              << " " << uarl::to_string(row.decision) << " return@target " << row.target_return << '\n';
  }
  std::cout << "status " << uarl::to_string(state.status);
  if (!state.diagnostic.empty()) std::cout << " (" << state.diagnostic << ")";
  std::cout << "\naudit: " << audit.reads() << " target reads, " << audit.violations() << " violations\n";
  return audit.violations() == 0 ? kOk : kFailed;
}

int cmd_oracle(const Options& o) {
  std::vector<std::string> checks;
  if (o.check == "all") {
    checks.assign(uarl::kCertificateChecks.begin(), uarl::kCertificateChecks.end());
  } else {
    checks.push_back(o.check);
  }
  nlohmann::json all = nlohmann::json::array();
  bool ok = true;
  for (const auto& name : checks) {
    const auto trials = name == "bias_reduction" ? std::min(o.trials, 50) : o.trials;
    const auto certs = uarl::run_certificate_sweep(name, trials, o.oracle_seed);
    int failed = 0;
    int skipped = 0;
    for (const auto& cert : certs) {
      all.push_back(cert);
      failed += cert.holds ? 0 : 1;
      skipped += cert.skipped ? 1 : 0;
    }
    ok = ok && failed == 0;
    std::cout << name << ": " << certs.size() << " certificates, " << failed << " counterexamples";
    if (skipped > 0) std::cout << ", " << skipped << " skipped";
    std::cout << '\n';
  }
  if (!o.out.empty()) {
    std::ofstream out(o.out);
    if (!out) throw uarl::Error("cannot open '" + o.out + "' for writing");
    out << all.dump(2) << '\n';
  }
  return ok ? kOk : kFailed;
}

int cmd_report(const Options& o) {
  std::filesystem::path run = o.run;
  if (run.empty()) run = load(o).run_dir();
  const auto bundle = uarl::build_report(run);
  bool failed = false;
  for (const auto& c : bundle.acceptance) {
    std::cout << c.id << ' ' << c.name << ": " << c.status;
    if (!c.detail.empty()) std::cout << " (" << c.detail << ")";
    std::cout << '\n';
    failed = failed || c.status == "fail";
  }
  for (const auto& f : bundle.files) std::cout << "wrote " << f.string() << '\n';
  return failed ? kFailed : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"uncertainty-aware domain randomization runner"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Override every seed in the config");
  app.add_option("--log-level", o.log_level, "debug|info|warn|error|off");

  auto with_config = [&](CLI::App* sub, bool required = true) {
    auto* opt = sub->add_option("-c,--config", o.config, "Experiment config (JSON)");
    if (required) opt->required()->check(CLI::ExistingFile);
    return sub;
  };
  auto* collect = with_config(app.add_subcommand("collect", "Collect nominal, repulsive and target-proxy datasets"));
  collect->add_option("--which", o.which, "all|nominal|repulsive|target")
      ->check(CLI::IsMember({"all", "nominal", "repulsive", "target"}));
  with_config(app.add_subcommand("train", "Offline training on the collected datasets"));
  auto* finetune = with_config(app.add_subcommand("finetune", "One balanced fine-tuning round from a checkpoint"));
  finetune->add_option("--checkpoint", o.checkpoint, "Checkpoint index to start from")->check(CLI::NonNegativeNumber);
  auto* gate = with_config(app.add_subcommand("gate", "Deployment decision for a checkpoint"));
  gate->add_option("--checkpoint", o.checkpoint, "Checkpoint index")->check(CLI::NonNegativeNumber);
  with_config(app.add_subcommand("curriculum", "Full randomization curriculum with gating"));
  auto* oracle = app.add_subcommand("oracle", "Tabular certificates");
  std::vector<std::string> checks = {"all"};
  for (auto c : uarl::kCertificateChecks) checks.emplace_back(c);
  oracle->add_option("--check", o.check, "Which check to run")->check(CLI::IsMember(checks));
  oracle->add_option("--trials", o.trials, "Randomized instances per check")->check(CLI::PositiveNumber);
  oracle->add_option("--oracle-seed", o.oracle_seed, "Seed of the randomized instances");
  oracle->add_option("--out", o.out, "Write certificates as JSON to this file");
  auto* report = with_config(app.add_subcommand("report", "Summary bundle for a run directory"), false);
  report->add_option("--run", o.run, "Run directory (defaults to the config's)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  if (*seed_opt) o.seed = seed;
  if (!o.log_level.empty()) {
    const std::map<std::string, uarl::LogLevel> levels = {
        {"debug", uarl::LogLevel::debug}, {"info", uarl::LogLevel::info}, {"warn", uarl::LogLevel::warn},
        {"error", uarl::LogLevel::error}, {"off", uarl::LogLevel::off}};
    const auto it = levels.find(o.log_level);
    if (it == levels.end()) {
      std::cerr << "unknown log level '" << o.log_level << "'\n";
      return kUsage;
    }
    uarl::set_log_level(it->second);
  }
  const auto* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  if (name == "report" && o.config.empty() && o.run.empty()) {
    std::cerr << "report: pass --run or --config\n";
    return kUsage;
  }
  try {
    if (name == "collect") return cmd_collect(o);
    if (name == "train") return cmd_train(o);
    if (name == "finetune") return cmd_finetune(o);
    if (name == "gate") return cmd_gate(o);
    if (name == "curriculum") return cmd_curriculum(o);
    if (name == "oracle") return cmd_oracle(o);
    if (name == "report") return cmd_report(o);
  } catch (const uarl::ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << name << ": " << e.what() << '\n';
    return kRuntime;
  }
  std::cerr << "unknown subcommand '" << name << "'\n";
  return kUsage;
}
