#include "uarl/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>

#include "uarl/error.hpp"

namespace uarl {

namespace {

void reject_unknown(const nlohmann::json& j, const std::string& path,
                    const std::set<std::string>& known) {
  if (!j.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError(path.empty() ? key : path + "." + key, "unknown field");
  }
}

template <typename T>
void read(const nlohmann::json& j, const std::string& path, const char* key, T& field) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(field);
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(path + "." + key, "wrong type");
  }
}

/// Runs `parse`, re-raising library errors with the section path.
template <typename F>
void section(const std::string& path, F parse) {
  try {
    parse();
  } catch (const ConfigError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path, e.what());
  } catch (const InvalidArgument& e) {
    std::string msg = e.what();
    const std::string prefix = path + ".";
    if (msg.rfind(prefix, 0) == 0) {
      const auto colon = msg.find(':');
      throw ConfigError(msg.substr(0, colon), msg.substr(colon + 2));
    }
    throw ConfigError(path, msg);
  }
}

std::uint64_t fnv(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::filesystem::path ExperimentConfig::run_dir() const {
  const char* env_root = std::getenv("UARL_RUNS_DIR");
  const std::filesystem::path root = env_root != nullptr && *env_root != '\0' ? env_root : output_root;
  return root / name;
}

CurriculumConfig ExperimentConfig::curriculum_config() const {
  CurriculumConfig c;
  c.nominal_episodes = data.nominal_episodes;
  c.repulsive_episodes = data.repulsive_episodes;
  c.finetune_steps = curriculum.finetune_steps;
  c.max_iters = curriculum.max_iters;
  c.stop_on_deploy = curriculum.stop_on_deploy;
  c.seed = seeds.curriculum;
  c.report_params = data.target_params;
  c.report_episodes = curriculum.report_episodes;
  c.run_dir = run_dir();
  return c;
}

ExperimentConfig parse_config(const nlohmann::json& j) {
  reject_unknown(j, "", {"name", "env", "schedule", "train", "gate", "data", "seeds", "curriculum",
                         "output"});
  ExperimentConfig c;
  read(j, "", "name", c.name);
  if (c.name.empty() || c.name.find('/') != std::string::npos) {
    throw ConfigError("name", "must be a non-empty directory name");
  }
  for (const char* required : {"env", "schedule"}) {
    if (!j.contains(required)) throw ConfigError(required, "missing required section");
  }
  section("env", [&] {
    reject_unknown(j.at("env"), "env",
                   {"family", "horizon", "nominal_params", "grid_width", "grid_height"});
    c.env = j.at("env").get<EnvSpec>();
    c.env.validate();
  });
  section("schedule", [&] {
    reject_unknown(j.at("schedule"), "schedule", {"param", "stages"});
    c.schedule = j.at("schedule").get<Schedule>();
    c.schedule.validate();
    if (c.schedule.stages.empty()) throw ConfigError("schedule.stages", "must not be empty");
  });
  if (j.contains("train")) {
    section("train", [&] {
      c.train = j.at("train").get<TrainConfig>();
      c.train.validate();
    });
  }
  if (j.contains("gate")) {
    section("gate", [&] {
      c.gate = j.at("gate").get<GateConfig>();
      c.gate.validate();
    });
  }
  if (j.contains("data")) {
    const auto& d = j.at("data");
    reject_unknown(d, "data", {"nominal_episodes", "repulsive_episodes", "target_episodes",
                               "target_params"});
    read(d, "data", "nominal_episodes", c.data.nominal_episodes);
    read(d, "data", "repulsive_episodes", c.data.repulsive_episodes);
    read(d, "data", "target_episodes", c.data.target_episodes);
    section("data.target_params", [&] {
      c.data.target_params = d.contains("target_params") ? d.at("target_params").get<DomainParams>()
                                                         : c.env.nominal_params;
      c.data.target_params.validate();
    });
    for (auto [key, v] : {std::pair{"nominal_episodes", c.data.nominal_episodes},
                          std::pair{"repulsive_episodes", c.data.repulsive_episodes},
                          std::pair{"target_episodes", c.data.target_episodes}}) {
      if (v < 1) throw ConfigError(std::string("data.") + key, "must be >= 1");
    }
  } else {
    c.data.target_params = c.env.nominal_params;
  }
  if (j.contains("seeds")) {
    const auto& s = j.at("seeds");
    reject_unknown(s, "seeds", {"data", "train", "target", "curriculum"});
    read(s, "seeds", "data", c.seeds.data);
    read(s, "seeds", "train", c.seeds.train);
    read(s, "seeds", "target", c.seeds.target);
    read(s, "seeds", "curriculum", c.seeds.curriculum);
  }
  c.train.seed = c.seeds.train;
  if (j.contains("curriculum")) {
    const auto& cu = j.at("curriculum");
    reject_unknown(cu, "curriculum", {"finetune_steps", "max_iters", "stop_on_deploy", "report_episodes"});
    read(cu, "curriculum", "finetune_steps", c.curriculum.finetune_steps);
    read(cu, "curriculum", "max_iters", c.curriculum.max_iters);
    read(cu, "curriculum", "stop_on_deploy", c.curriculum.stop_on_deploy);
    read(cu, "curriculum", "report_episodes", c.curriculum.report_episodes);
    if (c.curriculum.report_episodes < 1) throw ConfigError("curriculum.report_episodes", "must be >= 1");
  }
  if (j.contains("output")) {
    const auto& o = j.at("output");
    reject_unknown(o, "output", {"root"});
    std::string root = c.output_root.string();
    read(o, "output", "root", root);
    c.output_root = root;
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("<file>", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

nlohmann::json to_json(const ExperimentConfig& c) {
  return {{"name", c.name},
          {"env", c.env},
          {"schedule", c.schedule},
          {"train", c.train},
          {"gate", c.gate},
          {"data",
           {{"nominal_episodes", c.data.nominal_episodes},
            {"repulsive_episodes", c.data.repulsive_episodes},
            {"target_episodes", c.data.target_episodes},
            {"target_params", c.data.target_params}}},
          {"seeds",
           {{"data", c.seeds.data},
            {"train", c.seeds.train},
            {"target", c.seeds.target},
            {"curriculum", c.seeds.curriculum}}},
          {"curriculum",
           {{"finetune_steps", c.curriculum.finetune_steps},
            {"max_iters", c.curriculum.max_iters},
            {"stop_on_deploy", c.curriculum.stop_on_deploy},
            {"report_episodes", c.curriculum.report_episodes}}},
          {"output", {{"root", c.output_root.string()}}}};
}

void apply_seed_override(ExperimentConfig& c, std::uint64_t seed) {
  c.seeds.data = derive_seed(seed, stream::kEpisodes);
  c.seeds.train = derive_seed(seed, stream::kInit);
  c.seeds.target = derive_seed(seed, stream::kEval);
  c.seeds.curriculum = derive_seed(seed, stream::kCurriculum);
  c.train.seed = c.seeds.train;
}

std::string config_digest(const ExperimentConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv(to_json(c).dump())));
  return buf;
}

void write_manifest(const ExperimentConfig& c, const std::string& subcommand,
                    const std::filesystem::path& run_dir) {
  std::filesystem::create_directories(run_dir);
  const nlohmann::json m = {{"config_digest", config_digest(c)},
                            {"version", kVersion},
                            {"subcommand", subcommand},
                            {"seeds", to_json(c).at("seeds")},
                            {"config", to_json(c)}};
  std::ofstream out(run_dir / "manifest.json");
  if (!out) throw Error("cannot write manifest in '" + run_dir.string() + "'");
  out << m.dump(2) << '\n';
}

}  // namespace uarl
