#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "akhcfs/env.h"
#include "akhcfs/fusion.h"
#include "akhcfs/metrics.h"
#include "akhcfs/td3.h"
#include "akhcfs/traj_data.h"
#include "json.hpp"

namespace akhcfs {

enum class Algorithm { td3, hcfs, akhcfs };

const char* to_string(Algorithm algo);
Algorithm parse_algorithm(const std::string& name);
ControllerTag av_tag(Algorithm algo);

struct PathsConfig {
  std::string data;        // raw trajectory CSV for ingest
  std::string profiles;    // ingested profile JSON (train/test split applied on load)
  std::string output = "out";
  std::string checkpoint;  // empty: <output>/checkpoint.json
};

struct DataConfig {
  ExtractOptions extract;
  double train_fraction = 0.7;
  bool synthetic = false;
  int synthetic_train = 20;
  int synthetic_test = 10;
  SyntheticOptions synthetic_options;
};

struct TrainConfig {
  int episodes = 100;
  std::int64_t max_env_steps = 0;  // 0: no step budget
  int followers = 3;
  int warmup_steps = 1000;         // uniform random actions before the policy acts
  int checkpoint_every = 0;        // episodes; 0: only the final checkpoint
  std::string mix;                 // empty: a random non-empty AV set per episode
};

struct EvalConfig {
  int followers = 4;
  int max_events = 0;  // 0: every test event
  std::string mix;     // empty: every mix
  bool log_decisions = false;
};

struct RunConfig {
  PathsConfig paths;
  Algorithm algorithm = Algorithm::akhcfs;
  std::uint64_t seed = 0;
  int jobs = 1;
  EnvParams env;
  Td3Hyper td3;
  FusionConfig fusion;
  MetricsParams metrics;
  DataConfig data;
  TrainConfig train;
  EvalConfig evaluate;

  std::filesystem::path checkpoint_path() const;
};

// Copies dt and a_bound from the dynamics block into every dependent block.
void propagate_shared(RunConfig& config);

nlohmann::json config_to_json(const RunConfig& config);
// Overlays j on the defaults; unknown keys and type mismatches throw ConfigError.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
void validate(const RunConfig& config);

// JSON Schema (draft 2020-12) with every default and additionalProperties false.
nlohmann::json config_schema();
// One "key = default" line per leaf, dotted paths.
std::string describe_config_keys();

}  // namespace akhcfs
