#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "akhcfs/config.h"
#include "akhcfs/metrics.h"
#include "akhcfs/td3.h"

namespace akhcfs {

// splitmix64 chain over the inputs; stable across platforms and job counts.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

// "HAAA" -> {hv_idm, av, av, av} with the AV tag of the given algorithm.
std::vector<ControllerTag> parse_mix(const std::string& mix, Algorithm algo);

struct DataSets {
  std::vector<LeaderProfile> train;
  std::vector<LeaderProfile> test;
};

// Synthetic profiles when data.synthetic is set; otherwise profiles from
// paths.profiles (or extracted from paths.data) split by train_fraction.
DataSets load_datasets(const RunConfig& config);

Policy actor_policy(const Td3Agent& agent, const RewardParams& reward);

struct EpisodeLogs {
  std::ostream* trajectory = nullptr;
  std::ostream* rewards = nullptr;
  std::ostream* decisions = nullptr;
};

// Runs one full episode with every AV driven by the chosen algorithm around the
// given deterministic actor.
EventMetrics run_episode(const RunConfig& config, Algorithm algo, const Policy& policy,
                         std::shared_ptr<const LeaderProfile> leader, const std::string& mix,
                         std::uint64_t seed, EpisodeLogs logs = {});

struct TrainSummary {
  std::int64_t episodes = 0;
  std::int64_t env_steps = 0;
  std::int64_t updates = 0;
  std::int64_t collisions = 0;
};

// Trains a fresh agent; writes the checkpoint and <output>/training_log.csv.
TrainSummary cmd_train(const RunConfig& config, Td3Agent* trained = nullptr);

// Loads the configured checkpoint, rejecting shape mismatches against the config.
Td3Agent load_checkpoint(const RunConfig& config);

// Every (test event, mix) episode, in a fixed order regardless of jobs.
std::vector<EventMetrics> evaluate_events(const RunConfig& config, Algorithm algo,
                                          const Td3Agent& agent,
                                          const std::vector<LeaderProfile>& events);

// Evaluates config.algorithm; writes report files and events.csv to <output>.
AggregateReport cmd_evaluate(const RunConfig& config);

// Logs for one episode: trajectory.csv, rewards.csv, decisions.jsonl, summary.json.
EventMetrics cmd_replay(const RunConfig& config, const std::string& event_id,
                        const std::string& mix);

// Parses paths.data and writes <output>/profiles.json plus split.json.
std::size_t cmd_ingest(const RunConfig& config);

// Re-aggregates one or more events.csv files into a report in <output>.
AggregateReport cmd_report(const RunConfig& config,
                           const std::vector<std::filesystem::path>& events_csv);

std::vector<EventMetrics> read_events_csv(const std::filesystem::path& path);

}  // namespace akhcfs
