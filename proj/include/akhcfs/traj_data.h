#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace akhcfs {

// One row of an NGSIM-like trajectory file.
struct TrajectoryRecord {
  int vehicle_id = 0;
  int frame = 0;
  double time_s = 0.0;
  double position_m = 0.0;
  double speed_mps = 0.0;
  int lane = 0;
  double length_m = 0.0;
};

// Leader speed/position trace of one car-following event, sampled every dt_s.
struct LeaderProfile {
  std::string event_id;
  double dt_s = 0.1;
  double t0_s = 0.0;
  std::vector<double> positions_m;
  std::vector<double> speeds_mps;
  int lane = 0;
  double length_m = 5.0;

  std::size_t sample_count() const { return speeds_mps.size(); }
  // Number of simulation steps the profile can drive (samples - 1).
  std::size_t steps() const { return speeds_mps.empty() ? 0 : speeds_mps.size() - 1; }
  double duration_s() const { return static_cast<double>(steps()) * dt_s; }
  double mean_speed() const;
};

inline constexpr const char* kTrajectoryCsvHeader =
    "vehicle_id,frame,time_s,position_m,speed_mps,lane,length_m";

// Throws DataError on a missing file, header mismatch, malformed row (with its
// row number) or a time that does not strictly increase for a vehicle id.
std::vector<TrajectoryRecord> parse_trajectory_csv(const std::filesystem::path& path);
std::vector<TrajectoryRecord> parse_trajectory_csv(std::istream& in);

struct ExtractOptions {
  std::set<int> lanes{1, 2, 3, 4};
  double min_duration_s = 20.0;
  double dt_s = 0.1;
  bool smoothing = false;
  int smoothing_window = 5;
};

// Groups records per vehicle, keeps lane-stable trajectories in the allowed
// lanes that last at least min_duration_s, and resamples them to a dt grid by
// linear interpolation. Event ids are "v<vehicle_id>".
std::vector<LeaderProfile> extract_follow_events(std::span<const TrajectoryRecord> records,
                                                 const ExtractOptions& options);

// Inverse view used to re-filter extracted events (frame = sample index).
std::vector<TrajectoryRecord> profiles_to_records(std::span<const LeaderProfile> profiles);

// Symmetric moving average; the window shrinks near the ends.
std::vector<double> moving_average(std::span<const double> values, int window);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Seeded uniform random partition; train size is round(fraction * n) kept in [1, n-1].
SplitIndices split_indices(std::size_t count, double train_fraction, std::uint64_t seed);

struct TrainTestSplit {
  std::vector<LeaderProfile> train;
  std::vector<LeaderProfile> test;
};

TrainTestSplit split_train_test(const std::vector<LeaderProfile>& events, double train_fraction,
                                std::uint64_t seed);

enum class SyntheticKind { constant, sinusoidal, emergency_brake, stop_and_go };

const char* to_string(SyntheticKind kind);

struct SyntheticOptions {
  double duration_s = 30.0;
  double dt_s = 0.1;
  double min_speed_mps = 5.0;
  double max_speed_mps = 16.0;
  // Hard braking stays within the follower actuator bound.
  double max_brake_mps2 = 2.5;
};

LeaderProfile make_synthetic_profile(SyntheticKind kind, const SyntheticOptions& options,
                                     std::uint64_t seed, std::string event_id);

// Cycles through all kinds with seeded random parameters; ids "<prefix><k>".
std::vector<LeaderProfile> make_synthetic_set(std::size_t count, const SyntheticOptions& options,
                                              std::uint64_t seed, const std::string& prefix);

nlohmann::json profile_to_json(const LeaderProfile& profile);
LeaderProfile profile_from_json(const nlohmann::json& j);

void save_profiles(const std::filesystem::path& path, std::span<const LeaderProfile> profiles);
std::vector<LeaderProfile> load_profiles(const std::filesystem::path& path);

}  // namespace akhcfs
