#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace akhcfs {

struct MetricsParams {
  double ttc_band_s = 2.7;
  double ttc_bin_width_s = 0.3;
  double jerk_threshold = 2.0;
  double speed_bin_width_mps = 1.0;
  bool write_svg = true;

  bool operator==(const MetricsParams&) const = default;
};

std::vector<std::optional<double>> per_step_ttc(std::span<const double> x_error,
                                                std::span<const double> v_error);

// Mean over finite entries in (0, band_s]; none when no entry qualifies.
std::optional<double> mean_ttc_in_band(std::span<const std::optional<double>> ttc,
                                       double band_s = 2.7);

// Mean |(a_k - a_{k-1}) / dt|; throws std::invalid_argument below two samples.
double mean_abs_jerk(std::span<const double> accel, double dt);

// Linear interpolation between closest ranks: h = (n - 1) p.
double quantile(std::span<const double> values, double p);

struct QuartileSummary {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  std::size_t count = 0;

  bool operator==(const QuartileSummary&) const = default;
};

// Throws std::invalid_argument on an empty sample.
QuartileSummary summarize(std::span<const double> values);

// Every non-empty A/H assignment for n followers, in bitmask order (bit i set => follower i is AV).
std::vector<std::string> enumerate_mixes(std::size_t n);

// Per-step series of one follower over an episode.
struct FollowerSeries {
  bool is_av = false;
  bool collided = false;
  std::vector<double> accel;
  std::vector<double> speed;
  std::vector<double> x_error;
  std::vector<double> v_error;
};

struct FollowerMetrics {
  bool is_av = false;
  bool collided = false;
  std::optional<double> mean_ttc_in_band;
  double mean_abs_jerk = 0.0;
  double mean_speed = 0.0;

  bool operator==(const FollowerMetrics&) const = default;
};

FollowerMetrics follower_metrics(const FollowerSeries& series, double dt,
                                 const MetricsParams& params = {});

struct EventMetrics {
  std::string algorithm;
  std::string event_id;
  std::string mix;
  double leader_mean_speed = 0.0;
  std::size_t steps = 0;
  bool collided = false;
  std::vector<FollowerMetrics> followers;

  bool operator==(const EventMetrics&) const = default;
};

struct SpeedBin {
  double lo_mps = 0.0;
  std::size_t followers = 0;
  std::size_t collided = 0;
  std::optional<double> mean_ttc;
  double mean_abs_jerk = 0.0;
  double mean_speed = 0.0;

  bool operator==(const SpeedBin&) const = default;
};

// Distributions are over AV follower instances; collisions count episodes.
struct AlgorithmSummary {
  std::string algorithm;
  std::size_t episodes = 0;
  std::size_t steps = 0;
  std::size_t collisions = 0;
  std::size_t collided_followers = 0;
  std::size_t av_followers = 0;
  std::size_t ttc_in_band_followers = 0;
  std::vector<std::size_t> ttc_histogram;
  std::optional<QuartileSummary> ttc;
  std::optional<QuartileSummary> jerk;
  std::optional<QuartileSummary> speed;
  std::size_t jerk_violations = 0;
  double max_mean_abs_jerk = 0.0;
  std::vector<SpeedBin> speed_bins;

  bool operator==(const AlgorithmSummary&) const = default;
};

struct AggregateReport {
  MetricsParams params;
  std::vector<AlgorithmSummary> algorithms;  // sorted by name

  const AlgorithmSummary* find(const std::string& algorithm) const;
  bool operator==(const AggregateReport&) const = default;
};

std::size_t ttc_bin_count(const MetricsParams& params);

AggregateReport aggregate(std::span<const EventMetrics> events, const MetricsParams& params = {});

nlohmann::json report_to_json(const AggregateReport& report);
AggregateReport report_from_json(const nlohmann::json& j);

// Shortest round-trip text for a double.
std::string format_double(double value);

// report.json, tables.csv, fig_ttc_histogram.csv, fig_speed_bins.csv, fig_collisions.csv,
// and optionally ttc_histogram.svg / jerk_boxplot.svg.
void emit_report(const AggregateReport& report, const std::filesystem::path& out_dir);
AggregateReport read_report(const std::filesystem::path& report_json);

void write_events_csv(std::span<const EventMetrics> events, const std::filesystem::path& path);

}  // namespace akhcfs
