#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "akhcfs/metrics.h"

namespace akhcfs {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TEST(PerStepTtc, Examples) {
  const std::vector<double> x(4, 20.0);
  const auto opening = per_step_ttc(x, std::vector<double>(4, 1.0));
  for (const auto& t : opening) EXPECT_FALSE(t.has_value());
  const auto closing = per_step_ttc(x, std::vector<double>(4, -5.0));
  for (const auto& t : closing) EXPECT_DOUBLE_EQ(*t, 4.0);
  const auto mixed = per_step_ttc(x, std::vector<double>{-1.0, 0.0, 2.0, -4.0});
  EXPECT_TRUE(mixed[0].has_value());
  EXPECT_FALSE(mixed[1].has_value());
  EXPECT_FALSE(mixed[2].has_value());
  EXPECT_TRUE(mixed[3].has_value());
  EXPECT_THROW(per_step_ttc(x, std::vector<double>(3, 1.0)), std::invalid_argument);
}

TEST(MeanTtcInBand, Examples) {
  const std::vector<std::optional<double>> none{std::nullopt, 5.0, 3.0};
  EXPECT_FALSE(mean_ttc_in_band(none).has_value());
  const std::vector<std::optional<double>> some{0.5, 2.5, 9.0};
  EXPECT_DOUBLE_EQ(*mean_ttc_in_band(some), 1.5);
  const std::vector<std::optional<double>> edge{2.7, 2.7};
  EXPECT_DOUBLE_EQ(*mean_ttc_in_band(edge), 2.7);
  const std::vector<std::optional<double>> zero{0.0};
  EXPECT_FALSE(mean_ttc_in_band(zero).has_value());
}

TEST(MeanAbsJerk, Examples) {
  EXPECT_EQ(mean_abs_jerk(std::vector<double>(10, 1.7), 0.1), 0.0);
  std::vector<double> alt, ramp;
  for (int k = 0; k < 20; ++k) {
    alt.push_back(k % 2 == 0 ? 1.0 : -1.0);
    ramp.push_back(0.1 * k);
  }
  EXPECT_NEAR(mean_abs_jerk(alt, 0.1), 20.0, 1e-12);
  EXPECT_NEAR(mean_abs_jerk(ramp, 0.1), 1.0, 1e-12);
  EXPECT_THROW(mean_abs_jerk(std::vector<double>{1.0}, 0.1), std::invalid_argument);
}

TEST(Quantile, FiveValues) {
  const auto s = summarize(std::vector<double>{5, 1, 4, 2, 3});
  EXPECT_EQ(s.min, 1.0);
  EXPECT_EQ(s.q1, 2.0);
  EXPECT_EQ(s.median, 3.0);
  EXPECT_EQ(s.q3, 4.0);
  EXPECT_EQ(s.max, 5.0);
  EXPECT_EQ(s.count, 5u);
  EXPECT_THROW(summarize(std::vector<double>{}), std::invalid_argument);
}

double brute_quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = static_cast<std::size_t>(std::ceil(h));
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

TEST(Quantile, MatchesSortOracle) {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g(3.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(1 + trial % 37);
    for (auto& x : v) x = g(rng);
    for (double p : {0.0, 0.25, 0.5, 0.75, 1.0, 0.1}) {
      EXPECT_NEAR(quantile(v, p), brute_quantile(v, p), 1e-12);
    }
    const auto s = summarize(v);
    EXPECT_LE(s.min, s.q1);
    EXPECT_LE(s.q1, s.median);
    EXPECT_LE(s.median, s.q3);
    EXPECT_LE(s.q3, s.max);
  }
}

TEST(Mixes, Enumeration) {
  for (std::size_t n = 1; n <= 6; ++n) {
    const auto mixes = enumerate_mixes(n);
    EXPECT_EQ(mixes.size(), (1u << n) - 1);
    std::set<std::string> unique(mixes.begin(), mixes.end());
    EXPECT_EQ(unique.size(), mixes.size());
    for (const auto& m : mixes) {
      EXPECT_EQ(m.size(), n);
      EXPECT_NE(m.find('A'), std::string::npos);
    }
  }
  EXPECT_EQ(enumerate_mixes(4).size(), 15u);
  EXPECT_EQ(456u * enumerate_mixes(4).size(), 6840u);
  EXPECT_EQ(enumerate_mixes(2), (std::vector<std::string>{"AH", "HA", "AA"}));
}

EventMetrics make_event(const std::string& algo, const std::string& id, bool collided,
                        double leader_speed, std::vector<FollowerMetrics> followers) {
  EventMetrics e;
  e.algorithm = algo;
  e.event_id = id;
  e.mix = std::string(followers.size(), 'A');
  e.leader_mean_speed = leader_speed;
  e.steps = 100;
  e.collided = collided;
  e.followers = std::move(followers);
  return e;
}

std::vector<EventMetrics> sample_events() {
  std::vector<EventMetrics> events;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 40; ++i) {
    std::vector<FollowerMetrics> fs;
    for (int k = 0; k < 3; ++k) {
      FollowerMetrics f;
      f.is_av = k != 1;
      if (u(rng) < 0.6) f.mean_ttc_in_band = 0.05 + 2.65 * u(rng);
      f.mean_abs_jerk = 3.0 * u(rng);
      f.mean_speed = 5.0 + 10.0 * u(rng);
      fs.push_back(f);
    }
    events.push_back(make_event(i % 2 ? "td3" : "akhcfs", "e" + std::to_string(i), i % 7 == 0,
                                5.0 + 10.0 * u(rng), fs));
  }
  return events;
}

TEST(Aggregate, SingleCleanEvent) {
  FollowerMetrics f;
  f.is_av = true;
  f.mean_speed = 10.0;
  const std::vector<EventMetrics> one{make_event("td3", "e", false, 10.0, {f})};
  const auto r = aggregate(one);
  ASSERT_EQ(r.algorithms.size(), 1u);
  EXPECT_EQ(r.algorithms[0].collisions, 0u);
  EXPECT_EQ(r.algorithms[0].episodes, 1u);
}

TEST(Aggregate, HistogramAndCounts) {
  const auto events = sample_events();
  const auto r = aggregate(events);
  ASSERT_EQ(r.algorithms.size(), 2u);
  EXPECT_EQ(r.algorithms[0].algorithm, "akhcfs");
  EXPECT_EQ(ttc_bin_count(MetricsParams{}), 9u);
  for (const auto& a : r.algorithms) {
    std::size_t in_band = 0, avs = 0, collisions = 0, violations = 0;
    for (const auto& e : events) {
      if (e.algorithm != a.algorithm) continue;
      collisions += e.collided ? 1 : 0;
      for (const auto& f : e.followers) {
        if (!f.is_av) continue;
        ++avs;
        in_band += f.mean_ttc_in_band ? 1 : 0;
        violations += f.mean_abs_jerk > 2.0 ? 1 : 0;
      }
    }
    std::size_t hist = 0;
    for (auto c : a.ttc_histogram) hist += c;
    EXPECT_EQ(hist, in_band);
    EXPECT_EQ(a.ttc_in_band_followers, in_band);
    EXPECT_EQ(a.av_followers, avs);
    EXPECT_EQ(a.collisions, collisions);
    EXPECT_EQ(a.jerk_violations, violations);
    EXPECT_EQ(a.speed->count, avs);
  }
  EXPECT_NE(r.find("td3"), nullptr);
  EXPECT_EQ(r.find("hcfs"), nullptr);
}

TEST(Aggregate, UpperBandEdgeInLastBin) {
  FollowerMetrics f;
  f.is_av = true;
  f.mean_ttc_in_band = 2.7;
  const std::vector<EventMetrics> one{make_event("x", "e", false, 10.0, {f})};
  const auto r = aggregate(one);
  EXPECT_EQ(r.algorithms[0].ttc_histogram.back(), 1u);
}

TEST(Report, JsonRoundTrip) {
  const auto r = aggregate(sample_events());
  EXPECT_EQ(report_from_json(report_to_json(r)), r);
  const auto dir = fresh_dir("akhcfs_report_rt");
  emit_report(r, dir);
  EXPECT_EQ(read_report(dir / "report.json"), r);
  for (const char* f : {"tables.csv", "fig_ttc_histogram.csv", "fig_speed_bins.csv",
                        "fig_collisions.csv", "ttc_histogram.svg", "jerk_boxplot.svg"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_EQ(slurp(dir / "tables.csv").substr(0, 38), "algorithm,metric,min,q1,median,q3,max\n");
  fs::remove_all(dir);
}

TEST(Report, EmptyReportIsValid) {
  const auto dir = fresh_dir("akhcfs_report_empty");
  emit_report(AggregateReport{}, dir);
  const auto j = nlohmann::json::parse(slurp(dir / "report.json"));
  EXPECT_TRUE(j["algorithms"].empty());
  fs::remove_all(dir);
}

TEST(Report, DeterministicBytes) {
  const auto events = sample_events();
  const auto a = fresh_dir("akhcfs_report_a");
  const auto b = fresh_dir("akhcfs_report_b");
  emit_report(aggregate(events), a);
  emit_report(aggregate(events), b);
  write_events_csv(events, a / "events.csv");
  write_events_csv(events, b / "events.csv");
  for (const auto& entry : fs::directory_iterator(a)) {
    EXPECT_EQ(slurp(entry.path()), slurp(b / entry.path().filename())) << entry.path();
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(2.0), "2");
  const double x = 0.019901960784313725;
  EXPECT_EQ(std::stod(format_double(x)), x);
}

TEST(FollowerMetrics, FromSeries) {
  FollowerSeries s;
  s.is_av = true;
  s.accel = {0.0, 0.1, 0.2, 0.3};
  s.speed = {10.0, 12.0, 14.0, 16.0};
  s.x_error = {20.0, 20.0, 20.0, 20.0};
  s.v_error = {-10.0, 1.0, -40.0, 0.0};
  const auto m = follower_metrics(s, 0.1);
  EXPECT_NEAR(m.mean_abs_jerk, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(m.mean_speed, 13.0);
  EXPECT_DOUBLE_EQ(*m.mean_ttc_in_band, 1.25);
}

}  // namespace
}  // namespace akhcfs
