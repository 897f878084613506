#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "akhcfs/app.h"
#include "akhcfs/errors.h"

namespace akhcfs {
namespace {

namespace fs = std::filesystem;

std::uint64_t reference_splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

RunConfig small_config(const fs::path& out) {
  RunConfig c;
  c.data.synthetic = true;
  c.data.synthetic_train = 2;
  c.data.synthetic_test = 2;
  c.data.synthetic_options.duration_s = 20.0;
  c.algorithm = Algorithm::td3;
  c.seed = 7;
  c.td3.batch_size = 16;
  c.td3.hidden = {8, 8};
  c.train.episodes = 2;
  c.train.warmup_steps = 50;
  c.train.followers = 2;
  c.evaluate.followers = 4;
  c.evaluate.max_events = 1;
  c.paths.output = out.string();
  propagate_shared(c);
  validate(c);
  return c;
}

TEST(DeriveSeed, SplitmixChain) {
  EXPECT_EQ(reference_splitmix(0), 0xe220a8397b1dcdafULL);
  for (std::uint64_t base : {0ULL, 1ULL, 12345ULL}) {
    std::uint64_t h = reference_splitmix(base);
    h = reference_splitmix(h ^ 3);
    h = reference_splitmix(h ^ 4);
    h = reference_splitmix(h ^ 5);
    EXPECT_EQ(derive_seed(base, 3, 4, 5), h);
  }
}

TEST(DeriveSeed, DistinctSlots) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t e = 0; e < 30; ++e) {
    for (std::uint64_t m = 0; m < 15; ++m) seen.insert(derive_seed(1, 20, e, m));
  }
  EXPECT_EQ(seen.size(), 450u);
}

TEST(ParseMix, Tags) {
  const auto tags = parse_mix("HAAH", Algorithm::akhcfs);
  ASSERT_EQ(tags.size(), 4u);
  EXPECT_EQ(tags[0], ControllerTag::hv_idm);
  EXPECT_EQ(tags[1], av_tag(Algorithm::akhcfs));
  EXPECT_EQ(tags[3], ControllerTag::hv_idm);
  EXPECT_THROW(parse_mix("HHHH", Algorithm::td3), ConfigError);
  EXPECT_THROW(parse_mix("AXA", Algorithm::td3), ConfigError);
}

TEST(Evaluate, FifteenEpisodesPerEventOverFourFollowers) {
  const auto c = small_config(fresh_dir("akhcfs_app_eval"));
  const Td3Agent agent(c.td3, 3);
  const auto data = load_datasets(c);
  const auto events = evaluate_events(c, Algorithm::td3, agent, data.test);
  ASSERT_EQ(events.size(), 15u);
  std::set<std::string> mixes;
  for (const auto& e : events) {
    EXPECT_EQ(e.event_id, data.test.front().event_id);
    EXPECT_EQ(e.followers.size(), 4u);
    EXPECT_NE(e.mix.find('A'), std::string::npos);
    mixes.insert(e.mix);
  }
  EXPECT_EQ(mixes.size(), 15u);
}

TEST(Evaluate, JobCountDoesNotChangeResults) {
  auto c = small_config(fresh_dir("akhcfs_app_jobs"));
  const Td3Agent agent(c.td3, 3);
  const auto data = load_datasets(c);
  const auto one = evaluate_events(c, Algorithm::hcfs, agent, data.test);
  c.jobs = 4;
  EXPECT_EQ(evaluate_events(c, Algorithm::hcfs, agent, data.test), one);
}

TEST(Evaluate, FixedMix) {
  auto c = small_config(fresh_dir("akhcfs_app_mix"));
  c.evaluate.mix = "HAAA";
  const Td3Agent agent(c.td3, 3);
  const auto events = evaluate_events(c, Algorithm::td3, agent, load_datasets(c).test);
  ASSERT_EQ(events.size(), 1u);
  EXPECT_EQ(events[0].mix, "HAAA");
  EXPECT_FALSE(events[0].followers[0].is_av);
  EXPECT_TRUE(events[0].followers[1].is_av);
}

TEST(Workflow, TrainEvaluateReplayReport) {
  const auto dir = fresh_dir("akhcfs_app_flow");
  const auto c = small_config(dir);
  Td3Agent trained(c.td3, 0);
  const auto summary = cmd_train(c, &trained);
  EXPECT_EQ(summary.episodes, 2);
  EXPECT_GT(summary.env_steps, 0);
  ASSERT_TRUE(fs::exists(c.checkpoint_path()));
  EXPECT_TRUE(fs::exists(dir / "training_log.csv"));
  EXPECT_EQ(load_checkpoint(c).actor().flat_parameters(), trained.actor().flat_parameters());

  const auto report = cmd_evaluate(c);
  ASSERT_EQ(report.algorithms.size(), 1u);
  EXPECT_EQ(report.algorithms[0].episodes, 15u);
  const auto events = read_events_csv(dir / "events.csv");
  EXPECT_EQ(events.size(), 15u);

  const auto again_dir = fresh_dir("akhcfs_app_flow_report");
  auto rc = c;
  rc.paths.output = again_dir.string();
  EXPECT_EQ(cmd_report(rc, {dir / "events.csv"}), report);
  EXPECT_EQ(slurp(again_dir / "report.json"), slurp(dir / "report.json"));

  const auto data = load_datasets(c);
  auto replay = c;
  replay.paths.checkpoint = c.checkpoint_path().string();
  replay.paths.output = (dir / "replay").string();
  const auto m1 = cmd_replay(replay, data.test[0].event_id, "HAAA");
  EXPECT_EQ(m1.mix, "HAAA");
  for (const char* f : {"trajectory.csv", "rewards.csv", "decisions.jsonl", "summary.json"}) {
    EXPECT_TRUE(fs::exists(dir / "replay" / f)) << f;
  }
  const auto traj = slurp(dir / "replay" / "trajectory.csv");
  EXPECT_EQ(cmd_replay(replay, data.test[0].event_id, "HAAA"), m1);
  EXPECT_EQ(slurp(dir / "replay" / "trajectory.csv"), traj);

  try {
    cmd_replay(replay, "nope", "");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(data.test[0].event_id), std::string::npos);
  }
  fs::remove_all(dir);
  fs::remove_all(again_dir);
}

TEST(Workflow, MissingCheckpointIsDataError) {
  auto c = small_config(fresh_dir("akhcfs_app_nockpt"));
  EXPECT_THROW(cmd_evaluate(c), DataError);
}

}  // namespace
}  // namespace akhcfs
