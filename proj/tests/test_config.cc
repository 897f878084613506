#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "akhcfs/config.h"
#include "akhcfs/errors.h"

namespace akhcfs {
namespace {

using nlohmann::json;

TEST(Config, DefaultsMatchReferenceSettings) {
  const RunConfig c;
  EXPECT_EQ(c.env.dynamics.dt_s, 0.1);
  EXPECT_EQ(c.env.dynamics.a_bound, 3.0);
  EXPECT_EQ(c.env.dynamics.tau_s, 0.4);
  EXPECT_EQ(c.td3.learning_rate, 0.001);
  EXPECT_EQ(c.td3.gamma, 0.99);
  EXPECT_EQ(c.td3.tau, 0.005);
  EXPECT_EQ(c.td3.batch_size, 64);
  EXPECT_EQ(c.td3.memory_size, 20000);
  EXPECT_EQ(c.td3.policy_delay, 500);
  EXPECT_EQ(c.td3.hidden, (std::vector<int>{32, 16}));
  EXPECT_EQ(c.fusion.kalman.q_measure, 0.01);
  EXPECT_EQ(c.fusion.kalman.r_measure, 0.01);
  EXPECT_EQ(c.fusion.kalman.a1, 1.0);
  EXPECT_EQ(c.fusion.mcts.iterations, 1000);
  EXPECT_EQ(c.fusion.mcts.exploration, 7.0);
  EXPECT_EQ(c.fusion.mcts.exploration_decay, 0.995);
  EXPECT_EQ(c.fusion.mcts.epsilon, 0.1);
  EXPECT_EQ(c.fusion.mcts.candidates,
            (std::vector<double>{0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1.0}));
  EXPECT_EQ(c.evaluate.followers, 4);
  EXPECT_EQ(c.algorithm, Algorithm::akhcfs);
}

TEST(Config, EmptyObjectGivesDefaults) {
  EXPECT_EQ(config_to_json(config_from_json(json::object())), config_to_json(RunConfig{}));
}

TEST(Config, JsonRoundTrip) {
  RunConfig c;
  c.seed = 123;
  c.jobs = 3;
  c.algorithm = Algorithm::hcfs;
  c.train.mix = "HAA";
  c.td3.policy_delay = 2;
  const auto j = config_to_json(c);
  EXPECT_EQ(config_to_json(config_from_json(j)), j);
}

TEST(Config, UnknownKeyRejected) {
  EXPECT_THROW(config_from_json(json{{"sed", 1}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"td3", {{"gamma_", 0.9}}}}), ConfigError);
}

TEST(Config, TypeMismatchRejected) {
  EXPECT_THROW(config_from_json(json{{"jobs", "four"}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"td3", 3}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"algorithm", "ppo"}}), ConfigError);
}

TEST(Config, OverlayKeepsOtherDefaults) {
  const auto c = config_from_json(json{{"td3", {{"policy_delay", 5}}}});
  EXPECT_EQ(c.td3.policy_delay, 5);
  EXPECT_EQ(c.td3.batch_size, RunConfig{}.td3.batch_size);
}

TEST(Config, MissingFileIsConfigError) {
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, SchemaCoversEveryKey) {
  const auto schema = config_schema();
  EXPECT_EQ(schema["additionalProperties"], false);
  const auto defaults = config_to_json(RunConfig{});
  for (const auto& [key, value] : defaults.items()) {
    ASSERT_TRUE(schema["properties"].contains(key)) << key;
    if (value.is_object()) {
      EXPECT_EQ(schema["properties"][key]["additionalProperties"], false) << key;
    }
  }
}

TEST(Config, CommittedSchemaIsCurrent) {
  const std::filesystem::path path = std::filesystem::path(AKHCFS_SOURCE_DIR) / "config" / "schema.json";
  std::ifstream in(path);
  ASSERT_TRUE(in) << path;
  EXPECT_EQ(json::parse(in), config_schema()) << "regenerate with: akhcfs schema > config/schema.json";
}

TEST(Config, CommittedConfigsLoad) {
  const auto dir = std::filesystem::path(AKHCFS_SOURCE_DIR) / "config";
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().filename() == "schema.json") continue;
    EXPECT_NO_THROW(validate(load_config(entry.path()))) << entry.path();
  }
}

TEST(Config, DescribeListsDottedKeys) {
  const auto text = describe_config_keys();
  EXPECT_NE(text.find("td3.policy_delay = "), std::string::npos);
  EXPECT_NE(text.find("seed = 0"), std::string::npos);
}

TEST(Config, ValidateRejectsBadValues) {
  RunConfig c;
  c.jobs = 0;
  EXPECT_THROW(validate(c), ConfigError);
  c = RunConfig{};
  c.evaluate.followers = 0;
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(Config, SharedParametersPropagate) {
  RunConfig c;
  c.env.dynamics.a_bound = 2.0;
  c.env.dynamics.dt_s = 0.05;
  propagate_shared(c);
  EXPECT_EQ(c.td3.a_bound, 2.0);
  EXPECT_EQ(c.env.cacc.a_bound, 2.0);
  EXPECT_EQ(c.env.reward.dt_s, 0.05);
}

}  // namespace
}  // namespace akhcfs
