#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "akhcfs/errors.h"
#include "akhcfs/td3.h"

namespace akhcfs {
namespace {

Transition random_transition(std::mt19937_64& rng, bool done = false) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Transition t;
  for (auto& x : t.obs) x = u(rng);
  for (auto& x : t.next_obs) x = u(rng);
  t.action = 3.0 * u(rng);
  t.reward = u(rng);
  t.done = done;
  return t;
}

TEST(ReplayBuffer, RingOverwritesOldest) {
  ReplayBuffer buf(3);
  for (int i = 0; i < 5; ++i) {
    Transition t;
    t.reward = i;
    buf.push(t);
  }
  ASSERT_EQ(buf.size(), 3u);
  std::multiset<double> rewards;
  for (std::size_t i = 0; i < 3; ++i) rewards.insert(buf.at(i).reward);
  EXPECT_EQ(rewards, (std::multiset<double>{2.0, 3.0, 4.0}));
}

TEST(ReplayBuffer, SamplesAreDistinctAndSeeded) {
  ReplayBuffer buf(100);
  std::mt19937_64 fill(1);
  for (int i = 0; i < 100; ++i) buf.push(random_transition(fill));
  std::mt19937_64 a(9), b(9);
  const auto ia = buf.sample_indices(64, a);
  EXPECT_EQ(ia, buf.sample_indices(64, b));
  EXPECT_EQ(std::set<std::size_t>(ia.begin(), ia.end()).size(), 64u);
  for (auto i : ia) EXPECT_LT(i, 100u);
  EXPECT_THROW(buf.sample_indices(101, a), std::invalid_argument);
}

TEST(Td3, TerminalTargetIsReward) {
  Td3Agent agent(Td3Hyper{}, 5);
  std::mt19937_64 rng(2);
  std::vector<Transition> ts;
  for (int i = 0; i < 8; ++i) ts.push_back(random_transition(rng, true));
  std::vector<const Transition*> batch;
  for (const auto& t : ts) batch.push_back(&t);
  const auto targets = agent.compute_targets(batch);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    EXPECT_EQ(targets.y(0, static_cast<Eigen::Index>(i)), ts[i].reward);
  }
}

TEST(Td3, IdenticalTwinsUseFirstCritic) {
  Td3Hyper h;
  h.target_noise = 0.0;
  Td3Agent agent(h, 5);
  agent.critic2() = agent.critic1();
  agent.critic2_target() = agent.critic1_target();
  std::mt19937_64 rng(3);
  const auto t = random_transition(rng);
  const auto targets = agent.compute_targets({&t});
  // Targets start equal to their online networks.
  const double a_next = std::clamp(agent.actor_target().forward_scalar(t.next_obs), -3.0, 3.0);
  const double q1 = agent.q1(t.next_obs, a_next);
  EXPECT_NEAR(targets.y(0, 0), t.reward + h.gamma * q1, 1e-12);
}

TEST(Td3, TargetSmoothingStaysClipped) {
  Td3Agent agent(Td3Hyper{}, 5);
  agent.actor_target().set_zero();
  std::mt19937_64 rng(4);
  std::vector<Transition> ts;
  for (int i = 0; i < 500; ++i) ts.push_back(random_transition(rng));
  std::vector<const Transition*> batch;
  for (const auto& t : ts) batch.push_back(&t);
  const auto targets = agent.compute_targets(batch);
  EXPECT_LE(targets.target_actions.cwiseAbs().maxCoeff(), 0.5 * 3.0 + 1e-12);
  EXPECT_GT(targets.target_actions.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Td3, LinearCriticStepMovesTowardTarget) {
  Td3Hyper h;
  h.batch_size = 1;
  h.policy_delay = 1000;
  h.target_noise = 0.0;
  Td3Agent agent(h, 7);
  const Mlp linear({6, 1}, Activation::identity, Activation::identity);
  for (Mlp* net : {&agent.critic1(), &agent.critic2(), &agent.critic1_target(),
                   &agent.critic2_target()}) {
    *net = linear;
    net->layers()[0].weights.setConstant(0.3);
    net->layers()[0].biases(0) = 0.4;
  }
  agent.reset_optimizers();

  Transition t;  // zero observation and action, so only the bias moves
  t.reward = 2.0;
  t.done = true;
  ReplayBuffer buf(1);
  buf.push(t);
  const double q = agent.q1(t.obs, 0.0);
  agent.update(buf);
  EXPECT_NEAR(agent.q1(t.obs, 0.0) - q, h.learning_rate * 2.0 * (t.reward - q), 1e-12);
}

TEST(Td3, ActorUpdatesOnPolicyDelay) {
  Td3Hyper h;
  h.batch_size = 4;
  h.policy_delay = 3;
  Td3Agent agent(h, 11);
  ReplayBuffer buf(50);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) buf.push(random_transition(rng));
  const auto actor0 = agent.actor().flat_parameters();
  EXPECT_FALSE(agent.update(buf).actor_updated);
  EXPECT_FALSE(agent.update(buf).actor_updated);
  EXPECT_EQ(agent.actor().flat_parameters(), actor0);
  EXPECT_TRUE(agent.update(buf).actor_updated);
  EXPECT_NE(agent.actor().flat_parameters(), actor0);
  EXPECT_EQ(agent.update_count(), 3);
}

TEST(Td3, UpdateNeedsFullBatch) {
  Td3Agent agent(Td3Hyper{}, 1);
  ReplayBuffer buf(100);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 10; ++i) buf.push(random_transition(rng));
  EXPECT_THROW(agent.update(buf), std::logic_error);
}

TEST(Td3, ExplorationNoiseStd) {
  Td3Agent agent(Td3Hyper{}, 1);
  agent.actor().set_zero();
  std::mt19937_64 rng(12);
  const NormalizedObservation obs{};
  EXPECT_EQ(agent.select_action(obs, false, rng), 0.0);
  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double a = agent.select_action(obs, true, rng);
    sum += a;
    sq += a * a;
  }
  const double mean = sum / n;
  EXPECT_NEAR(mean, 0.0, 0.02);
  EXPECT_NEAR(std::sqrt(sq / n - mean * mean), 0.3, 0.01);
}

TEST(Td3, SeededRunsAreIdentical) {
  const auto run = [] {
    Td3Hyper h;
    h.batch_size = 8;
    h.policy_delay = 2;
    Td3Agent agent(h, 42);
    ReplayBuffer buf(200);
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) buf.push(random_transition(rng));
    for (int i = 0; i < 20; ++i) agent.update(buf);
    return agent.actor().flat_parameters();
  };
  EXPECT_EQ(run(), run());
}

TEST(Td3, CheckpointRoundTripContinuesIdentically) {
  for (auto kind : {OptimizerKind::sgd, OptimizerKind::adam}) {
    Td3Hyper h;
    h.batch_size = 8;
    h.policy_delay = 2;
    h.optimizer = kind;
    Td3Agent agent(h, 42);
    ReplayBuffer buf(100);
    std::mt19937_64 rng(3);
    for (int i = 0; i < 100; ++i) buf.push(random_transition(rng));
    for (int i = 0; i < 5; ++i) agent.update(buf);

    const auto path = std::filesystem::temp_directory_path() / "akhcfs_td3_ckpt.json";
    agent.save(path);
    Td3Agent loaded = Td3Agent::load(path);
    std::filesystem::remove(path);
    EXPECT_EQ(loaded.update_count(), agent.update_count());
    EXPECT_EQ(loaded.critic2().flat_parameters(), agent.critic2().flat_parameters());
    for (int i = 0; i < 5; ++i) {
      agent.update(buf);
      loaded.update(buf);
    }
    EXPECT_EQ(loaded.actor().flat_parameters(), agent.actor().flat_parameters());
    EXPECT_EQ(loaded.critic1().flat_parameters(), agent.critic1().flat_parameters());
  }
}

TEST(Td3, BadCheckpointRejected) {
  EXPECT_THROW(Td3Agent::from_json(nlohmann::json{{"format", "other"}}), DataError);
  EXPECT_THROW(Td3Agent::load("/nonexistent/ckpt.json"), DataError);
}

TEST(Td3, HyperJsonRoundTrip) {
  Td3Hyper h;
  h.policy_delay = 7;
  h.hidden = {8, 4};
  h.optimizer = OptimizerKind::adam;
  const auto back = hyper_from_json(hyper_to_json(h));
  EXPECT_EQ(back.policy_delay, 7);
  EXPECT_EQ(back.hidden, (std::vector<int>{8, 4}));
  EXPECT_EQ(back.optimizer, OptimizerKind::adam);
}

}  // namespace
}  // namespace akhcfs
