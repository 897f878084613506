#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "akhcfs/env.h"
#include "akhcfs/mlp.h"

namespace akhcfs {

enum class OptimizerKind { sgd, adam };

struct Td3Hyper {
  double learning_rate = 0.001;
  int policy_delay = 500;
  double act_noise = 0.1;     // exploration std as a fraction of a_bound
  double target_noise = 0.2;  // smoothing std as a fraction of a_bound
  double noise_clip = 0.5;    // smoothing clip as a fraction of a_bound
  double gamma = 0.99;
  double tau = 0.005;         // soft-update rate
  int batch_size = 64;
  int memory_size = 20000;
  std::vector<int> hidden{32, 16};
  double a_bound = 3.0;
  OptimizerKind optimizer = OptimizerKind::sgd;
};

nlohmann::json hyper_to_json(const Td3Hyper& h);
Td3Hyper hyper_from_json(const nlohmann::json& j);

struct Transition {
  NormalizedObservation obs{};
  double action = 0.0;
  double reward = 0.0;
  NormalizedObservation next_obs{};
  bool done = false;
};

// Fixed-capacity ring buffer.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 20000);

  void push(const Transition& t);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return data_.at(i); }

  // Distinct indices, uniformly drawn (Floyd's algorithm).
  std::vector<std::size_t> sample_indices(std::size_t batch, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> data_;
};

// Plain SGD or Adam over one network; Adam keeps per-parameter moments.
class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(OptimizerKind kind, const Mlp& net, double learning_rate);

  void step(Mlp& net, const MlpGradients& grads);

  nlohmann::json to_json() const;
  static Optimizer from_json(const nlohmann::json& j, const Mlp& net);

 private:
  OptimizerKind kind_ = OptimizerKind::sgd;
  double lr_ = 0.001;
  std::int64_t t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

struct UpdateDiagnostics {
  double critic1_loss = 0.0;
  double critic2_loss = 0.0;
  bool actor_updated = false;
  double actor_q = 0.0;  // mean Q1(s, pi(s)) at the actor step
};

struct BatchTargets {
  Eigen::MatrixXd target_actions;  // 1 x B, smoothed and clamped
  Eigen::MatrixXd y;               // 1 x B
};

class Td3Agent {
 public:
  Td3Agent() = default;
  Td3Agent(const Td3Hyper& hyper, std::uint64_t seed);

  // a_bound * tanh(.) of the normalized observation.
  double act(const NormalizedObservation& obs) const;
  double select_action(const NormalizedObservation& obs, bool explore, std::mt19937_64& rng) const;
  double select_action(const NormalizedObservation& obs, bool explore);

  double q1(const NormalizedObservation& obs, double action) const;
  double q2(const NormalizedObservation& obs, double action) const;

  // Smoothed target actions and bootstrapped targets for a batch. The noise is
  // drawn from the agent's own generator unless target_noise is zero.
  BatchTargets compute_targets(const std::vector<const Transition*>& batch);

  UpdateDiagnostics update(const ReplayBuffer& buffer);

  const Td3Hyper& hyper() const { return hyper_; }
  std::int64_t update_count() const { return updates_; }

  Mlp& actor() { return actor_; }
  Mlp& critic1() { return critic1_; }
  Mlp& critic2() { return critic2_; }
  Mlp& actor_target() { return actor_target_; }
  Mlp& critic1_target() { return critic1_target_; }
  Mlp& critic2_target() { return critic2_target_; }
  const Mlp& actor() const { return actor_; }
  const Mlp& critic1() const { return critic1_; }
  const Mlp& critic2() const { return critic2_; }
  // Re-creates optimizer state after hand edits of the networks.
  void reset_optimizers();

  std::mt19937_64& rng() { return rng_; }

  nlohmann::json to_json() const;
  static Td3Agent from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static Td3Agent load(const std::filesystem::path& path);

 private:
  Eigen::MatrixXd critic_input(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& actions) const;

  Td3Hyper hyper_;
  Mlp actor_, actor_target_;
  Mlp critic1_, critic2_, critic1_target_, critic2_target_;
  Optimizer actor_opt_, critic1_opt_, critic2_opt_;
  std::mt19937_64 rng_;
  std::int64_t updates_ = 0;
};

Mlp make_actor(const Td3Hyper& hyper);
Mlp make_critic(const Td3Hyper& hyper);

}  // namespace akhcfs
