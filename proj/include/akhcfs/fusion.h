#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "akhcfs/env.h"
#include "akhcfs/mcts.h"

namespace akhcfs {

// Deterministic control policy over raw observations (the TD3 actor, or a stub).
using Policy = std::function<double(const Observation&)>;

struct KalmanConstants {
  double q_measure = 0.01;
  double r_measure = 0.01;
  double a1 = 1.0;
};

// Scalar covariance iteration. p holds P_1..P_N, k holds K_1..K_{N-1} and a
// holds A_1..A_N; p_final = P_N = A_N + Q.
struct KalmanTrace {
  std::vector<double> p;
  std::vector<double> k;
  std::vector<double> a;
  double p_final = 0.0;
};

// Runs N-1 full iterations of P = A + Q, K = P / (P + R), A' = (1 - K) P from A_1.
KalmanTrace kf_iterate(int n, double q_measure, double r_measure, double a1);

struct RolloutResult {
  double r_td3 = 0.0;
  double r_cacc = 0.0;
  std::optional<int> crossover;  // first t (1-based) where the CACC return beats TD3
  std::vector<double> rewards_td3;
  std::vector<double> rewards_cacc;
};

// Discounted partial sums of two reward sequences (shorter one padded with zeros).
RolloutResult compare_returns(std::span<const double> rewards_td3,
                              std::span<const double> rewards_cacc, double gamma);

// P_N / (P_N + R) when the CACC branch won within the horizon, else 0.
double kalman_gain(double p_n, double r, const RolloutResult& rollout);

// a_td3 + H (a_cacc - a_td3) without clamping; exact at H = 0 and H = 1.
double blend_actions(double a_td3, double a_cacc, double h);
// Throws std::domain_error for H outside [0, 1]; clamps to +-a_bound.
double fuse_action(double a_td3, double a_cacc, double h, double a_bound);

struct FusionConfig {
  int horizon = 10;
  double gamma = 0.99;
  LeaderMotion leader_prediction = LeaderMotion::constant_velocity;
  KalmanConstants kalman;
  MctsConfig mcts;
};

// Two forward simulations from the same snapshot: the ego follows CACC in one
// and the deterministic policy in the other. Other AVs follow the policy, HVs
// their IDM, and the leader the configured prediction mode.
RolloutResult predict_rollout(const Env& snapshot, std::size_t ego_follower, const Policy& policy,
                              const FusionConfig& config);

struct FusionDecision {
  double action = 0.0;
  double a_td3 = 0.0;
  double a_cacc = 0.0;
  std::optional<int> crossover;
  double p_n = 0.0;
  double r = 0.0;
  double h = 0.0;
};

// Selects R given the crossover step and P_N.
using RSelector = std::function<double(int crossover, double p_n)>;

// Gain and fused action from a finished rollout comparison. The selector and
// the covariance iteration run only when the CACC branch won.
FusionDecision combine_decision(double a_td3, double a_cacc, const RolloutResult& rollout,
                                const KalmanConstants& kalman, double a_bound,
                                const RSelector& select_r);

// Search model: every step applies the fused action for one R to the ego.
class FusedRolloutModel {
 public:
  using State = Env;

  FusedRolloutModel(std::size_t ego_follower, const Policy& policy, double p_n)
      : ego_(ego_follower), policy_(&policy), p_n_(p_n) {}

  SearchStep<Env> step(const Env& env, double r) const;
  SearchAdvance advance(Env& env, double r) const;

 private:
  std::size_t ego_;
  const Policy* policy_;
  double p_n_;
};

// Searches the measurement noise R for one ego from a prediction snapshot.
SearchResult search_measurement_noise(const Env& snapshot, std::size_t ego_follower,
                                      const Policy& policy, int crossover, double p_n,
                                      const FusionConfig& config, std::uint64_t seed);

FusionDecision akhcfs_decide(const Env& snapshot, std::size_t ego_follower, const Policy& policy,
                             const FusionConfig& config, std::uint64_t seed);

struct HcfsDecision {
  double action = 0.0;
  double a_td3 = 0.0;
  double a_cacc = 0.0;
  double r_td3 = 0.0;
  double r_cacc = 0.0;
};

// Fixed-coefficient baseline: TD3 alone when its one-step reward is higher,
// otherwise the even blend 0.5 a_cacc + 0.5 a_td3.
HcfsDecision hcfs_select(double a_td3, double a_cacc, double r_td3, double r_cacc);
HcfsDecision hcfs_decide(const Env& snapshot, std::size_t ego_follower, const Policy& policy,
                         LeaderMotion leader_prediction = LeaderMotion::constant_velocity);

// One JSON line: {step, vehicle, N, P_N, R, H, a_td3, a_cacc, a_fused}.
void write_decision_line(std::ostream& out, std::int64_t step, std::size_t vehicle,
                         const FusionDecision& decision);

}  // namespace akhcfs
