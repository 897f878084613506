#include "akhcfs/fusion.h"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "json.hpp"

namespace akhcfs {

namespace {

std::size_t av_slot(const Env& env, std::size_t follower) {
  const auto& avs = env.av_followers();
  const auto it = std::find(avs.begin(), avs.end(), follower);
  if (it == avs.end()) throw std::invalid_argument("ego follower is not an AV");
  return static_cast<std::size_t>(it - avs.begin());
}

// Policy actions for every AV, with the ego's slot overridden. The span
// stays valid until the next call on this thread.
std::span<const double> joint_actions(const Env& env, const Policy& policy, std::size_t ego_slot,
                                      double ego_action) {
  thread_local std::vector<double> actions;
  const auto& avs = env.av_followers();
  actions.resize(avs.size());
  for (std::size_t k = 0; k < avs.size(); ++k) {
    actions[k] = k == ego_slot ? ego_action : policy(env.observe(avs[k]));
  }
  return actions;
}

Env prediction_copy(const Env& snapshot, LeaderMotion motion) {
  if (snapshot.collided()) throw std::invalid_argument("snapshot is already in collision");
  Env copy = snapshot;
  copy.set_leader_motion(motion);
  return copy;
}

}  // namespace

KalmanTrace kf_iterate(int n, double q_measure, double r_measure, double a1) {
  if (n < 1) throw std::invalid_argument("kf_iterate needs N >= 1");
  KalmanTrace trace;
  double a = a1;
  trace.a.push_back(a);
  for (int i = 1; i < n; ++i) {
    const double p = a + q_measure;
    const double denom = p + r_measure;
    const double k = denom > 0.0 ? p / denom : 0.0;
    a = (1.0 - k) * p;
    trace.p.push_back(p);
    trace.k.push_back(k);
    trace.a.push_back(a);
  }
  trace.p_final = a + q_measure;
  trace.p.push_back(trace.p_final);
  return trace;
}

RolloutResult compare_returns(std::span<const double> rewards_td3,
                              std::span<const double> rewards_cacc, double gamma) {
  RolloutResult out;
  out.rewards_td3.assign(rewards_td3.begin(), rewards_td3.end());
  out.rewards_cacc.assign(rewards_cacc.begin(), rewards_cacc.end());
  const std::size_t horizon = std::max(rewards_td3.size(), rewards_cacc.size());
  double discount = 1.0;
  for (std::size_t t = 0; t < horizon; ++t) {
    out.r_td3 += discount * (t < rewards_td3.size() ? rewards_td3[t] : 0.0);
    out.r_cacc += discount * (t < rewards_cacc.size() ? rewards_cacc[t] : 0.0);
    discount *= gamma;
    if (!out.crossover && out.r_cacc > out.r_td3) out.crossover = static_cast<int>(t) + 1;
  }
  return out;
}

double kalman_gain(double p_n, double r, const RolloutResult& rollout) {
  if (!rollout.crossover) return 0.0;
  if (p_n < 0.0 || !(r > 0.0)) throw std::domain_error("kalman gain needs P_N >= 0 and R > 0");
  return p_n / (p_n + r);
}

double blend_actions(double a_td3, double a_cacc, double h) { return std::lerp(a_td3, a_cacc, h); }

double fuse_action(double a_td3, double a_cacc, double h, double a_bound) {
  if (!(h >= 0.0 && h <= 1.0)) throw std::domain_error("fusion gain H must lie in [0, 1]");
  return std::clamp(blend_actions(a_td3, a_cacc, h), -a_bound, a_bound);
}

RolloutResult predict_rollout(const Env& snapshot, std::size_t ego_follower, const Policy& policy,
                              const FusionConfig& config) {
  if (config.horizon < 1) throw std::invalid_argument("rollout horizon must be >= 1");
  const Env base = prediction_copy(snapshot, config.leader_prediction);
  const std::size_t slot = av_slot(base, ego_follower);

  const auto run_branch = [&](bool use_cacc) {
    Env env = base;
    std::vector<double> rewards;
    rewards.reserve(static_cast<std::size_t>(config.horizon));
    for (int t = 0; t < config.horizon && !env.done(); ++t) {
      const double ego_action = use_cacc ? env.cacc_command(ego_follower).accel
                                         : policy(env.observe(ego_follower));
      rewards.push_back(env.step_slot(joint_actions(env, policy, slot, ego_action), slot).reward);
    }
    return rewards;
  };

  const auto td3 = run_branch(false);
  const auto cacc = run_branch(true);
  return compare_returns(td3, cacc, config.gamma);
}

FusionDecision combine_decision(double a_td3, double a_cacc, const RolloutResult& rollout,
                                const KalmanConstants& kalman, double a_bound,
                                const RSelector& select_r) {
  FusionDecision d;
  d.a_td3 = a_td3;
  d.a_cacc = a_cacc;
  d.crossover = rollout.crossover;
  if (!rollout.crossover) {
    d.action = std::clamp(a_td3, -a_bound, a_bound);
    return d;
  }
  const auto trace = kf_iterate(*rollout.crossover, kalman.q_measure, kalman.r_measure, kalman.a1);
  d.p_n = trace.p_final;
  d.r = select_r(*rollout.crossover, d.p_n);
  d.h = kalman_gain(d.p_n, d.r, rollout);
  d.action = fuse_action(a_td3, a_cacc, d.h, a_bound);
  return d;
}

SearchStep<Env> FusedRolloutModel::step(const Env& env, double r) const {
  SearchStep<Env> out{env, 0.0, false};
  const auto adv = advance(out.next, r);
  out.reward = adv.reward;
  out.terminal = adv.terminal;
  return out;
}

SearchAdvance FusedRolloutModel::advance(Env& env, double r) const {
  if (env.done()) return SearchAdvance{0.0, true};
  const std::size_t slot = av_slot(env, ego_);
  const double h = p_n_ / (p_n_ + r);
  const double a_td3 = (*policy_)(env.observe(ego_));
  const double a_cacc = env.cacc_command(ego_).accel;
  const double fused = fuse_action(a_td3, a_cacc, h, env.params().dynamics.a_bound);
  const auto result = env.step_slot(joint_actions(env, *policy_, slot, fused), slot);
  return SearchAdvance{result.reward, result.done};
}

SearchResult search_measurement_noise(const Env& snapshot, std::size_t ego_follower,
                                      const Policy& policy, int crossover, double p_n,
                                      const FusionConfig& config, std::uint64_t seed) {
  const Env base = prediction_copy(snapshot, config.leader_prediction);
  MctsConfig mcts = config.mcts;
  mcts.max_depth = std::max(1, config.horizon - crossover + 1);
  mcts.seed = seed;
  const FusedRolloutModel model(ego_follower, policy, p_n);
  return mcts_search(model, base, mcts);
}

FusionDecision akhcfs_decide(const Env& snapshot, std::size_t ego_follower, const Policy& policy,
                             const FusionConfig& config, std::uint64_t seed) {
  const double a_td3 = policy(snapshot.observe(ego_follower));
  const double a_cacc = snapshot.cacc_command(ego_follower).accel;
  const auto rollout = predict_rollout(snapshot, ego_follower, policy, config);
  return combine_decision(a_td3, a_cacc, rollout, config.kalman,
                          snapshot.params().dynamics.a_bound, [&](int crossover, double p_n) {
                            return search_measurement_noise(snapshot, ego_follower, policy,
                                                            crossover, p_n, config, seed)
                                .best_r;
                          });
}

HcfsDecision hcfs_select(double a_td3, double a_cacc, double r_td3, double r_cacc) {
  HcfsDecision d{a_td3, a_td3, a_cacc, r_td3, r_cacc};
  if (!(r_td3 > r_cacc)) d.action = 0.5 * a_cacc + 0.5 * a_td3;
  return d;
}

HcfsDecision hcfs_decide(const Env& snapshot, std::size_t ego_follower, const Policy& policy,
                         LeaderMotion leader_prediction) {
  const Env base = prediction_copy(snapshot, leader_prediction);
  const std::size_t slot = av_slot(base, ego_follower);
  const double a_td3 = policy(base.observe(ego_follower));
  const double a_cacc = base.cacc_command(ego_follower).accel;
  const auto one_step = [&](double ego_action) {
    Env env = base;
    return env.step(joint_actions(env, policy, slot, ego_action)).rewards[slot].total;
  };
  return hcfs_select(a_td3, a_cacc, one_step(a_td3), one_step(a_cacc));
}

void write_decision_line(std::ostream& out, std::int64_t step, std::size_t vehicle,
                         const FusionDecision& decision) {
  nlohmann::json j{{"step", step},
                   {"vehicle", vehicle},
                   {"N", decision.crossover ? nlohmann::json(*decision.crossover) : nlohmann::json()},
                   {"P_N", decision.p_n},
                   {"R", decision.r},
                   {"H", decision.h},
                   {"a_td3", decision.a_td3},
                   {"a_cacc", decision.a_cacc},
                   {"a_fused", decision.action}};
  out << j.dump() << '\n';
}

}  // namespace akhcfs
