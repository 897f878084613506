#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "akhcfs/controllers.h"
#include "akhcfs/traj_data.h"
#include "akhcfs/vehicle_dynamics.h"

namespace akhcfs {

inline constexpr std::size_t kObservationSize = 5;
using NormalizedObservation = std::array<double, kObservationSize>;

struct RewardParams {
  double v_max_mps = 40.0;
  double x_max_m = 100.0;
  double a_bound = 3.0;
  double dt_s = 0.1;
  double ttc_threshold_s = 2.7;
  double safety_floor = -5.0;
  double t_desire_s = 0.6;
  double collision_penalty = -10.0;
};

// Car-following state of one follower.
struct Observation {
  double x_error = 0.0;    // clear distance to the predecessor
  double v_error = 0.0;    // predecessor speed - ego speed
  double v_ego = 0.0;
  double x_error_0 = 0.0;  // clear distance to the leader (intermediate lengths removed)
  double v_error_0 = 0.0;  // leader speed - ego speed

  // Network input: divided by (x_max, v_max, v_max, 2 x_max, v_max).
  NormalizedObservation normalized(const RewardParams& params) const;
};

struct RewardBreakdown {
  double stability = 0.0;
  double comfort = 0.0;
  double safety = 0.0;
  double efficiency = 0.0;
  double terminal = 0.0;
  double total = 0.0;
  double jerk = 0.0;
};

// follower_index is 0-based over the followers.
Observation observe(const PlatoonState& platoon, std::size_t follower_index);

double reward_stability(double v_error_0, double v_max);

struct ComfortTerm {
  double value = 0.0;
  double jerk = 0.0;
};
// Worst single-step swing (2 a_bound / dt) scores -1.
ComfortTerm reward_comfort(double a_k, double a_prev, double a_bound, double dt);

// Finite only while closing (v_error < 0).
std::optional<double> time_to_collision(double x_error, double v_error);

double reward_safety(std::optional<double> ttc, double threshold_s = 2.7, double floor = -5.0);

double reward_efficiency(double v_ego, double x_actual, double t_desire, double x_max);

RewardBreakdown total_reward(double stability, double comfort, double safety, double efficiency,
                             bool collided, double collision_penalty = -10.0);

// Full per-step reward of one follower from its post-step observation and
// the actual accelerations before and after the step.
RewardBreakdown step_reward(const Observation& obs, double a_now, double a_prev, bool collided,
                            const RewardParams& params);

enum class LeaderMotion { profile_replay, constant_velocity, constant_acceleration };

struct EnvParams {
  DynamicsParams dynamics;
  CaccParams cacc;
  IdmParams idm;
  RewardParams reward;
  double initial_headway_s = 0.6;
  double d_min_m = 2.0;
  double min_profile_s = 20.0;
};

struct EpisodeConfig {
  std::shared_ptr<const LeaderProfile> leader;
  std::vector<ControllerTag> mix;
  std::uint64_t seed = 0;
};

struct SlotStep {
  double reward = 0.0;
  bool done = false;
};

struct StepResult {
  std::vector<Observation> observations;  // one per AV, AV order
  std::vector<RewardBreakdown> rewards;   // one per AV, AV order
  bool done = false;
  std::optional<CollisionPair> collision;
};

// Mixed platoon behind a replayed (or extrapolated) leader. Copies are
// independent snapshots; the leader profile is shared read-only.
class Env {
 public:
  explicit Env(EnvParams params = {});

  std::vector<Observation> reset(const EpisodeConfig& config);

  // One action per AV follower, in follower order; values outside
  // [-a_bound, a_bound] are clamped and counted.
  StepResult step(std::span<const double> av_actions);
  // Same transition, scoring only the AV in `slot`.
  SlotStep step_slot(std::span<const double> av_actions, std::size_t slot);

  const EnvParams& params() const { return params_; }
  const PlatoonState& platoon() const { return platoon_; }
  const std::vector<std::size_t>& av_followers() const { return av_followers_; }
  const LeaderProfile& profile() const { return *profile_; }
  bool done() const { return done_; }
  bool collided() const { return collided_; }
  std::size_t clamp_warnings() const { return clamp_warnings_; }

  Observation observe(std::size_t follower_index) const;
  // CACC command for a follower from the current state (does not advance the chain).
  CaccOutput cacc_command(std::size_t follower_index) const;
  double idm_command(std::size_t follower_index) const;

  // Switches how the leader moves from now on (used for prediction copies).
  void set_leader_motion(LeaderMotion motion) { leader_motion_ = motion; }
  LeaderMotion leader_motion() const { return leader_motion_; }

  // Direct state override, mainly for tests.
  void set_platoon(PlatoonState platoon);

 private:
  VehicleState next_leader() const;
  std::optional<CollisionPair> advance(std::span<const double> av_actions,
                                       std::vector<double>& prev_accel);
  RewardBreakdown reward_of(std::size_t follower_index, double prev_accel,
                            const std::optional<CollisionPair>& collision,
                            Observation* obs_out) const;

  EnvParams params_;
  std::shared_ptr<const LeaderProfile> profile_;
  PlatoonState platoon_;
  std::vector<std::size_t> av_followers_;
  LeaderMotion leader_motion_ = LeaderMotion::profile_replay;
  bool done_ = false;
  bool collided_ = false;
  std::size_t clamp_warnings_ = 0;
};

// Per-step reward log: step,vehicle,stab,cft,safe,eff,total
void write_reward_header(std::ostream& out);
void append_reward_rows(std::ostream& out, std::int64_t step, std::span<const std::size_t> vehicles,
                        std::span<const RewardBreakdown> rewards);

}  // namespace akhcfs
