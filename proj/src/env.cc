#include "akhcfs/env.h"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "akhcfs/errors.h"

namespace akhcfs {

NormalizedObservation Observation::normalized(const RewardParams& params) const {
  return {x_error / params.x_max_m, v_error / params.v_max_mps, v_ego / params.v_max_mps,
          x_error_0 / (2.0 * params.x_max_m), v_error_0 / params.v_max_mps};
}

Observation observe(const PlatoonState& platoon, std::size_t follower_index) {
  const std::size_t ego_idx = follower_index + 1;
  const auto& ego = platoon.vehicle(ego_idx);
  const auto& front = platoon.vehicle(ego_idx - 1);
  const auto& leader = platoon.leader;

  double lengths_ahead = 0.0;
  for (std::size_t i = 0; i < ego_idx; ++i) lengths_ahead += platoon.vehicle(i).length_m;

  Observation obs;
  obs.x_error = clear_distance(front, ego);
  obs.v_error = front.speed_mps - ego.speed_mps;
  obs.v_ego = ego.speed_mps;
  obs.x_error_0 = leader.position_m - ego.position_m - lengths_ahead;
  obs.v_error_0 = leader.speed_mps - ego.speed_mps;
  return obs;
}

double reward_stability(double v_error_0, double v_max) { return -std::abs(v_error_0) / v_max; }

ComfortTerm reward_comfort(double a_k, double a_prev, double a_bound, double dt) {
  const double jerk = (a_k - a_prev) / dt;
  return ComfortTerm{-std::abs(jerk) / (2.0 * a_bound / dt), jerk};
}

std::optional<double> time_to_collision(double x_error, double v_error) {
  if (v_error < 0.0) return -x_error / v_error;
  return std::nullopt;
}

double reward_safety(std::optional<double> ttc, double threshold_s, double floor) {
  if (!ttc || *ttc < 0.0 || *ttc > threshold_s) return 0.0;
  return std::max(std::log(*ttc / threshold_s), floor);
}

double reward_efficiency(double v_ego, double x_actual, double t_desire, double x_max) {
  const double x_expected = v_ego * t_desire;
  return -std::abs(x_expected - x_actual) / x_max;
}

RewardBreakdown total_reward(double stability, double comfort, double safety, double efficiency,
                             bool collided, double collision_penalty) {
  RewardBreakdown r;
  r.stability = stability;
  r.comfort = comfort;
  r.safety = safety;
  r.efficiency = efficiency;
  r.terminal = collided ? collision_penalty : 0.0;
  r.total = stability + comfort + safety + efficiency + r.terminal;
  return r;
}

RewardBreakdown step_reward(const Observation& obs, double a_now, double a_prev, bool collided,
                            const RewardParams& params) {
  const auto comfort = reward_comfort(a_now, a_prev, params.a_bound, params.dt_s);
  auto r = total_reward(
      reward_stability(obs.v_error_0, params.v_max_mps), comfort.value,
      reward_safety(time_to_collision(obs.x_error, obs.v_error), params.ttc_threshold_s,
                    params.safety_floor),
      reward_efficiency(obs.v_ego, obs.x_error, params.t_desire_s, params.x_max_m), collided,
      params.collision_penalty);
  r.jerk = comfort.jerk;
  return r;
}

Env::Env(EnvParams params) : params_(std::move(params)) {}

std::vector<Observation> Env::reset(const EpisodeConfig& config) {
  if (!config.leader) throw DataError("episode has no leader profile");
  if (config.mix.empty()) throw DataError("episode needs at least one follower");
  const auto& profile = *config.leader;
  if (profile.sample_count() < 2 || profile.duration_s() + 1e-9 < params_.min_profile_s) {
    throw DataError("leader profile " + profile.event_id + " is shorter than " +
                    std::to_string(params_.min_profile_s) + " s");
  }

  profile_ = config.leader;
  leader_motion_ = LeaderMotion::profile_replay;
  done_ = false;
  collided_ = false;
  clamp_warnings_ = 0;

  const double length = params_.dynamics.vehicle_length_m;
  const double v0 = profile.speeds_mps.front();
  const double gap = std::max(params_.initial_headway_s * v0, params_.d_min_m);

  platoon_ = PlatoonState{};
  platoon_.leader = VehicleState{0.0, v0, 0.0, length};
  av_followers_.clear();
  for (std::size_t i = 0; i < config.mix.size(); ++i) {
    const auto& front = platoon_.vehicle(i);
    Follower f;
    f.tag = config.mix[i];
    f.vehicle = VehicleState{front.position_m - front.length_m - gap, v0, 0.0, length};
    f.cacc = cacc_initial_state(front.position_m, f.vehicle.position_m, front.length_m, v0,
                                params_.cacc);
    platoon_.followers.push_back(f);
    if (is_av(f.tag)) av_followers_.push_back(i);
  }

  std::vector<Observation> obs;
  for (auto i : av_followers_) obs.push_back(observe(i));
  return obs;
}

void Env::set_platoon(PlatoonState platoon) {
  platoon_ = std::move(platoon);
  av_followers_.clear();
  for (std::size_t i = 0; i < platoon_.followers.size(); ++i) {
    if (is_av(platoon_.followers[i].tag)) av_followers_.push_back(i);
  }
  collided_ = detect_collision(platoon_).has_value();
  done_ = collided_;
}

Observation Env::observe(std::size_t follower_index) const {
  return akhcfs::observe(platoon_, follower_index);
}

CaccOutput Env::cacc_command(std::size_t follower_index) const {
  const auto& front = platoon_.vehicle(follower_index);
  const auto& f = platoon_.followers[follower_index];
  return cacc_accel(front.position_m, f.vehicle.position_m, front.length_m, f.vehicle.speed_mps,
                    f.cacc, params_.cacc);
}

double Env::idm_command(std::size_t follower_index) const {
  const auto& front = platoon_.vehicle(follower_index);
  const auto& ego = platoon_.followers[follower_index].vehicle;
  return idm_accel(ego.speed_mps, ego.speed_mps - front.speed_mps, clear_distance(front, ego),
                   params_.idm, params_.dynamics.a_bound);
}

VehicleState Env::next_leader() const {
  const auto& lead = platoon_.leader;
  const double dt = params_.dynamics.dt_s;
  VehicleState next = lead;
  switch (leader_motion_) {
    case LeaderMotion::profile_replay: {
      const auto& p = *profile_;
      const auto k = std::min<std::size_t>(static_cast<std::size_t>(platoon_.step_index) + 1,
                                           p.steps());
      next.position_m = p.positions_m[k] - p.positions_m.front();
      next.speed_mps = p.speeds_mps[k];
      next.accel_mps2 = (p.speeds_mps[k] - p.speeds_mps[k - 1]) / p.dt_s;
      break;
    }
    case LeaderMotion::constant_velocity:
      next.position_m = lead.position_m + lead.speed_mps * dt;
      next.accel_mps2 = 0.0;
      break;
    case LeaderMotion::constant_acceleration: {
      double a = lead.accel_mps2;
      double v = lead.speed_mps + a * dt;
      if (v < 0.0) {
        a = -lead.speed_mps / dt;
        v = 0.0;
      }
      next.position_m = lead.position_m + lead.speed_mps * dt + 0.5 * a * dt * dt;
      next.speed_mps = v;
      next.accel_mps2 = a;
      break;
    }
  }
  return next;
}

std::optional<CollisionPair> Env::advance(std::span<const double> av_actions,
                                          std::vector<double>& prev_accel) {
  if (done_) throw std::logic_error("step called on a finished episode");
  if (av_actions.size() != av_followers_.size()) {
    throw std::invalid_argument("expected one action per AV follower");
  }

  const double a_bound = params_.dynamics.a_bound;
  const std::size_t n = platoon_.followers.size();

  // Every command reads the pre-step snapshot.
  thread_local std::vector<double> commands;
  thread_local std::vector<CaccState> cacc_next;
  commands.assign(n, 0.0);
  cacc_next.resize(n);
  std::size_t av = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& f = platoon_.followers[i];
    if (is_av(f.tag)) {
      double a = av_actions[av++];
      require_finite(a, "AV action");
      if (a > a_bound || a < -a_bound) {
        ++clamp_warnings_;
        a = std::clamp(a, -a_bound, a_bound);
      }
      commands[i] = a;
      cacc_next[i] = cacc_command(i).state;
    } else {
      commands[i] = idm_command(i);
    }
  }

  const VehicleState leader = next_leader();
  prev_accel.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& f = platoon_.followers[i];
    prev_accel[i] = f.vehicle.accel_mps2;
    const bool lagged = is_av(f.tag) || params_.dynamics.lag_for_hv;
    f.vehicle = step_vehicle(f.vehicle, commands[i], params_.dynamics, lagged);
    if (is_av(f.tag)) f.cacc = cacc_next[i];
  }
  platoon_.leader = leader;
  platoon_.step_index += 1;
  platoon_.sim_time_s = static_cast<double>(platoon_.step_index) * params_.dynamics.dt_s;

  const auto collision = detect_collision(platoon_);
  collided_ = collision.has_value();
  const bool exhausted = leader_motion_ == LeaderMotion::profile_replay &&
                         static_cast<std::size_t>(platoon_.step_index) >= profile_->steps();
  done_ = collided_ || exhausted;
  return collision;
}

RewardBreakdown Env::reward_of(std::size_t follower_index, double prev_accel,
                               const std::optional<CollisionPair>& collision,
                               Observation* obs_out) const {
  const auto obs = akhcfs::observe(platoon_, follower_index);
  const bool involved = collision && (collision->front == follower_index + 1 ||
                                      collision->rear == follower_index + 1);
  if (obs_out) *obs_out = obs;
  return step_reward(obs, platoon_.followers[follower_index].vehicle.accel_mps2, prev_accel,
                     involved, params_.reward);
}

StepResult Env::step(std::span<const double> av_actions) {
  thread_local std::vector<double> prev_accel;
  const auto collision = advance(av_actions, prev_accel);
  StepResult result;
  result.collision = collision;
  result.observations.resize(av_followers_.size());
  result.rewards.resize(av_followers_.size());
  for (std::size_t k = 0; k < av_followers_.size(); ++k) {
    const auto i = av_followers_[k];
    result.rewards[k] = reward_of(i, prev_accel[i], collision, &result.observations[k]);
  }
  result.done = done_;
  return result;
}

SlotStep Env::step_slot(std::span<const double> av_actions, std::size_t slot) {
  thread_local std::vector<double> prev_accel;
  const auto collision = advance(av_actions, prev_accel);
  const auto i = av_followers_.at(slot);
  return SlotStep{reward_of(i, prev_accel[i], collision, nullptr).total, done_};
}

void write_reward_header(std::ostream& out) { out << "step,vehicle,stab,cft,safe,eff,total\n"; }

void append_reward_rows(std::ostream& out, std::int64_t step, std::span<const std::size_t> vehicles,
                        std::span<const RewardBreakdown> rewards) {
  for (std::size_t k = 0; k < rewards.size(); ++k) {
    const auto& r = rewards[k];
    out << step << ',' << vehicles[k] << ',' << r.stability << ',' << r.comfort << ','
        << r.safety << ',' << r.efficiency << ',' << r.total << '\n';
  }
}

}  // namespace akhcfs
