#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "akhcfs/controllers.h"

namespace akhcfs {

// Longitudinal state; position is the front bumper.
struct VehicleState {
  double position_m = 0.0;
  double speed_mps = 0.0;
  double accel_mps2 = 0.0;
  double length_m = 5.0;
};

struct DynamicsParams {
  double dt_s = 0.1;
  double tau_s = 0.4;
  double a_bound = 3.0;
  double vehicle_length_m = 5.0;
  // First-order lag also applies to IDM-driven vehicles.
  bool lag_for_hv = true;
};

// Explicit-Euler step of tau * da/dt + a = a_cmd, clamped to +-a_bound.
// When dt >= tau the step lands exactly on a_cmd (no overshoot).
double apply_actuator_lag(double a_actual, double a_cmd, double tau, double dt, double a_bound);

// Advances one vehicle by dt. Speed never goes negative; when it would, the
// acceleration is replaced by the value that stops the vehicle exactly.
VehicleState step_vehicle(const VehicleState& state, double a_cmd, const DynamicsParams& params,
                          bool lagged = true);

// Front bumper of `front` minus front bumper of `ego` minus the front length.
// Negative values mean the vehicles overlap.
double clear_distance(const VehicleState& front, const VehicleState& ego);

enum class ControllerTag { av_td3, av_hcfs, av_akhcfs, hv_idm };

bool is_av(ControllerTag tag);
const char* to_string(ControllerTag tag);

struct Follower {
  VehicleState vehicle;
  ControllerTag tag = ControllerTag::hv_idm;
  CaccState cacc;  // only meaningful for AVs
};

struct PlatoonState {
  VehicleState leader;
  std::vector<Follower> followers;
  double sim_time_s = 0.0;
  std::int64_t step_index = 0;

  // 0 is the leader, i >= 1 is follower i.
  const VehicleState& vehicle(std::size_t index) const {
    return index == 0 ? leader : followers[index - 1].vehicle;
  }
  std::size_t vehicle_count() const { return followers.size() + 1; }
};

// Vehicle indices (0 = leader) of an overlapping adjacent pair.
struct CollisionPair {
  std::size_t front = 0;
  std::size_t rear = 0;
  bool operator==(const CollisionPair&) const = default;
};

// First adjacent pair (scanning from the leader backwards) with clear distance <= 0.
std::optional<CollisionPair> detect_collision(const PlatoonState& platoon);

// Per-episode dump: step,time_s,vehicle,position_m,speed_mps,accel_mps2,clear_distance_m
// (clear distance is empty for the leader).
void write_trajectory_header(std::ostream& out);
void append_trajectory_rows(std::ostream& out, const PlatoonState& platoon);

}  // namespace akhcfs
