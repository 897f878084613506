#include "akhcfs/vehicle_dynamics.h"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "akhcfs/errors.h"

namespace akhcfs {

double apply_actuator_lag(double a_actual, double a_cmd, double tau, double dt, double a_bound) {
  require_finite(a_actual, "actual acceleration");
  require_finite(a_cmd, "commanded acceleration");
  if (!(tau > 0.0) || !(dt > 0.0)) throw NumericError("actuator lag needs tau > 0 and dt > 0");
  const double ratio = std::min(1.0, dt / tau);
  const double next = a_actual + ratio * (a_cmd - a_actual);
  return std::clamp(next, -a_bound, a_bound);
}

VehicleState step_vehicle(const VehicleState& state, double a_cmd, const DynamicsParams& params,
                          bool lagged) {
  const double dt = params.dt_s;
  double a = lagged ? apply_actuator_lag(state.accel_mps2, a_cmd, params.tau_s, dt, params.a_bound)
                    : std::clamp(a_cmd, -params.a_bound, params.a_bound);
  double v = state.speed_mps + a * dt;
  if (v < 0.0) {
    a = -state.speed_mps / dt;
    v = 0.0;
  }
  VehicleState next = state;
  next.position_m = state.position_m + state.speed_mps * dt + 0.5 * a * dt * dt;
  next.speed_mps = v;
  next.accel_mps2 = a;
  return next;
}

double clear_distance(const VehicleState& front, const VehicleState& ego) {
  return front.position_m - ego.position_m - front.length_m;
}

bool is_av(ControllerTag tag) { return tag != ControllerTag::hv_idm; }

const char* to_string(ControllerTag tag) {
  switch (tag) {
    case ControllerTag::av_td3: return "AV_TD3";
    case ControllerTag::av_hcfs: return "AV_HCFS";
    case ControllerTag::av_akhcfs: return "AV_AKHCFS";
    case ControllerTag::hv_idm: return "HV_IDM";
  }
  return "?";
}

std::optional<CollisionPair> detect_collision(const PlatoonState& platoon) {
  for (std::size_t i = 1; i < platoon.vehicle_count(); ++i) {
    if (clear_distance(platoon.vehicle(i - 1), platoon.vehicle(i)) <= 0.0) {
      return CollisionPair{i - 1, i};
    }
  }
  return std::nullopt;
}

void write_trajectory_header(std::ostream& out) {
  out << "step,time_s,vehicle,position_m,speed_mps,accel_mps2,clear_distance_m\n";
}

void append_trajectory_rows(std::ostream& out, const PlatoonState& platoon) {
  for (std::size_t i = 0; i < platoon.vehicle_count(); ++i) {
    const auto& v = platoon.vehicle(i);
    out << platoon.step_index << ',' << platoon.sim_time_s << ',' << i << ',' << v.position_m
        << ',' << v.speed_mps << ',' << v.accel_mps2 << ',';
    if (i > 0) out << clear_distance(platoon.vehicle(i - 1), v);
    out << '\n';
  }
}

}  // namespace akhcfs
