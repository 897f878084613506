#pragma once

namespace akhcfs {

// Which speed closes the CACC loop in the spacing error's headway term.
enum class CaccFeedback {
  commanded_speed,  // previous commanded speed v_cmd(k-1), kept unclamped
  measured_speed,   // measured ego speed
};

struct CaccParams {
  double kp = 0.45;
  double kd = 0.25;
  double t_hw_s = 0.6;
  double dt_s = 0.1;
  double a_bound = 3.0;
  CaccFeedback feedback = CaccFeedback::measured_speed;
};

struct CaccState {
  double v_cmd_prev = 0.0;
  double e_prev = 0.0;
};

struct CaccOutput {
  double accel = 0.0;  // clamped to [-a_bound, a_bound]
  CaccState state;     // carries the unclamped speed command
};

// Gap-regulating CACC law:
//   e    = x_front - x_ego - L - t_hw * v_ref
//   de   = (e - e_prev) / dt
//   v_cmd = v_cmd_prev + kp * e + kd * de
//   a    = clamp((v_cmd - v_cmd_prev) / dt)
// v_ref is the measured ego speed by default, or the previous speed command (see CaccFeedback).
// The headway term would otherwise need v_cmd itself; a closed-form solve of that
// implicit equation is the alternative to this causal substitution.
CaccOutput cacc_accel(double x_front, double x_ego, double front_length, double v_ego,
                      const CaccState& state, const CaccParams& params);

// State for a follower already at rest in the loop: command equals the measured
// speed and e_prev equals the current spacing error, so the first de is zero.
CaccState cacc_initial_state(double x_front, double x_ego, double front_length, double v_ego,
                             const CaccParams& params);

struct IdmParams {
  double a_max = 3.79;
  double d0_m = 1.08;
  double b = 3.5;
  double v_desire_mps = 39.48;
  double t_headway_s = 1.22;
};

// Desired gap d*(v, dv) = d0 + max(0, T v + v dv / (2 sqrt(a_max b))), dv = v_ego - v_front.
double idm_desired_gap(double v, double dv, const IdmParams& params);

// Throws std::domain_error when d <= 0 (vehicles already overlap).
double idm_accel(double v, double dv, double gap, const IdmParams& params, double a_bound);

// Gap at which idm_accel(v, 0, gap) is zero.
double idm_equilibrium_gap(double v, const IdmParams& params);

}  // namespace akhcfs
