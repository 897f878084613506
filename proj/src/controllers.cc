#include "akhcfs/controllers.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "akhcfs/errors.h"

namespace akhcfs {

namespace {

double spacing_error(double x_front, double x_ego, double front_length, double v_ref,
                     double t_hw) {
  return x_front - x_ego - front_length - t_hw * v_ref;
}

}  // namespace

CaccOutput cacc_accel(double x_front, double x_ego, double front_length, double v_ego,
                      const CaccState& state, const CaccParams& params) {
  require_finite(x_front, "cacc x_front");
  require_finite(x_ego, "cacc x_ego");
  require_finite(v_ego, "cacc v_ego");
  require_finite(state.v_cmd_prev, "cacc v_cmd_prev");
  require_finite(state.e_prev, "cacc e_prev");
  if (!(params.dt_s > 0.0)) throw NumericError("cacc dt must be positive");

  const double v_ref =
      params.feedback == CaccFeedback::commanded_speed ? state.v_cmd_prev : v_ego;
  const double e = spacing_error(x_front, x_ego, front_length, v_ref, params.t_hw_s);
  const double de = (e - state.e_prev) / params.dt_s;
  const double v_cmd = v_ref + params.kp * e + params.kd * de;
  const double raw = (v_cmd - v_ref) / params.dt_s;

  CaccOutput out;
  out.accel = std::clamp(raw, -params.a_bound, params.a_bound);
  out.state = CaccState{v_cmd, e};
  return out;
}

CaccState cacc_initial_state(double x_front, double x_ego, double front_length, double v_ego,
                             const CaccParams& params) {
  return CaccState{v_ego, spacing_error(x_front, x_ego, front_length, v_ego, params.t_hw_s)};
}

double idm_desired_gap(double v, double dv, const IdmParams& params) {
  const double dynamic =
      params.t_headway_s * v + v * dv / (2.0 * std::sqrt(params.a_max * params.b));
  return params.d0_m + std::max(0.0, dynamic);
}

double idm_accel(double v, double dv, double gap, const IdmParams& params, double a_bound) {
  if (!(gap > 0.0)) throw std::domain_error("idm gap must be positive (collision)");
  const double s_star = idm_desired_gap(v, dv, params);
  const double free_term = std::pow(v / params.v_desire_mps, 4);
  const double gap_term = (s_star / gap) * (s_star / gap);
  const double a = params.a_max * (1.0 - free_term - gap_term);
  return std::clamp(a, -a_bound, a_bound);
}

double idm_equilibrium_gap(double v, const IdmParams& params) {
  const double free_term = std::pow(v / params.v_desire_mps, 4);
  return idm_desired_gap(v, 0.0, params) / std::sqrt(1.0 - free_term);
}

}  // namespace akhcfs
