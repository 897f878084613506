#include "akhcfs/config.h"

#include <fstream>
#include <sstream>

#include "akhcfs/errors.h"

namespace akhcfs {

using nlohmann::json;

const char* to_string(Algorithm algo) {
  switch (algo) {
    case Algorithm::td3: return "td3";
    case Algorithm::hcfs: return "hcfs";
    case Algorithm::akhcfs: return "akhcfs";
  }
  return "?";
}

Algorithm parse_algorithm(const std::string& name) {
  if (name == "td3") return Algorithm::td3;
  if (name == "hcfs") return Algorithm::hcfs;
  if (name == "akhcfs") return Algorithm::akhcfs;
  throw ConfigError("unknown algorithm '" + name + "' (expected td3, hcfs or akhcfs)");
}

ControllerTag av_tag(Algorithm algo) {
  switch (algo) {
    case Algorithm::td3: return ControllerTag::av_td3;
    case Algorithm::hcfs: return ControllerTag::av_hcfs;
    case Algorithm::akhcfs: return ControllerTag::av_akhcfs;
  }
  return ControllerTag::av_td3;
}

std::filesystem::path RunConfig::checkpoint_path() const {
  if (!paths.checkpoint.empty()) return paths.checkpoint;
  return std::filesystem::path(paths.output) / "checkpoint.json";
}

void propagate_shared(RunConfig& c) {
  const double dt = c.env.dynamics.dt_s;
  const double a_bound = c.env.dynamics.a_bound;
  c.env.cacc.dt_s = dt;
  c.env.cacc.a_bound = a_bound;
  c.env.reward.dt_s = dt;
  c.env.reward.a_bound = a_bound;
  c.td3.a_bound = a_bound;
  c.data.extract.dt_s = dt;
  c.data.synthetic_options.dt_s = dt;
}

namespace {

const char* feedback_name(CaccFeedback f) {
  return f == CaccFeedback::commanded_speed ? "commanded_speed" : "measured_speed";
}

CaccFeedback feedback_from(const std::string& s) {
  if (s == "commanded_speed") return CaccFeedback::commanded_speed;
  if (s == "measured_speed") return CaccFeedback::measured_speed;
  throw ConfigError("cacc.feedback must be commanded_speed or measured_speed, got '" + s + "'");
}

const char* motion_name(LeaderMotion m) {
  switch (m) {
    case LeaderMotion::profile_replay: return "profile_replay";
    case LeaderMotion::constant_velocity: return "constant_velocity";
    case LeaderMotion::constant_acceleration: return "constant_acceleration";
  }
  return "?";
}

LeaderMotion motion_from(const std::string& s) {
  if (s == "profile_replay") return LeaderMotion::profile_replay;
  if (s == "constant_velocity") return LeaderMotion::constant_velocity;
  if (s == "constant_acceleration") return LeaderMotion::constant_acceleration;
  throw ConfigError("unknown leader_prediction '" + s + "'");
}

bool same_kind(const json& base, const json& user) {
  if (base.is_number_integer()) return user.is_number_integer();
  if (base.is_number()) return user.is_number();
  if (base.is_boolean()) return user.is_boolean();
  if (base.is_string()) return user.is_string();
  if (base.is_array()) return user.is_array();
  return base.type() == user.type();
}

void overlay(json& base, const json& user, const std::string& prefix) {
  if (!user.is_object()) throw ConfigError("config section '" + prefix + "' must be an object");
  for (const auto& [key, value] : user.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) throw ConfigError("unknown config key '" + path + "'");
    json& slot = base[key];
    if (slot.is_object()) {
      overlay(slot, value, path);
    } else {
      if (!same_kind(slot, value)) {
        throw ConfigError("config key '" + path + "' expects " + std::string(slot.type_name()) +
                          ", got " + value.type_name());
      }
      slot = value;
    }
  }
}

template <typename T>
T get(const json& j, const char* key, const std::string& section) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + section + "." + key + "': " + e.what());
  }
}

}  // namespace

json config_to_json(const RunConfig& c) {
  const auto& d = c.env.dynamics;
  const auto& r = c.env.reward;
  const auto& m = c.fusion.mcts;
  json td3 = hyper_to_json(c.td3);
  td3.erase("a_bound");
  return json{
      {"paths",
       {{"data", c.paths.data},
        {"profiles", c.paths.profiles},
        {"output", c.paths.output},
        {"checkpoint", c.paths.checkpoint}}},
      {"algorithm", to_string(c.algorithm)},
      {"seed", c.seed},
      {"jobs", c.jobs},
      {"dynamics",
       {{"dt_s", d.dt_s},
        {"tau_s", d.tau_s},
        {"a_bound", d.a_bound},
        {"vehicle_length_m", d.vehicle_length_m},
        {"lag_for_hv", d.lag_for_hv}}},
      {"cacc",
       {{"kp", c.env.cacc.kp},
        {"kd", c.env.cacc.kd},
        {"t_hw_s", c.env.cacc.t_hw_s},
        {"feedback", feedback_name(c.env.cacc.feedback)}}},
      {"idm",
       {{"a_max", c.env.idm.a_max},
        {"d0_m", c.env.idm.d0_m},
        {"b", c.env.idm.b},
        {"v_desire_mps", c.env.idm.v_desire_mps},
        {"t_headway_s", c.env.idm.t_headway_s}}},
      {"reward",
       {{"v_max_mps", r.v_max_mps},
        {"x_max_m", r.x_max_m},
        {"ttc_threshold_s", r.ttc_threshold_s},
        {"safety_floor", r.safety_floor},
        {"t_desire_s", r.t_desire_s},
        {"collision_penalty", r.collision_penalty}}},
      {"env",
       {{"initial_headway_s", c.env.initial_headway_s},
        {"d_min_m", c.env.d_min_m},
        {"min_profile_s", c.env.min_profile_s}}},
      {"td3", td3},
      {"fusion",
       {{"horizon", c.fusion.horizon},
        {"gamma", c.fusion.gamma},
        {"leader_prediction", motion_name(c.fusion.leader_prediction)},
        {"q_measure", c.fusion.kalman.q_measure},
        {"r_measure", c.fusion.kalman.r_measure},
        {"a1", c.fusion.kalman.a1}}},
      {"mcts",
       {{"iterations", m.iterations},
        {"exploration", m.exploration},
        {"exploration_decay", m.exploration_decay},
        {"epsilon", m.epsilon},
        {"candidates", m.candidates},
        {"gamma", m.gamma},
        {"rollout_to_depth", m.rollout_to_depth}}},
      {"metrics",
       {{"ttc_band_s", c.metrics.ttc_band_s},
        {"ttc_bin_width_s", c.metrics.ttc_bin_width_s},
        {"jerk_threshold", c.metrics.jerk_threshold},
        {"speed_bin_width_mps", c.metrics.speed_bin_width_mps},
        {"write_svg", c.metrics.write_svg}}},
      {"data",
       {{"lanes", std::vector<int>(c.data.extract.lanes.begin(), c.data.extract.lanes.end())},
        {"min_duration_s", c.data.extract.min_duration_s},
        {"smoothing", c.data.extract.smoothing},
        {"smoothing_window", c.data.extract.smoothing_window},
        {"train_fraction", c.data.train_fraction},
        {"synthetic", c.data.synthetic},
        {"synthetic_train", c.data.synthetic_train},
        {"synthetic_test", c.data.synthetic_test},
        {"synthetic_duration_s", c.data.synthetic_options.duration_s},
        {"synthetic_min_speed_mps", c.data.synthetic_options.min_speed_mps},
        {"synthetic_max_speed_mps", c.data.synthetic_options.max_speed_mps},
        {"synthetic_max_brake_mps2", c.data.synthetic_options.max_brake_mps2}}},
      {"train",
       {{"episodes", c.train.episodes},
        {"max_env_steps", c.train.max_env_steps},
        {"followers", c.train.followers},
        {"warmup_steps", c.train.warmup_steps},
        {"checkpoint_every", c.train.checkpoint_every},
        {"mix", c.train.mix}}},
      {"evaluate",
       {{"followers", c.evaluate.followers},
        {"max_events", c.evaluate.max_events},
        {"mix", c.evaluate.mix},
        {"log_decisions", c.evaluate.log_decisions}}}};
}

RunConfig config_from_json(const json& user) {
  json merged = config_to_json(RunConfig{});
  overlay(merged, user, "");
  RunConfig c;
  const json& p = merged["paths"];
  c.paths.data = get<std::string>(p, "data", "paths");
  c.paths.profiles = get<std::string>(p, "profiles", "paths");
  c.paths.output = get<std::string>(p, "output", "paths");
  c.paths.checkpoint = get<std::string>(p, "checkpoint", "paths");
  c.algorithm = parse_algorithm(merged["algorithm"].get<std::string>());
  if (merged["seed"].is_number_integer() && merged["seed"].get<std::int64_t>() < 0 &&
      !merged["seed"].is_number_unsigned()) {
    throw ConfigError("seed must be non-negative");
  }
  c.seed = merged["seed"].get<std::uint64_t>();
  c.jobs = merged["jobs"].get<int>();

  const json& d = merged["dynamics"];
  c.env.dynamics.dt_s = get<double>(d, "dt_s", "dynamics");
  c.env.dynamics.tau_s = get<double>(d, "tau_s", "dynamics");
  c.env.dynamics.a_bound = get<double>(d, "a_bound", "dynamics");
  c.env.dynamics.vehicle_length_m = get<double>(d, "vehicle_length_m", "dynamics");
  c.env.dynamics.lag_for_hv = get<bool>(d, "lag_for_hv", "dynamics");

  const json& cc = merged["cacc"];
  c.env.cacc.kp = get<double>(cc, "kp", "cacc");
  c.env.cacc.kd = get<double>(cc, "kd", "cacc");
  c.env.cacc.t_hw_s = get<double>(cc, "t_hw_s", "cacc");
  c.env.cacc.feedback = feedback_from(get<std::string>(cc, "feedback", "cacc"));

  const json& idm = merged["idm"];
  c.env.idm.a_max = get<double>(idm, "a_max", "idm");
  c.env.idm.d0_m = get<double>(idm, "d0_m", "idm");
  c.env.idm.b = get<double>(idm, "b", "idm");
  c.env.idm.v_desire_mps = get<double>(idm, "v_desire_mps", "idm");
  c.env.idm.t_headway_s = get<double>(idm, "t_headway_s", "idm");

  const json& r = merged["reward"];
  c.env.reward.v_max_mps = get<double>(r, "v_max_mps", "reward");
  c.env.reward.x_max_m = get<double>(r, "x_max_m", "reward");
  c.env.reward.ttc_threshold_s = get<double>(r, "ttc_threshold_s", "reward");
  c.env.reward.safety_floor = get<double>(r, "safety_floor", "reward");
  c.env.reward.t_desire_s = get<double>(r, "t_desire_s", "reward");
  c.env.reward.collision_penalty = get<double>(r, "collision_penalty", "reward");

  const json& e = merged["env"];
  c.env.initial_headway_s = get<double>(e, "initial_headway_s", "env");
  c.env.d_min_m = get<double>(e, "d_min_m", "env");
  c.env.min_profile_s = get<double>(e, "min_profile_s", "env");

  json td3 = merged["td3"];
  td3["a_bound"] = c.env.dynamics.a_bound;
  try {
    c.td3 = hyper_from_json(td3);
  } catch (const std::exception& ex) {
    throw ConfigError(std::string("td3 block: ") + ex.what());
  }

  const json& f = merged["fusion"];
  c.fusion.horizon = get<int>(f, "horizon", "fusion");
  c.fusion.gamma = get<double>(f, "gamma", "fusion");
  c.fusion.leader_prediction = motion_from(get<std::string>(f, "leader_prediction", "fusion"));
  c.fusion.kalman.q_measure = get<double>(f, "q_measure", "fusion");
  c.fusion.kalman.r_measure = get<double>(f, "r_measure", "fusion");
  c.fusion.kalman.a1 = get<double>(f, "a1", "fusion");

  const json& m = merged["mcts"];
  c.fusion.mcts.iterations = get<int>(m, "iterations", "mcts");
  c.fusion.mcts.exploration = get<double>(m, "exploration", "mcts");
  c.fusion.mcts.exploration_decay = get<double>(m, "exploration_decay", "mcts");
  c.fusion.mcts.epsilon = get<double>(m, "epsilon", "mcts");
  c.fusion.mcts.candidates = get<std::vector<double>>(m, "candidates", "mcts");
  c.fusion.mcts.gamma = get<double>(m, "gamma", "mcts");
  c.fusion.mcts.rollout_to_depth = get<bool>(m, "rollout_to_depth", "mcts");

  const json& mt = merged["metrics"];
  c.metrics.ttc_band_s = get<double>(mt, "ttc_band_s", "metrics");
  c.metrics.ttc_bin_width_s = get<double>(mt, "ttc_bin_width_s", "metrics");
  c.metrics.jerk_threshold = get<double>(mt, "jerk_threshold", "metrics");
  c.metrics.speed_bin_width_mps = get<double>(mt, "speed_bin_width_mps", "metrics");
  c.metrics.write_svg = get<bool>(mt, "write_svg", "metrics");

  const json& dt = merged["data"];
  const auto lanes = get<std::vector<int>>(dt, "lanes", "data");
  c.data.extract.lanes = std::set<int>(lanes.begin(), lanes.end());
  c.data.extract.min_duration_s = get<double>(dt, "min_duration_s", "data");
  c.data.extract.smoothing = get<bool>(dt, "smoothing", "data");
  c.data.extract.smoothing_window = get<int>(dt, "smoothing_window", "data");
  c.data.train_fraction = get<double>(dt, "train_fraction", "data");
  c.data.synthetic = get<bool>(dt, "synthetic", "data");
  c.data.synthetic_train = get<int>(dt, "synthetic_train", "data");
  c.data.synthetic_test = get<int>(dt, "synthetic_test", "data");
  c.data.synthetic_options.duration_s = get<double>(dt, "synthetic_duration_s", "data");
  c.data.synthetic_options.min_speed_mps = get<double>(dt, "synthetic_min_speed_mps", "data");
  c.data.synthetic_options.max_speed_mps = get<double>(dt, "synthetic_max_speed_mps", "data");
  c.data.synthetic_options.max_brake_mps2 = get<double>(dt, "synthetic_max_brake_mps2", "data");

  const json& t = merged["train"];
  c.train.episodes = get<int>(t, "episodes", "train");
  c.train.max_env_steps = get<std::int64_t>(t, "max_env_steps", "train");
  c.train.followers = get<int>(t, "followers", "train");
  c.train.warmup_steps = get<int>(t, "warmup_steps", "train");
  c.train.checkpoint_every = get<int>(t, "checkpoint_every", "train");
  c.train.mix = get<std::string>(t, "mix", "train");

  const json& ev = merged["evaluate"];
  c.evaluate.followers = get<int>(ev, "followers", "evaluate");
  c.evaluate.max_events = get<int>(ev, "max_events", "evaluate");
  c.evaluate.mix = get<std::string>(ev, "mix", "evaluate");
  c.evaluate.log_decisions = get<bool>(ev, "log_decisions", "evaluate");

  propagate_shared(c);
  validate(c);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

void check_mix(const std::string& mix, int followers, const char* key) {
  if (mix.empty()) return;
  require(static_cast<int>(mix.size()) == followers,
          std::string(key) + " length must equal the follower count");
  require(mix.find_first_not_of("AH") == std::string::npos,
          std::string(key) + " may only contain 'A' and 'H'");
  require(mix.find('A') != std::string::npos, std::string(key) + " needs at least one 'A'");
}

}  // namespace

void validate(const RunConfig& c) {
  require(c.jobs >= 1, "jobs must be >= 1");
  require(c.env.dynamics.dt_s > 0.0, "dynamics.dt_s must be positive");
  require(c.env.dynamics.tau_s >= 0.0, "dynamics.tau_s must be non-negative");
  require(c.env.dynamics.a_bound > 0.0, "dynamics.a_bound must be positive");
  require(c.env.dynamics.vehicle_length_m > 0.0, "dynamics.vehicle_length_m must be positive");
  require(c.env.reward.v_max_mps > 0.0 && c.env.reward.x_max_m > 0.0,
          "reward normalizers must be positive");
  require(c.env.reward.ttc_threshold_s > 0.0, "reward.ttc_threshold_s must be positive");
  require(c.td3.learning_rate > 0.0, "td3.learning_rate must be positive");
  require(c.td3.policy_delay >= 1, "td3.policy_delay must be >= 1");
  require(c.td3.batch_size >= 1 && c.td3.memory_size >= c.td3.batch_size,
          "td3.memory_size must be >= td3.batch_size >= 1");
  require(c.td3.gamma >= 0.0 && c.td3.gamma <= 1.0, "td3.gamma must lie in [0, 1]");
  require(c.td3.tau > 0.0 && c.td3.tau <= 1.0, "td3.tau must lie in (0, 1]");
  require(!c.td3.hidden.empty(), "td3.hidden needs at least one layer");
  for (int h : c.td3.hidden) require(h >= 1, "td3.hidden sizes must be positive");
  require(c.fusion.horizon >= 1, "fusion.horizon must be >= 1");
  require(c.fusion.kalman.q_measure >= 0.0 && c.fusion.kalman.r_measure > 0.0 &&
              c.fusion.kalman.a1 >= 0.0,
          "fusion Kalman constants must be non-negative (r_measure positive)");
  require(c.fusion.mcts.iterations > 0, "mcts.iterations must be positive");
  require(!c.fusion.mcts.candidates.empty(), "mcts.candidates must not be empty");
  for (double r : c.fusion.mcts.candidates) require(r > 0.0, "mcts.candidates must be positive");
  require(c.fusion.mcts.epsilon >= 0.0 && c.fusion.mcts.epsilon <= 1.0,
          "mcts.epsilon must lie in [0, 1]");
  require(c.metrics.ttc_bin_width_s > 0.0 && c.metrics.ttc_band_s > 0.0,
          "metrics TTC band and bin width must be positive");
  require(c.metrics.speed_bin_width_mps > 0.0, "metrics.speed_bin_width_mps must be positive");
  require(c.data.train_fraction > 0.0 && c.data.train_fraction < 1.0,
          "data.train_fraction must lie in (0, 1)");
  require(c.data.synthetic_train >= 1 && c.data.synthetic_test >= 1,
          "synthetic profile counts must be >= 1");
  require(c.train.episodes >= 0 && c.train.max_env_steps >= 0 && c.train.warmup_steps >= 0 &&
              c.train.checkpoint_every >= 0,
          "train budgets must be non-negative");
  require(c.train.followers >= 1 && c.train.followers <= 12, "train.followers must lie in [1, 12]");
  require(c.evaluate.followers >= 1 && c.evaluate.followers <= 12,
          "evaluate.followers must lie in [1, 12]");
  require(c.evaluate.max_events >= 0, "evaluate.max_events must be non-negative");
  check_mix(c.train.mix, c.train.followers, "train.mix");
  check_mix(c.evaluate.mix, c.evaluate.followers, "evaluate.mix");
}

namespace {

json leaf_schema(const json& value, const std::string& path) {
  json s;
  if (value.is_boolean()) {
    s["type"] = "boolean";
  } else if (value.is_number_integer()) {
    s["type"] = "integer";
  } else if (value.is_number()) {
    s["type"] = "number";
  } else if (value.is_string()) {
    s["type"] = "string";
  } else if (value.is_array()) {
    s["type"] = "array";
    s["items"] = {{"type", path == "data.lanes" || path == "td3.hidden" ? "integer" : "number"}};
  }
  if (path == "algorithm") s["enum"] = {"td3", "hcfs", "akhcfs"};
  if (path == "cacc.feedback") s["enum"] = {"commanded_speed", "measured_speed"};
  if (path == "td3.optimizer") s["enum"] = {"sgd", "adam"};
  if (path == "fusion.leader_prediction") {
    s["enum"] = {"profile_replay", "constant_velocity", "constant_acceleration"};
  }
  s["default"] = value;
  return s;
}

json object_schema(const json& value, const std::string& prefix) {
  json props = json::object();
  for (const auto& [key, child] : value.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    props[key] = child.is_object() ? object_schema(child, path) : leaf_schema(child, path);
  }
  return json{{"type", "object"}, {"additionalProperties", false}, {"properties", props}};
}

void describe(const json& value, const std::string& prefix, std::ostringstream& out) {
  for (const auto& [key, child] : value.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (child.is_object()) {
      describe(child, path, out);
    } else {
      out << "  " << path << " = " << child.dump() << '\n';
    }
  }
}

}  // namespace

json config_schema() {
  json s = object_schema(config_to_json(RunConfig{}), "");
  json out{{"$schema", "https://json-schema.org/draft/2020-12/schema"},
           {"title", "akhcfs run configuration"}};
  out.update(s);
  return out;
}

std::string describe_config_keys() {
  std::ostringstream out;
  describe(config_to_json(RunConfig{}), "", out);
  return out.str();
}

}  // namespace akhcfs
