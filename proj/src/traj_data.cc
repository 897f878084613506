#include "akhcfs/traj_data.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "akhcfs/errors.h"

namespace akhcfs {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  text = trim(text);
  if (text.empty()) return false;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::string row_error(std::size_t row, const std::string& what) {
  return "row " + std::to_string(row) + ": " + what;
}

// Linear interpolation of (t, y) at time `at`, searching from `hint`.
double interpolate(const std::vector<double>& t, const std::vector<double>& y, double at,
                   std::size_t& hint) {
  while (hint + 1 < t.size() && t[hint + 1] < at) ++hint;
  if (hint + 1 >= t.size()) return y.back();
  const double t0 = t[hint];
  const double t1 = t[hint + 1];
  if (at <= t0) return y[hint];
  if (at >= t1) return y[hint + 1];
  const double w = (at - t0) / (t1 - t0);
  return y[hint] + w * (y[hint + 1] - y[hint]);
}

void integrate_positions(LeaderProfile& p) {
  p.positions_m.assign(p.speeds_mps.size(), 0.0);
  for (std::size_t k = 1; k < p.speeds_mps.size(); ++k) {
    p.positions_m[k] =
        p.positions_m[k - 1] + 0.5 * (p.speeds_mps[k - 1] + p.speeds_mps[k]) * p.dt_s;
  }
}

}  // namespace

double LeaderProfile::mean_speed() const {
  if (speeds_mps.empty()) return 0.0;
  return std::accumulate(speeds_mps.begin(), speeds_mps.end(), 0.0) /
         static_cast<double>(speeds_mps.size());
}

std::vector<TrajectoryRecord> parse_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open trajectory file: " + path.string());
  return parse_trajectory_csv(in);
}

std::vector<TrajectoryRecord> parse_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("schema mismatch: missing header row");
  if (trim(line) != kTrajectoryCsvHeader) {
    throw DataError("schema mismatch: expected header '" + std::string(kTrajectoryCsvHeader) +
                    "', got '" + std::string(trim(line)) + "'");
  }

  std::vector<TrajectoryRecord> records;
  std::map<int, double> last_time;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 7) {
      throw DataError(row_error(row, "expected 7 fields, got " + std::to_string(fields.size())));
    }
    TrajectoryRecord r;
    if (!parse_number(fields[0], r.vehicle_id) || !parse_number(fields[1], r.frame) ||
        !parse_number(fields[2], r.time_s) || !parse_number(fields[3], r.position_m) ||
        !parse_number(fields[4], r.speed_mps) || !parse_number(fields[5], r.lane) ||
        !parse_number(fields[6], r.length_m)) {
      throw DataError(row_error(row, "malformed field"));
    }
    if (!std::isfinite(r.time_s) || !std::isfinite(r.position_m) || !std::isfinite(r.speed_mps) ||
        !std::isfinite(r.length_m)) {
      throw DataError(row_error(row, "non-finite value"));
    }
    if (r.speed_mps < 0.0) throw DataError(row_error(row, "negative speed"));
    if (r.length_m <= 0.0) throw DataError(row_error(row, "non-positive length"));

    auto [it, inserted] = last_time.try_emplace(r.vehicle_id, r.time_s);
    if (!inserted) {
      if (r.time_s <= it->second) {
        throw DataError(row_error(row, "time not strictly increasing for vehicle_id " +
                                           std::to_string(r.vehicle_id)));
      }
      it->second = r.time_s;
    }
    records.push_back(r);
  }
  return records;
}

std::vector<double> moving_average(std::span<const double> values, int window) {
  const int half = std::max(window, 1) / 2;
  const auto n = static_cast<int>(values.size());
  std::vector<double> out(values.size());
  for (int i = 0; i < n; ++i) {
    // Symmetric: shrink the half-width so the window stays centred at the edges.
    const int h = std::min({half, i, n - 1 - i});
    double sum = 0.0;
    for (int j = i - h; j <= i + h; ++j) sum += values[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(i)] = sum / static_cast<double>(2 * h + 1);
  }
  return out;
}

std::vector<LeaderProfile> extract_follow_events(std::span<const TrajectoryRecord> records,
                                                 const ExtractOptions& options) {
  if (!(options.dt_s > 0.0)) throw DataError("resampling step must be positive");

  std::map<int, std::vector<const TrajectoryRecord*>> by_vehicle;
  for (const auto& r : records) by_vehicle[r.vehicle_id].push_back(&r);

  std::vector<LeaderProfile> events;
  for (auto& [id, rows] : by_vehicle) {
    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto* a, const auto* b) { return a->time_s < b->time_s; });
    const int lane = rows.front()->lane;
    if (!options.lanes.contains(lane)) continue;
    const bool lane_change =
        std::any_of(rows.begin(), rows.end(), [lane](const auto* r) { return r->lane != lane; });
    if (lane_change) continue;

    const double t0 = rows.front()->time_s;
    const double span = rows.back()->time_s - t0;
    const auto steps = static_cast<std::size_t>(std::floor(span / options.dt_s + 1e-9));
    if (static_cast<double>(steps) * options.dt_s + 1e-9 < options.min_duration_s) continue;

    std::vector<double> t, x, v;
    t.reserve(rows.size());
    for (const auto* r : rows) {
      t.push_back(r->time_s);
      x.push_back(r->position_m);
      v.push_back(r->speed_mps);
    }

    LeaderProfile p;
    p.event_id = "v" + std::to_string(id);
    p.dt_s = options.dt_s;
    p.t0_s = t0;
    p.lane = lane;
    p.length_m = rows.front()->length_m;
    p.positions_m.reserve(steps + 1);
    p.speeds_mps.reserve(steps + 1);
    std::size_t hx = 0;
    std::size_t hv = 0;
    for (std::size_t k = 0; k <= steps; ++k) {
      const double at = t0 + static_cast<double>(k) * options.dt_s;
      p.positions_m.push_back(interpolate(t, x, at, hx));
      p.speeds_mps.push_back(interpolate(t, v, at, hv));
    }
    if (options.smoothing) {
      p.positions_m = moving_average(p.positions_m, options.smoothing_window);
      p.speeds_mps = moving_average(p.speeds_mps, options.smoothing_window);
    }
    const bool monotone = std::is_sorted(p.positions_m.begin(), p.positions_m.end());
    if (!monotone) continue;
    events.push_back(std::move(p));
  }
  return events;
}

std::vector<TrajectoryRecord> profiles_to_records(std::span<const LeaderProfile> profiles) {
  std::vector<TrajectoryRecord> out;
  for (const auto& p : profiles) {
    int id = 0;
    if (p.event_id.size() > 1 && p.event_id.front() == 'v') {
      parse_number(std::string_view(p.event_id).substr(1), id);
    }
    for (std::size_t k = 0; k < p.sample_count(); ++k) {
      out.push_back(TrajectoryRecord{id, static_cast<int>(k),
                                     p.t0_s + static_cast<double>(k) * p.dt_s, p.positions_m[k],
                                     p.speeds_mps[k], p.lane, p.length_m});
    }
  }
  return out;
}

SplitIndices split_indices(std::size_t count, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw DataError("train fraction must lie strictly between 0 and 1");
  }
  if (count < 2) throw DataError("need at least 2 events to split");

  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(count)));
  n_train = std::clamp<std::size_t>(n_train, 1, count - 1);

  SplitIndices split;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

TrainTestSplit split_train_test(const std::vector<LeaderProfile>& events, double train_fraction,
                                std::uint64_t seed) {
  const auto idx = split_indices(events.size(), train_fraction, seed);
  TrainTestSplit out;
  for (auto i : idx.train) out.train.push_back(events[i]);
  for (auto i : idx.test) out.test.push_back(events[i]);
  return out;
}

const char* to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::constant: return "constant";
    case SyntheticKind::sinusoidal: return "sinusoidal";
    case SyntheticKind::emergency_brake: return "emergency_brake";
    case SyntheticKind::stop_and_go: return "stop_and_go";
  }
  return "unknown";
}

LeaderProfile make_synthetic_profile(SyntheticKind kind, const SyntheticOptions& options,
                                     std::uint64_t seed, std::string event_id) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  LeaderProfile p;
  p.event_id = std::move(event_id);
  p.dt_s = options.dt_s;
  p.lane = 1 + static_cast<int>(seed % 4);
  const auto steps = static_cast<std::size_t>(std::llround(options.duration_s / options.dt_s));
  p.speeds_mps.resize(steps + 1);

  const double vmin = options.min_speed_mps;
  const double vmax = options.max_speed_mps;
  const double dt = options.dt_s;

  switch (kind) {
    case SyntheticKind::constant: {
      const double v = uniform(vmin, vmax);
      std::fill(p.speeds_mps.begin(), p.speeds_mps.end(), v);
      break;
    }
    case SyntheticKind::sinusoidal: {
      const double period = uniform(12.0, 20.0);
      const double omega = 2.0 * std::numbers::pi / period;
      // Peak acceleration amplitude * omega stays below 1.2 m/s^2.
      const double amp = std::min(uniform(1.0, 3.0), 1.2 / omega);
      const double mean = uniform(vmin + amp, std::max(vmin + amp, vmax - amp));
      const double phase = uniform(0.0, 2.0 * std::numbers::pi);
      for (std::size_t k = 0; k <= steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        p.speeds_mps[k] = std::max(0.0, mean + amp * std::sin(omega * t + phase));
      }
      break;
    }
    case SyntheticKind::emergency_brake: {
      const double cruise = uniform(0.5 * (vmin + vmax), vmax);
      const double low = uniform(0.0, 0.4 * cruise);
      const double brake = uniform(0.7 * options.max_brake_mps2, options.max_brake_mps2);
      const double t_brake = uniform(4.0, 0.35 * options.duration_s);
      const double hold = uniform(1.0, 4.0);
      const double accel = uniform(0.6, 1.2);
      double v = cruise;
      double t_low = -1.0;
      for (std::size_t k = 0; k <= steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        p.speeds_mps[k] = v;
        if (t >= t_brake && t_low < 0.0) {
          v = std::max(low, v - brake * dt);
          if (v <= low) t_low = t;
        } else if (t_low >= 0.0 && t >= t_low + hold) {
          v = std::min(cruise, v + accel * dt);
        }
      }
      break;
    }
    case SyntheticKind::stop_and_go: {
      const double high = uniform(0.5 * (vmin + vmax), vmax);
      const double low = uniform(0.0, 3.0);
      const double decel = uniform(0.8, 1.8);
      const double accel = uniform(0.6, 1.2);
      const double dwell = uniform(1.0, 3.0);
      double v = high;
      enum class Phase { cruise, slowing, dwelling, rising } phase = Phase::cruise;
      double phase_start = 0.0;
      const double cruise_time = uniform(2.0, 5.0);
      for (std::size_t k = 0; k <= steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        p.speeds_mps[k] = v;
        switch (phase) {
          case Phase::cruise:
            if (t - phase_start >= cruise_time) { phase = Phase::slowing; phase_start = t; }
            break;
          case Phase::slowing:
            v = std::max(low, v - decel * dt);
            if (v <= low) { phase = Phase::dwelling; phase_start = t; }
            break;
          case Phase::dwelling:
            if (t - phase_start >= dwell) { phase = Phase::rising; phase_start = t; }
            break;
          case Phase::rising:
            v = std::min(high, v + accel * dt);
            if (v >= high) { phase = Phase::cruise; phase_start = t; }
            break;
        }
      }
      break;
    }
  }
  integrate_positions(p);
  return p;
}

std::vector<LeaderProfile> make_synthetic_set(std::size_t count, const SyntheticOptions& options,
                                              std::uint64_t seed, const std::string& prefix) {
  constexpr SyntheticKind kinds[] = {SyntheticKind::constant, SyntheticKind::sinusoidal,
                                     SyntheticKind::emergency_brake, SyntheticKind::stop_and_go};
  std::mt19937_64 seeder(seed);
  std::vector<LeaderProfile> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    out.push_back(make_synthetic_profile(kinds[k % 4], options, seeder(),
                                         prefix + std::to_string(k)));
  }
  return out;
}

nlohmann::json profile_to_json(const LeaderProfile& profile) {
  return nlohmann::json{{"event_id", profile.event_id},       {"dt_s", profile.dt_s},
                        {"t0_s", profile.t0_s},               {"positions_m", profile.positions_m},
                        {"speeds_mps", profile.speeds_mps},   {"lane", profile.lane},
                        {"length_m", profile.length_m}};
}

LeaderProfile profile_from_json(const nlohmann::json& j) {
  try {
    LeaderProfile p;
    p.event_id = j.at("event_id").get<std::string>();
    p.dt_s = j.at("dt_s").get<double>();
    p.t0_s = j.at("t0_s").get<double>();
    p.positions_m = j.at("positions_m").get<std::vector<double>>();
    p.speeds_mps = j.at("speeds_mps").get<std::vector<double>>();
    p.lane = j.value("lane", 0);
    p.length_m = j.value("length_m", 5.0);
    if (p.positions_m.size() != p.speeds_mps.size()) {
      throw DataError("profile " + p.event_id + ": positions/speeds length mismatch");
    }
    if (!(p.dt_s > 0.0)) throw DataError("profile " + p.event_id + ": dt_s must be positive");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed leader profile: ") + e.what());
  }
}

void save_profiles(const std::filesystem::path& path, std::span<const LeaderProfile> profiles) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : profiles) arr.push_back(profile_to_json(p));
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << arr.dump() << '\n';
}

std::vector<LeaderProfile> load_profiles(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open profile file: " + path.string());
  nlohmann::json arr;
  try {
    in >> arr;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("cannot parse " + path.string() + ": " + e.what());
  }
  if (!arr.is_array()) throw DataError(path.string() + ": expected a JSON array of profiles");
  std::vector<LeaderProfile> out;
  for (const auto& j : arr) out.push_back(profile_from_json(j));
  return out;
}

}  // namespace akhcfs
