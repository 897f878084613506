#include "akhcfs/app.h"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <mutex>
#include <thread>

#include "akhcfs/errors.h"
#include "akhcfs/fusion.h"

namespace akhcfs {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t h = splitmix64(base);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  return splitmix64(h ^ c);
}

std::vector<ControllerTag> parse_mix(const std::string& mix, Algorithm algo) {
  if (mix.empty()) throw ConfigError("empty mix");
  std::vector<ControllerTag> tags;
  bool any_av = false;
  for (char ch : mix) {
    if (ch == 'A' || ch == 'a') {
      tags.push_back(av_tag(algo));
      any_av = true;
    } else if (ch == 'H' || ch == 'h') {
      tags.push_back(ControllerTag::hv_idm);
    } else {
      throw ConfigError("mix '" + mix + "' may only contain A and H");
    }
  }
  if (!any_av) throw ConfigError("mix '" + mix + "' has no AV");
  return tags;
}

DataSets load_datasets(const RunConfig& config) {
  DataSets sets;
  if (config.data.synthetic) {
    sets.train = make_synthetic_set(static_cast<std::size_t>(config.data.synthetic_train),
                                    config.data.synthetic_options, derive_seed(config.seed, 1),
                                    "train");
    sets.test = make_synthetic_set(static_cast<std::size_t>(config.data.synthetic_test),
                                   config.data.synthetic_options, derive_seed(config.seed, 2),
                                   "test");
    return sets;
  }
  std::vector<LeaderProfile> all;
  if (!config.paths.profiles.empty()) {
    all = load_profiles(config.paths.profiles);
  } else if (!config.paths.data.empty()) {
    const auto records = parse_trajectory_csv(config.paths.data);
    all = extract_follow_events(records, config.data.extract);
  } else {
    throw DataError("no data: set paths.profiles or paths.data, or use --synthetic");
  }
  if (all.size() < 2) throw DataError("need at least two events to split into train and test");
  auto split = split_train_test(all, config.data.train_fraction, config.seed);
  sets.train = std::move(split.train);
  sets.test = std::move(split.test);
  return sets;
}

Policy actor_policy(const Td3Agent& agent, const RewardParams& reward) {
  return [&agent, reward](const Observation& obs) { return agent.act(obs.normalized(reward)); };
}

namespace {

struct SeriesRecorder {
  std::vector<FollowerSeries> series;

  SeriesRecorder(const std::vector<ControllerTag>& tags) : series(tags.size()) {
    for (std::size_t i = 0; i < tags.size(); ++i) series[i].is_av = is_av(tags[i]);
  }

  void record(const Env& env) {
    const auto& platoon = env.platoon();
    for (std::size_t i = 0; i < series.size(); ++i) {
      const auto obs = env.observe(i);
      const auto& v = platoon.followers[i].vehicle;
      series[i].accel.push_back(v.accel_mps2);
      series[i].speed.push_back(v.speed_mps);
      series[i].x_error.push_back(obs.x_error);
      series[i].v_error.push_back(obs.v_error);
    }
  }

  void mark(const CollisionPair& pair) {
    for (std::size_t idx : {pair.front, pair.rear}) {
      if (idx >= 1 && idx <= series.size()) series[idx - 1].collided = true;
    }
  }
};

void write_hcfs_line(std::ostream& out, std::int64_t step, std::size_t vehicle,
                     const HcfsDecision& d) {
  json j{{"step", step},           {"vehicle", vehicle},   {"r_td3", d.r_td3},
         {"r_cacc", d.r_cacc},     {"a_td3", d.a_td3},     {"a_cacc", d.a_cacc},
         {"a_fused", d.action}};
  out << j.dump() << '\n';
}

// Executed action for one AV from the pre-step snapshot. a_proposal replaces the
// actor output for the ego (exploration noise during training).
double decide(const RunConfig& config, Algorithm algo, const Env& env, std::size_t follower,
              const Policy& policy, double a_proposal, std::uint64_t search_seed,
              const EpisodeLogs& logs) {
  const auto step = env.platoon().step_index;
  switch (algo) {
    case Algorithm::td3:
      return a_proposal;
    case Algorithm::hcfs: {
      const auto d = hcfs_decide(env, follower, policy, config.fusion.leader_prediction);
      if (logs.decisions) write_hcfs_line(*logs.decisions, step, follower + 1, d);
      const bool td3_won = d.r_td3 > d.r_cacc;
      return td3_won ? a_proposal : 0.5 * d.a_cacc + 0.5 * a_proposal;
    }
    case Algorithm::akhcfs: {
      const auto d = akhcfs_decide(env, follower, policy, config.fusion, search_seed);
      if (logs.decisions) write_decision_line(*logs.decisions, step, follower + 1, d);
      return fuse_action(a_proposal, d.a_cacc, d.h, config.env.dynamics.a_bound);
    }
  }
  return a_proposal;
}

}  // namespace

EventMetrics run_episode(const RunConfig& config, Algorithm algo, const Policy& policy,
                         std::shared_ptr<const LeaderProfile> leader, const std::string& mix,
                         std::uint64_t seed, EpisodeLogs logs) {
  const auto tags = parse_mix(mix, algo);
  Env env(config.env);
  env.reset(EpisodeConfig{leader, tags, seed});

  EventMetrics metrics;
  metrics.algorithm = to_string(algo);
  metrics.event_id = leader->event_id;
  metrics.mix = mix;
  metrics.leader_mean_speed = leader->mean_speed();

  SeriesRecorder recorder(tags);
  recorder.record(env);
  if (logs.trajectory) {
    write_trajectory_header(*logs.trajectory);
    append_trajectory_rows(*logs.trajectory, env.platoon());
  }
  if (logs.rewards) write_reward_header(*logs.rewards);

  const auto& avs = env.av_followers();
  std::vector<std::size_t> av_vehicles(avs.size());
  for (std::size_t k = 0; k < avs.size(); ++k) av_vehicles[k] = avs[k] + 1;
  std::vector<double> actions(avs.size());

  while (!env.done()) {
    const auto step = static_cast<std::uint64_t>(env.platoon().step_index);
    for (std::size_t k = 0; k < avs.size(); ++k) {
      const double a_td3 = policy(env.observe(avs[k]));
      actions[k] = decide(config, algo, env, avs[k], policy, a_td3,
                          derive_seed(seed, step, avs[k]), logs);
    }
    const auto result = env.step(actions);
    ++metrics.steps;
    recorder.record(env);
    if (result.collision) recorder.mark(*result.collision);
    if (logs.trajectory) append_trajectory_rows(*logs.trajectory, env.platoon());
    if (logs.rewards) {
      append_reward_rows(*logs.rewards, env.platoon().step_index, av_vehicles, result.rewards);
    }
  }
  metrics.collided = env.collided();
  for (const auto& s : recorder.series) {
    metrics.followers.push_back(follower_metrics(s, config.env.dynamics.dt_s, config.metrics));
  }
  return metrics;
}

namespace {

std::string random_mix(std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::uint64_t> pick(1, (std::uint64_t{1} << n) - 1);
  const auto mask = pick(rng);
  std::string mix(n, 'H');
  for (std::size_t i = 0; i < n; ++i) {
    if (mask & (std::uint64_t{1} << i)) mix[i] = 'A';
  }
  return mix;
}

}  // namespace

TrainSummary cmd_train(const RunConfig& config, Td3Agent* trained) {
  const auto data = load_datasets(config);
  if (data.train.empty()) throw DataError("no training events");
  std::vector<std::shared_ptr<const LeaderProfile>> events;
  for (const auto& p : data.train) events.push_back(std::make_shared<const LeaderProfile>(p));

  Td3Agent agent(config.td3, derive_seed(config.seed, 10));
  ReplayBuffer buffer(static_cast<std::size_t>(config.td3.memory_size));
  std::mt19937_64 rng(derive_seed(config.seed, 11));
  const double a_bound = config.env.dynamics.a_bound;
  std::uniform_real_distribution<double> warmup(-a_bound, a_bound);
  const Policy policy = actor_policy(agent, config.env.reward);

  const fs::path out_dir = config.paths.output;
  fs::create_directories(out_dir);
  auto log = open_out(out_dir / "training_log.csv");
  log << "episode,event_id,mix,steps,total_steps,mean_reward,collided,critic1_loss,critic2_loss,"
         "actor_q\n";

  TrainSummary summary;
  const auto budget_left = [&] {
    return config.train.max_env_steps == 0 || summary.env_steps < config.train.max_env_steps;
  };
  const std::size_t followers = static_cast<std::size_t>(config.train.followers);

  for (int ep = 0; ep < config.train.episodes && budget_left(); ++ep) {
    std::uniform_int_distribution<std::size_t> pick_event(0, events.size() - 1);
    const auto& leader = events[pick_event(rng)];
    const std::string mix =
        config.train.mix.empty() ? random_mix(followers, rng) : config.train.mix;
    const auto tags = parse_mix(mix, config.algorithm);
    Env env(config.env);
    env.reset(EpisodeConfig{leader, tags, derive_seed(config.seed, 12, static_cast<std::uint64_t>(ep))});
    const auto& avs = env.av_followers();

    std::vector<NormalizedObservation> obs(avs.size());
    std::vector<double> actions(avs.size());
    double reward_sum = 0.0;
    std::int64_t steps = 0;
    UpdateDiagnostics last;
    while (!env.done() && budget_left()) {
      const auto step = static_cast<std::uint64_t>(env.platoon().step_index);
      for (std::size_t k = 0; k < avs.size(); ++k) {
        obs[k] = env.observe(avs[k]).normalized(config.env.reward);
        const double proposal = summary.env_steps < config.train.warmup_steps
                                    ? warmup(rng)
                                    : agent.select_action(obs[k], true, rng);
        actions[k] = decide(config, config.algorithm, env, avs[k], policy, proposal,
                            derive_seed(config.seed, 13, step, avs[k]), EpisodeLogs{});
      }
      const auto result = env.step(actions);
      const bool terminal = result.collision.has_value();
      for (std::size_t k = 0; k < avs.size(); ++k) {
        buffer.push(Transition{obs[k], actions[k], result.rewards[k].total,
                               result.observations[k].normalized(config.env.reward), terminal});
        reward_sum += result.rewards[k].total;
      }
      ++steps;
      ++summary.env_steps;
      if (buffer.size() >= static_cast<std::size_t>(config.td3.batch_size)) {
        last = agent.update(buffer);
        ++summary.updates;
      }
    }
    if (env.collided()) ++summary.collisions;
    ++summary.episodes;
    const double mean_reward =
        steps > 0 ? reward_sum / static_cast<double>(steps * static_cast<std::int64_t>(avs.size()))
                  : 0.0;
    log << ep << ',' << leader->event_id << ',' << mix << ',' << steps << ','
        << summary.env_steps << ',' << format_double(mean_reward) << ','
        << (env.collided() ? 1 : 0) << ',' << format_double(last.critic1_loss) << ','
        << format_double(last.critic2_loss) << ',' << format_double(last.actor_q) << '\n';
    if ((ep + 1) % 50 == 0) {
      spdlog::info("train episode {} steps {} collisions {}", ep + 1, summary.env_steps,
                   summary.collisions);
    }
    if (config.train.checkpoint_every > 0 && (ep + 1) % config.train.checkpoint_every == 0) {
      agent.save(out_dir / ("checkpoint_ep" + std::to_string(ep + 1) + ".json"));
    }
  }
  agent.save(config.checkpoint_path());
  spdlog::info("training done: {} episodes, {} env steps, {} collisions", summary.episodes,
               summary.env_steps, summary.collisions);
  if (trained) *trained = std::move(agent);
  return summary;
}

Td3Agent load_checkpoint(const RunConfig& config) {
  const auto path = config.checkpoint_path();
  if (!fs::exists(path)) throw DataError("checkpoint not found: " + path.string());
  Td3Agent agent = Td3Agent::load(path);
  const auto& h = agent.hyper();
  if (h.hidden != config.td3.hidden || h.a_bound != config.td3.a_bound) {
    throw ConfigError("checkpoint " + path.string() +
                      " does not match the configured network shape or action bound");
  }
  return agent;
}

std::vector<EventMetrics> evaluate_events(const RunConfig& config, Algorithm algo,
                                          const Td3Agent& agent,
                                          const std::vector<LeaderProfile>& events) {
  const auto mixes = config.evaluate.mix.empty()
                         ? enumerate_mixes(static_cast<std::size_t>(config.evaluate.followers))
                         : std::vector<std::string>{config.evaluate.mix};
  std::size_t count = events.size();
  if (config.evaluate.max_events > 0) {
    count = std::min(count, static_cast<std::size_t>(config.evaluate.max_events));
  }
  std::vector<std::shared_ptr<const LeaderProfile>> leaders;
  for (std::size_t i = 0; i < count; ++i) {
    leaders.push_back(std::make_shared<const LeaderProfile>(events[i]));
  }
  const std::size_t total = count * mixes.size();
  std::vector<EventMetrics> results(total);
  const Policy policy = actor_policy(agent, config.env.reward);

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  const auto worker = [&] {
    for (std::size_t t = next++; t < total && !failed; t = next++) {
      const std::size_t e = t / mixes.size();
      const std::size_t m = t % mixes.size();
      try {
        results[t] = run_episode(config, algo, policy, leaders[e], mixes[m],
                                 derive_seed(config.seed, 20, e, m));
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  const int jobs = std::max(1, config.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int j = 0; j < jobs; ++j) threads.emplace_back(worker);
    for (auto& th : threads) th.join();
  }
  if (error) std::rethrow_exception(error);
  return results;
}

AggregateReport cmd_evaluate(const RunConfig& config) {
  const Td3Agent agent = load_checkpoint(config);
  const auto data = load_datasets(config);
  if (data.test.empty()) throw DataError("no test events");
  const auto events = evaluate_events(config, config.algorithm, agent, data.test);
  const auto report = aggregate(events, config.metrics);
  const fs::path out_dir = config.paths.output;
  emit_report(report, out_dir);
  write_events_csv(events, out_dir / "events.csv");
  spdlog::info("evaluated {} episodes with {}", events.size(), to_string(config.algorithm));
  return report;
}

EventMetrics cmd_replay(const RunConfig& config, const std::string& event_id,
                        const std::string& mix) {
  const auto data = load_datasets(config);
  const LeaderProfile* found = nullptr;
  std::vector<std::string> ids;
  for (const auto* set : {&data.train, &data.test}) {
    for (const auto& p : *set) {
      ids.push_back(p.event_id);
      if (p.event_id == event_id) found = &p;
    }
  }
  if (!found) {
    std::string list;
    for (const auto& id : ids) list += (list.empty() ? "" : ", ") + id;
    throw DataError("unknown event id '" + event_id + "'; available: " + list);
  }
  const Td3Agent agent = load_checkpoint(config);
  const Policy policy = actor_policy(agent, config.env.reward);
  const std::string chosen = mix.empty() ? std::string(static_cast<std::size_t>(config.evaluate.followers), 'A') : mix;

  const fs::path out_dir = config.paths.output;
  fs::create_directories(out_dir);
  auto trajectory = open_out(out_dir / "trajectory.csv");
  auto rewards = open_out(out_dir / "rewards.csv");
  auto decisions = open_out(out_dir / "decisions.jsonl");
  const auto metrics =
      run_episode(config, config.algorithm, policy, std::make_shared<const LeaderProfile>(*found),
                  chosen, derive_seed(config.seed, 30), EpisodeLogs{&trajectory, &rewards, &decisions});
  json followers = json::array();
  for (const auto& f : metrics.followers) {
    followers.push_back({{"is_av", f.is_av},
                         {"collided", f.collided},
                         {"mean_ttc_in_band", f.mean_ttc_in_band ? json(*f.mean_ttc_in_band) : json()},
                         {"mean_abs_jerk", f.mean_abs_jerk},
                         {"mean_speed", f.mean_speed}});
  }
  auto summary = open_out(out_dir / "summary.json");
  summary << json{{"algorithm", metrics.algorithm},
                  {"event_id", metrics.event_id},
                  {"mix", metrics.mix},
                  {"steps", metrics.steps},
                  {"collided", metrics.collided},
                  {"leader_mean_speed", metrics.leader_mean_speed},
                  {"followers", followers}}
                 .dump(2)
          << '\n';
  return metrics;
}

std::size_t cmd_ingest(const RunConfig& config) {
  if (config.paths.data.empty()) throw DataError("ingest needs paths.data (a trajectory CSV)");
  const auto records = parse_trajectory_csv(config.paths.data);
  const auto events = extract_follow_events(records, config.data.extract);
  if (events.empty()) throw DataError("no car-following events survived the filters");
  const fs::path out_dir = config.paths.output;
  fs::create_directories(out_dir);
  save_profiles(out_dir / "profiles.json", events);
  json split{{"train_fraction", config.data.train_fraction}, {"seed", config.seed}};
  if (events.size() >= 2) {
    const auto idx = split_indices(events.size(), config.data.train_fraction, config.seed);
    json train = json::array(), test = json::array();
    for (auto i : idx.train) train.push_back(events[i].event_id);
    for (auto i : idx.test) test.push_back(events[i].event_id);
    split["train"] = train;
    split["test"] = test;
  }
  auto out = open_out(out_dir / "split.json");
  out << split.dump(2) << '\n';
  spdlog::info("ingested {} records into {} events", records.size(), events.size());
  return events.size();
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double to_double(const std::string& s, const fs::path& path, std::size_t row) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(path.string() + " row " + std::to_string(row) + ": bad number '" + s + "'");
  }
}

}  // namespace

std::vector<EventMetrics> read_events_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<EventMetrics> events;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 11) {
      throw DataError(path.string() + " row " + std::to_string(row) + ": expected 11 fields");
    }
    const bool same = !events.empty() && events.back().algorithm == f[0] &&
                      events.back().event_id == f[1] && events.back().mix == f[2];
    if (!same) {
      EventMetrics e;
      e.algorithm = f[0];
      e.event_id = f[1];
      e.mix = f[2];
      e.leader_mean_speed = to_double(f[9], path, row);
      e.steps = static_cast<std::size_t>(to_double(f[10], path, row));
      events.push_back(std::move(e));
    }
    FollowerMetrics fm;
    fm.is_av = f[4] == "1";
    fm.collided = f[5] == "1";
    if (!f[6].empty()) fm.mean_ttc_in_band = to_double(f[6], path, row);
    fm.mean_abs_jerk = to_double(f[7], path, row);
    fm.mean_speed = to_double(f[8], path, row);
    auto& e = events.back();
    e.collided = e.collided || fm.collided;
    e.followers.push_back(fm);
  }
  return events;
}

AggregateReport cmd_report(const RunConfig& config, const std::vector<fs::path>& events_csv) {
  if (events_csv.empty()) throw DataError("report needs at least one events.csv");
  std::vector<EventMetrics> all;
  for (const auto& p : events_csv) {
    auto events = read_events_csv(p);
    all.insert(all.end(), std::make_move_iterator(events.begin()),
               std::make_move_iterator(events.end()));
  }
  const auto report = aggregate(all, config.metrics);
  emit_report(report, config.paths.output);
  return report;
}

}  // namespace akhcfs
