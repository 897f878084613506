#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "akhcfs/app.h"
#include "akhcfs/errors.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::string> out;
  std::optional<std::string> algo;
  bool synthetic = false;
  std::optional<std::string> mix;
  std::optional<int> episodes;
  bool print_config = false;
  std::string event;
  std::vector<std::string> inputs;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("akhcfs");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* level = std::getenv("AKHCFS_LOG");
  spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::info);
}

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration");
  cmd->add_option("--seed", f.seed, "Master seed");
  cmd->add_option("--jobs", f.jobs, "Parallel episode workers")->check(CLI::PositiveNumber);
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--algo", f.algo, "td3 | hcfs | akhcfs")
      ->check(CLI::IsMember({"td3", "hcfs", "akhcfs"}));
  cmd->add_flag("--synthetic", f.synthetic, "Use generated leader profiles");
  cmd->add_option("--mix", f.mix, "Follower mix such as HAAA (A = AV, H = human)");
  cmd->add_option("--episodes", f.episodes,
                  "train: episode budget; evaluate: number of test events")
      ->check(CLI::NonNegativeNumber);
  cmd->add_flag("--print-config", f.print_config, "Print the resolved config and exit");
}

akhcfs::RunConfig resolve(const Flags& f, const std::string& command) {
  nlohmann::json j = nlohmann::json::object();
  if (!f.config.empty()) {
    j = akhcfs::config_to_json(akhcfs::load_config(f.config));
  }
  if (f.seed) j["seed"] = *f.seed;
  if (f.jobs) j["jobs"] = *f.jobs;
  if (f.out) j["paths"]["output"] = *f.out;
  if (f.algo) j["algorithm"] = *f.algo;
  if (f.synthetic) j["data"]["synthetic"] = true;
  if (f.mix) j[command == "train" ? "train" : "evaluate"]["mix"] = *f.mix;
  if (f.episodes) {
    if (command == "train") {
      j["train"]["episodes"] = *f.episodes;
    } else {
      j["evaluate"]["max_events"] = *f.episodes;
    }
  }
  return akhcfs::config_from_json(j);
}

int run(const std::string& command, const Flags& f) {
  const auto config = resolve(f, command);
  if (f.print_config) {
    std::cout << akhcfs::config_to_json(config).dump(2) << '\n';
    return kExitOk;
  }
  if (command == "ingest") {
    const auto n = akhcfs::cmd_ingest(config);
    std::cout << "events: " << n << '\n';
  } else if (command == "train") {
    const auto s = akhcfs::cmd_train(config);
    std::cout << "episodes: " << s.episodes << " env_steps: " << s.env_steps
              << " collisions: " << s.collisions << '\n';
  } else if (command == "evaluate") {
    const auto report = akhcfs::cmd_evaluate(config);
    for (const auto& a : report.algorithms) {
      std::cout << a.algorithm << " episodes: " << a.episodes << " collisions: " << a.collisions
                << '\n';
    }
  } else if (command == "replay") {
    const auto m = akhcfs::cmd_replay(config, f.event, f.mix.value_or(""));
    std::cout << m.event_id << ' ' << m.mix << " steps: " << m.steps
              << " collided: " << (m.collided ? "yes" : "no") << '\n';
  } else if (command == "report") {
    std::vector<std::filesystem::path> inputs(f.inputs.begin(), f.inputs.end());
    const auto report = akhcfs::cmd_report(config, inputs);
    for (const auto& a : report.algorithms) {
      std::cout << a.algorithm << " episodes: " << a.episodes << " collisions: " << a.collisions
                << '\n';
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Adaptive Kalman hybrid car-following: train, evaluate and report"};
  app.require_subcommand(1);
  app.footer("Config keys (dotted path = default):\n" + akhcfs::describe_config_keys());

  Flags flags;
  auto* ingest = app.add_subcommand("ingest", "Extract leader profiles from a trajectory CSV");
  auto* train = app.add_subcommand("train", "Train the TD3 agent inside the chosen strategy");
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate every mix on the test events");
  auto* replay = app.add_subcommand("replay", "Log one episode in full");
  auto* report = app.add_subcommand("report", "Aggregate events.csv files into a report");
  app.add_subcommand("schema", "Print the config JSON Schema");
  for (auto* cmd : {ingest, train, evaluate, replay, report}) add_common(cmd, flags);
  replay->add_option("--event", flags.event, "Event id")->required();
  report->add_option("--in", flags.inputs, "events.csv files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  if (command == "schema") {
    std::cout << akhcfs::config_schema().dump(2) << '\n';
    return kExitOk;
  }
  try {
    return run(command, flags);
  } catch (const akhcfs::ConfigError& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const akhcfs::NumericError& e) {
    spdlog::error("{}", e.what());
    return kExitNumeric;
  } catch (const std::domain_error& e) {
    spdlog::error("{}", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitData;
  }
}
