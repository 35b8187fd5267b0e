// tbag: bring up the simulated teleoperation stack, replay, validate and
// analyze recorded episodes.

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include "CLI11.hpp"
#include "tbag/analyze.hpp"
#include "tbag/episode_io.hpp"
#include "tbag/replay.hpp"
#include "tbag/rig.hpp"
#include "tbag/stack.hpp"
#include "tbag/tcp_link.hpp"
#include "tbag/ws_bridge.hpp"

namespace fs = std::filesystem;
using namespace tbag;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitViolations = 1;
constexpr int kExitError = 2;

std::atomic<Stack*> g_running_stack{nullptr};
std::atomic<bool> g_interrupted{false};

void on_interrupt(int) {
  g_interrupted.store(true);
  if (Stack* s = g_running_stack.load()) s->request_stop();
}

Rig load_rig_or_default(const std::string& path) {
  return path.empty() ? default_rig() : load_rig(path);
}

struct RunArgs {
  std::string rig;
  std::string root;
  std::string scripted;
  std::string leader_log;
  std::string capture;
  std::optional<std::uint16_t> ws_port;
  std::optional<std::uint16_t> bus_port;
  std::string web_root;
  std::uint64_t seed = 0;
  bool virtual_clock = false;
  double max_duration = 600.0;
  std::uint64_t first_episode = 1;
  EpisodeLabels labels;
};

int cmd_run(const RunArgs& a) {
  const Rig rig = load_rig_or_default(a.rig);
  const bool live = a.scripted.empty() && a.leader_log.empty();
  if (live && a.virtual_clock) {
    std::cerr << "error: live mode needs the real-time clock; pass --scripted or --leader-log\n";
    return kExitError;
  }

  StackOptions opts;
  opts.virtual_clock = a.virtual_clock;
  opts.seed = a.seed;
  opts.max_duration = a.max_duration;
  opts.capture_leader = !a.capture.empty();
  opts.teleop.labels = a.labels;
  opts.teleop.first_episode_id = a.first_episode;
  opts.teleop.record_root = a.root.empty() ? fs::path(rig.record_root) : fs::path(a.root);
  if (!a.scripted.empty()) {
    opts.leader_source = LeaderSource::Script;
    opts.script = LeaderScript::load(a.scripted);
  } else if (!a.leader_log.empty()) {
    opts.leader_source = LeaderSource::Log;
    opts.leader_log = read_message_log(a.leader_log);
  } else {
    opts.leader_source = LeaderSource::External;
  }
  opts.teleop.on_episode = [](const Episode& ep) {
    std::cout << "episode " << ep.manifest.episode_id << " " << ep.manifest.status << " "
              << ep.records.size() << " records\n";
  };

  Stack stack(rig, opts);

  // Bind every endpoint before anything runs so a busy port fails fast.
  std::unique_ptr<BusServer> bus_server;
  std::unique_ptr<WsBridge> bridge;
  const auto bus_port = a.bus_port ? a.bus_port : (live ? std::optional<std::uint16_t>(7447) : std::nullopt);
  const auto ws_port = a.ws_port ? a.ws_port : (live ? std::optional<std::uint16_t>(8765) : std::nullopt);
  if (bus_port) {
    bus_server = std::make_unique<BusServer>(stack.bus(), "127.0.0.1", *bus_port);
    std::cout << "bus: tcp://127.0.0.1:" << bus_server->port() << "\n";
  }
  if (ws_port) {
    BridgeOptions bo;
    bo.port = *ws_port;
    bo.static_root = a.web_root;
    LeaderDevice* leader = &stack.leader();
    WsBridge::LeaderSink sink;
    if (live) sink = [leader](std::size_t arm, const JointVector& q) { leader->set_setpoint(arm, q); };
    bridge = std::make_unique<WsBridge>(stack.bus(), rig.leaders, sink, bo);
    std::cout << "console: http://127.0.0.1:" << bridge->port() << "/ (websocket on the same port)\n";
  }
  std::cout << "rig: " << rig.name << " " << rig.hash.substr(0, 12) << "\n"
            << "mode: " << (live ? "live" : a.scripted.empty() ? "leader-log" : "scripted")
            << (a.virtual_clock ? " (virtual clock)" : "") << "\n"
            << std::flush;

  g_running_stack.store(&stack);
  if (g_interrupted.load()) stack.request_stop();
  const RunSummary summary = stack.run();
  g_running_stack.store(nullptr);

  if (bridge) bridge->stop();
  if (bus_server) bus_server->stop();
  if (!a.capture.empty()) write_message_log(a.capture, stack.captured_leader());

  for (const auto& p : summary.written) std::cout << "wrote " << p.string() << "\n";
  std::cout << summary.episodes << " episodes" << (summary.aborted ? " (last aborted)" : "") << "\n";
  return kExitOk;
}

struct ReplayArgs {
  std::string rig;
  std::string episode;
  double speed = 1.0;
  bool virtual_clock = false;
  std::optional<std::uint16_t> ws_port;
  std::optional<std::uint16_t> bus_port;
  std::string rerecord;
};

int cmd_replay(const ReplayArgs& a) {
  const Rig rig = load_rig_or_default(a.rig);
  const Episode ep = read_episode(a.episode);
  const auto report = validate_episode(ep, rig.followers);
  if (!report.clean()) {
    for (const auto& v : report.violations) {
      std::cerr << "record " << v.index << ": " << to_string(v.kind) << " " << v.detail << "\n";
    }
    std::cerr << "refusing to replay an episode with violations\n";
    return kExitViolations;
  }

  Bus bus;
  std::unique_ptr<BusServer> bus_server;
  std::unique_ptr<WsBridge> bridge;
  if (a.bus_port) {
    bus_server = std::make_unique<BusServer>(bus, "127.0.0.1", *a.bus_port);
    std::cout << "bus: tcp://127.0.0.1:" << bus_server->port() << "\n";
  }
  if (a.ws_port) {
    BridgeOptions bo;
    bo.port = *a.ws_port;
    bridge = std::make_unique<WsBridge>(bus, rig.leaders, nullptr, bo);
    std::cout << "console: http://127.0.0.1:" << bridge->port() << "/\n";
  }

  ReplayOptions ro;
  ro.speed = a.speed;
  ro.pace_realtime = !a.virtual_clock;
  std::optional<Subscription> capture;
  if (!a.rerecord.empty()) capture = bus.subscribe_all(1u << 22);
  const auto stats = replay_episode(ep, bus, ro);
  std::cout << "published " << stats.published << " messages over "
            << static_cast<double>(stats.last_stamp - stats.first_stamp) / 1e9 << " s of stream time ("
            << stats.wall_seconds << " s wall)\n";

  if (capture) {
    const Episode again = rerecord(capture->drain(), ep.manifest, stats.shift);
    std::cout << "re-recorded to " << write_episode(again, a.rerecord).string() << "\n";
  }
  return kExitOk;
}

int cmd_validate(const std::string& rig_path, const std::vector<std::string>& paths) {
  const Rig rig = load_rig_or_default(rig_path);
  std::size_t total = 0;
  std::size_t bad = 0;
  for (const auto& root : paths) {
    if (!fs::exists(root)) {
      std::cerr << "error: " << root << " does not exist\n";
      return kExitError;
    }
    for (const auto& dir : find_episodes(root)) {
      ++total;
      try {
        const Episode ep = read_episode(dir);
        const auto report = validate_episode(ep, rig.followers);
        if (report.clean()) continue;
        ++bad;
        std::cout << "FAIL " << dir.string() << "\n";
        for (const auto& v : report.violations) {
          std::cout << "  record " << v.index << ": " << to_string(v.kind) << " " << v.detail << "\n";
        }
      } catch (const EpisodeIoFailure& e) {
        ++bad;
        std::cout << "FAIL " << dir.string() << "\n  " << to_string(e.code()) << " " << e.what() << "\n";
      }
    }
  }
  std::cout << total << " episodes, " << bad << " with violations\n";
  return bad == 0 ? kExitOk : kExitViolations;
}

struct AnalyzeArgs {
  std::string rig;
  std::vector<std::string> paths;
  double threshold = 0.15;
  std::string group_by = "location";
  std::string points_csv;
  std::string stats_csv;
  bool ignore_rig_hash = false;
};

void emit_csv(const std::string& target, const std::function<void(std::ostream&)>& write) {
  if (target.empty()) return;
  if (target == "-") return write(std::cout);
  std::ofstream out(target);
  if (!out) throw std::runtime_error("cannot write " + target);
  write(out);
}

int cmd_analyze(const AnalyzeArgs& a) {
  const Rig rig = load_rig_or_default(a.rig);
  const GroupKey key = a.group_by == "operator" ? GroupKey::Operator
                       : a.group_by == "task"   ? GroupKey::Task
                                                : GroupKey::Location;
  std::vector<fs::path> dirs;
  for (const auto& p : a.paths) {
    const auto found = find_episodes(p);
    dirs.insert(dirs.end(), found.begin(), found.end());
  }
  std::vector<InteractionPoint> points;
  bool violations = false;
  for (const auto& dir : dirs) {
    Episode ep;
    try {
      ep = read_episode(dir);
    } catch (const EpisodeIoFailure& e) {
      std::cerr << dir.string() << ": " << e.what() << "\n";
      violations = true;
      continue;
    }
    if (!validate_episode(ep, rig.followers).clean()) {
      std::cerr << dir.string() << ": fails validation, skipped\n";
      violations = true;
      continue;
    }
    if (ep.manifest.rig_hash != rig.hash && !a.ignore_rig_hash) {
      std::cerr << "error: " << dir.string() << " was recorded with rig " << ep.manifest.rig_hash
                << ", not the loaded rig " << rig.hash << "\n";
      return kExitError;
    }
    try {
      points.push_back(interaction_point(ep, rig.followers, a.threshold, key));
    } catch (const NoInteraction& e) {
      std::cerr << dir.string() << ": " << e.what() << "\n";
    }
  }
  const auto stats = group_statistics(points);
  emit_csv(a.points_csv, [&](std::ostream& o) { write_points_csv(o, points); });
  emit_csv(a.stats_csv, [&](std::ostream& o) { write_stats_csv(o, stats); });
  if (a.points_csv.empty() && a.stats_csv.empty()) write_stats_csv(std::cout, stats);
  std::cerr << dirs.size() << " episodes, " << points.size() << " interaction points\n";
  return violations ? kExitViolations : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulated dual-arm teleoperation stack and episode tools"};
  app.require_subcommand(1);
  app.fallthrough();  // --rig also accepted after the subcommand
  std::string rig_path;
  app.add_option("--rig", rig_path, "Rig description file (default: built-in desk rig)");

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Bring up leader, followers, cameras, teleop node and bridges");
  run_cmd->add_option("--root", run.root, "Record root (default: the rig's record_root)");
  auto* scripted = run_cmd->add_option("--scripted", run.scripted, "Leader script (JSON)")->check(CLI::ExistingFile);
  run_cmd->add_option("--leader-log", run.leader_log, "Captured leader message log to drive the leader")
      ->check(CLI::ExistingFile)
      ->excludes(scripted);
  run_cmd->add_option("--capture", run.capture, "Write the leader message stream to this log");
  run_cmd->add_option("--ws-port", run.ws_port, "Websocket bridge port (live default 8765)");
  run_cmd->add_option("--bus-port", run.bus_port, "TCP bus port (live default 7447)");
  run_cmd->add_option("--web-root", run.web_root, "Directory with the console's index.html");
  run_cmd->add_option("--seed", run.seed, "Simulation noise seed");
  run_cmd->add_flag("--virtual-clock", run.virtual_clock, "Run on a virtual clock as fast as possible");
  run_cmd->add_option("--max-duration", run.max_duration, "Stop after this many seconds of stack time");
  run_cmd->add_option("--first-episode", run.first_episode, "Id of the first recorded episode");
  run_cmd->add_option("--task", run.labels.task, "Task label for manifests");
  run_cmd->add_option("--location", run.labels.location, "Location label for manifests");
  run_cmd->add_option("--operator", run.labels.operator_label, "Operator label for manifests");

  ReplayArgs replay;
  auto* replay_cmd = app.add_subcommand("replay", "Republish an episode on the /replay topics");
  replay_cmd->add_option("episode", replay.episode, "Episode directory")->required()->check(CLI::ExistingDirectory);
  replay_cmd->add_option("--speed", replay.speed, "Playback speed factor")->check(CLI::PositiveNumber);
  replay_cmd->add_flag("--virtual-clock", replay.virtual_clock, "Publish without real-time pacing");
  replay_cmd->add_option("--ws-port", replay.ws_port, "Websocket bridge port");
  replay_cmd->add_option("--bus-port", replay.bus_port, "TCP bus port");
  replay_cmd->add_option("--rerecord", replay.rerecord, "Re-record the replayed stream under this root");

  std::vector<std::string> validate_paths;
  std::string validate_root;
  auto* validate_cmd = app.add_subcommand("validate", "Check episodes for violations");
  validate_cmd->add_option("paths", validate_paths, "Episode directories or trees");
  validate_cmd->add_option("--root", validate_root, "Episode tree (same as a path argument)");

  AnalyzeArgs analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "Interaction points between the two end-effectors");
  analyze_cmd->add_option("paths", analyze.paths, "Episode directories or trees");
  std::string analyze_root;
  analyze_cmd->add_option("--root", analyze_root, "Episode tree (same as a path argument)");
  analyze_cmd->add_option("--threshold", analyze.threshold, "Proximity threshold in meters")
      ->check(CLI::PositiveNumber);
  analyze_cmd->add_option("--group-by", analyze.group_by, "Manifest label to group by")
      ->check(CLI::IsMember({"location", "operator", "task"}));
  analyze_cmd->add_option("--points-csv", analyze.points_csv, "Per-episode points table ('-' for stdout)");
  analyze_cmd->add_option("--stats-csv", analyze.stats_csv, "Per-group statistics table ('-' for stdout)");
  analyze_cmd->add_flag("--ignore-rig-hash", analyze.ignore_rig_hash, "Analyze episodes from other rigs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitError;
  }

  std::signal(SIGINT, on_interrupt);
  std::signal(SIGTERM, on_interrupt);

  try {
    if (*run_cmd) {
      run.rig = rig_path;
      return cmd_run(run);
    }
    if (*replay_cmd) {
      replay.rig = rig_path;
      return cmd_replay(replay);
    }
    if (*validate_cmd) {
      if (!validate_root.empty()) validate_paths.push_back(validate_root);
      if (validate_paths.empty()) validate_paths.push_back(load_rig_or_default(rig_path).record_root);
      return cmd_validate(rig_path, validate_paths);
    }
    if (*analyze_cmd) {
      analyze.rig = rig_path;
      if (!analyze_root.empty()) analyze.paths.push_back(analyze_root);
      if (analyze.paths.empty()) analyze.paths.push_back(load_rig_or_default(rig_path).record_root);
      return cmd_analyze(analyze);
    }
  } catch (const RigError& e) {
    std::cerr << "rig error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
