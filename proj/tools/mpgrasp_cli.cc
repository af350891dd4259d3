// Command line front end: run, plan, filter, serve, replay.
#include <csignal>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "mpgrasp/config.h"
#include "mpgrasp/error.h"
#include "mpgrasp/io.h"
#include "mpgrasp/runtime.h"
#include "mpgrasp/service.h"

using namespace mpgrasp;

namespace {

Config load(const std::string& path) {
  return path.empty() ? default_config() : load_config(path);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfig, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cmd_run(const std::string& config_path, std::uint64_t seed, double duration,
            const std::string& motion, const std::string& out_path, bool realtime,
            int stride) {
  Config cfg = load(config_path);
  if (!motion.empty()) set_object_motion(cfg, motion);
  RunOptions opt;
  opt.seed = seed;
  opt.duration = duration;
  opt.clock = realtime ? ClockMode::kRealtime : ClockMode::kVirtual;
  opt.control_log_stride = stride;
  RunResult r = simulate(cfg, opt);
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    r.log.write(out);
  }
  std::cout << "phase=" << to_string(r.final_phase) << " success=" << r.success
            << " sensor_ticks=" << r.ticks.sensor << " planner_ticks=" << r.ticks.planner
            << " control_ticks=" << r.ticks.control
            << " retargets=" << r.log.events("retarget").size() << std::hex
            << " hash=" << r.log.hash() << std::dec << '\n';
  if (r.failed) {
    std::cerr << "run failed: tracking was not regained\n";
    return 3;
  }
  return r.success ? 0 : 1;
}

int cmd_plan(const std::string& problem_path, const std::string& config_path,
             const std::string& out_path) {
  std::optional<Config> cfg;
  if (!config_path.empty()) cfg = load_config(config_path);
  const PlanProblem p =
      parse_plan_problem(slurp(problem_path), cfg ? &cfg->robot : nullptr);
  const Trajectory traj = solve(p);
  if (out_path.empty()) {
    write_trajectory_csv(std::cout, traj);
  } else {
    std::ofstream out(out_path);
    write_trajectory_csv(out, traj);
  }
  std::cout << "# " << solve_stats_json(traj).dump() << '\n';
  return 0;
}

int cmd_filter(const std::string& in_path, const std::string& out_path,
               const std::string& config_path) {
  const Config cfg = load(config_path);
  std::ifstream in(in_path);
  if (!in) throw Error(ErrorCode::kConfig, "cannot open " + in_path);
  const auto rows = read_pose_csv(in);
  const auto filtered =
      filter_pose_stream(rows, cfg.filter.jerk_psd_position,
                         cfg.filter.jerk_psd_orientation, cfg.sensor.sigma_p,
                         cfg.sensor.sigma_o);
  if (out_path.empty()) {
    write_pose_csv(std::cout, filtered);
  } else {
    std::ofstream out(out_path);
    write_pose_csv(out, filtered);
  }
  return 0;
}

Service* g_service = nullptr;

int cmd_serve(const std::string& config_path, unsigned short port, std::uint64_t seed) {
  ServiceOptions opt;
  opt.port = port;
  opt.seed = seed;
  Service service(load(config_path), opt);
  const unsigned short bound = service.open();
  std::cout << "listening on ws://127.0.0.1:" << bound << std::endl;
  g_service = &service;
  std::signal(SIGINT, [](int) {
    if (g_service != nullptr) g_service->stop();
  });
  service.run();
  g_service = nullptr;
  return 0;
}

int cmd_replay(const std::string& log_path, bool events_only) {
  std::ifstream in(log_path);
  if (!in) throw Error(ErrorCode::kConfig, "cannot open " + log_path);
  const RunLog log = RunLog::read(in);
  std::map<std::string, std::size_t> counts;
  double last_t = -1.0;
  bool monotone = true;
  for (const auto& r : log.records()) {
    ++counts[r.type];
    monotone = monotone && r.t >= last_t;
    last_t = r.t;
    if (r.type == "event") {
      std::cout << std::fixed;
      std::cout.precision(3);
      std::cout << r.t << "  " << r.data.value("name", "?");
      if (r.data.contains("phase")) std::cout << "  -> " << r.data["phase"].get<std::string>();
      std::cout << '\n';
    }
  }
  if (!events_only) {
    for (const auto& [type, n] : counts) std::cout << type << ": " << n << '\n';
    std::cout << "monotone_timestamps: " << (monotone ? "yes" : "no") << '\n';
    std::cout << std::hex << "hash: " << log.hash() << std::dec << '\n';
  }
  return monotone ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop grasping of moving objects in simulation"};
  app.require_subcommand(1);

  std::string config_path, out_path, motion, problem_path, in_path, log_path;
  std::uint64_t seed = 0;
  double duration = -1.0;
  bool realtime = false, events_only = false;
  int stride = 1;
  unsigned short port = 8765;

  auto* run = app.add_subcommand("run", "simulate the pick-and-place task");
  run->add_option("--config", config_path, "YAML config (default: bundled)");
  run->add_option("--seed", seed, "random seed");
  run->add_option("--duration", duration, "simulated seconds (default: config)");
  run->add_option("--object-motion", motion, "override object motion")
      ->check(CLI::IsMember({"static", "linear", "sinusoid", "jitter"}));
  run->add_option("--out", out_path, "write the JSON-lines log here");
  run->add_flag("--realtime", realtime, "pace the loop by the wall clock");
  run->add_option("--control-stride", stride, "log every n-th control tick (0: none)");

  auto* plan = app.add_subcommand("plan", "solve one trajectory problem");
  plan->add_option("problem", problem_path, "YAML plan problem")->required();
  plan->add_option("--config", config_path, "robot limits and collision model");
  plan->add_option("--out", out_path, "CSV output (default: stdout)");

  auto* filter = app.add_subcommand("filter", "filter a pose measurement file");
  filter->add_option("--in", in_path, "CSV t,px,py,pz,roll,pitch,yaw")->required();
  filter->add_option("--out", out_path, "CSV output (default: stdout)");
  filter->add_option("--config", config_path, "noise settings");

  auto* serve = app.add_subcommand("serve", "WebSocket endpoint for the operator panel");
  serve->add_option("--port", port, "TCP port");
  serve->add_option("--config", config_path, "YAML config");
  serve->add_option("--seed", seed, "random seed");

  auto* replay = app.add_subcommand("replay", "summarize a run log");
  replay->add_option("--log", log_path, "JSON-lines log")->required();
  replay->add_flag("--events", events_only, "print only the event timeline");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config_path, seed, duration, motion, out_path, realtime, stride);
    if (*plan) return cmd_plan(problem_path, config_path, out_path);
    if (*filter) return cmd_filter(in_path, out_path, config_path);
    if (*serve) return cmd_serve(config_path, port, seed);
    if (*replay) return cmd_replay(log_path, events_only);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
