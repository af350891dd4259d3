#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mpgrasp/config.h"
#include "mpgrasp/error.h"
#include "mpgrasp/mailbox.h"
#include "mpgrasp/run_log.h"

namespace mpgrasp {

enum class ClockMode { kVirtual, kRealtime };

struct RunOptions {
  ClockMode clock = ClockMode::kVirtual;
  std::uint64_t seed = 0;
  double duration = -1.0;      // s; negative uses config.task.duration
  int control_log_stride = 1;  // one control record every n ticks, 0 for none
  bool log_sensor = true;
  bool stop_when_done = false;
};

struct TickCounts {
  long sensor = 0;
  long planner = 0;
  long control = 0;
};

struct ObjectSnapshot {
  std::string id;
  Pose pose;
};

struct SceneSnapshot {
  double t = 0.0;
  VecX robot_q;
  std::vector<ObjectSnapshot> objects;
  TaskPhase phase = TaskPhase::kIdle;
  std::vector<VecX> plan_knots;  // joint positions of the active plan
  std::optional<std::string> target;
  std::optional<Pose> filtered_pose;
  bool success = false;
};

/// Multi-rate closed loop on a virtual clock of 1/3000 s ticks: sensor and
/// filter every 100 ticks (30 Hz), planner every 300 (10 Hz), controller
/// every 3 (1 kHz). Stages due on the same tick run in that order and only
/// exchange data through latest-value mailboxes.
class Runtime {
 public:
  static constexpr long kTicksPerSecond = 3000;

  explicit Runtime(Config config, RunOptions options = {});
  ~Runtime();
  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  /// Runs every stage due at the current tick, then advances the clock.
  void step();
  /// Steps until the clock reaches t (s) or the run fails.
  void run_until(double t);

  long tick() const { return tick_; }
  double time() const { return static_cast<double>(tick_) / kTicksPerSecond; }

  /// Operator commands. prompt throws kIllegalEvent outside Idle;
  /// set_object_pose throws kUnknownObject.
  void prompt(const std::string& text);
  void set_object_pose(const std::string& id, const Pose& pose);

  TaskPhase phase() const { return phase_; }
  bool success() const { return success_; }
  bool failed() const { return failed_; }
  const TickCounts& ticks() const { return counts_; }
  const RunLog& log() const { return log_; }
  RunLog take_log() { return std::move(log_); }
  const Config& config() const { return cfg_; }

  const JointState& robot_state() const { return plant_; }
  Pose end_effector() const;
  /// True object pose at the current time.
  Pose object_pose(const std::string& id) const;
  std::optional<FilterState> filter_state() const;
  std::shared_ptr<const Trajectory> trajectory() const { return traj_; }
  std::optional<GraspTargets> active_targets() const;
  const std::optional<std::string>& target_id() const { return target_; }

  SceneSnapshot snapshot() const;

 private:
  struct PendingDetection {
    long due = -1;
    std::optional<std::string> object_id;
    ErrorCode error = ErrorCode::kDetectionFailed;
    std::string reason;
  };
  struct JointTargets {
    GraspTargets poses;
    VecX q_waypoint;
    VecX q_goal;
  };

  Pose object_pose_at(const std::string& id, double t) const;
  void run_scheduled();
  void sensor_stage();
  void planner_stage();
  void controller_stage();
  void start_detection();
  void fire(TaskEvent event, Json data = Json::object());
  bool set_targets(const GraspTargets& poses, const char* reason);
  void plan();
  void log_plan(const Trajectory& traj, bool replanned_targets);

  Config cfg_;
  RunOptions opt_;
  RobotModel nominal_;
  RobotModel plant_model_;
  std::shared_ptr<const RobotModel> collision_model_;
  Scene scene_;
  GraspSpec spec_;
  Rng detect_rng_;
  Rng sensor_rng_;
  long tick_ = 0;
  long end_tick_ = 0;
  long sensor_ticks_ = 100;
  long planner_ticks_ = 300;
  long control_ticks_ = 3;
  JointState plant_;
  TaskPhase phase_ = TaskPhase::kIdle;
  RunLog log_;
  TickCounts counts_;

  std::string prompt_text_;
  PendingDetection detection_;
  int detect_attempt_ = 0;
  std::optional<std::string> target_;
  PoseTracker tracker_;
  int updates_ = 0;
  long recover_start_ = -1;

  LatestValue<std::optional<PoseMeasurement>> measurements_;
  LatestValue<FilterState> estimates_;

  std::shared_ptr<const Trajectory> traj_;
  long traj_tick_ = 0;
  std::optional<JointTargets> targets_;
  bool waypoint_armed_ = false;
  bool committed_ = false;
  int n_prev_ = 2;
  int ns_prev_ = 2;
  bool targets_changed_ = false;

  long gripper_due_ = -1;
  bool attached_ = false;
  Pose attach_rel_;
  std::map<std::string, Pose> released_;
  std::map<std::string, std::vector<std::pair<double, Pose>>> overrides_;
  bool success_ = false;
  bool failed_ = false;
};

struct RunResult {
  RunLog log;
  bool success = false;
  bool failed = false;
  TaskPhase final_phase = TaskPhase::kIdle;
  TickCounts ticks;
};

/// Runs the configured task for the configured duration. Never throws on
/// task failure; inspect the result.
RunResult simulate(const Config& config, const RunOptions& options);

/// Same, but throws kRunFailed when tracking is lost for longer than the
/// recover timeout.
RunLog run_closed_loop(const Config& config, ClockMode mode, std::uint64_t seed);

Json pose_json(const Pose& pose);

}  // namespace mpgrasp
