#pragma once

#include <string>
#include <vector>

#include "mpgrasp/arm_model.h"
#include "mpgrasp/mp_trajopt.h"
#include "mpgrasp/perception_sim.h"
#include "mpgrasp/servo_sim.h"
#include "mpgrasp/task_fsm.h"

namespace mpgrasp {

struct ControlConfig {
  ServoGains gains;          // defaults to critically damped, omega = 20
  double dt = 1e-3;          // s
  double mass_mismatch = 1.0;  // plant masses = nominal * factor
};

struct PlannerConfig {
  double h = 0.1;
  int n_max = 50;
  int n_min = 2;
  PlanWeights weights;
  double waypoint_half_width = 0.05;  // rad
  double goal_half_width = 0.01;      // rad
  double safety_margin = 0.02;        // m
  double time_budget = 0.1;           // s
  int max_iterations = 20;
  // Fraction of the joint velocity/acceleration limits assumed when sizing
  // the horizon; the optimizer itself uses the full limits.
  double timing_scale = 0.5;
  std::vector<Sphere> obstacles;
};

struct FilterSettings {
  double jerk_psd_position = 1.0;     // m^2/s^5
  double jerk_psd_orientation = 1.0;  // rad^2/s^5
  double init_velocity_std = 0.5;
  double init_acceleration_std = 2.0;
};

struct GraspTolerance {
  double position = 0.01;  // m
  double angle = 0.05;     // rad
  double speed = 0.05;     // rad/s, max joint speed counted as rest
};

struct TaskConfig {
  std::string prompt = "Grasp the orange drill";
  bool auto_prompt = true;
  double prompt_time = 0.0;  // s
  double duration = 20.0;    // s
  VecX home;
  double pregrasp_offset = 0.05;
  Pose place_pose;
  RetargetTolerance retarget;
  GraspTolerance grasp;
  double place_position_tol = 0.03;
  double place_angle_tol = 0.15;
  double gripper_time = 0.5;
  int detect_retries = 3;
  double recover_timeout = 10.0;
  int min_measurements = 10;  // filter updates before the first target

  GraspSpec grasp_spec() const {
    return GraspSpec(pregrasp_offset, place_pose, retarget);
  }
};

struct Config {
  RobotModel robot;
  ControlConfig control;
  PlannerConfig planner;
  FilterSettings filter;
  SensorProfile sensor;
  std::vector<SceneObject> objects;
  TaskConfig task;

  /// Throws kConfig describing the first inconsistency.
  void validate() const;
};

/// Parses YAML text. Missing keys take the defaults above.
Config parse_config(const std::string& yaml_text);
Config load_config(const std::string& path);

/// The bundled config/default.yaml.
Config default_config();
std::string default_config_path();

/// Replaces every object's motion with a named preset:
/// static | linear | sinusoid | jitter.
void set_object_motion(Config& config, const std::string& preset);

}  // namespace mpgrasp
