#include "mpgrasp/config.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "mpgrasp/error.h"

namespace mpgrasp {
namespace {

[[noreturn]] void fail(const std::string& what) {
  throw Error(ErrorCode::kConfig, what);
}

template <typename T>
T get(const YAML::Node& n, const char* key, T fallback) {
  if (!n || !n[key]) return fallback;
  try {
    return n[key].as<T>();
  } catch (const YAML::Exception& e) {
    fail(std::string("bad value for '") + key + "': " + e.what());
  }
}

std::vector<double> numbers(const YAML::Node& n, const std::string& what) {
  if (!n.IsSequence()) fail(what + " must be a list");
  std::vector<double> out;
  for (const auto& item : n) {
    try {
      out.push_back(item.as<double>());
    } catch (const YAML::Exception&) {
      fail(what + " must contain numbers");
    }
  }
  return out;
}

Vec3 vec3(const YAML::Node& n, const std::string& what) {
  const auto v = numbers(n, what);
  if (v.size() != 3) fail(what + " needs 3 entries");
  return {v[0], v[1], v[2]};
}

Vec3 vec3_or(const YAML::Node& n, const char* key, const Vec3& fallback) {
  return n && n[key] ? vec3(n[key], key) : fallback;
}

VecX vecx(const YAML::Node& n, const std::string& what) {
  const auto v = numbers(n, what);
  return Eigen::Map<const VecX>(v.data(), static_cast<int>(v.size()));
}

Pose pose(const YAML::Node& n, const Pose& fallback = {}) {
  if (!n) return fallback;
  return Pose::from_xyz_rpy(vec3_or(n, "xyz", Vec3::Zero()),
                            vec3_or(n, "rpy", Vec3::Zero()));
}

Mat3 inertia(const YAML::Node& n) {
  const auto v = numbers(n, "inertia");
  Mat3 I = Mat3::Zero();
  if (v.size() == 3) {
    I.diagonal() << v[0], v[1], v[2];
  } else if (v.size() == 6) {  // ixx iyy izz ixy ixz iyz
    I << v[0], v[3], v[4], v[3], v[1], v[5], v[4], v[5], v[2];
  } else {
    fail("inertia needs 3 (diagonal) or 6 entries");
  }
  return I;
}

Sphere sphere(const YAML::Node& n) {
  return {vec3_or(n, "center", Vec3::Zero()), get(n, "radius", 0.0)};
}

RobotModel parse_robot(const YAML::Node& n) {
  if (!n || !n["joints"] || !n["joints"].IsSequence()) {
    fail("robot.joints missing");
  }
  RobotModel model;
  model.gravity = vec3_or(n, "gravity", model.gravity);
  model.tool = pose(n["tool"]);
  const YAML::Node joints = n["joints"];
  const int m = static_cast<int>(joints.size());
  JointLimits& lim = model.limits;
  for (VecX* v : {&lim.lower, &lim.upper, &lim.velocity, &lim.acceleration,
                  &lim.jerk, &lim.torque, &model.ik_weights}) {
    v->resize(m);
  }
  for (int i = 0; i < m; ++i) {
    const YAML::Node j = joints[i];
    Link link;
    link.dh = {get(j, "a", 0.0), get(j, "alpha", 0.0), get(j, "d", 0.0),
               get(j, "theta_offset", 0.0)};
    link.mass = get(j, "mass", 1.0);
    link.com = vec3_or(j, "com", Vec3::Zero());
    link.inertia = j["inertia"] ? inertia(j["inertia"]) : Mat3::Zero();
    if (j["spheres"]) {
      for (const auto& s : j["spheres"]) link.collision.push_back(sphere(s));
    }
    model.links.push_back(std::move(link));
    lim.lower(i) = get(j, "lower", -M_PI);
    lim.upper(i) = get(j, "upper", M_PI);
    lim.velocity(i) = get(j, "velocity", 1.5);
    lim.acceleration(i) = get(j, "acceleration", 5.0);
    lim.jerk(i) = get(j, "jerk", 30.0);
    lim.torque(i) = get(j, "torque", 100.0);
    model.ik_weights(i) = get(j, "ik_weight", 1.0);
  }
  return model;
}

MotionPreset parse_motion(const YAML::Node& n) {
  if (!n) return StaticMotion{};
  const std::string type = get<std::string>(n, "type", "static");
  if (type == "static") return StaticMotion{};
  if (type == "linear") {
    LinearMotion m;
    m.velocity = vec3_or(n, "velocity", m.velocity);
    m.duration = get(n, "duration", m.duration);
    return m;
  }
  if (type == "sinusoid") {
    SinusoidMotion m;
    m.axis = vec3_or(n, "axis", m.axis);
    m.amplitude = get(n, "amplitude", m.amplitude);
    m.frequency = get(n, "frequency", m.frequency);
    return m;
  }
  if (type == "jitter") {
    JitterMotion m;
    m.seed = get<std::uint64_t>(n, "seed", m.seed);
    m.accel_sigma = get(n, "accel_sigma", m.accel_sigma);
    m.stiffness = get(n, "stiffness", m.stiffness);
    m.damping = get(n, "damping", m.damping);
    m.horizon = get(n, "horizon", m.horizon);
    return m;
  }
  fail("unknown motion type '" + type + "'");
}

SceneObject parse_object(const YAML::Node& n) {
  SceneObject obj;
  obj.id = get<std::string>(n, "id", "");
  if (n["labels"]) {
    for (const auto& l : n["labels"]) obj.labels.push_back(l.as<std::string>());
  }
  obj.motion = parse_motion(n["motion"]);
  obj.initial_pose = pose(n["pose"]);
  obj.grasp_offset = pose(n["grasp_offset"]);
  obj.extents = vec3_or(n, "extents", obj.extents);
  return obj;
}

}  // namespace

void Config::validate() const {
  try {
    robot.validate();
    control.gains.validate();
    sensor.validate();
    for (const auto& o : objects) o.validate();
    task.grasp_spec();
  } catch (const Error& e) {
    fail(e.what());
  }
  const int m = robot.dof();
  if (control.gains.kv.size() != m) fail("gains size differs from robot dof");
  if (!(control.dt > 0.0 && control.dt <= 0.01)) fail("control dt must lie in (0, 0.01]");
  if (!(control.mass_mismatch > 0.0)) fail("mass_mismatch must be positive");
  if (task.home.size() != m) fail("task.home size differs from robot dof");
  if (((task.home - robot.limits.lower).array() < 0).any() ||
      ((task.home - robot.limits.upper).array() > 0).any()) {
    fail("task.home outside joint limits");
  }
  if (!(planner.h > 0) || planner.n_min < 2 || planner.n_max < planner.n_min) {
    fail("planner horizon settings invalid");
  }
  if (!(planner.timing_scale > 0.0 && planner.timing_scale <= 1.0)) {
    fail("planner.timing_scale must lie in (0, 1]");
  }
  if (!(planner.waypoint_half_width > 0 && planner.goal_half_width > 0)) {
    fail("tolerance half widths must be positive");
  }
  if (!(filter.jerk_psd_position > 0 && filter.jerk_psd_orientation > 0)) {
    fail("filter spectral densities must be positive");
  }
  if (task.detect_retries < 0 || !(task.gripper_time >= 0) ||
      !(task.duration > 0) || !(task.recover_timeout > 0)) {
    fail("task timing settings invalid");
  }
  // The virtual clock ticks in 1/3000 s; every period must be a whole number of ticks.
  const auto whole = [](double period) {
    const double ticks = period * 3000.0;
    return std::abs(ticks - std::round(ticks)) < 1e-6 && ticks >= 1.0;
  };
  if (!whole(control.dt) || !whole(1.0 / sensor.rate) || !whole(planner.h)) {
    fail("control dt, sensor period and planner h must be multiples of 1/3000 s");
  }
  for (std::size_t i = 0; i < objects.size(); ++i) {
    for (std::size_t j = i + 1; j < objects.size(); ++j) {
      if (objects[i].id == objects[j].id) fail("duplicate object id " + objects[i].id);
    }
  }
}

Config parse_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    fail(std::string("yaml: ") + e.what());
  }
  Config c;
  c.robot = parse_robot(root["robot"]);
  const int m = c.robot.dof();

  const YAML::Node g = root["gains"];
  c.control.gains = ServoGains::critically_damped(m, get(g, "omega", 20.0));
  if (g && g["kv"]) c.control.gains.kv = vecx(g["kv"], "gains.kv");
  if (g && g["kd"]) c.control.gains.kd = vecx(g["kd"], "gains.kd");
  c.control.dt = get(g, "dt", c.control.dt);
  c.control.mass_mismatch = get(g, "mass_mismatch", c.control.mass_mismatch);

  const YAML::Node p = root["planner"];
  PlannerConfig& pl = c.planner;
  pl.h = get(p, "h", pl.h);
  pl.n_max = get(p, "n_max", pl.n_max);
  pl.n_min = get(p, "n_min", pl.n_min);
  if (p && p["weights"]) {
    pl.weights.w1 = get(p["weights"], "w1", pl.weights.w1);
    pl.weights.w2 = get(p["weights"], "w2", pl.weights.w2);
    pl.weights.w3 = get(p["weights"], "w3", pl.weights.w3);
  }
  pl.waypoint_half_width = get(p, "waypoint_half_width", pl.waypoint_half_width);
  pl.goal_half_width = get(p, "goal_half_width", pl.goal_half_width);
  pl.safety_margin = get(p, "safety_margin", pl.safety_margin);
  pl.time_budget = get(p, "time_budget", pl.time_budget);
  pl.max_iterations = get(p, "max_iterations", pl.max_iterations);
  pl.timing_scale = get(p, "timing_scale", pl.timing_scale);
  if (p && p["obstacles"]) {
    for (const auto& o : p["obstacles"]) pl.obstacles.push_back(sphere(o));
  }

  const YAML::Node f = root["filter"];
  c.filter.jerk_psd_position = get(f, "jerk_psd_position", c.filter.jerk_psd_position);
  c.filter.jerk_psd_orientation =
      get(f, "jerk_psd_orientation", c.filter.jerk_psd_orientation);
  c.filter.init_velocity_std = get(f, "init_velocity_std", c.filter.init_velocity_std);
  c.filter.init_acceleration_std =
      get(f, "init_acceleration_std", c.filter.init_acceleration_std);

  const YAML::Node s = root["sensor"];
  SensorProfile& sp = c.sensor;
  sp.rate = get(s, "rate", sp.rate);
  sp.latency = get(s, "latency", sp.latency);
  sp.sigma_p = get(s, "sigma_p", sp.sigma_p);
  sp.sigma_o = get(s, "sigma_o", sp.sigma_o);
  sp.dropout_prob = get(s, "dropout_prob", sp.dropout_prob);
  sp.outlier_prob = get(s, "outlier_prob", sp.outlier_prob);
  sp.outlier_scale = get(s, "outlier_scale", sp.outlier_scale);
  sp.detect_latency = get(s, "detect_latency", sp.detect_latency);
  sp.detect_fail_prob = get(s, "detect_fail_prob", sp.detect_fail_prob);

  const YAML::Node scene = root["scene"];
  if (scene && scene["objects"]) {
    for (const auto& o : scene["objects"]) c.objects.push_back(parse_object(o));
  }

  const YAML::Node t = root["task"];
  TaskConfig& task = c.task;
  task.prompt = get(t, "prompt", task.prompt);
  task.auto_prompt = get(t, "auto_prompt", task.auto_prompt);
  task.prompt_time = get(t, "prompt_time", task.prompt_time);
  task.duration = get(t, "duration", task.duration);
  task.home = t && t["home"] ? vecx(t["home"], "task.home") : VecX::Zero(m);
  task.pregrasp_offset = get(t, "pregrasp_offset", task.pregrasp_offset);
  if (t) task.place_pose = pose(t["place_pose"], task.place_pose);
  if (t && t["retarget_tolerance"]) {
    task.retarget.position = get(t["retarget_tolerance"], "position", task.retarget.position);
    task.retarget.angle = get(t["retarget_tolerance"], "angle", task.retarget.angle);
  }
  if (t && t["grasp_tolerance"]) {
    const YAML::Node gt = t["grasp_tolerance"];
    task.grasp.position = get(gt, "position", task.grasp.position);
    task.grasp.angle = get(gt, "angle", task.grasp.angle);
    task.grasp.speed = get(gt, "speed", task.grasp.speed);
  }
  if (t && t["place_tolerance"]) {
    task.place_position_tol = get(t["place_tolerance"], "position", task.place_position_tol);
    task.place_angle_tol = get(t["place_tolerance"], "angle", task.place_angle_tol);
  }
  task.gripper_time = get(t, "gripper_time", task.gripper_time);
  task.detect_retries = get(t, "detect_retries", task.detect_retries);
  task.recover_timeout = get(t, "recover_timeout", task.recover_timeout);
  task.min_measurements = get(t, "min_measurements", task.min_measurements);

  c.validate();
  return c;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string default_config_path() {
  return std::string(MPGRASP_CONFIG_DIR) + "/default.yaml";
}

Config default_config() { return load_config(default_config_path()); }

void set_object_motion(Config& config, const std::string& preset) {
  MotionPreset motion;
  if (preset == "static") {
    motion = StaticMotion{};
  } else if (preset == "linear") {
    motion = LinearMotion{Vec3(0.0, 0.05, 0.0), 4.0};
  } else if (preset == "sinusoid") {
    motion = SinusoidMotion{Vec3::UnitY(), 0.1, 0.15};
  } else if (preset == "jitter") {
    motion = JitterMotion{};
  } else {
    fail("unknown motion preset '" + preset + "'");
  }
  for (auto& o : config.objects) o.motion = motion;
}

}  // namespace mpgrasp
