#include "mpgrasp/runtime.h"

#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

#include "mpgrasp/error.h"

namespace mpgrasp {
namespace {


long to_ticks(double seconds) {
  return std::lround(seconds * Runtime::kTicksPerSecond);
}

Json vec_json(const VecX& v) {
  return Json(std::vector<double>(v.data(), v.data() + v.size()));
}

Json vec3_json(const Vec3& v) { return Json({v.x(), v.y(), v.z()}); }

bool at_rest(const Knot& k) {
  return k.qd.isZero(0.0) && k.qdd.isZero(0.0) && k.u.isZero(0.0);
}

Rng stream(std::uint64_t seed, std::uint64_t id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(id)};
  return Rng(seq);
}

Trajectory hold(const VecX& q, double h) {
  const int m = static_cast<int>(q.size());
  Knot k{q, VecX::Zero(m), VecX::Zero(m), VecX::Zero(m)};
  Trajectory t;
  t.knots = {k, k};
  t.h = h;
  t.split = 2;
  t.stats.converged = true;
  return t;
}

using WallClock = std::chrono::steady_clock;

double seconds_since(WallClock::time_point start) {
  return std::chrono::duration<double>(WallClock::now() - start).count();
}

}  // namespace

Json pose_json(const Pose& pose) {
  return Json{{"p", vec3_json(pose.p)}, {"o", vec3_json(rot_to_euler(pose.R).o)}};
}

Runtime::Runtime(Config config, RunOptions options)
    : cfg_(std::move(config)),
      opt_(options),
      nominal_(cfg_.robot),
      plant_model_(cfg_.robot.with_mass_scale(cfg_.control.mass_mismatch)),
      collision_model_(std::make_shared<const RobotModel>(cfg_.robot)),
      scene_(cfg_.objects),
      spec_(cfg_.task.grasp_spec()),
      detect_rng_(stream(options.seed, 1)),
      sensor_rng_(stream(options.seed, 2)),
      tracker_(FilterConfig::white_jerk(1.0 / cfg_.sensor.rate,
                                        cfg_.filter.jerk_psd_position,
                                        cfg_.filter.jerk_psd_orientation,
                                        cfg_.sensor.sigma_p, cfg_.sensor.sigma_o),
               cfg_.filter.init_velocity_std, cfg_.filter.init_acceleration_std) {
  cfg_.validate();
  const double duration = opt_.duration >= 0.0 ? opt_.duration : cfg_.task.duration;
  end_tick_ = to_ticks(duration);
  sensor_ticks_ = to_ticks(1.0 / cfg_.sensor.rate);
  planner_ticks_ = to_ticks(cfg_.planner.h);
  control_ticks_ = to_ticks(cfg_.control.dt);
  plant_ = {cfg_.task.home, VecX::Zero(nominal_.dof())};
  traj_ = std::make_shared<const Trajectory>(hold(cfg_.task.home, cfg_.planner.h));
  traj_tick_ = 0;
  log_.event(0.0, "run_start",
             {{"seed", opt_.seed},
              {"clock", opt_.clock == ClockMode::kVirtual ? "virtual" : "realtime"},
              {"duration", duration},
              {"phase", to_string(phase_)}});
}

Runtime::~Runtime() = default;

Pose Runtime::end_effector() const {
  return forward_kinematics(nominal_, plant_.q);
}

Pose Runtime::object_pose_at(const std::string& id, double t) const {
  if (attached_ && target_ && *target_ == id) {
    return forward_kinematics(plant_model_, plant_.q) * attach_rel_;
  }
  if (auto it = released_.find(id); it != released_.end()) return it->second;
  if (auto it = overrides_.find(id); it != overrides_.end()) {
    const Pose* held = nullptr;
    for (const auto& [stamp, pose] : it->second) {
      if (stamp <= t + 1e-12) held = &pose;
    }
    if (held != nullptr) return *held;
  }
  return scene_.truth(id, std::max(t, 0.0));
}

Pose Runtime::object_pose(const std::string& id) const {
  return object_pose_at(id, time());
}

std::optional<FilterState> Runtime::filter_state() const {
  return estimates_.peek();
}

std::optional<GraspTargets> Runtime::active_targets() const {
  if (!targets_) return std::nullopt;
  return targets_->poses;
}

void Runtime::fire(TaskEvent event, Json data) {
  const TaskPhase from = phase_;
  phase_ = step_fsm(phase_, event);
  data["from"] = to_string(from);
  data["phase"] = to_string(phase_);
  log_.event(time(), std::string(to_string(event)), std::move(data));
}

void Runtime::prompt(const std::string& text) {
  if (text.empty()) throw Error(ErrorCode::kInvalidArgument, "empty prompt");
  fire(TaskEvent::kPromptReceived, {{"text", text}});
  prompt_text_ = text;
  detect_attempt_ = 0;
  start_detection();
}

void Runtime::start_detection() {
  ++detect_attempt_;
  detection_ = PendingDetection{};
  try {
    const Detection d = resolve_prompt(prompt_text_, scene_, cfg_.sensor, detect_rng_);
    detection_.object_id = d.object_id;
    detection_.due = tick_ + std::max(1L, to_ticks(d.latency));
  } catch (const Error& e) {
    detection_.error = e.code();
    detection_.reason = e.what();
    detection_.due = tick_ + std::max(1L, to_ticks(cfg_.sensor.detect_latency));
  }
}

void Runtime::set_object_pose(const std::string& id, const Pose& pose) {
  if (!scene_.contains(id)) {
    throw Error(ErrorCode::kUnknownObject, "no object '" + id + "'");
  }
  if (!pose.p.allFinite() || !pose.R.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "object pose not finite");
  }
  overrides_[id].emplace_back(time(), pose);
  log_.event(time(), "object_override", {{"id", id}, {"pose", pose_json(pose)}});
}

void Runtime::run_until(double t) {
  const long stop = to_ticks(t);
  while (tick_ < stop && !failed_) step();
}

void Runtime::step() {
  if (failed_) return;
  run_scheduled();
  if (failed_) return;
  const auto timed = [this](void (Runtime::*stage)(), const char* name, double period) {
    if (opt_.clock == ClockMode::kVirtual) {
      (this->*stage)();
      return;
    }
    const auto start = WallClock::now();
    (this->*stage)();
    const double spent = seconds_since(start);
    if (spent > period) {
      log_.event(time(), "overrun", {{"stage", name}, {"wall_time", spent}});
    }
  };
  if (tick_ % sensor_ticks_ == 0) {
    timed(&Runtime::sensor_stage, "sensor", 1.0 / cfg_.sensor.rate);
  }
  if (tick_ % planner_ticks_ == 0) timed(&Runtime::planner_stage, "planner", cfg_.planner.h);
  if (tick_ % control_ticks_ == 0) {
    timed(&Runtime::controller_stage, "controller", cfg_.control.dt);
  }
  ++tick_;
}

void Runtime::run_scheduled() {
  if (cfg_.task.auto_prompt && phase_ == TaskPhase::kIdle && detect_attempt_ == 0 &&
      tick_ == to_ticks(cfg_.task.prompt_time)) {
    prompt(cfg_.task.prompt);
  }
  if (phase_ == TaskPhase::kDetecting && detection_.due == tick_) {
    if (detection_.object_id) {
      target_ = detection_.object_id;
      tracker_.reset();
      updates_ = 0;
      fire(TaskEvent::kDetected, {{"id", *target_}, {"attempt", detect_attempt_}});
    } else if (detection_.error == ErrorCode::kDetectionFailed &&
               detect_attempt_ <= cfg_.task.detect_retries) {
      log_.event(time(), "detection_retry", {{"attempt", detect_attempt_}});
      start_detection();
    } else {
      fire(TaskEvent::kDetectionFailed,
           {{"reason", detection_.reason}, {"attempt", detect_attempt_}});
    }
  }
  if (gripper_due_ == tick_) {
    gripper_due_ = -1;
    if (phase_ == TaskPhase::kCloseGripper) {
      fire(TaskEvent::kGripperClosed);
      const GraspTargets place =
          derive_place_targets(spec_, scene_.object(*target_).grasp_offset);
      targets_.reset();
      if (!set_targets(place, "place_targets")) {
        log_.event(time(), "place_unreachable");
      }
    } else if (phase_ == TaskPhase::kOpenGripper) {
      fire(TaskEvent::kGripperOpened, {{"success", success_}});
    }
  }
  if (phase_ == TaskPhase::kRecover &&
      tick_ - recover_start_ > to_ticks(cfg_.task.recover_timeout)) {
    failed_ = true;
    log_.event(time(), "run_failed", {{"reason", "tracking not regained"}});
  }
}

void Runtime::sensor_stage() {
  ++counts_.sensor;
  const bool tracking = target_ && (phase_ == TaskPhase::kApproachGrasp ||
                                    phase_ == TaskPhase::kRecover);
  if (!tracking) return;
  const double t = time();
  const Pose truth = object_pose_at(*target_, t - cfg_.sensor.latency);
  measurements_.put(sample_measurement(truth, t, cfg_.sensor, sensor_rng_));

  // Filter stage: consumes the latest measurement slot.
  if (auto slot = measurements_.take()) {
    const std::optional<PoseMeasurement>& z = *slot;
    tracker_.step(z);
    if (z) ++updates_;
    if (tracker_.initialized()) estimates_.put(tracker_.state());
    if (opt_.log_sensor) {
      Json rec = {{"id", *target_}};
      rec["meas"] = z ? Json{{"p", vec3_json(z->p)}, {"o", vec3_json(z->o.o)}} : Json();
      if (tracker_.initialized()) {
        rec["est"] = {{"p", vec3_json(tracker_.state().position())},
                      {"o", vec3_json(tracker_.state().orientation())}};
      }
      log_.add(t, "sensor", std::move(rec));
    }
    if (phase_ == TaskPhase::kApproachGrasp && tracker_.coasting()) {
      recover_start_ = tick_;
      fire(TaskEvent::kTrackingLost, {{"dropouts", tracker_.consecutive_dropouts()}});
    } else if (phase_ == TaskPhase::kRecover && z) {
      fire(TaskEvent::kTrackingRegained);
    }
  }
}

bool Runtime::set_targets(const GraspTargets& poses, const char* reason) {
  const VecX seed = targets_ ? targets_->q_waypoint : plant_.q;
  JointTargets next;
  next.poses = poses;
  try {
    next.q_waypoint = inverse_kinematics(nominal_, poses.pregrasp, seed);
    // The goal solution is chosen nearest to the waypoint solution.
    next.q_goal = inverse_kinematics(nominal_, poses.grasp, next.q_waypoint);
  } catch (const Error& e) {
    log_.event(time(), "ik_failed", {{"reason", e.what()}, {"for", reason}});
    return false;
  }
  targets_ = std::move(next);
  waypoint_armed_ = true;
  committed_ = false;
  targets_changed_ = true;
  log_.event(time(), reason,
             {{"pregrasp", pose_json(poses.pregrasp)},
              {"grasp", pose_json(poses.grasp)},
              {"q_waypoint", vec_json(targets_->q_waypoint)},
              {"q_goal", vec_json(targets_->q_goal)}});
  return true;
}

void Runtime::planner_stage() {
  ++counts_.planner;
  if (phase_ == TaskPhase::kApproachGrasp && updates_ >= cfg_.task.min_measurements) {
    if (auto est = estimates_.peek()) {
      const GraspTargets cand =
          derive_grasp_targets(est->pose(), spec_, scene_.object(*target_).grasp_offset);
      if (!targets_) {
        set_targets(cand, "targets");
      } else if (retarget_gate(targets_->poses.grasp, cand.grasp, spec_.retarget())) {
        set_targets(cand, "retarget");
      }
    }
  }
  const bool moving_phase = phase_ == TaskPhase::kApproachGrasp ||
                            phase_ == TaskPhase::kRecover ||
                            phase_ == TaskPhase::kTransfer;
  if (moving_phase && targets_) plan();
}

void Runtime::plan() {
  const PlannerConfig& pc = cfg_.planner;
  const long elapsed = tick_ - traj_tick_;
  const Trajectory& current = *traj_;
  const Knot head = sample_knot(current, static_cast<double>(elapsed) / kTicksPerSecond);
  const Trajectory* previous = elapsed == planner_ticks_ ? traj_.get() : nullptr;

  PlanProblem p;
  p.head = head;
  p.h = pc.h;
  p.goal = {targets_->q_goal, VecX::Constant(nominal_.dof(), pc.goal_half_width)};
  p.bounds = PlanBounds::from_limits(nominal_.limits);
  p.weights = pc.weights;
  p.collision.robot = collision_model_;
  p.collision.obstacles = pc.obstacles;
  p.collision.safety_margin = pc.safety_margin;
  p.time_budget = opt_.clock == ClockMode::kVirtual
                      ? std::numeric_limits<double>::infinity()
                      : pc.time_budget;
  p.max_iterations = pc.max_iterations;
  const ToleranceSet waypoint{targets_->q_waypoint,
                              VecX::Constant(nominal_.dof(), pc.waypoint_half_width)};

  const int floor = at_rest(head) ? pc.n_min : std::max(pc.n_min, 4);
  if (committed_ && previous != nullptr) {
    p.N = std::max(n_prev_ - 1, floor);
    if (waypoint_armed_) {
      p.N_s = ns_prev_ - 1;
      if (p.N_s <= 1) waypoint_armed_ = false;
    }
    if (waypoint_armed_) {
      p.waypoint = waypoint;
    } else {
      p.N_s = p.N;
    }
  } else {
    committed_ = false;
    const HorizonLimits lim{nominal_.limits.velocity * pc.timing_scale,
                            nominal_.limits.acceleration * pc.timing_scale,
                            nominal_.limits.jerk};
    std::optional<VecX> way;
    if (waypoint_armed_) way = targets_->q_waypoint;
    const HorizonLengths hl =
        horizon_lengths(head, way, targets_->q_goal, lim, pc.h, pc.n_max, pc.n_min);
    p.N = hl.total;
    if (waypoint_armed_ && !hl.waypoint_reachable) {
      // Too far for the split: head for the waypoint over the whole horizon.
      p.waypoint = waypoint;
      p.N_s = p.N;
      p.enforce_waypoint = false;
      p.enforce_goal = false;
    } else {
      if (waypoint_armed_) p.waypoint = waypoint;
      p.N_s = hl.split;
      committed_ = hl.goal_reachable;
      if (!hl.goal_reachable) p.enforce_goal = false;
    }
  }

  std::shared_ptr<const Trajectory> next;
  try {
    next = std::make_shared<const Trajectory>(solve(p, previous));
  } catch (const Error& e) {
    committed_ = false;
    log_.event(time(), "plan_failed", {{"reason", e.what()}});
    return;
  }
  n_prev_ = p.N;
  ns_prev_ = p.waypoint ? p.N_s : p.N;
  traj_ = next;
  traj_tick_ = tick_;
  log_plan(*next, targets_changed_);
  targets_changed_ = false;
}

void Runtime::log_plan(const Trajectory& traj, bool replanned_targets) {
  Json rec;
  rec["N"] = traj.size();
  rec["N_s"] = traj.split;
  rec["iterations"] = traj.stats.iterations;
  rec["converged"] = traj.stats.converged;
  rec["relaxed"] = traj.stats.relaxed;
  rec["objective"] = traj.stats.objective;
  rec["waypoint_center"] = vec_json(targets_->q_waypoint);
  rec["goal_center"] = vec_json(targets_->q_goal);
  rec["waypoint_active"] = waypoint_armed_;
  rec["new_targets"] = replanned_targets;
  if (opt_.clock == ClockMode::kRealtime) rec["wall_time"] = traj.stats.wall_time;
  Json knots = Json::array();
  for (const Knot& k : traj.knots) knots.push_back(vec_json(k.q));
  rec["knots"] = std::move(knots);
  log_.add(time(), "plan", std::move(rec));
}

void Runtime::controller_stage() {
  ++counts_.control;
  const double t = time();
  const Knot ref = sample_knot(*traj_, static_cast<double>(tick_ - traj_tick_) /
                                           kTicksPerSecond);
  const bool resting = plant_.qd.cwiseAbs().maxCoeff() < cfg_.task.grasp.speed;

  if (phase_ == TaskPhase::kApproachGrasp && targets_ && resting) {
    const Pose ee = end_effector();
    const PoseError e = pose_distance(ee, targets_->poses.grasp);
    if (e.position <= cfg_.task.grasp.position && e.angle <= cfg_.task.grasp.angle) {
      const Pose obj = object_pose_at(*target_, t);
      const GraspTargets truth_targets =
          derive_grasp_targets(obj, spec_, scene_.object(*target_).grasp_offset);
      const PoseError te = pose_distance(ee, truth_targets.grasp);
      fire(TaskEvent::kReachedGrasp, {{"ee_error", {e.position, e.angle}},
                                      {"truth_error", {te.position, te.angle}}});
      log_.event(t, "gripper_close", {{"phase", to_string(phase_)}});
      attached_ = true;
      attach_rel_ = forward_kinematics(plant_model_, plant_.q).inverse() * obj;
      gripper_due_ = tick_ + std::max(1L, to_ticks(cfg_.task.gripper_time));
    }
  } else if (phase_ == TaskPhase::kTransfer && targets_ && resting) {
    const PoseError e = pose_distance(end_effector(), targets_->poses.grasp);
    if (e.position <= cfg_.task.place_position_tol &&
        e.angle <= cfg_.task.place_angle_tol) {
      const Pose obj = object_pose_at(*target_, t);
      const PoseError oe = pose_distance(obj, spec_.place_pose());
      success_ = oe.position <= cfg_.task.place_position_tol &&
                 oe.angle <= cfg_.task.place_angle_tol;
      fire(TaskEvent::kReachedPlace, {{"ee_error", {e.position, e.angle}}});
      log_.event(t, "gripper_open", {{"phase", to_string(phase_)}});
      attached_ = false;
      released_[*target_] = obj;
      log_.event(t, "released", {{"success", success_},
                                 {"object_error", {oe.position, oe.angle}},
                                 {"pose", pose_json(obj)}});
      gripper_due_ = tick_ + std::max(1L, to_ticks(cfg_.task.gripper_time));
    }
  }

  const ServoReference sref{ref.q, ref.qd, ref.qdd};
  const VecX u = feedback_accel(sref, plant_.q, plant_.qd, cfg_.control.gains);
  const VecX tau = computed_torque(nominal_, plant_.q, plant_.qd, u);
  if (opt_.control_log_stride > 0 && (counts_.control - 1) % opt_.control_log_stride == 0) {
    log_.add(t, "control", {{"q", vec_json(plant_.q)},
                            {"qd", vec_json(plant_.qd)},
                            {"q_ref", vec_json(ref.q)},
                            {"tau", vec_json(tau)}});
  }
  try {
    plant_ = plant_step(plant_model_, plant_, tau, cfg_.control.dt);
  } catch (const Error& e) {
    failed_ = true;
    log_.event(t, "run_failed", {{"reason", e.what()}});
  }
}

SceneSnapshot Runtime::snapshot() const {
  SceneSnapshot s;
  s.t = time();
  s.robot_q = plant_.q;
  for (const auto& o : scene_.objects()) s.objects.push_back({o.id, object_pose(o.id)});
  s.phase = phase_;
  for (const Knot& k : traj_->knots) s.plan_knots.push_back(k.q);
  s.target = target_;
  if (auto est = estimates_.peek()) s.filtered_pose = est->pose();
  s.success = success_;
  return s;
}

RunResult simulate(const Config& config, const RunOptions& options) {
  Runtime rt(config, options);
  const double duration = options.duration >= 0.0 ? options.duration : config.task.duration;
  const long end = std::lround(duration * Runtime::kTicksPerSecond);
  const auto wall_start = WallClock::now();
  while (rt.tick() < end && !rt.failed()) {
    if (options.clock == ClockMode::kRealtime) {
      const auto due = wall_start + std::chrono::duration_cast<WallClock::duration>(
                                        std::chrono::duration<double>(rt.time()));
      std::this_thread::sleep_until(due);
    }
    rt.step();
    if (options.stop_when_done && rt.phase() == TaskPhase::kDone) break;
  }
  RunResult r;
  r.success = rt.success() && rt.phase() == TaskPhase::kDone;
  r.failed = rt.failed();
  r.final_phase = rt.phase();
  r.ticks = rt.ticks();
  RunLog log = rt.take_log();
  log.event(rt.time(), "run_end", {{"success", r.success},
                                   {"failed", r.failed},
                                   {"phase", to_string(r.final_phase)},
                                   {"sensor_ticks", r.ticks.sensor},
                                   {"planner_ticks", r.ticks.planner},
                                   {"control_ticks", r.ticks.control}});
  r.log = std::move(log);
  return r;
}

RunLog run_closed_loop(const Config& config, ClockMode mode, std::uint64_t seed) {
  RunOptions opt;
  opt.clock = mode;
  opt.seed = seed;
  RunResult r = simulate(config, opt);
  if (r.failed) {
    throw Error(ErrorCode::kRunFailed, "run aborted; see the run_failed event");
  }
  return std::move(r.log);
}

}  // namespace mpgrasp
