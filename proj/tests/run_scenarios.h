#pragma once
// Closed-loop scenarios shared by the runtime tests and the acceptance binary.

#include <cstdint>
#include <random>

#include "mpgrasp/config.h"
#include "mpgrasp/runtime.h"
#include "filter_scenarios.h"

namespace mpgrasp::testing {

inline RunOptions quiet_options(std::uint64_t seed, double duration) {
  RunOptions o;
  o.seed = seed;
  o.duration = duration;
  o.control_log_stride = 0;
  o.log_sensor = false;
  o.stop_when_done = true;
  return o;
}

// Drill placed uniformly on a patch of the table with a random heading.
inline Config random_static_scene(const Config& base, std::uint64_t scene_seed) {
  Config c = base;
  set_object_motion(c, "static");
  std::mt19937_64 rng(scene_seed);
  std::uniform_real_distribution<double> x(0.45, 0.65), y(-0.15, 0.25), yaw(-M_PI, M_PI);
  SceneObject& drill = c.objects.front();
  drill.initial_pose = {Vec3(x(rng), y(rng), drill.initial_pose.p.z()), rot_z(yaw(rng))};
  return c;
}

struct DisplacementOutcome {
  bool done = false;
  double t_displaced = -1.0;
  double t_sample = -1.0;  // first measurement whose payload shows the move
  double t_plan = -1.0;    // first plan carrying new targets after that
  int retargets = 0;
  double latency() const { return t_plan - t_sample; }
  bool replanned() const { return t_sample >= 0.0 && t_plan >= 0.0; }
};

// Moves the target `distance` along +y once the approach targets are `delay`
// seconds old.
inline DisplacementOutcome displacement_run(const Config& base, std::uint64_t seed,
                                            double distance = 0.15, double limit = 30.0,
                                            double delay = 0.5) {
  RunOptions opt = quiet_options(seed, limit);
  opt.log_sensor = true;
  Runtime rt(base, opt);
  DisplacementOutcome out;
  double t_targets = -1.0;
  while (!rt.failed() && rt.phase() != TaskPhase::kDone && rt.time() < limit) {
    rt.step();
    if (out.t_displaced >= 0.0 || rt.phase() != TaskPhase::kApproachGrasp) continue;
    if (!rt.active_targets()) continue;
    if (t_targets < 0.0) t_targets = rt.time();
    if (rt.time() - t_targets >= delay) {
      const std::string id = *rt.target_id();
      Pose moved = rt.object_pose(id);
      moved.p.y() += distance;
      rt.set_object_pose(id, moved);
      out.t_displaced = rt.time();
    }
  }
  out.done = rt.phase() == TaskPhase::kDone;
  const double latency = base.sensor.latency;
  for (const LogRecord& r : rt.log().records()) {
    if (out.t_displaced < 0.0) break;
    if (out.t_sample < 0.0 && r.type == "sensor" && !r.data["meas"].is_null() &&
        r.t - latency >= out.t_displaced - 1e-9) {
      out.t_sample = r.t;
    }
    if (out.t_sample >= 0.0 && out.t_plan < 0.0 && r.type == "plan" &&
        r.data["new_targets"].get<bool>()) {
      out.t_plan = r.t;
    }
  }
  out.retargets = static_cast<int>(rt.log().events("retarget").size());
  return out;
}

struct TrackingOutcome {
  int within = 0;
  int total = 0;
  double worst_position = 0.0;
  double worst_angle = 0.0;
  double fraction() const { return total ? static_cast<double>(within) / total : 0.0; }
};

// Sensor and filter on the sinusoid preset; the estimate is compared with
// the current truth, so sensor latency counts against it.
inline TrackingOutcome sinusoid_tracking(const Config& base, std::uint64_t seed, double duration,
                                         int settle = 10) {
  Config c = base;
  set_object_motion(c, "sinusoid");
  const Scene scene(c.objects);
  const std::string id = c.objects.front().id;
  PoseTracker tracker(calibrated_filter(c), c.filter.init_velocity_std,
                      c.filter.init_acceleration_std);
  Rng rng(seed);
  TrackingOutcome out;
  int updates = 0;
  const int steps = static_cast<int>(std::lround(duration * c.sensor.rate));
  for (int k = 0; k <= steps; ++k) {
    const double t = k / c.sensor.rate;
    const auto z = sense_pose(scene, id, t, c.sensor, rng);
    tracker.step(z);
    if (z) ++updates;
    if (updates < settle) continue;
    const PoseError e = pose_distance(tracker.state().pose(), scene.truth(id, t));
    out.worst_position = std::max(out.worst_position, e.position);
    out.worst_angle = std::max(out.worst_angle, e.angle);
    out.within += (e.position <= 0.02 && e.angle <= 0.15);
    ++out.total;
  }
  return out;
}

}  // namespace mpgrasp::testing
