#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "mpgrasp/geom_se3.h"
#include "mpgrasp/pose_filter.h"

namespace mpgrasp {

using Rng = std::mt19937_64;

struct StaticMotion {};

/// Constant velocity for `duration` seconds, then holds still.
struct LinearMotion {
  Vec3 velocity = Vec3::Zero();
  double duration = std::numeric_limits<double>::infinity();
};

struct SinusoidMotion {
  Vec3 axis = Vec3::UnitX();  // normalized on use
  double amplitude = 0.0;     // m
  double frequency = 0.0;     // Hz
};

/// Seeded random-walk acceleration with a weak spring towards the start
/// pose, standing in for an object carried by an unsteady hand.
struct JitterMotion {
  std::uint64_t seed = 1;
  double accel_sigma = 0.5;   // m/s^2 per sqrt(s)
  double stiffness = 4.0;     // 1/s^2
  double damping = 3.0;       // 1/s
  double horizon = 300.0;     // s, held still afterwards
};

using MotionPreset =
    std::variant<StaticMotion, LinearMotion, SinusoidMotion, JitterMotion>;

class JitterTrack;

struct SceneObject {
  std::string id;
  std::vector<std::string> labels;
  MotionPreset motion = StaticMotion{};
  Pose initial_pose;
  Pose grasp_offset;  // object frame -> grasp frame
  Vec3 extents = Vec3::Constant(0.05);

  void validate() const;
};

/// Immutable scene; precomputes jitter tracks at construction.
class Scene {
 public:
  Scene() = default;
  explicit Scene(std::vector<SceneObject> objects);

  const std::vector<SceneObject>& objects() const { return objects_; }
  const SceneObject& object(const std::string& id) const;
  bool contains(const std::string& id) const;

  /// Ground truth pose of `id` at time t. Throws kUnknownObject.
  Pose truth(const std::string& id, double t) const;

 private:
  std::vector<SceneObject> objects_;
  std::vector<std::shared_ptr<const JitterTrack>> jitter_;
};

struct SensorProfile {
  double rate = 30.0;          // Hz
  double latency = 0.083;      // s
  double sigma_p = 0.005;      // m
  double sigma_o = 0.05;       // rad
  double dropout_prob = 0.0;
  double outlier_prob = 0.0;
  double outlier_scale = 10.0;
  double detect_latency = 0.5;     // s
  double detect_fail_prob = 0.08;

  void validate() const;
};

struct Detection {
  std::string object_id;
  double latency = 0.0;  // s until the result is available
};

/// Lowercases the prompt, drops the leading command words, and matches the
/// remaining tokens against object labels by token overlap.
/// Throws kNoMatch, kAmbiguous, or (with detect_fail_prob) kDetectionFailed.
Detection resolve_prompt(const std::string& prompt, const Scene& scene,
                         const SensorProfile& profile, Rng& rng);

Pose object_pose_truth(const Scene& scene, const std::string& id, double t);

/// Noisy, delayed pose sample at time t; std::nullopt is a dropout.
std::optional<PoseMeasurement> sense_pose(const Scene& scene,
                                          const std::string& id, double t,
                                          const SensorProfile& profile,
                                          Rng& rng);

/// Same sampling model applied to an externally supplied truth pose.
std::optional<PoseMeasurement> sample_measurement(const Pose& truth, double t,
                                                  const SensorProfile& profile,
                                                  Rng& rng);

}  // namespace mpgrasp
