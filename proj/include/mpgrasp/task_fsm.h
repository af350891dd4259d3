#pragma once

#include <string_view>
#include <utility>

#include "mpgrasp/geom_se3.h"

namespace mpgrasp {

enum class TaskPhase {
  kIdle,
  kDetecting,
  kApproachGrasp,
  kCloseGripper,
  kTransfer,
  kOpenGripper,
  kDone,
  kRecover,
};

enum class TaskEvent {
  kPromptReceived,
  kDetected,
  kDetectionFailed,
  kReachedGrasp,
  kGripperClosed,
  kReachedPlace,
  kGripperOpened,
  kTrackingLost,
  kTrackingRegained,
};

std::string_view to_string(TaskPhase phase);
std::string_view to_string(TaskEvent event);

/// Throws kIllegalEvent for edges the task graph does not define.
TaskPhase step_fsm(TaskPhase phase, TaskEvent event);

struct RetargetTolerance {
  double position = 0.02;  // m
  double angle = 0.2;      // rad
};

class GraspSpec {
 public:
  /// Throws kInvalidArgument unless pregrasp_offset > 0.
  explicit GraspSpec(double pregrasp_offset = 0.05, Pose place_pose = {},
                     RetargetTolerance retarget = {});

  double pregrasp_offset() const { return offset_; }
  const Pose& place_pose() const { return place_; }
  const RetargetTolerance& retarget() const { return retarget_; }

 private:
  double offset_;
  Pose place_;
  RetargetTolerance retarget_;
};

struct GraspTargets {
  Pose pregrasp;
  Pose grasp;
};

/// Top-down grasp: position from object_pose * grasp_offset, tool z pointing
/// down, and only the heading of the object kept. The pre-grasp sits
/// pregrasp_offset above along world z.
GraspTargets derive_grasp_targets(const Pose& object_pose, const GraspSpec& spec,
                                  const Pose& grasp_offset = {});

/// Tool targets that put a held object at the place pose, with the
/// pre-place above it.
GraspTargets derive_place_targets(const GraspSpec& spec,
                                  const Pose& grasp_offset = {});

/// Tool orientation pointing down with the given heading.
Mat3 top_down_rotation(double yaw);

/// Heading of R's x axis projected on the horizontal plane.
double heading(const Mat3& R);

/// True iff the poses differ by strictly more than either tolerance.
bool retarget_gate(const Pose& old_pose, const Pose& new_pose,
                   const RetargetTolerance& tol);

}  // namespace mpgrasp
