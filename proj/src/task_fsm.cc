#include "mpgrasp/task_fsm.h"

#include <cmath>
#include <string>

#include "mpgrasp/error.h"

namespace mpgrasp {

std::string_view to_string(TaskPhase phase) {
  switch (phase) {
    case TaskPhase::kIdle: return "Idle";
    case TaskPhase::kDetecting: return "Detecting";
    case TaskPhase::kApproachGrasp: return "ApproachGrasp";
    case TaskPhase::kCloseGripper: return "CloseGripper";
    case TaskPhase::kTransfer: return "Transfer";
    case TaskPhase::kOpenGripper: return "OpenGripper";
    case TaskPhase::kDone: return "Done";
    case TaskPhase::kRecover: return "Recover";
  }
  return "?";
}

std::string_view to_string(TaskEvent event) {
  switch (event) {
    case TaskEvent::kPromptReceived: return "prompt_received";
    case TaskEvent::kDetected: return "detected";
    case TaskEvent::kDetectionFailed: return "detection_failed";
    case TaskEvent::kReachedGrasp: return "reached_grasp";
    case TaskEvent::kGripperClosed: return "gripper_closed";
    case TaskEvent::kReachedPlace: return "reached_place";
    case TaskEvent::kGripperOpened: return "gripper_opened";
    case TaskEvent::kTrackingLost: return "tracking_lost";
    case TaskEvent::kTrackingRegained: return "tracking_regained";
  }
  return "?";
}

TaskPhase step_fsm(TaskPhase phase, TaskEvent event) {
  using P = TaskPhase;
  using E = TaskEvent;
  switch (phase) {
    case P::kIdle:
      if (event == E::kPromptReceived) return P::kDetecting;
      break;
    case P::kDetecting:
      if (event == E::kDetected) return P::kApproachGrasp;
      if (event == E::kDetectionFailed) return P::kIdle;
      break;
    case P::kApproachGrasp:
      if (event == E::kReachedGrasp) return P::kCloseGripper;
      if (event == E::kTrackingLost) return P::kRecover;
      break;
    case P::kCloseGripper:
      if (event == E::kGripperClosed) return P::kTransfer;
      break;
    case P::kTransfer:
      if (event == E::kReachedPlace) return P::kOpenGripper;
      break;
    case P::kOpenGripper:
      if (event == E::kGripperOpened) return P::kDone;
      break;
    case P::kRecover:
      if (event == E::kTrackingRegained) return P::kApproachGrasp;
      break;
    case P::kDone:
      break;
  }
  throw Error(ErrorCode::kIllegalEvent, std::string(to_string(event)) + " in " +
                                            std::string(to_string(phase)));
}

GraspSpec::GraspSpec(double pregrasp_offset, Pose place_pose,
                     RetargetTolerance retarget)
    : offset_(pregrasp_offset), place_(std::move(place_pose)), retarget_(retarget) {
  if (!(pregrasp_offset > 0.0) || !std::isfinite(pregrasp_offset)) {
    throw Error(ErrorCode::kInvalidArgument, "pregrasp offset must be positive");
  }
  if (!(retarget.position > 0.0) || !(retarget.angle > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "retarget tolerance must be positive");
  }
}

Mat3 top_down_rotation(double yaw) {
  // Tool x along the heading, tool z along -world z.
  return rot_z(yaw) * Eigen::AngleAxisd(M_PI, Vec3::UnitX()).toRotationMatrix();
}

double heading(const Mat3& R) {
  return std::atan2(R(1, 0), R(0, 0));
}

GraspTargets derive_grasp_targets(const Pose& object_pose, const GraspSpec& spec,
                                  const Pose& grasp_offset) {
  const Pose raw = object_pose * grasp_offset;
  GraspTargets out;
  out.grasp.p = raw.p;
  out.grasp.R = top_down_rotation(heading(raw.R));
  out.pregrasp = out.grasp;
  out.pregrasp.p.z() += spec.pregrasp_offset();
  return out;
}

GraspTargets derive_place_targets(const GraspSpec& spec,
                                  const Pose& grasp_offset) {
  return derive_grasp_targets(spec.place_pose(), spec, grasp_offset);
}

bool retarget_gate(const Pose& old_pose, const Pose& new_pose,
                   const RetargetTolerance& tol) {
  const PoseError e = pose_distance(old_pose, new_pose);
  return e.position > tol.position || e.angle > tol.angle;
}

}  // namespace mpgrasp
