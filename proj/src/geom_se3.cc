#include "mpgrasp/geom_se3.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/SVD>

#include "mpgrasp/error.h"

namespace mpgrasp {

namespace {
constexpr double kGimbalEps = 1e-6;
constexpr double kDriftThreshold = 1e-9;
}  // namespace

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnreachable: return "Unreachable";
    case ErrorCode::kOutOfLimits: return "OutOfLimits";
    case ErrorCode::kNonFiniteState: return "NonFiniteState";
    case ErrorCode::kSingularInnovation: return "SingularInnovation";
    case ErrorCode::kNoMatch: return "NoMatch";
    case ErrorCode::kAmbiguous: return "Ambiguous";
    case ErrorCode::kDetectionFailed: return "DetectionFailed";
    case ErrorCode::kUnknownObject: return "UnknownObject";
    case ErrorCode::kInfeasible: return "Infeasible";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kIllegalEvent: return "IllegalEvent";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kRunFailed: return "RunFailed";
    case ErrorCode::kConfig: return "Config";
  }
  return "Unknown";
}

double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * std::numbers::pi);
  if (w <= -std::numbers::pi) w += 2.0 * std::numbers::pi;
  return w;
}

EulerAngles EulerAngles::wrapped(const Vec3& raw) {
  return {Vec3(wrap_angle(raw.x()), wrap_angle(raw.y()), wrap_angle(raw.z()))};
}

Pose Pose::from_xyz_rpy(const Vec3& p, const Vec3& rpy) {
  return {p, euler_to_rot(EulerAngles{rpy})};
}

Mat3 rot_z(double angle) {
  return Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
}

Mat3 euler_to_rot(const EulerAngles& o) {
  return (Eigen::AngleAxisd(o.yaw(), Vec3::UnitZ()) *
          Eigen::AngleAxisd(o.pitch(), Vec3::UnitY()) *
          Eigen::AngleAxisd(o.roll(), Vec3::UnitX()))
      .toRotationMatrix();
}

EulerAngles rot_to_euler(const Mat3& R) {
  // atan2 keeps full precision near +-pi/2 where asin does not.
  const double pitch = std::atan2(-R(2, 0), std::hypot(R(0, 0), R(1, 0)));
  if (std::abs(std::abs(pitch) - std::numbers::pi / 2) < kGimbalEps) {
    // Roll and yaw act about the same axis; fold everything into yaw.
    const double yaw = std::atan2(-R(0, 1), R(1, 1));
    return EulerAngles::wrapped(Vec3(0.0, pitch, yaw));
  }
  const double roll = std::atan2(R(2, 1), R(2, 2));
  const double yaw = std::atan2(R(1, 0), R(0, 0));
  return EulerAngles::wrapped(Vec3(roll, pitch, yaw));
}

double orthonormality_error(const Mat3& R) {
  return (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
}

Mat3 project_to_rotation(const Mat3& M) {
  Eigen::JacobiSVD<Mat3> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 R = svd.matrixU() * svd.matrixV().transpose();
  if (R.determinant() < 0.0) {
    Mat3 U = svd.matrixU();
    U.col(2) *= -1.0;
    R = U * svd.matrixV().transpose();
  }
  return R;
}

Pose pose_update(const Pose& pose, const Vec3& dp, const Mat3& dR) {
  Pose out{pose.p + dp, dR * pose.R};
  if (orthonormality_error(out.R) > kDriftThreshold) {
    out.R = project_to_rotation(out.R);
  }
  return out;
}

PoseError pose_distance(const Pose& a, const Pose& b) {
  const Mat3 rel = a.R.transpose() * b.R;
  return {(a.p - b.p).norm(), Eigen::AngleAxisd(rel).angle()};
}

Vec3 rotation_log(const Mat3& R) {
  const Eigen::AngleAxisd aa(R);
  return aa.axis() * aa.angle();
}

}  // namespace mpgrasp
