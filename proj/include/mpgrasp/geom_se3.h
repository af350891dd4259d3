#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace mpgrasp {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Euler angles stored as [roll, pitch, yaw] and composed intrinsically in
/// Z-Y-X order, i.e. R = Rz(yaw) * Ry(pitch) * Rx(roll).
struct EulerAngles {
  Vec3 o = Vec3::Zero();

  double roll() const { return o.x(); }
  double pitch() const { return o.y(); }
  double yaw() const { return o.z(); }

  static EulerAngles wrapped(const Vec3& raw);
};

/// Rigid pose: position in meters and an orthonormal rotation matrix.
struct Pose {
  Vec3 p = Vec3::Zero();
  Mat3 R = Mat3::Identity();

  static Pose identity() { return {}; }
  static Pose from_xyz_rpy(const Vec3& p, const Vec3& rpy);

  /// Composition this * other (other expressed in this frame).
  Pose operator*(const Pose& other) const { return {p + R * other.p, R * other.R}; }
  Pose inverse() const { return {-(R.transpose() * p), R.transpose()}; }
};

struct PoseError {
  double position = 0.0;  // m
  double angle = 0.0;     // rad, in [0, pi]
};

/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

Mat3 euler_to_rot(const EulerAngles& o);

/// Inverse of euler_to_rot. Within 1e-6 of pitch = +-pi/2 the roll is set to
/// zero and the remaining rotation about the vertical is reported as yaw.
EulerAngles rot_to_euler(const Mat3& R);

Mat3 rot_z(double angle);

/// Max-abs deviation of R^T R from identity.
double orthonormality_error(const Mat3& R);

/// Nearest rotation in the Frobenius sense (polar decomposition).
Mat3 project_to_rotation(const Mat3& M);

/// Disentangled update: p+ = p + dp, R+ = dR * R. The result is
/// re-orthonormalized once the drift exceeds 1e-9.
Pose pose_update(const Pose& pose, const Vec3& dp, const Mat3& dR);

PoseError pose_distance(const Pose& a, const Pose& b);

/// Rotation vector (axis * angle) of R.
Vec3 rotation_log(const Mat3& R);

}  // namespace mpgrasp
