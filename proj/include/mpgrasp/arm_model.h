#pragma once

#include <vector>

#include <Eigen/Core>

#include "mpgrasp/geom_se3.h"

namespace mpgrasp {

using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Modified (Craig) Denavit-Hartenberg parameters of one revolute joint.
/// `a` and `alpha` describe the preceding link (a_{i-1}, alpha_{i-1}); the
/// joint frame is Rx(alpha) * Tx(a) * Rz(q + theta_offset) * Tz(d).
struct DhParams {
  double a = 0.0;
  double alpha = 0.0;
  double d = 0.0;
  double theta_offset = 0.0;
};

struct Sphere {
  Vec3 center = Vec3::Zero();  // link frame for robot spheres, world for obstacles
  double radius = 0.0;
};

struct Link {
  DhParams dh;
  double mass = 1.0;
  Vec3 com = Vec3::Zero();         // link frame
  Mat3 inertia = Mat3::Zero();     // about com, link frame
  std::vector<Sphere> collision;   // link-frame spheres
};

struct JointLimits {
  VecX lower, upper;   // rad
  VecX velocity;       // rad/s
  VecX acceleration;   // rad/s^2
  VecX jerk;           // rad/s^3
  VecX torque;         // N m
};

struct RobotModel {
  std::vector<Link> links;
  Pose tool;  // last joint frame -> tool point
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);
  JointLimits limits;
  VecX ik_weights;  // per joint, defaults to ones

  int dof() const { return static_cast<int>(links.size()); }

  /// Throws kInvalidArgument if masses, inertias, limits or sizes are bad.
  void validate() const;
  /// Copy with every link mass and inertia scaled by `factor`.
  RobotModel with_mass_scale(double factor) const;
};

/// World-frame joint frames: element i is the pose of joint frame i.
std::vector<Pose> joint_frames(const RobotModel& model, const VecX& q);

Pose forward_kinematics(const RobotModel& model, const VecX& q);

/// 6 x m geometric Jacobian at the tool point, rows [linear; angular].
MatX jacobian(const RobotModel& model, const VecX& q);

/// 3 x m linear-velocity Jacobian of a point fixed on `link`, given in world
/// coordinates. Columns past `link` are zero.
MatX point_jacobian(const RobotModel& model, const std::vector<Pose>& frames,
                    int link, const Vec3& world_point);

struct IkOptions {
  bool position_only = false;
  int max_iterations = 200;
  double damping = 1e-3;
  double position_tolerance = 1e-6;
  double angle_tolerance = 1e-6;
  int num_seeds = 8;
};

/// Multi-start damped least squares. Among converged candidates inside the
/// joint limits, returns the one minimizing sum w_i (q_i - seed_i)^2.
/// Throws kUnreachable when nothing converges, kOutOfLimits when every
/// converged candidate violates the limits.
VecX inverse_kinematics(const RobotModel& model, const Pose& target,
                        const VecX& q_seed, const IkOptions& options = {});

/// The deterministic starting points used by inverse_kinematics; element 0 is
/// q_seed itself.
std::vector<VecX> ik_seeds(const RobotModel& model, const VecX& q_seed,
                           int count);

struct DynamicsTerms {
  MatX M;
  MatX C;
  VecX g;
};

/// Mass matrix by the composite-rigid-body algorithm.
MatX mass_matrix(const RobotModel& model, const VecX& q);

/// Recursive Newton-Euler inverse dynamics: M(q) qdd + C(q, qd) qd + g(q).
VecX inverse_dynamics(const RobotModel& model, const VecX& q, const VecX& qd,
                      const VecX& qdd);

VecX gravity_torque(const RobotModel& model, const VecX& q);

/// M, g, and the Christoffel-consistent Coriolis matrix C (so that
/// Mdot - 2C is skew). dM/dq is taken by complex-step differentiation of
/// the composite-rigid-body algorithm, which is exact to round-off.
DynamicsTerms dynamics_terms(const RobotModel& model, const VecX& q,
                             const VecX& qd);

double kinetic_energy(const RobotModel& model, const VecX& q, const VecX& qd);

}  // namespace mpgrasp
