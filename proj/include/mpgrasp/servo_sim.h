#pragma once

#include "mpgrasp/arm_model.h"

namespace mpgrasp {

/// Diagonal tracking gains; kv in 1/s, kd in 1/s^2.
struct ServoGains {
  VecX kv;
  VecX kd;

  /// Critically damped gains with natural frequency omega on every joint.
  static ServoGains critically_damped(int dof, double omega);
  void validate() const;
};

struct ServoReference {
  VecX q, qd, qdd;
};

struct JointState {
  VecX q, qd;
};

/// u = qdd_d - Kv (qd - qd_d) - Kd (q - q_d).
VecX feedback_accel(const ServoReference& ref, const VecX& q, const VecX& qd,
                    const ServoGains& gains);

/// tau = M(q) u + C(q, qd) qd + g(q).
VecX computed_torque(const RobotModel& model, const VecX& q, const VecX& qd,
                     const VecX& u);

/// qdd = M(q)^-1 (tau - C(q, qd) qd - g(q)).
VecX forward_dynamics(const RobotModel& model, const VecX& q, const VecX& qd,
                      const VecX& tau);

/// One classic RK4 step with tau held constant over the step.
/// dt must lie in (0, 0.01]. Throws kNonFiniteState on blow-up.
JointState plant_step(const RobotModel& model, const JointState& state,
                      const VecX& tau, double dt);

}  // namespace mpgrasp
