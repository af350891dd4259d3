#include "mpgrasp/servo_sim.h"

#include <Eigen/Cholesky>

#include "mpgrasp/error.h"

namespace mpgrasp {

ServoGains ServoGains::critically_damped(int dof, double omega) {
  return {VecX::Constant(dof, 2.0 * omega), VecX::Constant(dof, omega * omega)};
}

void ServoGains::validate() const {
  if (kv.size() != kd.size() || (kv.array() <= 0.0).any() ||
      (kd.array() <= 0.0).any()) {
    throw Error(ErrorCode::kInvalidArgument,
                "servo gains must be positive and of equal length");
  }
}

VecX feedback_accel(const ServoReference& ref, const VecX& q, const VecX& qd,
                    const ServoGains& gains) {
  return ref.qdd - gains.kv.cwiseProduct(qd - ref.qd) -
         gains.kd.cwiseProduct(q - ref.q);
}

VecX computed_torque(const RobotModel& model, const VecX& q, const VecX& qd,
                     const VecX& u) {
  // Newton-Euler with qdd = u evaluates M u + C qd + g in one pass.
  return inverse_dynamics(model, q, qd, u);
}

VecX forward_dynamics(const RobotModel& model, const VecX& q, const VecX& qd,
                      const VecX& tau) {
  const VecX bias = inverse_dynamics(model, q, qd, VecX::Zero(model.dof()));
  return mass_matrix(model, q).llt().solve(tau - bias);
}

JointState plant_step(const RobotModel& model, const JointState& state,
                      const VecX& tau, double dt) {
  if (!(dt > 0.0 && dt <= 0.01)) {
    throw Error(ErrorCode::kInvalidArgument, "plant step dt outside (0, 0.01]");
  }
  const VecX& q = state.q;
  const VecX& v = state.qd;
  const VecX a1 = forward_dynamics(model, q, v, tau);
  const VecX q2 = q + 0.5 * dt * v, v2 = v + 0.5 * dt * a1;
  const VecX a2 = forward_dynamics(model, q2, v2, tau);
  const VecX q3 = q + 0.5 * dt * v2, v3 = v + 0.5 * dt * a2;
  const VecX a3 = forward_dynamics(model, q3, v3, tau);
  const VecX q4 = q + dt * v3, v4 = v + dt * a3;
  const VecX a4 = forward_dynamics(model, q4, v4, tau);

  JointState out;
  out.q = q + dt / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4);
  out.qd = v + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
  if (!out.q.allFinite() || !out.qd.allFinite()) {
    throw Error(ErrorCode::kNonFiniteState, "plant state diverged");
  }
  return out;
}

}  // namespace mpgrasp
