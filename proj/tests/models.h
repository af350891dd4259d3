#pragma once

#include <cmath>
#include <random>

#include "mpgrasp/arm_model.h"
#include "mpgrasp/config.h"

namespace mpgrasp::testing {

inline JointLimits uniform_limits(int m, double range = M_PI) {
  JointLimits l;
  l.lower = VecX::Constant(m, -range);
  l.upper = VecX::Constant(m, range);
  l.velocity = VecX::Constant(m, 2.0);
  l.acceleration = VecX::Constant(m, 5.0);
  l.jerk = VecX::Constant(m, 30.0);
  l.torque = VecX::Constant(m, 100.0);
  return l;
}

// Planar arm in the x-y plane, unit links, point masses at the link ends.
inline RobotModel planar_2link() {
  RobotModel m;
  Link l1, l2;
  l1.mass = 1.0;
  l1.com = Vec3(1.0, 0.0, 0.0);
  l2.dh.a = 1.0;
  l2.mass = 1.0;
  l2.com = Vec3(1.0, 0.0, 0.0);
  m.links = {l1, l2};
  m.tool.p = Vec3(1.0, 0.0, 0.0);
  m.gravity = Vec3(0.0, -9.81, 0.0);
  m.limits = uniform_limits(2);
  m.ik_weights = VecX::Ones(2);
  return m;
}

// Point mass of 1 kg at 1 m; q = 0 is horizontal, gravity along -y.
inline RobotModel pendulum() {
  RobotModel m;
  Link l;
  l.mass = 1.0;
  l.com = Vec3(1.0, 0.0, 0.0);
  m.links = {l};
  m.tool.p = Vec3(1.0, 0.0, 0.0);
  m.gravity = Vec3(0.0, -9.81, 0.0);
  m.limits = uniform_limits(1);
  m.ik_weights = VecX::Ones(1);
  return m;
}

inline const Config& bundled() {
  static const Config c = default_config();
  return c;
}

inline VecX random_q(const RobotModel& m, std::mt19937_64& rng, double margin = 0.1) {
  VecX q(m.dof());
  for (int i = 0; i < m.dof(); ++i) {
    std::uniform_real_distribution<double> u(m.limits.lower(i) + margin,
                                             m.limits.upper(i) - margin);
    q(i) = u(rng);
  }
  return q;
}

}  // namespace mpgrasp::testing
