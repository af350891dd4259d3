#include <functional>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "mpgrasp/error.h"
#include "mpgrasp/servo_sim.h"
#include "models.h"

using namespace mpgrasp;
using namespace mpgrasp::testing;

namespace {

ServoGains scalar_gains(double kv, double kd) {
  return {VecX::Constant(1, kv), VecX::Constant(1, kd)};
}

ServoReference scalar_ref(double q, double qd, double qdd) {
  return {VecX::Constant(1, q), VecX::Constant(1, qd), VecX::Constant(1, qdd)};
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST(FeedbackAccel, ZeroErrorPassesFeedforward) {
  const ServoReference ref{VecX::Constant(3, 0.2), VecX::Constant(3, -0.1), VecX::LinSpaced(3, 1, 3)};
  const VecX u = feedback_accel(ref, ref.q, ref.qd, ServoGains::critically_damped(3, 20.0));
  EXPECT_EQ(u, ref.qdd);
}

TEST(FeedbackAccel, ScalarExamples) {
  // e = q - q_d = 0.1, K_d = 1
  EXPECT_DOUBLE_EQ(feedback_accel(scalar_ref(0, 0, 0), VecX::Constant(1, 0.1), VecX::Zero(1),
                                  scalar_gains(2, 1))(0),
                   -0.1);
  // edot = 0.2, K_v = 2
  EXPECT_DOUBLE_EQ(feedback_accel(scalar_ref(0, 0, 0), VecX::Zero(1), VecX::Constant(1, 0.2),
                                  scalar_gains(2, 1))(0),
                   -0.4);
}

TEST(ServoGains, CriticallyDampedAndValidated) {
  const ServoGains g = ServoGains::critically_damped(7, 20.0);
  EXPECT_TRUE((g.kv.array() == 40.0).all());
  EXPECT_TRUE((g.kd.array() == 400.0).all());
  ServoGains bad = g;
  bad.kd(3) = 0.0;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(ComputedTorque, PendulumGravityHold) {
  EXPECT_NEAR(computed_torque(pendulum(), VecX::Zero(1), VecX::Zero(1), VecX::Zero(1))(0), 9.81,
              1e-12);
}

TEST(ComputedTorque, GravityOffIsMassTimesU) {
  RobotModel r = bundled().robot;
  r.gravity.setZero();
  const VecX q = bundled().task.home;
  const VecX u = VecX::Ones(r.dof());
  const VecX tau = computed_torque(r, q, VecX::Zero(r.dof()), u);
  EXPECT_LE((tau - mass_matrix(r, q) * u).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ComputedTorque, ForwardDynamicsCancels) {
  const RobotModel& r = bundled().robot;
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const VecX q = random_q(r, rng);
    VecX qd(r.dof()), u(r.dof());
    for (int j = 0; j < r.dof(); ++j) {
      qd(j) = n(rng);
      u(j) = 3.0 * n(rng);
    }
    const VecX qdd = forward_dynamics(r, q, qd, computed_torque(r, q, qd, u));
    ASSERT_LE((qdd - u).norm(), 1e-10);
  }
}

TEST(PlantStep, EquilibriumHold) {
  const RobotModel& r = bundled().robot;
  const JointState s{bundled().task.home, VecX::Zero(r.dof())};
  const JointState next = plant_step(r, s, gravity_torque(r, s.q), 1e-3);
  EXPECT_LE((next.q - s.q).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE(next.qd.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PlantStep, KineticEnergyPerStep) {
  RobotModel r = bundled().robot;
  r.gravity.setZero();
  JointState s{bundled().task.home, VecX::LinSpaced(r.dof(), 1.0, -1.0)};
  const VecX tau = VecX::Zero(r.dof());
  double worst = 0.0;
  double e = kinetic_energy(r, s.q, s.qd);
  for (int k = 0; k < 1000; ++k) {
    s = plant_step(r, s, tau, 1e-3);
    const double e_next = kinetic_energy(r, s.q, s.qd);
    worst = std::max(worst, std::abs(e_next - e) / e);
    e = e_next;
  }
  EXPECT_LE(worst, 1e-8);
}

TEST(PlantStep, HalvingStepCutsErrorBy16) {
  // Pendulum released from rest; reference run at dt = 1e-6.
  const RobotModel p = pendulum();
  const VecX tau = VecX::Zero(1);
  const auto run = [&](double dt, double T) {
    JointState s{VecX::Constant(1, 0.3), VecX::Zero(1)};
    const int steps = static_cast<int>(std::lround(T / dt));
    for (int k = 0; k < steps; ++k) s = plant_step(p, s, tau, dt);
    return s;
  };
  const double T = 0.2;
  const JointState ref = run(1e-6, T);
  const double e1 = std::abs(run(0.01, T).q(0) - ref.q(0));
  const double e2 = std::abs(run(0.005, T).q(0) - ref.q(0));
  EXPECT_NEAR(e1 / e2, 16.0, 3.0);
}

TEST(PlantStep, Deterministic) {
  const RobotModel& r = bundled().robot;
  const JointState s{bundled().task.home, VecX::LinSpaced(r.dof(), 0.3, -0.2)};
  const VecX tau = VecX::LinSpaced(r.dof(), -5, 5);
  const JointState a = plant_step(r, s, tau, 1e-3), b = plant_step(r, s, tau, 1e-3);
  EXPECT_EQ(a.q, b.q);
  EXPECT_EQ(a.qd, b.qd);
}

TEST(PlantStep, RejectsBadStep) {
  const RobotModel p = pendulum();
  const JointState s{VecX::Zero(1), VecX::Zero(1)};
  EXPECT_EQ(code_of([&] { plant_step(p, s, VecX::Zero(1), 0.0); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { plant_step(p, s, VecX::Zero(1), 0.02); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { plant_step(p, s, VecX::Constant(1, NAN), 1e-3); }),
            ErrorCode::kNonFiniteState);
}

TEST(ClosedLoop, RegulationErrorDecays) {
  const RobotModel& r = bundled().robot;
  const ServoGains gains = ServoGains::critically_damped(r.dof(), 20.0);
  const VecX hold = bundled().task.home;
  const ServoReference ref{hold, VecX::Zero(r.dof()), VecX::Zero(r.dof())};
  JointState s{hold + VecX::Constant(r.dof(), 0.2), VecX::Zero(r.dof())};
  for (int k = 0; k < 1000; ++k) {
    const VecX u = feedback_accel(ref, s.q, s.qd, gains);
    s = plant_step(r, s, computed_torque(r, s.q, s.qd, u), 1e-3);
  }
  // Continuous time: e(1) = 0.2 * 21 * exp(-20). Torque is held for 1 ms, which
  // slows the rate a little; allow 0.5 1/s on the exponent.
  const double expected = 0.2 * 21.0 * std::exp(-20.0);
  for (int j = 0; j < r.dof(); ++j) {
    EXPECT_NEAR(std::log((s.q - hold)(j) / expected), 0.0, 0.5);
  }
}
