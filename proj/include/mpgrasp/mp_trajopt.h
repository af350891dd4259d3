#pragma once

#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "mpgrasp/arm_model.h"
#include "mpgrasp/servo_sim.h"

namespace mpgrasp {

/// Per-joint box around a joint-space target.
struct ToleranceSet {
  VecX center;
  VecX half_width;

  bool contains(const VecX& q, double slack = 0.0) const;
  void validate() const;
};

/// One knot of the plan: state x = [q, qd, qdd] and the jerk input u.
struct Knot {
  VecX q, qd, qdd, u;
};

/// First-order-hold matrices of the triple integrator for m joints, with the
/// state ordered [q (m), qd (m), qdd (m)].
struct FohModel {
  MatX Phi;     // 3m x 3m
  MatX Gamma1;  // 3m x m
  MatX Gamma2;  // 3m x m
};

FohModel foh_discretize(double h, int m);

/// Scalar (m = 1) versions, used everywhere internally.
Eigen::Matrix3d foh_phi(double h);
Eigen::Vector3d foh_gamma1(double h);
Eigen::Vector3d foh_gamma2(double h);

struct PlanBounds {
  VecX q_lower, q_upper;
  VecX qd_max, qdd_max, u_max;  // symmetric

  static PlanBounds from_limits(const JointLimits& limits);
};

struct PlanWeights {
  double w1 = 100.0;   // waypoint attraction
  double w2 = 1.0e5;   // goal attraction
  double w3 = 1.0e4;   // collision penalty
};

struct HorizonLimits {
  VecX velocity;
  VecX acceleration;
  VecX jerk;
};

struct HorizonLengths {
  int split = 2;  // N_s
  int total = 2;  // N
  bool waypoint_reachable = false;
  bool goal_reachable = true;
};

/// Time of a rest-to-rest move over `distance` under velocity and
/// acceleration limits (trapezoidal or triangular profile).
double min_travel_time(double distance, double v_max, double a_max);

/// Horizon reconstruction from per-joint minimum travel times. Without a
/// waypoint, split == total. A waypoint that would need more than n_max
/// samples disables the split (split == total == n_max). Floors: n_min when
/// the head rests on the targets, 4 for a moving head, 5 for a move from rest.
HorizonLengths horizon_lengths(const Knot& head,
                               const std::optional<VecX>& waypoint,
                               const VecX& goal, const HorizonLimits& limits,
                               double h, int n_max = 50, int n_min = 2);

struct CollisionSetup {
  std::shared_ptr<const RobotModel> robot;  // link spheres and kinematics
  std::vector<Sphere> obstacles;            // world frame
  double safety_margin = 0.02;              // m

  bool active() const { return robot && !obstacles.empty(); }
};

struct PlanProblem {
  Knot head;  // fixed x_0 and u_0
  std::optional<ToleranceSet> waypoint;
  ToleranceSet goal;
  double h = 0.1;
  int N = 2;
  int N_s = 2;
  bool enforce_waypoint = true;  // box on q_{N_s - 1}
  bool enforce_goal = true;      // box on q_{N - 1}
  PlanBounds bounds;
  PlanWeights weights;
  CollisionSetup collision;

  double time_budget = 0.1;  // s, wall clock
  int max_iterations = 20;
  double stationarity_tol = 1e-6;

  int dof() const { return static_cast<int>(head.q.size()); }
  void validate() const;
};

struct SolveStats {
  int iterations = 0;
  double wall_time = 0.0;  // s
  bool converged = false;
  bool relaxed = false;    // tolerance boxes were dropped to regain feasibility
  double objective = 0.0;
  std::vector<double> merit_history;  // accepted iterates
};

struct Trajectory {
  std::vector<Knot> knots;
  double h = 0.1;
  int split = 0;  // N_s used by the solve
  SolveStats stats;

  int size() const { return static_cast<int>(knots.size()); }
  int dof() const { return knots.empty() ? 0 : static_cast<int>(knots[0].q.size()); }
  double duration() const { return h * (size() - 1); }
};

/// Receding-horizon solve: jerk-regularized split-horizon objective with FOH
/// dynamics, fixed head, terminal equilibrium, box bounds and tolerance sets.
/// Collision costs are handled by trust-region SQP over Gauss-Newton models.
/// With `previous`, its knot 1 replaces the head and its shifted inputs seed
/// the linearization point.
/// Throws kInfeasible if the QP stays infeasible with the boxes relaxed.
Trajectory solve(const PlanProblem& problem,
                 const Trajectory* previous = nullptr);

/// Objective of a trajectory under the problem's cost.
double plan_objective(const PlanProblem& problem, const Trajectory& traj);

/// Collision term sum over pairs of max(0, margin - distance)^2 at q.
double collision_cost(const CollisionSetup& setup, const VecX& q);

/// Max-norm FOH residual over consecutive knots.
double dynamics_residual(const Trajectory& traj);

/// Closed-form evaluation of the piecewise-linear-jerk trajectory.
/// Throws kOutOfRange outside [0, duration].
ServoReference sample_reference(const Trajectory& traj, double t);

/// Like sample_reference but also returns the jerk; clamps t to the range.
Knot sample_knot(const Trajectory& traj, double t);

}  // namespace mpgrasp
