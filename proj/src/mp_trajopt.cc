#include "mpgrasp/mp_trajopt.h"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "mpgrasp/error.h"
#include "mpgrasp/qp_solver.h"

namespace mpgrasp {

bool ToleranceSet::contains(const VecX& q, double slack) const {
  return ((q - center).cwiseAbs().array() <= half_width.array() + slack).all();
}

void ToleranceSet::validate() const {
  if (center.size() != half_width.size() || (half_width.array() <= 0.0).any()) {
    throw Error(ErrorCode::kInvalidArgument,
                "tolerance set needs positive half widths");
  }
}

Eigen::Matrix3d foh_phi(double h) {
  Eigen::Matrix3d P;
  P << 1.0, h, 0.5 * h * h, 0.0, 1.0, h, 0.0, 0.0, 1.0;
  return P;
}

Eigen::Vector3d foh_gamma1(double h) {
  return {h * h * h / 8.0, h * h / 3.0, h / 2.0};
}

Eigen::Vector3d foh_gamma2(double h) {
  return {h * h * h / 24.0, h * h / 6.0, h / 2.0};
}

FohModel foh_discretize(double h, int m) {
  if (!(h > 0.0) || m < 1) {
    throw Error(ErrorCode::kInvalidArgument, "foh needs h > 0 and m >= 1");
  }
  const Eigen::Matrix3d P = foh_phi(h);
  const Eigen::Vector3d g1 = foh_gamma1(h), g2 = foh_gamma2(h);
  FohModel out{MatX::Zero(3 * m, 3 * m), MatX::Zero(3 * m, m),
               MatX::Zero(3 * m, m)};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      out.Phi.block(r * m, c * m, m, m) = P(r, c) * MatX::Identity(m, m);
    }
    out.Gamma1.block(r * m, 0, m, m) = g1(r) * MatX::Identity(m, m);
    out.Gamma2.block(r * m, 0, m, m) = g2(r) * MatX::Identity(m, m);
  }
  return out;
}

PlanBounds PlanBounds::from_limits(const JointLimits& limits) {
  return {limits.lower, limits.upper, limits.velocity, limits.acceleration,
          limits.jerk};
}

double min_travel_time(double distance, double v_max, double a_max) {
  distance = std::abs(distance);
  if (distance == 0.0) return 0.0;
  const double ramp = v_max * v_max / a_max;  // distance spent accelerating
  if (distance >= ramp) return distance / v_max + v_max / a_max;
  return 2.0 * std::sqrt(distance / a_max);
}

namespace {

int samples_for(double T, double h) {
  return static_cast<int>(std::ceil(T / h - 1e-9)) + 1;
}

double joint_time(const Knot& head, const VecX& from, const VecX& to,
                  const HorizonLimits& lim, bool include_head_motion) {
  double T = 0.0;
  for (int i = 0; i < to.size(); ++i) {
    double t = min_travel_time(to(i) - from(i), lim.velocity(i),
                               lim.acceleration(i));
    if (include_head_motion) {
      t += std::abs(head.qd(i)) / lim.acceleration(i) +
           std::abs(head.qdd(i)) / lim.jerk(i);
    }
    T = std::max(T, t);
  }
  return T;
}

bool at_rest(const Knot& k) {
  return k.qd.cwiseAbs().maxCoeff() == 0.0 && k.qdd.cwiseAbs().maxCoeff() == 0.0 &&
         k.u.cwiseAbs().maxCoeff() == 0.0;
}

}  // namespace

HorizonLengths horizon_lengths(const Knot& head,
                               const std::optional<VecX>& waypoint,
                               const VecX& goal, const HorizonLimits& limits,
                               double h, int n_max, int n_min) {
  if ((limits.velocity.array() <= 0).any() ||
      (limits.acceleration.array() <= 0).any() ||
      (limits.jerk.array() <= 0).any()) {
    throw Error(ErrorCode::kInvalidArgument, "horizon limits must be positive");
  }
  // A moving head needs room for the two terminal equalities per joint; a
  // rest-to-rest move needs a third free jerk sample on top of those.
  bool displaced = (goal - head.q).cwiseAbs().maxCoeff() > 0.0;
  if (waypoint) displaced = displaced || (*waypoint - head.q).cwiseAbs().maxCoeff() > 0.0;
  int floor = n_min;
  if (!at_rest(head)) {
    floor = std::max(n_min, 4);
  } else if (displaced) {
    floor = std::max(n_min, 5);
  }
  HorizonLengths out;
  double t_goal = 0.0;
  if (waypoint) {
    const double t_way = joint_time(head, head.q, *waypoint, limits, true);
    const int n_split = std::max(samples_for(t_way, h), floor);
    if (n_split > n_max) {
      out.split = out.total = n_max;
      out.waypoint_reachable = false;
      out.goal_reachable = false;
      return out;
    }
    out.split = n_split;
    out.waypoint_reachable = true;
    t_goal = t_way + joint_time(head, *waypoint, goal, limits, false);
  } else {
    t_goal = joint_time(head, head.q, goal, limits, true);
  }
  const int n_goal = std::max(samples_for(t_goal, h), floor);
  out.goal_reachable = n_goal <= n_max;
  out.total = std::min(n_goal, n_max);
  if (!waypoint) out.split = out.total;
  out.split = std::min(out.split, out.total);
  return out;
}

void PlanProblem::validate() const {
  const int m = dof();
  const auto sized = [m](const VecX& v) { return v.size() == m; };
  if (m < 1 || !sized(head.qd) || !sized(head.qdd) || !sized(head.u) ||
      !sized(goal.center) || !sized(bounds.q_lower) || !sized(bounds.q_upper) ||
      !sized(bounds.qd_max) || !sized(bounds.qdd_max) || !sized(bounds.u_max)) {
    throw Error(ErrorCode::kInvalidArgument, "plan problem sizes disagree");
  }
  goal.validate();
  if (waypoint) {
    waypoint->validate();
    if (!sized(waypoint->center)) {
      throw Error(ErrorCode::kInvalidArgument, "waypoint size disagrees");
    }
  }
  if (!(h > 0.0) || N < 2 || N_s < 1 || N_s > N) {
    throw Error(ErrorCode::kInvalidArgument, "need h > 0 and 1 <= N_s <= N, N >= 2");
  }
  if (!(weights.w1 > 0 && weights.w2 > 0 && weights.w3 > 0)) {
    throw Error(ErrorCode::kInvalidArgument, "weights must be positive");
  }
  if (!head.q.allFinite() || !head.qd.allFinite() || !head.qdd.allFinite() ||
      !head.u.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "plan head is not finite");
  }
}

double collision_cost(const CollisionSetup& setup, const VecX& q) {
  if (!setup.active()) return 0.0;
  const RobotModel& robot = *setup.robot;
  const auto frames = joint_frames(robot, q);
  double cost = 0.0;
  for (int l = 0; l < robot.dof(); ++l) {
    for (const Sphere& s : robot.links[l].collision) {
      const Vec3 c = frames[l].p + frames[l].R * s.center;
      for (const Sphere& o : setup.obstacles) {
        const double dist = (c - o.center).norm() - s.radius - o.radius;
        const double r = setup.safety_margin - dist;
        if (r > 0.0) cost += r * r;
      }
    }
  }
  return cost;
}

namespace {

using Clock = std::chrono::steady_clock;

// Joint-independent condensing of the scalar triple integrator: knot k is
// x_k = F_k x_0 + G_k u_0 + T_k z, with z = (u_1, ..., u_{N-2}) and u_{N-1} = 0.
struct Condensed {
  int N = 0;
  int nz = 0;
  std::vector<Eigen::Matrix3d> F;
  std::vector<Eigen::Vector3d> G;
  std::vector<MatX> T;

  Condensed(double h, int n_knots) : N(n_knots), nz(n_knots - 2) {
    const Eigen::Matrix3d P = foh_phi(h);
    const Eigen::Vector3d g1 = foh_gamma1(h), g2 = foh_gamma2(h);
    F.assign(N, Eigen::Matrix3d::Identity());
    G.assign(N, Eigen::Vector3d::Zero());
    T.assign(N, MatX::Zero(3, nz));
    for (int k = 0; k + 1 < N; ++k) {
      F[k + 1] = P * F[k];
      G[k + 1] = P * G[k];
      T[k + 1] = P * T[k];
      if (k == 0) {
        G[1] += g1;
      } else {
        T[k + 1].col(k - 1) += g1;
      }
      if (k + 1 <= N - 2) T[k + 1].col(k) += g2;
    }
  }
};

struct RowEntry {
  int row;
  int col;
  double value;
};

// Quadratic part and linear constraints of one joint, in that joint's z block.
struct JointBlock {
  VecX g;
  double constant = 0.0;
  MatX Aeq;
  VecX beq;
  std::vector<Eigen::Triplet<double>> ineq;
  std::vector<double> bin;
  std::vector<Eigen::Vector3d> base;  // F_k x0 + G_k u0

  void add_row(const Eigen::RowVectorXd& row, double rhs) {
    if (row.cwiseAbs().maxCoeff() < 1e-14) return;
    const int r = static_cast<int>(bin.size());
    for (int c = 0; c < row.size(); ++c) {
      if (row(c) != 0.0) ineq.emplace_back(r, c, row(c));
    }
    bin.push_back(rhs);
  }
};

struct CostLayout {
  std::vector<double> weight;
  std::vector<const VecX*> target;
};

CostLayout cost_layout(const PlanProblem& p) {
  CostLayout out;
  out.weight.resize(p.N);
  out.target.resize(p.N);
  for (int k = 0; k < p.N; ++k) {
    if (p.waypoint && k < p.N_s) {
      out.weight[k] = p.weights.w1;
      out.target[k] = &p.waypoint->center;
    } else {
      out.weight[k] = p.weights.w2;
      out.target[k] = &p.goal.center;
    }
  }
  return out;
}

class Transcription {
 public:
  Transcription(const PlanProblem& p)
      : p_(p), c_(p.h, p.N), layout_(cost_layout(p)), m_(p.dof()) {
    const int nz = c_.nz;
    H_ = 2.0 * MatX::Identity(nz, nz);
    for (int k = 0; k < p.N; ++k) {
      const Eigen::RowVectorXd t = c_.T[k].row(0);
      H_.noalias() += 2.0 * layout_.weight[k] * t.transpose() * t;
    }
    blocks_[0].resize(m_);
    blocks_[1].resize(m_);
    for (int j = 0; j < m_; ++j) {
      build_joint(j, false, blocks_[0][j]);
      build_joint(j, true, blocks_[1][j]);
    }
  }

  int nz() const { return c_.nz; }
  int num_variables() const { return c_.nz * m_; }
  const MatX& hessian_block() const { return H_; }
  const JointBlock& block(int j, bool relaxed) const { return blocks_[relaxed][j]; }
  const Condensed& condensed() const { return c_; }

  VecX knot_q(const VecX& z, int k) const {
    VecX q(m_);
    for (int j = 0; j < m_; ++j) {
      q(j) = blocks_[0][j].base[k](0) + c_.T[k].row(0).dot(z.segment(j * c_.nz, c_.nz));
    }
    return q;
  }

  double quadratic_value(const VecX& z) const {
    double f = 0.0;
    for (int j = 0; j < m_; ++j) {
      const auto zj = z.segment(j * c_.nz, c_.nz);
      const JointBlock& b = blocks_[0][j];
      f += 0.5 * zj.dot(H_ * zj) + b.g.dot(zj) + b.constant;
    }
    return f;
  }

  double objective(const VecX& z) const {
    double f = quadratic_value(z);
    if (p_.collision.active()) {
      for (int k = 0; k < p_.N; ++k) {
        f += p_.weights.w3 * collision_cost(p_.collision, knot_q(z, k));
      }
    }
    return f;
  }

 private:
  void build_joint(int j, bool relaxed, JointBlock& b) const {
    const int nz = c_.nz;
    const int N = p_.N;
    Eigen::Vector3d x0(p_.head.q(j), p_.head.qd(j), p_.head.qdd(j));
    const double u0 = p_.head.u(j);
    b.base.resize(N);
    b.g = VecX::Zero(nz);
    b.constant = u0 * u0;
    for (int k = 0; k < N; ++k) {
      b.base[k] = c_.F[k] * x0 + c_.G[k] * u0;
      const double offset = b.base[k](0) - (*layout_.target[k])(j);
      b.g.noalias() += 2.0 * layout_.weight[k] * offset * c_.T[k].row(0).transpose();
      b.constant += layout_.weight[k] * offset * offset;
    }

    // Terminal equilibrium on qd and qdd.
    b.Aeq = c_.T[N - 1].bottomRows(2);
    b.beq = -b.base[N - 1].tail<2>();

    const double lower[3] = {p_.bounds.q_lower(j), -p_.bounds.qd_max(j),
                             -p_.bounds.qdd_max(j)};
    const double upper[3] = {p_.bounds.q_upper(j), p_.bounds.qd_max(j),
                             p_.bounds.qdd_max(j)};
    for (int k = 1; k < N; ++k) {
      const int comps = k == N - 1 ? 1 : 3;
      for (int c = 0; c < comps; ++c) {
        const Eigen::RowVectorXd row = c_.T[k].row(c);
        b.add_row(row, upper[c] - b.base[k](c));
        b.add_row(-row, b.base[k](c) - lower[c]);
      }
    }
    for (int i = 0; i < nz; ++i) {
      Eigen::RowVectorXd e = Eigen::RowVectorXd::Zero(nz);
      e(i) = 1.0;
      b.add_row(e, p_.bounds.u_max(j));
      b.add_row(-e, p_.bounds.u_max(j));
    }
    if (relaxed) return;
    const auto add_box = [&](int k, const ToleranceSet& set) {
      const Eigen::RowVectorXd row = c_.T[k].row(0);
      b.add_row(row, set.center(j) + set.half_width(j) - b.base[k](0));
      b.add_row(-row, b.base[k](0) - set.center(j) + set.half_width(j));
    };
    if (p_.waypoint && p_.enforce_waypoint && p_.N_s - 1 >= 1) {
      add_box(p_.N_s - 1, *p_.waypoint);
    }
    if (p_.enforce_goal) add_box(N - 1, p_.goal);
  }

  const PlanProblem& p_;
  Condensed c_;
  CostLayout layout_;
  int m_;
  MatX H_;
  std::vector<JointBlock> blocks_[2];
};

// Gauss-Newton rows of the active collision residuals at z.
struct CollisionModel {
  std::vector<Eigen::RowVectorXd> rows;  // d residual / dz
  std::vector<double> residuals;
};

CollisionModel linearize_collisions(const PlanProblem& p, const Transcription& tr,
                                    const VecX& z) {
  CollisionModel out;
  if (!p.collision.active()) return out;
  const RobotModel& robot = *p.collision.robot;
  const int m = p.dof();
  const int nz = tr.nz();
  for (int k = 1; k < p.N; ++k) {
    const VecX q = tr.knot_q(z, k);
    const auto frames = joint_frames(robot, q);
    const Eigen::RowVectorXd t = tr.condensed().T[k].row(0);
    for (int l = 0; l < robot.dof(); ++l) {
      for (const Sphere& s : robot.links[l].collision) {
        const Vec3 c = frames[l].p + frames[l].R * s.center;
        for (const Sphere& o : p.collision.obstacles) {
          const Vec3 diff = c - o.center;
          const double norm = diff.norm();
          const double r = p.collision.safety_margin - (norm - s.radius - o.radius);
          if (r <= 0.0 || norm < 1e-12) continue;
          const Eigen::RowVectorXd dq =
              -(diff / norm).transpose() * point_jacobian(robot, frames, l, c);
          Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(m * nz);
          for (int j = 0; j < m; ++j) row.segment(j * nz, nz) = dq(j) * t;
          out.rows.push_back(std::move(row));
          out.residuals.push_back(r);
        }
      }
    }
  }
  return out;
}

struct StepResult {
  QpStatus status = QpStatus::kInfeasible;
  VecX z;
  double model_value = 0.0;  // quadratic + linearized collision, no damping
};

QpProblem joint_qp(const Transcription& tr, int j, bool relaxed, double damping,
                   const VecX& center) {
  const JointBlock& b = tr.block(j, relaxed);
  const int nz = tr.nz();
  QpProblem qp;
  qp.H = tr.hessian_block();
  qp.H.diagonal().array() += 2.0 * damping;
  qp.g = b.g - 2.0 * damping * center.segment(j * nz, nz);
  qp.Aeq = b.Aeq;
  qp.beq = b.beq;
  qp.Ain.resize(static_cast<int>(b.bin.size()), nz);
  qp.Ain.setFromTriplets(b.ineq.begin(), b.ineq.end());
  qp.bin = Eigen::Map<const VecX>(b.bin.data(), static_cast<int>(b.bin.size()));
  return qp;
}

StepResult solve_model(const PlanProblem& p, const Transcription& tr,
                       const CollisionModel& col, const VecX& z_inc,
                       double damping, bool relaxed) {
  const int m = p.dof();
  const int nz = tr.nz();
  StepResult out;
  out.z = VecX::Zero(m * nz);
  const double w3 = p.weights.w3;

  if (col.rows.empty()) {
    // Block diagonal: every joint is an independent QP.
    out.status = QpStatus::kSolved;
    for (int j = 0; j < m; ++j) {
      const QpResult r = solve_qp(joint_qp(tr, j, relaxed, damping, z_inc));
      if (r.status != QpStatus::kSolved) {
        out.status = r.status;
        return out;
      }
      out.z.segment(j * nz, nz) = r.z;
    }
  } else {
    QpProblem qp;
    const int n = m * nz;
    qp.H = MatX::Zero(n, n);
    qp.g = VecX::Zero(n);
    int eq_rows = 0, in_rows = 0;
    for (int j = 0; j < m; ++j) {
      eq_rows += static_cast<int>(tr.block(j, relaxed).beq.size());
      in_rows += static_cast<int>(tr.block(j, relaxed).bin.size());
    }
    qp.Aeq = MatX::Zero(eq_rows, n);
    qp.beq = VecX::Zero(eq_rows);
    qp.bin = VecX::Zero(in_rows);
    std::vector<Eigen::Triplet<double>> trip;
    int er = 0, ir = 0;
    for (int j = 0; j < m; ++j) {
      const JointBlock& b = tr.block(j, relaxed);
      qp.H.block(j * nz, j * nz, nz, nz) = tr.hessian_block();
      qp.g.segment(j * nz, nz) = b.g;
      qp.Aeq.block(er, j * nz, b.beq.size(), nz) = b.Aeq;
      qp.beq.segment(er, b.beq.size()) = b.beq;
      er += static_cast<int>(b.beq.size());
      for (const auto& t : b.ineq) {
        trip.emplace_back(ir + t.row(), j * nz + t.col(), t.value());
      }
      for (std::size_t r = 0; r < b.bin.size(); ++r) qp.bin(ir + r) = b.bin[r];
      ir += static_cast<int>(b.bin.size());
    }
    qp.Ain.resize(in_rows, n);
    qp.Ain.setFromTriplets(trip.begin(), trip.end());
    for (std::size_t i = 0; i < col.rows.size(); ++i) {
      const Eigen::RowVectorXd& row = col.rows[i];
      qp.H.noalias() += 2.0 * w3 * row.transpose() * row;
      qp.g.noalias() +=
          2.0 * w3 * (col.residuals[i] - row.dot(z_inc)) * row.transpose();
    }
    qp.H.diagonal().array() += 2.0 * damping;
    qp.g -= 2.0 * damping * z_inc;
    const QpResult r = solve_qp(qp);
    out.status = r.status;
    if (r.status != QpStatus::kSolved) return out;
    out.z = r.z;
  }

  out.model_value = tr.quadratic_value(out.z);
  for (std::size_t i = 0; i < col.rows.size(); ++i) {
    const double lin = col.residuals[i] + col.rows[i].dot(out.z - z_inc);
    out.model_value += w3 * lin * lin;
  }
  return out;
}

Trajectory assemble(const PlanProblem& p, const VecX& z) {
  const int m = p.dof();
  const int N = p.N;
  const int nz = N - 2;
  const Eigen::Matrix3d P = foh_phi(p.h);
  const Eigen::Vector3d g1 = foh_gamma1(p.h), g2 = foh_gamma2(p.h);

  Trajectory traj;
  traj.h = p.h;
  traj.split = p.waypoint ? p.N_s : p.N;
  traj.knots.resize(N);
  for (int k = 0; k < N; ++k) {
    Knot& kn = traj.knots[k];
    kn.q.resize(m);
    kn.qd.resize(m);
    kn.qdd.resize(m);
    kn.u.resize(m);
  }
  for (int j = 0; j < m; ++j) {
    const auto input = [&](int k) {
      if (k == 0) return p.head.u(j);
      if (k == N - 1) return 0.0;
      return z(j * nz + k - 1);
    };
    Eigen::Vector3d x(p.head.q(j), p.head.qd(j), p.head.qdd(j));
    for (int k = 0; k < N; ++k) {
      Knot& kn = traj.knots[k];
      kn.q(j) = x(0);
      kn.qd(j) = x(1);
      kn.qdd(j) = x(2);
      kn.u(j) = input(k);
      if (k + 1 < N) x = P * x + g1 * input(k) + g2 * input(k + 1);
    }
  }
  // The terminal equalities hold to solver precision; pin them exactly.
  Knot& last = traj.knots.back();
  if (N > 1) {
    last.qd.setZero();
    last.qdd.setZero();
  }
  last.u.setZero();
  traj.knots.front().q = p.head.q;
  traj.knots.front().qd = p.head.qd;
  traj.knots.front().qdd = p.head.qdd;
  traj.knots.front().u = p.head.u;
  return traj;
}

VecX warm_start(const PlanProblem& p, const Trajectory* previous) {
  const int m = p.dof();
  const int nz = p.N - 2;
  VecX z = VecX::Zero(m * nz);
  if (previous == nullptr || previous->dof() != m) return z;
  for (int k = 1; k <= nz; ++k) {
    const int src = k + 1;
    if (src >= previous->size()) break;
    for (int j = 0; j < m; ++j) z(j * nz + k - 1) = previous->knots[src].u(j);
  }
  return z;
}

}  // namespace

Trajectory solve(const PlanProblem& input, const Trajectory* previous) {
  const auto t_start = Clock::now();
  const auto elapsed = [&] {
    return std::chrono::duration<double>(Clock::now() - t_start).count();
  };
  if (previous != nullptr && previous->dof() != input.dof()) previous = nullptr;
  PlanProblem problem = input;
  if (previous != nullptr && previous->size() >= 2) {
    problem.head = previous->knots[1];
  }
  problem.validate();

  const Transcription tr(problem);
  SolveStats stats;
  VecX z = warm_start(problem, previous);

  CollisionModel col = linearize_collisions(problem, tr, z);
  bool relaxed = false;
  StepResult step = solve_model(problem, tr, col, z, 0.0, relaxed);
  if (step.status != QpStatus::kSolved) {
    relaxed = true;
    step = solve_model(problem, tr, col, z, 0.0, relaxed);
    if (step.status != QpStatus::kSolved) {
      throw Error(ErrorCode::kInfeasible,
                  "trajectory QP infeasible with tolerance boxes relaxed");
    }
  }
  z = step.z;
  double f = tr.objective(z);
  stats.iterations = 1;
  stats.merit_history.push_back(f);
  bool converged = !problem.collision.active();
  bool last_model_linear = col.rows.empty();

  double damping = 0.0;
  const double damping_floor =
      1e-3 * (tr.nz() > 0 ? tr.hessian_block().diagonal().mean() : 1.0);
  while (!converged && stats.iterations < problem.max_iterations) {
    if (elapsed() > problem.time_budget) break;
    col = linearize_collisions(problem, tr, z);
    if (col.rows.empty() && last_model_linear && damping == 0.0) {
      // The incumbent already minimizes the exact model.
      converged = true;
      break;
    }
    last_model_linear = col.rows.empty();
    const StepResult trial = solve_model(problem, tr, col, z, damping, relaxed);
    ++stats.iterations;
    if (trial.status != QpStatus::kSolved) {
      damping = std::max(4.0 * damping, damping_floor);
      continue;
    }
    const double predicted = f - trial.model_value;
    const double move = (trial.z - z).cwiseAbs().maxCoeff();
    if (predicted <= 1e-12 * (1.0 + std::abs(f)) ||
        move < problem.stationarity_tol) {
      converged = true;
      break;
    }
    const double f_trial = tr.objective(trial.z);
    const double ratio = (f - f_trial) / predicted;
    if (ratio > 0.1 && f_trial <= f) {
      z = trial.z;
      f = f_trial;
      stats.merit_history.push_back(f);
      if (ratio > 0.75) damping /= 3.0;
    } else {
      damping = std::max(4.0 * damping, damping_floor);
    }
  }

  Trajectory traj = assemble(problem, z);
  stats.converged = converged;
  stats.relaxed = relaxed;
  stats.objective = f;
  stats.wall_time = elapsed();
  traj.stats = std::move(stats);
  return traj;
}

double plan_objective(const PlanProblem& problem, const Trajectory& traj) {
  const CostLayout layout = cost_layout(problem);
  double f = 0.0;
  for (int k = 0; k < traj.size(); ++k) {
    const Knot& kn = traj.knots[k];
    f += layout.weight[k] * (kn.q - *layout.target[k]).squaredNorm();
    f += kn.u.squaredNorm();
    f += problem.weights.w3 * collision_cost(problem.collision, kn.q);
  }
  return f;
}

double dynamics_residual(const Trajectory& traj) {
  const Eigen::Matrix3d P = foh_phi(traj.h);
  const Eigen::Vector3d g1 = foh_gamma1(traj.h), g2 = foh_gamma2(traj.h);
  double worst = 0.0;
  for (int k = 0; k + 1 < traj.size(); ++k) {
    const Knot& a = traj.knots[k];
    const Knot& b = traj.knots[k + 1];
    for (int j = 0; j < traj.dof(); ++j) {
      const Eigen::Vector3d x(a.q(j), a.qd(j), a.qdd(j));
      const Eigen::Vector3d y(b.q(j), b.qd(j), b.qdd(j));
      const Eigen::Vector3d r = y - P * x - g1 * a.u(j) - g2 * b.u(j);
      worst = std::max(worst, r.cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

Knot sample_knot(const Trajectory& traj, double t) {
  if (traj.knots.empty()) {
    throw Error(ErrorCode::kOutOfRange, "empty trajectory");
  }
  const int last = traj.size() - 1;
  t = std::clamp(t, 0.0, traj.duration());
  const double s = t / traj.h;
  // Sample instants that land on a knot return it bit for bit.
  if (std::abs(s - std::round(s)) < 1e-9) {
    return traj.knots[std::min(static_cast<int>(std::round(s)), last)];
  }
  const int k = std::min(static_cast<int>(std::floor(s)), last - 1);
  const double tau = t - k * traj.h;
  const Knot& a = traj.knots[k];
  const Knot& b = traj.knots[k + 1];
  const VecX du = (b.u - a.u) / traj.h;  // jerk slope
  const double t2 = tau * tau, t3 = t2 * tau, t4 = t3 * tau;
  Knot out;
  out.u = a.u + du * tau;
  out.qdd = a.qdd + a.u * tau + du * (t2 / 2.0);
  out.qd = a.qd + a.qdd * tau + a.u * (t2 / 2.0) + du * (t3 / 6.0);
  out.q = a.q + a.qd * tau + a.qdd * (t2 / 2.0) + a.u * (t3 / 6.0) +
          du * (t4 / 24.0);
  return out;
}

ServoReference sample_reference(const Trajectory& traj, double t) {
  if (traj.knots.empty() || t < 0.0 || t > traj.duration() + 1e-12) {
    throw Error(ErrorCode::kOutOfRange, "reference time outside trajectory");
  }
  Knot k = sample_knot(traj, t);
  return {std::move(k.q), std::move(k.qd), std::move(k.qdd)};
}

}  // namespace mpgrasp
