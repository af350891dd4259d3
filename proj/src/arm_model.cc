#include "mpgrasp/arm_model.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "mpgrasp/error.h"

namespace mpgrasp {

namespace {

template <typename S>
using Vec3T = Eigen::Matrix<S, 3, 1>;
template <typename S>
using Mat3T = Eigen::Matrix<S, 3, 3>;
template <typename S>
using VecXT = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using MatXT = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <typename S>
struct FrameT {
  Mat3T<S> R;
  Vec3T<S> p;
};

template <typename S>
Mat3T<S> rot_x_t(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3T<S> R;
  R << S(1), S(0), S(0), S(0), S(c), S(-s), S(0), S(s), S(c);
  return R;
}

template <typename S>
Mat3T<S> rot_z_t(const S& a) {
  using std::cos;
  using std::sin;
  const S c = cos(a), s = sin(a);
  Mat3T<S> R;
  R << c, -s, S(0), s, c, S(0), S(0), S(0), S(1);
  return R;
}

template <typename S>
std::vector<FrameT<S>> frames_t(const RobotModel& model, const VecXT<S>& q) {
  std::vector<FrameT<S>> out;
  out.reserve(model.links.size());
  Mat3T<S> R = Mat3T<S>::Identity();
  Vec3T<S> p = Vec3T<S>::Zero();
  for (std::size_t i = 0; i < model.links.size(); ++i) {
    const DhParams& dh = model.links[i].dh;
    const Mat3T<S> rx = rot_x_t<S>(dh.alpha);
    Vec3T<S> local(S(dh.a), S(0), S(0));
    local += rx * Vec3T<S>(S(0), S(0), S(dh.d));
    p = p + R * local;
    R = R * rx * rot_z_t<S>(q(i) + S(dh.theta_offset));
    out.push_back({R, p});
  }
  return out;
}

// Eigen's cross() conjugates complex operands, so the complex step needs this.
template <typename S>
Vec3T<S> cross_t(const Vec3T<S>& a, const Vec3T<S>& b) {
  return Vec3T<S>(a.y() * b.z() - a.z() * b.y(), a.z() * b.x() - a.x() * b.z(),
                  a.x() * b.y() - a.y() * b.x());
}

template <typename S>
Mat3T<S> parallel_axis(const Vec3T<S>& r) {
  // No squaredNorm/dot here: they conjugate and break the complex step.
  return (r.transpose() * r).value() * Mat3T<S>::Identity() - r * r.transpose();
}

template <typename S>
MatXT<S> crba_t(const RobotModel& model, const VecXT<S>& q) {
  const int n = model.dof();
  const auto frames = frames_t<S>(model, q);
  std::vector<Vec3T<S>> com(n);
  std::vector<Mat3T<S>> inertia(n);
  for (int i = 0; i < n; ++i) {
    const Link& link = model.links[i];
    com[i] = frames[i].p + frames[i].R * link.com.cast<S>();
    inertia[i] = frames[i].R * link.inertia.cast<S>() * frames[i].R.transpose();
  }

  // Composite bodies {i, ..., n-1}: mass, center of mass, inertia about it.
  std::vector<S> cm(n);
  std::vector<Vec3T<S>> cc(n);
  std::vector<Mat3T<S>> ci(n);
  for (int i = n - 1; i >= 0; --i) {
    const S mi(model.links[i].mass);
    if (i == n - 1) {
      cm[i] = mi;
      cc[i] = com[i];
      ci[i] = inertia[i];
      continue;
    }
    cm[i] = mi + cm[i + 1];
    cc[i] = (mi * com[i] + cm[i + 1] * cc[i + 1]) / cm[i];
    ci[i] = inertia[i] + mi * parallel_axis<S>(com[i] - cc[i]) + ci[i + 1] +
            cm[i + 1] * parallel_axis<S>(cc[i + 1] - cc[i]);
  }

  MatXT<S> M = MatXT<S>::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const Vec3T<S> zi = frames[i].R.col(2);
    const Vec3T<S> momentum = cm[i] * cross_t<S>(zi, cc[i] - frames[i].p);
    for (int j = 0; j <= i; ++j) {
      const Vec3T<S> zj = frames[j].R.col(2);
      const Vec3T<S> h = ci[i] * zi + cross_t<S>(cc[i] - frames[j].p, momentum);
      M(j, i) = (zj.transpose() * h).value();
      M(i, j) = M(j, i);
    }
  }
  return M;
}

void require_size(const RobotModel& model, const VecX& v, const char* what) {
  if (v.size() != model.dof()) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(what) + " has wrong length");
  }
}

bool is_psd_symmetric(const Mat3& I) {
  if ((I - I.transpose()).cwiseAbs().maxCoeff() > 1e-12) return false;
  Eigen::SelfAdjointEigenSolver<Mat3> es(I);
  return es.eigenvalues().minCoeff() >= -1e-12;
}

}  // namespace

void RobotModel::validate() const {
  const int n = dof();
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "robot has no joints");
  for (const Link& link : links) {
    if (!(link.mass > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "link mass must be positive");
    }
    if (!is_psd_symmetric(link.inertia)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "link inertia must be symmetric PSD");
    }
  }
  const auto check = [n](const VecX& v, const char* name) {
    if (v.size() != n) {
      throw Error(ErrorCode::kInvalidArgument,
                  std::string("limit vector ") + name + " has wrong length");
    }
  };
  check(limits.lower, "lower");
  check(limits.upper, "upper");
  check(limits.velocity, "velocity");
  check(limits.acceleration, "acceleration");
  check(limits.jerk, "jerk");
  check(limits.torque, "torque");
  check(ik_weights, "ik_weights");
  for (int i = 0; i < n; ++i) {
    if (!(limits.lower(i) < limits.upper(i)) || !(limits.velocity(i) > 0) ||
        !(limits.acceleration(i) > 0) || !(limits.jerk(i) > 0) ||
        !(limits.torque(i) > 0)) {
      throw Error(ErrorCode::kInvalidArgument, "inconsistent joint limits");
    }
  }
}

RobotModel RobotModel::with_mass_scale(double factor) const {
  RobotModel out = *this;
  for (Link& link : out.links) {
    link.mass *= factor;
    link.inertia *= factor;
  }
  return out;
}

std::vector<Pose> joint_frames(const RobotModel& model, const VecX& q) {
  require_size(model, q, "q");
  const auto frames = frames_t<double>(model, q);
  std::vector<Pose> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back({f.p, f.R});
  return out;
}

Pose forward_kinematics(const RobotModel& model, const VecX& q) {
  return joint_frames(model, q).back() * model.tool;
}

MatX point_jacobian(const RobotModel& model, const std::vector<Pose>& frames,
                    int link, const Vec3& world_point) {
  MatX J = MatX::Zero(3, model.dof());
  for (int j = 0; j <= link; ++j) {
    const Vec3 z = frames[j].R.col(2);
    J.col(j) = z.cross(world_point - frames[j].p);
  }
  return J;
}

MatX jacobian(const RobotModel& model, const VecX& q) {
  const auto frames = joint_frames(model, q);
  const Vec3 tip = (frames.back() * model.tool).p;
  MatX J(6, model.dof());
  for (int j = 0; j < model.dof(); ++j) {
    const Vec3 z = frames[j].R.col(2);
    J.block<3, 1>(0, j) = z.cross(tip - frames[j].p);
    J.block<3, 1>(3, j) = z;
  }
  return J;
}

std::vector<VecX> ik_seeds(const RobotModel& model, const VecX& q_seed,
                           int count) {
  // Kronecker sequence with irrational per-joint strides.
  static constexpr double kStrides[] = {
      0.41421356237309515, 0.7320508075688772, 0.2360679774997898,
      0.6457513110645907,  0.3166247903554,    0.6055512754639891,
      0.1231056256176606,  0.3588989435406738, 0.7958315233127191,
      0.4772255750516612};
  std::vector<VecX> seeds{q_seed};
  const int n = model.dof();
  for (int s = 1; s < count; ++s) {
    VecX q(n);
    for (int i = 0; i < n; ++i) {
      const double stride = kStrides[i % std::size(kStrides)];
      const double frac = std::fmod(0.5 + s * stride, 1.0);
      const double lo = model.limits.lower(i), hi = model.limits.upper(i);
      q(i) = lo + (hi - lo) * (0.1 + 0.8 * frac);
    }
    seeds.push_back(std::move(q));
  }
  return seeds;
}

namespace {

struct IkAttempt {
  VecX q;
  bool converged = false;
};

IkAttempt solve_dls(const RobotModel& model, const Pose& target, VecX q,
                    const IkOptions& opt) {
  const int rows = opt.position_only ? 3 : 6;
  const double lambda2 = opt.damping * opt.damping;
  constexpr double kMaxStep = 0.5;
  for (int it = 0; it <= opt.max_iterations; ++it) {
    const Pose tip = forward_kinematics(model, q);
    const PoseError err = pose_distance(tip, target);
    if (err.position <= opt.position_tolerance &&
        (opt.position_only || err.angle <= opt.angle_tolerance)) {
      return {q, true};
    }
    if (it == opt.max_iterations || !q.allFinite()) break;
    Eigen::VectorXd e(rows);
    e.head<3>() = target.p - tip.p;
    if (!opt.position_only) {
      e.tail<3>() = rotation_log(target.R * tip.R.transpose());
    }
    const MatX J = jacobian(model, q).topRows(rows);
    MatX JJt = J * J.transpose();
    JJt.diagonal().array() += lambda2;
    VecX dq = J.transpose() * JJt.ldlt().solve(e);
    const double biggest = dq.cwiseAbs().maxCoeff();
    if (biggest > kMaxStep) dq *= kMaxStep / biggest;
    q += dq;
  }
  return {q, false};
}

// Revolute joints are periodic: moves each joint by a multiple of 2 pi to the
// in-limit representative closest to the reference, if there is one.
void unwrap_towards(const RobotModel& model, const VecX& ref, VecX& q) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  for (int i = 0; i < q.size(); ++i) {
    const double base = q(i) + std::round((ref(i) - q(i)) / kTwoPi) * kTwoPi;
    double best = q(i);
    double best_dist = std::numeric_limits<double>::infinity();
    for (int k = -1; k <= 1; ++k) {
      const double c = base + k * kTwoPi;
      if (c < model.limits.lower(i) || c > model.limits.upper(i)) continue;
      if (std::abs(c - ref(i)) < best_dist) {
        best_dist = std::abs(c - ref(i));
        best = c;
      }
    }
    q(i) = best;
  }
}

bool within_limits(const RobotModel& model, const VecX& q) {
  return (q.array() >= model.limits.lower.array()).all() &&
         (q.array() <= model.limits.upper.array()).all();
}

}  // namespace

VecX inverse_kinematics(const RobotModel& model, const Pose& target,
                        const VecX& q_seed, const IkOptions& options) {
  require_size(model, q_seed, "q_seed");
  if (!target.p.allFinite() || !target.R.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "IK target is not finite");
  }
  bool any_converged = false;
  double best_cost = std::numeric_limits<double>::infinity();
  VecX best;
  for (const VecX& seed : ik_seeds(model, q_seed, options.num_seeds)) {
    IkAttempt attempt = solve_dls(model, target, seed, options);
    if (!attempt.converged) continue;
    any_converged = true;
    unwrap_towards(model, q_seed, attempt.q);
    if (!within_limits(model, attempt.q)) continue;
    const double cost =
        (model.ik_weights.array() * (attempt.q - q_seed).array().square()).sum();
    if (cost < best_cost) {
      best_cost = cost;
      best = attempt.q;
    }
  }
  if (!any_converged) {
    throw Error(ErrorCode::kUnreachable, "no IK candidate converged");
  }
  if (best.size() == 0) {
    throw Error(ErrorCode::kOutOfLimits,
                "all converged IK candidates violate joint limits");
  }
  return best;
}

MatX mass_matrix(const RobotModel& model, const VecX& q) {
  require_size(model, q, "q");
  return crba_t<double>(model, q);
}

VecX inverse_dynamics(const RobotModel& model, const VecX& q, const VecX& qd,
                      const VecX& qdd) {
  const int n = model.dof();
  const auto frames = frames_t<double>(model, q);
  std::vector<Vec3> com(n), force(n), moment(n);
  std::vector<Mat3> inertia(n);

  Vec3 w = Vec3::Zero(), wd = Vec3::Zero();
  Vec3 acc = -model.gravity;  // origin acceleration of the previous frame
  Vec3 prev_origin = Vec3::Zero();
  for (int i = 0; i < n; ++i) {
    const Vec3 z = frames[i].R.col(2);
    const Vec3& o = frames[i].p;
    const Vec3 r = o - prev_origin;
    acc = acc + wd.cross(r) + w.cross(w.cross(r));
    const Vec3 w_new = w + qd(i) * z;
    wd = wd + qdd(i) * z + w.cross(qd(i) * z);
    w = w_new;

    const Link& link = model.links[i];
    com[i] = o + frames[i].R * link.com;
    inertia[i] = frames[i].R * link.inertia * frames[i].R.transpose();
    const Vec3 rc = com[i] - o;
    const Vec3 acc_c = acc + wd.cross(rc) + w.cross(w.cross(rc));
    force[i] = link.mass * acc_c;
    moment[i] = inertia[i] * wd + w.cross(inertia[i] * w);
    prev_origin = o;
  }

  VecX tau(n);
  Vec3 f_next = Vec3::Zero(), n_next = Vec3::Zero();
  for (int i = n - 1; i >= 0; --i) {
    const Vec3& o = frames[i].p;
    Vec3 f = force[i] + f_next;
    Vec3 m = moment[i] + (com[i] - o).cross(force[i]) + n_next;
    if (i + 1 < n) m += (frames[i + 1].p - o).cross(f_next);
    tau(i) = frames[i].R.col(2).dot(m);
    f_next = f;
    n_next = m;
  }
  return tau;
}

VecX gravity_torque(const RobotModel& model, const VecX& q) {
  const VecX zero = VecX::Zero(model.dof());
  return inverse_dynamics(model, q, zero, zero);
}

DynamicsTerms dynamics_terms(const RobotModel& model, const VecX& q,
                             const VecX& qd) {
  require_size(model, q, "q");
  require_size(model, qd, "qdot");
  const int n = model.dof();
  using Cx = std::complex<double>;
  constexpr double kStep = 1e-30;

  std::vector<MatX> dM(n);
  for (int k = 0; k < n; ++k) {
    VecXT<Cx> qc = q.cast<Cx>();
    qc(k) += Cx(0.0, kStep);
    dM[k] = crba_t<Cx>(model, qc).imag() / kStep;
  }

  DynamicsTerms out;
  out.M = mass_matrix(model, q);
  out.g = gravity_torque(model, q);
  out.C = MatX::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double c = 0.0;
      for (int k = 0; k < n; ++k) {
        c += 0.5 * (dM[k](i, j) + dM[j](i, k) - dM[i](j, k)) * qd(k);
      }
      out.C(i, j) = c;
    }
  }
  return out;
}

double kinetic_energy(const RobotModel& model, const VecX& q, const VecX& qd) {
  return 0.5 * qd.dot(mass_matrix(model, q) * qd);
}

}  // namespace mpgrasp
