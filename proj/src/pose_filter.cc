#include "mpgrasp/pose_filter.h"

#include <cmath>

#include <Eigen/LU>

#include "mpgrasp/error.h"

namespace mpgrasp {

namespace {

Eigen::Matrix3d integrator_block(double dt) {
  Eigen::Matrix3d B;
  B << 1.0, dt, 0.5 * dt * dt, 0.0, 1.0, dt, 0.0, 0.0, 1.0;
  return B;
}

// Kronecker product B (x) I3 for the [x, xdot, xddot] ordering of one 9-block.
Eigen::Matrix<double, 9, 9> kron_i3(const Eigen::Matrix3d& B) {
  Eigen::Matrix<double, 9, 9> K = Eigen::Matrix<double, 9, 9>::Zero();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      K.block<3, 3>(3 * r, 3 * c) = B(r, c) * Eigen::Matrix3d::Identity();
    }
  }
  return K;
}

void wrap_orientation(FilterVec& xi) {
  for (int i = 0; i < 3; ++i) xi(kOriIdx + i) = wrap_angle(xi(kOriIdx + i));
}

}  // namespace

Pose FilterState::pose() const {
  return {position(), euler_to_rot(EulerAngles{orientation()})};
}

MeasVec PoseMeasurement::vector() const {
  MeasVec v;
  v << p, o.o;
  return v;
}

FilterConfig FilterConfig::white_jerk(double dt, double jerk_psd_position,
                                      double jerk_psd_orientation,
                                      double sigma_p, double sigma_o) {
  Eigen::Matrix3d q;
  const double dt2 = dt * dt, dt3 = dt2 * dt, dt4 = dt3 * dt, dt5 = dt4 * dt;
  q << dt5 / 20, dt4 / 8, dt3 / 6, dt4 / 8, dt3 / 3, dt2 / 2, dt3 / 6,
      dt2 / 2, dt;
  FilterConfig cfg;
  cfg.dt = dt;
  cfg.process_noise_cov.setZero();
  cfg.process_noise_cov.block<9, 9>(kPosIdx, kPosIdx) =
      kron_i3(jerk_psd_position * q);
  cfg.process_noise_cov.block<9, 9>(kOriIdx, kOriIdx) =
      kron_i3(jerk_psd_orientation * q);
  cfg.meas_noise_cov.setZero();
  cfg.meas_noise_cov.diagonal() << Vec3::Constant(sigma_p * sigma_p),
      Vec3::Constant(sigma_o * sigma_o);
  return cfg;
}

FilterMat process_model(double dt) {
  if (!(dt > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "filter dt must be positive");
  }
  FilterMat A = FilterMat::Zero();
  const auto block = kron_i3(integrator_block(dt));
  A.block<9, 9>(kPosIdx, kPosIdx) = block;
  A.block<9, 9>(kOriIdx, kOriIdx) = block;
  return A;
}

MeasJac measurement_model() {
  MeasJac H = MeasJac::Zero();
  H.block<3, 3>(0, kPosIdx).setIdentity();
  H.block<3, 3>(3, kOriIdx).setIdentity();
  return H;
}

FilterState predict(const FilterState& state, const FilterConfig& cfg) {
  const FilterMat A = process_model(cfg.dt);
  FilterState out;
  out.xi = A * state.xi;
  wrap_orientation(out.xi);
  out.P = A * state.P * A.transpose() + cfg.process_noise_cov;
  out.P = 0.5 * (out.P + out.P.transpose()).eval();
  return out;
}

FilterState update(const FilterState& state, const PoseMeasurement& z,
                   const FilterConfig& cfg) {
  const MeasJac H = measurement_model();
  MeasVec innovation = z.vector() - H * state.xi;
  for (int i = 3; i < 6; ++i) innovation(i) = wrap_angle(innovation(i));

  const MeasMat S = H * state.P * H.transpose() + cfg.meas_noise_cov;
  Eigen::FullPivLU<MeasMat> lu(S);
  if (!lu.isInvertible() || !S.allFinite()) {
    throw Error(ErrorCode::kSingularInnovation,
                "innovation covariance is singular");
  }
  const Eigen::Matrix<double, kFilterDim, kMeasDim> K =
      state.P * H.transpose() * lu.inverse();

  FilterState out;
  out.xi = state.xi + K * innovation;
  wrap_orientation(out.xi);
  out.P = (FilterMat::Identity() - K * H) * state.P;
  out.P = 0.5 * (out.P + out.P.transpose()).eval();
  return out;
}

FilterState initial_state(const PoseMeasurement& z, const FilterConfig& cfg,
                          double velocity_std, double acceleration_std) {
  FilterState s;
  s.xi.segment<3>(kPosIdx) = z.p;
  s.xi.segment<3>(kOriIdx) = z.o.o;
  wrap_orientation(s.xi);
  const double v2 = velocity_std * velocity_std;
  const double a2 = acceleration_std * acceleration_std;
  for (int block : {kPosIdx, kOriIdx}) {
    const int m = block == kPosIdx ? 0 : 3;
    for (int i = 0; i < 3; ++i) {
      s.P(block + i, block + i) = cfg.meas_noise_cov(m + i, m + i);
      s.P(block + 3 + i, block + 3 + i) = v2;
      s.P(block + 6 + i, block + 6 + i) = a2;
    }
  }
  return s;
}

void PoseTracker::step(const std::optional<PoseMeasurement>& z) {
  if (!state_) {
    if (z) {
      state_ = initial_state(*z, cfg_, velocity_std_, acceleration_std_);
      dropouts_ = 0;
    }
    return;
  }
  FilterState next = predict(*state_, cfg_);
  if (z) {
    next = update(next, *z, cfg_);
    dropouts_ = 0;
  } else {
    ++dropouts_;
  }
  state_ = std::move(next);
}

}  // namespace mpgrasp
