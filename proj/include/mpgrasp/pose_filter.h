#pragma once

#include <optional>

#include <Eigen/Core>

#include "mpgrasp/geom_se3.h"

namespace mpgrasp {

inline constexpr int kFilterDim = 18;
inline constexpr int kMeasDim = 6;

using FilterVec = Eigen::Matrix<double, kFilterDim, 1>;
using FilterMat = Eigen::Matrix<double, kFilterDim, kFilterDim>;
using MeasVec = Eigen::Matrix<double, kMeasDim, 1>;
using MeasMat = Eigen::Matrix<double, kMeasDim, kMeasDim>;
using MeasJac = Eigen::Matrix<double, kMeasDim, kFilterDim>;

// State layout: [p, pdot, pddot, o, odot, oddot], three entries each.
inline constexpr int kPosIdx = 0;
inline constexpr int kOriIdx = 9;

struct FilterState {
  FilterVec xi = FilterVec::Zero();
  FilterMat P = FilterMat::Zero();

  Vec3 position() const { return xi.segment<3>(kPosIdx); }
  Vec3 velocity() const { return xi.segment<3>(kPosIdx + 3); }
  Vec3 orientation() const { return xi.segment<3>(kOriIdx); }
  Pose pose() const;
};

struct FilterConfig {
  double dt = 1.0 / 30.0;
  FilterMat process_noise_cov = FilterMat::Identity();
  MeasMat meas_noise_cov = MeasMat::Identity();

  /// White-jerk process noise (spectral densities in m^2/s^5 and rad^2/s^5)
  /// and diagonal measurement noise from per-axis standard deviations.
  static FilterConfig white_jerk(double dt, double jerk_psd_position,
                                 double jerk_psd_orientation, double sigma_p,
                                 double sigma_o);
};

struct PoseMeasurement {
  Vec3 p = Vec3::Zero();
  EulerAngles o;
  double timestamp = 0.0;

  MeasVec vector() const;
};

/// Block-diagonal triple-integrator transition, one 9x9 block for position
/// and one for orientation.
FilterMat process_model(double dt);

/// 6x18 selector of the position and orientation entries.
MeasJac measurement_model();

FilterState predict(const FilterState& state, const FilterConfig& cfg);

/// Throws kSingularInnovation if H P H^T + R cannot be inverted.
FilterState update(const FilterState& state, const PoseMeasurement& z,
                   const FilterConfig& cfg);

/// Starts a track from a first measurement with zero derivatives.
FilterState initial_state(const PoseMeasurement& z, const FilterConfig& cfg,
                          double velocity_std, double acceleration_std);

/// Sensor-rate tracker around the filter: predict on every tick, update when
/// a measurement is present. After kCoastLimit consecutive dropouts the track
/// is reported as coasting.
class PoseTracker {
 public:
  static constexpr int kCoastLimit = 5;

  explicit PoseTracker(FilterConfig cfg, double velocity_std = 0.5,
                       double acceleration_std = 2.0)
      : cfg_(std::move(cfg)),
        velocity_std_(velocity_std),
        acceleration_std_(acceleration_std) {}

  void step(const std::optional<PoseMeasurement>& z);
  void reset() {
    state_.reset();
    dropouts_ = 0;
  }

  bool initialized() const { return state_.has_value(); }
  bool coasting() const { return dropouts_ >= kCoastLimit; }
  int consecutive_dropouts() const { return dropouts_; }
  const FilterState& state() const { return *state_; }
  const FilterConfig& config() const { return cfg_; }

 private:
  FilterConfig cfg_;
  double velocity_std_;
  double acceleration_std_;
  std::optional<FilterState> state_;
  int dropouts_ = 0;
};

}  // namespace mpgrasp
