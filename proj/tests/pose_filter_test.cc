#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "mpgrasp/error.h"
#include "mpgrasp/pose_filter.h"
#include "filter_scenarios.h"
#include "models.h"

using namespace mpgrasp;
using namespace mpgrasp::testing;

namespace {

FilterConfig unit_config(double dt) {
  FilterConfig cfg;
  cfg.dt = dt;
  cfg.process_noise_cov = FilterMat::Identity();
  cfg.meas_noise_cov = MeasMat::Identity();
  return cfg;
}

PoseMeasurement meas(const Vec3& p, const Vec3& o) {
  PoseMeasurement z;
  z.p = p;
  z.o.o = o;
  return z;
}

}  // namespace

TEST(ProcessModel, ScalarPatternAtTenHertz) {
  const FilterMat A = process_model(0.1);
  for (int block : {kPosIdx, kOriIdx}) {
    for (int axis = 0; axis < 3; ++axis) {
      const auto at = [&](int r, int c) { return A(block + 3 * r + axis, block + 3 * c + axis); };
      EXPECT_DOUBLE_EQ(at(0, 0), 1.0);
      EXPECT_DOUBLE_EQ(at(0, 1), 0.1);
      EXPECT_DOUBLE_EQ(at(0, 2), 0.005);
      EXPECT_DOUBLE_EQ(at(1, 2), 0.1);
      EXPECT_DOUBLE_EQ(at(1, 0), 0.0);
      EXPECT_DOUBLE_EQ(at(2, 2), 1.0);
    }
  }
  // No coupling between axes or between position and orientation.
  EXPECT_EQ((A.array() != 0.0).count(), 2 * 3 * 6);
}

TEST(ProcessModel, SensorRate) {
  EXPECT_NEAR(process_model(1.0 / 30.0)(kPosIdx, kPosIdx + 6), 5.5556e-4, 1e-8);
}

TEST(ProcessModel, Semigroup) {
  for (double dt : {0.01, 1.0 / 30.0, 0.5}) {
    EXPECT_LE((process_model(dt) * process_model(dt) - process_model(2 * dt)).cwiseAbs().maxCoeff(),
              1e-15);
  }
  EXPECT_THROW(process_model(0.0), Error);
}

TEST(MeasurementModel, Selector) {
  const MeasJac H = measurement_model();
  FilterVec xi = FilterVec::LinSpaced(kFilterDim, 1, kFilterDim);
  const MeasVec z = H * xi;
  EXPECT_EQ(z, (MeasVec() << 1, 2, 3, 10, 11, 12).finished());
}

TEST(Predict, ZeroStateAddsProcessNoise) {
  const FilterConfig cfg = FilterConfig::white_jerk(0.1, 2.0, 3.0, 0.01, 0.1);
  const FilterState s = predict(FilterState{}, cfg);
  EXPECT_TRUE(s.xi.isZero(0.0));
  EXPECT_EQ(s.P, cfg.process_noise_cov);
}

TEST(Predict, OneAxisArithmetic) {
  FilterState s;
  s.xi(kPosIdx) = 1.0;
  s.xi(kPosIdx + 3) = 1.0;
  const FilterState out = predict(s, unit_config(1.0));
  EXPECT_DOUBLE_EQ(out.xi(kPosIdx), 2.0);
  EXPECT_DOUBLE_EQ(out.xi(kPosIdx + 3), 1.0);
}

TEST(Predict, YawWraps) {
  FilterState s;
  s.xi(kOriIdx + 2) = 3.1;
  s.xi(kOriIdx + 5) = 0.2;
  const FilterState out = predict(s, unit_config(1.0));
  EXPECT_NEAR(out.xi(kOriIdx + 2), 3.3 - 2 * M_PI, 1e-15);
}

TEST(Update, ScalarGainOneHalf) {
  FilterState s;
  s.P = FilterMat::Identity();
  const FilterState out = update(s, meas(Vec3(1, 0, 0), Vec3::Zero()), unit_config(1.0));
  EXPECT_DOUBLE_EQ(out.xi(kPosIdx), 0.5);
  EXPECT_DOUBLE_EQ(out.P(kPosIdx, kPosIdx), 0.5);
  EXPECT_DOUBLE_EQ(out.xi(kPosIdx + 3), 0.0);
}

TEST(Update, InnovationWrapsAcrossPi) {
  FilterState s;
  s.P = FilterMat::Identity();
  s.xi(kOriIdx) = 3.1;
  const FilterState out = update(s, meas(Vec3::Zero(), Vec3(-3.1, 0, 0)), unit_config(1.0));
  // Innovation is 2 pi - 6.2 = 0.0832, so the roll moves up by half of it and wraps.
  EXPECT_NEAR(out.xi(kOriIdx), wrap_angle(3.1 + 0.5 * (2 * M_PI - 6.2)), 1e-14);
}

TEST(Update, ZeroNoiseLimitReproducesMeasurement) {
  FilterConfig cfg = FilterConfig::white_jerk(1.0 / 30, 1.0, 1.0, 0.005, 0.05);
  cfg.meas_noise_cov = MeasMat::Identity() * 1e-12;
  FilterState s;
  s.P = FilterMat::Identity() * 0.1;
  s.xi.setConstant(0.2);
  const PoseMeasurement z = meas(Vec3(0.5, -0.3, 0.1), Vec3(0.1, -0.2, 2.0));
  const FilterState out = update(s, z, cfg);
  EXPECT_LE((measurement_model() * out.xi - z.vector()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Update, HugeNoiseKeepsPrior) {
  FilterConfig cfg = unit_config(0.1);
  cfg.meas_noise_cov = MeasMat::Identity() * 1e12;
  FilterState s;
  s.P = FilterMat::Identity();
  s.xi.setConstant(0.1);
  const FilterState out = update(s, meas(Vec3(5, 5, 5), Vec3(1, 1, 1)), cfg);
  EXPECT_LE((out.xi - s.xi).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Update, SingularInnovation) {
  FilterConfig cfg = unit_config(0.1);
  cfg.meas_noise_cov.setZero();
  try {
    update(FilterState{}, meas(Vec3::Zero(), Vec3::Zero()), cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSingularInnovation);
  }
}

TEST(Covariance, SymmetricPsdOverLongRandomRun) {
  const FilterConfig cfg = calibrated_filter(bundled());
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  FilterState s = initial_state(meas(Vec3(0.5, 0, 0.1), Vec3(0, 0, 1)), cfg, 0.5, 2.0);
  double worst_asym = 0.0, worst_eig = 0.0;
  for (int k = 0; k < 10000; ++k) {
    s = predict(s, cfg);
    s = update(s, meas(Vec3(0.5 + 0.1 * n(rng), n(rng) * 0.1, 0.1), Vec3(0, 0, 3 * n(rng))), cfg);
    if (k % 50 == 0 || k == 9999) {
      worst_asym = std::max(worst_asym, (s.P - s.P.transpose()).cwiseAbs().maxCoeff());
      worst_eig = std::min(worst_eig, Eigen::SelfAdjointEigenSolver<FilterMat>(s.P).eigenvalues().minCoeff());
    }
  }
  EXPECT_LE(worst_asym, 1e-10);
  EXPECT_GE(worst_eig, -1e-10);
}

TEST(Consistency, NeesInsideChiSquareBand) {
  const NeesResult r = nees_monte_carlo(calibrated_filter(bundled()), 100, 150, 2024);
  EXPECT_GE(r.fraction(), 0.90) << r.inside << "/" << r.total;
}

TEST(Consistency, SmoothsConstantVelocityTrack) {
  const RmseResult r = constant_velocity_rmse(bundled(), 60.0, 11);
  EXPECT_LE(r.ratio(), 0.7) << r.filtered << " vs raw " << r.raw;
}

TEST(Tracker, CoastsAfterFiveDropouts) {
  PoseTracker t(calibrated_filter(bundled()));
  EXPECT_FALSE(t.initialized());
  t.step(std::nullopt);
  EXPECT_FALSE(t.initialized());
  t.step(meas(Vec3(0.5, 0, 0.1), Vec3::Zero()));
  ASSERT_TRUE(t.initialized());
  for (int i = 0; i < 4; ++i) t.step(std::nullopt);
  EXPECT_FALSE(t.coasting());
  t.step(std::nullopt);
  EXPECT_TRUE(t.coasting());
  t.step(meas(Vec3(0.5, 0, 0.1), Vec3::Zero()));
  EXPECT_FALSE(t.coasting());
  EXPECT_EQ(t.consecutive_dropouts(), 0);
}
