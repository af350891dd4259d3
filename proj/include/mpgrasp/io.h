#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mpgrasp/mp_trajopt.h"
#include "mpgrasp/pose_filter.h"
#include "mpgrasp/run_log.h"

namespace mpgrasp {

/// Comma-separated pose stream with header t,px,py,pz,roll,pitch,yaw.
/// Throws kConfig on a missing header or malformed rows.
std::vector<PoseMeasurement> read_pose_csv(std::istream& in);
void write_pose_csv(std::ostream& out, const std::vector<PoseMeasurement>& rows);

/// Runs the tracker over a measurement stream. The filter period is the
/// median timestamp spacing; gaps of several periods become dropouts.
std::vector<PoseMeasurement> filter_pose_stream(
    const std::vector<PoseMeasurement>& rows, double jerk_psd_position,
    double jerk_psd_orientation, double sigma_p, double sigma_o);

/// Plan problem from YAML. Bounds default to the robot's limits when a
/// robot is given; N and N_s default to horizon_lengths.
PlanProblem parse_plan_problem(const std::string& yaml_text,
                               const RobotModel* robot);

/// Table k,t,q...,qd...,qdd...,u... with one row per knot.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
Json solve_stats_json(const Trajectory& traj);

}  // namespace mpgrasp
