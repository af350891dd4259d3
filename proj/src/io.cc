#include "mpgrasp/io.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "mpgrasp/error.h"

namespace mpgrasp {
namespace {

[[noreturn]] void fail(const std::string& what) {
  throw Error(ErrorCode::kConfig, what);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    cell.erase(0, cell.find_first_not_of(" \t\r"));
    cell.erase(cell.find_last_not_of(" \t\r") + 1);
    out.push_back(cell);
  }
  return out;
}

VecX yaml_vec(const YAML::Node& n, int m, double fallback, const std::string& what) {
  if (!n) return VecX::Constant(m, fallback);
  if (n.IsScalar()) return VecX::Constant(m, n.as<double>());
  if (!n.IsSequence() || static_cast<int>(n.size()) != m) {
    fail(what + " needs " + std::to_string(m) + " entries");
  }
  VecX v(m);
  for (int i = 0; i < m; ++i) v(i) = n[i].as<double>();
  return v;
}

}  // namespace

std::vector<PoseMeasurement> read_pose_csv(std::istream& in) {
  static const std::vector<std::string> kHeader = {"t", "px", "py", "pz",
                                                   "roll", "pitch", "yaw"};
  std::string line;
  if (!std::getline(in, line) || split_csv(line) != kHeader) {
    fail("pose file needs the header t,px,py,pz,roll,pitch,yaw");
  }
  std::vector<PoseMeasurement> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 7) fail("line " + std::to_string(lineno) + ": expected 7 columns");
    double v[7];
    for (int i = 0; i < 7; ++i) {
      try {
        std::size_t used = 0;
        v[i] = std::stod(cells[i], &used);
        if (used != cells[i].size()) throw std::invalid_argument(cells[i]);
      } catch (const std::exception&) {
        fail("line " + std::to_string(lineno) + ": bad number '" + cells[i] + "'");
      }
    }
    PoseMeasurement m;
    m.timestamp = v[0];
    m.p = Vec3(v[1], v[2], v[3]);
    m.o = EulerAngles::wrapped(Vec3(v[4], v[5], v[6]));
    if (!rows.empty() && !(m.timestamp > rows.back().timestamp)) {
      fail("line " + std::to_string(lineno) + ": timestamps must increase");
    }
    rows.push_back(m);
  }
  return rows;
}

void write_pose_csv(std::ostream& out, const std::vector<PoseMeasurement>& rows) {
  out << "t,px,py,pz,roll,pitch,yaw\n";
  out.precision(17);  // exact round trip
  for (const auto& r : rows) {
    out << r.timestamp << ',' << r.p.x() << ',' << r.p.y() << ',' << r.p.z() << ','
        << r.o.roll() << ',' << r.o.pitch() << ',' << r.o.yaw() << '\n';
  }
}

std::vector<PoseMeasurement> filter_pose_stream(
    const std::vector<PoseMeasurement>& rows, double jerk_psd_position,
    double jerk_psd_orientation, double sigma_p, double sigma_o) {
  if (rows.empty()) return {};
  double dt = 1.0 / 30.0;
  if (rows.size() > 1) {
    std::vector<double> gaps;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      gaps.push_back(rows[i].timestamp - rows[i - 1].timestamp);
    }
    std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
    dt = gaps[gaps.size() / 2];
  }
  PoseTracker tracker(FilterConfig::white_jerk(dt, jerk_psd_position,
                                               jerk_psd_orientation, sigma_p, sigma_o));
  std::vector<PoseMeasurement> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0) {
      const long steps = std::lround((rows[i].timestamp - rows[i - 1].timestamp) / dt);
      for (long s = 1; s < steps; ++s) tracker.step(std::nullopt);
    }
    tracker.step(rows[i]);
    const FilterState& st = tracker.state();
    PoseMeasurement f;
    f.timestamp = rows[i].timestamp;
    f.p = st.position();
    f.o = EulerAngles::wrapped(st.orientation());
    out.push_back(f);
  }
  return out;
}

PlanProblem parse_plan_problem(const std::string& yaml_text, const RobotModel* robot) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    fail(std::string("yaml: ") + e.what());
  }
  const YAML::Node head = root["head"];
  if (!head || !head["q"] || !head["q"].IsSequence()) fail("head.q missing");
  const int m = static_cast<int>(head["q"].size());
  if (robot != nullptr && robot->dof() != m) fail("head.q size differs from robot dof");

  PlanProblem p;
  p.head.q = yaml_vec(head["q"], m, 0.0, "head.q");
  p.head.qd = yaml_vec(head["qd"], m, 0.0, "head.qd");
  p.head.qdd = yaml_vec(head["qdd"], m, 0.0, "head.qdd");
  p.head.u = yaml_vec(head["u"], m, 0.0, "head.u");
  p.h = root["h"] ? root["h"].as<double>() : 0.1;

  const YAML::Node goal = root["goal"];
  if (!goal || !goal["center"]) fail("goal.center missing");
  p.goal.center = yaml_vec(goal["center"], m, 0.0, "goal.center");
  p.goal.half_width = yaml_vec(goal["half_width"], m, 0.01, "goal.half_width");
  if (const YAML::Node w = root["waypoint"]) {
    ToleranceSet set;
    set.center = yaml_vec(w["center"], m, 0.0, "waypoint.center");
    set.half_width = yaml_vec(w["half_width"], m, 0.05, "waypoint.half_width");
    p.waypoint = set;
  }
  p.enforce_waypoint = root["enforce_waypoint"] ? root["enforce_waypoint"].as<bool>() : true;
  p.enforce_goal = root["enforce_goal"] ? root["enforce_goal"].as<bool>() : true;

  const YAML::Node b = root["bounds"];
  const auto bound = [&](const char* key, const VecX* from_robot, double fallback) -> VecX {
    if (b && b[key]) return yaml_vec(b[key], m, 0.0, std::string("bounds.") + key);
    if (from_robot != nullptr) return *from_robot;
    return VecX::Constant(m, fallback);
  };
  const JointLimits* lim = robot != nullptr ? &robot->limits : nullptr;
  p.bounds.q_lower = bound("q_lower", lim ? &lim->lower : nullptr, -M_PI);
  p.bounds.q_upper = bound("q_upper", lim ? &lim->upper : nullptr, M_PI);
  p.bounds.qd_max = bound("qd_max", lim ? &lim->velocity : nullptr, 1.5);
  p.bounds.qdd_max = bound("qdd_max", lim ? &lim->acceleration : nullptr, 5.0);
  p.bounds.u_max = bound("u_max", lim ? &lim->jerk : nullptr, 30.0);

  if (const YAML::Node w = root["weights"]) {
    if (w["w1"]) p.weights.w1 = w["w1"].as<double>();
    if (w["w2"]) p.weights.w2 = w["w2"].as<double>();
    if (w["w3"]) p.weights.w3 = w["w3"].as<double>();
  }
  if (const YAML::Node obs = root["obstacles"]) {
    if (robot == nullptr) fail("obstacles need a robot model (--config)");
    p.collision.robot = std::make_shared<const RobotModel>(*robot);
    for (const auto& o : obs) {
      Sphere s;
      const VecX c = yaml_vec(o["center"], 3, 0.0, "obstacle.center");
      s.center = c;
      s.radius = o["radius"].as<double>();
      p.collision.obstacles.push_back(s);
    }
    if (root["safety_margin"]) p.collision.safety_margin = root["safety_margin"].as<double>();
  }
  if (root["time_budget"]) p.time_budget = root["time_budget"].as<double>();
  if (root["max_iterations"]) p.max_iterations = root["max_iterations"].as<int>();

  if (root["N"]) {
    p.N = root["N"].as<int>();
    p.N_s = root["N_s"] ? root["N_s"].as<int>() : p.N;
  } else {
    const double scale = root["timing_scale"] ? root["timing_scale"].as<double>() : 1.0;
    const HorizonLimits hl_lim{p.bounds.qd_max * scale, p.bounds.qdd_max * scale,
                               p.bounds.u_max};
    std::optional<VecX> way;
    if (p.waypoint) way = p.waypoint->center;
    const HorizonLengths hl = horizon_lengths(p.head, way, p.goal.center, hl_lim, p.h);
    p.N = hl.total;
    p.N_s = hl.split;
    if (p.waypoint && !hl.waypoint_reachable) {
      p.enforce_waypoint = false;
      p.enforce_goal = false;
    }
  }
  p.validate();
  return p;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  const int m = traj.dof();
  out << "k,t";
  for (const char* name : {"q", "qd", "qdd", "u"}) {
    for (int j = 0; j < m; ++j) out << ',' << name << j;
  }
  out << '\n';
  out.precision(12);
  for (int k = 0; k < traj.size(); ++k) {
    const Knot& kn = traj.knots[k];
    out << k << ',' << k * traj.h;
    for (const VecX* v : {&kn.q, &kn.qd, &kn.qdd, &kn.u}) {
      for (int j = 0; j < m; ++j) out << ',' << (*v)(j);
    }
    out << '\n';
  }
}

Json solve_stats_json(const Trajectory& traj) {
  return {{"iterations", traj.stats.iterations},
          {"wall_time", traj.stats.wall_time},
          {"converged", traj.stats.converged},
          {"relaxed", traj.stats.relaxed},
          {"objective", traj.stats.objective},
          {"N", traj.size()},
          {"N_s", traj.split},
          {"dynamics_residual", dynamics_residual(traj)}};
}

}  // namespace mpgrasp
