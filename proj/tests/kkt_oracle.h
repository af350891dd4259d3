#pragma once
// Monolithic equality-constrained least squares over all states and inputs of
// a scalar rest-to-rest move, with the FOH coefficients written out by hand.
// Valid while no inequality is active (loose bounds, goal inside its box).

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mpgrasp/mp_trajopt.h"

namespace mpgrasp::testing {

struct KktOracle {
  Eigen::VectorXd x;  // per knot: q, qd, qdd, u
  double cost = 0.0;

  double q(int k) const { return x(4 * k); }
  double qd(int k) const { return x(4 * k + 1); }
  double qdd(int k) const { return x(4 * k + 2); }
  double u(int k) const { return x(4 * k + 3); }
};

inline KktOracle dense_kkt_oracle(const PlanProblem& p) {
  const int N = p.N;
  const double h = p.h;
  const int nv = 4 * N;
  const auto iq = [](int k) { return 4 * k; };
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(nv, nv);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(nv);
  const double w2 = p.weights.w2, goal = p.goal.center(0);
  for (int k = 0; k < N; ++k) {
    H(iq(k), iq(k)) += 2 * w2;
    g(iq(k)) += -2 * w2 * goal;
    H(iq(k) + 3, iq(k) + 3) += 2.0;
  }
  std::vector<Eigen::VectorXd> rows;
  std::vector<double> rhs;
  const auto eq = [&](std::vector<std::pair<int, double>> terms, double b) {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(nv);
    for (auto [i, v] : terms) r(i) += v;
    rows.push_back(r);
    rhs.push_back(b);
  };
  const double head[4] = {p.head.q(0), p.head.qd(0), p.head.qdd(0), p.head.u(0)};
  for (int i = 0; i < 4; ++i) eq({{iq(0) + i, 1.0}}, head[i]);
  const double h2 = h * h, h3 = h2 * h;
  for (int k = 0; k + 1 < N; ++k) {
    const int a = iq(k), b = iq(k + 1);
    eq({{b, 1}, {a, -1}, {a + 1, -h}, {a + 2, -h2 / 2}, {a + 3, -h3 / 8}, {b + 3, -h3 / 24}}, 0);
    eq({{b + 1, 1}, {a + 1, -1}, {a + 2, -h}, {a + 3, -h2 / 3}, {b + 3, -h2 / 6}}, 0);
    eq({{b + 2, 1}, {a + 2, -1}, {a + 3, -h / 2}, {b + 3, -h / 2}}, 0);
  }
  for (int i = 1; i < 4; ++i) eq({{iq(N - 1) + i, 1.0}}, 0.0);  // terminal rest
  const int ne = static_cast<int>(rows.size());
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nv + ne, nv + ne);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(nv + ne);
  K.topLeftCorner(nv, nv) = H;
  r.head(nv) = -g;
  for (int i = 0; i < ne; ++i) {
    K.block(nv + i, 0, 1, nv) = rows[i].transpose();
    K.block(0, nv + i, nv, 1) = rows[i];
    r(nv + i) = rhs[i];
  }
  KktOracle out;
  out.x = K.fullPivLu().solve(r).head(nv);
  out.cost = 0.5 * out.x.dot(H * out.x) + g.dot(out.x) + N * w2 * goal * goal;
  return out;
}

}  // namespace mpgrasp::testing
