#include <limits>
#include <optional>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "mpgrasp/error.h"
#include "mpgrasp/qp_solver.h"

using namespace mpgrasp;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Oracle: try every active set, keep the KKT point that is primal feasible
// with nonnegative multipliers. Exponential, fine for a handful of rows.
std::optional<VectorXd> brute_force(const QpProblem& qp) {
  const int n = qp.num_variables();
  const int me = static_cast<int>(qp.beq.size());
  const int mi = static_cast<int>(qp.bin.size());
  const MatrixXd Ain = MatrixXd(qp.Ain);
  double best = std::numeric_limits<double>::infinity();
  std::optional<VectorXd> out;
  for (int mask = 0; mask < (1 << mi); ++mask) {
    std::vector<int> act;
    for (int i = 0; i < mi; ++i) {
      if (mask & (1 << i)) act.push_back(i);
    }
    const int k = me + static_cast<int>(act.size());
    if (k > n) continue;
    MatrixXd K = MatrixXd::Zero(n + k, n + k);
    VectorXd rhs(n + k);
    K.topLeftCorner(n, n) = qp.H;
    rhs.head(n) = -qp.g;
    for (int r = 0; r < me; ++r) {
      K.block(n + r, 0, 1, n) = qp.Aeq.row(r);
      K.block(0, n + r, n, 1) = qp.Aeq.row(r).transpose();
      rhs(n + r) = qp.beq(r);
    }
    for (int j = 0; j < static_cast<int>(act.size()); ++j) {
      K.block(n + me + j, 0, 1, n) = Ain.row(act[j]);
      K.block(0, n + me + j, n, 1) = Ain.row(act[j]).transpose();
      rhs(n + me + j) = qp.bin(act[j]);
    }
    Eigen::FullPivLU<MatrixXd> lu(K);
    if (lu.rank() < n + k) continue;
    const VectorXd sol = lu.solve(rhs);
    const VectorXd z = sol.head(n);
    // Stationarity H z + g + A^T lambda = 0, so active rows need lambda >= 0.
    const double tol = 1e-9 * std::max(1.0, sol.cwiseAbs().maxCoeff());
    bool ok = true;
    for (int j = 0; j < static_cast<int>(act.size()); ++j) ok &= sol(n + me + j) >= -tol;
    ok &= ((Ain * z - qp.bin).array() <= tol).all();
    if (!ok) continue;
    const double f = 0.5 * z.dot(qp.H * z) + qp.g.dot(z);
    if (f < best) {
      best = f;
      out = z;
    }
  }
  return out;
}

QpProblem random_problem(std::mt19937_64& rng, int n, int me, int mi) {
  std::normal_distribution<double> nd(0.0, 1.0);
  const auto rnd = [&](int r, int c) {
    MatrixXd M(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) M(i, j) = nd(rng);
    return M;
  };
  QpProblem qp;
  const MatrixXd L = rnd(n, n);
  qp.H = L * L.transpose() + 0.5 * MatrixXd::Identity(n, n);
  qp.g = rnd(n, 1);
  qp.Aeq = rnd(me, n);
  qp.beq = rnd(me, 1);
  MatrixXd A = rnd(mi, n);
  for (int i = 0; i < mi; ++i) {
    for (int j = 0; j < n; ++j) {
      if (std::abs(A(i, j)) < 0.6) A(i, j) = 0.0;  // sparse rows like the planner's
    }
  }
  qp.Ain = A.sparseView();
  qp.bin = rnd(mi, 1).cwiseAbs() + VectorXd::Constant(mi, 0.1) - 0.5 * rnd(mi, 1).cwiseAbs();
  return qp;
}

}  // namespace

TEST(QpSolver, UnconstrainedMinimum) {
  QpProblem qp;
  qp.H = MatrixXd::Identity(2, 2) * 2.0;
  qp.g = VectorXd::Constant(2, -2.0);
  qp.Aeq.resize(0, 2);
  qp.beq.resize(0);
  qp.Ain.resize(0, 2);
  qp.bin.resize(0);
  const QpResult r = solve_qp(qp);
  ASSERT_EQ(r.status, QpStatus::kSolved);
  EXPECT_LT((r.z - VectorXd::Ones(2)).norm(), 1e-12);
  EXPECT_NEAR(r.objective, -2.0, 1e-12);
}

TEST(QpSolver, BoxActive) {
  // min (z - 2)^2 subject to z <= 1
  QpProblem qp;
  qp.H = MatrixXd::Constant(1, 1, 2.0);
  qp.g = VectorXd::Constant(1, -4.0);
  qp.Aeq.resize(0, 1);
  qp.beq.resize(0);
  MatrixXd A(1, 1);
  A << 1.0;
  qp.Ain = A.sparseView();
  qp.bin = VectorXd::Constant(1, 1.0);
  const QpResult r = solve_qp(qp);
  ASSERT_EQ(r.status, QpStatus::kSolved);
  EXPECT_NEAR(r.z(0), 1.0, 1e-12);
  EXPECT_EQ(r.active_constraints, 1);
}

TEST(QpSolver, DetectsInfeasibleBoxes) {
  QpProblem qp;
  qp.H = MatrixXd::Identity(1, 1);
  qp.g = VectorXd::Zero(1);
  qp.Aeq.resize(0, 1);
  qp.beq.resize(0);
  MatrixXd A(2, 1);
  A << 1.0, -1.0;  // z <= -1 and z >= 1
  qp.Ain = A.sparseView();
  qp.bin = VectorXd::Constant(2, -1.0);
  EXPECT_EQ(solve_qp(qp).status, QpStatus::kInfeasible);
}

TEST(QpSolver, RejectsIndefiniteHessian) {
  QpProblem qp;
  qp.H = MatrixXd::Identity(2, 2);
  qp.H(1, 1) = -1.0;
  qp.g = VectorXd::Zero(2);
  qp.Aeq.resize(0, 2);
  qp.beq.resize(0);
  qp.Ain.resize(0, 2);
  qp.bin.resize(0);
  EXPECT_THROW(solve_qp(qp), Error);
}

TEST(QpSolver, MatchesActiveSetEnumeration) {
  std::mt19937_64 rng(31);
  int compared = 0, infeasible = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 3 + trial % 4, me = trial % 2, mi = 4 + trial % 5;
    const QpProblem qp = random_problem(rng, n, me, mi);
    const auto oracle = brute_force(qp);
    const QpResult r = solve_qp(qp);
    if (!oracle) {
      EXPECT_EQ(r.status, QpStatus::kInfeasible) << "trial " << trial;
      ++infeasible;
      continue;
    }
    ASSERT_EQ(r.status, QpStatus::kSolved) << "trial " << trial;
    EXPECT_LT((r.z - *oracle).norm(), 1e-7 * (1.0 + oracle->norm())) << "trial " << trial;
    ++compared;
  }
  EXPECT_GT(compared, 200);
}
