#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace mpgrasp {

/// Dense strictly convex QP
///   min 0.5 z^T H z + g^T z   s.t.  Aeq z = beq,  Ain z <= bin.
/// Inequality rows are kept sparse; the planner's rows touch one joint each.
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd Aeq;
  Eigen::VectorXd beq;
  Eigen::SparseMatrix<double, Eigen::RowMajor> Ain;
  Eigen::VectorXd bin;

  int num_variables() const { return static_cast<int>(g.size()); }
};

enum class QpStatus { kSolved, kInfeasible, kMaxIterations };

struct QpResult {
  QpStatus status = QpStatus::kInfeasible;
  Eigen::VectorXd z;
  double objective = 0.0;
  int iterations = 0;
  int active_constraints = 0;
};

struct QpOptions {
  double feasibility_tol = 1e-9;
  int max_iterations = 0;  // 0: 20 * (n + m) + 100
};

/// Goldfarb-Idnani dual active-set method. H must be positive definite;
/// kInvalidArgument is thrown otherwise.
QpResult solve_qp(const QpProblem& qp, const QpOptions& options = {});

}  // namespace mpgrasp
