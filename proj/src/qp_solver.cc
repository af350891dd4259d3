#include "mpgrasp/qp_solver.h"

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Cholesky>

#include "mpgrasp/error.h"

namespace mpgrasp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = 1e-14;

// Working set of the dual method: J holds an orthogonal-like basis with
// J^T H J = I and R the triangular factor of the active normals in that basis.
class DualActiveSet {
 public:
  DualActiveSet(const Eigen::MatrixXd& J, int capacity)
      : n_(static_cast<int>(J.rows())),
        J_(J),
        R_(Eigen::MatrixXd::Zero(n_, n_)),
        d_(n_),
        z_(n_),
        r_(Eigen::VectorXd::Zero(capacity)),
        u_(Eigen::VectorXd::Zero(capacity + 1)),
        active_(capacity + 1, 0) {}

  int size() const { return iq_; }
  double& multiplier(int k) { return u_(k); }
  int& active(int k) { return active_[k]; }
  const Eigen::VectorXd& step() const { return z_; }
  const Eigen::VectorXd& dual_step() const { return r_; }

  // Computes the primal direction z and dual direction r for normal np.
  void directions(const Eigen::VectorXd& np) {
    d_.noalias() = J_.transpose() * np;
    z_.noalias() = J_.rightCols(n_ - iq_) * d_.tail(n_ - iq_);
    for (int i = iq_ - 1; i >= 0; --i) {
      double sum = 0.0;
      for (int j = i + 1; j < iq_; ++j) sum += R_(i, j) * r_(j);
      r_(i) = (d_(i) - sum) / R_(i, i);
    }
  }

  // Appends the constraint whose d = J^T np was computed last. Returns false
  // if it is linearly dependent on the active set.
  bool add() {
    for (int j = n_ - 1; j >= iq_ + 1; --j) {
      double cc = d_(j - 1), ss = d_(j);
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      d_(j) = 0.0;
      ss /= h;
      cc /= h;
      if (cc < 0.0) {
        cc = -cc;
        ss = -ss;
        d_(j - 1) = -h;
      } else {
        d_(j - 1) = h;
      }
      const double xny = ss / (1.0 + cc);
      for (int k = 0; k < n_; ++k) {
        const double t1 = J_(k, j - 1), t2 = J_(k, j);
        J_(k, j - 1) = t1 * cc + t2 * ss;
        J_(k, j) = xny * (t1 + J_(k, j - 1)) - t2;
      }
    }
    ++iq_;
    for (int i = 0; i < iq_; ++i) R_(i, iq_ - 1) = d_(i);
    if (std::abs(d_(iq_ - 1)) <= kEps * r_norm_) {
      return false;
    }
    r_norm_ = std::max(r_norm_, std::abs(d_(iq_ - 1)));
    return true;
  }

  // Removes the active entry holding constraint id `l` (first_ineq onwards).
  void remove(int l, int first_ineq) {
    int qq = -1;
    for (int i = first_ineq; i < iq_; ++i) {
      if (active_[i] == l) {
        qq = i;
        break;
      }
    }
    if (qq < 0) return;
    for (int i = qq; i < iq_ - 1; ++i) {
      active_[i] = active_[i + 1];
      u_(i) = u_(i + 1);
      R_.col(i) = R_.col(i + 1);
    }
    active_[iq_ - 1] = active_[iq_];
    u_(iq_ - 1) = u_(iq_);
    active_[iq_] = 0;
    u_(iq_) = 0.0;
    for (int j = 0; j < iq_; ++j) R_(j, iq_ - 1) = 0.0;
    --iq_;
    if (iq_ == 0) return;
    for (int j = qq; j < iq_; ++j) {
      double cc = R_(j, j), ss = R_(j + 1, j);
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      cc /= h;
      ss /= h;
      R_(j + 1, j) = 0.0;
      if (cc < 0.0) {
        R_(j, j) = -h;
        cc = -cc;
        ss = -ss;
      } else {
        R_(j, j) = h;
      }
      const double xny = ss / (1.0 + cc);
      for (int k = j + 1; k < iq_; ++k) {
        const double t1 = R_(j, k), t2 = R_(j + 1, k);
        R_(j, k) = t1 * cc + t2 * ss;
        R_(j + 1, k) = xny * (t1 + R_(j, k)) - t2;
      }
      for (int k = 0; k < n_; ++k) {
        const double t1 = J_(k, j), t2 = J_(k, j + 1);
        J_(k, j) = t1 * cc + t2 * ss;
        J_(k, j + 1) = xny * (J_(k, j) + t1) - t2;
      }
    }
  }

 private:
  int n_;
  Eigen::MatrixXd J_;
  Eigen::MatrixXd R_;
  Eigen::VectorXd d_, z_, r_, u_;
  std::vector<int> active_;
  int iq_ = 0;
  double r_norm_ = 1.0;
};

QpResult solve_without_variables(const QpProblem& qp, double tol) {
  QpResult res;
  res.z = Eigen::VectorXd(0);
  const bool eq_ok = qp.beq.size() == 0 || qp.beq.cwiseAbs().maxCoeff() <= tol;
  const bool in_ok = qp.bin.size() == 0 || qp.bin.minCoeff() >= -tol;
  res.status = eq_ok && in_ok ? QpStatus::kSolved : QpStatus::kInfeasible;
  return res;
}

}  // namespace

QpResult solve_qp(const QpProblem& qp, const QpOptions& options) {
  const int n = qp.num_variables();
  const int p = static_cast<int>(qp.beq.size());
  const int m = static_cast<int>(qp.bin.size());
  if (qp.H.rows() != n || qp.H.cols() != n || qp.Aeq.rows() != p ||
      (p > 0 && qp.Aeq.cols() != n) || qp.Ain.rows() != m ||
      (m > 0 && qp.Ain.cols() != n)) {
    throw Error(ErrorCode::kInvalidArgument, "QP dimensions are inconsistent");
  }
  if (n == 0) return solve_without_variables(qp, options.feasibility_tol);

  Eigen::LLT<Eigen::MatrixXd> llt(qp.H);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kInvalidArgument, "QP Hessian is not positive definite");
  }
  const Eigen::MatrixXd J0 =
      llt.matrixU().solve(Eigen::MatrixXd::Identity(n, n));

  // Inequalities as unit-normal rows: s_i(z) = b_i - a_i z >= 0.
  Eigen::SparseMatrix<double, Eigen::RowMajor> A = qp.Ain;
  Eigen::VectorXd b = qp.bin;
  for (int i = 0; i < m; ++i) {
    const double norm = A.row(i).norm();
    if (norm > 0.0) {
      A.row(i) /= norm;
      b(i) /= norm;
    }
  }
  const auto normal = [&](int i) -> Eigen::VectorXd {
    return -Eigen::VectorXd(A.row(i).transpose());
  };

  DualActiveSet ws(J0, m + p);
  Eigen::VectorXd x = -llt.solve(qp.g);
  const int max_iter =
      options.max_iterations > 0 ? options.max_iterations : 20 * (n + m) + 100;
  int iterations = 0;

  // Equalities are added as always-active constraints.
  for (int i = 0; i < p; ++i) {
    const Eigen::VectorXd np = qp.Aeq.row(i).transpose();
    const double norm = np.norm();
    if (norm == 0.0) {
      if (std::abs(qp.beq(i)) > options.feasibility_tol) {
        return {QpStatus::kInfeasible, x, 0.0, 0, 0};
      }
      continue;
    }
    const double residual = np.dot(x) - qp.beq(i);
    ws.directions(np);
    const Eigen::VectorXd& z = ws.step();
    const double zz = z.dot(z);
    const double t2 = zz > kEps ? -residual / z.dot(np) : 0.0;
    x += t2 * z;
    const int iq = ws.size();
    ws.multiplier(iq) = t2;
    for (int k = 0; k < iq; ++k) ws.multiplier(k) -= t2 * ws.dual_step()(k);
    ws.active(iq) = -i - 1;
    if (!ws.add()) {
      // Dependent row: acceptable only if it is already satisfied.
      ws.remove(-i - 1, 0);
      if (std::abs(np.dot(x) - qp.beq(i)) > options.feasibility_tol * (1.0 + norm)) {
        return {QpStatus::kInfeasible, x, 0.0, 0, 0};
      }
    }
  }
  const int first_ineq = ws.size();

  std::vector<char> inactive(m, 1), excluded(m, 0);
  Eigen::VectorXd s(m);

  const auto objective = [&](const Eigen::VectorXd& z) {
    return 0.5 * z.dot(qp.H * z) + qp.g.dot(z);
  };
  const auto finish = [&](QpStatus status) {
    return QpResult{status, x, objective(x), iterations, ws.size() - first_ineq};
  };

  while (true) {
    if (++iterations > max_iter) return finish(QpStatus::kMaxIterations);
    s.noalias() = b - A * x;
    std::fill(excluded.begin(), excluded.end(), 0);

  choose:
    int ip = -1;
    double worst = -options.feasibility_tol;
    for (int i = 0; i < m; ++i) {
      if (inactive[i] && !excluded[i] && s(i) < worst) {
        worst = s(i);
        ip = i;
      }
    }
    if (ip < 0) return finish(QpStatus::kSolved);

    const Eigen::VectorXd np = normal(ip);
    ws.multiplier(ws.size()) = 0.0;
    ws.active(ws.size()) = ip;

    while (true) {
      if (++iterations > max_iter) return finish(QpStatus::kMaxIterations);
      ws.directions(np);
      const Eigen::VectorXd& z = ws.step();
      const Eigen::VectorXd& r = ws.dual_step();
      const int iq = ws.size();

      // Largest dual step keeping inequality multipliers nonnegative.
      double t1 = kInf;
      int drop = -1;
      for (int k = first_ineq; k < iq; ++k) {
        if (r(k) > 0.0) {
          const double ratio = ws.multiplier(k) / r(k);
          if (ratio < t1) {
            t1 = ratio;
            drop = ws.active(k);
          }
        }
      }
      const double zz = z.dot(z);
      const double t2 = zz > kEps ? -s(ip) / z.dot(np) : kInf;
      const double t = std::min(t1, t2);
      if (t >= kInf) return finish(QpStatus::kInfeasible);

      if (t2 >= kInf) {
        for (int k = 0; k < iq; ++k) ws.multiplier(k) -= t * r(k);
        ws.multiplier(iq) += t;
        inactive[drop] = 1;
        ws.remove(drop, first_ineq);
        continue;
      }

      x += t * z;
      for (int k = 0; k < iq; ++k) ws.multiplier(k) -= t * r(k);
      ws.multiplier(iq) += t;

      if (std::abs(t - t2) <= kEps * std::max(1.0, std::abs(t2))) {
        if (!ws.add()) {
          // Numerically dependent on the active set; it is satisfied now, so
          // leave it out and look for the next violation.
          ws.remove(ip, first_ineq);
          excluded[ip] = 1;
          s.noalias() = b - A * x;
          goto choose;
        }
        inactive[ip] = 0;
        break;
      }

      inactive[drop] = 1;
      ws.remove(drop, first_ineq);
      s(ip) = b(ip) - A.row(ip).dot(x);
    }
  }
}

}  // namespace mpgrasp
