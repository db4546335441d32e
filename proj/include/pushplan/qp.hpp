#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

namespace pushplan {

template <int N>
struct SmallQpResult {
  bool found = false;
  Eigen::Matrix<double, N, 1> x = Eigen::Matrix<double, N, 1>::Zero();
  double value = 0.0;  // 0.5 x'Hx + c'x at the solution
};

using QpResult = SmallQpResult<3>;

// Exact solver for min 0.5 u'Hu + c'u s.t. D u <= h with N <= 3 variables
// and a handful of rows: enumerate every active subset of size <= N, solve
// the KKT system, keep the best primal- and dual-feasible candidate. Paired
// equality rows make some subsets singular; those are skipped because a
// one-sided subset covers the same solution.
//
// early_exit_value: stop as soon as a feasible candidate with value <= this
// is found (subsets are visited smallest first, so interior solutions exit
// immediately). Use std::nullopt for a full minimization.
template <int N>
inline SmallQpResult<N> solve_qp_small(
    const Eigen::Matrix<double, N, N>& h_mat, const Eigen::Matrix<double, N, 1>& c,
    const Eigen::Matrix<double, Eigen::Dynamic, N>& d, const Eigen::VectorXd& h,
    std::optional<double> early_exit_value = std::nullopt) {
  const int m = static_cast<int>(d.rows());
  SmallQpResult<N> best;
  best.value = 1e300;

  int act[N > 0 ? N : 1];
  auto try_subset = [&](int k) -> bool {
    Eigen::Matrix<double, 2 * N, 2 * N> kkt = Eigen::Matrix<double, 2 * N, 2 * N>::Zero();
    Eigen::Matrix<double, 2 * N, 1> rhs = Eigen::Matrix<double, 2 * N, 1>::Zero();
    kkt.template topLeftCorner<N, N>() = h_mat;
    rhs.template head<N>() = -c;
    for (int i = 0; i < k; ++i) {
      kkt.block(N + i, 0, 1, N) = d.row(act[i]);
      kkt.block(0, N + i, N, 1) = d.row(act[i]).transpose();
      rhs[N + i] = h[act[i]];
    }
    const int n = N + k;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt.topLeftCorner(n, n));
    if (lu.rank() < n) return false;
    const Eigen::VectorXd sol = lu.solve(rhs.head(n));
    const Eigen::Matrix<double, N, 1> u = sol.template head<N>();
    for (int i = 0; i < k; ++i) {
      if (sol[N + i] < -1e-9) return false;  // dual feasibility
    }
    if (((d * u - h).array() > 1e-9).any()) return false;  // primal feasibility
    const double val = 0.5 * u.dot(h_mat * u) + c.dot(u);
    if (val < best.value) {
      best.found = true;
      best.value = val;
      best.x = u;
    }
    return early_exit_value && best.found && best.value <= *early_exit_value;
  };

  if (try_subset(0)) return best;
  for (int i = 0; i < m; ++i) {
    act[0] = i;
    if (try_subset(1)) return best;
  }
  if constexpr (N >= 2) {
    for (int i = 0; i < m; ++i) {
      for (int j = i + 1; j < m; ++j) {
        act[0] = i;
        act[1] = j;
        if (try_subset(2)) return best;
      }
    }
  }
  if constexpr (N >= 3) {
    for (int i = 0; i < m; ++i) {
      for (int j = i + 1; j < m; ++j) {
        for (int l = j + 1; l < m; ++l) {
          act[0] = i;
          act[1] = j;
          act[2] = l;
          if (try_subset(3)) return best;
        }
      }
    }
  }
  return best;
}

inline QpResult solve_qp_active_set(const Eigen::Matrix3d& h_mat, const Eigen::Vector3d& c,
                                    const Eigen::Matrix<double, Eigen::Dynamic, 3>& d,
                                    const Eigen::VectorXd& h,
                                    std::optional<double> early_exit_value = std::nullopt) {
  return solve_qp_small<3>(h_mat, c, d, h, early_exit_value);
}

// Euclidean projection onto {u : D u <= h}.
inline QpResult project_onto_polytope(const Eigen::Vector3d& u0,
                                      const Eigen::Matrix<double, Eigen::Dynamic, 3>& d,
                                      const Eigen::VectorXd& h) {
  return solve_qp_active_set(Eigen::Matrix3d::Identity(), -u0, d, h);
}

struct IpmResult {
  bool converged = false;
  Eigen::VectorXd x;
  int iterations = 0;
};

// Dense infeasible-start primal-dual interior point for
//   min 0.5 x'Px + q'x  s.t.  G x <= h,
// with P positive semidefinite (a small ridge keeps the Newton system
// factorizable). Predictor-corrector centering with separate primal and
// dual step lengths; sized for a few hundred variables and rows.
inline IpmResult solve_qp_ip(const Eigen::MatrixXd& p_mat, const Eigen::VectorXd& q,
                             const Eigen::MatrixXd& g_mat, const Eigen::VectorXd& h,
                             int max_iters = 100, double tol = 1e-11) {
  const int n = static_cast<int>(q.size());
  const int m = static_cast<int>(h.size());
  IpmResult out;
  out.x = Eigen::VectorXd::Zero(n);
  if (m == 0) {
    Eigen::LLT<Eigen::MatrixXd> llt(p_mat + 1e-12 * Eigen::MatrixXd::Identity(n, n));
    out.x = llt.solve(-q);
    out.converged = llt.info() == Eigen::Success;
    return out;
  }

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd s = (h - g_mat * x).cwiseMax(1.0);
  Eigen::VectorXd z = Eigen::VectorXd::Ones(m);

  // Longest step keeping v + a*dv > 0, scaled back from the boundary.
  const auto step_len = [m](const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
    double a = 1.0;
    for (int i = 0; i < m; ++i) {
      if (dv[i] < 0.0) a = std::min(a, -v[i] / dv[i]);
    }
    return a;
  };

  const Eigen::MatrixXd ridge = 1e-11 * Eigen::MatrixXd::Identity(n, n);
  for (int it = 0; it < max_iters; ++it) {
    const Eigen::VectorXd r_dual = p_mat * x + q + g_mat.transpose() * z;
    const Eigen::VectorXd r_prim = g_mat * x + s - h;
    const double mu = s.dot(z) / m;
    if (r_dual.lpNorm<Eigen::Infinity>() < tol && r_prim.lpNorm<Eigen::Infinity>() < tol &&
        mu < tol) {
      out.converged = true;
      break;
    }

    const Eigen::VectorXd w = z.array() / s.array();
    Eigen::MatrixXd lhs = p_mat + ridge;
    lhs.noalias() += g_mat.transpose() * w.asDiagonal() * g_mat;
    Eigen::LLT<Eigen::MatrixXd> llt(lhs);
    if (llt.info() != Eigen::Success) break;

    const auto solve_dir = [&](const Eigen::VectorXd& r_cent, Eigen::VectorXd& dx,
                               Eigen::VectorXd& ds, Eigen::VectorXd& dz) {
      const Eigen::VectorXd tmp =
          (r_cent.array() / s.array()).matrix() - w.asDiagonal() * r_prim;
      dx = llt.solve(-r_dual + g_mat.transpose() * tmp);
      ds = -r_prim - g_mat * dx;
      dz = (-(r_cent.array() + z.array() * ds.array()) / s.array()).matrix();
    };

    // Affine scout fixes the centering weight, corrector re-solves with the
    // second-order complementarity term folded in.
    Eigen::VectorXd dx, ds, dz;
    solve_dir((s.array() * z.array()).matrix(), dx, ds, dz);
    const double ap_aff = step_len(s, ds);
    const double ad_aff = step_len(z, dz);
    const double mu_aff = (s + ap_aff * ds).dot(z + ad_aff * dz) / m;
    const double ratio = mu_aff / std::max(mu, 1e-300);
    const double sigma = std::min(1.0, ratio * ratio * ratio);
    solve_dir((s.array() * z.array() + ds.array() * dz.array() - sigma * mu).matrix(), dx,
              ds, dz);

    const double ap = std::min(1.0, 0.995 * step_len(s, ds));
    const double ad = std::min(1.0, 0.995 * step_len(z, dz));
    x += ap * dx;
    s += ap * ds;
    z += ad * dz;
    out.iterations = it + 1;
  }
  out.x = x;
  if (!out.converged) {
    // Accept near-converged iterates; the caller checks this flag.
    const double mu = s.dot(z) / m;
    const double rp = (g_mat * x + s - h).lpNorm<Eigen::Infinity>();
    out.converged = mu < 1e-7 && rp < 1e-7;
  }
  return out;
}

}  // namespace pushplan
