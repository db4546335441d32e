#pragma once

#include <vector>

#include "pushplan/dynamics.hpp"
#include "pushplan/qp.hpp"
#include "pushplan/reachset.hpp"

namespace pushplan {

inline constexpr double kConnectTolerance = 5e-3;  // weighted units

// Raised when a Riccati step loses positive definiteness. With a positive
// definite input cost this only happens on non-finite input matrices.
struct SingularRiccati : std::runtime_error {
  SingularRiccati() : std::runtime_error("singular or non-finite riccati step") {}
};

// Finite-horizon LQR on the locally linearized pusher dynamics. The discrete
// system is x[k+1] = x[k] + (tau_lqr B) u[k]; only the input matrix varies
// with the linearization point.
struct LqrConfig {
  // Squared distance weights: the quadratic state cost then measures exactly
  // the metric connections are judged by, so a constrained step that lowers
  // the cost lowers the distance.
  Eigen::Vector4d c_q{1.0, 1.0, 0.01, 1e-4};
  // Small absolute input cost: connections must saturate the force bound to
  // cover a full planning period, so the input term only regularizes.
  Eigen::Vector3d c_r{2.25e-6, 2.25e-6, 2.25e-7};
  double terminal_scale = 100.0;
  int horizon = 5;
};

// Backward Riccati recursion with A = I. gains[k] gives the unconstrained
// input u = -K (x - target); s_metric[k] = C_R + B_d' P[k+1] B_d is the
// curvature of the per-step cost in the input, used to project constrained
// inputs in the metric the cost actually has.
struct LqrSchedule {
  std::vector<Eigen::Matrix<double, 3, 4>> gains;
  std::vector<Eigen::Matrix3d> s_metric;
};

inline LqrSchedule lqr_schedule(const Eigen::Matrix<double, 4, 3>& b, const LqrConfig& cfg,
                                double tau_lqr) {
  const Eigen::Matrix<double, 4, 3> bd = tau_lqr * b;
  const Eigen::Matrix4d q = cfg.c_q.asDiagonal();
  const Eigen::Matrix3d r = cfg.c_r.asDiagonal();
  Eigen::Matrix4d p = cfg.terminal_scale * q;
  LqrSchedule out;
  out.gains.resize(cfg.horizon);
  out.s_metric.resize(cfg.horizon);
  for (int k = cfg.horizon - 1; k >= 0; --k) {
    const Eigen::Matrix3d s = r + bd.transpose() * p * bd;
    if (!s.allFinite()) throw SingularRiccati{};
    const Eigen::Matrix<double, 3, 4> kk = s.ldlt().solve(bd.transpose() * p);
    if (!kk.allFinite()) throw SingularRiccati{};
    const Eigen::Matrix4d acl = Eigen::Matrix4d::Identity() - bd * kk;
    p = q + kk.transpose() * r * kk + acl.transpose() * p * acl;
    out.gains[k] = kk;
    out.s_metric[k] = s;
  }
  return out;
}

inline std::vector<Eigen::Matrix<double, 3, 4>> lqr_gains(
    const Eigen::Matrix<double, 4, 3>& b, const LqrConfig& cfg, double tau_lqr) {
  return lqr_schedule(b, cfg, tau_lqr).gains;
}

struct ConnectionResult {
  SliderState x_term;
  std::vector<SliderState> states;    // horizon+1 states, fine timestep
  std::vector<PusherInput> controls;  // horizon inputs
  bool reached = false;
  double distance = 0.0;  // weighted distance of x_term to the target
};

inline Eigen::Vector4d wrapped_error(const SliderState& x, const SliderState& target) {
  return {x.x - target.x, x.y - target.y, wrap_angle(x.theta - target.theta),
          wrap_angle(x.psi_c - target.psi_c)};
}

// Drives from `start` toward `target` with the gain schedule, clamping each
// input into the commanded mode polytope by projection in the cost metric
// (Euclidean projection of a pulling input lands on the cone apex and
// freezes the state; the cost metric keeps the productive components), and
// rolls the nonlinear dynamics one fine step per gain. FaceExit propagates.
inline ConnectionResult connect(const SliderModel& m, const SliderState& start,
                                ContactMode mode, const SliderState& target,
                                const LqrConfig& cfg, double tau_lqr,
                                const DistanceWeights& w = {}) {
  const LqrSchedule sched = lqr_schedule(linearize(m, start), cfg, tau_lqr);
  const InputPolytope poly = mode_polytope(m, mode);
  ConnectionResult out;
  out.states.reserve(sched.gains.size() + 1);
  out.states.push_back(start);
  SliderState x = start;
  for (size_t k = 0; k < sched.gains.size(); ++k) {
    const Eigen::Vector3d u_raw = -(sched.gains[k] * wrapped_error(x, target));
    const Eigen::Matrix3d& s = sched.s_metric[k];
    const QpResult proj = solve_qp_active_set(
        2.0 * s, Eigen::Vector3d(-2.0 * (s * u_raw)),
        Eigen::Matrix<double, Eigen::Dynamic, 3>(poly.d), Eigen::VectorXd(poly.h));
    const Eigen::Vector3d uv = proj.found ? proj.x : Eigen::Vector3d::Zero();
    const PusherInput u = PusherInput::checked(m, uv[0], uv[1], uv[2]);
    x = rk4_step(m, x, u, tau_lqr);
    out.controls.push_back(u);
    out.states.push_back(x);
  }
  out.x_term = x;
  out.distance = w(x, target);
  out.reached = out.distance <= kConnectTolerance;
  return out;
}

struct GoalRegion {
  Pose2 center;
  double tol_x = 0.03;
  double tol_y = 0.03;
  double tol_theta = kPi;

  bool contains(const SliderState& x) const {
    return std::abs(x.x - center.x) <= tol_x && std::abs(x.y - center.y) <= tol_y &&
           std::abs(wrap_angle(x.theta - center.theta)) <= tol_theta;
  }
};

// One-period connection attempt into the goal region through the most
// promising cell of the state's reachable set. States already inside the
// region return immediately with no controls.
inline ConnectionResult connect_goal(const ReachableSet& rs, const GoalRegion& goal,
                                     const LqrConfig& cfg, double tau_lqr,
                                     const DistanceWeights& w = {}) {
  const SliderState& x = rs.origin;
  if (goal.contains(x)) {
    ConnectionResult out;
    out.x_term = x;
    out.states = {x};
    out.reached = true;
    return out;
  }
  SliderState target{goal.center.x, goal.center.y, goal.center.theta, x.psi_c};
  const TerminalSet* best_cell = nullptr;
  CellProjection best;
  for (const auto& cell : rs.cells) {
    const CellProjection p = project_onto_cell(rs, cell, target, w);
    if (p.distance < best.distance) {
      best = p;
      best_cell = &cell;
    }
  }
  ConnectionResult out;
  if (!best_cell) {
    out.x_term = x;
    out.states = {x};
    out.distance = w(x, target);
    return out;
  }
  SliderState start = x;
  start.psi_c = best.psi;
  target.psi_c = best.psi;
  out = connect(*rs.model, start, best_cell->mode, target, cfg, tau_lqr, w);
  out.reached = goal.contains(out.x_term);
  return out;
}

}  // namespace pushplan
