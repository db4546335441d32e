#pragma once

#include "pushplan/planner.hpp"
#include "pushplan/qp.hpp"
#include "pushplan/simulator.hpp"

namespace pushplan {

// Tracking-layer parameters. The force and slide-rate ceilings here bound
// the controller, not the plan; they sit above the planning bounds so the
// tracker has authority to reject disturbances the plan never fought.
struct MpcConfig {
  int horizon = 30;
  double tau_mpc = 0.04;
  // No azimuth tracking term: the executed azimuth follows the planned
  // contact schedule directly (repositioning is free), so inside the horizon
  // only the band constraint and the slide-rate charge touch it.
  Eigen::Vector4d q{50.0, 50.0, 10.0, 0.0};
  Eigen::Vector4d qf{500.0, 500.0, 100.0, 0.0};
  // Input weights over the split input [fn, ft, slide+, slide-], charged on
  // the deviation from the reference input, not on magnitude: an absolute
  // charge at these scales would buy cheap cost by lagging the plan.
  Eigen::Vector4d r{0.1, 0.1, 0.01, 0.01};
  double kappa_d = 5.0;
  double comp_eps = 1e-4;
  int max_sqp_iters = 8;
  double f_bar = 0.5;
  double psi_dot_bar = 3.0;
};

// First-order disturbance observer. The one-step prediction residual is
// already proportional to the sampling period, so the estimate moves by
// kappa_d times the residual per step; angle residuals are wrapped and the
// contact-azimuth channel is pinned to zero (repositioning is commanded,
// never a disturbance).
inline Eigen::Vector4d observer_update(const Eigen::Vector4d& dhat, const SliderState& x_obs,
                                       const SliderState& x_pred, double kappa_d) {
  Eigen::Vector4d res;
  res[0] = x_obs.x - x_pred.x;
  res[1] = x_obs.y - x_pred.y;
  res[2] = wrap_angle(x_obs.theta - x_pred.theta);
  res[3] = 0.0;
  Eigen::Vector4d next = dhat + kappa_d * res;
  next[3] = 0.0;
  return next;
}

struct MpcSolution {
  PusherInput u0;
  std::vector<SliderState> predicted;  // horizon+1 states under the solution
  Eigen::VectorXd z;                   // split inputs, for warm starting
  bool diverged = false;
  int sqp_iters = 0;
  double max_comp = 0.0;
};

namespace detail {

inline PusherInput split_input(const Eigen::VectorXd& z, int k) {
  return {z[4 * k], z[4 * k + 1], z[4 * k + 2] - z[4 * k + 3]};
}

// One controller-rate step of the prediction model: the midpoint rule the
// plant integrates with, disturbance folded into both stage rates.
inline Eigen::Vector4d mpc_step(const SliderModel& m, const Eigen::Vector4d& v, size_t face,
                                const PusherInput& u, const Eigen::Vector4d& dhat,
                                double tau) {
  const Eigen::Vector4d k1 = rate_clamped(m, v, face, u) + dhat;
  const Eigen::Vector4d k2 = rate_clamped(m, v + 0.5 * tau * k1, face, u) + dhat;
  return v + tau * k2;
}

inline std::vector<SliderState> roll_mpc(const SliderModel& m, const SliderState& x0,
                                         size_t face, const Eigen::VectorXd& z,
                                         const Eigen::Vector4d& dhat, int n, double tau) {
  std::vector<SliderState> xs;
  xs.reserve(n + 1);
  xs.push_back(x0);
  Eigen::Vector4d v = x0.vec();
  for (int k = 0; k < n; ++k) {
    v = mpc_step(m, v, face, split_input(z, k), dhat, tau);
    xs.push_back(SliderState::from_vec(v));
  }
  return xs;
}

}  // namespace detail

// One receding-horizon solve: sequential quadratic programming on the
// condensed single-shooting problem over split inputs [fn, ft, slide+,
// slide-] per step. Sticking and sliding are reconciled by an exact linear
// penalty on the friction-cone complementarity products, ramped until the
// products drop below comp_eps. The pose reference is taken as given; the
// azimuth reference is clamped into the held face's admissible band. When a
// reference input u_ref is supplied the input cost charges deviation from
// it; otherwise it charges magnitude.
inline MpcSolution solve_mpc(const SliderModel& m, const MpcConfig& cfg,
                             const SliderState& x_now, size_t face,
                             const std::vector<SliderState>& ref,
                             const Eigen::Vector4d& dhat,
                             const Eigen::VectorXd& warm = {},
                             const Eigen::VectorXd& u_ref = {}) {
  const int n = cfg.horizon;
  const int nz = 4 * n;
  const double tau = cfg.tau_mpc;
  const double mu = m.mu_p;
  const double fc = m.shape.face_center_azimuth(face);
  const auto [band_lo, band_hi] = m.face_band(face);

  // Unwrap the pose-angle reference onto the current state's branch; clamp
  // the azimuth reference into the face band, in face-relative terms.
  std::vector<Eigen::Vector4d> err_ref(n + 1);
  const double theta_shift =
      2.0 * kPi * std::round((x_now.theta - ref[0].theta) / (2.0 * kPi));
  for (int k = 0; k <= n; ++k) {
    err_ref[k][0] = ref[k].x;
    err_ref[k][1] = ref[k].y;
    err_ref[k][2] = ref[k].theta + theta_shift;
    err_ref[k][3] = std::clamp(wrap_angle(ref[k].psi_c - fc), band_lo, band_hi);
  }

  Eigen::VectorXd z = warm.size() == nz ? warm : Eigen::VectorXd::Zero(nz);
  const Eigen::Matrix4d r_in = cfg.r.asDiagonal();

  MpcSolution out;
  double rho = 1e2;
  bool solved_once = false;

  for (int it = 0; it < cfg.max_sqp_iters; ++it) {
    out.sqp_iters = it + 1;
    const std::vector<SliderState> xs = detail::roll_mpc(m, x_now, face, z, dhat, n, tau);

    // Sensitivities of each rolled state w.r.t. the stacked inputs, built
    // forward by finite-differencing the full step map so the Jacobians
    // belong to the same integrator the prediction uses.
    std::vector<Eigen::MatrixXd> sens(n + 1, Eigen::MatrixXd::Zero(4, nz));
    const double h = 1e-6;
    for (int k = 0; k < n; ++k) {
      const PusherInput uk = detail::split_input(z, k);
      const Eigen::Vector4d vk = xs[k].vec();
      const Eigen::Vector4d v1 = detail::mpc_step(m, vk, face, uk, dhat, tau);
      Eigen::Matrix4d a;
      for (int j = 0; j < 4; ++j) {
        Eigen::Vector4d vp = vk;
        vp[j] += h;
        a.col(j) = (detail::mpc_step(m, vp, face, uk, dhat, tau) - v1) / h;
      }
      Eigen::Matrix<double, 4, 3> b3;
      for (int j = 0; j < 3; ++j) {
        PusherInput up = uk;
        (j == 0 ? up.fn : j == 1 ? up.ft : up.psi_dot) += h;
        b3.col(j) = (detail::mpc_step(m, vk, face, up, dhat, tau) - v1) / h;
      }
      Eigen::Matrix4d b_split;
      b_split.col(0) = b3.col(0);
      b_split.col(1) = b3.col(1);
      b_split.col(2) = b3.col(2);
      b_split.col(3) = -b3.col(2);
      sens[k + 1] = a * sens[k];
      sens[k + 1].middleCols(4 * k, 4) += b_split;
    }

    Eigen::MatrixXd p_qp = Eigen::MatrixXd::Zero(nz, nz);
    Eigen::VectorXd q_qp = Eigen::VectorXd::Zero(nz);
    for (int k = 1; k <= n; ++k) {
      const Eigen::Vector4d qk = (k == n) ? cfg.qf : cfg.q;
      Eigen::Vector4d err = xs[k].vec() - err_ref[k];
      err[3] = wrap_angle(xs[k].psi_c - fc) - err_ref[k][3];
      const Eigen::MatrixXd wq = qk.asDiagonal() * sens[k];
      p_qp.noalias() += 2.0 * sens[k].transpose() * wq;
      // The quadratic model is in absolute z; fold the linearization point
      // out of the linear term.
      const Eigen::Vector4d inner = err - sens[k] * z;
      q_qp.noalias() += 2.0 * sens[k].transpose() * (qk.cwiseProduct(inner));
    }
    for (int k = 0; k < n; ++k) {
      p_qp.block<4, 4>(4 * k, 4 * k) += 2.0 * r_in;
      if (u_ref.size() == nz)
        q_qp.segment<4>(4 * k) -= 2.0 * cfg.r.cwiseProduct(u_ref.segment<4>(4 * k));
    }

    // Complementarity penalty, partner frozen at the current iterate. A
    // positive slide rate needs the tangential force at the trailing cone
    // edge ft = -mu fn, a negative one at ft = +mu fn:
    // rho [ (mu fn + ft) s+ + (mu fn - ft) s- + s+ s- ].
    for (int k = 0; k < n; ++k) {
      const double fn = z[4 * k], ft = z[4 * k + 1];
      const double sp = z[4 * k + 2], sm = z[4 * k + 3];
      q_qp[4 * k] += rho * mu * (sp + sm);
      q_qp[4 * k + 1] += rho * (sp - sm);
      q_qp[4 * k + 2] += rho * (mu * fn + ft + sm);
      q_qp[4 * k + 3] += rho * (mu * fn - ft + sp);
    }

    // 8 input rows per step plus the 2 azimuth band rows per step.
    const int nrows = 10 * n;
    Eigen::MatrixXd g_qp = Eigen::MatrixXd::Zero(nrows, nz);
    Eigen::VectorXd h_qp = Eigen::VectorXd::Zero(nrows);
    for (int k = 0; k < n; ++k) {
      const int r0 = 10 * k, c0 = 4 * k;
      g_qp(r0 + 0, c0 + 0) = 1.0;
      h_qp[r0 + 0] = cfg.f_bar;
      g_qp(r0 + 1, c0 + 0) = -1.0;
      g_qp(r0 + 2, c0 + 1) = 1.0;
      g_qp(r0 + 2, c0 + 0) = -mu;
      g_qp(r0 + 3, c0 + 1) = -1.0;
      g_qp(r0 + 3, c0 + 0) = -mu;
      g_qp(r0 + 4, c0 + 2) = 1.0;
      h_qp[r0 + 4] = cfg.psi_dot_bar;
      g_qp(r0 + 5, c0 + 2) = -1.0;
      g_qp(r0 + 6, c0 + 3) = 1.0;
      h_qp[r0 + 6] = cfg.psi_dot_bar;
      g_qp(r0 + 7, c0 + 3) = -1.0;
      const double rel = wrap_angle(xs[k + 1].psi_c - fc);
      const Eigen::RowVectorXd srow = sens[k + 1].row(3);
      g_qp.row(r0 + 8) = srow;
      h_qp[r0 + 8] = band_hi - rel + srow.dot(z);
      g_qp.row(r0 + 9) = -srow;
      h_qp[r0 + 9] = rel - band_lo - srow.dot(z);
    }

    // The interior point checks absolute residuals; a ramped penalty can
    // push the gradient past what they can express, so the objective is
    // rescaled (the minimizer is unchanged).
    const double obj_scale = 1.0 / std::max(1.0, q_qp.lpNorm<Eigen::Infinity>());
    const IpmResult qp =
        solve_qp_ip(obj_scale * p_qp, obj_scale * q_qp, g_qp, h_qp, 100, 1e-9);
    if (!qp.converged) {
      out.diverged = true;
      break;
    }
    solved_once = true;
    const double move = (qp.x - z).cwiseAbs().maxCoeff();
    z = qp.x;

    double comp = 0.0;
    for (int k = 0; k < n; ++k) {
      const double c1 = mu * z[4 * k] + z[4 * k + 1];
      const double c2 = mu * z[4 * k] - z[4 * k + 1];
      comp = std::max({comp, c1 * z[4 * k + 2], c2 * z[4 * k + 3],
                       z[4 * k + 2] * z[4 * k + 3]});
    }
    out.max_comp = comp;
    if (comp > cfg.comp_eps) {
      rho = std::min(rho * 10.0, 1e7);
      continue;
    }
    if (move < 1e-6) break;
  }

  if (!solved_once) {
    out.diverged = true;
    z = warm.size() == nz ? warm : Eigen::VectorXd::Zero(nz);
  }
  out.z = z;
  out.u0 = detail::split_input(z, 0);
  out.predicted = detail::roll_mpc(m, x_now, face, z, dhat, n, tau);
  return out;
}

struct TrackRow {
  double t = 0.0;
  SliderState x;
  PusherInput u;
  Eigen::Vector3d dhat = Eigen::Vector3d::Zero();  // x, y, angular rate
  Eigen::Vector2d err = Eigen::Vector2d::Zero();
  std::string event;
};

struct TrackLog {
  std::vector<TrackRow> rows;
  double max_pos_err = 0.0;
  double integrated_err = 0.0;  // time integral of the position error norm
  bool faulted = false;
  std::string fault;
};

struct TrackOptions {
  bool observer = true;
  // Steps appended after the plan ends, holding the final reference.
  int settle_steps = 0;
  // Spacing of the plan's fine states.
  double fine_dt = 0.01;
};

// Closed-loop tracking of a planned path. The reference is the plan's fine
// states; the controller runs every fourth fine sample. Crossing into a
// segment on a different face teleports the pusher to the reference azimuth
// (repositioning is free, as in planning). Each solve is warm started from
// the plan's feedforward controls: the penalty scheme only refines the mode
// pattern it is handed, so the seed must already carry upcoming cone-side
// swaps. Faults stop the run with the log intact.
inline TrackLog track(World& world, const std::vector<PathSegment>& segments,
                      const MpcConfig& cfg, const TrackOptions& opts = {}) {
  TrackLog log;
  std::vector<SliderState> ref;
  std::vector<size_t> ref_face;
  std::vector<PusherInput> ref_u;  // ref_u[i] drives ref[i] to ref[i+1]
  for (const auto& seg : segments) {
    const size_t skip = ref.empty() ? 0 : 1;  // segment ends repeat as starts
    for (size_t i = skip; i < seg.states.size(); ++i) {
      ref.push_back(seg.states[i]);
      ref_face.push_back(seg.face);
    }
    ref_u.insert(ref_u.end(), seg.controls.begin(), seg.controls.end());
  }
  if (ref.empty()) return log;

  const int fine_per_mpc =
      std::max(1, static_cast<int>(std::round(cfg.tau_mpc / opts.fine_dt)));
  const int last = static_cast<int>(ref.size()) - 1;
  const int n_steps = (last + fine_per_mpc - 1) / fine_per_mpc + opts.settle_steps;

  Eigen::Vector4d dhat = Eigen::Vector4d::Zero();
  bool have_pred = false;
  SliderState x_pred;
  size_t cur_face = world.model.shape.face_of_azimuth(world.state.slider.psi_c);

  for (int step_idx = 0; step_idx <= n_steps; ++step_idx) {
    const int fi = std::min(step_idx * fine_per_mpc, last);
    TrackRow row;
    row.t = world.state.time;
    row.x = world.state.slider;

    if (world.state.faulted) {
      log.faulted = true;
      log.fault = world.state.fault;
      row.event = "fault";
      log.rows.push_back(row);
      break;
    }

    if (opts.observer && have_pred) {
      dhat = observer_update(dhat, world.state.slider, x_pred, cfg.kappa_d);
    }
    row.dhat = Eigen::Vector3d(dhat[0], dhat[1], dhat[2]);

    // The plan repositions the pusher between segments at no cost, so the
    // executed contact azimuth follows the planned schedule rather than the
    // integrated slide rate. Only a face change is worth an event; the
    // within-face corrections are part of normal pushing.
    if (ref_face[fi] != cur_face) {
      cur_face = ref_face[fi];
      world.state.slider.psi_c = ref[fi].psi_c;
      row.x = world.state.slider;
      row.event = "switch";
    } else if (world.state.slider.psi_c != ref[fi].psi_c) {
      world.state.slider.psi_c = ref[fi].psi_c;
      row.x = world.state.slider;
    }

    row.err[0] = world.state.slider.x - ref[fi].x;
    row.err[1] = world.state.slider.y - ref[fi].y;
    const double pos_err = row.err.norm();
    log.max_pos_err = std::max(log.max_pos_err, pos_err);
    log.integrated_err += pos_err * cfg.tau_mpc;

    if (step_idx == n_steps) {
      log.rows.push_back(row);
      break;
    }

    // The solve holds one face, so the usable lookahead ends where the
    // reference switches faces; past that the last same-face pose is held as
    // the terminal target and the feedforward goes quiet. The switch itself
    // re-anchors everything at the next controller step.
    std::vector<SliderState> window(cfg.horizon + 1);
    int jend = cfg.horizon + 1;
    for (int j = 0; j <= cfg.horizon; ++j) {
      const int ri = std::min(fi + j * fine_per_mpc, last);
      if (ref_face[ri] != cur_face) {
        jend = j;
        break;
      }
      window[j] = ref[ri];
    }
    for (int j = jend; j <= cfg.horizon; ++j) window[j] = window[jend - 1];

    Eigen::VectorXd z_ff = Eigen::VectorXd::Zero(4 * cfg.horizon);
    for (int j = 0; j < std::min(jend - 1, cfg.horizon); ++j) {
      const int ui = fi + j * fine_per_mpc;
      if (ui >= static_cast<int>(ref_u.size())) break;
      const PusherInput& uf = ref_u[static_cast<size_t>(ui)];
      z_ff[4 * j + 0] = uf.fn;
      z_ff[4 * j + 1] = uf.ft;
      z_ff[4 * j + 2] = std::max(uf.psi_dot, 0.0);
      z_ff[4 * j + 3] = std::max(-uf.psi_dot, 0.0);
    }

    const MpcSolution sol = solve_mpc(world.model, cfg, world.state.slider, cur_face,
                                      window, dhat, z_ff, z_ff);
    if (sol.diverged && row.event.empty()) row.event = "diverged";
    x_pred = sol.predicted.size() > 1 ? sol.predicted[1] : world.state.slider;
    have_pred = true;

    row.u = sol.u0;
    const StepRecord rec = step(world, sol.u0, cfg.tau_mpc);
    if (rec.in_contact && row.event.empty()) row.event = "contact";
    log.rows.push_back(row);
  }
  return log;
}

}  // namespace pushplan
