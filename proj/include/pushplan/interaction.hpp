#pragma once

#include <deque>
#include <string>
#include <vector>

#include "pushplan/dynamics.hpp"

namespace pushplan {

// Contact frame at a pusher-obstacle interface: alpha points from the
// pushing body into the obstacle, beta completes a right-handed pair.
struct ContactFrame {
  Eigen::Vector2d alpha{1.0, 0.0};
  Eigen::Vector2d beta{0.0, 1.0};
  Eigen::Vector2d point{0.0, 0.0};  // world frame
};

inline ContactFrame make_contact_frame(const ContactQuery& q) {
  return {q.normal, perp(q.normal), q.point};
}

// Friction-cone generator matrix [alpha, beta, -beta] for the force
// decomposition f = [f_alpha, f_beta+, f_beta-].
inline Eigen::Matrix<double, 2, 3> cone_matrix(const ContactFrame& fr) {
  Eigen::Matrix<double, 2, 3> m;
  m.col(0) = fr.alpha;
  m.col(1) = fr.beta;
  m.col(2) = -fr.beta;
  return m;
}

inline Eigen::Vector2d contact_force_world(const ContactFrame& fr, const Eigen::Vector3d& f) {
  return cone_matrix(fr) * f;
}

struct ObstacleModel {
  ConvexPolygon shape = ConvexPolygon::box(0.07, 0.122);
  Eigen::Matrix3d limit = limit_surface_matrix(0.85, 0.035);  // body frame
  double mu = 0.3;  // friction against the pushing body
};

// World-frame point Jacobian: body twist [vx, vy, omega] to the velocity of
// a material point at world position `point` for a body at `origin`.
inline Eigen::Matrix<double, 2, 3> point_jacobian(const Eigen::Vector2d& point,
                                                  const Eigen::Vector2d& origin) {
  const Eigen::Vector2d r = point - origin;
  Eigen::Matrix<double, 2, 3> j;
  j << 1.0, 0.0, -r.y(), 0.0, 1.0, r.x();
  return j;
}

struct NotInContact : std::runtime_error {
  NotInContact() : std::runtime_error("bodies are not in contact") {}
};

// Pusher-side and obstacle-side point Jacobians at a verified contact.
inline std::pair<Eigen::Matrix<double, 2, 3>, Eigen::Matrix<double, 2, 3>> contact_jacobians(
    const ContactQuery& q, const Eigen::Vector2d& pusher_origin,
    const Eigen::Vector2d& obstacle_origin) {
  if (!q.in_contact) throw NotInContact{};
  return {point_jacobian(q.point, pusher_origin), point_jacobian(q.point, obstacle_origin)};
}

// Limit-surface matrix re-expressed in the world frame at heading theta.
inline Eigen::Matrix3d limit_matrix_in_world(const Eigen::Matrix3d& limit_body, double theta) {
  const Eigen::Matrix3d r = rotation3(theta);
  return r * limit_body * r.transpose();
}

struct LcpProblem {
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
  Eigen::Vector4d q = Eigen::Vector4d::Zero();
};

// Standard-form complementarity problem for one frictional contact driven by
// the pusher twist v_pusher. j_pusher/j_obstacle map the respective body
// twists to contact-point velocity; limit_world is the obstacle's world-frame
// limit matrix.
inline LcpProblem assemble_lcp(const Eigen::Matrix<double, 2, 3>& j_pusher,
                               const Eigen::Matrix<double, 2, 3>& j_obstacle,
                               const Eigen::Matrix3d& limit_world, double mu,
                               const ContactFrame& frame, const Eigen::Vector3d& v_pusher) {
  const Eigen::Matrix<double, 2, 3> cone = cone_matrix(frame);
  const Eigen::Matrix2d k = j_obstacle * limit_world * j_obstacle.transpose();
  LcpProblem p;
  p.m.topLeftCorner<3, 3>() = cone.transpose() * k * cone;
  p.m(1, 3) = 1.0;
  p.m(2, 3) = 1.0;
  p.m(3, 0) = mu;
  p.m(3, 1) = -1.0;
  p.m(3, 2) = -1.0;
  p.q.head<3>() = -cone.transpose() * (j_pusher * v_pusher);
  return p;
}

struct LcpSolution {
  Eigen::Vector3d f = Eigen::Vector3d::Zero();
  double lambda = 0.0;
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
};

namespace detail {

inline double fb_phi(double a, double b) { return std::sqrt(a * a + b * b) - a - b; }

inline Eigen::Vector4d fb_residual(const LcpProblem& p, const Eigen::Vector4d& w) {
  const Eigen::Vector4d z = p.m * w + p.q;
  Eigen::Vector4d phi;
  for (int i = 0; i < 4; ++i) phi[i] = fb_phi(w[i], z[i]);
  return phi;
}

// The solution set has two redundant directions: opposed tangential
// components cancel in the world force when the slip rate is zero, and the
// slip slack is indeterminate above its minimal feasible value whenever the
// cone row is slack (every separated contact, for one). Collapse both so
// independent solve routes report the same representative.
inline Eigen::Vector4d canonical_solution(const LcpProblem& p, Eigen::Vector4d w) {
  w = w.cwiseMax(0.0);
  // The tangential columns are exact negations, so this shift preserves every
  // row of z except the cone row, whose slack it can only increase.
  const double c = std::min(w[1], w[2]);
  w[1] -= c;
  w[2] -= c;
  // Snap leftover solver noise to exact zero; the caller's residual check
  // rejects the canonical form if a snapped component was load-bearing.
  const double snap = 1e-6 * std::max(1.0, w.lpNorm<Eigen::Infinity>());
  for (int i = 0; i < 4; ++i) {
    if (w[i] < snap) w[i] = 0.0;
  }
  w[3] = 0.0;
  const Eigen::Vector4d z0 = p.m * w + p.q;
  w[3] = std::max({0.0, -z0[1], -z0[2]});
  return w;
}

}  // namespace detail

// Semismooth Newton on the Fischer-Burmeister reformulation with Armijo
// backtracking. Iterates two orders past tol: the solution error scales with
// the residual over the local gradient, so stopping right at the acceptance
// threshold leaves force errors an order larger than it.
inline LcpSolution solve_lcp_newton(const LcpProblem& p, int max_iters = 100,
                                    double tol = 1e-8) {
  Eigen::Vector4d w = (-p.q).cwiseMax(0.0).array() + 1e-2;
  LcpSolution out;
  Eigen::Vector4d phi = detail::fb_residual(p, w);
  for (int it = 0; it < max_iters; ++it) {
    out.iterations = it;
    out.residual = phi.lpNorm<Eigen::Infinity>();
    if (out.residual <= 0.01 * tol) {
      out.converged = true;
      break;
    }
    const Eigen::Vector4d z = p.m * w + p.q;
    Eigen::Matrix4d jac;
    for (int i = 0; i < 4; ++i) {
      const double r = std::hypot(w[i], z[i]);
      double da, db;
      if (r < 1e-14) {
        da = db = 1.0 / std::sqrt(2.0) - 1.0;
      } else {
        da = w[i] / r - 1.0;
        db = z[i] / r - 1.0;
      }
      jac.row(i) = db * p.m.row(i);
      jac(i, i) += da;
    }
    Eigen::FullPivLU<Eigen::Matrix4d> lu(jac);
    if (!lu.isInvertible()) break;
    const Eigen::Vector4d step = lu.solve(-phi);
    const double merit0 = 0.5 * phi.squaredNorm();
    double t = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 20; ++bt) {
      const Eigen::Vector4d w_try = w + t * step;
      const Eigen::Vector4d phi_try = detail::fb_residual(p, w_try);
      if (0.5 * phi_try.squaredNorm() <= (1.0 - 1e-4 * t) * merit0) {
        w = w_try;
        phi = phi_try;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
  }
  double res = detail::fb_residual(p, w).lpNorm<Eigen::Infinity>();
  const Eigen::Vector4d w_can = detail::canonical_solution(p, w);
  const double res_can = detail::fb_residual(p, w_can).lpNorm<Eigen::Infinity>();
  if (res_can <= std::max(res, tol)) {
    w = w_can;
    res = res_can;
  }
  out.f = w.head<3>();
  out.lambda = w[3];
  out.residual = res;
  out.converged = res <= tol;
  return out;
}

// Exhaustive support enumeration over the 16 active sets; exact for this
// fixed 4x4 structure and the fallback route when Newton stalls.
inline LcpSolution solve_lcp_enumerate(const LcpProblem& p, double tol = 1e-8) {
  LcpSolution best;
  best.residual = 1e300;
  for (int mask = 0; mask < 16; ++mask) {
    std::vector<int> idx;
    for (int i = 0; i < 4; ++i) {
      if (mask & (1 << i)) idx.push_back(i);
    }
    const int k = static_cast<int>(idx.size());
    Eigen::Vector4d w = Eigen::Vector4d::Zero();
    if (k > 0) {
      Eigen::MatrixXd msub(k, k);
      Eigen::VectorXd qsub(k);
      for (int r = 0; r < k; ++r) {
        qsub[r] = p.q[idx[r]];
        for (int c = 0; c < k; ++c) msub(r, c) = p.m(idx[r], idx[c]);
      }
      Eigen::VectorXd ws;
      Eigen::FullPivLU<Eigen::MatrixXd> lu(msub);
      if (lu.rank() == k) {
        ws = lu.solve(-qsub);
      } else {
        ws = msub.completeOrthogonalDecomposition().solve(-qsub);
        if ((msub * ws + qsub).lpNorm<Eigen::Infinity>() > 1e-9) continue;
      }
      for (int r = 0; r < k; ++r) w[idx[r]] = ws[r];
    }
    if ((w.array() < -1e-9).any()) continue;
    const Eigen::Vector4d z = p.m * w + p.q;
    if ((z.array() < -1e-9).any()) continue;
    const double res = detail::fb_residual(p, w.cwiseMax(0.0)).lpNorm<Eigen::Infinity>();
    if (res < best.residual) {
      best.residual = res;
      best.f = w.cwiseMax(0.0).head<3>();
      best.lambda = std::max(w[3], 0.0);
      best.converged = res <= tol;
      best.iterations = mask;
    }
  }
  if (best.residual < 1e300) {
    const Eigen::Vector4d w_can = detail::canonical_solution(
        p, Eigen::Vector4d(best.f[0], best.f[1], best.f[2], best.lambda));
    const double res_can = detail::fb_residual(p, w_can).lpNorm<Eigen::Infinity>();
    if (res_can <= std::max(best.residual, tol)) {
      best.f = w_can.head<3>();
      best.lambda = w_can[3];
      best.residual = res_can;
      best.converged = res_can <= tol;
    }
  }
  return best;
}

inline LcpSolution solve_lcp(const LcpProblem& p) {
  LcpSolution s = solve_lcp_newton(p);
  if (s.converged) return s;
  s = solve_lcp_enumerate(p);
  if (!s.converged) throw LcpUnsolvable{};
  return s;
}

// Advances the obstacle pose one step under the contact force: the force is
// pulled back to the body frame, mapped through the body-frame limit surface,
// and the resulting body twist is rotated back to the world.
inline Pose2 integrate_obstacle(const Pose2& pose, const Eigen::Matrix3d& limit_body,
                                const ContactFrame& frame, const Eigen::Vector3d& f,
                                double tau) {
  const Eigen::Vector2d f_world = contact_force_world(frame, f);
  const Eigen::Vector2d r = frame.point - pose.translation();
  const Eigen::Matrix2d rot = rotation2(pose.theta);
  Eigen::Vector3d wrench_body;
  wrench_body.head<2>() = rot.transpose() * f_world;
  wrench_body[2] = cross2(r, f_world);  // moment is frame-invariant
  const Eigen::Vector3d twist_body = limit_body * wrench_body;
  Pose2 next = pose;
  next.x += tau * (rot.row(0).dot(twist_body.head<2>()));
  next.y += tau * (rot.row(1).dot(twist_body.head<2>()));
  next.theta = wrap_angle(next.theta + tau * twist_body[2]);
  return next;
}

struct InteractionResult {
  bool feasible = true;
  std::string fault;
  std::vector<Pose2> movable_poses;
  // Per trajectory step: net reaction wrench on the slider (world frame) and
  // whether any slider-obstacle contact was active.
  std::vector<Eigen::Vector3d> reaction;
  std::vector<bool> in_contact;
};

// Plays a slider trajectory against the movable obstacles with one-way
// coupling: the slider follows its nominal states; each contacted obstacle
// yields per the LCP and may push further obstacles (resolved sequentially in
// discovery order, each obstacle moving at most once per step). Contact with
// any fixed obstacle, or penetration beyond the limit, is infeasible.
inline InteractionResult simulate_interaction(const ConvexPolygon& slider_shape,
                                              const std::vector<SliderState>& traj,
                                              const std::vector<ObstacleModel>& movable_models,
                                              std::vector<Pose2> movable_poses,
                                              const std::vector<PlacedPolygon>& fixed,
                                              double dt) {
  InteractionResult out;
  out.movable_poses = std::move(movable_poses);
  const size_t n_mov = out.movable_poses.size();
  if (traj.size() < 2) {
    out.reaction.assign(traj.empty() ? 0 : traj.size() - 1, Eigen::Vector3d::Zero());
    return out;
  }
  out.reaction.assign(traj.size() - 1, Eigen::Vector3d::Zero());
  out.in_contact.assign(traj.size() - 1, false);

  struct Pusher {
    const ConvexPolygon* shape;
    Pose2 pose;
    Eigen::Vector3d twist;
    bool is_slider;
  };

  auto fail = [&](const std::string& why) {
    out.feasible = false;
    out.fault = why;
    return out;
  };

  for (size_t k = 0; k + 1 < traj.size(); ++k) {
    const Pose2 p0 = traj[k].pose();
    const Pose2 p1 = traj[k + 1].pose();
    Eigen::Vector3d v_s{(p1.x - p0.x) / dt, (p1.y - p0.y) / dt,
                        wrap_angle(p1.theta - p0.theta) / dt};

    std::deque<Pusher> queue;
    queue.push_back({&slider_shape, p0, v_s, true});
    std::vector<bool> moved(n_mov, false);

    while (!queue.empty()) {
      const Pusher pusher = queue.front();
      queue.pop_front();
      const PlacedPolygon pusher_placed{pusher.shape, pusher.pose};
      for (size_t i = 0; i < n_mov; ++i) {
        if (moved[i]) continue;
        const PlacedPolygon obst{&movable_models[i].shape, out.movable_poses[i]};
        const ContactQuery cq = polygon_collide(pusher_placed, obst, kContactTolerance);
        if (!cq.in_contact) continue;
        if (cq.depth > kPenetrationLimit) return fail("penetration limit exceeded");
        const ContactFrame frame = make_contact_frame(cq);
        const auto [j_p, j_o] = contact_jacobians(cq, pusher.pose.translation(),
                                                  out.movable_poses[i].translation());
        const Eigen::Matrix3d limit_w =
            limit_matrix_in_world(movable_models[i].limit, out.movable_poses[i].theta);
        const LcpProblem lcp =
            assemble_lcp(j_p, j_o, limit_w, movable_models[i].mu, frame, pusher.twist);
        LcpSolution sol;
        try {
          sol = solve_lcp(lcp);
        } catch (const LcpUnsolvable&) {
          return fail("contact force solve failed");
        }
        const Pose2 before = out.movable_poses[i];
        out.movable_poses[i] =
            integrate_obstacle(before, movable_models[i].limit, frame, sol.f, dt);
        if (pusher.is_slider) {
          const Eigen::Vector2d f_world = contact_force_world(frame, sol.f);
          out.reaction[k] -= j_p.transpose() * f_world;
          out.in_contact[k] = true;
        }
        Eigen::Vector3d v_o{(out.movable_poses[i].x - before.x) / dt,
                            (out.movable_poses[i].y - before.y) / dt,
                            wrap_angle(out.movable_poses[i].theta - before.theta) / dt};
        moved[i] = true;
        queue.push_back({&movable_models[i].shape, before, v_o, false});
      }
    }

    // End-of-step feasibility: clearance from fixed obstacles, bounded
    // residual penetration everywhere else.
    const PlacedPolygon slider_end{&slider_shape, p1};
    for (const auto& fx : fixed) {
      if (polygon_collide(slider_end, fx, kContactTolerance).in_contact) {
        return fail("slider contacts a fixed obstacle");
      }
    }
    for (size_t i = 0; i < n_mov; ++i) {
      const PlacedPolygon mi{&movable_models[i].shape, out.movable_poses[i]};
      for (const auto& fx : fixed) {
        if (polygon_collide(mi, fx, kContactTolerance).in_contact) {
          return fail("movable obstacle pressed into a fixed obstacle");
        }
      }
      if (polygon_collide(slider_end, mi, kContactTolerance).depth > kPenetrationLimit) {
        return fail("penetration limit exceeded");
      }
      for (size_t j = i + 1; j < n_mov; ++j) {
        const PlacedPolygon mj{&movable_models[j].shape, out.movable_poses[j]};
        if (polygon_collide(mi, mj, kContactTolerance).depth > kPenetrationLimit) {
          return fail("penetration limit exceeded");
        }
      }
    }
  }
  return out;
}

}  // namespace pushplan
