#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <vector>

#include "pushplan/geom.hpp"

namespace pushplan {

// Raised when a rollout drives the contact azimuth onto a footprint vertex;
// the pusher cannot round a corner within one segment.
struct FaceExit : std::runtime_error {
  explicit FaceExit(double psi)
      : std::runtime_error("contact point left its face"), psi_c(psi) {}
  double psi_c;
};

struct LcpUnsolvable : std::runtime_error {
  LcpUnsolvable() : std::runtime_error("contact LCP has no solution within tolerance") {}
};

inline constexpr double kContactTolerance = 1e-3;   // m
inline constexpr double kPenetrationLimit = 5e-3;   // m
inline constexpr double kStrictSign = 1e-6;         // open-inequality margin

// Ellipsoidal limit-surface matrix mapping a body wrench to a body twist.
// force_scale is the support friction force mu_g*m*g; the characteristic
// moment arm comes from the footprint.
inline Eigen::Matrix3d limit_surface_matrix(double force_scale, double moment_arm) {
  Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
  a(0, 0) = a(1, 1) = 1.0 / (force_scale * force_scale);
  a(2, 2) = 1.0 / (moment_arm * force_scale * moment_arm * force_scale);
  return a;
}

struct SliderState {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double psi_c = 0.0;

  Eigen::Vector4d vec() const { return {x, y, theta, psi_c}; }
  static SliderState from_vec(const Eigen::Vector4d& v) {
    return {v[0], v[1], wrap_angle(v[2]), wrap_angle(v[3])};
  }
  Pose2 pose() const { return {x, y, theta}; }
};

// Weighted state metric; theta and psi_c are wrapped before weighting.
struct DistanceWeights {
  double pos = 1.0;
  double theta = 0.1;
  double psi = 0.01;

  double operator()(const SliderState& a, const SliderState& b) const {
    const double dx = a.x - b.x, dy = a.y - b.y;
    const double dt = wrap_angle(a.theta - b.theta) * theta;
    const double dp = wrap_angle(a.psi_c - b.psi_c) * psi;
    return std::sqrt(pos * pos * (dx * dx + dy * dy) + dt * dt + dp * dp);
  }
  Eigen::Vector4d diag() const { return {pos, pos, theta, psi}; }
};

struct SliderModel {
  ConvexPolygon shape = ConvexPolygon::box(0.15, 0.08);
  Eigen::Matrix3d limit = limit_surface_matrix(1.2, shape.mean_radius());
  double mu_p = 0.2;            // pusher-slider friction
  double f_bar = 0.15;          // N
  double psi_dot_bar = 1.0;     // rad/s
  std::vector<double> psi_bar_per_face{0.52, 0.9, 0.52, 0.9};

  double psi_bar(size_t face) const {
    return psi_bar_per_face.empty() ? kPi
                                    : psi_bar_per_face[face % psi_bar_per_face.size()];
  }

  // Allowed contact interval on a face, relative to the face-center azimuth.
  // Intersection of the geometric span (minus the vertex guard) and the
  // configured contact band.
  std::pair<double, double> face_band(size_t face) const {
    const auto [lo, hi] = shape.face_relative_span(face);
    const double bar = psi_bar(face);
    return {std::max(lo + 1e-6, -bar), std::min(hi - 1e-6, bar)};
  }
};

inline SliderModel make_default_slider() { return SliderModel{}; }

inline SliderModel make_rectangle_slider(double size_x, double size_y, double force_scale,
                                         double mu_p, double f_bar, double psi_dot_bar,
                                         std::vector<double> psi_bars = {}) {
  SliderModel m;
  m.shape = ConvexPolygon::box(size_x, size_y);
  m.limit = limit_surface_matrix(force_scale, m.shape.mean_radius());
  m.mu_p = mu_p;
  m.f_bar = f_bar;
  m.psi_dot_bar = psi_dot_bar;
  if (psi_bars.empty()) {
    m.psi_bar_per_face.assign(m.shape.face_count(), kPi);
  } else {
    m.psi_bar_per_face = std::move(psi_bars);
  }
  return m;
}

struct PusherInput {
  double fn = 0.0;
  double ft = 0.0;
  double psi_dot = 0.0;

  Eigen::Vector3d vec() const { return {fn, ft, psi_dot}; }

  // Validating constructor path: rejects inputs outside the model's force
  // and slip bounds beyond a small numerical slack, then clamps the slack.
  static PusherInput checked(const SliderModel& m, double fn, double ft, double psi_dot,
                             double slack = 1e-7) {
    if (fn < -slack || fn > m.f_bar + slack) throw std::invalid_argument("fn out of range");
    if (std::abs(ft) > m.mu_p * std::max(fn, 0.0) + slack)
      throw std::invalid_argument("ft outside the friction cone");
    if (std::abs(psi_dot) > m.psi_dot_bar + slack)
      throw std::invalid_argument("psi_dot out of range");
    return clamped(m, fn, ft, psi_dot);
  }

  static PusherInput clamped(const SliderModel& m, double fn, double ft, double psi_dot) {
    PusherInput u;
    u.fn = std::clamp(fn, 0.0, m.f_bar);
    u.ft = std::clamp(ft, -m.mu_p * u.fn, m.mu_p * u.fn);
    u.psi_dot = std::clamp(psi_dot, -m.psi_dot_bar, m.psi_dot_bar);
    return u;
  }
};

enum class ContactMode { Sticking, SlidingLeft, SlidingRight };
inline constexpr std::array<ContactMode, 3> kAllModes{
    ContactMode::Sticking, ContactMode::SlidingLeft, ContactMode::SlidingRight};

inline const char* to_string(ContactMode m) {
  switch (m) {
    case ContactMode::Sticking: return "sticking";
    case ContactMode::SlidingLeft: return "sliding_left";
    case ContactMode::SlidingRight: return "sliding_right";
  }
  return "?";
}

struct ContactGeometry {
  PerimeterPoint perimeter;
  Eigen::Matrix<double, 2, 3> jacobian;  // body twist -> (normal, tangential) contact velocity
};

// Contact Jacobian rows are the normal and tangent directions with their
// moment arms about the centroid, in the body frame.
inline ContactGeometry contact_jacobian(const SliderModel& m, double psi_c) {
  ContactGeometry g;
  g.perimeter = point_on_perimeter(m.shape, psi_c);
  const auto& pp = g.perimeter;
  g.jacobian << pp.normal.x(), pp.normal.y(), cross2(pp.point, pp.normal),
      pp.tangent.x(), pp.tangent.y(), cross2(pp.point, pp.tangent);
  return g;
}

// Quasi-static pusher-slider rate: the contact wrench is mapped through the
// limit surface in the body frame and rotated to the world; psi_c integrates
// the commanded slip rate.
inline Eigen::Vector4d eval_dynamics(const SliderModel& m, const SliderState& x,
                                     const PusherInput& u) {
  const ContactGeometry g = contact_jacobian(m, x.psi_c);
  const Eigen::Vector3d wrench = g.jacobian.transpose() * Eigen::Vector2d(u.fn, u.ft);
  const Eigen::Vector3d pose_rate = rotation3(x.theta) * (m.limit * wrench);
  return {pose_rate[0], pose_rate[1], pose_rate[2], u.psi_dot};
}

// Input matrix of the control-affine dynamics at (x, u=0); exact because the
// rate is linear in the input for a fixed state.
inline Eigen::Matrix<double, 4, 3> linearize(const SliderModel& m, const SliderState& x) {
  const ContactGeometry g = contact_jacobian(m, x.psi_c);
  Eigen::Matrix<double, 4, 3> b = Eigen::Matrix<double, 4, 3>::Zero();
  b.topLeftCorner<3, 2>() = rotation3(x.theta) * m.limit * g.jacobian.transpose();
  b(3, 2) = 1.0;
  return b;
}

// Mode polytope D u <= h over u = [fn, ft, psi_dot]. Strict sliding-rate
// inequalities are closed with the kStrictSign margin.
struct InputPolytope {
  ContactMode mode = ContactMode::Sticking;
  Eigen::Matrix<double, 6, 3> d = Eigen::Matrix<double, 6, 3>::Zero();
  Eigen::Matrix<double, 6, 1> h = Eigen::Matrix<double, 6, 1>::Zero();

  bool contains(const Eigen::Vector3d& u, double tol = 1e-9) const {
    return ((d * u - h).array() <= tol).all();
  }
};

inline InputPolytope mode_polytope(const SliderModel& m, ContactMode mode) {
  InputPolytope p;
  p.mode = mode;
  p.d.row(0) << -1.0, 0.0, 0.0;  // fn >= 0
  p.h[0] = 0.0;
  p.d.row(1) << 1.0, 0.0, 0.0;   // fn <= f_bar
  p.h[1] = m.f_bar;
  const double mu = m.mu_p;
  switch (mode) {
    case ContactMode::Sticking:
      p.d.row(2) << -mu, 1.0, 0.0;   // ft <= mu fn
      p.d.row(3) << -mu, -1.0, 0.0;  // -ft <= mu fn
      p.d.row(4) << 0.0, 0.0, 1.0;   // psi_dot = 0
      p.d.row(5) << 0.0, 0.0, -1.0;
      p.h.tail<4>().setZero();
      break;
    case ContactMode::SlidingLeft:
      p.d.row(2) << -mu, 1.0, 0.0;   // ft = +mu fn
      p.d.row(3) << mu, -1.0, 0.0;
      p.h[2] = p.h[3] = 0.0;
      p.d.row(4) << 0.0, 0.0, 1.0;   // psi_dot <= -margin
      p.h[4] = -kStrictSign;
      p.d.row(5) << 0.0, 0.0, -1.0;  // psi_dot >= -psi_dot_bar
      p.h[5] = m.psi_dot_bar;
      break;
    case ContactMode::SlidingRight:
      p.d.row(2) << mu, 1.0, 0.0;    // ft = -mu fn
      p.d.row(3) << -mu, -1.0, 0.0;
      p.h[2] = p.h[3] = 0.0;
      p.d.row(4) << 0.0, 0.0, -1.0;  // psi_dot >= +margin
      p.h[4] = -kStrictSign;
      p.d.row(5) << 0.0, 0.0, 1.0;   // psi_dot <= psi_dot_bar
      p.h[5] = m.psi_dot_bar;
      break;
  }
  return p;
}

namespace detail {

// Stage evaluations clamp psi_c into the face interval so no RK4 stage
// samples across a corner; the caller decides whether the step itself exits.
inline Eigen::Vector4d rate_clamped(const SliderModel& m, Eigen::Vector4d v, size_t face,
                                    const PusherInput& u) {
  const double fc = m.shape.face_center_azimuth(face);
  const auto [lo, hi] = m.shape.face_relative_span(face);
  const double rel = std::clamp(wrap_angle(v[3] - fc), lo + 1e-9, hi - 1e-9);
  SliderState s{v[0], v[1], v[2], wrap_angle(fc + rel)};
  return eval_dynamics(m, s, u);
}

}  // namespace detail

// One RK4 step holding the contact face fixed; throws FaceExit when the
// integrated contact azimuth reaches a vertex of that face.
inline SliderState rk4_step(const SliderModel& m, const SliderState& x, const PusherInput& u,
                            double dt) {
  const size_t face = contact_jacobian(m, x.psi_c).perimeter.face;
  const Eigen::Vector4d v = x.vec();
  const Eigen::Vector4d k1 = detail::rate_clamped(m, v, face, u);
  const Eigen::Vector4d k2 = detail::rate_clamped(m, v + 0.5 * dt * k1, face, u);
  const Eigen::Vector4d k3 = detail::rate_clamped(m, v + 0.5 * dt * k2, face, u);
  const Eigen::Vector4d k4 = detail::rate_clamped(m, v + dt * k3, face, u);
  const Eigen::Vector4d next = v + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  const double fc = m.shape.face_center_azimuth(face);
  const auto [lo, hi] = m.shape.face_relative_span(face);
  const double rel = wrap_angle(next[3] - fc);
  if (rel - lo < 1e-9 || hi - rel < 1e-9) throw FaceExit(next[3]);
  return SliderState::from_vec(next);
}

// Fixed-step RK4 rollout under a constant input. Returns steps+1 states
// including the start.
inline std::vector<SliderState> rollout(const SliderModel& m, const SliderState& x0,
                                        const PusherInput& u, double dt, int steps) {
  std::vector<SliderState> out;
  out.reserve(static_cast<size_t>(steps) + 1);
  out.push_back(x0);
  for (int k = 0; k < steps; ++k) out.push_back(rk4_step(m, out.back(), u, dt));
  return out;
}

}  // namespace pushplan
