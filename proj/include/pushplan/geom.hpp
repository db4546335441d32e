#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace pushplan {

inline constexpr double kPi = std::numbers::pi;

// Wraps to (-pi, pi].
inline double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

inline Eigen::Matrix2d rotation2(double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

// Planar twist/wrench rotation: block-diagonal (R(theta), 1).
inline Eigen::Matrix3d rotation3(double theta) {
  Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  r.topLeftCorner<2, 2>() = rotation2(theta);
  return r;
}

inline double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

// CCW perpendicular; (v, perp(v)) is a right-handed pair.
inline Eigen::Vector2d perp(const Eigen::Vector2d& v) { return {-v.y(), v.x()}; }

struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Eigen::Vector2d translation() const { return {x, y}; }
  Eigen::Vector2d to_world(const Eigen::Vector2d& p_body) const {
    return translation() + rotation2(theta) * p_body;
  }
  Eigen::Vector2d to_body(const Eigen::Vector2d& p_world) const {
    return rotation2(theta).transpose() * (p_world - translation());
  }
};

// Convex CCW polygon in body frame with the area centroid at the origin.
// Use make() to normalize winding and centering; the raw constructor trusts
// its input.
class ConvexPolygon {
 public:
  static ConvexPolygon make(std::vector<Eigen::Vector2d> verts) {
    if (verts.size() < 3) throw std::invalid_argument("polygon needs >= 3 vertices");
    double area2 = 0.0;
    for (size_t i = 0; i < verts.size(); ++i) {
      const auto& a = verts[i];
      const auto& b = verts[(i + 1) % verts.size()];
      area2 += cross2(a, b);
    }
    if (std::abs(area2) < 1e-12) throw std::invalid_argument("degenerate polygon");
    if (area2 < 0.0) std::reverse(verts.begin(), verts.end());
    // Strict convexity: every turn is a left turn.
    for (size_t i = 0; i < verts.size(); ++i) {
      const auto& a = verts[i];
      const auto& b = verts[(i + 1) % verts.size()];
      const auto& c = verts[(i + 2) % verts.size()];
      if (cross2(b - a, c - b) <= 1e-12) throw std::invalid_argument("polygon not strictly convex");
    }
    Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
    double a6 = 0.0;
    for (size_t i = 0; i < verts.size(); ++i) {
      const auto& a = verts[i];
      const auto& b = verts[(i + 1) % verts.size()];
      const double w = cross2(a, b);
      centroid += w * (a + b);
      a6 += 3.0 * w;
    }
    centroid /= a6;
    for (auto& v : verts) v -= centroid;
    return ConvexPolygon(std::move(verts));
  }

  static ConvexPolygon box(double size_x, double size_y) {
    const double hx = 0.5 * size_x, hy = 0.5 * size_y;
    return make({{hx, -hy}, {hx, hy}, {-hx, hy}, {-hx, -hy}});
  }

  const std::vector<Eigen::Vector2d>& vertices() const { return verts_; }
  size_t face_count() const { return verts_.size(); }

  // Face i runs from vertex i to vertex i+1.
  Eigen::Vector2d face_outward_normal(size_t i) const { return normals_[i]; }
  double vertex_azimuth(size_t i) const { return vert_az_[i]; }

  // Azimuth of the face midpoint as seen from the centroid.
  double face_center_azimuth(size_t i) const { return face_center_az_[i]; }

  // Signed azimuth offsets of the face's endpoint vertices from the face
  // center; lo < 0 < hi, and |lo| != hi unless the face midpoint bisects
  // the subtended arc (true for centrally symmetric shapes).
  std::pair<double, double> face_relative_span(size_t i) const {
    return {face_rel_lo_[i], face_rel_hi_[i]};
  }

  // Offset of psi from the face-center azimuth, wrapped.
  double face_relative(size_t i, double psi) const {
    return wrap_angle(psi - face_center_az_[i]);
  }

  size_t face_of_azimuth(double psi) const {
    for (size_t i = 0; i < verts_.size(); ++i) {
      const double rel = face_relative(i, psi);
      if (rel >= face_rel_lo_[i] && rel <= face_rel_hi_[i]) return i;
    }
    // Wrap pathologies only; pick the closest face.
    size_t best = 0;
    double bd = 1e300;
    for (size_t i = 0; i < verts_.size(); ++i) {
      const double rel = face_relative(i, psi);
      const double d = std::max(face_rel_lo_[i] - rel, rel - face_rel_hi_[i]);
      if (d < bd) { bd = d; best = i; }
    }
    return best;
  }

  double area() const { return area_; }
  double circumradius() const { return circumradius_; }

  // Mean distance from the centroid over the footprint (characteristic
  // friction moment arm).
  double mean_radius() const { return mean_radius_; }

 private:
  explicit ConvexPolygon(std::vector<Eigen::Vector2d> verts) : verts_(std::move(verts)) {
    const size_t n = verts_.size();
    normals_.resize(n);
    vert_az_.resize(n);
    face_center_az_.resize(n);
    face_rel_lo_.resize(n);
    face_rel_hi_.resize(n);
    area_ = 0.0;
    circumradius_ = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const auto& a = verts_[i];
      const auto& b = verts_[(i + 1) % n];
      area_ += 0.5 * cross2(a, b);
      circumradius_ = std::max(circumradius_, a.norm());
      const Eigen::Vector2d e = (b - a).normalized();
      normals_[i] = -perp(e);  // outward for CCW winding
      vert_az_[i] = std::atan2(a.y(), a.x());
      const Eigen::Vector2d mid = 0.5 * (a + b);
      face_center_az_[i] = std::atan2(mid.y(), mid.x());
      face_rel_lo_[i] = wrap_angle(vert_az_[i] - face_center_az_[i]);
      face_rel_hi_[i] = wrap_angle(std::atan2(b.y(), b.x()) - face_center_az_[i]);
    }
    // Mean |r|: exact fan decomposition about the centroid.
    double integral = 0.0;
    for (size_t i = 0; i < n; ++i) {
      integral += integrate_abs_r(verts_[i], verts_[(i + 1) % n]);
    }
    mean_radius_ = integral / area_;
  }

  // Closed-form integral of |r| over the triangle (0, a, b): in polar
  // coordinates about the apex it reduces to a sec^3 antiderivative along
  // the opposite edge.
  static double integrate_abs_r(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    Eigen::Vector2d e = b - a;
    const double len = e.norm();
    if (len < 1e-15) return 0.0;
    e /= len;
    const double w = std::abs(cross2(e, -a));  // apex distance to the edge line
    if (w < 1e-15) return 0.0;
    const auto anti = [w](double s) {
      const double r = std::sqrt(w * w + s * s);
      return (w / 6.0) * (s * r + w * w * std::log((r + s) / w));
    };
    return std::abs(anti(e.dot(b)) - anti(e.dot(a)));
  }

  std::vector<Eigen::Vector2d> verts_;
  std::vector<Eigen::Vector2d> normals_;
  std::vector<double> vert_az_;
  std::vector<double> face_center_az_;
  std::vector<double> face_rel_lo_;
  std::vector<double> face_rel_hi_;
  double area_ = 0.0;
  double circumradius_ = 0.0;
  double mean_radius_ = 0.0;
};

struct PlacedPolygon {
  const ConvexPolygon* shape = nullptr;
  Pose2 pose;

  Eigen::Vector2d world_vertex(size_t i) const {
    return pose.to_world(shape->vertices()[i]);
  }
};

struct ContactQuery {
  bool in_contact = false;
  double depth = 0.0;                        // penetration, 0 when separated
  double separation = 0.0;                   // gap along the best axis, 0 when touching
  Eigen::Vector2d normal{1.0, 0.0};          // from a into b
  Eigen::Vector2d point{0.0, 0.0};           // deepest contact point, world frame
};

namespace detail {

struct AxisProjection {
  double lo, hi;
};

inline AxisProjection project_polygon(const PlacedPolygon& p, const Eigen::Vector2d& axis) {
  double lo = 1e300, hi = -1e300;
  for (size_t i = 0; i < p.shape->vertices().size(); ++i) {
    const double d = axis.dot(p.world_vertex(i));
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  return {lo, hi};
}

}  // namespace detail

// Separating-axis test over both polygons' face normals. The reported
// normal points from a into b; depth is along that axis. Bodies within
// contact_tolerance of touching count as in contact with depth 0.
inline ContactQuery polygon_collide(const PlacedPolygon& a, const PlacedPolygon& b,
                                    double contact_tolerance) {
  struct Best {
    double overlap = 1e300;
    Eigen::Vector2d axis{1.0, 0.0};  // oriented a -> b
    int owner = 0;                   // 0: axis from a's face, 1: from b's face
    size_t face = 0;
  } best;

  auto consider = [&](const PlacedPolygon& owner_poly, int owner, const PlacedPolygon& other) {
    (void)other;
    const size_t n = owner_poly.shape->face_count();
    for (size_t i = 0; i < n; ++i) {
      const Eigen::Vector2d axis =
          rotation2(owner_poly.pose.theta) * owner_poly.shape->face_outward_normal(i);
      const auto pa = detail::project_polygon(a, axis);
      const auto pb = detail::project_polygon(b, axis);
      // Minimum translation along this axis; negative means a gap. The
      // intersection width overstates depth when one projection contains
      // the other, so both push directions are tried explicitly.
      const double push_pos = pa.hi - pb.lo;  // move b toward +axis
      const double push_neg = pb.hi - pa.lo;  // move b toward -axis
      const double overlap = std::min(push_pos, push_neg);
      if (overlap < best.overlap) {
        best.overlap = overlap;
        best.owner = owner;
        best.face = i;
        best.axis = (push_pos <= push_neg) ? axis : Eigen::Vector2d(-axis);
      }
    }
  };
  consider(a, 0, b);
  consider(b, 1, a);

  ContactQuery q;
  q.normal = best.axis;
  q.separation = std::max(0.0, -best.overlap);
  q.depth = std::max(0.0, best.overlap);
  q.in_contact = q.separation <= contact_tolerance;

  // Contact point: clip the incident body's deepest vertices against the
  // reference face extent; a near-parallel pair reduces to its midpoint.
  const PlacedPolygon& ref = (best.owner == 0) ? a : b;
  const PlacedPolygon& inc = (best.owner == 0) ? b : a;
  const Eigen::Vector2d ref_n =
      rotation2(ref.pose.theta) * ref.shape->face_outward_normal(best.face);
  const size_t nv = inc.shape->vertices().size();
  double dmin = 1e300;
  for (size_t i = 0; i < nv; ++i) dmin = std::min(dmin, ref_n.dot(inc.world_vertex(i)));
  std::vector<Eigen::Vector2d> deepest;
  for (size_t i = 0; i < nv; ++i) {
    const Eigen::Vector2d v = inc.world_vertex(i);
    if (ref_n.dot(v) <= dmin + 1e-9) deepest.push_back(v);
  }
  if (deepest.size() >= 2) {
    // Parallel faces: clamp the pair to the reference face's tangential extent.
    const Eigen::Vector2d t = perp(ref_n);
    const Eigen::Vector2d rv0 = ref.world_vertex(best.face);
    const Eigen::Vector2d rv1 = ref.world_vertex((best.face + 1) % ref.shape->face_count());
    const double rlo = std::min(t.dot(rv0), t.dot(rv1));
    const double rhi = std::max(t.dot(rv0), t.dot(rv1));
    double ilo = 1e300, ihi = -1e300;
    for (const auto& v : deepest) {
      ilo = std::min(ilo, t.dot(v));
      ihi = std::max(ihi, t.dot(v));
    }
    const double lo = std::max(rlo, ilo), hi = std::min(rhi, ihi);
    const double tm = (lo <= hi) ? 0.5 * (lo + hi) : 0.5 * (ilo + ihi);
    const double nm = dmin + 0.5 * std::max(0.0, -best.overlap);
    q.point = ref_n * nm + t * tm;
  } else {
    q.point = deepest.empty()
                  ? Eigen::Vector2d(0.5 * (a.pose.translation() + b.pose.translation()))
                  : Eigen::Vector2d(deepest[0] +
                                    ref_n * 0.5 * std::max(0.0, -best.overlap));
  }
  return q;
}

struct PerimeterPoint {
  Eigen::Vector2d point;    // body frame
  size_t face = 0;
  Eigen::Vector2d normal;   // inward face normal, body frame
  Eigen::Vector2d tangent;  // perp(normal); (normal, tangent) right-handed
};

// Intersection of the centroid ray at azimuth psi with the boundary.
// Rejects azimuths within 1e-9 rad of a vertex, where the face is ambiguous.
inline PerimeterPoint point_on_perimeter(const ConvexPolygon& poly, double psi) {
  const size_t face = poly.face_of_azimuth(psi);
  const double rel = poly.face_relative(face, psi);
  const auto [lo, hi] = poly.face_relative_span(face);
  if (rel - lo < 1e-9 || hi - rel < 1e-9) {
    throw std::domain_error("contact azimuth coincides with a polygon vertex");
  }
  const Eigen::Vector2d d(std::cos(psi), std::sin(psi));
  const Eigen::Vector2d n_out = poly.face_outward_normal(face);
  const double b = n_out.dot(poly.vertices()[face]);
  const double nd = n_out.dot(d);
  if (nd <= 1e-12) throw std::domain_error("contact azimuth does not leave through its face");
  PerimeterPoint p;
  p.point = (b / nd) * d;
  p.face = face;
  p.normal = -n_out;
  p.tangent = perp(p.normal);
  return p;
}

}  // namespace pushplan
