#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pushplan/connect.hpp"
#include "pushplan/dynamics.hpp"
#include "pushplan/geom.hpp"
#include "pushplan/interaction.hpp"

namespace pushplan {

struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Carries the dotted path of the offending field ("movables[2].pose").
struct ValidationError : std::runtime_error {
  std::string field;
  ValidationError(std::string field_path, const std::string& reason)
      : std::runtime_error(field_path + ": " + reason), field(std::move(field_path)) {}
};

struct Rect {
  double x_min = 0.0;
  double x_max = 1.0;
  double y_min = 0.0;
  double y_max = 1.0;

  bool contains(double x, double y) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
  }
  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
};

// The limit surface is stored by its two generating scalars rather than the
// assembled matrix so files round-trip bit-exactly.
struct SliderSpec {
  ConvexPolygon footprint = ConvexPolygon::box(0.15, 0.08);
  double force_scale = 1.2;
  double moment_arm = footprint.mean_radius();
  double mu_p = 0.2;
  double f_bar = 0.15;
  double psi_dot_bar = 1.0;
  std::vector<double> psi_bar_per_face{0.52, 0.9, 0.52, 0.9};
  SliderState x0;

  SliderModel model() const {
    SliderModel m;
    m.shape = footprint;
    m.limit = limit_surface_matrix(force_scale, moment_arm);
    m.mu_p = mu_p;
    m.f_bar = f_bar;
    m.psi_dot_bar = psi_dot_bar;
    m.psi_bar_per_face = psi_bar_per_face;
    return m;
  }
};

struct MovableSpec {
  ConvexPolygon footprint = ConvexPolygon::box(0.07, 0.122);
  double force_scale = 0.85;
  double moment_arm = 0.035;
  double mu = 0.3;
  Pose2 pose;

  ObstacleModel model() const {
    return {footprint, limit_surface_matrix(force_scale, moment_arm), mu};
  }
};

struct FixedSpec {
  ConvexPolygon footprint = ConvexPolygon::box(0.1, 0.1);
  Pose2 pose;
};

struct Scene {
  Rect workspace;
  SliderSpec slider;
  GoalRegion goal;
  std::vector<MovableSpec> movables;
  std::vector<FixedSpec> fixed;
  nlohmann::json meta = nlohmann::json::object();

  std::vector<ObstacleModel> movable_models() const {
    std::vector<ObstacleModel> out;
    out.reserve(movables.size());
    for (const auto& m : movables) out.push_back(m.model());
    return out;
  }
  std::vector<Pose2> movable_poses() const {
    std::vector<Pose2> out;
    out.reserve(movables.size());
    for (const auto& m : movables) out.push_back(m.pose);
    return out;
  }
  // Views into this scene's polygons; valid only while the scene stays put.
  std::vector<PlacedPolygon> fixed_views() const {
    std::vector<PlacedPolygon> out;
    out.reserve(fixed.size());
    for (const auto& f : fixed) out.push_back({&f.footprint, f.pose});
    return out;
  }
};

namespace detail {

inline const nlohmann::json& need(const nlohmann::json& j, const std::string& path,
                                  const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(path.empty() ? key : path + "." + key, "missing");
  return *it;
}

inline void reject_unknown_keys(const nlohmann::json& j, const std::string& path,
                                std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) ok = ok || it.key() == k;
    if (!ok)
      throw ValidationError(path.empty() ? it.key() : path + "." + it.key(), "unknown key");
  }
}

inline double as_number(const nlohmann::json& j, const std::string& path) {
  if (!j.is_number()) throw ValidationError(path, "expected a number");
  return j.get<double>();
}

inline std::vector<double> as_numbers(const nlohmann::json& j, const std::string& path,
                                      size_t count) {
  if (!j.is_array() || j.size() != count)
    throw ValidationError(path, "expected an array of " + std::to_string(count) + " numbers");
  std::vector<double> out;
  out.reserve(count);
  for (size_t i = 0; i < count; ++i)
    out.push_back(as_number(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline Pose2 as_pose(const nlohmann::json& j, const std::string& path) {
  const auto v = as_numbers(j, path, 3);
  return {v[0], v[1], v[2]};
}

// Footprints are authored about their own centroid; the polygon class
// recenters silently, so verify before construction or files would load
// with shifted poses.
inline ConvexPolygon as_footprint(const nlohmann::json& j, const std::string& path) {
  if (!j.is_array() || j.size() < 3)
    throw ValidationError(path, "expected an array of at least 3 vertices");
  std::vector<Eigen::Vector2d> verts;
  verts.reserve(j.size());
  for (size_t i = 0; i < j.size(); ++i) {
    const auto v = as_numbers(j[i], path + "[" + std::to_string(i) + "]", 2);
    verts.emplace_back(v[0], v[1]);
  }
  double area2 = 0.0;
  Eigen::Vector2d centroid6 = Eigen::Vector2d::Zero();
  for (size_t i = 0; i < verts.size(); ++i) {
    const auto& a = verts[i];
    const auto& b = verts[(i + 1) % verts.size()];
    const double w = cross2(a, b);
    area2 += w;
    centroid6 += w * (a + b);
  }
  if (std::abs(area2) > 1e-15 &&
      (centroid6 / (3.0 * area2)).lpNorm<Eigen::Infinity>() > 1e-7)
    throw ValidationError(path, "footprint is not centered on its centroid");
  try {
    return ConvexPolygon::make(std::move(verts));
  } catch (const std::invalid_argument& e) {
    throw ValidationError(path, e.what());
  }
}

struct LimitScalars {
  double force_scale;
  double moment_arm;
};

inline LimitScalars as_limit(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object()) throw ValidationError(path, "expected an object");
  reject_unknown_keys(j, path, {"force_scale", "moment_arm"});
  LimitScalars out{as_number(need(j, path, "force_scale"), path + ".force_scale"),
                   as_number(need(j, path, "moment_arm"), path + ".moment_arm")};
  if (out.force_scale <= 0.0) throw ValidationError(path + ".force_scale", "must be positive");
  if (out.moment_arm <= 0.0) throw ValidationError(path + ".moment_arm", "must be positive");
  return out;
}

inline nlohmann::json footprint_to_json(const ConvexPolygon& p) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& v : p.vertices()) out.push_back({v.x(), v.y()});
  return out;
}

}  // namespace detail

// Structural validation beyond what parsing can see: containment, positive
// scalars, and pairwise clearance of the initial configuration.
inline void validate_scene(const Scene& s) {
  if (!(s.workspace.x_min < s.workspace.x_max))
    throw ValidationError("workspace.x", "interval must be increasing");
  if (!(s.workspace.y_min < s.workspace.y_max))
    throw ValidationError("workspace.y", "interval must be increasing");

  if (!(s.slider.mu_p >= 0.0)) throw ValidationError("slider.mu_p", "must be nonnegative");
  if (!(s.slider.f_bar > 0.0)) throw ValidationError("slider.f_bar", "must be positive");
  if (!(s.slider.psi_dot_bar > 0.0))
    throw ValidationError("slider.psi_dot_bar", "must be positive");
  if (s.slider.psi_bar_per_face.size() != s.slider.footprint.face_count())
    throw ValidationError("slider.psi_bar_per_face", "needs one entry per face");
  for (size_t i = 0; i < s.slider.psi_bar_per_face.size(); ++i) {
    const double b = s.slider.psi_bar_per_face[i];
    if (!(b > 0.0 && b <= kPi))
      throw ValidationError("slider.psi_bar_per_face[" + std::to_string(i) + "]",
                            "must lie in (0, pi]");
  }
  if (!s.workspace.contains(s.slider.x0.x, s.slider.x0.y))
    throw ValidationError("slider.x0", "outside the workspace");
  if (!s.workspace.contains(s.goal.center.x, s.goal.center.y))
    throw ValidationError("goal.center", "outside the workspace");
  if (!(s.goal.tol_x > 0.0 && s.goal.tol_y > 0.0 && s.goal.tol_theta > 0.0))
    throw ValidationError("goal.tol", "tolerances must be positive");

  for (size_t i = 0; i < s.movables.size(); ++i) {
    const auto& m = s.movables[i];
    const std::string p = "movables[" + std::to_string(i) + "]";
    if (!(m.mu >= 0.0)) throw ValidationError(p + ".mu", "must be nonnegative");
    if (!s.workspace.contains(m.pose.x, m.pose.y))
      throw ValidationError(p + ".pose", "outside the workspace");
  }

  // Initial clearance: every body pair separated by more than the contact
  // tolerance, so the first planning step starts contact-free.
  std::vector<PlacedPolygon> bodies;
  std::vector<std::string> names;
  bodies.push_back({&s.slider.footprint, s.slider.x0.pose()});
  names.push_back("slider.x0");
  for (size_t i = 0; i < s.movables.size(); ++i) {
    bodies.push_back({&s.movables[i].footprint, s.movables[i].pose});
    names.push_back("movables[" + std::to_string(i) + "].pose");
  }
  for (size_t i = 0; i < s.fixed.size(); ++i) {
    bodies.push_back({&s.fixed[i].footprint, s.fixed[i].pose});
    names.push_back("fixed[" + std::to_string(i) + "].pose");
  }
  for (size_t i = 0; i < bodies.size(); ++i) {
    for (size_t j = i + 1; j < bodies.size(); ++j) {
      if (polygon_collide(bodies[i], bodies[j], kContactTolerance).in_contact)
        throw ValidationError(names[j], "initial contact with " + names[i]);
    }
  }
}

inline Scene scene_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("", "top level must be an object");
  detail::reject_unknown_keys(j, "",
                              {"workspace", "slider", "goal", "movables", "fixed", "meta"});
  Scene s;

  {
    const auto& w = detail::need(j, "", "workspace");
    if (!w.is_object()) throw ValidationError("workspace", "expected an object");
    detail::reject_unknown_keys(w, "workspace", {"x", "y"});
    const auto xs = detail::as_numbers(detail::need(w, "workspace", "x"), "workspace.x", 2);
    const auto ys = detail::as_numbers(detail::need(w, "workspace", "y"), "workspace.y", 2);
    s.workspace = {xs[0], xs[1], ys[0], ys[1]};
  }
  {
    const auto& sl = detail::need(j, "", "slider");
    if (!sl.is_object()) throw ValidationError("slider", "expected an object");
    detail::reject_unknown_keys(sl, "slider",
                                {"footprint", "limit_surface", "mu_p", "f_bar", "psi_dot_bar",
                                 "psi_bar_per_face", "x0"});
    s.slider.footprint =
        detail::as_footprint(detail::need(sl, "slider", "footprint"), "slider.footprint");
    const auto lim =
        detail::as_limit(detail::need(sl, "slider", "limit_surface"), "slider.limit_surface");
    s.slider.force_scale = lim.force_scale;
    s.slider.moment_arm = lim.moment_arm;
    s.slider.mu_p = detail::as_number(detail::need(sl, "slider", "mu_p"), "slider.mu_p");
    s.slider.f_bar = detail::as_number(detail::need(sl, "slider", "f_bar"), "slider.f_bar");
    s.slider.psi_dot_bar =
        detail::as_number(detail::need(sl, "slider", "psi_dot_bar"), "slider.psi_dot_bar");
    const auto& bars = detail::need(sl, "slider", "psi_bar_per_face");
    if (!bars.is_array()) throw ValidationError("slider.psi_bar_per_face", "expected an array");
    s.slider.psi_bar_per_face.clear();
    for (size_t i = 0; i < bars.size(); ++i)
      s.slider.psi_bar_per_face.push_back(detail::as_number(
          bars[i], "slider.psi_bar_per_face[" + std::to_string(i) + "]"));
    const auto v0 = detail::as_numbers(detail::need(sl, "slider", "x0"), "slider.x0", 4);
    s.slider.x0 = {v0[0], v0[1], v0[2], v0[3]};
  }
  {
    const auto& g = detail::need(j, "", "goal");
    if (!g.is_object()) throw ValidationError("goal", "expected an object");
    detail::reject_unknown_keys(g, "goal", {"center", "tol"});
    s.goal.center = detail::as_pose(detail::need(g, "goal", "center"), "goal.center");
    const auto tol = detail::as_numbers(detail::need(g, "goal", "tol"), "goal.tol", 3);
    s.goal.tol_x = tol[0];
    s.goal.tol_y = tol[1];
    s.goal.tol_theta = tol[2];
  }
  {
    const auto& ms = detail::need(j, "", "movables");
    if (!ms.is_array()) throw ValidationError("movables", "expected an array");
    for (size_t i = 0; i < ms.size(); ++i) {
      const std::string p = "movables[" + std::to_string(i) + "]";
      if (!ms[i].is_object()) throw ValidationError(p, "expected an object");
      detail::reject_unknown_keys(ms[i], p, {"footprint", "limit_surface", "mu", "pose"});
      MovableSpec m;
      m.footprint = detail::as_footprint(detail::need(ms[i], p, "footprint"), p + ".footprint");
      const auto lim = detail::as_limit(detail::need(ms[i], p, "limit_surface"),
                                        p + ".limit_surface");
      m.force_scale = lim.force_scale;
      m.moment_arm = lim.moment_arm;
      m.mu = detail::as_number(detail::need(ms[i], p, "mu"), p + ".mu");
      m.pose = detail::as_pose(detail::need(ms[i], p, "pose"), p + ".pose");
      s.movables.push_back(std::move(m));
    }
  }
  {
    const auto& fs = detail::need(j, "", "fixed");
    if (!fs.is_array()) throw ValidationError("fixed", "expected an array");
    for (size_t i = 0; i < fs.size(); ++i) {
      const std::string p = "fixed[" + std::to_string(i) + "]";
      if (!fs[i].is_object()) throw ValidationError(p, "expected an object");
      detail::reject_unknown_keys(fs[i], p, {"footprint", "pose"});
      FixedSpec f;
      f.footprint = detail::as_footprint(detail::need(fs[i], p, "footprint"), p + ".footprint");
      f.pose = detail::as_pose(detail::need(fs[i], p, "pose"), p + ".pose");
      s.fixed.push_back(std::move(f));
    }
  }
  {
    const auto& meta = detail::need(j, "", "meta");
    if (!meta.is_object()) throw ValidationError("meta", "expected an object");
    s.meta = meta;
  }

  validate_scene(s);
  return s;
}

inline nlohmann::json scene_to_json(const Scene& s) {
  nlohmann::json j;
  j["workspace"] = {{"x", {s.workspace.x_min, s.workspace.x_max}},
                    {"y", {s.workspace.y_min, s.workspace.y_max}}};
  j["slider"] = {
      {"footprint", detail::footprint_to_json(s.slider.footprint)},
      {"limit_surface",
       {{"force_scale", s.slider.force_scale}, {"moment_arm", s.slider.moment_arm}}},
      {"mu_p", s.slider.mu_p},
      {"f_bar", s.slider.f_bar},
      {"psi_dot_bar", s.slider.psi_dot_bar},
      {"psi_bar_per_face", s.slider.psi_bar_per_face},
      {"x0", {s.slider.x0.x, s.slider.x0.y, s.slider.x0.theta, s.slider.x0.psi_c}}};
  j["goal"] = {{"center", {s.goal.center.x, s.goal.center.y, s.goal.center.theta}},
               {"tol", {s.goal.tol_x, s.goal.tol_y, s.goal.tol_theta}}};
  j["movables"] = nlohmann::json::array();
  for (const auto& m : s.movables) {
    j["movables"].push_back(
        {{"footprint", detail::footprint_to_json(m.footprint)},
         {"limit_surface", {{"force_scale", m.force_scale}, {"moment_arm", m.moment_arm}}},
         {"mu", m.mu},
         {"pose", {m.pose.x, m.pose.y, m.pose.theta}}});
  }
  j["fixed"] = nlohmann::json::array();
  for (const auto& f : s.fixed) {
    j["fixed"].push_back({{"footprint", detail::footprint_to_json(f.footprint)},
                          {"pose", {f.pose.x, f.pose.y, f.pose.theta}}});
  }
  j["meta"] = s.meta;
  return j;
}

inline Scene parse_scene(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what());
  }
  return scene_from_json(j);
}

inline Scene load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scene file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scene(buf.str());
}

inline void save_scene(const Scene& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write scene file: " + path);
  out << scene_to_json(s).dump(2) << "\n";
}

}  // namespace pushplan
