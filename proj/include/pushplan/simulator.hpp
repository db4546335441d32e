#pragma once

#include <functional>

#include "pushplan/interaction.hpp"
#include "pushplan/scene.hpp"

namespace pushplan {

enum class Integrator { Rk2, Euler };

// Additive state-rate disturbance active on [t0, t1). Overlapping windows
// sum. The fourth component acts on the contact azimuth and is normally
// zero.
struct DisturbanceWindow {
  double t0 = 0.0;
  double t1 = 0.0;
  Eigen::Vector4d d = Eigen::Vector4d::Zero();
};

using DisturbanceSchedule = std::vector<DisturbanceWindow>;

inline Eigen::Vector4d scheduled_disturbance(const DisturbanceSchedule& schedule, double t) {
  Eigen::Vector4d d = Eigen::Vector4d::Zero();
  for (const auto& w : schedule) {
    if (t >= w.t0 && t < w.t1) d += w.d;
  }
  return d;
}

struct WorldState {
  SliderState slider;
  std::vector<Pose2> movables;
  double time = 0.0;
  bool faulted = false;
  std::string fault;
};

struct StepRecord {
  Eigen::Vector3d reaction = Eigen::Vector3d::Zero();  // world wrench on the slider
  bool in_contact = false;
  bool faulted = false;
};

// Plant for closed-loop runs: slider dynamics under the commanded input plus
// scheduled disturbances, movable obstacles yielding through the contact
// model, fixed obstacles fatal on touch. Owns every shape it references.
struct World {
  SliderModel model;
  std::vector<ObstacleModel> movables;
  std::vector<ConvexPolygon> fixed_shapes;
  std::vector<Pose2> fixed_poses;
  DisturbanceSchedule schedule;
  Integrator integrator = Integrator::Rk2;
  WorldState state;
};

inline World make_world(const Scene& scene) {
  World w;
  w.model = scene.slider.model();
  w.movables = scene.movable_models();
  for (const auto& f : scene.fixed) {
    w.fixed_shapes.push_back(f.footprint);
    w.fixed_poses.push_back(f.pose);
  }
  w.state.slider = scene.slider.x0;
  w.state.movables = scene.movable_poses();
  return w;
}

namespace detail {

// World-frame pose rate the limit surface yields for a world reaction
// wrench taken about the slider centroid.
inline Eigen::Vector4d reaction_rate(const SliderModel& m, double theta,
                                     const Eigen::Vector3d& wrench_world) {
  const Eigen::Matrix2d rot = rotation2(theta);
  Eigen::Vector3d wrench_body;
  wrench_body.head<2>() = rot.transpose() * wrench_world.head<2>();
  wrench_body[2] = wrench_world[2];
  Eigen::Vector4d rate = Eigen::Vector4d::Zero();
  rate.head<3>() = rotation3(theta) * (m.limit * wrench_body);
  return rate;
}

inline Eigen::Vector4d integrate_slider(const SliderModel& m, const Eigen::Vector4d& v,
                                        size_t face, const PusherInput& u,
                                        const Eigen::Vector4d& extra, double dt,
                                        Integrator integrator) {
  const Eigen::Vector4d k1 = rate_clamped(m, v, face, u) + extra;
  if (integrator == Integrator::Euler) return v + dt * k1;
  const Eigen::Vector4d k2 = rate_clamped(m, v + 0.5 * dt * k1, face, u) + extra;
  return v + dt * k2;
}

}  // namespace detail

// One control period. The contact face is held for the whole step and the
// azimuth is clamped to it, so unlike the planning integrator nothing
// throws; face changes between steps are the controller's move. A fault
// freezes the world permanently.
inline StepRecord step(World& w, const PusherInput& u, double dt) {
  StepRecord rec;
  if (w.state.faulted) {
    rec.faulted = true;
    return rec;
  }

  const Eigen::Vector4d d = scheduled_disturbance(w.schedule, w.state.time);
  const SliderState x0 = w.state.slider;
  const size_t face = w.model.shape.face_of_azimuth(x0.psi_c);
  const Eigen::Vector4d v0 = x0.vec();

  const Eigen::Vector4d v_nom =
      detail::integrate_slider(w.model, v0, face, u, d, dt, w.integrator);

  std::vector<PlacedPolygon> fixed;
  fixed.reserve(w.fixed_shapes.size());
  for (size_t i = 0; i < w.fixed_shapes.size(); ++i)
    fixed.push_back({&w.fixed_shapes[i], w.fixed_poses[i]});

  const std::vector<SliderState> traj{x0, SliderState::from_vec(v_nom)};
  const InteractionResult res =
      simulate_interaction(w.model.shape, traj, w.movables, w.state.movables, fixed, dt);
  if (!res.feasible) {
    w.state.faulted = true;
    w.state.fault = res.fault;
    rec.faulted = true;
    return rec;
  }

  Eigen::Vector4d v1 = v_nom;
  if (!res.reaction.empty() && res.in_contact[0]) {
    // The reaction wrench is frozen over the step; obstacle poses keep the
    // nominal-trajectory outcome (one-way coupling).
    const Eigen::Vector4d extra =
        d + detail::reaction_rate(w.model, x0.theta, res.reaction[0]);
    v1 = detail::integrate_slider(w.model, v0, face, u, extra, dt, w.integrator);
    rec.reaction = res.reaction[0];
    rec.in_contact = true;
  }

  w.state.slider = SliderState::from_vec(v1);
  w.state.slider.theta = wrap_angle(w.state.slider.theta);
  w.state.slider.psi_c = wrap_angle(w.state.slider.psi_c);
  w.state.movables = res.movable_poses;
  w.state.time += dt;
  return rec;
}

struct EpisodeLog {
  std::vector<double> times;               // state timestamps, n_steps + 1
  std::vector<SliderState> states;
  std::vector<std::vector<Pose2>> movables;
  std::vector<PusherInput> inputs;         // one per step
  std::vector<StepRecord> records;
  bool faulted = false;
  std::string fault;
};

// Rolls the world under a control policy, recording every state. Faults end
// the run early with the log intact.
inline EpisodeLog run_episode(World& w,
                              const std::function<PusherInput(double, const WorldState&)>& policy,
                              int n_steps, double dt) {
  EpisodeLog log;
  log.times.push_back(w.state.time);
  log.states.push_back(w.state.slider);
  log.movables.push_back(w.state.movables);
  for (int k = 0; k < n_steps; ++k) {
    const PusherInput u = policy(w.state.time, w.state);
    const StepRecord rec = step(w, u, dt);
    log.inputs.push_back(u);
    log.records.push_back(rec);
    if (rec.faulted) {
      log.faulted = true;
      log.fault = w.state.fault;
      break;
    }
    log.times.push_back(w.state.time);
    log.states.push_back(w.state.slider);
    log.movables.push_back(w.state.movables);
  }
  return log;
}

}  // namespace pushplan
