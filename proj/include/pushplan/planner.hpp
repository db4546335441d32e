#pragma once

#include <chrono>
#include <cstring>
#include <memory>
#include <random>

#include "pushplan/connect.hpp"
#include "pushplan/interaction.hpp"
#include "pushplan/reachset.hpp"
#include "pushplan/scene.hpp"

namespace pushplan {

struct NodeNotInTree : std::runtime_error {
  explicit NodeNotInTree(int id)
      : std::runtime_error("node " + std::to_string(id) + " is not in the tree") {}
};

struct PlanParams {
  double tau = 0.05;
  double tau_lqr = 0.01;
  int n_max = 1000;
  double goal_bias = 0.1;
  uint64_t seed = 0;
  int max_iterations = 0;  // 0: ten iterations per allowed node
  double time_budget_s = 130.0;
  // Off: movable obstacles are frozen and treated as fixed (the ablation arm).
  bool contact_aware = true;

  int iteration_cap() const { return max_iterations > 0 ? max_iterations : 10 * n_max; }
};

struct PlanTask {
  Scene scene;
  SliderState x0;
  GoalRegion goal;
  PlanParams params;
};

inline PlanTask make_task(const Scene& scene, PlanParams params = {}) {
  return {scene, scene.slider.x0, scene.goal, params};
}

struct PlanNode {
  int id = 0;
  int parent = -1;
  SliderState state;
  size_t face = 0;         // contact face held over the incoming segment
  double start_psi = 0.0;  // contact azimuth after repositioning at segment start
  std::vector<PusherInput> controls;     // empty at the root
  std::vector<SliderState> fine_states;  // controls.size()+1 states at tau_lqr spacing
  std::vector<Pose2> scene;              // movable poses after the segment
  uint64_t scene_hash = 0;
  std::shared_ptr<ReachableSet> reachable;  // built on first nearest-neighbor query
};

namespace detail {

inline uint64_t pose_list_hash(const std::vector<Pose2>& poses) {
  uint64_t h = 1469598103934665603ull;
  auto mix = [&h](double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    h = (h ^ bits) * 1099511628211ull;
  };
  for (const auto& p : poses) {
    mix(p.x);
    mix(p.y);
    mix(p.theta);
  }
  return h;
}

}  // namespace detail

// Search state: one tree of slider nodes, each paired with the scene its
// segment produced. Lazily built reachable sets point into `model`, so a
// tree must not be relocated once extended.
struct PlanTree {
  SliderModel model;
  std::vector<ObstacleModel> movables;
  std::vector<PlacedPolygon> fixed_views;  // frozen movables included when contact-unaware
  std::vector<PlanNode> nodes;
  DistanceWeights weights;
  LqrConfig lqr;

  PlanTree() = default;
  PlanTree(const PlanTree&) = delete;
  PlanTree& operator=(const PlanTree&) = delete;
  PlanTree(PlanTree&&) = default;
  PlanTree& operator=(PlanTree&&) = default;
};

// The task must stay alive and in place while the tree is used: fixed-body
// views point into it.
inline PlanTree make_tree(const PlanTask& task) {
  PlanTree tree;
  tree.model = task.scene.slider.model();
  tree.movables = task.scene.movable_models();
  tree.fixed_views = task.scene.fixed_views();
  if (!task.params.contact_aware) {
    for (size_t i = 0; i < task.scene.movables.size(); ++i)
      tree.fixed_views.push_back({&task.scene.movables[i].footprint,
                                  task.scene.movables[i].pose});
  }

  PlanNode root;
  root.state = task.x0;
  root.face = tree.model.shape.face_of_azimuth(task.x0.psi_c);
  root.start_psi = task.x0.psi_c;
  root.fine_states = {task.x0};
  root.scene = task.scene.movable_poses();
  root.scene_hash = detail::pose_list_hash(root.scene);
  tree.nodes.push_back(std::move(root));
  return tree;
}

inline SliderState sample_state(const PlanTask& task, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) < task.params.goal_bias) {
    const double psi = (2.0 * unit(rng) - 1.0) * kPi;
    return {task.goal.center.x, task.goal.center.y, task.goal.center.theta, psi};
  }
  const Rect& ws = task.scene.workspace;
  const double x = ws.x_min + unit(rng) * ws.width();
  const double y = ws.y_min + unit(rng) * ws.height();
  const double theta = (2.0 * unit(rng) - 1.0) * kPi;
  const double psi = (2.0 * unit(rng) - 1.0) * kPi;
  return {x, y, theta, psi};
}

enum class RejectReason { Infeasible, Duplicate, FaceExit, NoCell };

struct ExtendOutcome {
  bool added = false;
  int node_id = -1;
  RejectReason reason = RejectReason::NoCell;
};

namespace detail {

inline void ensure_reachable(PlanTree& tree, const PlanParams& params) {
  for (auto& node : tree.nodes) {
    if (!node.reachable)
      node.reachable = std::make_shared<ReachableSet>(
          build_reachable_set(tree.model, node.state, params.tau));
  }
}

inline bool in_workspace(const Rect& ws, const std::vector<SliderState>& states) {
  for (const auto& s : states) {
    if (!ws.contains(s.x, s.y)) return false;
  }
  return true;
}

// Plays a connection rollout against the generating node's scene. In the
// contact-aware arm movables yield per the interaction model; otherwise they
// sit inside fixed_views already and any contact is fatal.
inline InteractionResult play_segment(const PlanTree& tree, const PlanNode& gen,
                                      const std::vector<SliderState>& states,
                                      bool contact_aware, double dt) {
  if (contact_aware)
    return simulate_interaction(tree.model.shape, states, tree.movables, gen.scene,
                                tree.fixed_views, dt);
  return simulate_interaction(tree.model.shape, states, {}, {}, tree.fixed_views, dt);
}

}  // namespace detail

// One tree-growth attempt toward x_new: nearest reachable cell, LQR
// connection from the generating state, contact simulation in that state's
// scene, then duplicate filtering.
inline ExtendOutcome extend(PlanTree& tree, const SliderState& x_new, const PlanTask& task) {
  const PlanParams& params = task.params;
  detail::ensure_reachable(tree, params);

  std::vector<const ReachableSet*> sets;
  sets.reserve(tree.nodes.size());
  for (const auto& n : tree.nodes) sets.push_back(n.reachable.get());

  const NearestResult nn = nearest_neighbor(sets, x_new, tree.weights);
  if (nn.proj.distance >= 1e300) return {false, -1, RejectReason::NoCell};

  const PlanNode& gen = tree.nodes[nn.set_index];
  const TerminalSet& cell = gen.reachable->cells[nn.cell_index];

  // Repositioning the pusher along the perimeter is free; the projection's
  // start azimuth carries both the within-face shift and face switches.
  SliderState start = gen.state;
  start.psi_c = nn.proj.psi;

  ConnectionResult conn;
  try {
    conn = connect(tree.model, start, cell.mode, nn.proj.x_proj, tree.lqr, params.tau_lqr,
                   tree.weights);
  } catch (const FaceExit&) {
    return {false, -1, RejectReason::FaceExit};
  }

  if (!detail::in_workspace(task.scene.workspace, conn.states))
    return {false, -1, RejectReason::Infeasible};

  const InteractionResult sim =
      detail::play_segment(tree, gen, conn.states, params.contact_aware, params.tau_lqr);
  if (!sim.feasible) return {false, -1, RejectReason::Infeasible};

  std::vector<Pose2> new_scene = params.contact_aware ? sim.movable_poses : gen.scene;
  const uint64_t h = detail::pose_list_hash(new_scene);
  for (const auto& node : tree.nodes) {
    if (node.scene_hash == h && tree.weights(node.state, conn.x_term) <= 1e-4)
      return {false, -1, RejectReason::Duplicate};
  }

  PlanNode node;
  node.id = static_cast<int>(tree.nodes.size());
  node.parent = static_cast<int>(nn.set_index);
  node.state = conn.x_term;
  node.face = cell.face;
  node.start_psi = start.psi_c;
  node.controls = conn.controls;
  node.fine_states = conn.states;
  node.scene = std::move(new_scene);
  node.scene_hash = h;
  tree.nodes.push_back(std::move(node));
  return {true, tree.nodes.back().id, RejectReason::NoCell};
}

struct PathSegment {
  size_t face = 0;
  double start_psi = 0.0;
  std::vector<PusherInput> controls;
  std::vector<SliderState> states;  // controls.size()+1, repositioned start included
};

struct ExtractedPath {
  std::vector<SliderState> states;  // node states, root first
  std::vector<PusherInput> controls;
  std::vector<std::vector<Pose2>> scenes;
  std::vector<PathSegment> segments;
  double length = 0.0;
};

inline ExtractedPath extract_path(const PlanTree& tree, int node_id) {
  if (node_id < 0 || node_id >= static_cast<int>(tree.nodes.size()))
    throw NodeNotInTree(node_id);
  std::vector<int> chain;
  for (int id = node_id; id >= 0; id = tree.nodes[id].parent) chain.push_back(id);
  std::reverse(chain.begin(), chain.end());

  ExtractedPath out;
  for (size_t i = 0; i < chain.size(); ++i) {
    const PlanNode& node = tree.nodes[chain[i]];
    out.states.push_back(node.state);
    out.scenes.push_back(node.scene);
    if (i > 0) {
      out.controls.insert(out.controls.end(), node.controls.begin(), node.controls.end());
      out.segments.push_back({node.face, node.start_psi, node.controls, node.fine_states});
      const SliderState& prev = out.states[i - 1];
      out.length += std::hypot(node.state.x - prev.x, node.state.y - prev.y);
    }
  }
  return out;
}

struct PlanStats {
  int nodes_in_tree = 0;
  int iterations = 0;
  double wall_time_s = 0.0;
  double path_length_m = 0.0;
};

struct PlanResult {
  bool success = false;
  std::vector<SliderState> states;
  std::vector<PusherInput> controls;
  std::vector<std::vector<Pose2>> scenes_along_path;
  std::vector<PathSegment> segments;
  PlanStats stats;
};

namespace detail {

inline PlanResult finish_plan(const PlanTree& tree, int goal_node, const PlanStats& stats) {
  PlanResult out;
  out.success = true;
  ExtractedPath path = extract_path(tree, goal_node);
  out.states = std::move(path.states);
  out.controls = std::move(path.controls);
  out.scenes_along_path = std::move(path.scenes);
  out.segments = std::move(path.segments);
  out.stats = stats;
  out.stats.path_length_m = path.length;
  return out;
}

}  // namespace detail

// Grow until the goal region connects, the node or iteration budget runs
// out, or the wall clock expires. Deterministic for a fixed seed except for
// the wall-clock stop.
inline PlanResult plan(const PlanTask& task) {
  const auto t0 = std::chrono::steady_clock::now();
  const PlanParams& params = task.params;
  auto elapsed = [&t0] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  PlanTree tree = make_tree(task);
  std::mt19937_64 rng(params.seed);
  PlanStats stats;
  stats.nodes_in_tree = 1;

  if (task.goal.contains(task.x0)) {
    stats.wall_time_s = elapsed();
    return detail::finish_plan(tree, 0, stats);
  }

  const int iter_cap = params.iteration_cap();
  while (stats.iterations < iter_cap &&
         stats.nodes_in_tree < params.n_max &&
         elapsed() < params.time_budget_s) {
    ++stats.iterations;
    const SliderState x_new = sample_state(task, rng);
    const ExtendOutcome out = extend(tree, x_new, task);
    if (!out.added) continue;
    stats.nodes_in_tree = static_cast<int>(tree.nodes.size());

    PlanNode& node = tree.nodes[out.node_id];
    if (!node.reachable)
      node.reachable = std::make_shared<ReachableSet>(
          build_reachable_set(tree.model, node.state, params.tau));

    ConnectionResult goal_conn;
    try {
      goal_conn = connect_goal(*node.reachable, task.goal, tree.lqr, params.tau_lqr,
                               tree.weights);
    } catch (const FaceExit&) {
      continue;
    }
    if (!goal_conn.reached) continue;

    if (goal_conn.controls.empty()) {
      stats.wall_time_s = elapsed();
      return detail::finish_plan(tree, out.node_id, stats);
    }
    if (stats.nodes_in_tree >= params.n_max) continue;
    if (!detail::in_workspace(task.scene.workspace, goal_conn.states)) continue;
    const InteractionResult sim = detail::play_segment(
        tree, node, goal_conn.states, params.contact_aware, params.tau_lqr);
    if (!sim.feasible) continue;

    PlanNode goal_node;
    goal_node.id = static_cast<int>(tree.nodes.size());
    goal_node.parent = out.node_id;
    goal_node.state = goal_conn.x_term;
    goal_node.face = tree.model.shape.face_of_azimuth(goal_conn.states.front().psi_c);
    goal_node.start_psi = goal_conn.states.front().psi_c;
    goal_node.controls = goal_conn.controls;
    goal_node.fine_states = goal_conn.states;
    goal_node.scene = params.contact_aware ? sim.movable_poses : node.scene;
    goal_node.scene_hash = detail::pose_list_hash(goal_node.scene);
    tree.nodes.push_back(std::move(goal_node));
    stats.nodes_in_tree = static_cast<int>(tree.nodes.size());
    stats.wall_time_s = elapsed();
    return detail::finish_plan(tree, tree.nodes.back().id, stats);
  }

  PlanResult out;
  out.stats = stats;
  out.stats.wall_time_s = elapsed();
  return out;
}

}  // namespace pushplan
