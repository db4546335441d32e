#pragma once

#include <random>

#include "pushplan/scene.hpp"

namespace pushplan {

// Five parametric scene families on a 0.9 x 0.7 m workspace, seed-jittered
// within validity. Qualitative structure per family:
//   0  one movable cube fully blocking the only corridor (clearance required)
//   1  two staggered cubes blocking a longer corridor (clearance required)
//   2  cube parked on the direct route, wide detour available (accelerable)
//   3  fixed slab forcing the upper half, cube narrowing it (accelerable)
//   4  fixed corridor with a feasible gap, no movables (avoidance only)
inline Scene generate_scene(int family, uint64_t seed) {
  if (family < 0 || family > 4) throw std::invalid_argument("scene family must be 0..4");
  std::mt19937_64 rng(0x5ce11e5ull * (family + 1) + seed);
  auto jit = [&rng](double half) {
    return std::uniform_real_distribution<double>(-half, half)(rng);
  };

  Scene s;
  s.workspace = {0.0, 0.9, -0.35, 0.35};
  s.slider.x0 = {0.12, jit(0.015), 0.0, kPi};
  s.goal.center = {0.78, jit(0.015), 0.0};
  s.goal.tol_x = s.goal.tol_y = 0.03;
  s.goal.tol_theta = kPi;
  s.meta = {{"family", family}, {"seed", seed}};

  auto slab = [](double cx, double cy, double sx, double sy) {
    return FixedSpec{ConvexPolygon::box(sx, sy), {cx, cy, 0.0}};
  };
  auto cube = [](double cx, double cy) {
    MovableSpec m;
    m.pose = {cx, cy, 0.0};
    return m;
  };

  const double wx = 0.40 + jit(0.01);  // corridor station
  switch (family) {
    case 0: {
      // Gap 0.16, cube 0.122 across: 0.038 of slack is less than the slider
      // short edge, so the cube has to move.
      const double gap = 0.16;
      const double wall = 0.5 * (0.7 - gap);
      s.fixed.push_back(slab(wx, 0.35 - 0.5 * wall, 0.10, wall));
      s.fixed.push_back(slab(wx, -0.35 + 0.5 * wall, 0.10, wall));
      s.movables.push_back(cube(wx, jit(0.012)));
      break;
    }
    case 1: {
      // Gap 0.18 with two staggered cubes; each leaves at most 0.056 of
      // passage, and clearing the first chains into the second.
      const double gap = 0.18;
      const double wall = 0.5 * (0.7 - gap);
      s.fixed.push_back(slab(wx, 0.35 - 0.5 * wall, 0.20, wall));
      s.fixed.push_back(slab(wx, -0.35 + 0.5 * wall, 0.20, wall));
      const double off = 0.015 + 0.012 * std::uniform_real_distribution<double>(0, 1)(rng);
      s.movables.push_back(cube(wx - 0.05 + jit(0.0015), off));
      s.movables.push_back(cube(wx + 0.05 + jit(0.0015), -off));
      break;
    }
    case 2: {
      const double cx = 0.45 + jit(0.01);
      s.fixed.push_back(slab(cx, 0.28 + jit(0.01), 0.10, 0.10));
      s.fixed.push_back(slab(cx, -0.28 + jit(0.01), 0.10, 0.10));
      s.movables.push_back(cube(cx, jit(0.01)));
      break;
    }
    case 3: {
      s.fixed.push_back(slab(wx, -0.175, 0.10, 0.35));
      s.movables.push_back(cube(wx, 0.10 + jit(0.01)));
      break;
    }
    case 4: {
      const double gap = 0.13;
      const double cy = jit(0.01);
      const double top = cy + 0.5 * gap;
      const double bot = cy - 0.5 * gap;
      s.fixed.push_back(slab(wx, 0.5 * (top + 0.35), 0.10, 0.35 - top));
      s.fixed.push_back(slab(wx, 0.5 * (bot - 0.35), 0.10, bot + 0.35));
      break;
    }
  }

  validate_scene(s);
  return s;
}

}  // namespace pushplan
