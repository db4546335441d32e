#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "pushplan/dynamics.hpp"
#include "test_util.hpp"

using namespace pushplan;

TEST_CASE("limit surface matrix on the default slider", "[dynamics]") {
  auto model = make_default_slider();
  const double fs = 1.2;
  const double c = model.shape.mean_radius();
  CHECK(model.limit(0, 0) == Catch::Approx(1.0 / (fs * fs)));
  CHECK(model.limit(1, 1) == Catch::Approx(1.0 / (fs * fs)));
  CHECK(model.limit(2, 2) == Catch::Approx(1.0 / (c * c * fs * fs)));
  // Exact mean centroid distance for the 0.15 x 0.08 footprint.
  CHECK(c == Catch::Approx(0.04523).margin(5e-5));
}

TEST_CASE("contact jacobian at the back face of a unit square", "[dynamics]") {
  auto model = make_rectangle_slider(1.0, 1.0, 1.2, 0.2, 0.15, 1.0);
  const auto geom = contact_jacobian(model, kPi);
  // Pushing at (-0.5, 0): inward normal +x, tangent +y, wrench arm -0.5.
  Eigen::Vector2d f(1.0, 0.0);
  Eigen::Vector3d w = geom.jacobian.transpose() * f;
  CHECK(w.x() == Catch::Approx(1.0));
  CHECK(w.y() == Catch::Approx(0.0).margin(1e-12));
  CHECK(w.z() == Catch::Approx(0.0).margin(1e-12));
  f << 0.0, 1.0;
  w = geom.jacobian.transpose() * f;
  CHECK(w.x() == Catch::Approx(0.0).margin(1e-12));
  CHECK(w.y() == Catch::Approx(1.0));
  CHECK(w.z() == Catch::Approx(-0.5));
}

TEST_CASE("pushes never extract energy through the limit surface", "[dynamics]") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int done = 0;
  while (done < 300) {
    auto model = test_util::random_slider(rng);
    SliderState x;
    try {
      x = test_util::random_state(model, rng);
    } catch (const std::domain_error&) {
      continue;
    }
    ++done;
    const auto geom = contact_jacobian(model, x.psi_c);
    Eigen::Vector2d f(unit(rng), 2.0 * (unit(rng) - 0.5));
    const Eigen::Vector3d wrench = geom.jacobian.transpose() * f;
    // f' J A J' f >= 0: the limit surface is positive semidefinite.
    CHECK(wrench.dot(model.limit * wrench) >= -1e-12);
  }
}

TEST_CASE("dynamics rotate with the body frame", "[dynamics]") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto model = make_default_slider();
  for (int i = 0; i < 100; ++i) {
    SliderState x{unit(rng), unit(rng), 4.0 * (unit(rng) - 0.5), kPi};
    PusherInput u{0.1 * unit(rng), 0.02 * (unit(rng) - 0.5), 0.0};
    const auto rate = eval_dynamics(model, x, u);
    SliderState x0 = x;
    x0.theta = 0.0;
    const auto rate0 = eval_dynamics(model, x0, u);
    const Eigen::Vector2d got(rate[0], rate[1]);
    const Eigen::Vector2d expect = rotation2(x.theta) * Eigen::Vector2d(rate0[0], rate0[1]);
    CHECK((got - expect).norm() < 1e-12);
    CHECK(rate[2] == Catch::Approx(rate0[2]).margin(1e-12));
    CHECK(rate[3] == Catch::Approx(u.psi_dot).margin(1e-15));
  }
}

TEST_CASE("linearization matches central differences in the input", "[dynamics]") {
  std::mt19937_64 rng(17);
  int done = 0;
  while (done < 200) {
    auto model = test_util::random_slider(rng);
    SliderState x;
    try {
      x = test_util::random_state(model, rng);
    } catch (const std::domain_error&) {
      continue;
    }
    ++done;
    const Eigen::Matrix<double, 4, 3> B = linearize(model, x);
    const double h = 1e-6;
    for (int k = 0; k < 3; ++k) {
      Eigen::Vector3d up = Eigen::Vector3d::Zero(), dn = Eigen::Vector3d::Zero();
      up[k] = h;
      dn[k] = -h;
      const auto rp = eval_dynamics(model, x, PusherInput{up[0], up[1], up[2]});
      const auto rm = eval_dynamics(model, x, PusherInput{dn[0], dn[1], dn[2]});
      const Eigen::Vector4d fd = (rp - rm) / (2.0 * h);
      CHECK((fd - B.col(k)).norm() < 1e-6);
    }
  }
}

TEST_CASE("mode polytopes admit their own samples and exclude others", "[dynamics]") {
  auto model = make_default_slider();
  const auto stick = mode_polytope(model, ContactMode::Sticking);
  const auto left = mode_polytope(model, ContactMode::SlidingLeft);
  const auto right = mode_polytope(model, ContactMode::SlidingRight);

  // Interior sticking push.
  CHECK(stick.contains(Eigen::Vector3d(0.1, 0.0, 0.0)));
  CHECK(stick.contains(Eigen::Vector3d(0.1, 0.019, 0.0)));
  CHECK_FALSE(stick.contains(Eigen::Vector3d(0.1, 0.021, 0.0)));   // outside cone
  CHECK_FALSE(stick.contains(Eigen::Vector3d(0.16, 0.0, 0.0)));    // above force cap
  CHECK_FALSE(stick.contains(Eigen::Vector3d(-0.01, 0.0, 0.0)));   // pulling
  CHECK_FALSE(stick.contains(Eigen::Vector3d(0.1, 0.0, 0.5)));     // pivot moves

  // Left slide rides the +mu edge and needs a negative pivot rate.
  CHECK(left.contains(Eigen::Vector3d(0.1, 0.02, -0.5)));
  CHECK_FALSE(left.contains(Eigen::Vector3d(0.1, 0.02, 0.5)));
  CHECK_FALSE(left.contains(Eigen::Vector3d(0.1, 0.0, -0.5)));   // not on edge
  CHECK_FALSE(left.contains(Eigen::Vector3d(0.1, -0.02, -0.5)));

  CHECK(right.contains(Eigen::Vector3d(0.1, -0.02, 0.5)));
  CHECK_FALSE(right.contains(Eigen::Vector3d(0.1, -0.02, -0.5)));
  CHECK_FALSE(right.contains(Eigen::Vector3d(0.1, 0.02, 0.5)));
}

TEST_CASE("constant-input rollout without rotation integrates exactly", "[dynamics]") {
  auto model = make_default_slider();
  // theta stays 0 when pushing dead center on the back face with no torque,
  // so RK4 reproduces the constant-velocity solution to round-off.
  SliderState x{0.0, 0.0, 0.0, kPi};
  PusherInput u{0.1, 0.0, 0.0};
  const double dt = 0.01;
  const int steps = 50;
  const auto traj = rollout(model, x, u, dt, steps);
  REQUIRE(traj.size() == size_t(steps + 1));
  const double vx = model.limit(0, 0) * 0.1;
  for (int k = 0; k <= steps; ++k) {
    CHECK(traj[k].x == Catch::Approx(k * dt * vx).margin(1e-12));
    CHECK(traj[k].y == Catch::Approx(0.0).margin(1e-12));
    CHECK(traj[k].theta == Catch::Approx(0.0).margin(1e-12));
  }
}

TEST_CASE("integrator shows fourth-order step-halving convergence", "[dynamics]") {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int done = 0;
  while (done < 20) {
    auto model = test_util::random_slider(rng);
    SliderState x;
    try {
      x = test_util::random_state(model, rng);
    } catch (const std::domain_error&) {
      continue;
    }
    // Torque-rich sticking push keeps theta moving so truncation error exists.
    const auto u = PusherInput::clamped(model, 0.8 * model.f_bar * unit(rng) + 0.1 * model.f_bar,
                                       0.05 * model.mu_p * model.f_bar * (unit(rng) - 0.5),
                                       0.0);
    const double T = 0.4;
    SliderState xh = x, xh2 = x, xh4 = x;
    bool exited = false;
    try {
      for (int k = 0; k < 40; ++k) xh = rk4_step(model, xh, u, T / 40.0);
      for (int k = 0; k < 80; ++k) xh2 = rk4_step(model, xh2, u, T / 80.0);
      for (int k = 0; k < 160; ++k) xh4 = rk4_step(model, xh4, u, T / 160.0);
    } catch (const FaceExit&) {
      exited = true;
    }
    if (exited) continue;
    const Eigen::Vector4d e1 = xh.vec() - xh4.vec();
    const Eigen::Vector4d e2 = xh2.vec() - xh4.vec();
    if (e2.head<3>().norm() < 1e-13) continue;  // too smooth to resolve
    ++done;
    const double ratio = e1.head<3>().norm() / e2.head<3>().norm();
    // Richardson: halving dt should shrink error ~2^4 with the finer run as truth,
    // i.e. |x_h - x_ref| / |x_h/2 - x_ref| ~ 16/(1 - 1/16) banded generously.
    CHECK(ratio > 12.0);
    CHECK(ratio < 20.0);
  }
}

TEST_CASE("pivot sweep off the face raises the exit signal", "[dynamics]") {
  auto model = make_default_slider();
  SliderState x{0.0, 0.0, 0.0, kPi};
  PusherInput u{0.05, -0.01, 0.9};  // sweep toward the face edge
  bool exited = false;
  double last_psi = x.psi_c;
  try {
    for (int k = 0; k < 200; ++k) {
      x = rk4_step(model, x, u, 0.01);
      last_psi = x.psi_c;
    }
  } catch (const FaceExit& e) {
    exited = true;
    const auto band = model.face_band(2);
    CHECK(std::abs(model.shape.face_relative(2, e.psi_c)) >=
          std::min(std::abs(band.first), std::abs(band.second)) - 1e-6);
  }
  CHECK(exited);
  (void)last_psi;
}

TEST_CASE("state vector round trip wraps angles", "[dynamics]") {
  SliderState x{1.0, -2.0, 3.5, kPi};
  const auto v = x.vec();
  const auto back = SliderState::from_vec(v);
  CHECK(back.x == 1.0);
  CHECK(back.theta == Catch::Approx(wrap_angle(3.5)));
  CHECK(back.psi_c == Catch::Approx(kPi));
}

TEST_CASE("distance weights form a wrapped weighted metric", "[dynamics]") {
  DistanceWeights w;
  SliderState a{0.0, 0.0, kPi - 0.05, 0.0};
  SliderState b{0.0, 0.0, -kPi + 0.05, 0.0};
  CHECK(w(a, b) == Catch::Approx(0.1 * 0.1));  // wraps through pi
  SliderState c{3.0, 4.0, 0.0, 0.0};
  SliderState o{0.0, 0.0, 0.0, 0.0};
  CHECK(w(c, o) == Catch::Approx(5.0));
}

TEST_CASE("checked inputs enforce the actuation box", "[dynamics]") {
  auto model = make_default_slider();
  CHECK_THROWS_AS(PusherInput::checked(model, 0.2, 0.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(PusherInput::checked(model, -0.01, 0.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(PusherInput::checked(model, 0.1, 0.0, 1.5), std::invalid_argument);
  const auto u = PusherInput::checked(model, 0.15 + 5e-8, 0.0, 0.0);
  CHECK(u.fn == Catch::Approx(0.15));
  const auto v = PusherInput::clamped(model, 0.5, -0.4, 2.0);
  CHECK(v.fn == Catch::Approx(model.f_bar));
  CHECK(v.psi_dot == Catch::Approx(model.psi_dot_bar));
}
