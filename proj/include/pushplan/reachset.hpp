#pragma once

#include <algorithm>
#include <optional>
#include <random>
#include <vector>

#include "pushplan/dynamics.hpp"
#include "pushplan/qp.hpp"

namespace pushplan {

// One terminal cell: the states reachable in one planning period tau through
// contact face `face` under contact mode `mode`, unioned over a contact-
// azimuth band. The band is stored relative to the face-center azimuth.
//
// The cell factors into a pose set (slider x, y, theta displaced by the
// force part of the input, over the azimuth band) and a terminal-azimuth
// interval [term_lo, term_hi] (start azimuth plus tau times the mode's
// rate range). Distance to the cell adds the two parts in quadrature,
// which keeps the cell convex: the pose rows are affine in the forces and
// the moment arm varies monotonically along a flat face, so unions over
// the band fill in.
struct TerminalSet {
  size_t face = 0;
  ContactMode mode = ContactMode::Sticking;
  double rel_lo = 0.0;
  double rel_hi = 0.0;
  double term_lo = 0.0;  // terminal azimuth interval, face-relative
  double term_hi = 0.0;

  struct GridPoint {
    double psi = 0.0;  // absolute azimuth
    Eigen::Matrix<double, 4, 3> b = Eigen::Matrix<double, 4, 3>::Zero();
  };
  std::vector<GridPoint> grid;
  InputPolytope polytope;
  // Force-only rows of `polytope` (the rate enters no mixed row).
  Eigen::Matrix<double, Eigen::Dynamic, 2> d_force;
  Eigen::VectorXd h_force;
};

struct ReachableSet {
  const SliderModel* model = nullptr;
  SliderState origin;
  double tau = 0.05;
  std::vector<TerminalSet> cells;
  double pose_radius = 0.0;  // weighted pose-displacement bound over all cells
};

inline constexpr int kPsiGridPoints = 21;

// Azimuth-rate interval admitted by a contact mode.
inline std::pair<double, double> mode_rate_interval(const SliderModel& m, ContactMode mode) {
  switch (mode) {
    case ContactMode::Sticking:
      return {0.0, 0.0};
    case ContactMode::SlidingLeft:
      return {-m.psi_dot_bar, -kStrictSign};
    case ContactMode::SlidingRight:
      return {kStrictSign, m.psi_dot_bar};
  }
  return {0.0, 0.0};
}

// Union of 3N terminal cells around `x`. The contact band on the face that
// currently carries the pusher is centered on the state's own psi_c; other
// faces center on their face midpoint (the planner repositions the pusher
// when it switches faces).
inline ReachableSet build_reachable_set(const SliderModel& m, const SliderState& x,
                                        double tau, int grid_points = kPsiGridPoints) {
  ReachableSet rs;
  rs.model = &m;
  rs.origin = x;
  rs.tau = tau;
  const size_t cur_face = m.shape.face_of_azimuth(x.psi_c);
  const double half_band = tau * m.psi_dot_bar;

  std::array<InputPolytope, 3> polys;
  for (size_t j = 0; j < 3; ++j) polys[j] = mode_polytope(m, kAllModes[j]);

  double radius_sq = 0.0;
  const double f_norm = m.f_bar * std::sqrt(1.0 + m.mu_p * m.mu_p);
  const DistanceWeights w{};

  for (size_t i = 0; i < m.shape.face_count(); ++i) {
    const auto [allow_lo, allow_hi] = m.face_band(i);
    double center = 0.0;
    if (i == cur_face) center = std::clamp(m.shape.face_relative(i, x.psi_c), allow_lo, allow_hi);
    double lo = std::max(allow_lo, center - half_band);
    double hi = std::min(allow_hi, center + half_band);
    if (lo > hi) lo = hi = std::clamp(center, allow_lo, allow_hi);

    std::vector<TerminalSet::GridPoint> grid(static_cast<size_t>(grid_points));
    const double fc = m.shape.face_center_azimuth(i);
    for (int g = 0; g < grid_points; ++g) {
      const double rel =
          (grid_points == 1) ? lo : lo + (hi - lo) * g / double(grid_points - 1);
      const double psi = wrap_angle(fc + rel);
      grid[g].psi = psi;
      grid[g].b = linearize(m, SliderState{x.x, x.y, x.theta, psi});
      // Weighted pose reach through this grid point.
      Eigen::Matrix<double, 3, 2> ba = grid[g].b.topLeftCorner<3, 2>();
      ba.row(2) *= w.theta;
      const Eigen::Matrix2d gram = ba.transpose() * ba;
      const double tr = gram.trace();
      const double det = gram.determinant();
      const double lmax = 0.5 * (tr + std::sqrt(std::max(0.0, tr * tr - 4.0 * det)));
      radius_sq = std::max(radius_sq, lmax * f_norm * f_norm);
    }
    for (size_t j = 0; j < 3; ++j) {
      TerminalSet cell;
      cell.face = i;
      cell.mode = kAllModes[j];
      cell.rel_lo = lo;
      cell.rel_hi = hi;
      const auto [rate_lo, rate_hi] = mode_rate_interval(m, kAllModes[j]);
      cell.term_lo = lo + tau * rate_lo;
      cell.term_hi = hi + tau * rate_hi;
      cell.grid = grid;
      cell.polytope = polys[j];
      int nf = 0;
      for (int r = 0; r < cell.polytope.d.rows(); ++r) {
        if (std::abs(cell.polytope.d(r, 2)) < 1e-15) ++nf;
      }
      cell.d_force.resize(nf, 2);
      cell.h_force.resize(nf);
      for (int r = 0, k = 0; r < cell.polytope.d.rows(); ++r) {
        if (std::abs(cell.polytope.d(r, 2)) >= 1e-15) continue;
        cell.d_force.row(k) = cell.polytope.d.row(r).head<2>();
        cell.h_force[k] = cell.polytope.h[r];
        ++k;
      }
      rs.cells.push_back(std::move(cell));
    }
  }
  rs.pose_radius = tau * std::sqrt(radius_sq) * 1.0001 + 1e-12;
  return rs;
}

struct CellProjection {
  double distance = 1e300;
  Eigen::Vector3d u = Eigen::Vector3d::Zero();
  double psi = 0.0;
  SliderState x_proj;
};

struct ProjectionOptions {
  bool refine = true;
  // Stop as soon as a candidate at or below this distance is found.
  std::optional<double> membership_threshold;
  // Visit grid points nearest this azimuth first (useful with a threshold).
  std::optional<double> psi_hint;
};

namespace detail {

// Gap from an azimuth (face-relative, wrapped) to an interval on the circle,
// together with the interval point attaining it. Intervals are narrower than
// a half turn, so the minimum sits at an endpoint when the point is outside.
struct IntervalGap {
  double gap = 0.0;
  double rel = 0.0;
};

inline IntervalGap azimuth_interval_gap(double rel_q, double lo, double hi) {
  if (rel_q >= lo && rel_q <= hi) return {0.0, rel_q};
  const double d_lo = std::abs(wrap_angle(lo - rel_q));
  const double d_hi = std::abs(wrap_angle(hi - rel_q));
  return (d_lo <= d_hi) ? IntervalGap{d_lo, lo} : IntervalGap{d_hi, hi};
}

struct CellQpEval {
  double dist_sq = 1e300;
  Eigen::Vector3d u = Eigen::Vector3d::Zero();
  Eigen::Vector4d member = Eigen::Vector4d::Zero();
};

// Distance contribution at one start azimuth: a 2-variable QP over the
// contact forces for the pose part, plus the (azimuth-independent) gap to
// the cell's terminal-azimuth interval.
inline CellQpEval eval_cell_at_psi(const ReachableSet& rs, const TerminalSet& cell,
                                   double psi, const Eigen::Matrix<double, 4, 3>& b,
                                   const SliderState& query, const DistanceWeights& w,
                                   std::optional<double> early_sq) {
  const SliderState& o = rs.origin;
  const SliderModel& m = *rs.model;
  const double rel_q = m.shape.face_relative(cell.face, query.psi_c);
  const IntervalGap term = azimuth_interval_gap(rel_q, cell.term_lo, cell.term_hi);

  Eigen::Vector3d delta0(o.x - query.x, o.y - query.y, wrap_angle(o.theta - query.theta));
  const Eigen::Vector3d wd(w.pos, w.pos, w.theta);
  const Eigen::Matrix<double, 3, 2> bf = b.topLeftCorner<3, 2>();
  const Eigen::Matrix<double, 3, 2> wb = wd.asDiagonal() * bf;
  const double tau = rs.tau;
  const Eigen::Matrix2d h_qp = 2.0 * tau * tau * (wb.transpose() * wb);
  const Eigen::Vector3d wdelta = wd.cwiseProduct(wd).cwiseProduct(delta0);
  const Eigen::Vector2d c_qp = 2.0 * tau * (bf.transpose() * wdelta);
  const double const0 =
      delta0.cwiseProduct(wd).squaredNorm() + (w.psi * term.gap) * (w.psi * term.gap);

  std::optional<double> exit_val;
  if (early_sq) exit_val = *early_sq - const0;
  const SmallQpResult<2> qp =
      solve_qp_small<2>(h_qp, c_qp, cell.d_force, cell.h_force, exit_val);

  CellQpEval out;
  if (!qp.found) return out;
  out.dist_sq = std::max(0.0, const0 + qp.value);
  const auto [rate_lo, rate_hi] = mode_rate_interval(m, cell.mode);
  const double rel_here = m.shape.face_relative(cell.face, psi);
  out.u = Eigen::Vector3d(
      qp.x[0], qp.x[1], std::clamp((term.rel - rel_here) / tau, rate_lo, rate_hi));
  out.member.head<3>() = Eigen::Vector3d(o.x, o.y, o.theta) + tau * (bf * qp.x);
  out.member[3] = wrap_angle(m.shape.face_center_azimuth(cell.face) + term.rel);
  return out;
}

}  // namespace detail

// Exact distance from `query` to one terminal cell under the weighted
// metric: a force QP per azimuth grid point, then a golden-section polish
// of the azimuth around the best grid point. The pose objective is
// single-basin in the azimuth (the moment arm is monotone along a face),
// so the polish bracket of one grid spacing suffices.
inline CellProjection project_onto_cell(const ReachableSet& rs, const TerminalSet& cell,
                                        const SliderState& query,
                                        const DistanceWeights& w = {},
                                        const ProjectionOptions& opts = {}) {
  const SliderModel& m = *rs.model;
  const double fc = m.shape.face_center_azimuth(cell.face);
  CellProjection best;
  double best_sq = 1e300;
  int best_idx = -1;

  const int n = static_cast<int>(cell.grid.size());
  static thread_local std::vector<int> order;
  order.resize(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  if (opts.psi_hint) {
    const double hint = *opts.psi_hint;
    std::sort(order.begin(), order.end(), [&](int a, int bi) {
      return std::abs(wrap_angle(cell.grid[a].psi - hint)) <
             std::abs(wrap_angle(cell.grid[bi].psi - hint));
    });
  }
  const std::optional<double> thr_sq =
      opts.membership_threshold
          ? std::optional<double>((*opts.membership_threshold) * (*opts.membership_threshold))
          : std::nullopt;

  for (int oi = 0; oi < n; ++oi) {
    const int i = order[oi];
    const auto ev = detail::eval_cell_at_psi(rs, cell, cell.grid[i].psi, cell.grid[i].b,
                                             query, w, thr_sq);
    if (ev.dist_sq < best_sq) {
      best_sq = ev.dist_sq;
      best.u = ev.u;
      best.psi = cell.grid[i].psi;
      best.x_proj = SliderState::from_vec(ev.member);
      best_idx = i;
    }
    if (thr_sq && best_sq <= *thr_sq) {
      best.distance = std::sqrt(best_sq);
      return best;
    }
  }
  if (best_idx < 0) return best;

  if (opts.refine && n > 1) {
    // Golden-section over one grid spacing on either side of the winner.
    const double spacing = (cell.rel_hi - cell.rel_lo) / double(n - 1);
    const double rel_best = m.shape.face_relative(cell.face, best.psi);
    double a = std::max(cell.rel_lo, rel_best - spacing);
    double b = std::min(cell.rel_hi, rel_best + spacing);
    auto value_at = [&](double rel, detail::CellQpEval& ev) {
      const double psi = wrap_angle(fc + rel);
      const Eigen::Matrix<double, 4, 3> bm =
          linearize(m, SliderState{rs.origin.x, rs.origin.y, rs.origin.theta, psi});
      ev = detail::eval_cell_at_psi(rs, cell, psi, bm, query, w, thr_sq);
      return ev.dist_sq;
    };
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    detail::CellQpEval e1, e2;
    double f1 = value_at(x1, e1), f2 = value_at(x2, e2);
    for (int it = 0; it < 36 && (b - a) > 1e-10; ++it) {
      if (f1 < f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        e2 = e1;
        x1 = b - gr * (b - a);
        f1 = value_at(x1, e1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        e1 = e2;
        x2 = a + gr * (b - a);
        f2 = value_at(x2, e2);
      }
      const double fb = std::min(f1, f2);
      if (thr_sq && fb <= *thr_sq) break;
    }
    const detail::CellQpEval& ebest = (f1 < f2) ? e1 : e2;
    const double rbest = (f1 < f2) ? x1 : x2;
    if (ebest.dist_sq < best_sq) {
      best_sq = ebest.dist_sq;
      best.u = ebest.u;
      best.psi = wrap_angle(fc + rbest);
      best.x_proj = SliderState::from_vec(ebest.member);
    }
  }
  best.distance = std::sqrt(best_sq);
  return best;
}

struct NearestResult {
  size_t set_index = 0;
  size_t cell_index = 0;
  CellProjection proj;
};

// Exact nearest cell over a forest of reachable sets. Cells are pruned with
// a weighted lower bound (pose ball around the generating state plus the
// gap to the terminal-azimuth interval); surviving candidates get the
// exact projection.
inline NearestResult nearest_neighbor(const std::vector<const ReachableSet*>& sets,
                                      const SliderState& query,
                                      const DistanceWeights& w = {}) {
  struct NodeBound {
    size_t idx;
    double lb;
    double dpose;
  };
  static thread_local std::vector<NodeBound> bounds;
  bounds.clear();
  bounds.reserve(sets.size());
  for (size_t i = 0; i < sets.size(); ++i) {
    const SliderState& o = sets[i]->origin;
    const double dx = o.x - query.x, dy = o.y - query.y;
    const double dt = wrap_angle(o.theta - query.theta) * w.theta;
    const double dpose = std::sqrt(dx * dx + dy * dy + dt * dt);
    bounds.push_back({i, std::max(0.0, dpose - sets[i]->pose_radius), dpose});
  }
  std::sort(bounds.begin(), bounds.end(),
            [](const NodeBound& a, const NodeBound& b) { return a.lb < b.lb; });

  // Candidates within this margin of the incumbent get the refined pass; the
  // margin dominates the polish gain of the azimuth grid.
  constexpr double kRefineMargin = 2e-4;
  struct Candidate {
    size_t set, cell;
    double grid_dist;
  };
  static thread_local std::vector<Candidate> cands;
  cands.clear();
  double best_grid = 1e300;

  ProjectionOptions grid_only;
  grid_only.refine = false;

  for (const auto& nb : bounds) {
    if (nb.lb > best_grid + kRefineMargin) break;
    const ReachableSet& rs = *sets[nb.idx];
    const double pose_term = std::max(0.0, nb.dpose - rs.pose_radius);
    for (size_t c = 0; c < rs.cells.size(); ++c) {
      const TerminalSet& cell = rs.cells[c];
      const double rel_q = rs.model->shape.face_relative(cell.face, query.psi_c);
      const double gap =
          detail::azimuth_interval_gap(rel_q, cell.term_lo, cell.term_hi).gap;
      const double cell_lb = std::hypot(pose_term, w.psi * gap);
      if (cell_lb > best_grid + kRefineMargin) continue;
      const CellProjection p = project_onto_cell(rs, cell, query, w, grid_only);
      if (p.distance < best_grid) best_grid = p.distance;
      cands.push_back({nb.idx, c, p.distance});
    }
  }

  NearestResult out;
  out.proj.distance = 1e300;
  for (const auto& cd : cands) {
    if (cd.grid_dist > best_grid + kRefineMargin) continue;
    const ReachableSet& rs = *sets[cd.set];
    const CellProjection p = project_onto_cell(rs, rs.cells[cd.cell], query, w);
    if (p.distance < out.proj.distance) {
      out.set_index = cd.set;
      out.cell_index = cd.cell;
      out.proj = p;
    }
  }
  return out;
}

// Samples a feasible input inside the mode polytope (uniform over the mode's
// natural parameterization, not over the polytope volume).
inline Eigen::Vector3d sample_mode_input(const SliderModel& m, ContactMode mode,
                                         std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double fn = unit(rng) * m.f_bar;
  switch (mode) {
    case ContactMode::Sticking:
      return {fn, (2.0 * unit(rng) - 1.0) * m.mu_p * fn, 0.0};
    case ContactMode::SlidingLeft:
      return {fn, m.mu_p * fn,
              -(kStrictSign + unit(rng) * (m.psi_dot_bar - kStrictSign))};
    case ContactMode::SlidingRight:
      return {fn, -m.mu_p * fn,
              kStrictSign + unit(rng) * (m.psi_dot_bar - kStrictSign)};
  }
  return Eigen::Vector3d::Zero();
}

inline Eigen::Vector4d terminal_member(const ReachableSet& rs, const TerminalSet& cell,
                                       double psi, const Eigen::Vector3d& u) {
  const SliderState& o = rs.origin;
  const Eigen::Matrix<double, 4, 3> b =
      linearize(*rs.model, SliderState{o.x, o.y, o.theta, psi});
  return Eigen::Vector4d(o.x, o.y, o.theta, psi) + rs.tau * (b * u);
}

// Samples member states, forms random pairwise convex combinations, and
// checks every combination projects back into the cell within tol.
inline bool convexity_certificate(const ReachableSet& rs, const TerminalSet& cell,
                                  int n_samples, std::mt19937_64& rng,
                                  double tol = 1e-6, double* max_residual = nullptr) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, n_samples - 1);
  const double fc = rs.model->shape.face_center_azimuth(cell.face);

  std::vector<Eigen::Vector4d> members(n_samples);
  std::vector<double> psis(n_samples), rel4(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    const double rel = cell.rel_lo + unit(rng) * (cell.rel_hi - cell.rel_lo);
    psis[i] = wrap_angle(fc + rel);
    members[i] = terminal_member(rs, cell, psis[i], sample_mode_input(*rs.model, cell.mode, rng));
    rel4[i] = rs.model->shape.face_relative(cell.face, members[i][3]);
  }

  double worst = 0.0;
  bool ok = true;
  for (int i = 0; i < n_samples; ++i) {
    const int a = pick(rng), b = pick(rng);
    const double lam = unit(rng);
    Eigen::Vector4d xc = lam * members[a] + (1.0 - lam) * members[b];
    // Angles combine in the face-relative chart, where the band is an
    // interval; averaging raw values breaks across the wrap seam.
    xc[3] = wrap_angle(fc + lam * rel4[a] + (1.0 - lam) * rel4[b]);
    ProjectionOptions opts;
    opts.membership_threshold = tol;
    opts.psi_hint = wrap_angle(psis[a] + (1.0 - lam) * wrap_angle(psis[b] - psis[a]));
    const CellProjection p =
        project_onto_cell(rs, cell, SliderState::from_vec(xc), DistanceWeights{}, opts);
    worst = std::max(worst, p.distance);
    if (p.distance > tol) ok = false;
  }
  if (max_residual) *max_residual = worst;
  return ok;
}

}  // namespace pushplan
