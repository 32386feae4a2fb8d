//! Candidate firing positions, grid path planning and path following.
//!
//! Candidate points: 180 evenly spaced samples on a circle of the best
//! shooting distance around an opponent, filtered for clearance, clustered
//! with K-means and snapped back onto the surviving samples. Paths come
//! from 8-connected A* over the inflated occupancy grid and are tracked by
//! a lookahead pursuit controller with a trapezoidal speed limit.

use crate::arena::{Arena, OccupancyGrid};
use crate::dynamics::{Twist, MAX_ANGULAR_SPEED, MAX_LINEAR_SPEED};
use crate::geometry::{wrap_angle, Point, Pose};
use crate::world::WorldState;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::f64::consts::{PI, SQRT_2};
use thiserror::Error;

pub const CIRCLE_SAMPLES: usize = 180;
pub const DEFAULT_BEST_DISTANCE: f64 = 1.5;
pub const DEFAULT_CANDIDATES: usize = 4;
pub const KMEANS_MAX_ITER: usize = 50;
pub const LOOKAHEAD: f64 = 0.4;
pub const GOAL_TOLERANCE: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("k-means needs at least one point")]
    EmptyInput,
    #[error("k-means asked for {k} clusters from {n} points")]
    TooFewPoints { k: usize, n: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("opponent {0} is destroyed")]
    OpponentDead(usize),
    #[error("start cell ({0}, {1}) is blocked")]
    StartBlocked(usize, usize),
    #[error("grid has no free cell")]
    NoFreeCell,
}

/// Planner settings shared by bots and learning agents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    /// Radius of the candidate circle (best shooting distance), meters.
    pub best_distance: f64,
    /// Candidate points per opponent.
    pub k: usize,
    pub v_max: f64,
    pub a_max: f64,
    /// Proportional gain of the heading controller.
    pub aim_gain: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            best_distance: DEFAULT_BEST_DISTANCE,
            k: DEFAULT_CANDIDATES,
            v_max: MAX_LINEAR_SPEED,
            a_max: 2.0,
            aim_gain: 3.0,
        }
    }
}

/// Deterministic K-means. Farthest-point initialization from a seeded first
/// pick, Lloyd iterations until the assignment stops changing, empty
/// clusters reseeded to the worst-fit point. Centers are returned sorted by
/// angle about the centroid of the input.
pub fn kmeans(points: &[Point], k: usize, seed: u64, max_iter: usize) -> Result<Vec<Point>, PlanError> {
    let n = points.len();
    if n == 0 {
        return Err(PlanError::EmptyInput);
    }
    if k == 0 {
        return Err(PlanError::ZeroK);
    }
    if k > n {
        return Err(PlanError::TooFewPoints { k, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![points[rng.random_range(0..n)]];
    let mut nearest: Vec<f64> = points.iter().map(|p| p.dist_sq(centers[0])).collect();
    while centers.len() < k {
        let far = argmax_first(&nearest);
        let c = points[far];
        centers.push(c);
        for (d, p) in nearest.iter_mut().zip(points) {
            *d = d.min(p.dist_sq(c));
        }
    }

    let mut assign = vec![usize::MAX; n];
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (j, c) in centers.iter().enumerate() {
                let d = p.dist_sq(*c);
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![(0.0, 0.0, 0usize); k];
        for (p, &a) in points.iter().zip(&assign) {
            sums[a].0 += p.x;
            sums[a].1 += p.y;
            sums[a].2 += 1;
        }
        for j in 0..k {
            let (sx, sy, cnt) = sums[j];
            if cnt > 0 {
                centers[j] = Point::new(sx / cnt as f64, sy / cnt as f64);
            } else {
                let fit: Vec<f64> = points
                    .iter()
                    .zip(&assign)
                    .map(|(p, &a)| p.dist_sq(centers[a]))
                    .collect();
                let worst = argmax_first(&fit);
                centers[j] = points[worst];
                // mark for reassignment on the next pass
                assign[worst] = usize::MAX;
            }
        }
    }

    let mean = {
        let (sx, sy) = points.iter().fold((0.0, 0.0), |(x, y), p| (x + p.x, y + p.y));
        Point::new(sx / n as f64, sy / n as f64)
    };
    centers.sort_by(|a, b| {
        let (aa, ab) = (mean.bearing_to(*a), mean.bearing_to(*b));
        aa.total_cmp(&ab)
            .then(a.x.total_cmp(&b.x))
            .then(a.y.total_cmp(&b.y))
    });
    Ok(centers)
}

fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Candidate firing positions around one opponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub opponent: usize,
    pub points: Vec<Point>,
    /// Index of each point among the circle samples (`None` for fallback
    /// points).
    pub sample_index: Vec<Option<usize>>,
    pub seed: u64,
    /// Fewer than `k` samples survived filtering.
    pub degenerate: bool,
}

/// The `CIRCLE_SAMPLES` equally spaced points on the circle.
pub fn circle_samples(center: Point, radius: f64) -> Vec<Point> {
    (0..CIRCLE_SAMPLES)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / CIRCLE_SAMPLES as f64;
            Point::new(center.x + radius * a.cos(), center.y + radius * a.sin())
        })
        .collect()
}

/// Candidate points around `center` (an opponent position).
pub fn candidate_points_around(
    arena: &Arena,
    opponent: usize,
    center: Point,
    cfg: &PlannerConfig,
    seed: u64,
) -> Result<CandidateSet, PlanError> {
    if cfg.k == 0 {
        return Err(PlanError::ZeroK);
    }
    let samples = circle_samples(center, cfg.best_distance);
    let survivors: Vec<usize> = (0..CIRCLE_SAMPLES)
        .filter(|&i| arena.is_free(samples[i], arena.inflation))
        .collect();

    if survivors.is_empty() {
        // Enclosed opponent: fall back to the free cells nearest to it.
        let g = &arena.grid;
        let mut cells: Vec<(f64, usize, usize)> = (0..g.ny)
            .flat_map(|cy| (0..g.nx).map(move |cx| (cx, cy)))
            .filter(|&(cx, cy)| g.is_free_cell(cx, cy))
            .map(|(cx, cy)| (g.cell_center(cx, cy).dist_sq(center), cx, cy))
            .collect();
        if cells.is_empty() {
            return Err(PlanError::NoFreeCell);
        }
        cells.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)).then(a.1.cmp(&b.1)));
        let points: Vec<Point> = (0..cfg.k)
            .map(|i| {
                let (_, cx, cy) = cells[i.min(cells.len() - 1)];
                g.cell_center(cx, cy)
            })
            .collect();
        return Ok(CandidateSet {
            opponent,
            sample_index: vec![None; points.len()],
            points,
            seed,
            degenerate: true,
        });
    }

    let pts: Vec<Point> = survivors.iter().map(|&i| samples[i]).collect();
    let degenerate = pts.len() < cfg.k;
    let mut chosen: Vec<usize> = if degenerate {
        let mut all = survivors.clone();
        all.resize(cfg.k, survivors[0]);
        all
    } else {
        kmeans(&pts, cfg.k, seed, KMEANS_MAX_ITER)?
            .into_iter()
            .map(|c| {
                // nearest surviving sample, ties to the lowest angle index
                let mut best = 0;
                for (j, p) in pts.iter().enumerate() {
                    if p.dist_sq(c) < pts[best].dist_sq(c) {
                        best = j;
                    }
                }
                survivors[best]
            })
            .collect()
    };
    chosen.sort_unstable();
    Ok(CandidateSet {
        opponent,
        points: chosen.iter().map(|&i| samples[i]).collect(),
        sample_index: chosen.into_iter().map(Some).collect(),
        seed,
        degenerate,
    })
}

/// Candidate points around a living robot of `world`.
pub fn candidate_points(
    arena: &Arena,
    world: &WorldState,
    opponent: usize,
    cfg: &PlannerConfig,
    seed: u64,
) -> Result<CandidateSet, PlanError> {
    let r = &world.robots[opponent];
    if !r.alive() {
        return Err(PlanError::OpponentDead(opponent));
    }
    candidate_points_around(arena, opponent, r.position(), cfg, seed)
}

/// Step cost in straight and diagonal moves. Comparing through
/// [`PathCost::value`] keeps equal paths bit-identical regardless of the
/// order the moves were summed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PathCost {
    pub straight: u32,
    pub diagonal: u32,
}

impl PathCost {
    pub fn value(self) -> f64 {
        self.straight as f64 + self.diagonal as f64 * SQRT_2
    }

    /// Cost of a cell path (cell units).
    pub fn of_path(cells: &[(usize, usize)]) -> PathCost {
        let mut c = PathCost::default();
        for w in cells.windows(2) {
            if w[0].0 != w[1].0 && w[0].1 != w[1].1 {
                c.diagonal += 1;
            } else {
                c.straight += 1;
            }
        }
        c
    }
}

/// Neighbor offsets in row-major order.
const NEIGHBORS: [(i64, i64); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

/// Cells reachable in one move from `(cx, cy)`. Diagonal moves may not cut
/// a blocked corner.
pub fn grid_moves(grid: &OccupancyGrid, cx: usize, cy: usize) -> impl Iterator<Item = (usize, usize, bool)> + '_ {
    NEIGHBORS.iter().filter_map(move |&(dx, dy)| {
        let nx = cx as i64 + dx;
        let ny = cy as i64 + dy;
        if nx < 0 || ny < 0 || nx >= grid.nx as i64 || ny >= grid.ny as i64 {
            return None;
        }
        let (nx, ny) = (nx as usize, ny as usize);
        if grid.is_blocked(nx, ny) {
            return None;
        }
        let diagonal = dx != 0 && dy != 0;
        if diagonal && (grid.is_blocked(nx, cy) || grid.is_blocked(cx, ny)) {
            return None;
        }
        Some((nx, ny, diagonal))
    })
}

/// 8-connected A* between cells with a Euclidean heuristic. Returns the
/// cell path including both ends, or an empty path when the goal is
/// unreachable.
pub fn astar_cells(
    grid: &OccupancyGrid,
    start: (usize, usize),
    goal: (usize, usize),
) -> Result<Vec<(usize, usize)>, PlanError> {
    if grid.is_blocked(start.0, start.1) {
        return Err(PlanError::StartBlocked(start.0, start.1));
    }
    if grid.is_blocked(goal.0, goal.1) {
        return Ok(Vec::new());
    }
    let idx = |c: (usize, usize)| c.1 * grid.nx + c.0;
    let n = grid.nx * grid.ny;
    let mut cost: Vec<Option<PathCost>> = vec![None; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let h = |c: (usize, usize)| {
        let dx = c.0 as f64 - goal.0 as f64;
        let dy = c.1 as f64 - goal.1 as f64;
        (dx * dx + dy * dy).sqrt()
    };
    let mut open = BinaryHeap::new();
    let mut seq = 0u64;
    cost[idx(start)] = Some(PathCost::default());
    open.push(Reverse((h(start).to_bits(), seq, idx(start))));

    while let Some(Reverse((_, _, u))) = open.pop() {
        if closed[u] {
            continue;
        }
        closed[u] = true;
        if u == idx(goal) {
            let mut path = vec![goal];
            let mut cur = u;
            while parent[cur] != usize::MAX {
                cur = parent[cur];
                path.push((cur % grid.nx, cur / grid.nx));
            }
            path.reverse();
            return Ok(path);
        }
        let (ux, uy) = (u % grid.nx, u / grid.nx);
        let g_u = cost[u].expect("closed node has a cost");
        for (vx, vy, diagonal) in grid_moves(grid, ux, uy) {
            let v = idx((vx, vy));
            if closed[v] {
                continue;
            }
            let mut g_v = g_u;
            if diagonal {
                g_v.diagonal += 1;
            } else {
                g_v.straight += 1;
            }
            if cost[v].is_none_or(|old| g_v.value() < old.value()) {
                cost[v] = Some(g_v);
                parent[v] = u;
                seq += 1;
                let f = g_v.value() + h((vx, vy));
                open.push(Reverse((f.to_bits(), seq, v)));
            }
        }
    }
    Ok(Vec::new())
}

/// `p` itself when its grid cell is free, else the center of the nearest
/// free cell. Exact clearance and the cell grid disagree near obstacle
/// corners, so a legal pose can sit in a blocked cell.
pub fn snap_to_free(grid: &OccupancyGrid, p: Point) -> Option<Point> {
    let (cx, cy) = grid.cell_of(p);
    if grid.is_free_cell(cx, cy) {
        Some(p)
    } else {
        grid.nearest_free_cell(p).map(|(cx, cy)| grid.cell_center(cx, cy))
    }
}

/// World-space A* path from `start` to the free cell nearest `goal`.
/// Waypoints are cell centers.
pub fn plan_path(start: Point, goal: Point, grid: &OccupancyGrid) -> Result<Vec<Point>, PlanError> {
    let s = grid.cell_of(start);
    if grid.is_blocked(s.0, s.1) {
        return Err(PlanError::StartBlocked(s.0, s.1));
    }
    let g = grid.nearest_free_cell(goal).ok_or(PlanError::NoFreeCell)?;
    Ok(astar_cells(grid, s, g)?
        .into_iter()
        .map(|(cx, cy)| grid.cell_center(cx, cy))
        .collect())
}

/// Waypoints with a deceleration-limited speed profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedPath {
    pub waypoints: Vec<Point>,
    pub speeds: Vec<f64>,
}

impl PlannedPath {
    pub fn new(waypoints: Vec<Point>, v_max: f64, a_max: f64) -> Self {
        let mut speeds = vec![0.0; waypoints.len()];
        let mut remaining = 0.0;
        for i in (0..waypoints.len()).rev() {
            if i + 1 < waypoints.len() {
                remaining += waypoints[i].dist(waypoints[i + 1]);
            }
            speeds[i] = trapezoid_speed(remaining, v_max, a_max);
        }
        Self { waypoints, speeds }
    }

    pub fn goal(&self) -> Option<Point> {
        self.waypoints.last().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }
}

/// `min(v_max, sqrt(2 a_max s))`.
pub fn trapezoid_speed(s_remaining: f64, v_max: f64, a_max: f64) -> f64 {
    v_max.min((2.0 * a_max * s_remaining.max(0.0)).sqrt())
}

/// Closest point of the path polyline to `p`: (segment index, point).
fn project_onto_path(path: &[Point], p: Point) -> (usize, Point) {
    if path.len() == 1 {
        return (0, path[0]);
    }
    let mut best = (0, path[0], f64::INFINITY);
    for i in 0..path.len() - 1 {
        let (a, b) = (path[i], path[i + 1]);
        let ab = b.sub(a);
        let len2 = ab.dot(ab);
        let t = if len2 > 0.0 { (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let q = a.add(ab.scale(t));
        let d = q.dist_sq(p);
        if d < best.2 {
            best = (i, q, d);
        }
    }
    (best.0, best.1)
}

/// Pursuit of a point `LOOKAHEAD` meters ahead along the path, at the
/// trapezoidal speed for the remaining arc length. Translation only; the
/// heading is left to [`aim_rate`].
pub fn follow_path(pose: Pose, path: &PlannedPath, v_max: f64, a_max: f64) -> Twist {
    let Some(goal) = path.goal() else {
        return Twist::ZERO;
    };
    let pos = pose.position();
    if pos.dist(goal) <= GOAL_TOLERANCE {
        return Twist::ZERO;
    }
    let wp = &path.waypoints;
    let (seg, proj) = project_onto_path(wp, pos);

    let mut arc = 0.0;
    let mut lookahead = goal;
    let mut budget = LOOKAHEAD;
    let mut from = proj;
    let mut found = false;
    for next in wp.iter().skip(seg + 1) {
        let len = from.dist(*next);
        if !found {
            if len >= budget {
                lookahead = from.add(next.sub(from).scale(budget / len));
                found = true;
            } else {
                budget -= len;
            }
        }
        arc += len;
        from = *next;
    }
    let s_remaining = arc.max(pos.dist(goal));
    let dir = lookahead.sub(pos);
    let norm = dir.norm();
    if norm < 1e-9 {
        return Twist::ZERO;
    }
    let speed = trapezoid_speed(s_remaining, v_max, a_max);
    let v = dir.scale(speed / norm);
    let (s, c) = pose.theta.sin_cos();
    Twist::new(c * v.x + s * v.y, -s * v.x + c * v.y, 0.0).clamped()
}

/// Proportional turn rate toward `target`, clamped to the angular limit.
pub fn aim_rate(pose: Pose, target: Point, gain: f64) -> f64 {
    let err = wrap_angle(pose.position().bearing_to(target) - pose.theta);
    (gain * err).clamp(-MAX_ANGULAR_SPEED, MAX_ANGULAR_SPEED)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose;
    use crate::referee::CombatRules;

    #[test]
    fn kmeans_k1_is_mean() {
        let pts = [Point::new(0.0, 0.0), Point::new(2.0, 0.0), Point::new(1.0, 3.0)];
        let c = kmeans(&pts, 1, 5, 50).unwrap();
        assert!((c[0].x - 1.0).abs() < 1e-12 && (c[0].y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kmeans_k_equals_n_returns_points() {
        let pts = [Point::new(0.0, 0.0), Point::new(2.0, 0.0), Point::new(1.0, 3.0), Point::new(-1.0, 1.0)];
        let mut c = kmeans(&pts, 4, 9, 50).unwrap();
        let mut p = pts.to_vec();
        let key = |a: &Point, b: &Point| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y));
        c.sort_by(key);
        p.sort_by(key);
        assert_eq!(c, p);
    }

    #[test]
    fn kmeans_errors() {
        assert_eq!(kmeans(&[], 2, 0, 50), Err(PlanError::EmptyInput));
        assert_eq!(kmeans(&[Point::new(0.0, 0.0)], 2, 0, 50), Err(PlanError::TooFewPoints { k: 2, n: 1 }));
    }

    #[test]
    fn kmeans_is_deterministic() {
        let pts = circle_samples(Point::new(3.0, 2.0), 1.5);
        assert_eq!(kmeans(&pts, 4, 42, 50).unwrap(), kmeans(&pts, 4, 42, 50).unwrap());
    }

    #[test]
    fn open_field_candidates_are_quarter_turns_apart() {
        let arena = Arena::empty(8.1, 5.1);
        let c = arena.center();
        let cfg = PlannerConfig::default();
        let survivors = circle_samples(c, cfg.best_distance)
            .into_iter()
            .filter(|p| arena.is_free(*p, arena.inflation))
            .count();
        assert_eq!(survivors, CIRCLE_SAMPLES);
        let set = candidate_points_around(&arena, 2, c, &cfg, 17).unwrap();
        assert!(!set.degenerate);
        assert_eq!(set.points.len(), 4);
        let mut angles: Vec<f64> = set.points.iter().map(|p| c.bearing_to(*p)).collect();
        angles.sort_by(f64::total_cmp);
        for i in 0..4 {
            let gap = wrap_angle(angles[(i + 1) % 4] - angles[i]).rem_euclid(2.0 * PI);
            assert!((gap - PI / 2.0).abs() < 4.0 * 2.0 * PI / 180.0, "gap {gap}");
        }
    }

    #[test]
    fn candidates_near_wall_stay_in_field() {
        let arena = Arena::standard();
        let cfg = PlannerConfig::default();
        let set = candidate_points_around(&arena, 2, Point::new(0.35, 2.0), &cfg, 3).unwrap();
        for p in &set.points {
            assert!(arena.is_free(*p, arena.inflation));
            assert!(p.x >= 0.0 && p.x <= 8.1 && p.y >= 0.0 && p.y <= 5.1);
        }
    }

    #[test]
    fn candidates_repeat_under_fixed_seed() {
        let arena = Arena::standard();
        let cfg = PlannerConfig::default();
        let w = WorldState::new(
            [Pose::new(1.0, 1.0, 0.0), Pose::new(1.0, 4.0, 0.0), Pose::new(5.0, 2.0, 0.0), Pose::new(7.0, 4.0, 0.0)],
            &CombatRules::default(),
        );
        assert_eq!(
            candidate_points(&arena, &w, 2, &cfg, 8).unwrap(),
            candidate_points(&arena, &w, 2, &cfg, 8).unwrap()
        );
    }

    #[test]
    fn dead_opponent_is_error() {
        let arena = Arena::standard();
        let mut w = WorldState::new([Pose::new(1.0, 1.0, 0.0); 4], &CombatRules::default());
        w.robots[3].hp = 0;
        assert_eq!(
            candidate_points(&arena, &w, 3, &PlannerConfig::default(), 0),
            Err(PlanError::OpponentDead(3))
        );
    }

    #[test]
    fn enclosed_opponent_falls_back() {
        let arena = Arena::empty(2.0, 2.0);
        let cfg = PlannerConfig { best_distance: 5.0, ..Default::default() };
        let set = candidate_points_around(&arena, 2, Point::new(1.0, 1.0), &cfg, 0).unwrap();
        assert!(set.degenerate);
        assert_eq!(set.points.len(), 4);
        assert!(set.sample_index.iter().all(Option::is_none));
    }

    #[test]
    fn few_survivors_are_padded() {
        // a 1.5 m circle in a 3.2 m square only keeps samples near the axes
        let arena = Arena::empty(3.2, 3.2);
        let cfg = PlannerConfig { best_distance: 1.3, ..Default::default() };
        let c = Point::new(1.6, 1.6);
        let set = candidate_points_around(&arena, 2, c, &cfg, 0).unwrap();
        assert_eq!(set.points.len(), 4);
        for p in &set.points {
            assert!(arena.is_free(*p, arena.inflation));
            assert!((p.dist(c) - 1.3).abs() < 1e-9);
        }
    }

    fn open_grid(n: usize) -> OccupancyGrid {
        OccupancyGrid::from_cells(n, n, 1.0, vec![false; n * n])
    }

    #[test]
    fn astar_trivial_and_diagonal() {
        let g = open_grid(10);
        assert_eq!(astar_cells(&g, (3, 4), (3, 4)).unwrap(), vec![(3, 4)]);
        let p = astar_cells(&g, (0, 0), (9, 9)).unwrap();
        assert_eq!(PathCost::of_path(&p).value(), 9.0 * SQRT_2);
    }

    #[test]
    fn astar_blocked_start_and_unreachable_goal() {
        let mut cells = vec![false; 25];
        cells[0] = true;
        for y in 0..5 {
            cells[y * 5 + 3] = true;
        }
        let g = OccupancyGrid::from_cells(5, 5, 1.0, cells);
        assert_eq!(astar_cells(&g, (0, 0), (1, 1)), Err(PlanError::StartBlocked(0, 0)));
        assert!(astar_cells(&g, (1, 1), (4, 4)).unwrap().is_empty());
    }

    #[test]
    fn astar_paths_are_connected_moves() {
        let arena = Arena::standard();
        let p = plan_path(Point::new(0.5, 0.5), Point::new(7.6, 4.6), &arena.grid).unwrap();
        assert!(p.len() > 2);
        for w in p.windows(2) {
            let d = w[0].dist(w[1]);
            assert!(d < 0.1 * SQRT_2 + 1e-9);
        }
        for q in &p {
            assert!(arena.is_free(*q, arena.inflation));
        }
    }

    #[test]
    fn planned_speeds_respect_deceleration() {
        let wp: Vec<Point> = (0..30).map(|i| Point::new(i as f64 * 0.1, 0.0)).collect();
        let path = PlannedPath::new(wp.clone(), 2.0, 2.0);
        assert_eq!(*path.speeds.last().unwrap(), 0.0);
        for i in 0..wp.len() - 1 {
            let seg = wp[i].dist(wp[i + 1]);
            assert!(path.speeds[i] <= 2.0);
            assert!(path.speeds[i].powi(2) <= path.speeds[i + 1].powi(2) + 2.0 * 2.0 * seg + 1e-9);
        }
    }

    #[test]
    fn follow_at_goal_is_zero() {
        let path = PlannedPath::new(vec![Point::new(1.0, 1.0), Point::new(2.0, 1.0)], 2.0, 2.0);
        assert_eq!(follow_path(Pose::new(2.0, 1.05, 0.0), &path, 2.0, 2.0), Twist::ZERO);
    }

    #[test]
    fn follow_long_straight_path_full_speed() {
        let wp: Vec<Point> = (0..60).map(|i| Point::new(0.5 + i as f64 * 0.1, 2.0)).collect();
        let path = PlannedPath::new(wp, 2.0, 2.0);
        let t = follow_path(Pose::new(0.5, 2.0, 0.0), &path, 2.0, 2.0);
        assert!((t.vx - 2.0).abs() < 1e-12);
        assert!(t.vy.abs() < 1e-12);
        assert!(t.omega.abs() < 0.1);
    }

    #[test]
    fn follow_near_end_uses_trapezoid() {
        let path = PlannedPath::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)], 2.0, 2.0);
        let t = follow_path(Pose::new(0.75, 0.0, 0.0), &path, 2.0, 2.0);
        assert!((t.vx - 1.0).abs() < 1e-12);
    }

    #[test]
    fn follow_rotates_into_body_frame() {
        let path = PlannedPath::new(vec![Point::new(0.0, 0.0), Point::new(0.0, 5.0)], 2.0, 2.0);
        // facing +x, path goes +y: motion is to the robot's left
        let t = follow_path(Pose::new(0.0, 0.0, 0.0), &path, 2.0, 2.0);
        assert!(t.vx.abs() < 1e-12 && (t.vy - 2.0).abs() < 1e-12);
    }

    #[test]
    fn aim_rate_clamps_and_signs() {
        let p = Pose::new(0.0, 0.0, 0.0);
        assert!(aim_rate(p, Point::new(0.0, 1.0), 3.0) == MAX_ANGULAR_SPEED);
        assert!(aim_rate(p, Point::new(0.0, -1.0), 3.0) == -MAX_ANGULAR_SPEED);
        assert!(aim_rate(p, Point::new(1.0, 0.0), 3.0).abs() < 1e-12);
    }
}
