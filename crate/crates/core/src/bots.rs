//! Rule-based opponents at three difficulty levels.

use crate::arena::Arena;
use crate::dynamics::{Level, Twist};
use crate::geometry::Point;
use crate::planning::{aim_rate, follow_path, plan_path, snap_to_free, CandidateSet, PlannedPath, PlannerConfig};
use crate::world::{Team, WorldState};
use serde::{Deserialize, Serialize};

/// One bot's decision for an environment step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BotCommand {
    pub robot: usize,
    pub target: usize,
    pub goal: Point,
    /// Command for the first tick of the step; later ticks re-run the
    /// follower on the same goal.
    pub twist: Twist,
}

/// Score of a candidate point for the hard bot: closeness to the best
/// shooting distance, minus a penalty when the enemy is not visible.
pub fn candidate_score(arena: &Arena, point: Point, enemy: Point, best_distance: f64) -> f64 {
    let blind = if arena.line_of_sight(point, enemy) { 0.0 } else { 1.0 };
    -(point.dist(enemy) - best_distance).abs() - 0.5 * blind
}

fn living(world: &WorldState, team: Team) -> Vec<usize> {
    team.members().into_iter().filter(|&i| world.robots[i].alive()).collect()
}

fn nearest_enemy(world: &WorldState, bot: usize, enemies: &[usize]) -> usize {
    let p = world.robots[bot].position();
    let mut best = enemies[0];
    for &e in enemies {
        if world.robots[e].position().dist(p) < world.robots[best].position().dist(p) {
            best = e;
        }
    }
    best
}

fn weakest_enemy(world: &WorldState, enemies: &[usize]) -> usize {
    let mut best = enemies[0];
    for &e in enemies {
        if world.robots[e].hp < world.robots[best].hp {
            best = e;
        }
    }
    best
}

fn nearest_point(from: Point, points: &[Point]) -> Point {
    let mut best = points[0];
    for p in points {
        if p.dist(from) < best.dist(from) {
            best = *p;
        }
    }
    best
}

/// Indices of the two highest-scoring candidates (ties to the lower index).
pub fn best_two(arena: &Arena, set: &CandidateSet, enemy: Point, best_distance: f64) -> [usize; 2] {
    let mut order: Vec<usize> = (0..set.points.len()).collect();
    let scores: Vec<f64> = set
        .points
        .iter()
        .map(|p| candidate_score(arena, *p, enemy, best_distance))
        .collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    [order[0], order[1.min(order.len() - 1)]]
}

/// Bot-to-point assignment minimizing total travel. Returns the point for
/// each bot in order.
pub fn assign_pair(bots: [Point; 2], points: [Point; 2]) -> [Point; 2] {
    let straight = bots[0].dist(points[0]) + bots[1].dist(points[1]);
    let crossed = bots[0].dist(points[1]) + bots[1].dist(points[0]);
    if crossed < straight {
        [points[1], points[0]]
    } else {
        points
    }
}

/// Goals and targets for the living robots of `team`. `candidates[i]` is
/// the candidate set around robot `i` (only enemy entries are read).
pub fn bot_goals(
    level: Level,
    world: &WorldState,
    arena: &Arena,
    candidates: &[Option<CandidateSet>],
    team: Team,
    cfg: &PlannerConfig,
) -> Vec<(usize, usize, Point)> {
    let bots = living(world, team);
    let enemies: Vec<usize> = living(world, team.opponent())
        .into_iter()
        .filter(|&e| candidates.get(e).is_some_and(Option::is_some))
        .collect();
    if bots.is_empty() || enemies.is_empty() {
        return Vec::new();
    }
    let set_of = |e: usize| candidates[e].as_ref().expect("filtered above");
    match level {
        Level::Easy | Level::Middle => bots
            .iter()
            .map(|&b| {
                let target = if level == Level::Easy {
                    nearest_enemy(world, b, &enemies)
                } else {
                    weakest_enemy(world, &enemies)
                };
                let goal = nearest_point(world.robots[b].position(), &set_of(target).points);
                (b, target, goal)
            })
            .collect(),
        Level::Hard => {
            let target = weakest_enemy(world, &enemies);
            let set = set_of(target);
            let [i, j] = best_two(arena, set, world.robots[target].position(), cfg.best_distance);
            let pair = [set.points[i], set.points[j]];
            if bots.len() == 1 {
                let goal = nearest_point(world.robots[bots[0]].position(), &pair);
                vec![(bots[0], target, goal)]
            } else {
                let at = [world.robots[bots[0]].position(), world.robots[bots[1]].position()];
                let goals = assign_pair(at, pair);
                vec![(bots[0], target, goals[0]), (bots[1], target, goals[1])]
            }
        }
    }
}

/// Full bot decisions including the initial twist toward each goal.
pub fn bot_actions(
    level: Level,
    world: &WorldState,
    arena: &Arena,
    candidates: &[Option<CandidateSet>],
    team: Team,
    cfg: &PlannerConfig,
) -> Vec<BotCommand> {
    bot_goals(level, world, arena, candidates, team, cfg)
        .into_iter()
        .map(|(robot, target, goal)| {
            let pose = world.robots[robot].pose();
            let start = snap_to_free(&arena.grid, pose.position());
            let mut twist = match start.map(|s| plan_path(s, goal, &arena.grid)) {
                Some(Ok(wp)) => follow_path(pose, &PlannedPath::new(wp, cfg.v_max, cfg.a_max), cfg.v_max, cfg.a_max),
                _ => Twist::ZERO,
            };
            twist.omega = aim_rate(pose, world.robots[target].position(), cfg.aim_gain);
            BotCommand { robot, target, goal, twist }
        })
        .collect()
}
