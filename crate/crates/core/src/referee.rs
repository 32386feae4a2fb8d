//! The referee: probabilistic shot resolution, HP and bullet accounting,
//! armor identification, win judgment and team rewards.

use crate::arena::Arena;
use crate::geometry::wrap_angle;
use crate::world::{Team, WorldState, N_ROBOTS};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_4;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RefereeError {
    #[error("robot id {0} out of range")]
    InvalidRobot(usize),
    #[error("robots {0} and {1} are on the same team")]
    SameTeam(usize, usize),
    #[error("shooter {0} is destroyed")]
    ShooterDead(usize),
}

/// Parameters of the logistic hit-rate-versus-distance curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HitParams {
    pub p_max: f64,
    /// Distance at which the hit rate halves, meters.
    pub d0: f64,
    /// Steepness, 1/m.
    pub kappa: f64,
}

impl Default for HitParams {
    fn default() -> Self {
        Self {
            p_max: 0.9,
            d0: 2.0,
            kappa: 2.0,
        }
    }
}

impl HitParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.p_max > 0.0 && self.p_max <= 1.0) {
            return Err(format!("p_max must lie in (0, 1], got {}", self.p_max));
        }
        if !(self.d0.is_finite() && self.d0 > 0.0) {
            return Err(format!("d0 must be positive, got {}", self.d0));
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(format!("kappa must be positive, got {}", self.kappa));
        }
        Ok(())
    }
}

/// `p_max / (1 + exp(kappa * (d - d0)))`.
pub fn hit_probability(d: f64, params: &HitParams) -> f64 {
    debug_assert!(d >= 0.0);
    params.p_max / (1.0 + (params.kappa * (d - params.d0)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Armor {
    Front,
    Left,
    Rear,
    Right,
}

impl Armor {
    fn index(self) -> usize {
        match self {
            Armor::Front => 0,
            Armor::Left => 1,
            Armor::Rear => 2,
            Armor::Right => 3,
        }
    }

    /// Plate facing a shot arriving from `bearing` in the target body frame.
    pub fn from_relative_bearing(bearing: f64) -> Armor {
        let b = wrap_angle(bearing);
        if b.abs() <= FRAC_PI_4 {
            Armor::Front
        } else if b > FRAC_PI_4 && b <= 3.0 * FRAC_PI_4 {
            Armor::Left
        } else if b < -FRAC_PI_4 && b >= -3.0 * FRAC_PI_4 {
            Armor::Right
        } else {
            Armor::Rear
        }
    }
}

/// Combat constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombatRules {
    pub hp0: u32,
    pub bullets0: u32,
    /// HP removed per hit before the armor multiplier.
    pub damage: u32,
    /// Damage multipliers for front, left, rear, right plates.
    pub armor_multipliers: [f64; 4],
    pub range_max: f64,
    /// Maximum |bearing - heading| for a shot, radians.
    pub angle_gate: f64,
    /// Ticks per episode (50 steps of 20 ticks).
    pub tick_limit: u32,
}

impl Default for CombatRules {
    fn default() -> Self {
        Self {
            hp0: 500,
            bullets0: 50,
            damage: 50,
            armor_multipliers: [1.0; 4],
            range_max: 3.0,
            angle_gate: 30f64.to_radians(),
            tick_limit: 1000,
        }
    }
}

impl CombatRules {
    pub fn damage_for(&self, armor: Armor) -> u32 {
        (self.damage as f64 * self.armor_multipliers[armor.index()]).round() as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotOutcome {
    pub shooter: usize,
    pub target: usize,
    pub fired: bool,
    pub hit: bool,
    pub armor: Option<Armor>,
    /// Nominal damage of the hit (0 on a miss).
    pub damage: u32,
    pub distance: f64,
}

fn check_pair(shooter: usize, target: usize) -> Result<(), RefereeError> {
    for id in [shooter, target] {
        if id >= N_ROBOTS {
            return Err(RefereeError::InvalidRobot(id));
        }
    }
    if Team::of(shooter) == Team::of(target) {
        return Err(RefereeError::SameTeam(shooter, target));
    }
    Ok(())
}

/// True iff every firing precondition except ammunition holds.
pub fn in_firing_window(world: &WorldState, shooter: usize, target: usize, rules: &CombatRules, arena: &Arena) -> bool {
    let s = &world.robots[shooter];
    let t = &world.robots[target];
    if !t.alive() {
        return false;
    }
    let (sp, tp) = (s.position(), t.position());
    let d = sp.dist(tp);
    d <= rules.range_max
        && wrap_angle(sp.bearing_to(tp) - s.body.pose.theta).abs() <= rules.angle_gate
        && arena.line_of_sight(sp, tp)
}

/// Decides one shot against `world` without mutating it. The rng is only
/// consumed when the shot is fired.
pub fn decide_shot<R: Rng>(
    world: &WorldState,
    shooter: usize,
    target: usize,
    rules: &CombatRules,
    hit: &HitParams,
    arena: &Arena,
    rng: &mut R,
) -> Result<ShotOutcome, RefereeError> {
    check_pair(shooter, target)?;
    let s = &world.robots[shooter];
    if !s.alive() {
        return Err(RefereeError::ShooterDead(shooter));
    }
    let t = &world.robots[target];
    let distance = s.position().dist(t.position());
    let mut out = ShotOutcome {
        shooter,
        target,
        fired: false,
        hit: false,
        armor: None,
        damage: 0,
        distance,
    };
    if s.bullets == 0 || !in_firing_window(world, shooter, target, rules, arena) {
        return Ok(out);
    }
    out.fired = true;
    if rng.random::<f64>() < hit_probability(distance, hit) {
        let incoming = t.position().bearing_to(s.position()) - t.body.pose.theta;
        let armor = Armor::from_relative_bearing(incoming);
        out.hit = true;
        out.armor = Some(armor);
        out.damage = rules.damage_for(armor);
    }
    Ok(out)
}

/// Applies a decided shot: spends the bullet, removes HP (floored at 0) and
/// credits the shooter's team with the HP actually removed. Returns that
/// amount.
pub fn apply_shot(world: &mut WorldState, outcome: &ShotOutcome) -> u32 {
    if !outcome.fired {
        return 0;
    }
    let s = &mut world.robots[outcome.shooter];
    s.bullets = s.bullets.saturating_sub(1);
    if !outcome.hit {
        return 0;
    }
    let t = &mut world.robots[outcome.target];
    let removed = outcome.damage.min(t.hp);
    t.hp -= removed;
    world.damage_dealt[Team::of(outcome.shooter).index()] += removed;
    removed
}

/// Decides and applies one shot.
pub fn resolve_shot<R: Rng>(
    shooter: usize,
    target: usize,
    world: &mut WorldState,
    rules: &CombatRules,
    hit: &HitParams,
    arena: &Arena,
    rng: &mut R,
) -> Result<ShotOutcome, RefereeError> {
    let out = decide_shot(world, shooter, target, rules, hit, arena, rng)?;
    apply_shot(world, &out);
    world.events.push(out);
    Ok(out)
}

/// Resolves simultaneous shots: every gate is evaluated against the state
/// before any of them lands, then outcomes are applied in order. Dead
/// shooters are skipped.
pub fn resolve_volley<R: Rng>(
    world: &mut WorldState,
    shots: &[(usize, usize)],
    rules: &CombatRules,
    hit: &HitParams,
    arena: &Arena,
    rng: &mut R,
) -> Result<Vec<ShotOutcome>, RefereeError> {
    let mut outcomes = Vec::with_capacity(shots.len());
    for &(shooter, target) in shots {
        check_pair(shooter, target)?;
        if !world.robots[shooter].alive() {
            continue;
        }
        outcomes.push(decide_shot(world, shooter, target, rules, hit, arena, rng)?);
    }
    for o in &outcomes {
        apply_shot(world, o);
        world.events.push(*o);
    }
    Ok(outcomes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Ongoing,
    RedWins,
    BlueWins,
    Draw,
}

impl Verdict {
    pub fn is_over(self) -> bool {
        self != Verdict::Ongoing
    }

    pub fn winner(self) -> Option<Team> {
        match self {
            Verdict::RedWins => Some(Team::Red),
            Verdict::BlueWins => Some(Team::Blue),
            _ => None,
        }
    }
}

/// Win judgment: a wiped-out team loses immediately; at the tick limit the
/// team with strictly more damage dealt wins, equal damage is a draw.
/// Simultaneous elimination of both teams is a draw.
pub fn judge(world: &WorldState, tick: u32, rules: &CombatRules) -> Verdict {
    let red = world.team_alive(Team::Red);
    let blue = world.team_alive(Team::Blue);
    match (red, blue) {
        (false, false) => Verdict::Draw,
        (true, false) => Verdict::RedWins,
        (false, true) => Verdict::BlueWins,
        (true, true) if tick >= rules.tick_limit => {
            let [r, b] = world.damage_dealt;
            match r.cmp(&b) {
                std::cmp::Ordering::Greater => Verdict::RedWins,
                std::cmp::Ordering::Less => Verdict::BlueWins,
                std::cmp::Ordering::Equal => Verdict::Draw,
            }
        }
        (true, true) => Verdict::Ongoing,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub r_h: f64,
    pub r_k: f64,
    pub r_w: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            r_h: 0.02,
            r_k: 3.0,
            r_w: 20.0,
        }
    }
}

impl RewardWeights {
    /// Win/loss-only rewards.
    pub fn sparse() -> Self {
        Self {
            r_h: 0.0,
            r_k: 0.0,
            r_w: 20.0,
        }
    }
}

/// Combat events of one environment step, per team (red, blue).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepEvents {
    /// HP removed from the opposing team.
    pub damage: [u32; 2],
    /// Opposing robots destroyed.
    pub kills: [u32; 2],
}

/// Per-team reward for one environment step (red, blue).
pub fn team_reward(events: &StepEvents, weights: &RewardWeights, verdict: Verdict) -> [f64; 2] {
    let mut out = [0.0; 2];
    for team in [Team::Red, Team::Blue] {
        let i = team.index();
        let won = verdict.winner() == Some(team);
        out[i] = weights.r_h * events.damage[i] as f64
            + weights.r_k * events.kills[i] as f64
            + if won { weights.r_w } else { 0.0 };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn duel(red: Pose, blue: Pose) -> WorldState {
        WorldState::new(
            [red, Pose::new(0.5, 4.6, 0.0), blue, Pose::new(7.6, 0.5, 0.0)],
            &CombatRules::default(),
        )
    }

    #[test]
    fn logistic_limits() {
        let p = HitParams { p_max: 0.8, d0: 5.0, kappa: 4.0 };
        assert!((hit_probability(0.0, &p) - 0.8).abs() < 1e-8);
        let p = HitParams { p_max: 0.9, d0: 2.0, kappa: 2.0 };
        assert!((hit_probability(2.0, &p) - 0.45).abs() < 1e-15);
        assert!(hit_probability(10.0, &HitParams::default()) < 0.01);
    }

    #[test]
    fn hit_probability_strictly_decreasing() {
        let p = HitParams::default();
        let mut prev = hit_probability(0.0, &p);
        for i in 1..200 {
            let v = hit_probability(i as f64 * 0.05, &p);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn armor_quadrants() {
        assert_eq!(Armor::from_relative_bearing(0.0), Armor::Front);
        assert_eq!(Armor::from_relative_bearing(1.2), Armor::Left);
        assert_eq!(Armor::from_relative_bearing(-1.2), Armor::Right);
        assert_eq!(Armor::from_relative_bearing(3.0), Armor::Rear);
        assert_eq!(Armor::from_relative_bearing(-3.0), Armor::Rear);
    }

    #[test]
    fn no_bullets_no_shot() {
        let arena = Arena::empty(8.1, 5.1);
        let mut w = duel(Pose::new(2.0, 2.5, 0.0), Pose::new(3.0, 2.5, 0.0));
        w.robots[0].bullets = 0;
        let before = w.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let o = decide_shot(&w, 0, 2, &CombatRules::default(), &HitParams::default(), &arena, &mut rng).unwrap();
        assert!(!o.fired && !o.hit);
        apply_shot(&mut w, &o);
        assert_eq!(w, before);
    }

    #[test]
    fn obstacle_blocks_shot() {
        let arena = Arena::standard();
        let c = arena.center();
        let w = duel(Pose::new(c.x - 1.0, c.y, 0.0), Pose::new(c.x + 1.0, c.y, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let o = decide_shot(&w, 0, 2, &CombatRules::default(), &HitParams::default(), &arena, &mut rng).unwrap();
        assert!(!o.fired);
    }

    #[test]
    fn gates_on_range_and_angle() {
        let arena = Arena::empty(8.1, 5.1);
        let rules = CombatRules::default();
        let far = duel(Pose::new(1.0, 2.5, 0.0), Pose::new(4.5, 2.5, 0.0));
        assert!(!in_firing_window(&far, 0, 2, &rules, &arena));
        let askew = duel(Pose::new(1.0, 2.5, 0.6), Pose::new(3.0, 2.5, 0.0));
        assert!(!in_firing_window(&askew, 0, 2, &rules, &arena));
        let ok = duel(Pose::new(1.0, 2.5, 0.5), Pose::new(3.0, 2.5, 0.0));
        assert!(in_firing_window(&ok, 0, 2, &rules, &arena));
    }

    #[test]
    fn invalid_ids_rejected() {
        let arena = Arena::empty(8.1, 5.1);
        let mut w = duel(Pose::new(1.0, 2.5, 0.0), Pose::new(2.0, 2.5, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = CombatRules::default();
        let h = HitParams::default();
        assert_eq!(resolve_shot(0, 7, &mut w, &r, &h, &arena, &mut rng), Err(RefereeError::InvalidRobot(7)));
        assert_eq!(resolve_shot(0, 1, &mut w, &r, &h, &arena, &mut rng), Err(RefereeError::SameTeam(0, 1)));
    }

    #[test]
    fn hit_accounting_and_floor() {
        let arena = Arena::empty(8.1, 5.1);
        let rules = CombatRules::default();
        let hit = HitParams { p_max: 1.0, d0: 100.0, kappa: 1.0 };
        let mut w = duel(Pose::new(1.0, 2.5, 0.0), Pose::new(2.0, 2.5, 0.0));
        w.robots[2].hp = 30;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let o = resolve_shot(0, 2, &mut w, &rules, &hit, &arena, &mut rng).unwrap();
        assert!(o.fired && o.hit);
        // target faces +x, shooter is behind it
        assert_eq!(o.armor, Some(Armor::Rear));
        assert_eq!(o.damage, 50);
        assert_eq!(w.robots[2].hp, 0);
        assert!(!w.robots[2].alive());
        assert_eq!(w.damage_dealt, [30, 0]);
        assert_eq!(w.robots[0].bullets, 49);
    }

    #[test]
    fn volley_is_simultaneous() {
        let arena = Arena::empty(8.1, 5.1);
        let rules = CombatRules::default();
        let hit = HitParams { p_max: 1.0, d0: 100.0, kappa: 1.0 };
        let mut w = duel(Pose::new(1.0, 2.5, 0.0), Pose::new(2.0, 2.5, std::f64::consts::PI));
        w.robots[0].hp = 50;
        w.robots[2].hp = 50;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = resolve_volley(&mut w, &[(0, 2), (2, 0)], &rules, &hit, &arena, &mut rng).unwrap();
        assert!(out.iter().all(|o| o.fired && o.hit));
        assert_eq!(judge(&w, 10, &rules), Verdict::Ongoing); // teammates still alive
        assert_eq!(w.damage_dealt, [50, 50]);
    }

    #[test]
    fn seeded_shots_reproduce() {
        let arena = Arena::empty(8.1, 5.1);
        let rules = CombatRules::default();
        let run = || {
            let mut w = duel(Pose::new(1.0, 2.5, 0.0), Pose::new(2.5, 2.5, 0.0));
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            (0..40)
                .map(|_| resolve_shot(0, 2, &mut w, &rules, &HitParams::default(), &arena, &mut rng).unwrap().hit)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn judge_rules() {
        let rules = CombatRules::default();
        let mut w = duel(Pose::new(1.0, 2.5, 0.0), Pose::new(2.0, 2.5, 0.0));
        assert_eq!(judge(&w, 300, &rules), Verdict::Ongoing);
        w.robots[2].hp = 0;
        w.robots[3].hp = 0;
        assert_eq!(judge(&w, 300, &rules), Verdict::RedWins);
        let mut w = duel(Pose::new(1.0, 2.5, 0.0), Pose::new(2.0, 2.5, 0.0));
        w.damage_dealt = [400, 350];
        assert_eq!(judge(&w, 1000, &rules), Verdict::RedWins);
        w.damage_dealt = [350, 350];
        assert_eq!(judge(&w, 1000, &rules), Verdict::Draw);
    }

    #[test]
    fn reward_examples() {
        let w = RewardWeights::default();
        assert_eq!(team_reward(&StepEvents::default(), &w, Verdict::Ongoing), [0.0, 0.0]);
        let e = StepEvents { damage: [50, 0], kills: [0, 0] };
        assert!((team_reward(&e, &w, Verdict::Ongoing)[0] - 1.0).abs() < 1e-12);
        let e = StepEvents { damage: [50, 0], kills: [1, 0] };
        let r = team_reward(&e, &w, Verdict::RedWins);
        assert!((r[0] - 24.0).abs() < 1e-12);
        assert_eq!(r[1], 0.0);
    }
}
