use combat_arena::arena::Arena;
use combat_arena::env::{Action, CombatEnv, ContextMap, EnvConfig, N_ACTIONS, OBS_DIM};
use combat_arena::geometry::{Point, Pose};
use combat_arena::referee::{
    decide_shot, hit_probability, judge, resolve_volley, CombatRules, HitParams, RewardWeights, Verdict,
};
use combat_arena::world::{Team, WorldState, N_ROBOTS};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::{Arc, OnceLock};

fn arena() -> Arc<Arena> {
    static A: OnceLock<Arc<Arena>> = OnceLock::new();
    A.get_or_init(|| Arc::new(Arena::standard())).clone()
}

fn env_with(config: EnvConfig) -> CombatEnv {
    CombatEnv::new(arena(), config).unwrap()
}

fn level_ctx(level: u8) -> ContextMap {
    [("level".to_string(), level as f64)].into()
}

/// Random joint action; index `N_ACTIONS` stands for "do nothing".
fn pick(rng: &mut ChaCha8Rng) -> Action {
    match rng.random_range(0..=N_ACTIONS) {
        N_ACTIONS => Action::Noop,
        i => Action::Discrete(i),
    }
}

fn hps(env: &CombatEnv) -> [u32; N_ROBOTS] {
    std::array::from_fn(|i| env.world().robots[i].hp)
}

fn bullets(env: &CombatEnv) -> [u32; N_ROBOTS] {
    std::array::from_fn(|i| env.world().robots[i].bullets)
}

/// Fixture for close-range duels: red 0 faces blue 2 across half a meter,
/// the other two robots start destroyed.
fn duel(red_hp: u32, blue_hp: u32) -> WorldState {
    let rules = CombatRules::default();
    let mut w = WorldState::new(
        [
            Pose::new(3.0, 0.6, 0.0),
            Pose::new(0.5, 4.6, 0.0),
            Pose::new(3.5, 0.6, std::f64::consts::PI),
            Pose::new(7.6, 4.6, 0.0),
        ],
        &rules,
    );
    w.robots[0].hp = red_hp;
    w.robots[2].hp = blue_hp;
    w.robots[1].hp = 0;
    w.robots[3].hp = 0;
    w
}

fn sure_hit() -> HitParams {
    HitParams { p_max: 1.0, d0: 100.0, kappa: 2.0 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn episode_bookkeeping_holds(seed in any::<u64>(), level in 1u8..=3, scripted_blue in any::<bool>()) {
        let weights = RewardWeights::default();
        let mut env = env_with(EnvConfig::default());
        env.reset(&level_ctx(level), seed).unwrap();
        let rules = *env.rules();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        loop {
            let (hp0, b0) = (hps(&env), bullets(&env));
            let red = [pick(&mut rng), pick(&mut rng)];
            let blue = scripted_blue.then(|| [pick(&mut rng), pick(&mut rng)]);
            let r = env.step_joint(red, blue).unwrap();
            let (hp1, b1) = (hps(&env), bullets(&env));
            for i in 0..N_ROBOTS {
                prop_assert!(hp1[i] <= hp0[i] && b1[i] <= b0[i]);
            }
            let fired = r.info.shots.iter().filter(|s| s.fired).count() as u32;
            prop_assert_eq!(b0.iter().sum::<u32>() - b1.iter().sum::<u32>(), fired);

            for team in [Team::Red, Team::Blue] {
                let foes = team.opponent().members();
                let lost: u32 = foes.iter().map(|&f| hp0[f] - hp1[f]).sum();
                let kills = foes.iter().filter(|&&f| hp0[f] > 0 && hp1[f] == 0).count() as u32;
                let won = r.info.verdict.winner() == Some(team);
                let want = weights.r_h * lost as f64 + weights.r_k * kills as f64 + if won { weights.r_w } else { 0.0 };
                prop_assert!((r.info.rewards[team.index()] - want).abs() < 1e-12);
                let total: u32 = foes.iter().map(|&f| rules.hp0 - hp1[f]).sum();
                prop_assert_eq!(env.world().damage_dealt[team.index()], total);
            }
            prop_assert_eq!(r.reward, r.info.rewards[0]);

            let both_alive = env.world().team_alive(Team::Red) && env.world().team_alive(Team::Blue);
            if both_alive && env.step_count() < env.config().max_steps {
                prop_assert_eq!(r.info.verdict, Verdict::Ongoing);
            }
            prop_assert!(env.world().tick <= rules.tick_limit);
            prop_assert!(env.step_count() <= env.config().max_steps);
            prop_assert_eq!(r.done, r.info.verdict.is_over());
            if r.done {
                break;
            }
        }
        // 50 steps of 20 ms ticks: the episode never outlasts 20 s
        prop_assert!(env.world().tick as f64 * 1e-3 <= 20.0 + 1e-12);
    }

    #[test]
    fn sparse_returns_are_zero_or_the_win_bonus(seed in any::<u64>()) {
        let config = EnvConfig { weights: RewardWeights::sparse(), ..EnvConfig::default() };
        let r_w = config.weights.r_w;
        let mut env = env_with(config);
        env.reset(&ContextMap::new(), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ret = 0.0;
        loop {
            let r = env.step([pick(&mut rng), pick(&mut rng)]).unwrap();
            ret += r.reward;
            if r.done {
                break;
            }
        }
        prop_assert!(ret == 0.0 || ret == r_w, "return {}", ret);
        prop_assert_eq!(ret == r_w, env.verdict() == Verdict::RedWins);
    }

    #[test]
    fn teammates_see_each_other_in_swapped_slots(seed in any::<u64>(), steps in 0usize..6) {
        let mut env = env_with(EnvConfig::default());
        env.reset(&ContextMap::new(), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..steps {
            if env.step([pick(&mut rng), pick(&mut rng)]).unwrap().done {
                break;
            }
        }
        let (a, b) = (env.observe(0), env.observe(1));
        prop_assert_eq!(a.len(), OBS_DIM);
        prop_assert_eq!(&a[0..3], &b[3..6]);
        prop_assert_eq!(&a[3..6], &b[0..3]);
        prop_assert_eq!(&a[6..28], &b[6..28]);
        for base in [28, 32] {
            prop_assert_eq!(a[base], b[base + 1]);
            prop_assert_eq!(a[base + 1], b[base]);
            prop_assert_eq!(&a[base + 2..base + 4], &b[base + 2..base + 4]);
        }
        prop_assert_eq!(a[36], b[36]);
        prop_assert_eq!(env.global_state(), a);
    }

    #[test]
    fn bot_goals_come_from_the_targets_candidates(seed in any::<u64>(), level in 1u8..=3) {
        let mut env = env_with(EnvConfig::default());
        env.reset(&level_ctx(level), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..8 {
            let sets = env.candidates().to_vec();
            let r = env.step([pick(&mut rng), pick(&mut rng)]).unwrap();
            for &(robot, target, goal) in &r.info.bot_goals {
                prop_assert_eq!(Team::of(robot), Team::Blue);
                prop_assert_eq!(Team::of(target), Team::Red);
                let set = sets[target].as_ref().expect("every robot has a candidate set");
                prop_assert!(set.points.iter().any(|p| p.dist(goal) < 1e-12), "goal {:?} not in {:?}", goal, set.points);
            }
            if r.done {
                break;
            }
        }
    }

    #[test]
    fn same_seed_replays_the_same_episode(seed in any::<u64>(), level in 1u8..=3) {
        let run = |warmup: bool| {
            let mut env = env_with(EnvConfig::default());
            if warmup {
                // history from an earlier episode must not leak into the next
                env.reset(&level_ctx(3), seed.wrapping_add(1)).unwrap();
                env.step([Action::Discrete(1), Action::Discrete(6)]).unwrap();
            }
            let (obs, _) = env.reset(&level_ctx(level), seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut trace = vec![(obs, 0.0)];
            loop {
                let r = env.step([pick(&mut rng), pick(&mut rng)]).unwrap();
                trace.push((r.obs, r.reward));
                if r.done {
                    return (trace, env.verdict(), env.world().clone());
                }
            }
        };
        prop_assert_eq!(run(false), run(true));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn hit_probability_falls_with_distance(a in 0.0..10.0f64, b in 0.0..10.0f64) {
        let p = HitParams::default();
        let (near, far) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(hit_probability(near, &p) >= hit_probability(far, &p));
        prop_assert!((0.0..=p.p_max).contains(&hit_probability(far, &p)));
    }

    #[test]
    fn seeded_shots_replay(seed in any::<u64>(), dx in 0.3..3.5f64, heading in -0.8..0.8f64) {
        let rules = CombatRules::default();
        let mut w = duel(rules.hp0, rules.hp0);
        w.robots[2].body.pose = Pose::new(3.0 + dx, 0.6, std::f64::consts::PI);
        w.robots[0].body.pose.theta = heading;
        let shoot = || {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = decide_shot(&w, 0, 2, &rules, &HitParams::default(), &arena(), &mut rng).unwrap();
            (out, rng.random::<u64>())
        };
        let (first, after) = shoot();
        prop_assert_eq!(shoot(), (first, after));
        // the stream is only consumed by shots that leave the barrel
        let untouched = ChaCha8Rng::seed_from_u64(seed).random::<u64>();
        prop_assert_eq!(after == untouched, !first.fired);
        let gated = dx <= rules.range_max && heading.abs() <= rules.angle_gate;
        prop_assert_eq!(first.fired, gated);
    }

    #[test]
    fn lethal_exchange_is_a_draw(red_hp in 1u32..=50, blue_hp in 1u32..=50, seed in any::<u64>()) {
        let rules = CombatRules::default();
        let mut w = duel(red_hp, blue_hp);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = resolve_volley(&mut w, &[(0, 2), (2, 0)], &rules, &sure_hit(), &arena(), &mut rng).unwrap();
        prop_assert!(out.iter().all(|o| o.fired && o.hit));
        prop_assert_eq!(w.damage_dealt, [blue_hp, red_hp]);
        prop_assert_eq!(judge(&w, 1, &rules), Verdict::Draw);
    }

    #[test]
    fn judge_waits_for_the_clock_while_both_teams_stand(
        hp in prop::array::uniform4(0u32..3),
        dmg in (0u32..2000, 0u32..2000),
        tick in 0u32..2000,
    ) {
        let rules = CombatRules::default();
        let mut w = duel(1, 1);
        for i in 0..N_ROBOTS {
            w.robots[i].hp = hp[i];
        }
        w.damage_dealt = [dmg.0, dmg.1];
        let v = judge(&w, tick, &rules);
        let both = w.team_alive(Team::Red) && w.team_alive(Team::Blue);
        if both && tick < rules.tick_limit {
            prop_assert_eq!(v, Verdict::Ongoing);
        } else {
            prop_assert!(v.is_over());
        }
        if v.winner().is_some() && both {
            prop_assert!(dmg.0 != dmg.1);
        }
    }
}

#[test]
fn shots_need_line_of_sight() {
    let rules = CombatRules::default();
    let arena = arena();
    let mut w = duel(rules.hp0, rules.hp0);
    // find a pair of close free points with an obstacle between them
    let mut blocked = None;
    'search: for ix in 0..81 {
        for iy in 0..51 {
            let a = Point::new(ix as f64 * 0.1, iy as f64 * 0.1);
            let b = Point::new(a.x + 1.2, a.y);
            if arena.is_free(a, arena.inflation) && arena.is_free(b, arena.inflation) && !arena.line_of_sight(a, b) {
                blocked = Some((a, b));
                break 'search;
            }
        }
    }
    let (a, b) = blocked.expect("the standard field has occluded pairs");
    w.robots[0].body.pose = Pose::new(a.x, a.y, 0.0);
    w.robots[2].body.pose = Pose::new(b.x, b.y, std::f64::consts::PI);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let out = decide_shot(&w, 0, 2, &rules, &sure_hit(), &arena, &mut rng).unwrap();
    assert!(!out.fired);
}
