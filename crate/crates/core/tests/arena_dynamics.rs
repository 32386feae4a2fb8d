use combat_arena::arena::{Arena, DEFAULT_LIDAR_RANGE, DEFAULT_LIDAR_RAYS};
use combat_arena::dynamics::{
    mecanum_forward, mecanum_inverse, physics_tick, resolve_collisions, DynamicsContext, RobotBody, Twist,
    FOOTPRINT_RADIUS, TICK_DT,
};
use combat_arena::geometry::{Point, Pose};
use proptest::prelude::*;
use std::f64::consts::PI;
use std::sync::OnceLock;

fn standard() -> &'static Arena {
    static A: OnceLock<Arena> = OnceLock::new();
    A.get_or_init(Arena::standard)
}

fn point_in_field() -> impl Strategy<Value = Point> {
    (0.0..8.1f64, 0.0..5.1f64).prop_map(|(x, y)| Point::new(x, y))
}

fn free_body() -> impl Strategy<Value = RobotBody> {
    (point_in_field(), -PI..PI)
        .prop_filter("start must be free", |(p, _)| standard().is_free(*p, FOOTPRINT_RADIUS))
        .prop_map(|(p, th)| RobotBody::at_rest(Pose::new(p.x, p.y, th)))
}

fn twist() -> impl Strategy<Value = Twist> {
    (-2.0..2.0f64, -2.0..2.0f64, -1.75..1.75f64).prop_map(|(a, b, c)| Twist::new(a, b, c))
}

/// Distance from `o` along `angle` to the boundary of `[0, l] x [0, w]`.
fn wall_distance(o: Point, angle: f64, l: f64, w: f64) -> f64 {
    let (dx, dy) = (angle.cos(), angle.sin());
    let tx = if dx > 1e-15 { (l - o.x) / dx } else if dx < -1e-15 { -o.x / dx } else { f64::INFINITY };
    let ty = if dy > 1e-15 { (w - o.y) / dy } else if dy < -1e-15 { -o.y / dy } else { f64::INFINITY };
    tx.min(ty)
}

/// Exact clearance test against the obstacle rectangles and the walls.
fn clear(arena: &Arena, p: Point, r: f64) -> bool {
    p.x >= r
        && p.y >= r
        && p.x <= arena.length - r
        && p.y <= arena.width - r
        && arena.obstacles.iter().all(|o| {
            let dx = ((p.x - o.center[0]).abs() - o.half_extents[0]).max(0.0);
            let dy = ((p.y - o.center[1]).abs() - o.half_extents[1]).max(0.0);
            dx.hypot(dy) > r
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn is_free_is_monotone_in_inflation(p in point_in_field(), i in 0.0..1.0f64, u in 0.0..1.0f64) {
        if standard().is_free(p, i) {
            prop_assert!(standard().is_free(p, i * u));
        }
    }

    #[test]
    fn line_of_sight_is_symmetric(a in point_in_field(), b in point_in_field()) {
        prop_assert_eq!(standard().line_of_sight(a, b), standard().line_of_sight(b, a));
    }

    #[test]
    fn lidar_ranges_are_bounded(body in free_body()) {
        let scan = standard().lidar_scan(body.pose, DEFAULT_LIDAR_RAYS, DEFAULT_LIDAR_RANGE, &[]);
        prop_assert_eq!(scan.len(), DEFAULT_LIDAR_RAYS);
        for r in scan {
            prop_assert!(r > 0.0 && r <= DEFAULT_LIDAR_RANGE, "range {}", r);
        }
    }

    #[test]
    fn physics_tick_is_deterministic(body in free_body(), cmd in twist()) {
        let ctx = DynamicsContext::default();
        let a = physics_tick(&body, cmd, &ctx, TICK_DT);
        let b = physics_tick(&body, cmd, &ctx, TICK_DT);
        prop_assert_eq!(a.pose.x.to_bits(), b.pose.x.to_bits());
        prop_assert_eq!(a.pose.y.to_bits(), b.pose.y.to_bits());
        prop_assert_eq!(a.pose.theta.to_bits(), b.pose.theta.to_bits());
        prop_assert_eq!(a.wheel_speeds.map(f64::to_bits), b.wheel_speeds.map(f64::to_bits));
    }

    #[test]
    fn kinematics_round_trip(t in (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64)) {
        let g = DynamicsContext::default().geometry();
        let t = Twist::new(t.0, t.1, t.2);
        let back = mecanum_forward(&mecanum_inverse(t, &g), &g);
        prop_assert!((back.vx - t.vx).abs() < 1e-9 && (back.vy - t.vy).abs() < 1e-9 && (back.omega - t.omega).abs() < 1e-9);
    }

    #[test]
    fn wheels_coast_down_monotonically(body in free_body(), w in prop::array::uniform4(-40.0..40.0f64)) {
        let ctx = DynamicsContext::default();
        let g = ctx.geometry();
        let mut b = body;
        b.wheel_speeds = w;
        b.twist = mecanum_forward(&w, &g);
        let mut prev = w.map(f64::abs);
        for _ in 0..400 {
            b = physics_tick(&b, Twist::ZERO, &ctx, TICK_DT);
            let now = b.wheel_speeds.map(f64::abs);
            for i in 0..4 {
                prop_assert!(now[i] <= prev[i] + 1e-12, "wheel {} sped up: {} -> {}", i, prev[i], now[i]);
            }
            prev = now;
        }
        prop_assert!(prev.iter().all(|&s| s < 1e-9), "still spinning: {:?}", prev);
    }

    #[test]
    fn resolved_poses_clear_static_geometry(bodies in prop::array::uniform4(free_body()), cmds in prop::array::uniform4(twist())) {
        let ctx = DynamicsContext::default();
        let mut bs: Vec<RobotBody> = bodies.to_vec();
        for _ in 0..25 {
            for (b, c) in bs.iter_mut().zip(&cmds) {
                *b = physics_tick(b, *c, &ctx, TICK_DT);
            }
            resolve_collisions(&mut bs, standard());
            for b in &bs {
                prop_assert!(standard().is_free(b.position(), b.footprint_radius), "{:?}", b.pose);
            }
        }
    }

    // Settled speeds carry PID ripples below 1e-6 m/s that are not ordered by torque.
    #[test]
    fn more_torque_never_slows_the_sprint(t1 in 0.05..3.0f64, dt in 0.0..3.0f64, ticks in 5usize..60) {
        let speed_after = |tau: f64| {
            let ctx = DynamicsContext { tau_max: tau, ..DynamicsContext::default() };
            let mut b = RobotBody::at_rest(Pose::new(1.0, 2.55, 0.0));
            for _ in 0..ticks {
                b = physics_tick(&b, Twist::new(2.0, 0.0, 0.0), &ctx, TICK_DT);
            }
            b.twist.linear_speed()
        };
        prop_assert!(speed_after(t1 + dt) >= speed_after(t1) - 1e-6);
    }
}

#[test]
fn empty_field_scan_matches_wall_distances() {
    let arena = Arena::empty(8.1, 5.1);
    for heading in [0.0, 0.3, PI / 2.0, -2.0] {
        let pose = Pose::new(4.05, 2.55, heading);
        let scan = arena.lidar_scan(pose, DEFAULT_LIDAR_RAYS, 100.0, &[]);
        for (i, r) in scan.iter().enumerate() {
            let want = wall_distance(pose.position(), Arena::lidar_bearing(heading, i, DEFAULT_LIDAR_RAYS), 8.1, 5.1);
            assert!((r - want).abs() < 1e-9, "ray {i}: {r} vs {want}");
        }
    }
}

#[test]
fn grid_agrees_with_exact_geometry() {
    let a = standard();
    let g = &a.grid;
    for cy in 0..g.ny {
        for cx in 0..g.nx {
            let c = g.cell_center(cx, cy);
            assert_eq!(g.is_blocked(cx, cy), !clear(a, c, a.inflation), "cell ({cx}, {cy})");
        }
    }
}
