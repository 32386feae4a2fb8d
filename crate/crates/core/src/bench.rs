//! Headless throughput measurement.

use crate::arena::Arena;
use crate::dynamics::{physics_tick, resolve_collisions, DynamicsContext, RobotBody, Twist, TICK_DT};
use crate::geometry::Pose;
use crate::world::N_ROBOTS;
use serde::Serialize;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchReport {
    pub ticks: u64,
    pub seconds: f64,
    pub ticks_per_sec: f64,
}

/// Starting bodies for four robots spread over the field.
pub fn bench_bodies(arena: &Arena) -> [RobotBody; N_ROBOTS] {
    let (l, w) = (arena.length, arena.width);
    [
        RobotBody::at_rest(Pose::new(0.25 * l, 0.25 * w, 0.0)),
        RobotBody::at_rest(Pose::new(0.25 * l, 0.75 * w, 0.0)),
        RobotBody::at_rest(Pose::new(0.75 * l, 0.25 * w, std::f64::consts::PI)),
        RobotBody::at_rest(Pose::new(0.75 * l, 0.75 * w, std::f64::consts::PI)),
    ]
}

/// Advances all four robots and resolves contacts, once per call.
pub fn world_tick(bodies: &mut [RobotBody; N_ROBOTS], commands: &[Twist; N_ROBOTS], ctx: &DynamicsContext, arena: &Arena) {
    for (b, c) in bodies.iter_mut().zip(commands) {
        *b = physics_tick(b, *c, ctx, TICK_DT);
    }
    resolve_collisions(bodies, arena);
}

/// Runs `ticks` world ticks of four robots driving curves on `arena` and
/// reports the wall-clock rate. Commands change every 50 ticks so the
/// controllers never settle into a trivial steady state.
pub fn physics_throughput(arena: &Arena, ctx: &DynamicsContext, ticks: u64) -> BenchReport {
    let mut bodies = bench_bodies(arena);
    let start = Instant::now();
    for t in 0..ticks {
        let phase = (t / 50) as f64;
        let commands: [Twist; N_ROBOTS] = std::array::from_fn(|i| {
            let a = phase * 0.7 + i as f64 * 1.3;
            Twist::new(1.5 * a.cos(), 1.5 * a.sin(), 0.8 * (a * 0.5).sin())
        });
        world_tick(&mut bodies, &commands, ctx, arena);
    }
    std::hint::black_box(&bodies);
    let seconds = start.elapsed().as_secs_f64();
    BenchReport {
        ticks,
        seconds,
        ticks_per_sec: ticks as f64 / seconds.max(1e-12),
    }
}
