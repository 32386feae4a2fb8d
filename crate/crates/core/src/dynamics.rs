//! Mecanum-wheel chassis dynamics: kinematics, per-wheel PID torque control
//! with motor saturation, rolling and sliding friction, fixed-timestep
//! integration and footprint collision resolution.
//!
//! The wheel loop runs at 1 kHz inside each 20 ms physics tick. Each wheel
//! carries its own rotor inertia plus a quarter of the chassis mass reflected
//! through the wheel radius, so both `mass` and `wheel_inertia` shape the
//! torque-limited acceleration. The chassis then tracks the wheel-implied
//! twist with its acceleration capped at `mu_slide * g` (wheel slip).

use crate::arena::Arena;
use crate::geometry::{wrap_angle, Point, Pose};
use crate::referee::HitParams;
use serde::{Deserialize, Serialize};

pub const GRAVITY: f64 = 9.81;
pub const TICK_DT: f64 = 0.02;
pub const MOTOR_DT: f64 = 0.001;
pub const MAX_LINEAR_SPEED: f64 = 2.0;
pub const MAX_ANGULAR_SPEED: f64 = 1.75;
pub const FOOTPRINT_RADIUS: f64 = 0.3;
/// Extra clearance left after pushing a footprint out of an obstacle.
const PUSH_MARGIN: f64 = 1e-9;

/// Opponent bot difficulty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    #[default]
    Easy,
    Middle,
    Hard,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Easy, Level::Middle, Level::Hard];

    /// Numeric code used by the context registry (1, 2, 3).
    pub fn code(self) -> u8 {
        match self {
            Level::Easy => 1,
            Level::Middle => 2,
            Level::Hard => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Level> {
        match code {
            1 => Some(Level::Easy),
            2 => Some(Level::Middle),
            3 => Some(Level::Hard),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Level::Easy => "easy",
            Level::Middle => "middle",
            Level::Hard => "hard",
        }
    }
}

impl std::str::FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "easy" | "1" => Ok(Level::Easy),
            "middle" | "medium" | "2" => Ok(Level::Middle),
            "hard" | "3" => Ok(Level::Hard),
            other => Err(format!("unknown level `{other}`")),
        }
    }
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Sim2Real parameter bundle applied to every robot at reset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsContext {
    pub mu_slide: f64,
    pub mu_roll: f64,
    /// Motor torque limit, N·m.
    pub tau_max: f64,
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Clamp on the PID integral state.
    pub i_max: f64,
    pub mass: f64,
    pub wheel_inertia: f64,
    pub wheel_radius: f64,
    pub half_length: f64,
    pub half_width: f64,
    pub hit: HitParams,
    pub level: Level,
}

impl Default for DynamicsContext {
    fn default() -> Self {
        Self {
            mu_slide: 0.4,
            mu_roll: 0.015,
            tau_max: 1.5,
            kp: 8.0,
            ki: 0.5,
            kd: 0.001,
            i_max: 2.0,
            mass: 15.0,
            wheel_inertia: 1e-3,
            wheel_radius: 0.05,
            half_length: 0.2,
            half_width: 0.2,
            hit: HitParams::default(),
            level: Level::Easy,
        }
    }
}

impl DynamicsContext {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("tau_max", self.tau_max),
            ("mass", self.mass),
            ("wheel_inertia", self.wheel_inertia),
            ("wheel_radius", self.wheel_radius),
            ("half_length", self.half_length),
            ("half_width", self.half_width),
            ("i_max", self.i_max),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [("mu_slide", self.mu_slide), ("mu_roll", self.mu_roll)] {
            if !(v > 0.0 && v <= 2.0) {
                return Err(format!("{name} must lie in (0, 2], got {v}"));
            }
        }
        for (name, v) in [("kp", self.kp), ("ki", self.ki), ("kd", self.kd)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("{name} must be non-negative, got {v}"));
            }
        }
        self.hit.validate()
    }

    pub fn geometry(&self) -> WheelGeometry {
        WheelGeometry {
            radius: self.wheel_radius,
            half_length: self.half_length,
            half_width: self.half_width,
        }
    }

    pub fn gains(&self) -> PidGains {
        PidGains {
            kp: self.kp,
            ki: self.ki,
            kd: self.kd,
            i_max: self.i_max,
        }
    }

    /// Inertia seen by one wheel: rotor plus a quarter of the chassis mass.
    pub fn effective_wheel_inertia(&self) -> f64 {
        self.wheel_inertia + 0.25 * self.mass * self.wheel_radius * self.wheel_radius
    }

    /// Rolling-resistance torque magnitude on one wheel.
    pub fn rolling_torque(&self) -> f64 {
        self.mu_roll * (self.mass * GRAVITY / 4.0) * self.wheel_radius
    }

    /// Chassis acceleration bound from wheel slip.
    pub fn slip_acceleration(&self) -> f64 {
        self.mu_slide * GRAVITY
    }
}

/// Body-frame velocity: `vx` forward, `vy` left, `omega` counter-clockwise.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

impl Twist {
    pub const ZERO: Twist = Twist {
        vx: 0.0,
        vy: 0.0,
        omega: 0.0,
    };

    pub fn new(vx: f64, vy: f64, omega: f64) -> Self {
        Self { vx, vy, omega }
    }

    /// Clamped to the commandable ranges (±2 m/s, ±1.75 rad/s).
    pub fn clamped(self) -> Twist {
        Twist {
            vx: self.vx.clamp(-MAX_LINEAR_SPEED, MAX_LINEAR_SPEED),
            vy: self.vy.clamp(-MAX_LINEAR_SPEED, MAX_LINEAR_SPEED),
            omega: self.omega.clamp(-MAX_ANGULAR_SPEED, MAX_ANGULAR_SPEED),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.vx.is_finite() && self.vy.is_finite() && self.omega.is_finite()
    }

    pub fn linear_speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WheelGeometry {
    pub radius: f64,
    pub half_length: f64,
    pub half_width: f64,
}

impl Default for WheelGeometry {
    fn default() -> Self {
        DynamicsContext::default().geometry()
    }
}

/// Wheel speeds (rad/s, order FL, FR, RL, RR) realizing a body twist.
pub fn mecanum_inverse(t: Twist, g: &WheelGeometry) -> [f64; 4] {
    let k = g.half_length + g.half_width;
    let inv_r = 1.0 / g.radius;
    [
        inv_r * (t.vx - t.vy - k * t.omega),
        inv_r * (t.vx + t.vy + k * t.omega),
        inv_r * (t.vx + t.vy - k * t.omega),
        inv_r * (t.vx - t.vy + k * t.omega),
    ]
}

/// Least-squares body twist from wheel speeds (order FL, FR, RL, RR).
pub fn mecanum_forward(w: &[f64; 4], g: &WheelGeometry) -> Twist {
    let r = g.radius;
    let k = g.half_length + g.half_width;
    Twist {
        vx: r * (w[0] + w[1] + w[2] + w[3]) / 4.0,
        vy: r * (-w[0] + w[1] + w[2] - w[3]) / 4.0,
        omega: r * (-w[0] + w[1] - w[2] + w[3]) / (4.0 * k),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub i_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: f64,
}

/// One PID update per wheel with a clamped, conditionally-integrated
/// integral term. Returns torques clamped to `±tau_max`.
pub fn pid_control(
    setpoints: &[f64; 4],
    measured: &[f64; 4],
    state: &mut [PidState; 4],
    gains: &PidGains,
    tau_max: f64,
    dt: f64,
) -> [f64; 4] {
    debug_assert!(dt > 0.0);
    let mut torques = [0.0; 4];
    for i in 0..4 {
        let e = setpoints[i] - measured[i];
        let s = &mut state[i];
        let derivative = (e - s.prev_error) / dt;
        s.prev_error = e;
        let integral = (s.integral + e * dt).clamp(-gains.i_max, gains.i_max);
        let tau = gains.kp * e + gains.ki * integral + gains.kd * derivative;
        // Conditional integration: hold the integral while the output is
        // saturated in the direction the error is pushing.
        if tau.abs() <= tau_max || tau.signum() != e.signum() {
            s.integral = integral;
        }
        torques[i] = tau.clamp(-tau_max, tau_max);
    }
    torques
}

/// Kinematic and actuator state of one robot chassis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotBody {
    pub pose: Pose,
    pub twist: Twist,
    pub wheel_speeds: [f64; 4],
    pub pid: [PidState; 4],
    pub footprint_radius: f64,
}

impl RobotBody {
    pub fn at_rest(pose: Pose) -> Self {
        Self {
            pose,
            twist: Twist::ZERO,
            wheel_speeds: [0.0; 4],
            pid: [PidState::default(); 4],
            footprint_radius: FOOTPRINT_RADIUS,
        }
    }

    pub fn position(&self) -> Point {
        self.pose.position()
    }

    /// Chassis velocity in the world frame.
    pub fn world_velocity(&self) -> Point {
        let (s, c) = self.pose.theta.sin_cos();
        Point::new(
            c * self.twist.vx - s * self.twist.vy,
            s * self.twist.vx + c * self.twist.vy,
        )
    }

    fn set_world_velocity(&mut self, v: Point) {
        let (s, c) = self.pose.theta.sin_cos();
        self.twist.vx = c * v.x + s * v.y;
        self.twist.vy = -s * v.x + c * v.y;
    }

    fn is_finite(&self) -> bool {
        self.pose.x.is_finite()
            && self.pose.y.is_finite()
            && self.pose.theta.is_finite()
            && self.twist.is_finite()
            && self.wheel_speeds.iter().all(|w| w.is_finite())
    }
}

/// Advances one wheel by one motor step under Coulomb rolling friction.
/// Friction can stop the wheel but never reverse it.
fn wheel_step(w: f64, tau: f64, inertia: f64, tau_roll: f64, h: f64) -> f64 {
    let free = w + h * tau / inertia;
    let friction_dv = h * tau_roll / inertia;
    if free.abs() <= friction_dv {
        0.0
    } else {
        free - friction_dv * free.signum()
    }
}

/// One fixed-timestep update of a single chassis, ignoring collisions.
///
/// Panics if any state becomes non-finite.
pub fn physics_tick(body: &RobotBody, command: Twist, ctx: &DynamicsContext, dt: f64) -> RobotBody {
    assert!(command.is_finite(), "non-finite twist command: {command:?}");
    let geom = ctx.geometry();
    let gains = ctx.gains();
    let cmd = command.clamped();
    let setpoints = mecanum_inverse(cmd, &geom);
    let j_eff = ctx.effective_wheel_inertia();
    let tau_roll = ctx.rolling_torque();

    let mut out = *body;
    let substeps = (dt / MOTOR_DT).round().max(1.0) as usize;
    let h = dt / substeps as f64;
    for _ in 0..substeps {
        let torques = pid_control(&setpoints, &out.wheel_speeds, &mut out.pid, &gains, ctx.tau_max, h);
        for (w, tau) in out.wheel_speeds.iter_mut().zip(torques) {
            *w = wheel_step(*w, tau, j_eff, tau_roll, h);
        }
    }

    // Chassis tracks the wheel-implied twist up to the slip limit.
    let target = mecanum_forward(&out.wheel_speeds, &geom);
    let lever = geom.half_length + geom.half_width;
    let dvx = target.vx - out.twist.vx;
    let dvy = target.vy - out.twist.vy;
    let dw = (target.omega - out.twist.omega) * lever;
    let demand = (dvx * dvx + dvy * dvy + dw * dw).sqrt();
    let cap = ctx.slip_acceleration() * dt;
    let scale = if demand > cap { cap / demand } else { 1.0 };
    out.twist.vx += dvx * scale;
    out.twist.vy += dvy * scale;
    out.twist.omega += (target.omega - out.twist.omega) * scale;

    // Semi-implicit Euler: integrate the pose with the updated twist.
    let v = out.world_velocity();
    out.pose.x += v.x * dt;
    out.pose.y += v.y * dt;
    out.pose.theta = wrap_angle(out.pose.theta + out.twist.omega * dt);

    assert!(out.is_finite(), "physics produced a non-finite state: {out:?}");
    out
}

/// Removes the velocity component pointing along `-normal`.
fn stop_normal_motion(body: &mut RobotBody, normal: Point) {
    let v = body.world_velocity();
    let vn = v.dot(normal);
    if vn < 0.0 {
        body.set_world_velocity(v.sub(normal.scale(vn)));
    }
}

/// Pushes a footprint out of walls and obstacles. Returns true if moved.
fn resolve_static(body: &mut RobotBody, arena: &Arena) -> bool {
    let r = body.footprint_radius;
    let mut moved = false;
    let mut p = body.position();
    let walls = [
        (p.x < r, Point::new(1.0, 0.0)),
        (p.x > arena.length - r, Point::new(-1.0, 0.0)),
        (p.y < r, Point::new(0.0, 1.0)),
        (p.y > arena.width - r, Point::new(0.0, -1.0)),
    ];
    for (hit, n) in walls {
        if hit {
            stop_normal_motion(body, n);
            moved = true;
        }
    }
    p.x = p.x.clamp(r, arena.length - r);
    p.y = p.y.clamp(r, arena.width - r);

    for o in &arena.obstacles {
        let rect = o.rect();
        let q = rect.closest_point(p);
        let d = p.dist(q);
        if d > r {
            continue;
        }
        let n = if d > 1e-12 {
            let n = p.sub(q).scale(1.0 / d);
            p = q.add(n.scale(r + PUSH_MARGIN));
            n
        } else {
            // Center inside the rectangle: leave through the nearest face.
            let (lo, hi) = (rect.min(), rect.max());
            let faces = [
                (p.x - lo.x, Point::new(-1.0, 0.0)),
                (hi.x - p.x, Point::new(1.0, 0.0)),
                (p.y - lo.y, Point::new(0.0, -1.0)),
                (hi.y - p.y, Point::new(0.0, 1.0)),
            ];
            let (depth, n) = faces
                .into_iter()
                .fold((f64::INFINITY, Point::default()), |best, f| if f.0 < best.0 { f } else { best });
            p = p.add(n.scale(depth + r + PUSH_MARGIN));
            n
        };
        stop_normal_motion(body, n);
        moved = true;
    }
    body.pose.x = p.x;
    body.pose.y = p.y;
    moved
}

/// Separates overlapping footprints and pushes every body out of static
/// geometry. Static geometry is resolved last, so every returned pose is
/// clear of walls and obstacles.
pub fn resolve_collisions(bodies: &mut [RobotBody], arena: &Arena) {
    for i in 0..bodies.len() {
        for j in (i + 1)..bodies.len() {
            let (pi, pj) = (bodies[i].position(), bodies[j].position());
            let min_d = bodies[i].footprint_radius + bodies[j].footprint_radius;
            let d = pi.dist(pj);
            if d >= min_d {
                continue;
            }
            let n = if d > 1e-12 {
                pj.sub(pi).scale(1.0 / d)
            } else {
                Point::new(1.0, 0.0)
            };
            let push = 0.5 * (min_d - d) + PUSH_MARGIN;
            bodies[i].pose.x -= n.x * push;
            bodies[i].pose.y -= n.y * push;
            bodies[j].pose.x += n.x * push;
            bodies[j].pose.y += n.y * push;
            stop_normal_motion(&mut bodies[i], n.scale(-1.0));
            stop_normal_motion(&mut bodies[j], n);
        }
    }
    for body in bodies.iter_mut() {
        for _ in 0..8 {
            if !resolve_static(body, arena) {
                break;
            }
        }
    }
}
