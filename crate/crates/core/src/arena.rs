//! Static field geometry: obstacles, birth areas, inert zones, the derived
//! occupancy grid, line-of-sight and the LiDAR range sensor.
//!
//! Layouts are stored as TOML (`[field]`, `[[obstacle]]`, `[[birth]]`,
//! `[[zone]]` sections, SI units). The standard layout ships in
//! `data/standard_arena.toml`.

use crate::geometry::{ray_circle_hit, Point, Pose, Rect};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

pub const STANDARD_ARENA: &str = include_str!("../data/standard_arena.toml");

pub const OBSTACLE_COUNT: usize = 9;
pub const BIRTH_COUNT: usize = 4;
pub const ZONE_COUNT: usize = 6;

pub const DEFAULT_CELL_SIZE: f64 = 0.1;
pub const DEFAULT_INFLATION: f64 = 0.3;
pub const DEFAULT_LIDAR_RAYS: usize = 61;
pub const DEFAULT_LIDAR_RANGE: f64 = 6.0;
/// Angular width of the LiDAR fan.
pub const LIDAR_FOV: f64 = 1.5 * PI;

const SPEC_HEADER: &str = "\
# Combat arena layout. SI units (meters), origin at the lower-left corner,
# x along the field length. Obstacle heights are labels only.
";

#[derive(Debug, Error)]
pub enum ArenaError {
    #[error("arena spec parse error: {0}")]
    Parse(String),
    #[error("expected {expected} {what}, found {found}")]
    CountMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{what} {index} lies outside the field")]
    OutsideField { what: &'static str, index: usize },
    #[error("non-positive dimension in {0}")]
    BadDimension(String),
    #[error("obstacle layout is not symmetric under a half-turn about the field center")]
    NotSymmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: [f64; 2],
    pub half_extents: [f64; 2],
    /// Height label in meters; has no effect on the 2D model.
    pub height: f64,
}

impl Obstacle {
    pub fn rect(&self) -> Rect {
        Rect {
            center: self.center,
            half_extents: self.half_extents,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldSection {
    length: f64,
    width: f64,
    cell_size: f64,
    inflation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArenaSpec {
    field: FieldSection,
    #[serde(default)]
    obstacle: Vec<Obstacle>,
    #[serde(default)]
    birth: Vec<Rect>,
    #[serde(default)]
    zone: Vec<Rect>,
}

/// Occupancy bitmap over the field at a fixed cell size, with obstacles
/// inflated by the robot radius.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub nx: usize,
    pub ny: usize,
    pub cell_size: f64,
    blocked: Vec<bool>,
}

impl OccupancyGrid {
    /// Grid from an explicit bitmap in row-major order (`y * nx + x`).
    pub fn from_cells(nx: usize, ny: usize, cell_size: f64, blocked: Vec<bool>) -> Self {
        assert_eq!(blocked.len(), nx * ny, "bitmap size mismatch");
        Self {
            nx,
            ny,
            cell_size,
            blocked,
        }
    }

    pub fn is_blocked(&self, cx: usize, cy: usize) -> bool {
        self.blocked[cy * self.nx + cx]
    }

    pub fn is_free_cell(&self, cx: usize, cy: usize) -> bool {
        !self.is_blocked(cx, cy)
    }

    pub fn cell_center(&self, cx: usize, cy: usize) -> Point {
        Point::new(
            (cx as f64 + 0.5) * self.cell_size,
            (cy as f64 + 0.5) * self.cell_size,
        )
    }

    /// Cell containing `p`, clamped to the grid.
    pub fn cell_of(&self, p: Point) -> (usize, usize) {
        let cx = (p.x / self.cell_size).floor().clamp(0.0, (self.nx - 1) as f64) as usize;
        let cy = (p.y / self.cell_size).floor().clamp(0.0, (self.ny - 1) as f64) as usize;
        (cx, cy)
    }

    /// Free cell whose center is closest to `p` (ties → row-major first).
    pub fn nearest_free_cell(&self, p: Point) -> Option<(usize, usize)> {
        let mut best: Option<((usize, usize), f64)> = None;
        for cy in 0..self.ny {
            for cx in 0..self.nx {
                if self.is_blocked(cx, cy) {
                    continue;
                }
                let d = self.cell_center(cx, cy).dist_sq(p);
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some(((cx, cy), d));
                }
            }
        }
        best.map(|(c, _)| c)
    }

    pub fn free_count(&self) -> usize {
        self.blocked.iter().filter(|b| !**b).count()
    }
}

/// Immutable arena geometry. Cheap to share behind an `Arc`.
#[derive(Debug, Clone)]
pub struct Arena {
    pub length: f64,
    pub width: f64,
    pub obstacles: Vec<Obstacle>,
    pub birth_areas: Vec<Rect>,
    pub zones: Vec<Rect>,
    pub cell_size: f64,
    pub inflation: f64,
    pub grid: OccupancyGrid,
}

/// Parses and validates a standard layout (9 obstacles, 4 birth areas,
/// 6 zones, half-turn symmetric obstacles, everything inside the field).
pub fn load_arena(spec_text: &str) -> Result<Arena, ArenaError> {
    let spec: ArenaSpec = toml::from_str(spec_text).map_err(|e| ArenaError::Parse(e.to_string()))?;
    for (what, expected, found) in [
        ("obstacles", OBSTACLE_COUNT, spec.obstacle.len()),
        ("birth areas", BIRTH_COUNT, spec.birth.len()),
        ("zones", ZONE_COUNT, spec.zone.len()),
    ] {
        if expected != found {
            return Err(ArenaError::CountMismatch {
                what,
                expected,
                found,
            });
        }
    }
    let arena = Arena::from_parts(
        spec.field.length,
        spec.field.width,
        spec.obstacle,
        spec.birth,
        spec.zone,
        spec.field.cell_size,
        spec.field.inflation,
    )?;
    if !arena.is_half_turn_symmetric() {
        return Err(ArenaError::NotSymmetric);
    }
    Ok(arena)
}

impl Arena {
    /// The shipped standard layout.
    pub fn standard() -> Arena {
        load_arena(STANDARD_ARENA).expect("shipped arena layout is valid")
    }

    /// Builds an arena from parts, checking only dimensions and containment.
    /// Used for custom layouts and test fixtures; [`load_arena`] adds the
    /// count and symmetry checks of the standard format.
    pub fn from_parts(
        length: f64,
        width: f64,
        obstacles: Vec<Obstacle>,
        birth_areas: Vec<Rect>,
        zones: Vec<Rect>,
        cell_size: f64,
        inflation: f64,
    ) -> Result<Arena, ArenaError> {
        if !(length > 0.0 && width > 0.0 && cell_size > 0.0) || !(inflation >= 0.0) {
            return Err(ArenaError::BadDimension("field".into()));
        }
        let inside = |r: &Rect| {
            let (lo, hi) = (r.min(), r.max());
            lo.x >= 0.0 && lo.y >= 0.0 && hi.x <= length && hi.y <= width
        };
        for (what, rects) in [
            ("obstacle", obstacles.iter().map(Obstacle::rect).collect::<Vec<_>>()),
            ("birth area", birth_areas.clone()),
            ("zone", zones.clone()),
        ] {
            for (index, r) in rects.iter().enumerate() {
                if !(r.half_extents[0] > 0.0 && r.half_extents[1] > 0.0) {
                    return Err(ArenaError::BadDimension(format!("{what} {index}")));
                }
                if !inside(r) {
                    return Err(ArenaError::OutsideField { what, index });
                }
            }
        }
        let mut arena = Arena {
            length,
            width,
            obstacles,
            birth_areas,
            zones,
            cell_size,
            inflation,
            grid: OccupancyGrid::from_cells(0, 0, cell_size, Vec::new()),
        };
        arena.grid = arena.build_grid();
        Ok(arena)
    }

    /// Obstacle-free field of the given size (test fixture and oracle base).
    pub fn empty(length: f64, width: f64) -> Arena {
        Arena::from_parts(
            length,
            width,
            Vec::new(),
            Vec::new(),
            Vec::new(),
            DEFAULT_CELL_SIZE,
            DEFAULT_INFLATION,
        )
        .expect("empty arena is valid")
    }

    fn build_grid(&self) -> OccupancyGrid {
        let nx = (self.length / self.cell_size).round() as usize;
        let ny = (self.width / self.cell_size).round() as usize;
        let mut blocked = vec![false; nx * ny];
        for cy in 0..ny {
            for cx in 0..nx {
                let c = Point::new(
                    (cx as f64 + 0.5) * self.cell_size,
                    (cy as f64 + 0.5) * self.cell_size,
                );
                blocked[cy * nx + cx] = !self.is_free(c, self.inflation);
            }
        }
        OccupancyGrid::from_cells(nx, ny, self.cell_size, blocked)
    }

    pub fn center(&self) -> Point {
        Point::new(self.length / 2.0, self.width / 2.0)
    }

    /// Serializes the layout in the arena spec format.
    pub fn to_spec_text(&self) -> String {
        let spec = ArenaSpec {
            field: FieldSection {
                length: self.length,
                width: self.width,
                cell_size: self.cell_size,
                inflation: self.inflation,
            },
            obstacle: self.obstacles.clone(),
            birth: self.birth_areas.clone(),
            zone: self.zones.clone(),
        };
        let body = toml::to_string(&spec).expect("arena spec serializes");
        format!("{SPEC_HEADER}\n{body}")
    }

    /// Obstacle set equals its own image under a half-turn about the field
    /// center, compared at micrometer resolution.
    pub fn is_half_turn_symmetric(&self) -> bool {
        let c = self.center();
        let key = |r: &Rect| {
            let q = |v: f64| (v * 1e6).round() as i64;
            (q(r.center[0]), q(r.center[1]), q(r.half_extents[0]), q(r.half_extents[1]))
        };
        let mut original: Vec<_> = self.obstacles.iter().map(|o| key(&o.rect())).collect();
        let mut rotated: Vec<_> = self
            .obstacles
            .iter()
            .map(|o| key(&o.rect().rotated_half_turn(c)))
            .collect();
        original.sort_unstable();
        rotated.sort_unstable();
        original == rotated
    }

    /// True iff `p` lies in the field shrunk by `inflation` and is farther
    /// than `inflation` from every obstacle.
    pub fn is_free(&self, p: Point, inflation: f64) -> bool {
        debug_assert!(inflation >= 0.0);
        if p.x < inflation || p.x > self.length - inflation || p.y < inflation || p.y > self.width - inflation {
            return false;
        }
        self.obstacles
            .iter()
            .all(|o| o.rect().distance(p) > inflation)
    }

    /// True iff the segment `a -> b` touches no obstacle.
    pub fn line_of_sight(&self, a: Point, b: Point) -> bool {
        !self
            .obstacles
            .iter()
            .any(|o| o.rect().intersects_segment(a, b))
    }

    /// Distance along a ray to the first wall or obstacle, unclipped.
    pub fn ray_cast(&self, origin: Point, angle: f64, circles: &[(Point, f64)]) -> f64 {
        let dir = Point::new(angle.cos(), angle.sin());
        let mut best = f64::INFINITY;
        if dir.x > 1e-15 {
            best = best.min((self.length - origin.x) / dir.x);
        } else if dir.x < -1e-15 {
            best = best.min(-origin.x / dir.x);
        }
        if dir.y > 1e-15 {
            best = best.min((self.width - origin.y) / dir.y);
        } else if dir.y < -1e-15 {
            best = best.min(-origin.y / dir.y);
        }
        for o in &self.obstacles {
            if let Some(t) = o.rect().ray_hit(origin, dir) {
                best = best.min(t);
            }
        }
        for &(c, r) in circles {
            if let Some(t) = ray_circle_hit(origin, dir, c, r) {
                best = best.min(t);
            }
        }
        best.max(0.0)
    }

    /// Bearing of ray `i` of an `n_rays` fan centered on `heading`.
    pub fn lidar_bearing(heading: f64, i: usize, n_rays: usize) -> f64 {
        heading - LIDAR_FOV / 2.0 + LIDAR_FOV * i as f64 / (n_rays - 1) as f64
    }

    /// Range scan over a 270° fan centered on the pose heading. `others`
    /// are the footprint circles of the other robots.
    pub fn lidar_scan(&self, pose: Pose, n_rays: usize, max_range: f64, others: &[(Point, f64)]) -> Vec<f64> {
        assert!(n_rays >= 2, "lidar needs at least two rays");
        let origin = pose.position();
        (0..n_rays)
            .map(|i| {
                let bearing = Self::lidar_bearing(pose.theta, i, n_rays);
                self.ray_cast(origin, bearing, others).min(max_range)
            })
            .collect()
    }
}
