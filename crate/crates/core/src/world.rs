//! Full simulation state shared by the referee, the bots and the environment.

use crate::dynamics::RobotBody;
use crate::geometry::{Point, Pose};
use crate::referee::{CombatRules, ShotOutcome};
use serde::{Deserialize, Serialize};

pub const N_ROBOTS: usize = 4;
pub const ROBOTS_PER_TEAM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Team {
    Red,
    Blue,
}

impl Team {
    pub fn of(robot: usize) -> Team {
        if robot < ROBOTS_PER_TEAM {
            Team::Red
        } else {
            Team::Blue
        }
    }

    pub fn index(self) -> usize {
        match self {
            Team::Red => 0,
            Team::Blue => 1,
        }
    }

    pub fn opponent(self) -> Team {
        match self {
            Team::Red => Team::Blue,
            Team::Blue => Team::Red,
        }
    }

    /// Robot ids belonging to this team.
    pub fn members(self) -> [usize; ROBOTS_PER_TEAM] {
        match self {
            Team::Red => [0, 1],
            Team::Blue => [2, 3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub body: RobotBody,
    pub hp: u32,
    pub bullets: u32,
}

impl RobotState {
    pub fn alive(&self) -> bool {
        self.hp > 0
    }

    pub fn pose(&self) -> Pose {
        self.body.pose
    }

    pub fn position(&self) -> Point {
        self.body.position()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    /// Robots 0, 1 are red; 2, 3 are blue.
    pub robots: [RobotState; N_ROBOTS],
    pub tick: u32,
    /// HP removed from the opposing team, per team (red, blue).
    pub damage_dealt: [u32; 2],
    /// Shot outcomes not yet consumed by the environment.
    pub events: Vec<ShotOutcome>,
}

impl WorldState {
    pub fn new(poses: [Pose; N_ROBOTS], rules: &CombatRules) -> Self {
        Self {
            robots: poses.map(|p| RobotState {
                body: RobotBody::at_rest(p),
                hp: rules.hp0,
                bullets: rules.bullets0,
            }),
            tick: 0,
            damage_dealt: [0; 2],
            events: Vec::new(),
        }
    }

    pub fn team_alive(&self, team: Team) -> bool {
        team.members().iter().any(|&i| self.robots[i].alive())
    }

    pub fn team_hp(&self, team: Team) -> u32 {
        team.members().iter().map(|&i| self.robots[i].hp).sum()
    }

    /// Footprint circles of every robot except `skip`.
    pub fn footprints_except(&self, skip: usize) -> Vec<(Point, f64)> {
        self.robots
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != skip)
            .map(|(_, r)| (r.position(), r.body.footprint_radius))
            .collect()
    }
}
