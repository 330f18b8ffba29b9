//! Scene state, task layout and gripper/grasp dynamics.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Rest height of object centers and waypoints above the table.
pub const OBJECT_REST_Z: f64 = 0.06;
/// Gripper start height.
pub const GRIPPER_START_Z: f64 = 0.30;
/// Minimum object/target separation in the sampled layout.
pub const MIN_SEPARATION: f64 = 0.18;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    /// Visit the object position, then the target position.
    Reach,
    /// Grasp the object at the first waypoint and carry it to the target.
    ReachPlace,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Waypoint {
    pub pos: [f64; 3],
    pub requires_grasp: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneState {
    pub gripper: [f64; 3],
    pub grasped: bool,
    pub objects: Vec<[f64; 3]>,
    pub target: [f64; 3],
    pub waypoints: Vec<Waypoint>,
    pub cursor: usize,
    pub step: usize,
}

impl SceneState {
    /// Samples a fresh episode layout.
    pub fn sample(task: TaskKind, object_range: f64, rng: &mut impl Rng) -> SceneState {
        let obj = [
            rng.random_range(-object_range..object_range),
            rng.random_range(-object_range..object_range),
            OBJECT_REST_Z,
        ];
        let target = loop {
            let t = [
                rng.random_range(-object_range..object_range),
                rng.random_range(-object_range..object_range),
                OBJECT_REST_Z,
            ];
            let dx = t[0] - obj[0];
            let dy = t[1] - obj[1];
            if (dx * dx + dy * dy).sqrt() >= MIN_SEPARATION {
                break t;
            }
        };
        let gripper = [
            rng.random_range(-0.05..0.05),
            rng.random_range(-0.05..0.05),
            GRIPPER_START_Z,
        ];
        let requires_grasp = task == TaskKind::ReachPlace;
        let waypoints = vec![
            Waypoint {
                pos: obj,
                requires_grasp,
            },
            Waypoint {
                pos: target,
                requires_grasp,
            },
        ];
        SceneState {
            gripper,
            grasped: false,
            objects: vec![obj],
            target,
            waypoints,
            cursor: 0,
            step: 0,
        }
    }

    pub fn next_waypoint(&self) -> Option<&Waypoint> {
        self.waypoints.get(self.cursor)
    }

    pub fn succeeded(&self) -> bool {
        self.cursor >= self.waypoints.len()
    }

    pub fn dist_to_next(&self) -> f64 {
        match self.next_waypoint() {
            Some(w) => dist(self.gripper, w.pos),
            None => 0.0,
        }
    }
}

pub fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}
