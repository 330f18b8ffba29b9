//! The multi-view toy manipulation environment.

use crate::camera::{Camera, WRIST_HEIGHT};
use crate::pose::{
    sample_camera_pose, CameraPose, PoseError, RandomizationLevel, RandomizationSpec,
};
use crate::raster::{render_view, Image};
use crate::scene::{SceneState, TaskKind, Waypoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which views the environment renders. Front-type views use per-episode
/// randomized orbit poses; the wrist view is rigidly attached above the
/// gripper.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewKind {
    Front,
    /// A second, independently randomized front-type view.
    Front2,
    Wrist,
}

impl ViewKind {
    pub fn name(self) -> &'static str {
        match self {
            ViewKind::Front => "front",
            ViewKind::Front2 => "front2",
            ViewKind::Wrist => "wrist",
        }
    }
}

/// Episode-level randomization regime. `WeakMedium` draws the level anew
/// each episode (weak or medium, equal probability).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Randomization {
    None,
    Weak,
    Medium,
    Strong,
    WeakMedium,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub task: TaskKind,
    pub views: Vec<ViewKind>,
    pub image_size: usize,
    pub randomization: Randomization,
    pub max_episode_length: usize,
    /// Environment RNG stream seed; 0 means "derive from the trainer seed".
    pub seed: u64,
    pub waypoint_tolerance: f64,
    pub max_delta: f64,
    pub workspace_half_xy: f64,
    pub workspace_z: [f64; 2],
    pub object_range: f64,
    pub grasp_radius: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            task: TaskKind::ReachPlace,
            views: vec![ViewKind::Front, ViewKind::Wrist],
            image_size: 64,
            randomization: Randomization::None,
            max_episode_length: 150,
            seed: 0,
            waypoint_tolerance: 0.035,
            max_delta: 0.05,
            workspace_half_xy: 0.35,
            workspace_z: [0.02, 0.45],
            object_range: 0.24,
            grasp_radius: 0.06,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        if !matches!(self.image_size, 64 | 96) {
            return Err(EnvError::BadConfig(format!(
                "env.image_size must be 64 or 96, got {}",
                self.image_size
            )));
        }
        if self.views.is_empty() {
            return Err(EnvError::BadConfig("env.views must not be empty".into()));
        }
        if self.max_episode_length == 0 || self.max_episode_length > 10_000 {
            return Err(EnvError::BadConfig(
                "env.max_episode_length out of range".into(),
            ));
        }
        if self.waypoint_tolerance <= 0.0 || self.max_delta <= 0.0 {
            return Err(EnvError::BadConfig(
                "tolerances and step sizes must be positive".into(),
            ));
        }
        if self.workspace_z[0] >= self.workspace_z[1] || self.workspace_half_xy <= 0.0 {
            return Err(EnvError::BadConfig("workspace box is degenerate".into()));
        }
        if self.object_range + 0.05 > self.workspace_half_xy {
            return Err(EnvError::BadConfig(
                "env.object_range leaves no margin inside the workspace".into(),
            ));
        }
        Ok(())
    }

    /// Full diagonal of the workspace box; normalizes distance rewards.
    pub fn workspace_diagonal(&self) -> f64 {
        let dx = 2.0 * self.workspace_half_xy;
        let dz = self.workspace_z[1] - self.workspace_z[0];
        (dx * dx + dx * dx + dz * dz).sqrt()
    }
}

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid environment config: {0}")]
    BadConfig(String),
    #[error("invalid randomization spec: {0}")]
    BadSpec(#[from] PoseError),
    #[error("step() called on a finished episode")]
    EpisodeFinished,
}

/// One multi-view frame with the per-episode camera poses.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiViewObservation {
    pub views: Vec<Image>,
    pub view_kinds: Vec<ViewKind>,
    pub poses: Vec<CameraPose>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub obs: MultiViewObservation,
    pub action: [f32; 4],
    pub reward: f32,
    pub is_first: bool,
    pub is_last: bool,
    pub is_terminal: bool,
    pub success: bool,
}

pub struct ToyEnv {
    cfg: EnvConfig,
    rng: ChaCha8Rng,
    scene: SceneState,
    poses: Vec<CameraPose>,
    done: bool,
    started: bool,
    prev_grasp_cmd: f32,
}

impl ToyEnv {
    pub fn new(cfg: EnvConfig) -> Result<ToyEnv, EnvError> {
        cfg.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Ok(ToyEnv {
            cfg,
            rng,
            scene: SceneState {
                gripper: [0.0, 0.0, 0.3],
                grasped: false,
                objects: vec![],
                target: [0.0, 0.0, 0.0],
                waypoints: vec![],
                cursor: 0,
                step: 0,
            },
            poses: Vec::new(),
            done: true,
            started: false,
            prev_grasp_cmd: -1.0,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn scene(&self) -> &SceneState {
        &self.scene
    }

    pub fn poses(&self) -> &[CameraPose] {
        &self.poses
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    fn episode_spec(&mut self) -> RandomizationSpec {
        let level = match self.cfg.randomization {
            Randomization::None => RandomizationLevel::None,
            Randomization::Weak => RandomizationLevel::Weak,
            Randomization::Medium => RandomizationLevel::Medium,
            Randomization::Strong => RandomizationLevel::Strong,
            Randomization::WeakMedium => {
                if self.rng.random_bool(0.5) {
                    RandomizationLevel::Weak
                } else {
                    RandomizationLevel::Medium
                }
            }
        };
        RandomizationSpec::for_level(level)
    }

    /// Starts a new episode: samples the layout and one camera pose per
    /// view, both frozen for the episode.
    pub fn reset(&mut self) -> Result<MultiViewObservation, EnvError> {
        self.scene = SceneState::sample(self.cfg.task, self.cfg.object_range, &mut self.rng);
        self.poses = Vec::with_capacity(self.cfg.views.len());
        let views = self.cfg.views.clone();
        for view in &views {
            let pose = match view {
                ViewKind::Front | ViewKind::Front2 => {
                    let spec = match self.cfg.randomization {
                        Randomization::WeakMedium => {
                            // level drawn independently per view and episode
                            let level = if self.rng.random_bool(0.5) {
                                RandomizationLevel::Weak
                            } else {
                                RandomizationLevel::Medium
                            };
                            RandomizationSpec::for_level(level)
                        }
                        _ => self.episode_spec(),
                    };
                    sample_camera_pose(&spec, &mut self.rng)?
                }
                ViewKind::Wrist => CameraPose {
                    theta: 0.0,
                    phi: 90.0,
                    psi: 0.0,
                    d: WRIST_HEIGHT,
                    h: WRIST_HEIGHT,
                },
            };
            self.poses.push(pose);
        }
        self.done = false;
        self.started = true;
        self.prev_grasp_cmd = -1.0;
        Ok(self.observe())
    }

    /// Renders all views of the current scene.
    pub fn observe(&self) -> MultiViewObservation {
        let views = self
            .cfg
            .views
            .iter()
            .zip(&self.poses)
            .map(|(kind, pose)| {
                let cam = match kind {
                    ViewKind::Wrist => Camera::wrist(self.scene.gripper, self.cfg.image_size),
                    _ => Camera::from_pose(pose, self.cfg.image_size),
                };
                render_view(&self.scene, &cam)
            })
            .collect();
        MultiViewObservation {
            views,
            view_kinds: self.cfg.views.clone(),
            poses: self.poses.clone(),
        }
    }

    /// Applies one action. Components are clamped to [-1, 1]; commanding the
    /// gripper outside the workspace box ends the episode early.
    pub fn step(&mut self, action: [f32; 4]) -> Result<Transition, EnvError> {
        if self.done || !self.started {
            return Err(EnvError::EpisodeFinished);
        }
        let a: Vec<f64> = action.iter().map(|&x| (x as f64).clamp(-1.0, 1.0)).collect();

        let commanded = [
            self.scene.gripper[0] + a[0] * self.cfg.max_delta,
            self.scene.gripper[1] + a[1] * self.cfg.max_delta,
            self.scene.gripper[2] + a[2] * self.cfg.max_delta,
        ];
        let hxy = self.cfg.workspace_half_xy;
        let (zlo, zhi) = (self.cfg.workspace_z[0], self.cfg.workspace_z[1]);
        let out_of_box = commanded[0].abs() > hxy
            || commanded[1].abs() > hxy
            || commanded[2] < zlo
            || commanded[2] > zhi;
        self.scene.gripper = [
            commanded[0].clamp(-hxy, hxy),
            commanded[1].clamp(-hxy, hxy),
            commanded[2].clamp(zlo, zhi),
        ];

        // grasp toggles on a sign crossing of the grasp channel near the
        // object
        let cmd = a[3] as f32;
        if cmd > 0.0 && self.prev_grasp_cmd <= 0.0 {
            if !self.scene.grasped
                && crate::scene::dist(self.scene.gripper, self.scene.objects[0])
                    <= self.cfg.grasp_radius
            {
                self.scene.grasped = true;
            }
        } else if cmd <= 0.0 && self.prev_grasp_cmd > 0.0 && self.scene.grasped {
            self.scene.grasped = false;
            // released object settles back onto the table
            self.scene.objects[0][2] = crate::scene::OBJECT_REST_Z;
        }
        self.prev_grasp_cmd = cmd;
        if self.scene.grasped {
            self.scene.objects[0] = self.scene.gripper;
        }

        // waypoint bookkeeping and reward
        let mut reward = 0.0f64;
        if let Some(w) = self.scene.next_waypoint().copied() {
            let d = crate::scene::dist(self.scene.gripper, w.pos);
            let grasp_ok = !w.requires_grasp || self.scene.grasped;
            if d <= self.cfg.waypoint_tolerance && grasp_ok {
                self.scene.cursor += 1;
            } else {
                reward = -d / self.cfg.workspace_diagonal();
            }
        }
        self.scene.step += 1;

        let success = self.scene.succeeded();
        let timeout = self.scene.step >= self.cfg.max_episode_length;
        let is_last = success || timeout || out_of_box;
        let is_terminal = success || out_of_box;
        self.done = is_last;

        Ok(Transition {
            obs: self.observe(),
            action,
            reward: reward as f32,
            is_first: false,
            is_last,
            is_terminal,
            success,
        })
    }

    /// The waypoint the scripted expert is currently steering toward.
    pub fn expert_action(&self) -> [f32; 4] {
        crate::expert::scripted_expert_action(&self.scene, &self.cfg)
    }
}

/// Builds the reset transition row for buffers/exports.
pub fn reset_transition(obs: MultiViewObservation) -> Transition {
    Transition {
        obs,
        action: [0.0; 4],
        reward: 0.0,
        is_first: true,
        is_last: false,
        is_terminal: false,
        success: false,
    }
}

/// A waypoint list accessor used by tests.
pub fn waypoints_of(scene: &SceneState) -> &[Waypoint] {
    &scene.waypoints
}
