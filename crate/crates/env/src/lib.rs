//! Multi-view toy manipulation environment.
//!
//! A software-rasterized tabletop scene observed by a configurable set of
//! cameras: fixed or randomized orbit views and a wrist view that tracks
//! the gripper. Rewards are dense negative distances to the next waypoint;
//! a deterministic scripted expert solves the built-in tasks.

pub mod augment;
pub mod camera;
pub mod demo;
mod env;
pub mod expert;
pub mod pose;
pub mod raster;
pub mod scene;

pub use augment::augment_video;
pub use demo::{export_demos, import_demos, DemoError, Episode};
pub use env::{
    reset_transition, EnvConfig, EnvError, MultiViewObservation, Randomization, ToyEnv,
    Transition, ViewKind,
};
pub use expert::scripted_expert_action;
pub use pose::{
    sample_camera_pose, CameraPose, IntervalSet, PoseError, RandomizationLevel, RandomizationSpec,
};
pub use raster::Image;
pub use scene::{SceneState, TaskKind, Waypoint};
