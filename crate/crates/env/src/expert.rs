//! Deterministic scripted expert: a proportional controller over the
//! waypoint list with grasp handling for carry tasks.

use crate::env::EnvConfig;
use crate::scene::{dist, SceneState};

/// Expert movement commands are scaled to this magnitude so behavior-cloning
/// targets stay strictly inside the squashed action range.
pub const EXPERT_CLAMP: f64 = 0.995;
/// Distance at which the expert closes the gripper on the object.
pub const GRASP_TRIGGER: f64 = 0.04;

pub fn scripted_expert_action(scene: &SceneState, cfg: &EnvConfig) -> [f32; 4] {
    let Some(w) = scene.next_waypoint() else {
        return [0.0, 0.0, 0.0, -(EXPERT_CLAMP as f32)];
    };
    let delta = [
        w.pos[0] - scene.gripper[0],
        w.pos[1] - scene.gripper[1],
        w.pos[2] - scene.gripper[2],
    ];
    let mut a = [0.0f32; 4];
    for i in 0..3 {
        a[i] = ((delta[i] / cfg.max_delta).clamp(-1.0, 1.0) * EXPERT_CLAMP) as f32;
    }
    let grasp = if w.requires_grasp {
        if scene.grasped || dist(scene.gripper, scene.objects[0]) <= GRASP_TRIGGER {
            EXPERT_CLAMP
        } else {
            -EXPERT_CLAMP
        }
    } else {
        -EXPERT_CLAMP
    };
    a[3] = grasp as f32;
    a
}
