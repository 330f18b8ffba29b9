//! Pinhole camera built from pose parameters.

use crate::pose::{floor_offset, CameraPose};

pub const VERTICAL_FOV_DEG: f64 = 60.0;
/// Height of the wrist camera above the gripper.
pub const WRIST_HEIGHT: f64 = 0.30;

type Vec3 = [f64; 3];

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub struct Camera {
    pub pos: Vec3,
    right: Vec3,
    up: Vec3,
    forward: Vec3,
    pub side: usize,
    focal: f64,
    center: f64,
}

impl Camera {
    /// Orbit camera from the five pose parameters, aimed at the scene
    /// origin region: yaw faces the vertical axis, pitch equals `phi`,
    /// then the frame is rolled by `psi` about the optical axis.
    pub fn from_pose(pose: &CameraPose, side: usize) -> Camera {
        let th = pose.theta.to_radians();
        let ph = pose.phi.to_radians();
        let ps = pose.psi.to_radians();
        let h_rel = pose.h - floor_offset();
        let pos = [-pose.d * th.sin(), -pose.d * th.cos(), h_rel];
        let forward = [th.sin() * ph.cos(), th.cos() * ph.cos(), -ph.sin()];
        // right = normalize(forward x world_up); up = right x forward
        let right = normalize(cross(forward, [0.0, 0.0, 1.0]));
        let up = cross(right, forward);
        let (right, up) = roll(right, up, ps);
        Camera::new(pos, right, up, forward, side)
    }

    /// Wrist camera rigidly attached above the gripper, looking straight
    /// down.
    pub fn wrist(gripper: Vec3, side: usize) -> Camera {
        let pos = [gripper[0], gripper[1], gripper[2] + WRIST_HEIGHT];
        let forward = [0.0, 0.0, -1.0];
        let right = [1.0, 0.0, 0.0];
        let up = [0.0, 1.0, 0.0];
        Camera::new(pos, right, up, forward, side)
    }

    fn new(pos: Vec3, right: Vec3, up: Vec3, forward: Vec3, side: usize) -> Camera {
        let focal = (side as f64 / 2.0) / (VERTICAL_FOV_DEG.to_radians() / 2.0).tan();
        Camera {
            pos,
            right,
            up,
            forward,
            side,
            focal,
            center: (side as f64 - 1.0) / 2.0,
        }
    }

    /// Projects a world point to (pixel x, pixel y, depth). `None` when the
    /// point is behind the near plane.
    pub fn project(&self, p: Vec3) -> Option<(f64, f64, f64)> {
        let rel = sub(p, self.pos);
        let z = dot(rel, self.forward);
        if z < 0.05 {
            return None;
        }
        let x = dot(rel, self.right);
        let y = dot(rel, self.up);
        let px = self.center + self.focal * x / z;
        let py = self.center - self.focal * y / z;
        Some((px, py, z))
    }

    /// Screen-space radius of a sphere of world radius `r` at depth `z`.
    pub fn screen_radius(&self, r: f64, z: f64) -> f64 {
        self.focal * r / z
    }

    pub fn depth_of(&self, p: Vec3) -> f64 {
        dot(sub(p, self.pos), self.forward)
    }
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize(a: Vec3) -> Vec3 {
    let n = dot(a, a).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

fn roll(right: Vec3, up: Vec3, psi: f64) -> (Vec3, Vec3) {
    let (s, c) = psi.sin_cos();
    let r = [
        c * right[0] + s * up[0],
        c * right[1] + s * up[1],
        c * right[2] + s * up[2],
    ];
    let u = [
        -s * right[0] + c * up[0],
        -s * right[1] + c * up[1],
        -s * right[2] + c * up[2],
    ];
    (r, u)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_pose_centers_the_origin() {
        let cam = Camera::from_pose(&CameraPose::canonical(), 64);
        let (px, py, z) = cam.project([0.0, 0.0, 0.0]).unwrap();
        assert!(z > 1.0);
        assert!((px - 31.5).abs() < 1e-9, "px = {px}");
        assert!((py - 31.5).abs() < 1e-9, "py = {py}");
    }

    #[test]
    fn roll_180_mirrors_projection() {
        let mut pose = CameraPose::canonical();
        pose.psi = 180.0;
        let cam0 = Camera::from_pose(&CameraPose::canonical(), 96);
        let cam1 = Camera::from_pose(&pose, 96);
        let p = [0.12, -0.07, 0.05];
        let (x0, y0, _) = cam0.project(p).unwrap();
        let (x1, y1, _) = cam1.project(p).unwrap();
        assert!((x1 - (95.0 - x0)).abs() < 1e-9);
        assert!((y1 - (95.0 - y0)).abs() < 1e-9);
    }
}
