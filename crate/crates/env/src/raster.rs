//! Painter's-algorithm rasterizer for flat scene primitives.

use crate::camera::Camera;
use crate::scene::SceneState;

pub const COLOR_BACKGROUND: [u8; 3] = [186, 196, 206];
pub const COLOR_TABLE: [u8; 3] = [172, 140, 96];
pub const COLOR_TARGET: [u8; 3] = [60, 90, 220];
pub const COLOR_OBJECT: [u8; 3] = [214, 48, 42];
pub const COLOR_GRIPPER: [u8; 3] = [46, 172, 84];
pub const COLOR_GRIPPER_CORE: [u8; 3] = [20, 80, 40];

pub const TABLE_HALF: f64 = 0.55;
pub const OBJECT_RADIUS: f64 = 0.045;
pub const TARGET_RADIUS: f64 = 0.05;
pub const GRIPPER_RADIUS: f64 = 0.035;
pub const GRIPPER_CORE_RADIUS: f64 = 0.016;

/// RGB image with 8-bit channels, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    pub side: usize,
    pub data: Vec<u8>,
}

impl Image {
    pub fn filled(side: usize, color: [u8; 3]) -> Image {
        let mut data = Vec::with_capacity(side * side * 3);
        for _ in 0..side * side {
            data.extend_from_slice(&color);
        }
        Image { side, data }
    }

    #[inline]
    pub fn put(&mut self, x: usize, y: usize, color: [u8; 3]) {
        let o = (y * self.side + x) * 3;
        self.data[o] = color[0];
        self.data[o + 1] = color[1];
        self.data[o + 2] = color[2];
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let o = (y * self.side + x) * 3;
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    /// Pixels in [0, 1], channel-last order.
    pub fn to_f32(&self) -> Vec<f32> {
        self.data.iter().map(|&b| b as f32 / 255.0).collect()
    }
}

/// Renders the scene from one camera. Deterministic; no randomness, no
/// lighting.
pub fn render_view(scene: &SceneState, camera: &Camera) -> Image {
    let mut img = Image::filled(camera.side, COLOR_BACKGROUND);

    // background layer: table plane, then the target marker on it
    let table = [
        [-TABLE_HALF, -TABLE_HALF, 0.0],
        [TABLE_HALF, -TABLE_HALF, 0.0],
        [TABLE_HALF, TABLE_HALF, 0.0],
        [-TABLE_HALF, TABLE_HALF, 0.0],
    ];
    fill_quad(&mut img, camera, &table, COLOR_TABLE);
    let marker = [scene.target[0], scene.target[1], 0.004];
    fill_disc(&mut img, camera, marker, TARGET_RADIUS, COLOR_TARGET);

    // free-standing discs, farthest first so nearer ones overdraw
    let mut discs: Vec<(f64, [f64; 3], f64, [u8; 3])> = Vec::new();
    for obj in &scene.objects {
        discs.push((camera.depth_of(*obj), *obj, OBJECT_RADIUS, COLOR_OBJECT));
    }
    discs.push((
        camera.depth_of(scene.gripper),
        scene.gripper,
        GRIPPER_RADIUS,
        COLOR_GRIPPER,
    ));
    discs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    for (_, center, radius, color) in discs {
        fill_disc(&mut img, camera, center, radius, color);
    }
    // gripper core drawn last as an orientation-free marker
    fill_disc(
        &mut img,
        camera,
        scene.gripper,
        GRIPPER_CORE_RADIUS,
        COLOR_GRIPPER_CORE,
    );
    img
}

fn fill_disc(img: &mut Image, camera: &Camera, center: [f64; 3], radius: f64, color: [u8; 3]) {
    let Some((px, py, z)) = camera.project(center) else {
        return;
    };
    let sr = camera.screen_radius(radius, z);
    let side = img.side as isize;
    let x0 = ((px - sr).floor() as isize).max(0);
    let x1 = ((px + sr).ceil() as isize).min(side - 1);
    let y0 = ((py - sr).floor() as isize).max(0);
    let y1 = ((py + sr).ceil() as isize).min(side - 1);
    let sr2 = sr * sr;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let dx = x as f64 - px;
            let dy = y as f64 - py;
            if dx * dx + dy * dy <= sr2 {
                img.put(x as usize, y as usize, color);
            }
        }
    }
}

fn fill_quad(img: &mut Image, camera: &Camera, corners: &[[f64; 3]; 4], color: [u8; 3]) {
    let mut proj = [[0.0f64; 2]; 4];
    for (i, c) in corners.iter().enumerate() {
        match camera.project(*c) {
            Some((px, py, _)) => proj[i] = [px, py],
            // skip quads that cross the near plane; poses in spec ranges
            // keep the table fully in front of the camera
            None => return,
        }
    }
    fill_triangle(img, &[proj[0], proj[1], proj[2]], color);
    fill_triangle(img, &[proj[0], proj[2], proj[3]], color);
}

fn fill_triangle(img: &mut Image, p: &[[f64; 2]; 3], color: [u8; 3]) {
    let side = img.side as isize;
    let xs = [p[0][0], p[1][0], p[2][0]];
    let ys = [p[0][1], p[1][1], p[2][1]];
    let x0 = (xs.iter().cloned().fold(f64::INFINITY, f64::min).floor() as isize).max(0);
    let x1 = (xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max).ceil() as isize).min(side - 1);
    let y0 = (ys.iter().cloned().fold(f64::INFINITY, f64::min).floor() as isize).max(0);
    let y1 = (ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max).ceil() as isize).min(side - 1);

    let edge = |a: [f64; 2], b: [f64; 2], x: f64, y: f64| -> f64 {
        (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0])
    };
    for y in y0..=y1 {
        for x in x0..=x1 {
            let (fx, fy) = (x as f64, y as f64);
            let e0 = edge(p[0], p[1], fx, fy);
            let e1 = edge(p[1], p[2], fx, fy);
            let e2 = edge(p[2], p[0], fx, fy);
            let inside = (e0 >= 0.0 && e1 >= 0.0 && e2 >= 0.0)
                || (e0 <= 0.0 && e1 <= 0.0 && e2 <= 0.0);
            if inside {
                img.put(x as usize, y as usize, color);
            }
        }
    }
}

/// Counts pixels of an exact color, used by geometry tests.
pub fn count_color(img: &Image, color: [u8; 3]) -> usize {
    img.data.chunks_exact(3).filter(|c| *c == color).count()
}

/// Centroid of pixels matching a color, if any.
pub fn color_centroid(img: &Image, color: [u8; 3]) -> Option<(f64, f64)> {
    let mut n = 0usize;
    let (mut sx, mut sy) = (0.0, 0.0);
    for y in 0..img.side {
        for x in 0..img.side {
            if img.get(x, y) == color {
                n += 1;
                sx += x as f64;
                sy += y as f64;
            }
        }
    }
    if n == 0 {
        None
    } else {
        Some((sx / n as f64, sy / n as f64))
    }
}
