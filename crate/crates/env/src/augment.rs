//! Brightness/contrast video augmentation. One gain and one offset are
//! drawn per clip and shared across every frame and view.

use rand::Rng;

/// Applies `clip(gain * (x - 0.5) + 0.5 + offset)` in place to all frames.
/// `strength = 0` is the identity. Returns the sampled (gain, offset).
pub fn augment_video(
    frames: &mut [impl AsMut<[f32]>],
    rng: &mut impl Rng,
    strength: f64,
) -> (f32, f32) {
    let gain = 1.0 + rng.random_range(-0.4..0.4) * strength;
    let offset = rng.random_range(-0.3..0.3) * strength;
    let (g, b) = (gain as f32, offset as f32);
    if strength == 0.0 {
        return (1.0, 0.0);
    }
    for frame in frames.iter_mut() {
        for px in frame.as_mut().iter_mut() {
            *px = (g * (*px - 0.5) + 0.5 + b).clamp(0.0, 1.0);
        }
    }
    (g, b)
}
