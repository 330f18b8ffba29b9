//! Camera pose parameters and per-episode viewpoint randomization.
//!
//! A pose is five scalars: orbit angle theta (degrees, clockwise about the
//! scene origin), downward tilt phi (degrees), roll psi (degrees, about the
//! optical axis), horizontal distance d from the origin (scene units) and
//! camera height h above the floor (scene units).

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Canonical (unrandomized) front pose. The floor offset is chosen so this
/// pose looks exactly at the scene origin.
pub const CANONICAL_THETA: f64 = 0.0;
pub const CANONICAL_PHI: f64 = 27.0;
pub const CANONICAL_PSI: f64 = 0.0;
pub const CANONICAL_D: f64 = 1.35;
pub const CANONICAL_H: f64 = 1.6;

/// Height of the scene origin (table surface) above the floor. Defined so
/// the canonical pose's optical axis passes through the origin.
pub fn floor_offset() -> f64 {
    CANONICAL_H - CANONICAL_D * CANONICAL_PHI.to_radians().tan()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub theta: f64,
    pub phi: f64,
    pub psi: f64,
    pub d: f64,
    pub h: f64,
}

impl CameraPose {
    pub fn canonical() -> Self {
        CameraPose {
            theta: CANONICAL_THETA,
            phi: CANONICAL_PHI,
            psi: CANONICAL_PSI,
            d: CANONICAL_D,
            h: CANONICAL_H,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.theta, self.phi, self.psi, self.d, self.h]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Randomization strength for orbit-camera views.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomizationLevel {
    None,
    Weak,
    Medium,
    Strong,
}

/// A union of closed intervals; a parameter is drawn by picking an interval
/// with probability proportional to its length, then uniformly within it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalSet(pub Vec<(f64, f64)>);

impl IntervalSet {
    pub fn point(x: f64) -> Self {
        IntervalSet(vec![(x, x)])
    }

    pub fn single(lo: f64, hi: f64) -> Self {
        IntervalSet(vec![(lo, hi)])
    }

    pub fn pair(a: (f64, f64), b: (f64, f64)) -> Self {
        IntervalSet(vec![a, b])
    }

    pub fn validate(&self) -> Result<(), PoseError> {
        if self.0.is_empty() {
            return Err(PoseError::EmptyIntervalSet);
        }
        for &(lo, hi) in &self.0 {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(PoseError::InvertedInterval { lo, hi });
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: f64) -> bool {
        self.0.iter().any(|&(lo, hi)| x >= lo && x <= hi)
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        let total: f64 = self.0.iter().map(|&(lo, hi)| hi - lo).sum();
        if total <= 0.0 {
            // all point intervals: pick uniformly among them
            let k = rng.random_range(0..self.0.len());
            return self.0[k].0;
        }
        let mut u = rng.random_range(0.0..total);
        for &(lo, hi) in &self.0 {
            let len = hi - lo;
            if u <= len {
                return lo + u;
            }
            u -= len;
        }
        self.0.last().unwrap().1
    }
}

/// Per-parameter interval sets for one randomization level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomizationSpec {
    pub level: RandomizationLevel,
    pub theta: IntervalSet,
    pub phi: IntervalSet,
    pub psi: IntervalSet,
    pub d: IntervalSet,
    pub h: IntervalSet,
}

#[derive(Debug, Error, PartialEq)]
pub enum PoseError {
    #[error("interval set is empty")]
    EmptyIntervalSet,
    #[error("interval has lo > hi or non-finite bounds: ({lo}, {hi})")]
    InvertedInterval { lo: f64, hi: f64 },
}

impl RandomizationSpec {
    pub fn for_level(level: RandomizationLevel) -> Self {
        match level {
            RandomizationLevel::None => RandomizationSpec {
                level,
                theta: IntervalSet::point(CANONICAL_THETA),
                phi: IntervalSet::point(CANONICAL_PHI),
                psi: IntervalSet::point(CANONICAL_PSI),
                d: IntervalSet::point(CANONICAL_D),
                h: IntervalSet::point(CANONICAL_H),
            },
            RandomizationLevel::Weak => RandomizationSpec {
                level,
                theta: IntervalSet::single(-5.0, 5.0),
                phi: IntervalSet::single(26.0, 28.0),
                psi: IntervalSet::single(-5.0, 5.0),
                d: IntervalSet::single(1.25, 1.45),
                h: IntervalSet::single(1.5, 1.7),
            },
            RandomizationLevel::Medium => RandomizationSpec {
                level,
                theta: IntervalSet::single(-7.5, 7.5),
                phi: IntervalSet::single(25.5, 28.5),
                psi: IntervalSet::single(-7.5, 7.5),
                d: IntervalSet::single(1.2, 1.5),
                h: IntervalSet::single(1.45, 1.75),
            },
            RandomizationLevel::Strong => RandomizationSpec {
                level,
                theta: IntervalSet::pair((-10.0, -7.5), (7.5, 10.0)),
                phi: IntervalSet::pair((25.0, 25.5), (28.5, 29.0)),
                psi: IntervalSet::pair((-10.0, -7.5), (7.5, 10.0)),
                d: IntervalSet::pair((1.15, 1.2), (1.5, 1.55)),
                h: IntervalSet::pair((1.4, 1.45), (1.75, 1.8)),
            },
        }
    }

    pub fn validate(&self) -> Result<(), PoseError> {
        self.theta.validate()?;
        self.phi.validate()?;
        self.psi.validate()?;
        self.d.validate()?;
        self.h.validate()
    }

    pub fn contains(&self, pose: &CameraPose) -> bool {
        self.theta.contains(pose.theta)
            && self.phi.contains(pose.phi)
            && self.psi.contains(pose.psi)
            && self.d.contains(pose.d)
            && self.h.contains(pose.h)
    }
}

/// Draws one pose; every field is uniform within its interval set.
pub fn sample_camera_pose(
    spec: &RandomizationSpec,
    rng: &mut impl Rng,
) -> Result<CameraPose, PoseError> {
    spec.validate()?;
    Ok(CameraPose {
        theta: spec.theta.sample(rng),
        phi: spec.phi.sample(rng),
        psi: spec.psi.sample(rng),
        d: spec.d.sample(rng),
        h: spec.h.sample(rng),
    })
}
