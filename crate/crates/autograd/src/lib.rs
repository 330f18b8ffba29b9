//! Reverse-mode automatic differentiation on a per-step tape.
//!
//! The tape is rebuilt from scratch for every forward/backward pass
//! (define-by-run). Parameters live outside the tape in a [`ParamStore`]
//! and enter each pass as leaf nodes, which keeps finite-difference
//! checking and optimizer bookkeeping straightforward.
//!
//! Everything is generic over [`Element`] so models can train in `f32`
//! and be gradient-checked in `f64` with the same code path.

pub mod checkpoint;
pub mod element;
pub mod gradcheck;
pub mod init;
pub mod optim;
pub mod params;
pub mod tape;

mod ops_linalg;
mod ops_pointwise;
mod ops_shape;

pub use element::Element;
pub use params::{ParamId, ParamStore};
pub use tape::{Tape, Var};
