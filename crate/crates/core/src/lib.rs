//! Activated random walks on the discrete torus `Z_n^d`.
//!
//! The crate has two simulation engines sharing one geometry and one
//! counter-based RNG:
//!
//! * [`arw`]: the site-wise reference model with instruction stacks, in
//!   which particles may only fall asleep on a settling set `A`.
//! * [`loop_model`]: the coloured-loop representation driven by a
//!   [`hierarchy::DormitoryHierarchy`], with recursive ping-pong
//!   stabilization.
//!
//! [`coupling`] runs both on a shared stack, [`experiments`] and [`stats`]
//! turn the lemmas behind the construction into checkable numbers.

pub mod arw;
pub mod coupling;
pub mod error;
pub mod experiments;
pub mod hierarchy;
pub mod loop_model;
pub mod rng;
pub mod stats;
pub mod torus;
pub mod union_find;
pub mod walk;

pub use error::{Error, Result};
