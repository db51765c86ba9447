//! Disentangled neural models of articulated objects.
//!
//! This crate learns a category-level model of articulated objects — think
//! laptops, drawers, cabinets — from posed RGB images with object masks. The
//! model factors each observation into three latent codes (shape, appearance,
//! articulation) conditioning an implicit signed distance field and a surface
//! radiance field, trained end to end through a differentiable SDF renderer.
//! After training, codes for an unseen instance are recovered from a handful
//! of views by optimizing the same rendering losses with the networks frozen,
//! and the code space supports interpolation, extrapolation, and swapping of
//! individual factors.
//!
//! The crate also ships a procedural scene generator (`scenegen`) that renders
//! ground-truth datasets of simple articulated objects, so the whole pipeline
//! can be exercised and measured without external data.

pub mod autodiff;
pub mod error;
pub mod fields;
pub mod geom;
pub mod image;
pub mod inference;
pub mod io;
pub mod latents;
pub mod losses;
pub mod math;
pub mod renderer;
pub mod scenegen;
pub mod trainer;

#[cfg(test)]
pub(crate) mod test_support;

pub use error::{Error, Result};
