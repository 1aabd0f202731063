//! Conditional-diffusion engine for low-light image enhancement.
//!
//! The crate is organized around a small reverse-mode tensor engine
//! ([`tensor`]) on top of which the conditional denoiser ([`denoiser`]),
//! the diffusion process ([`diffusion`]), the non-local spectral
//! regularization ([`structure`]) and the uncertainty-weighted losses
//! ([`losses`]) are built. [`trainer`] ties those into the two-phase
//! training procedure, [`data`] provides synthetic paired low/normal-light
//! scenes, and [`metrics`] holds quality metrics and diagnostics.

pub mod data;
pub mod denoiser;
pub mod diffusion;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod schedule;
pub mod structure;
pub mod tensor;
pub mod trainer;
pub mod util;

pub use error::{Error, Result};
pub use tensor::{Element, Tensor};
