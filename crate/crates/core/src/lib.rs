//! Numerical non-autonomous polynomial dynamics.
//!
//! A [`SequenceSpec`] describes a bounded sequence of polynomials `P_1, P_2, ...`.
//! On top of it the crate computes Green's functions and Böttcher coordinates,
//! traces external rays to their landing points, estimates hyperbolicity,
//! continues Julia-set points across parameter changes and renders images.

pub mod angle;
pub mod cloud;
pub mod conjugation;
pub mod error;
pub mod hyperbolicity;
pub mod motion;
pub mod polyseq;
pub mod potential;
pub mod presets;
pub mod rays;
pub mod render;
pub mod roots;

pub use angle::ExternalAngle;
pub use error::{DynError, Result};
pub use num_complex::Complex64;
pub use polyseq::{Bounds, DegreeLedger, PolySpec, Rule, SequenceSpec};
