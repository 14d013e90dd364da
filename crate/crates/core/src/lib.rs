//! Multi-channel feature fields modeled by the first-order system
//! `∂z/∂x = Az`, `∂z/∂y = Bz` with commuting `A`, `B`.
//!
//! - [`field`]: fields, exact synthetic solutions, stencils, QBHF files and
//!   the scalar heat equation.
//! - [`masking`]: quarter-block layouts and their source/target pairs.
//! - [`predictor`]: linear projectors for the eight directions and masked
//!   prediction.
//! - [`fitting`]: closed-form and iterative identification of `A`, `B`.
//! - [`spectrum`]: eigenvalue energy, spectrum alignment and spatial
//!   correlation.
//! - [`extractor`]: PGM/PPM input and a seeded random-convolution encoder.

pub mod extractor;
pub mod field;
pub mod fitting;
pub mod linalg;
pub mod masking;
pub mod predictor;
pub mod rng;
pub mod spectrum;
