//! Numerical toolkit for Bochner–Riesz means `T^δ_R` on weighted Hardy spaces.
//!
//! Modules follow the data flow of an experiment: sampled functions on a
//! [`grid`], [`specfun`] and the [`kernel`] `φ`, the two routes to `T^δ_R` in
//! [`operator`], Muckenhoupt [`weights`], the (weak) norms and grand maximal
//! functions of [`spaces`], [`atoms`], and the [`verify`] harness.
//!
//! Every numerical type is generic over [`Real`]; the aliases below fix `f64`.

pub mod atoms;
pub mod error;
pub(crate) mod fft;
pub mod grid;
pub mod kernel;
pub mod operator;
pub mod scalar;
pub mod spaces;
pub mod specfun;
pub mod verify;
pub mod weights;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Grid = grid::GridFunction<f64>;
pub type GridF32 = grid::GridFunction<f32>;
pub type GridBox = grid::GridBox<f64>;
pub type Cube = grid::Cube<f64>;
pub type BRParams = kernel::BRParams<f64>;

pub type Weight = weights::Weight<f64>;
pub type CubeFamily = weights::CubeFamily<f64>;
pub type Atom = atoms::Atom<f64>;

pub use spaces::ProbeFamily;
pub use verify::{ExperimentConfig, VerificationReport};
