//! Covariant cloning of maximally entangled qubit pairs.
//!
//! - [`qmat`]: dense complex matrices with partial trace and transpose.
//! - [`states`]: magic basis, concurrence, entanglement of formation.
//! - [`cloner`]: the invariant-tensor cloning family and baselines.
//! - [`channels`]: Choi operators, PPT and covariance checks.
//! - [`optimize`]: optimality searches and figure sweeps.
//! - [`cli`]: the `entclone` command-line front end.

pub mod channels;
pub mod cli;
pub mod cloner;
pub mod error;
pub mod optimize;
pub mod par;
pub mod qmat;
pub mod states;

pub use error::{Error, Result};
