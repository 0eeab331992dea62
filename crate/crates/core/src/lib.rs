//! Link-level simulation of graphene-based reconfigurable intelligent surfaces
//! (RIS) for terahertz MIMO.
//!
//! The crate is organised bottom-up:
//!
//! - [`graphene`]: tunable graphene element physics and the discrete phase codebook.
//! - [`channel`]: sparse geometric THz channels with UPA steering vectors.
//! - [`beamforming`]: cascaded channel, SVD transceivers and achievable rate.
//! - [`optimizer`]: RIS phase optimization (adaptive and constant-step gradient
//!   descent, random phases, exhaustive search).
//! - [`harness`]: seeded Monte-Carlo sweeps, configuration and CSV output.

pub mod beamforming;
pub mod channel;
pub mod error;
pub mod graphene;
pub mod harness;
pub mod optimizer;

pub use error::{Error, Result};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Dense complex matrix used throughout.
pub type CMatrix = DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVector = DVector<Complex64>;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
