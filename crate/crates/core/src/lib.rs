//! Cramér-Rao type position and orientation error bounds (PEB/OEB) for
//! uplink and downlink mmWave MIMO localization under multipath.
//!
//! The pipeline runs in three stages:
//!
//! 1. [`channel`] builds a [`channel::Scenario`]: arrays, UE pose, the list of
//!    propagation paths with their gains, the transmit beamformer and the pulse.
//! 2. [`fim`] assembles the Fisher information of the channel parameters
//!    (angles of arrival/departure, delays and complex gains) and reduces it to
//!    equivalent information on the parameters of interest.
//! 3. [`bounds`] maps channel information into position/orientation
//!    information through the geometric Jacobian and returns PEB and OEB.
//!
//! Angles are radians everywhere inside the library; conversion to degrees is
//! the job of whatever front end reads or writes files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod channel;
pub mod error;
pub mod fim;
pub mod geometry;
pub mod linalg;
pub mod signal;

pub use error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Complex scalar used for array responses and correlation matrices.
pub type C64 = num_complex::Complex64;
