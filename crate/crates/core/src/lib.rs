//! Secure hybrid beamforming for IRS-assisted integrated sensing and
//! communication.
//!
//! The solver designs an analog precoder `F`, a digital precoder `W`, IRS
//! phases φ and a radar scaling factor δ that trade the legitimate/eavesdropper
//! SNR gap against beampattern matching, under a power budget and
//! unit-modulus hardware constraints.

pub mod baselines;
pub mod config;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod numerics;
pub mod scenario;
pub mod solver;
pub mod surrogates;

pub use error::{Error, Result};
