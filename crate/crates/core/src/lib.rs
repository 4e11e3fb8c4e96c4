//! Delay alignment modulation (DAM) for sparse multipath MISO channels.
//!
//! The crate covers single-carrier perfect DAM, generic delay-spread
//! reduction, DAM-OFDM with the joint frequency/time-domain beamforming
//! solver, and a Monte Carlo harness for spectral efficiency, BER and PAPR.

pub mod channel;
pub mod dam_generic;
pub mod dam_ofdm;
pub mod dam_sc;
pub mod error;
pub mod evaluation;
pub mod numerics;
pub mod rng;
pub mod validation;

pub use error::{Error, Result};
