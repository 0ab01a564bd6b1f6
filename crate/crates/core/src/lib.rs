//! Rate-distortion bounds for distributed coding of correlated Gaussian
//! sources.
//!
//! The crate covers the remote (CEO) setting, where `L` encoders observe
//! noisy linear images of a hidden vector, and the direct multiterminal
//! setting, where each encoder sees one component of a correlated vector.
//! All rates are in nats.

pub mod cyclic;
pub mod duality;
pub mod error;
pub mod matching;
pub mod maxdet;
pub mod model;
pub mod multiterminal;
pub mod regions;
pub mod symcore;
pub mod waterfill;

pub use error::{Error, Result};

/// Nats to bits.
pub fn bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}
