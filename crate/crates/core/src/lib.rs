//! Uplink massive-MIMO large scale fading decoding.
//!
//! Two-stage decoding: every BS applies a matched filter or zero-forcing
//! receiver to its own antennas, then a central or neighbourhood controller
//! linearly combines the per-BS estimates with weights that depend only on
//! the large-scale fading coefficients. The crate provides the channel model,
//! closed-form SINRs, optimal and zero-forcing combiners, max-min power
//! control and the decentralized variant.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod channel;
pub mod config;
pub mod decentralized;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod lsfd;
pub mod power;
pub mod receivers;
pub mod rng;
pub mod topology;

pub use config::NetworkConfig;
pub use error::{Error, Result};
pub use grid::UserGrid;
pub use nalgebra::Complex;

pub type C64 = Complex<f64>;
pub type CVector = nalgebra::DVector<C64>;
pub type CMatrix = nalgebra::DMatrix<C64>;
