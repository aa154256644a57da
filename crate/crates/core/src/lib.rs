//! Periodic finite-precision position measurements of a quantum harmonic
//! oscillator.
//!
//! The crate is organised bottom-up:
//!
//! * [`gaussian`] closed-form Gaussian densities and their evolution in a
//!   harmonic well,
//! * [`chain`] closed-form statistics of the measurement chain (the densities
//!   before each measurement, the limiting width, the non-dimensional form and
//!   the weak-measurement mapping),
//! * [`trajectory`] Monte Carlo simulation of the measurement record using the
//!   exact Gaussian chain, with [`stats`] and [`ks`] for the summaries,
//! * [`grid`] an independent split-operator Schrödinger solver used as a
//!   brute-force oracle,
//! * [`oracle`] quadrature and direct-summation cross-checks that never call
//!   into the closed forms they are checking.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below are what most callers want.

// `!(x > 0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod error;
pub mod gaussian;
pub mod grid;
pub mod ks;
pub mod oracle;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod trajectory;

pub use chain::{ChainClosedForm, MeasurementScheme, NondimPoint, RESONANCE_EPS};
pub use error::{Error, Result};
pub use gaussian::{Gaussian, OscillatorParams, WavePacket};
pub use grid::{CollapseMode, Grid, GridWavefunction, Propagator};
pub use scalar::Real;
pub use stats::RunningStats;
pub use trajectory::{ChainConfig, MeasurementRecord};

pub type Gaussian64 = Gaussian<f64>;
pub type Gaussian32 = Gaussian<f32>;
pub type OscillatorParams64 = OscillatorParams<f64>;
pub type OscillatorParams32 = OscillatorParams<f32>;
pub type WavePacket64 = WavePacket<f64>;
pub type MeasurementScheme64 = MeasurementScheme<f64>;
pub type MeasurementScheme32 = MeasurementScheme<f32>;
pub type ChainClosedForm64 = ChainClosedForm<f64>;
pub type NondimPoint64 = NondimPoint<f64>;
pub type ChainConfig64 = ChainConfig<f64>;
pub type RunningStats64 = RunningStats<f64>;
pub type MeasurementRecord64 = MeasurementRecord<f64>;
pub type Grid64 = Grid<f64>;
pub type GridWavefunction64 = GridWavefunction<f64>;
