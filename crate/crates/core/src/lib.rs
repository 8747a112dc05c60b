//! Simulation toolkit for the averaging principle of fast–slow stochastic
//! systems driven by symmetric α-stable Lévy noise.

pub mod averaging_lab;
pub mod ergodics;
pub mod error;
pub mod fractional_operator;
pub mod poisson_corrector;
pub mod quadrature;
pub mod rng;
pub mod sde_engine;
pub mod stable_noise;
pub mod stats;

pub use error::{Error, Result};
