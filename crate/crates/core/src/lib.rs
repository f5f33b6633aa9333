//! Finite-energy Airy beam simulator: SLM mask synthesis, Fourier-optics
//! propagation, beam metrology and photon-pair coincidence counting.

pub mod error;
pub mod fft;
pub mod field;
pub mod mask;
pub mod metrology;
pub mod modes;
pub mod propagation;
pub mod bench;
pub mod scenario;
pub mod counting;
pub mod special;
pub mod units;

pub use error::{Error, Result};
pub use field::{ComplexField2D, Grid};
