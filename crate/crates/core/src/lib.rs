//! Simulator for balanced homodyne correlation measurements.
//!
//! A signal field is mixed with a strong local oscillator in a binary tree of
//! 50/50 beamsplitters ([`network`]). Normally ordered correlations of the
//! photodetectors ([`correlator`]) are combined with alternating binomial
//! weights into balanced data `F(φ)`, a trigonometric polynomial in the local
//! oscillator phase whose harmonics are the normally ordered field moments.
//! [`reconstruct`] inverts it by a discrete Fourier transform, [`sampler`]
//! generates shot-noise-limited photocount records of the same experiment,
//! and [`fock`] provides the brute-force oracle.

pub mod correlator;
pub mod error;
pub mod fock;
pub mod io;
pub mod network;
pub mod pipeline;
pub mod reconstruct;
pub mod sampler;

pub use error::{BhcError, Result};
pub use fock::{build_state, MomentOrder, StateSpec, TruncatedState};
pub use network::{ChannelScheme, DeviceSpec, GroupedRequest, TransferMatrix};
pub use reconstruct::{MomentTable, PhaseGrid};

pub use num_complex::Complex64 as C64;
