//! Multimode states in a truncated Fock basis and the brute-force moment
//! oracle.
//!
//! Mode `i` stands for the slowly varying field at the `i`-th space-time
//! point, `Ẽ⁽⁺⁾(xᵢ) ↔ aᵢ`, with unit prefactor. Distinct points are distinct
//! commuting modes, so grouped normal ordering is the whole of the ordering
//! prescription.

mod moments;
mod spec;
mod state;

pub use moments::{
    characteristic_fn, normal_moment, truncation_report, truncation_report_with,
    CharacteristicQuery, MomentOrder, TruncationReport,
};
pub use spec::{RawSpec, StateSpec, MAX_SQUEEZING};
pub use state::{
    build_state, build_state_with, BuildOptions, TruncatedState, DEFAULT_TAIL_TOLERANCE,
};
pub(crate) use state::coherent_ket;
