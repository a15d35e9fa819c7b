//! Shared fixtures for the criterion benches.

use bhc_core::{build_state, ChannelScheme, DeviceSpec, StateSpec, TruncatedState};

pub fn coherent(cutoff: usize) -> TruncatedState {
    build_state(&StateSpec::coherent(0.5, 0.2), &[cutoff]).expect("coherent fixture")
}

pub fn single_channel(depth: u32, lo_amplitude: f64) -> ChannelScheme {
    ChannelScheme::from_devices(vec![
        DeviceSpec::new(depth, lo_amplitude, 0.9).expect("device fixture")
    ])
    .expect("scheme fixture")
}
