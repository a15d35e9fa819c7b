//! End-to-end analytic reconstruction: correlator data on the phase grid,
//! Fourier inversion, and the oracle table it is checked against.

use rayon::prelude::*;

use crate::correlator::{f_direct, f_multi};
use crate::error::Result;
use crate::fock::{normal_moment, TruncatedState};
use crate::network::ChannelScheme;
use crate::reconstruct::{
    design_tensor_grid, invert_multi, orders_for, MomentEntry, MomentTable, PhaseGrid, Provenance,
};

/// Oracle moments of `state` for every order with `nᵢ + mᵢ = kᵢ`.
pub fn oracle_table(state: &TruncatedState, ks: &[usize]) -> Result<MomentTable> {
    let mut table = MomentTable::default();
    for order in orders_for(ks) {
        let value = normal_moment(state, &order)?;
        table.insert(
            order,
            MomentEntry {
                value,
                stderr: None,
                provenance: Provenance::Analytic,
            },
        );
    }
    Ok(table)
}

/// Which analytic form supplies `F` on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FSource {
    /// Alternating sum over detector correlations `Γ`.
    Correlations,
    /// Collapsed quadrature form.
    Direct,
}

/// `F^{(k⃗)}` at every setting of `grid`, in row-major order.
pub fn synthesize_f(
    state: &TruncatedState,
    scheme: &ChannelScheme,
    grid: &PhaseGrid,
    source: FSource,
) -> Result<Vec<num_complex::Complex64>> {
    let ks = grid.orders();
    grid.settings()
        .par_iter()
        .map(|phases| match source {
            FSource::Correlations => f_multi(state, scheme, phases, &ks).map(|f| f.value),
            FSource::Direct => f_direct(state, scheme, phases, &ks),
        })
        .collect()
}

/// Full analytic chain `Γ → F → DFT` for orders `ks` on the scheme's
/// channels.
pub fn reconstruct_analytic(
    state: &TruncatedState,
    scheme: &ChannelScheme,
    ks: &[usize],
) -> Result<MomentTable> {
    let grid = design_tensor_grid(ks);
    let samples = synthesize_f(state, scheme, &grid, FSource::Correlations)?;
    invert_multi(&samples, &grid, scheme)
}

/// `max |recovered - oracle| / max(|oracle|, floor)` over shared orders.
pub fn max_relative_error(recovered: &MomentTable, oracle: &MomentTable, floor: f64) -> f64 {
    recovered
        .entries
        .iter()
        .filter_map(|(o, e)| {
            oracle
                .value(o)
                .map(|v| (e.value - v).norm() / v.norm().max(floor))
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{build_state, MomentOrder, StateSpec};
    use crate::network::DeviceSpec;
    use num_complex::Complex64 as C64;

    fn scheme(depths: &[u32], e: f64, eta: f64) -> ChannelScheme {
        ChannelScheme::from_devices(
            depths
                .iter()
                .map(|&d| DeviceSpec::new(d, e, eta).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn coherent_second_order_round_trip() {
        let st = build_state(&StateSpec::coherent(0.5, 0.0), &[14]).unwrap();
        let t = reconstruct_analytic(&st, &scheme(&[2], 1.0, 1.0), &[2]).unwrap();
        for (n, m) in [(1, 1), (0, 2), (2, 0)] {
            let v = t.value(&MomentOrder::single(n, m)).unwrap();
            assert!((v - C64::new(0.25, 0.0)).norm() < 1e-10, "({n},{m}) {v}");
        }
    }

    #[test]
    fn squeezed_second_order_round_trip() {
        let st = build_state(&StateSpec::squeezed(0.5, 0.0), &[40]).unwrap();
        let t = reconstruct_analytic(&st, &scheme(&[2], 1.5, 0.8), &[2]).unwrap();
        let s = 0.5f64.sinh();
        let c = 0.5f64.cosh();
        assert!((t.value(&MomentOrder::single(1, 1)).unwrap().re - s * s).abs() < 1e-10);
        assert!((t.value(&MomentOrder::single(0, 2)).unwrap().re + s * c).abs() < 1e-10);
    }

    #[test]
    fn two_mode_examples() {
        let tms = build_state(
            &StateSpec::TwoModeSqueezed { r: 0.5, theta: 0.0 },
            &[30, 30],
        )
        .unwrap();
        let t = reconstruct_analytic(&tms, &scheme(&[1, 1], 2.0, 1.0), &[1, 1]).unwrap();
        let v = t.value(&MomentOrder::new(vec![(0, 1), (0, 1)]).unwrap()).unwrap();
        assert!((v.re - 0.5f64.sinh() * 0.5f64.cosh()).abs() < 1e-9, "{v}");

        let spec = StateSpec::Product(vec![
            StateSpec::coherent(0.5, 0.0),
            StateSpec::coherent(0.0, 0.3),
        ]);
        let cc = build_state(&spec, &[14, 14]).unwrap();
        let t = reconstruct_analytic(&cc, &scheme(&[1, 2], 1.0, 0.7), &[1, 1]).unwrap();
        let v = t.value(&MomentOrder::new(vec![(1, 0), (0, 1)]).unwrap()).unwrap();
        assert!((v - C64::new(0.0, 0.15)).norm() < 1e-10, "{v}");
    }

    #[test]
    fn vacuum_two_mode_is_zero() {
        let st = build_state(&StateSpec::Product(vec![StateSpec::Vacuum; 2]), &[3, 3]).unwrap();
        let t = reconstruct_analytic(&st, &scheme(&[1, 1], 1.0, 1.0), &[1, 1]).unwrap();
        assert_eq!(t.len(), 4);
        assert!(t.entries.values().all(|e| e.value.norm() < 1e-14));
    }

    #[test]
    fn sources_agree() {
        let st = build_state(&StateSpec::thermal(0.4), &[30]).unwrap();
        let sc = scheme(&[3], 2.5, 0.9);
        let grid = design_tensor_grid(&[3]);
        let a = synthesize_f(&st, &sc, &grid, FSource::Correlations).unwrap();
        let b = synthesize_f(&st, &sc, &grid, FSource::Direct).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() <= 1e-12 * y.norm().max(1.0));
        }
    }
}
