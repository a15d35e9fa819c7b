use std::f64::consts::PI;

use bhc_core::correlator::{
    f_direct, f_multi, f_single, gamma_from_transfer, gamma_single, x_moment,
};
use bhc_core::fock::{normal_moment, MomentOrder};
use bhc_core::io::{table_from_json, table_from_tsv, table_to_json, table_to_tsv};
use bhc_core::network::{
    build_transfer, canonicalize_request, layout, min_depth, SpaceTimePoint,
};
use bhc_core::pipeline::{oracle_table, reconstruct_analytic, synthesize_f, FSource};
use bhc_core::reconstruct::{
    alias_residual, design_grid, design_tensor_grid, invert_multi, MomentEntry, MomentTable,
    Provenance,
};
use bhc_core::sampler::{sample_classical, sample_exact, ExperimentSpec};
use bhc_core::{build_state, ChannelScheme, DeviceSpec, StateSpec, TruncatedState, C64};
use proptest::prelude::*;

fn state_spec() -> impl Strategy<Value = (StateSpec, usize)> {
    prop_oneof![
        (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| (StateSpec::coherent(re, im), 30)),
        (0.0..0.8f64).prop_map(|n| (StateSpec::thermal(n), 40)),
        (0.0..0.6f64, -PI..PI).prop_map(|(r, t)| (StateSpec::squeezed(r, t), 50)),
        (0usize..=3).prop_map(|n| (StateSpec::fock(n), 12)),
        (-0.7..0.7f64, -0.7..0.7f64, 0.0..0.5f64).prop_map(|(re, im, n)| (
            StateSpec::DisplacedThermal {
                amplitude: C64::new(re, im),
                nbar: n
            },
            36
        )),
        (0.05..0.95f64, -0.8..0.8f64).prop_map(|(w, b)| (
            StateSpec::Mixture(vec![(w, StateSpec::coherent(b, 0.2)), (1.0 - w, StateSpec::fock(1))]),
            30
        )),
    ]
}

fn state() -> impl Strategy<Value = TruncatedState> {
    state_spec().prop_map(|(s, c)| build_state(&s, &[c]).unwrap())
}

fn close(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() <= tol * b.norm().max(1.0)
}

fn one(d: u32, e: f64, eta: f64) -> ChannelScheme {
    ChannelScheme::from_devices(vec![DeviceSpec::new(d, e, eta).unwrap()]).unwrap()
}

/// Random `(d, k)` with `1 ≤ k ≤ min(2^{d-1}, 4)`, `d ≤ 3`.
fn depth_order() -> impl Strategy<Value = (u32, usize)> {
    (1u32..=3).prop_flat_map(|d| (Just(d), 1usize..=(1usize << (d - 1)).min(4)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conjugation_symmetry(st in state(), n in 0usize..=4, m in 0usize..=4) {
        prop_assume!(n + m > 0);
        let a = normal_moment(&st, &MomentOrder::single(n, m)).unwrap();
        let b = normal_moment(&st, &MomentOrder::single(m, n)).unwrap();
        prop_assert!((a - b.conj()).norm() <= 1e-12);
    }

    #[test]
    fn coherent_factorization(re in -1.2..1.2f64, im in -1.2..1.2f64, n in 0usize..=4, m in 0usize..=4) {
        prop_assume!(n + m > 0);
        let beta = C64::new(re, im);
        let st = build_state(&StateSpec::Coherent { amplitude: beta }, &[40]).unwrap();
        let got = normal_moment(&st, &MomentOrder::single(n, m)).unwrap();
        let want = beta.conj().powu(n as u32) * beta.powu(m as u32);
        prop_assert!(close(got, want, 1e-9), "{} vs {}", got, want);
    }

    #[test]
    fn constructors_satisfy_invariants((spec, cutoff) in state_spec()) {
        let st = build_state(&spec, &[cutoff]).unwrap();
        prop_assert!(st.check_invariants().is_ok());
    }

    #[test]
    fn transfer_is_unitary(d in 1u32..=6, e in 0.1..4.0f64, lo in -PI..PI, branch in -PI..PI, seed in any::<u64>()) {
        let mut dev = DeviceSpec::new(d, e, 1.0).unwrap();
        dev.lo_phase = lo;
        dev.branch_phase = branch;
        dev.path_phases = (0..dev.detector_count()).map(|j| ((seed >> (j % 60)) as f64).sin() * PI).collect();
        let t = build_transfer(&dev).unwrap();
        prop_assert!(t.unitarity_defect() < 1e-12);
    }

    #[test]
    fn min_depth_is_minimal(n in 0usize..=64, m in 0usize..=64) {
        prop_assume!(n + m > 0 && n + m <= 64);
        let d = min_depth(n, m).unwrap();
        prop_assert!(n + m <= 1usize << (d - 1));
        prop_assert!(d == 1 || n + m > 1usize << (d - 2));
    }

    #[test]
    fn magnitudes_ignore_path_phases(d in 1u32..=5, phases in prop::collection::vec(-PI..PI, 32)) {
        let plain = DeviceSpec::new(d, 1.0, 1.0).unwrap();
        let mut shifted = plain.clone();
        shifted.path_phases = phases[..plain.detector_count()].to_vec();
        let a = build_transfer(&plain).unwrap();
        let b = build_transfer(&shifted).unwrap();
        for (x, y) in a.matrix().iter().zip(b.matrix().iter()) {
            prop_assert!((x.norm() - y.norm()).abs() < 1e-14);
        }
    }

    #[test]
    fn recursive_consistency(d in 2u32..=5, branch in -PI..PI, seed in 0u64..1000) {
        let mut dev = DeviceSpec::new(d, 1.0, 1.0).unwrap();
        dev.branch_phase = branch;
        dev.path_phases = (0..dev.detector_count()).map(|j| (seed as f64 + j as f64).cos()).collect();
        let full = build_transfer(&dev).unwrap();
        let stage = layout(&dev).splitters[0].matrix;
        let half = dev.capacity();
        for side in 0..2 {
            let mut sub = dev.clone();
            sub.depth = d - 1;
            sub.path_phases = dev.path_phases[side * half..(side + 1) * half].to_vec();
            let t = build_transfer(&sub).unwrap();
            for jp in 0..half {
                let j = side * half + jp;
                // the root output feeds the subtree's signal port
                prop_assert!((full.matrix()[(j, 0)] - t.matrix()[(jp, 0)] * stage[side][0]).norm() < 1e-12);
                prop_assert!((full.matrix()[(j, 1)] - t.matrix()[(jp, 0)] * stage[side][1]).norm() < 1e-12);
                // remaining columns are the subtree's own ports, relabeled
                let mut a: Vec<f64> = (2..full.detector_count()).map(|c| full.matrix()[(j, c)].norm()).filter(|x| *x > 1e-15).collect();
                let mut b: Vec<f64> = (1..t.detector_count()).map(|c| t.matrix()[(jp, c)].norm()).filter(|x| *x > 1e-15).collect();
                a.sort_by(f64::total_cmp);
                b.sort_by(f64::total_cmp);
                prop_assert_eq!(a.len(), b.len());
                for (x, y) in a.iter().zip(&b) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn balanced_identity_single(st in state(), (d, k) in depth_order(), e in 0.5..4.0f64, eta in 0.1..=1.0f64, phi in 0.0..2.0 * PI) {
        let dev = DeviceSpec::new(d, e, eta).unwrap();
        let alt = f_single(&st, &dev, phi, k).unwrap().value;
        let direct = f_direct(&st, &one(d, e, eta), &[phi], &[k]).unwrap();
        let scale = eta.powi(k as i32) * e.powi(k as i32) * 2f64.powi(-(k as i32) * (d as i32 - 1));
        prop_assert!((alt - direct).norm() <= 1e-9 * direct.norm().max(scale));
    }

    #[test]
    fn efficiency_scaling(st in state(), (d, k) in depth_order(), e in 0.5..4.0f64, eta in 0.05..=1.0f64, phi in 0.0..2.0 * PI) {
        let f1 = f_single(&st, &DeviceSpec::new(d, e, 1.0).unwrap(), phi, k).unwrap().value;
        let f = f_single(&st, &DeviceSpec::new(d, e, eta).unwrap(), phi, k).unwrap().value;
        let want = f1 * eta.powi(k as i32);
        let scale = eta.powi(k as i32) * e.powi(k as i32) * 2f64.powi(-(k as i32) * (d as i32 - 1));
        prop_assert!((f - want).norm() <= 1e-12 * want.norm().max(scale));
    }

    #[test]
    fn reality(st in state(), k in 1usize..=4, phi in 0.0..2.0 * PI, e in 0.5..3.0f64, l in 0usize..=4) {
        prop_assert!(x_moment(&st, phi, k).unwrap().im.abs() <= 1e-10);
        prop_assume!(l <= k);
        let g = gamma_single(&st, &DeviceSpec::new(3, e, 1.0).unwrap(), phi, k, l).unwrap().value;
        prop_assert!(g.im.abs() <= 1e-10 * g.norm().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn selection_independence(
        st in state(),
        d in 2u32..=3,
        e in 0.5..3.0f64,
        phi in 0.0..2.0 * PI,
        kl in (1usize..=4).prop_flat_map(|k| (Just(k), 0..=k)),
        picks in (any::<prop::sample::Index>(), any::<prop::sample::Index>()),
    ) {
        let (k, l) = kl;
        let half = 1usize << (d - 1);
        prop_assume!(k <= half);
        let sc = one(d, e, 0.8);
        // two different concrete subsets with the same (k, l)
        let rotate = |off: usize| -> Vec<usize> {
            let plus: Vec<usize> = (0..l).map(|i| (i + off) % half).collect();
            let minus: Vec<usize> = (0..k - l).map(|i| half + (i + off) % half).collect();
            plus.into_iter().chain(minus).collect()
        };
        let a = gamma_from_transfer(&st, &sc, &[phi], &[rotate(picks.0.index(half))]).unwrap();
        let b = gamma_from_transfer(&st, &sc, &[phi], &[rotate(picks.1.index(half))]).unwrap();
        let g = gamma_single(&st, &DeviceSpec::new(d, e, 0.8).unwrap(), phi, k, l).unwrap().value;
        prop_assert!(close(a, b, 1e-12), "{} vs {}", a, b);
        prop_assert!(close(a, g, 1e-10), "{} vs {}", a, g);
    }

    #[test]
    fn gamma_ignores_path_and_branch_phases(
        st in state(),
        phi in 0.0..2.0 * PI,
        branch in -PI..PI,
        phases in prop::collection::vec(-PI..PI, 8),
        k in 1usize..=4,
    ) {
        let plain = one(3, 1.5, 1.0);
        let mut dev = DeviceSpec::new(3, 1.5, 1.0).unwrap();
        dev.branch_phase = branch;
        dev.path_phases = phases;
        let shifted = ChannelScheme::from_devices(vec![dev]).unwrap();
        let set: Vec<usize> = (0..k / 2).chain(4..4 + (k - k / 2)).collect();
        let a = gamma_from_transfer(&st, &plain, &[phi], &[set.clone()]).unwrap();
        let b = gamma_from_transfer(&st, &shifted, &[phi], &[set]).unwrap();
        prop_assert!(close(a, b, 1e-12));
    }

    #[test]
    fn balanced_identity_multi(
        a in (-0.8..0.8f64, -0.8..0.8f64),
        nbar in 0.0..0.5f64,
        r in 0.0..0.5f64,
        k1 in 0usize..=2,
        k2 in 0usize..=2,
        p1 in 0.0..2.0 * PI,
        p2 in 0.0..2.0 * PI,
        e in 0.5..3.0f64,
    ) {
        prop_assume!(k1 + k2 > 0);
        let sc = ChannelScheme::from_devices(vec![
            DeviceSpec::new(2, e, 0.9).unwrap(),
            DeviceSpec::new(3, e * 0.7, 0.6).unwrap(),
        ]).unwrap();
        for spec in [
            StateSpec::Product(vec![StateSpec::coherent(a.0, a.1), StateSpec::thermal(nbar)]),
            StateSpec::TwoModeSqueezed { r, theta: p1 },
        ] {
            let st = build_state(&spec, &[24, 24]).unwrap();
            let alt = f_multi(&st, &sc, &[p1, p2], &[k1, k2]).unwrap().value;
            let direct = f_direct(&st, &sc, &[p1, p2], &[k1, k2]).unwrap();
            prop_assert!((alt - direct).norm() <= 1e-9 * direct.norm().max(1.0));
        }
    }

    #[test]
    fn round_trip_single(st in state(), (d, k) in depth_order(), e in 0.5..4.0f64, eta in 0.1..=1.0f64) {
        let got = reconstruct_analytic(&st, &one(d, e, eta), &[k]).unwrap();
        let want = oracle_table(&st, &[k]).unwrap();
        for (o, entry) in &got.entries {
            prop_assert!(close(entry.value, want.value(o).unwrap(), 1e-9));
        }
        prop_assert!(got.conjugation_defect() <= 1e-10);
    }

    #[test]
    fn normalization_independence(st in state(), k in 1usize..=2, e1 in 0.5..4.0f64, e2 in 0.5..4.0f64, eta in 0.1..=1.0f64, d in 2u32..=4) {
        let a = reconstruct_analytic(&st, &one(2, e1, 1.0), &[k]).unwrap();
        let b = reconstruct_analytic(&st, &one(d, e2, eta), &[k]).unwrap();
        for (o, entry) in &a.entries {
            prop_assert!(close(b.value(o).unwrap(), entry.value, 1e-9));
        }
    }

    #[test]
    fn round_trip_three_channels(
        betas in prop::collection::vec((-0.6..0.6f64, -0.6..0.6f64), 3),
        ks in prop::collection::vec(0usize..=2, 3),
    ) {
        prop_assume!(ks.iter().any(|&k| k > 0));
        let spec = StateSpec::Product(betas.iter().map(|&(re, im)| StateSpec::coherent(re, im)).collect());
        let st = build_state(&spec, &[10, 10, 10]).unwrap();
        let sc = ChannelScheme::from_devices(vec![
            DeviceSpec::new(2, 1.0, 0.9).unwrap(),
            DeviceSpec::new(2, 2.0, 0.5).unwrap(),
            DeviceSpec::new(3, 1.5, 1.0).unwrap(),
        ]).unwrap();
        let grid = design_tensor_grid(&ks);
        let f = synthesize_f(&st, &sc, &grid, FSource::Direct).unwrap();
        let got = invert_multi(&f, &grid, &sc).unwrap();
        for (o, entry) in &got.entries {
            // factorized oracle
            let want: C64 = o.pairs().iter().zip(&betas).map(|(&(n, m), &(re, im))| {
                let b = C64::new(re, im);
                b.conj().powu(n as u32) * b.powu(m as u32)
            }).product();
            prop_assert!((entry.value - want).norm() <= 1e-6 * want.norm().max(1.0), "{:?}", o);
        }
    }

    #[test]
    fn alias_check_flags_out_of_band(k in 1usize..=5, amp in 0.01..1.0f64, st in state()) {
        let grid = design_grid(k);
        let d = min_depth(k, 0).unwrap();
        let clean = synthesize_f(&st, &one(d, 1.0, 1.0), &grid, FSource::Direct).unwrap();
        prop_assert!(alias_residual(&clean, &grid).unwrap() <= 1e-12);
        let nu = (k + 1) as f64;
        let dirty: Vec<C64> = clean.iter().zip(grid.settings()).map(|(f, p)| f + amp * (nu * p[0]).cos()).collect();
        prop_assert!(alias_residual(&dirty, &grid).unwrap() >= 0.4 * amp);
    }

    #[test]
    fn table_text_round_trip(vals in prop::collection::vec((-1e3..1e3f64, -1e3..1e3f64, prop::option::of(0.0..1.0f64)), 1..8)) {
        let mut t = MomentTable::default();
        for (i, (re, im, se)) in vals.iter().enumerate() {
            t.insert(MomentOrder::new(vec![(i, 1), (0, i)]).unwrap(), MomentEntry {
                value: C64::new(*re, *im),
                stderr: *se,
                provenance: if se.is_some() { Provenance::Sampled } else { Provenance::Analytic },
            });
        }
        prop_assert_eq!(&table_from_tsv(&table_to_tsv(&t)).unwrap(), &t);
        prop_assert_eq!(&table_from_json(&table_to_json(&t)).unwrap(), &t);
    }

    #[test]
    fn records_are_deterministic(seed in any::<u64>(), phi in 0.0..2.0 * PI) {
        let spec = ExperimentSpec::new(50, seed);
        let st = build_state(&StateSpec::coherent(0.4, 0.0), &[8]).unwrap();
        let dev = DeviceSpec::new(2, 1.0, 0.6).unwrap();
        prop_assert_eq!(
            sample_exact(&st, &dev, &spec, &[phi]).unwrap(),
            sample_exact(&st, &dev, &spec, &[phi]).unwrap()
        );
        let p = StateSpec::thermal(0.7);
        let sc = one(3, 1.0, 0.6);
        prop_assert_eq!(
            sample_classical(&p, &sc, &spec, &[vec![phi]]).unwrap(),
            sample_classical(&p, &sc, &spec, &[vec![phi]]).unwrap()
        );
    }

    #[test]
    fn grouping_ignores_operator_order(perm in Just((0..5usize).collect::<Vec<_>>()).prop_shuffle()) {
        let pts = [
            SpaceTimePoint::new("a", "x", "t0"),
            SpaceTimePoint::new("a", "x", "t0"),
            SpaceTimePoint::new("b", "y", "t0"),
            SpaceTimePoint::new("c", "x", "t1"),
            SpaceTimePoint::new("b", "y", "t0"),
        ];
        let dag = [true, false, true, false, false];
        let base = canonicalize_request(&pts, &dag).unwrap();
        let p: Vec<SpaceTimePoint> = perm.iter().map(|&i| pts[i].clone()).collect();
        let g: Vec<bool> = perm.iter().map(|&i| dag[i]).collect();
        let shuffled = canonicalize_request(&p, &g).unwrap();
        prop_assert_eq!(base.orders(), shuffled.orders());
        prop_assert_eq!(base.orders(), vec![(1, 1), (1, 1), (0, 1)]);
    }
}
