//! Phase grids and the Fourier inversion of balanced data into normally
//! ordered moments.
//!
//! On a channel of order `k` the balanced data is the trigonometric
//! polynomial
//!
//! ```text
//! F(φ) = c · Σₙ C(k,n) ⟨ã†ⁿ ã^{k-n}⟩ e^{i(2n-k)φ},   c = ηᵏ 2^{-k(d-1)} Eᵏ
//! ```
//!
//! so the `(n, m)` moment is the `e^{i(n-m)φ}` harmonic divided by
//! `c · C(k,n)`. With `M = 2k + 2` equally spaced phases the discrete
//! transform is exact for every harmonic `|ν| ≤ k` and leaves the bin
//! `ν = k + 1` free for detecting aliased content.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::correlator::{advance, binomial};
use crate::error::{BhcError, Result};
use crate::fock::MomentOrder;
use crate::network::{ChannelScheme, DeviceSpec};

/// Equally spaced phases `2πj/M` on one channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridAxis {
    pub k: usize,
    pub points: usize,
}

impl GridAxis {
    pub fn phase(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.points as f64
    }
}

/// Tensor product of per-channel phase axes, enumerated row-major
/// (channel 0 slowest).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub axes: Vec<GridAxis>,
}

impl PhaseGrid {
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn orders(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.k).collect()
    }

    /// Per-channel grid indices of the flat setting `index`.
    pub fn indices(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.axes.len()];
        for (i, a) in self.axes.iter().enumerate().rev() {
            out[i] = index % a.points;
            index /= a.points;
        }
        out
    }

    pub fn phases(&self, index: usize) -> Vec<f64> {
        self.indices(index)
            .iter()
            .zip(&self.axes)
            .map(|(&j, a)| a.phase(j))
            .collect()
    }

    pub fn settings(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.phases(i)).collect()
    }
}

/// `M = 2k + 2` phases for a single channel of order `k`.
pub fn design_grid(k: usize) -> PhaseGrid {
    design_tensor_grid(&[k])
}

pub fn design_tensor_grid(ks: &[usize]) -> PhaseGrid {
    PhaseGrid {
        axes: ks
            .iter()
            .map(|&k| GridAxis {
                k,
                points: 2 * k + 2,
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Analytic,
    Sampled,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Analytic => "analytic",
            Provenance::Sampled => "sampled",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEntry {
    pub value: C64,
    pub stderr: Option<f64>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MomentTable {
    pub entries: BTreeMap<MomentOrder, MomentEntry>,
}

impl MomentTable {
    pub fn get(&self, order: &MomentOrder) -> Option<&MomentEntry> {
        self.entries.get(order)
    }

    pub fn value(&self, order: &MomentOrder) -> Option<C64> {
        self.entries.get(order).map(|e| e.value)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn mode_count(&self) -> usize {
        self.entries.keys().next().map_or(0, MomentOrder::mode_count)
    }

    pub fn insert(&mut self, order: MomentOrder, entry: MomentEntry) {
        self.entries.insert(order, entry);
    }

    /// `max |v(n,m) - conj(v(m,n))|` over entries whose conjugate partner is
    /// present.
    pub fn conjugation_defect(&self) -> f64 {
        self.entries
            .iter()
            .filter_map(|(o, e)| {
                self.entries
                    .get(&o.conjugate())
                    .map(|p| (e.value - p.value.conj()).norm())
            })
            .fold(0.0, f64::max)
    }
}

/// All orders with `nᵢ + mᵢ = kᵢ`, in lexicographic order.
pub fn orders_for(ks: &[usize]) -> Vec<MomentOrder> {
    let mut ns = vec![0usize; ks.len()];
    let mut out = Vec::new();
    loop {
        let pairs = ns.iter().zip(ks).map(|(&n, &k)| (n, k - n)).collect();
        out.push(MomentOrder::new(pairs).expect("ks is nonempty"));
        if !advance(&mut ns, ks) {
            break;
        }
    }
    out.sort();
    out
}

/// Inverts `F⁽ᵏ⁾` sampled on `design_grid(k)`.
pub fn invert_single(samples: &[C64], k: usize, device: &DeviceSpec) -> Result<MomentTable> {
    invert(samples, None, &design_grid(k), &[device], Provenance::Analytic)
}

pub fn invert_single_sampled(
    samples: &[C64],
    stderr: &[f64],
    k: usize,
    device: &DeviceSpec,
) -> Result<MomentTable> {
    invert(
        samples,
        Some(stderr),
        &design_grid(k),
        &[device],
        Provenance::Sampled,
    )
}

/// Inverts `F^{(k⃗)}` sampled on `grid` (row-major) for the channels of
/// `scheme`.
pub fn invert_multi(samples: &[C64], grid: &PhaseGrid, scheme: &ChannelScheme) -> Result<MomentTable> {
    let devices: Vec<&DeviceSpec> = scheme.devices().collect();
    invert(samples, None, grid, &devices, Provenance::Analytic)
}

pub fn invert_multi_sampled(
    samples: &[C64],
    stderr: &[f64],
    grid: &PhaseGrid,
    scheme: &ChannelScheme,
) -> Result<MomentTable> {
    let devices: Vec<&DeviceSpec> = scheme.devices().collect();
    invert(samples, Some(stderr), grid, &devices, Provenance::Sampled)
}

fn invert(
    samples: &[C64],
    stderr: Option<&[f64]>,
    grid: &PhaseGrid,
    devices: &[&DeviceSpec],
    provenance: Provenance,
) -> Result<MomentTable> {
    if grid.axes.len() != devices.len() {
        return Err(BhcError::ChannelMismatch(format!(
            "grid has {} axes for {} channels",
            grid.axes.len(),
            devices.len()
        )));
    }
    if devices.iter().any(|d| d.lo_amplitude == 0.0) {
        return Err(BhcError::ZeroLo);
    }
    for (i, a) in grid.axes.iter().enumerate() {
        if a.points < 2 * a.k + 2 {
            return Err(BhcError::GridMismatch(format!(
                "channel {i}: {} phases cannot resolve order {}",
                a.points, a.k
            )));
        }
    }
    if samples.len() != grid.len() {
        return Err(BhcError::GridMismatch(format!(
            "{} samples for a grid of {} settings",
            samples.len(),
            grid.len()
        )));
    }
    if let Some(se) = stderr {
        if se.len() != samples.len() {
            return Err(BhcError::GridMismatch(format!(
                "{} standard errors for {} samples",
                se.len(),
                samples.len()
            )));
        }
    }
    let ks = grid.orders();
    let mut table = MomentTable::default();
    if ks.iter().all(|&k| k == 0) {
        table.insert(
            MomentOrder::new(vec![(0, 0); ks.len()])?,
            MomentEntry {
                value: C64::new(1.0, 0.0),
                stderr: stderr.map(|_| 0.0),
                provenance,
            },
        );
        return Ok(table);
    }
    let settings = grid.settings();
    let total = grid.len() as f64;
    let noise = stderr.map(|se| se.iter().map(|s| s * s).sum::<f64>().sqrt() / total);
    for order in orders_for(&ks) {
        let freqs: Vec<f64> = order
            .pairs()
            .iter()
            .map(|&(n, m)| n as f64 - m as f64)
            .collect();
        let mut harmonic = C64::new(0.0, 0.0);
        for (f, phases) in samples.iter().zip(&settings) {
            let arg: f64 = freqs.iter().zip(phases).map(|(nu, p)| nu * p).sum();
            harmonic += f * C64::from_polar(1.0, -arg);
        }
        harmonic /= total;
        let mut norm = 1.0;
        for (dev, &(n, m)) in devices.iter().zip(order.pairs()) {
            let k = (n + m) as i32;
            norm *= 2f64.powi(k * (dev.depth as i32 - 1))
                / (dev.eta.powi(k) * dev.lo_amplitude.powi(k) * binomial(n + m, n));
        }
        table.insert(
            order,
            MomentEntry {
                value: harmonic * norm,
                stderr: noise.map(|s| s * norm.abs()),
                provenance,
            },
        );
    }
    Ok(table)
}

/// Forward model: the balanced data `F(φ⃗)` implied by a moment table on the
/// channels of `scheme`. Each entry contributes
/// `∏ᵢ cᵢ C(kᵢ,nᵢ) e^{i(nᵢ-mᵢ)φᵢ} μ`.
pub fn f_from_table(table: &MomentTable, scheme: &ChannelScheme, phases: &[f64]) -> Result<C64> {
    if table.mode_count() != scheme.len() || phases.len() != scheme.len() {
        return Err(BhcError::ChannelMismatch(format!(
            "{}-mode table, {} channels, {} phases",
            table.mode_count(),
            scheme.len(),
            phases.len()
        )));
    }
    let mut f = C64::new(0.0, 0.0);
    for (order, e) in &table.entries {
        let mut w = C64::new(1.0, 0.0);
        for ((dev, &(n, m)), &phi) in scheme.devices().zip(order.pairs()).zip(phases) {
            let k = (n + m) as i32;
            let c = dev.eta.powi(k) * 2f64.powi(-k * (dev.depth as i32 - 1)) * dev.lo_amplitude.powi(k);
            w *= C64::from_polar(c * binomial(n + m, n), (n as f64 - m as f64) * phi);
        }
        f += w * e.value;
    }
    Ok(f)
}

/// Largest DFT coefficient of `samples` at a frequency vector that no
/// moment of the grid's orders can produce (wrong parity or `|ν| > k`).
/// For band-limited balanced data this is zero up to rounding.
pub fn alias_residual(samples: &[C64], grid: &PhaseGrid) -> Result<f64> {
    if samples.len() != grid.len() {
        return Err(BhcError::GridMismatch(format!(
            "{} samples for a grid of {} settings",
            samples.len(),
            grid.len()
        )));
    }
    let settings = grid.settings();
    let total = grid.len() as f64;
    let mut worst = 0.0f64;
    for bin in 0..grid.len() {
        let idx = grid.indices(bin);
        let mut allowed = true;
        let mut freqs = Vec::with_capacity(idx.len());
        for (&j, a) in idx.iter().zip(&grid.axes) {
            // signed frequency in (-M/2, M/2]
            let m = a.points as i64;
            let mut nu = j as i64;
            if nu > m / 2 {
                nu -= m;
            }
            let k = a.k as i64;
            if nu.abs() > k || (nu - k).rem_euclid(2) != 0 {
                allowed = false;
            }
            freqs.push(nu as f64);
        }
        if allowed {
            continue;
        }
        let mut c = C64::new(0.0, 0.0);
        for (f, phases) in samples.iter().zip(&settings) {
            let arg: f64 = freqs.iter().zip(phases).map(|(nu, p)| nu * p).sum();
            c += f * C64::from_polar(1.0, -arg);
        }
        worst = worst.max((c / total).norm());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarrierSpec {
    pub omega: f64,
    pub t: f64,
}

/// Moment of the full field from the slowly varying one:
/// multiplies by `e^{i(n-m)ωt}`.
pub fn restore_carrier(value: C64, n: usize, m: usize, carrier: &CarrierSpec) -> C64 {
    value * C64::from_polar(1.0, (n as f64 - m as f64) * carrier.omega * carrier.t)
}

/// Per-channel carrier restoration for a multi-point moment.
pub fn restore_carrier_multi(value: C64, order: &MomentOrder, carriers: &[CarrierSpec]) -> C64 {
    order
        .pairs()
        .iter()
        .zip(carriers)
        .fold(value, |v, (&(n, m), c)| restore_carrier(v, n, m, c))
}
