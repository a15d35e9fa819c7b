//! Batch-means estimators and the sampled reconstruction pipeline.

use num_complex::Complex64 as C64;
use serde::Serialize;

use super::{sample_classical, sample_exact_with, CountRecord, CountRecords, Estimate, ExactOptions, ExperimentSpec};
use crate::correlator::{binomial, ChannelSelection, DetectorSelection};
use crate::error::{BhcError, Result};
use crate::fock::{build_state, MomentOrder, StateSpec};
use crate::network::ChannelScheme;
use crate::reconstruct::{design_tensor_grid, invert_multi_sampled, MomentTable, PhaseGrid};

/// Mean of `values` with the standard error of `batches` contiguous batch
/// means.
pub fn batch_estimate(values: &[f64], batches: usize) -> Estimate {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let b = batches.min(n).max(1);
    if b < 2 {
        return Estimate {
            mean,
            stderr: 0.0,
            shots: n,
        };
    }
    let means: Vec<f64> = (0..b)
        .map(|i| {
            let chunk = &values[i * n / b..(i + 1) * n / b];
            chunk.iter().sum::<f64>() / chunk.len() as f64
        })
        .collect();
    let mbar = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|m| (m - mbar).powi(2)).sum::<f64>() / (b - 1) as f64;
    Estimate {
        mean,
        stderr: (var / b as f64).sqrt(),
        shots: n,
    }
}

fn check_detectors(records: &[CountRecord], detectors: &[usize]) -> Result<()> {
    let width = records.first().map_or(0, |r| r.counts.len());
    for (i, d) in detectors.iter().enumerate() {
        if detectors[..i].contains(d) {
            return Err(BhcError::SelectionInvalid(format!("detector {d} used twice")));
        }
        if *d >= width {
            return Err(BhcError::SelectionInvalid(format!(
                "detector {d} out of range for {width} detectors"
            )));
        }
    }
    Ok(())
}

/// Sample average of `∏ counts` over pairwise distinct `detectors`. Records
/// with no data give `0 ± 0`.
pub fn estimate_product(records: &[CountRecord], detectors: &[usize], batches: usize) -> Result<Estimate> {
    if records.is_empty() {
        return Ok(Estimate {
            mean: 0.0,
            stderr: 0.0,
            shots: 0,
        });
    }
    check_detectors(records, detectors)?;
    let values: Vec<f64> = records
        .iter()
        .map(|r| detectors.iter().map(|&d| r.counts[d] as f64).product())
        .collect();
    Ok(batch_estimate(&values, batches))
}

/// Flat detector indices of a selection, channels concatenated with `2^dᵢ`
/// detectors each.
pub fn selection_detectors(selection: &DetectorSelection) -> Vec<usize> {
    let mut offset = 0;
    let mut out = Vec::new();
    for c in &selection.channels {
        out.extend(c.detectors().into_iter().map(|j| j + offset));
        offset += 1usize << c.depth;
    }
    out
}

/// `Γ` estimate from count products over the selection's detectors.
pub fn estimate_gamma(
    records: &[CountRecord],
    selection: &DetectorSelection,
    batches: usize,
) -> Result<Estimate> {
    if let Some(r) = records.first() {
        let need: usize = selection.channels.iter().map(|c| 1usize << c.depth).sum();
        if r.counts.len() != need {
            return Err(BhcError::SelectionInvalid(format!(
                "selection spans {need} detectors, records have {}",
                r.counts.len()
            )));
        }
    }
    estimate_product(records, &selection_detectors(selection), batches)
}

/// `⟨nᵢnⱼ⟩ / (⟨nᵢ⟩⟨nⱼ⟩)` with the spread of per-batch ratios as its error.
pub fn estimate_g2(records: &[CountRecord], i: usize, j: usize, batches: usize) -> Result<Estimate> {
    check_detectors(records, &[i, j])?;
    let ratio = |rs: &[CountRecord]| {
        let n = rs.len() as f64;
        let (mut a, mut b, mut ab) = (0.0, 0.0, 0.0);
        for r in rs {
            let (x, y) = (r.counts[i] as f64, r.counts[j] as f64);
            a += x;
            b += y;
            ab += x * y;
        }
        (ab / n) / ((a / n) * (b / n))
    };
    let n = records.len();
    let b = batches.min(n).max(2);
    let rs: Vec<f64> = (0..b).map(|k| ratio(&records[k * n / b..(k + 1) * n / b])).collect();
    let mbar = rs.iter().sum::<f64>() / b as f64;
    let var = rs.iter().map(|r| (r - mbar).powi(2)).sum::<f64>() / (b - 1) as f64;
    Ok(Estimate {
        mean: ratio(records),
        stderr: (var / b as f64).sqrt(),
        shots: n,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    Exact(ExactOptions),
    Classical,
}

impl Backend {
    /// Classical sampling for P-representable states, exact otherwise.
    pub fn auto(spec: &StateSpec) -> Self {
        if spec.is_p_representable() {
            Backend::Classical
        } else {
            Backend::Exact(ExactOptions::default())
        }
    }
}

#[derive(Debug, Clone)]
pub struct SampledRun {
    pub table: MomentTable,
    pub grid: PhaseGrid,
    /// `F` estimate at each grid setting.
    pub f: Vec<Estimate>,
    pub records: CountRecords,
}

/// Detector offset of a channel and its weighted detector subsets.
type ChannelPlan = (usize, Vec<(f64, Vec<usize>)>);

/// Per-shot balanced combination `∏ᵢ Σ_l (-1)^{kᵢ-l} C(kᵢ,l) ∏_{S(kᵢ,l)} n`.
/// Each term is a product over distinct detectors, so its mean is `F`.
fn shot_f(counts: &[u64], plan: &[ChannelPlan]) -> f64 {
    let mut prod = 1.0;
    for (offset, terms) in plan {
        let mut s = 0.0;
        for (w, dets) in terms {
            s += w * dets.iter().map(|&d| counts[offset + d] as f64).product::<f64>();
        }
        prod *= s;
    }
    prod
}

/// Samples the full experiment on the design grid for orders `ks`, estimates
/// `F` at each setting and inverts it.
pub fn run_pipeline_sampled(
    state: &StateSpec,
    cutoffs: &[usize],
    scheme: &ChannelScheme,
    ks: &[usize],
    spec: &ExperimentSpec,
    backend: &Backend,
) -> Result<SampledRun> {
    spec.validate()?;
    if ks.len() != scheme.len() {
        return Err(BhcError::ChannelMismatch(format!(
            "{} orders for {} channels",
            ks.len(),
            scheme.len()
        )));
    }
    if scheme.devices().any(|d| d.lo_amplitude == 0.0) {
        return Err(BhcError::ZeroLo);
    }
    let offsets = scheme.detector_offsets();
    let mut plan = Vec::with_capacity(ks.len());
    for ((dev, &k), &offset) in scheme.devices().zip(ks).zip(&offsets) {
        DetectorSelection::single(dev.depth, k, 0)?;
        let terms = (0..=k)
            .map(|l| {
                let sign = if (k - l) % 2 == 1 { -1.0 } else { 1.0 };
                let sel = ChannelSelection {
                    k,
                    l,
                    depth: dev.depth,
                };
                (sign * binomial(k, l), sel.detectors())
            })
            .collect();
        plan.push((offset, terms));
    }
    let grid = design_tensor_grid(ks);
    let settings = grid.settings();
    let records = match backend {
        Backend::Classical => sample_classical(state, scheme, spec, &settings)?,
        Backend::Exact(opts) => {
            if scheme.len() != 1 {
                return Err(BhcError::ChannelMismatch(
                    "exact backend runs a single channel".into(),
                ));
            }
            let st = build_state(state, cutoffs)?;
            let phases: Vec<f64> = settings.iter().map(|p| p[0]).collect();
            let dev = scheme.devices().next().expect("one channel");
            sample_exact_with(&st, dev, spec, &phases, opts)?
        }
    };
    let f: Vec<Estimate> = (0..grid.len())
        .map(|s| {
            let values: Vec<f64> = records
                .for_setting(s)
                .iter()
                .map(|r| shot_f(&r.counts, &plan))
                .collect();
            batch_estimate(&values, spec.batches)
        })
        .collect();
    let samples: Vec<C64> = f.iter().map(|e| C64::new(e.mean, 0.0)).collect();
    let stderr: Vec<f64> = f.iter().map(|e| e.stderr).collect();
    let table = invert_multi_sampled(&samples, &stderr, &grid, scheme)?;
    Ok(SampledRun {
        table,
        grid,
        f,
        records,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Decreasing,
    Increasing,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnrRow {
    pub lo_amplitude: f64,
    pub order: MomentOrder,
    pub value: C64,
    pub stderr: f64,
    pub shots: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnrReport {
    pub rows: Vec<SnrRow>,
    /// Direction of the stderr as `E` increases through the scan, per order.
    pub trends: Vec<(MomentOrder, Trend)>,
}

/// Stderr of every recovered moment of orders `ks` as the LO amplitude of all
/// channels runs through `amplitudes`.
pub fn snr_scan(
    state: &StateSpec,
    cutoffs: &[usize],
    scheme: &ChannelScheme,
    ks: &[usize],
    amplitudes: &[f64],
    spec: &ExperimentSpec,
    backend: &Backend,
) -> Result<SnrReport> {
    if amplitudes.contains(&0.0) {
        return Err(BhcError::ZeroLo);
    }
    let mut rows = Vec::new();
    for &e in amplitudes {
        let mut sc = scheme.clone();
        for c in &mut sc.channels {
            c.device.lo_amplitude = e;
        }
        let run = run_pipeline_sampled(state, cutoffs, &sc, ks, spec, backend)?;
        for (order, entry) in run.table.entries {
            rows.push(SnrRow {
                lo_amplitude: e,
                order,
                value: entry.value,
                stderr: entry.stderr.unwrap_or(0.0),
                shots: spec.shots,
            });
        }
    }
    let mut orders: Vec<MomentOrder> = rows.iter().map(|r| r.order.clone()).collect();
    orders.sort();
    orders.dedup();
    let trends = orders
        .into_iter()
        .map(|o| {
            let s: Vec<f64> = rows.iter().filter(|r| r.order == o).map(|r| r.stderr).collect();
            let trend = if s.windows(2).all(|w| w[1] < w[0]) {
                Trend::Decreasing
            } else if s.windows(2).all(|w| w[1] > w[0]) {
                Trend::Increasing
            } else {
                Trend::Mixed
            };
            (o, trend)
        })
        .collect();
    Ok(SnrReport { rows, trends })
}
