//! Fock-basis propagation of signal ⊗ LO ⊗ vacuum through `MD_d`.
//!
//! An input creation operator maps to `aᵢ† → Σⱼ T[j,i] bⱼ†` on the detector
//! modes, so the output of `|ψ⟩ ⊗ |LO⟩ ⊗ |0…⟩` is
//! `Σₙ ψₙ/√n! (A₀†)ⁿ |L⟩` with `|L⟩ = Σₘ cₘ/√m! (A₁†)ᵐ |0⟩`. Both sums are
//! evaluated by Horner's rule on a dense tensor over detector occupations
//! `0..=N`, `N` being the largest total photon number present.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use super::{shot_rng, CountRecord, CountRecords, ExperimentSpec};
use crate::error::{BhcError, Result};
use crate::fock::{coherent_ket, TruncatedState};
use crate::network::{build_transfer, DeviceSpec};

const EIGEN_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactOptions {
    /// Fock cutoff of the LO mode; chosen from `lo_tail_tolerance` when
    /// absent.
    pub lo_cutoff: Option<usize>,
    pub lo_tail_tolerance: f64,
    /// Largest dense output tensor, in amplitudes.
    pub budget: usize,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions {
            lo_cutoff: None,
            lo_tail_tolerance: 1e-12,
            budget: 2_000_000,
        }
    }
}

/// Poisson mass of `|E|` at levels `≥ dim`.
fn lo_tail(amplitude: f64, dim: usize) -> f64 {
    let mean = amplitude * amplitude;
    let top = dim + (mean + 20.0 * amplitude + 60.0) as usize;
    let mut p = (-mean).exp();
    let mut tail = 0.0;
    for n in 0..top {
        if n >= dim {
            tail += p;
        }
        p *= mean / (n + 1) as f64;
    }
    tail
}

/// Smallest LO cutoff whose truncated Poisson tail is at most `tolerance`.
pub fn lo_cutoff_for(amplitude: f64, tolerance: f64) -> usize {
    let mut dim = 1;
    while lo_tail(amplitude, dim) > tolerance {
        dim += 1;
    }
    dim
}

/// One detector occupation table over `(N+1)^R` indices, rail 0 most
/// significant.
struct Tensor {
    rails: usize,
    max_total: usize,
    occupations: Vec<u8>,
    totals: Vec<u16>,
    strides: Vec<usize>,
}

impl Tensor {
    fn new(rails: usize, max_total: usize, budget: usize) -> Result<Self> {
        let base = max_total + 1;
        let size = base
            .checked_pow(rails as u32)
            .filter(|&s| s <= budget)
            .ok_or(BhcError::BudgetExceeded {
                needed: base.saturating_pow(rails as u32),
                budget,
            })?;
        if max_total > u8::MAX as usize {
            return Err(BhcError::BudgetExceeded {
                needed: size,
                budget,
            });
        }
        let mut strides = vec![1usize; rails];
        for r in (0..rails.saturating_sub(1)).rev() {
            strides[r] = strides[r + 1] * base;
        }
        let mut occupations = vec![0u8; size * rails];
        let mut totals = vec![0u16; size];
        for idx in 0..size {
            let mut rest = idx;
            let mut t = 0u16;
            for r in 0..rails {
                let o = rest / strides[r];
                rest %= strides[r];
                occupations[idx * rails + r] = o as u8;
                t += o as u16;
            }
            totals[idx] = t;
        }
        Ok(Tensor {
            rails,
            max_total,
            occupations,
            totals,
            strides,
        })
    }

    fn size(&self) -> usize {
        self.totals.len()
    }

    fn occ(&self, idx: usize) -> &[u8] {
        &self.occupations[idx * self.rails..(idx + 1) * self.rails]
    }

    /// `Σⱼ coeffs[j] bⱼ† v`; content at total `N` would leave the tensor and
    /// is never present by construction.
    fn create(&self, v: &[C64], coeffs: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); v.len()];
        for (idx, &amp) in v.iter().enumerate() {
            if amp == C64::new(0.0, 0.0) || self.totals[idx] as usize >= self.max_total {
                continue;
            }
            let occ = self.occ(idx);
            for (j, &c) in coeffs.iter().enumerate() {
                if c == C64::new(0.0, 0.0) {
                    continue;
                }
                let f = ((occ[j] as f64) + 1.0).sqrt();
                out[idx + self.strides[j]] += c * f * amp;
            }
        }
        out
    }

    /// `Σₙ wₙ (Σⱼ coeffs[j] bⱼ†)ⁿ base`.
    fn horner(&self, weights: &[C64], coeffs: &[C64], base: &[C64]) -> Vec<C64> {
        let mut acc = vec![C64::new(0.0, 0.0); base.len()];
        for &w in weights.iter().rev() {
            acc = self.create(&acc, coeffs);
            for (a, b) in acc.iter_mut().zip(base) {
                *a += w * b;
            }
        }
        acc
    }
}

/// Joint detector distribution at one setting as a cumulative table.
struct OutputTable {
    indices: Vec<usize>,
    cumulative: Vec<f64>,
}

fn pure_components(state: &TruncatedState) -> Vec<(f64, Vec<C64>)> {
    let eig = state.matrix().clone().symmetric_eigen();
    let mut out = Vec::new();
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > EIGEN_FLOOR {
            out.push((lambda, eig.eigenvectors.column(i).iter().copied().collect()));
        }
    }
    out
}

fn output_distribution(
    components: &[(f64, Vec<C64>)],
    lo_ket: &[C64],
    transfer: &DMatrix<C64>,
    tensor: &Tensor,
) -> OutputTable {
    let rails = tensor.rails;
    let col = |i: usize| (0..rails).map(|j| transfer[(j, i)]).collect::<Vec<_>>();
    let signal = col(0);
    let lo = col(1);
    let mut vacuum = vec![C64::new(0.0, 0.0); tensor.size()];
    vacuum[0] = C64::new(1.0, 0.0);
    let scaled = |ket: &[C64]| -> Vec<C64> {
        let mut fact = 1.0f64;
        ket.iter()
            .enumerate()
            .map(|(n, c)| {
                if n > 0 {
                    fact *= (n as f64).sqrt();
                }
                c / fact
            })
            .collect()
    };
    let lo_out = tensor.horner(&scaled(lo_ket), &lo, &vacuum);
    let mut probs = vec![0.0f64; tensor.size()];
    for (p, psi) in components {
        let out = tensor.horner(&scaled(psi), &signal, &lo_out);
        for (q, a) in probs.iter_mut().zip(&out) {
            *q += p * a.norm_sqr();
        }
    }
    let mut indices = Vec::new();
    let mut cumulative = Vec::new();
    let mut acc = 0.0;
    for (idx, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            indices.push(idx);
            cumulative.push(acc);
        }
    }
    OutputTable {
        indices,
        cumulative,
    }
}

/// Counts at quadrature phase `phi` for every entry of `phases`, with default
/// backend options.
pub fn sample_exact(
    state: &TruncatedState,
    device: &DeviceSpec,
    spec: &ExperimentSpec,
    phases: &[f64],
) -> Result<CountRecords> {
    sample_exact_with(state, device, spec, phases, &ExactOptions::default())
}

pub fn sample_exact_with(
    state: &TruncatedState,
    device: &DeviceSpec,
    spec: &ExperimentSpec,
    phases: &[f64],
    opts: &ExactOptions,
) -> Result<CountRecords> {
    spec.validate()?;
    device.validate()?;
    if state.mode_count() != 1 {
        return Err(BhcError::ChannelMismatch(format!(
            "exact backend takes a single-mode signal, got {} modes",
            state.mode_count()
        )));
    }
    if device.depth > 2 {
        return Err(BhcError::InvalidSpec(format!(
            "exact backend supports depth <= 2, got {}",
            device.depth
        )));
    }
    let e = device.lo_amplitude;
    let lo_dim = match opts.lo_cutoff {
        Some(dim) => {
            let tail = lo_tail(e, dim);
            if tail > opts.lo_tail_tolerance {
                return Err(BhcError::CutoffTooSmall {
                    tail_mass: tail,
                    tolerance: opts.lo_tail_tolerance,
                    context: format!(" (LO cutoff {dim} at E = {e})"),
                });
            }
            dim
        }
        None => lo_cutoff_for(e, opts.lo_tail_tolerance),
    };
    let rails = device.detector_count();
    let max_total = (state.dimension() - 1) + (lo_dim - 1);
    let tensor = Tensor::new(rails, max_total, opts.budget)?;
    let components = pure_components(state);
    let mut records = Vec::with_capacity(phases.len() * spec.shots);
    for (setting, &phi) in phases.iter().enumerate() {
        let dev = device.at_quadrature_phase(phi);
        let transfer = build_transfer(&dev)?;
        let lo = coherent_ket(dev.lo_field(), lo_dim);
        let norm = lo.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let lo: Vec<C64> = lo.iter().map(|c| c / norm).collect();
        let dist = output_distribution(&components, &lo, transfer.matrix(), &tensor);
        let total = *dist.cumulative.last().unwrap_or(&1.0);
        let thin = if dev.eta < 1.0 { Some(dev.eta) } else { None };
        let batch: Vec<CountRecord> = (0..spec.shots)
            .into_par_iter()
            .map(|shot| {
                let mut rng = shot_rng(spec.seed, setting, shot);
                let u = rng.random::<f64>() * total;
                let pos = dist
                    .cumulative
                    .partition_point(|&c| c <= u)
                    .min(dist.indices.len() - 1);
                let occ = tensor.occ(dist.indices[pos]);
                let counts = occ
                    .iter()
                    .map(|&n| match thin {
                        Some(eta) if n > 0 => Binomial::new(n as u64, eta)
                            .expect("eta validated in (0, 1)")
                            .sample(&mut rng),
                        _ => n as u64,
                    })
                    .collect();
                CountRecord {
                    setting,
                    shot,
                    counts,
                }
            })
            .collect();
        records.extend(batch);
    }
    Ok(CountRecords {
        detectors: rails,
        settings: phases.iter().map(|&p| vec![p]).collect(),
        shots: spec.shots,
        records,
    })
}
