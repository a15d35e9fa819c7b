//! Brute-force expectations on a [`TruncatedState`]: normally ordered
//! moments, the normally ordered characteristic function and a truncation
//! audit. These are the oracle every reconstruction is checked against.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::state::{TruncatedState, DEFAULT_TAIL_TOLERANCE};
use crate::error::{BhcError, Result};

/// Per-mode exponents `(n_i, m_i)` of `∏ a_i†^{n_i} a_i^{m_i}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MomentOrder(Vec<(usize, usize)>);

impl MomentOrder {
    pub fn new(pairs: Vec<(usize, usize)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(BhcError::InvalidSpec(
                "moment order needs at least one mode".into(),
            ));
        }
        Ok(MomentOrder(pairs))
    }

    pub fn single(n: usize, m: usize) -> Self {
        MomentOrder(vec![(n, m)])
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.0
    }

    pub fn mode_count(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> usize {
        self.0.iter().map(|(n, m)| n + m).sum()
    }

    /// Exponents with creation and annihilation swapped; the moment of the
    /// result is the complex conjugate.
    pub fn conjugate(&self) -> Self {
        MomentOrder(self.0.iter().map(|&(n, m)| (m, n)).collect())
    }
}

/// `⟨∏ᵢ aᵢ†^{nᵢ} aᵢ^{mᵢ}⟩` evaluated exactly in the truncated basis.
pub fn normal_moment(state: &TruncatedState, order: &MomentOrder) -> Result<C64> {
    let dims = state.dims();
    if order.mode_count() != dims.len() {
        return Err(BhcError::ChannelMismatch(format!(
            "order has {} modes, state has {}",
            order.mode_count(),
            dims.len()
        )));
    }
    for (mode, (&(n, m), &d)) in order.pairs().iter().zip(dims).enumerate() {
        if n + m > d {
            return Err(BhcError::OrderExceedsCutoff {
                mode,
                order: n + m,
                cutoff: d,
            });
        }
    }
    let strides = state.strides();
    let rho = state.matrix();
    let mut acc = C64::new(0.0, 0.0);
    // A|q⟩ = c(q)|p(q)⟩ for a single basis vector, so Tr(ρA) = Σ_q c(q) ρ[q, p(q)].
    'basis: for q_idx in 0..state.dimension() {
        let mut p_idx = 0usize;
        let mut coef = 1.0f64;
        for (mode, &(n, m)) in order.pairs().iter().enumerate() {
            let q = (q_idx / strides[mode]) % dims[mode];
            if q < m {
                continue 'basis;
            }
            let low = q - m;
            let p = low + n;
            if p >= dims[mode] {
                continue 'basis;
            }
            coef *= falling_sqrt(q, m) * falling_sqrt(p, n);
            p_idx += p * strides[mode];
        }
        acc += rho[(q_idx, p_idx)] * coef;
    }
    Ok(acc)
}

/// `√(q!/(q-k)!)`.
fn falling_sqrt(q: usize, k: usize) -> f64 {
    ((q + 1 - k)..=q).map(|j| (j as f64).sqrt()).product()
}

/// Argument `u⃗` of the normally ordered characteristic function.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicQuery(pub Vec<C64>);

/// `C[u⃗] = ⟨∏ᵢ e^{uᵢ aᵢ†} e^{-uᵢ* aᵢ}⟩`.
///
/// Each factor is a finite nilpotent series in the truncated basis, so it is
/// assembled exactly as a matrix and traced against the state. Note that
/// with this sign convention `∂_u^n ∂_{u*}^m C |₀ = (-1)^m ⟨a†^n a^m⟩`.
pub fn characteristic_fn(state: &TruncatedState, query: &CharacteristicQuery) -> Result<C64> {
    let dims = state.dims();
    if query.0.len() != dims.len() {
        return Err(BhcError::ChannelMismatch(format!(
            "query has {} entries, state has {} modes",
            query.0.len(),
            dims.len()
        )));
    }
    for (mode, (u, &d)) in query.0.iter().zip(dims).enumerate() {
        let limit = (d as f64).sqrt() / 4.0;
        if u.norm() > limit {
            return Err(BhcError::ConvergenceGuard {
                mode,
                magnitude: u.norm(),
                limit,
            });
        }
    }
    if query.0.iter().all(|u| *u == C64::new(0.0, 0.0)) {
        return Ok(C64::new(1.0, 0.0));
    }
    let factors: Vec<DMatrix<C64>> = query
        .0
        .iter()
        .zip(dims)
        .map(|(&u, &d)| displacement_factor(u, d))
        .collect();
    let strides = state.strides();
    let rho = state.matrix();
    let n = state.dimension();
    let mut acc = C64::new(0.0, 0.0);
    for q in 0..n {
        for p in 0..n {
            let r = rho[(q, p)];
            if r == C64::new(0.0, 0.0) {
                continue;
            }
            let mut o = C64::new(1.0, 0.0);
            for (mode, f) in factors.iter().enumerate() {
                let pi = (p / strides[mode]) % dims[mode];
                let qi = (q / strides[mode]) % dims[mode];
                o *= f[(pi, qi)];
                if o == C64::new(0.0, 0.0) {
                    break;
                }
            }
            acc += r * o;
        }
    }
    Ok(acc)
}

/// `e^{u a†} e^{-u* a}` as a `dim × dim` matrix.
fn displacement_factor(u: C64, dim: usize) -> DMatrix<C64> {
    let mut raise = DMatrix::<C64>::zeros(dim, dim);
    let mut lower = DMatrix::<C64>::zeros(dim, dim);
    let v = -u.conj();
    for q in 0..dim {
        // raise[p, q] = u^{p-q}/(p-q)! √(p!/q!)
        let mut t = C64::new(1.0, 0.0);
        raise[(q, q)] = t;
        for p in (q + 1)..dim {
            t *= u * (p as f64).sqrt() / ((p - q) as f64);
            raise[(p, q)] = t;
        }
        // lower[p, q] = v^{q-p}/(q-p)! √(q!/p!) for p ≤ q
        let mut t = C64::new(1.0, 0.0);
        lower[(q, q)] = t;
        for p in (0..q).rev() {
            t *= v * ((p + 1) as f64).sqrt() / ((q - p) as f64);
            lower[(p, q)] = t;
        }
    }
    raise * lower
}

/// Advisory audit of how close a state sits to its basis edge.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationReport {
    /// Largest marginal population of any mode's top Fock level.
    pub top_level_mass: f64,
    /// Pre-renormalization mass outside the basis.
    pub tail_mass: f64,
    pub tolerance: f64,
    /// Headroom `cutoff - L` where `L` is the first level with `P(n ≥ L) ≤ tol`,
    /// minimized over modes (0 when no such level exists).
    pub safe_order: usize,
    pub order_max: usize,
    /// `tail_mass > tolerance`.
    pub flagged_unsafe: bool,
    pub safe_for_order: bool,
}

pub fn truncation_report(state: &TruncatedState, order_max: usize) -> TruncationReport {
    truncation_report_with(state, order_max, DEFAULT_TAIL_TOLERANCE)
}

pub fn truncation_report_with(
    state: &TruncatedState,
    order_max: usize,
    tolerance: f64,
) -> TruncationReport {
    let tail = state.tail_mass();
    let mut top = 0.0f64;
    let mut safe = usize::MAX;
    for (mode, &d) in state.dims().iter().enumerate() {
        let pops = state.marginal_populations(mode);
        top = top.max(pops[d - 1]);
        let mut above = tail;
        let mut level = None;
        for l in (1..=d).rev() {
            if l < d {
                above += pops[l];
            }
            if above <= tolerance {
                level = Some(l);
            } else {
                break;
            }
        }
        safe = safe.min(level.map_or(0, |l| d - l));
    }
    let flagged = tail > tolerance;
    TruncationReport {
        top_level_mass: top,
        tail_mass: tail,
        tolerance,
        safe_order: safe,
        order_max,
        flagged_unsafe: flagged,
        safe_for_order: !flagged && order_max <= safe,
    }
}
