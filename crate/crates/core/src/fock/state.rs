//! Density matrices on a truncated multimode Fock basis.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::spec::StateSpec;
use crate::error::{BhcError, Result};

/// Default tolerance on the probability mass lost by truncation.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-6;

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-8;
const EIGEN_TOL: f64 = -1e-9;

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    /// Largest acceptable pre-renormalization tail mass. `f64::INFINITY`
    /// disables the audit (the tail mass is still recorded).
    pub tail_tolerance: f64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
        }
    }
}

/// An `N`-mode density matrix over the joint basis `|q_0, …, q_{N-1}⟩` with
/// `0 ≤ q_i < dims[i]`. Mode 0 is the most significant index digit.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedState {
    dims: Vec<usize>,
    matrix: DMatrix<C64>,
    tail_mass: f64,
}

impl TruncatedState {
    /// Wraps a raw density matrix after checking every state invariant,
    /// including positivity of the spectrum.
    pub fn from_matrix(dims: Vec<usize>, matrix: DMatrix<C64>) -> Result<Self> {
        let total: usize = dims.iter().product();
        if dims.is_empty() || dims.contains(&0) {
            return Err(BhcError::InvalidSpec("cutoffs must be at least 1".into()));
        }
        if matrix.nrows() != total || matrix.ncols() != total {
            return Err(BhcError::InvalidSpec(format!(
                "matrix is {}x{}, expected {total}x{total}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let state = TruncatedState {
            dims,
            matrix,
            tail_mass: 0.0,
        };
        state.check_invariants()?;
        Ok(state)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn mode_count(&self) -> usize {
        self.dims.len()
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    /// Probability mass that fell outside the basis before renormalization.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub(crate) fn strides(&self) -> Vec<usize> {
        strides(&self.dims)
    }

    /// Occupation probabilities of a single mode.
    pub fn marginal_populations(&self, mode: usize) -> Vec<f64> {
        let strides = self.strides();
        let mut pops = vec![0.0; self.dims[mode]];
        for idx in 0..self.dimension() {
            let q = (idx / strides[mode]) % self.dims[mode];
            pops[q] += self.matrix[(idx, idx)].re;
        }
        pops
    }

    /// Hermiticity, unit trace and a nonnegative spectrum.
    pub fn check_invariants(&self) -> Result<()> {
        self.check_cheap()?;
        let eig = self.matrix.clone().symmetric_eigen();
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < EIGEN_TOL {
            return Err(BhcError::InvalidSpec(format!(
                "density matrix has eigenvalue {min:.3e} below {EIGEN_TOL:e}"
            )));
        }
        Ok(())
    }

    fn check_cheap(&self) -> Result<()> {
        let n = self.dimension();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm();
                worst = worst.max(d);
            }
        }
        if worst > HERMITIAN_TOL {
            return Err(BhcError::InvalidSpec(format!(
                "density matrix is not Hermitian (deviation {worst:.3e})"
            )));
        }
        let trace = self.matrix.trace();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(BhcError::InvalidSpec(format!(
                "density matrix trace {trace} differs from 1"
            )));
        }
        Ok(())
    }
}

pub(crate) fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

/// Builds the truncated density matrix for `spec` with the default audit.
pub fn build_state(spec: &StateSpec, cutoffs: &[usize]) -> Result<TruncatedState> {
    build_state_with(spec, cutoffs, &BuildOptions::default())
}

pub fn build_state_with(
    spec: &StateSpec,
    cutoffs: &[usize],
    opts: &BuildOptions,
) -> Result<TruncatedState> {
    spec.validate()?;
    if cutoffs.len() != spec.mode_count() {
        return Err(BhcError::InvalidSpec(format!(
            "{} cutoffs given for a {}-mode state",
            cutoffs.len(),
            spec.mode_count()
        )));
    }
    if cutoffs.contains(&0) {
        return Err(BhcError::InvalidSpec("cutoffs must be at least 1".into()));
    }
    let (mut matrix, captured) = dense(spec, cutoffs);
    let tail_mass = (1.0 - captured).max(0.0);
    if tail_mass > opts.tail_tolerance || captured <= 0.0 {
        return Err(BhcError::CutoffTooSmall {
            tail_mass,
            tolerance: opts.tail_tolerance,
            context: format!(" for cutoffs {cutoffs:?}"),
        });
    }
    let trace = matrix.trace().re;
    matrix /= C64::new(trace, 0.0);
    let state = TruncatedState {
        dims: cutoffs.to_vec(),
        matrix,
        tail_mass,
    };
    state.check_cheap()?;
    Ok(state)
}

/// Unnormalized truncated density matrix and the probability it captures.
fn dense(spec: &StateSpec, dims: &[usize]) -> (DMatrix<C64>, f64) {
    match spec {
        StateSpec::Vacuum => pure(&coherent_ket(C64::new(0.0, 0.0), dims[0])),
        StateSpec::Coherent { amplitude } => pure(&coherent_ket(*amplitude, dims[0])),
        StateSpec::Fock { n } => {
            let mut ket = vec![C64::new(0.0, 0.0); dims[0]];
            if *n < dims[0] {
                ket[*n] = C64::new(1.0, 0.0);
            }
            pure(&ket)
        }
        StateSpec::SqueezedVacuum { r, theta } => pure(&squeezed_ket(*r, *theta, dims[0])),
        StateSpec::Thermal { nbar } => {
            let d = dims[0];
            let mut m = DMatrix::zeros(d, d);
            let mut captured = 0.0;
            for (k, p) in thermal_populations(*nbar, d).into_iter().enumerate() {
                m[(k, k)] = C64::new(p, 0.0);
                captured += p;
            }
            (m, captured)
        }
        StateSpec::DisplacedThermal { amplitude, nbar } => {
            displaced_thermal(*amplitude, *nbar, dims[0])
        }
        StateSpec::TwoModeSqueezed { r, theta } => {
            let (d1, d2) = (dims[0], dims[1]);
            let mut ket = vec![C64::new(0.0, 0.0); d1 * d2];
            let ratio = C64::from_polar(r.tanh(), *theta);
            let mut c = C64::new(1.0 / r.cosh(), 0.0);
            for n in 0..d1.min(d2) {
                ket[n * d2 + n] = c;
                c *= ratio;
            }
            pure(&ket)
        }
        StateSpec::Product(parts) => {
            let mut offset = 0;
            let mut acc: Option<(DMatrix<C64>, f64)> = None;
            for p in parts {
                let n = p.mode_count();
                let (m, c) = dense(p, &dims[offset..offset + n]);
                offset += n;
                acc = Some(match acc {
                    None => (m, c),
                    Some((a, ca)) => (a.kronecker(&m), ca * c),
                });
            }
            acc.expect("validated product is nonempty")
        }
        StateSpec::Mixture(parts) => {
            let total: usize = dims.iter().product();
            let mut m = DMatrix::zeros(total, total);
            let mut captured = 0.0;
            for (w, p) in parts {
                let (mp, c) = dense(p, dims);
                m += mp * C64::new(*w, 0.0);
                captured += w * c;
            }
            (m, captured)
        }
    }
}

fn pure(ket: &[C64]) -> (DMatrix<C64>, f64) {
    let n = ket.len();
    let m = DMatrix::from_fn(n, n, |i, j| ket[i] * ket[j].conj());
    let captured = ket.iter().map(|c| c.norm_sqr()).sum();
    (m, captured)
}

pub(crate) fn coherent_ket(alpha: C64, dim: usize) -> Vec<C64> {
    let mut ket = Vec::with_capacity(dim);
    let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..dim {
        ket.push(c);
        c *= alpha / ((n + 1) as f64).sqrt();
    }
    ket
}

fn squeezed_ket(r: f64, theta: f64, dim: usize) -> Vec<C64> {
    let mut ket = vec![C64::new(0.0, 0.0); dim];
    let ratio = -C64::from_polar(r.tanh(), theta);
    let mut c = C64::new(1.0 / r.cosh().sqrt(), 0.0);
    let mut n = 0;
    while 2 * n < dim {
        ket[2 * n] = c;
        let k = n as f64;
        c *= ratio * ((2.0 * k + 1.0) / (2.0 * k + 2.0)).sqrt();
        n += 1;
    }
    ket
}

fn thermal_populations(nbar: f64, dim: usize) -> Vec<f64> {
    let q = nbar / (1.0 + nbar);
    let mut p = 1.0 / (1.0 + nbar);
    (0..dim)
        .map(|_| {
            let out = p;
            p *= q;
            out
        })
        .collect()
}

/// `Σ_k p_k D(α)|k⟩⟨k|D(α)†`. The displaced Fock states are generated as
/// `(a† - α*)^k |α⟩ / √k!`, which is exact level by level in a truncated
/// basis because `a†` only feeds higher levels from lower ones.
fn displaced_thermal(alpha: C64, nbar: f64, dim: usize) -> (DMatrix<C64>, f64) {
    let q = nbar / (1.0 + nbar);
    let mut m = DMatrix::zeros(dim, dim);
    let mut captured = 0.0;
    let mut ket = coherent_ket(alpha, dim);
    let mut p = 1.0 / (1.0 + nbar);
    let mut remaining = 1.0;
    let mut k = 0usize;
    loop {
        let (mk, ck) = pure(&ket);
        m += mk * C64::new(p, 0.0);
        captured += p * ck;
        remaining -= p;
        if nbar == 0.0 || remaining < 1e-16 || k >= 4096 {
            break;
        }
        let mut next = vec![C64::new(0.0, 0.0); dim];
        for n in 0..dim {
            let mut v = -alpha.conj() * ket[n];
            if n > 0 {
                v += ket[n - 1] * (n as f64).sqrt();
            }
            next[n] = v / ((k + 1) as f64).sqrt();
        }
        ket = next;
        p *= q;
        k += 1;
    }
    (m, captured)
}
