//! Analytic detector correlations `Γ` and balanced combinations `F`.
//!
//! The LO is a c-number here. A detector behind the `±` output of the root
//! splitter of `MD_d` sees `2^{-(d-1)/2} e^{iΦ}` times the port field
//! `(a ± i a_LO)/√2`, so `k` such detectors (`l` on the `+` side) have
//! normally ordered correlation
//!
//! ```text
//! Γ⁽ᵏ⁾_l = ηᵏ 2^{-k(d-1)} ⟨: N₊ˡ N₋^{k-l} :⟩,   N± = ½(a†a ± E X_φ + E²)
//! ```
//!
//! and the alternating sum `F⁽ᵏ⁾ = Σ_l (-1)^{k-l} C(k,l) Γ⁽ᵏ⁾_l` collapses to
//! `ηᵏ 2^{-k(d-1)} Eᵏ ⟨:X_φᵏ:⟩` since `N₊ - N₋ = E X_φ`.
//!
//! Everything is evaluated by expanding into normally ordered monomials
//! ([`NormalPoly`]) and asking the Fock oracle for each one.

mod poly;

use num_complex::Complex64 as C64;
use serde::Serialize;

pub use poly::{LinearField, Monomial, NormalPoly};

use crate::error::{BhcError, Result};
use crate::fock::{normal_moment, MomentOrder, TruncatedState};
use crate::network::{build_transfer, ChannelScheme, DeviceSpec};

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `k` detectors of one channel, `l` of them behind the `+` output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ChannelSelection {
    pub k: usize,
    pub l: usize,
    pub depth: u32,
}

impl ChannelSelection {
    /// Concrete detector indices: the first `l` of the `+` half and the first
    /// `k - l` of the `-` half.
    pub fn detectors(&self) -> Vec<usize> {
        let half = 1usize << (self.depth - 1);
        (0..self.l).chain(half..half + self.k - self.l).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DetectorSelection {
    pub channels: Vec<ChannelSelection>,
}

impl DetectorSelection {
    pub fn new(depths: &[u32], kl: &[(usize, usize)]) -> Result<Self> {
        if depths.len() != kl.len() {
            return Err(BhcError::ChannelMismatch(format!(
                "{} selections for {} channels",
                kl.len(),
                depths.len()
            )));
        }
        let mut channels = Vec::with_capacity(kl.len());
        for (i, (&depth, &(k, l))) in depths.iter().zip(kl).enumerate() {
            let cap = 1usize << (depth - 1);
            if l > k || k > cap {
                return Err(BhcError::SelectionInvalid(format!(
                    "channel {i}: need 0 <= l <= k <= {cap}, got k = {k}, l = {l}"
                )));
            }
            channels.push(ChannelSelection { k, l, depth });
        }
        Ok(DetectorSelection { channels })
    }

    pub fn single(depth: u32, k: usize, l: usize) -> Result<Self> {
        DetectorSelection::new(&[depth], &[(k, l)])
    }

    pub fn for_scheme(scheme: &ChannelScheme, kl: &[(usize, usize)]) -> Result<Self> {
        let depths: Vec<u32> = scheme.devices().map(|d| d.depth).collect();
        DetectorSelection::new(&depths, kl)
    }

    /// `K = Σ kᵢ`.
    pub fn total_k(&self) -> usize {
        self.channels.iter().map(|c| c.k).sum()
    }

    /// `L = Σ lᵢ`.
    pub fn total_l(&self) -> usize {
        self.channels.iter().map(|c| c.l).sum()
    }

    /// `P = Σ kᵢ dᵢ`.
    pub fn p(&self) -> usize {
        self.channels.iter().map(|c| c.k * c.depth as usize).sum()
    }

    /// `Σ kᵢ (dᵢ - 1)`: the power of two by which the port intensities are
    /// attenuated on their way to the selected detectors.
    pub fn split_exponent(&self) -> usize {
        self.p() - self.total_k()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaValue {
    pub value: C64,
    pub selection: DetectorSelection,
    pub phases: Vec<f64>,
    pub efficiency_included: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FValue {
    pub value: C64,
    pub k: Vec<usize>,
    pub phases: Vec<f64>,
    pub depths: Vec<u32>,
}

/// `N± = ½(a†a ± E X_φ + E²)` on one mode of an `modes`-mode polynomial ring.
#[derive(Debug, Clone, PartialEq)]
pub struct PortNumberForm {
    pub sign: f64,
    pub lo_amplitude: f64,
    pub phase: f64,
    pub poly: NormalPoly,
    mode: usize,
}

impl PortNumberForm {
    pub fn new(modes: usize, mode: usize, lo_amplitude: f64, phase: f64, sign: f64) -> Self {
        let half = C64::new(0.5, 0.0);
        let e = lo_amplitude;
        let number = NormalPoly::monomial(modes, mode, 1, 1, C64::new(1.0, 0.0));
        let quad = x_poly(modes, mode, phase).scale(C64::new(sign * e, 0.0));
        let identity = NormalPoly::constant(modes, C64::new(e * e, 0.0));
        PortNumberForm {
            sign,
            lo_amplitude,
            phase,
            poly: number.add(&quad).add(&identity).scale(half),
            mode,
        }
    }

    pub fn identity_coefficient(&self) -> C64 {
        self.poly.coefficient(&vec![(0, 0); self.poly.modes()])
    }

    /// Coefficient of `a†` (that of `a` is its conjugate).
    pub fn quadrature_coefficient(&self) -> C64 {
        let mut key = vec![(0, 0); self.poly.modes()];
        key[self.mode] = (1, 0);
        self.poly.coefficient(&key)
    }
}

/// `X_φ = a e^{-iφ} + a† e^{iφ}`.
fn x_poly(modes: usize, mode: usize, phase: f64) -> NormalPoly {
    NormalPoly::monomial(modes, mode, 0, 1, C64::from_polar(1.0, -phase)).add(
        &NormalPoly::monomial(modes, mode, 1, 0, C64::from_polar(1.0, phase)),
    )
}

fn check_modes(state: &TruncatedState, channels: usize) -> Result<()> {
    if state.mode_count() != channels {
        return Err(BhcError::ChannelMismatch(format!(
            "state has {} modes but the scheme has {} channels",
            state.mode_count(),
            channels
        )));
    }
    Ok(())
}

fn check_phases(phases: &[f64], channels: usize) -> Result<()> {
    if phases.len() != channels {
        return Err(BhcError::ChannelMismatch(format!(
            "{} phases for {} channels",
            phases.len(),
            channels
        )));
    }
    Ok(())
}

fn gamma_devices(
    state: &TruncatedState,
    devices: &[&DeviceSpec],
    phases: &[f64],
    selection: &DetectorSelection,
) -> Result<GammaValue> {
    let n = devices.len();
    check_modes(state, n)?;
    check_phases(phases, n)?;
    if selection.channels.len() != n {
        return Err(BhcError::ChannelMismatch(format!(
            "selection covers {} channels, scheme has {n}",
            selection.channels.len()
        )));
    }
    let mut poly = NormalPoly::one(n);
    let mut scale = 1.0;
    for (i, ((dev, &phi), sel)) in devices
        .iter()
        .zip(phases)
        .zip(&selection.channels)
        .enumerate()
    {
        if sel.depth != dev.depth {
            return Err(BhcError::SelectionInvalid(format!(
                "channel {i}: selection depth {} but device depth {}",
                sel.depth, dev.depth
            )));
        }
        let plus = PortNumberForm::new(n, i, dev.lo_amplitude, phi, 1.0);
        let minus = PortNumberForm::new(n, i, dev.lo_amplitude, phi, -1.0);
        poly = poly
            .mul(&plus.poly.pow(sel.l))
            .mul(&minus.poly.pow(sel.k - sel.l));
        scale *= dev.eta.powi(sel.k as i32) * 2f64.powi(-((sel.k as i32) * (dev.depth as i32 - 1)));
    }
    let value = poly.expectation(state)? * scale;
    Ok(GammaValue {
        value,
        selection: selection.clone(),
        phases: phases.to_vec(),
        efficiency_included: true,
    })
}

/// `Γ⁽ᵏ⁾_l` for a single-mode state measured by one device at quadrature
/// phase `phi`.
pub fn gamma_single(
    state: &TruncatedState,
    device: &DeviceSpec,
    phi: f64,
    k: usize,
    l: usize,
) -> Result<GammaValue> {
    let sel = DetectorSelection::single(device.depth, k, l)?;
    gamma_devices(state, &[device], &[phi], &sel)
}

/// `Γ^{(k₁…k_N)}_{l₁…l_N}` over the channels of a scheme.
pub fn gamma_multi(
    state: &TruncatedState,
    scheme: &ChannelScheme,
    phases: &[f64],
    selection: &DetectorSelection,
) -> Result<GammaValue> {
    let devices: Vec<&DeviceSpec> = scheme.devices().collect();
    gamma_devices(state, &devices, phases, selection)
}

/// `F⁽ᵏ⁾(φ) = Σ_l (-1)^{k-l} C(k,l) Γ⁽ᵏ⁾_l`.
pub fn f_single(state: &TruncatedState, device: &DeviceSpec, phi: f64, k: usize) -> Result<FValue> {
    if k == 0 {
        return Err(BhcError::SelectionInvalid("F needs k >= 1".into()));
    }
    let scheme = ChannelScheme::from_devices(vec![device.clone()])?;
    f_multi(state, &scheme, &[phi], &[k])
}

/// `F^{(k₁…k_N)} = Σ_{l⃗} (-1)^{K-L} ∏ C(kᵢ,lᵢ) Γ^{(k⃗)}_{l⃗}`.
pub fn f_multi(
    state: &TruncatedState,
    scheme: &ChannelScheme,
    phases: &[f64],
    ks: &[usize],
) -> Result<FValue> {
    let n = scheme.len();
    if ks.len() != n {
        return Err(BhcError::ChannelMismatch(format!(
            "{} orders for {n} channels",
            ks.len()
        )));
    }
    let depths: Vec<u32> = scheme.devices().map(|d| d.depth).collect();
    let mut ls = vec![0usize; n];
    let mut terms = Vec::new();
    loop {
        let kl: Vec<(usize, usize)> = ks.iter().copied().zip(ls.iter().copied()).collect();
        let sel = DetectorSelection::new(&depths, &kl)?;
        let gamma = gamma_multi(state, scheme, phases, &sel)?;
        let mut w: f64 = ks
            .iter()
            .zip(&ls)
            .map(|(&k, &l)| binomial(k, l))
            .product();
        if (sel.total_k() - sel.total_l()) % 2 == 1 {
            w = -w;
        }
        terms.push(gamma.value * w);
        if !advance(&mut ls, ks) {
            break;
        }
    }
    Ok(FValue {
        value: terms.into_iter().sum(),
        k: ks.to_vec(),
        phases: phases.to_vec(),
        depths,
    })
}

/// Odometer over `0 ≤ lᵢ ≤ kᵢ`; returns false after the last index.
pub(crate) fn advance(ls: &mut [usize], ks: &[usize]) -> bool {
    for i in (0..ls.len()).rev() {
        if ls[i] < ks[i] {
            ls[i] += 1;
            return true;
        }
        ls[i] = 0;
    }
    false
}

/// `⟨:X_φᵏ:⟩ = Σ_l C(k,l) ⟨a†ˡ a^{k-l}⟩ e^{-i(k-2l)φ}`.
pub fn x_moment(state: &TruncatedState, phi: f64, k: usize) -> Result<C64> {
    x_product_moment(state, &[phi], &[k])
}

/// `⟨∘∘ ∏ᵢ X_{φᵢ}^{kᵢ}(xᵢ) ∘∘⟩` through per-mode binomial expansion.
pub fn x_product_moment(state: &TruncatedState, phases: &[f64], ks: &[usize]) -> Result<C64> {
    let n = ks.len();
    check_modes(state, n)?;
    check_phases(phases, n)?;
    let mut ls = vec![0usize; n];
    let mut acc = C64::new(0.0, 0.0);
    loop {
        let mut weight = C64::new(1.0, 0.0);
        let mut pairs = Vec::with_capacity(n);
        for i in 0..n {
            let (k, l) = (ks[i], ls[i]);
            weight *= C64::from_polar(binomial(k, l), -(k as f64 - 2.0 * l as f64) * phases[i]);
            pairs.push((l, k - l));
        }
        acc += weight * normal_moment(state, &MomentOrder::new(pairs)?)?;
        if !advance(&mut ls, ks) {
            break;
        }
    }
    Ok(acc)
}

/// The collapsed form `∏ᵢ ηᵢ^{kᵢ} 2^{-kᵢ(dᵢ-1)} Eᵢ^{kᵢ} · ⟨∘∘ ∏ X^{kᵢ}_{φᵢ} ∘∘⟩`.
pub fn f_direct(
    state: &TruncatedState,
    scheme: &ChannelScheme,
    phases: &[f64],
    ks: &[usize],
) -> Result<C64> {
    Ok(x_product_moment(state, phases, ks)? * balanced_scale(scheme, ks))
}

/// `∏ᵢ ηᵢ^{kᵢ} 2^{-kᵢ(dᵢ-1)} Eᵢ^{kᵢ}`.
pub fn balanced_scale(scheme: &ChannelScheme, ks: &[usize]) -> f64 {
    scheme
        .devices()
        .zip(ks)
        .map(|(d, &k)| {
            let k = k as i32;
            d.eta.powi(k) * 2f64.powi(-k * (d.depth as i32 - 1)) * d.lo_amplitude.powi(k)
        })
        .product()
}

/// `Γ` for explicit detectors, built from the rows of each channel's
/// transfer matrix: detector `j` sees `T[j,0] a + T[j,1] α_LO` plus vacuum,
/// and vacuum drops out of normally ordered expectations.
pub fn gamma_from_transfer(
    state: &TruncatedState,
    scheme: &ChannelScheme,
    phases: &[f64],
    detectors: &[Vec<usize>],
) -> Result<C64> {
    let n = scheme.len();
    check_modes(state, n)?;
    check_phases(phases, n)?;
    if detectors.len() != n {
        return Err(BhcError::ChannelMismatch(format!(
            "detector lists for {} channels, scheme has {n}",
            detectors.len()
        )));
    }
    let mut poly = NormalPoly::one(n);
    let mut eta_factor = 1.0;
    for (i, (dev, &phi)) in scheme.devices().zip(phases).enumerate() {
        let set = &detectors[i];
        for (a, j) in set.iter().enumerate() {
            if set[..a].contains(j) || *j >= dev.detector_count() {
                return Err(BhcError::SelectionInvalid(format!(
                    "channel {i}: detector {j} repeated or out of range"
                )));
            }
        }
        let dev = dev.at_quadrature_phase(phi);
        let t = build_transfer(&dev)?;
        let lo = dev.lo_field();
        for &j in set {
            let mut coefficients = vec![C64::new(0.0, 0.0); n];
            coefficients[i] = t.signal_coefficient(j);
            let field = LinearField {
                coefficients,
                offset: t.lo_coefficient(j) * lo,
            };
            poly = poly.mul(&field.intensity());
            eta_factor *= dev.eta;
        }
    }
    Ok(poly.expectation(state)? * eta_factor)
}
