//! Recursive beamsplitter trees `MD_d`, their linear-optical transfer
//! matrices, and multi-channel schemes for grouped correlation requests.
//!
//! Every splitting stage is a symmetric 50/50 beamsplitter (transmission
//! `1/√2`, reflection `i/√2`) followed by phase shifters on its two outputs,
//! so the carrier output of a stage is `e^{iΦ₊}(c + i a)/√2` and the ancilla
//! output is `e^{iΦ₋}(c - i a)/√2` with `Φ₊ - Φ₋ = π/2`. At the root `c` is
//! the signal and `a` the local oscillator; deeper stages take a vacuum port
//! as `a`. Detector rows are ordered so that the first half of the detectors
//! sits behind the `+` output of the root.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{BhcError, Result};

const STRUCTURE_TOL: f64 = 1e-12;

/// One measurement device `MD_d` fed by a coherent local oscillator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSpec {
    pub depth: u32,
    /// LO amplitude `E`, dimensionless in units of the signal mode.
    pub lo_amplitude: f64,
    /// `φ_LO`; the quadrature phase is `φ = φ_LO + π/2`.
    #[serde(default)]
    pub lo_phase: f64,
    pub eta: f64,
    /// Per-detector path phases `Φⱼ`; empty means all zero.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub path_phases: Vec<f64>,
    /// `Φ₋`; `Φ₊` is derived as `Φ₋ + π/2`.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub branch_phase: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl DeviceSpec {
    pub fn new(depth: u32, lo_amplitude: f64, eta: f64) -> Result<Self> {
        let d = DeviceSpec {
            depth,
            lo_amplitude,
            lo_phase: 0.0,
            eta,
            path_phases: Vec::new(),
            branch_phase: 0.0,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 1 || self.depth > 20 {
            return Err(BhcError::InvalidSpec(format!(
                "device depth {} outside 1..=20",
                self.depth
            )));
        }
        if !(self.lo_amplitude.is_finite() && self.lo_amplitude >= 0.0) {
            return Err(BhcError::InvalidSpec(format!(
                "LO amplitude {} must be finite and nonnegative",
                self.lo_amplitude
            )));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(BhcError::InvalidSpec(format!(
                "quantum efficiency {} outside (0, 1]",
                self.eta
            )));
        }
        if !self.path_phases.is_empty() && self.path_phases.len() != self.detector_count() {
            return Err(BhcError::InvalidSpec(format!(
                "{} path phases for {} detectors",
                self.path_phases.len(),
                self.detector_count()
            )));
        }
        if !self.lo_phase.is_finite() || !self.branch_phase.is_finite() {
            return Err(BhcError::InvalidSpec("phases must be finite".into()));
        }
        Ok(())
    }

    pub fn detector_count(&self) -> usize {
        1usize << self.depth
    }

    /// Detectors per subdevice, which is also the largest `n + m` the device
    /// can measure.
    pub fn capacity(&self) -> usize {
        1usize << (self.depth - 1)
    }

    pub fn phi_plus(&self) -> f64 {
        self.branch_phase + FRAC_PI_2
    }

    pub fn phi_minus(&self) -> f64 {
        self.branch_phase
    }

    pub fn path_phase(&self, detector: usize) -> f64 {
        self.path_phases.get(detector).copied().unwrap_or(0.0)
    }

    pub fn quadrature_phase(&self) -> f64 {
        self.lo_phase + FRAC_PI_2
    }

    /// Same device with the LO phase set so that the measured quadrature
    /// phase is `phi`.
    pub fn at_quadrature_phase(&self, phi: f64) -> Self {
        DeviceSpec {
            lo_phase: phi - FRAC_PI_2,
            ..self.clone()
        }
    }

    /// Coherent amplitude `E e^{iφ_LO}` of the LO mode.
    pub fn lo_field(&self) -> C64 {
        C64::from_polar(self.lo_amplitude, self.lo_phase)
    }
}

/// A two-mode stage acting on rails `carrier` and `ancilla`; `matrix` maps
/// input mode operators (carrier, ancilla) to output mode operators.
#[derive(Debug, Clone, PartialEq)]
pub struct Splitter {
    pub carrier: usize,
    pub ancilla: usize,
    pub matrix: [[C64; 2]; 2],
}

/// Gate-level description of `MD_d`: rail `0` carries the signal, rail `1`
/// the LO, rails `2..` vacuum. After the splitters, detector `j` reads rail
/// `detector_rails[j]` through a phase shifter `e^{iΦⱼ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub rails: usize,
    pub splitters: Vec<Splitter>,
    pub detector_rails: Vec<usize>,
    pub detector_phases: Vec<f64>,
}

fn stage_matrix(device: &DeviceSpec) -> [[C64; 2]; 2] {
    let t = C64::new(FRAC_1_SQRT_2, 0.0);
    let r = C64::new(0.0, FRAC_1_SQRT_2);
    let bs = [[t, r], [r, t]];
    let shift = [
        C64::from_polar(1.0, device.phi_plus()),
        C64::from_polar(1.0, device.phi_minus() - FRAC_PI_2),
    ];
    [
        [shift[0] * bs[0][0], shift[0] * bs[0][1]],
        [shift[1] * bs[1][0], shift[1] * bs[1][1]],
    ]
}

pub fn layout(device: &DeviceSpec) -> Layout {
    let n = device.detector_count();
    let stage = stage_matrix(device);
    let mut splitters = Vec::with_capacity(n - 1);
    let mut live = vec![0usize];
    let mut next = 1usize;
    for _ in 0..device.depth {
        let mut grown = Vec::with_capacity(live.len() * 2);
        for &c in &live {
            let a = next;
            next += 1;
            splitters.push(Splitter {
                carrier: c,
                ancilla: a,
                matrix: stage,
            });
            grown.push(c);
            grown.push(a);
        }
        live = grown;
    }
    Layout {
        rails: n,
        splitters,
        detector_rails: live,
        detector_phases: (0..n).map(|j| device.path_phase(j)).collect(),
    }
}

/// Detector fields as linear combinations of input modes: row `j` is
/// detector `j`; column `0` is the signal, `1` the LO, the rest vacuum.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    depth: u32,
    matrix: DMatrix<C64>,
}

impl TransferMatrix {
    pub fn from_raw(depth: u32, matrix: DMatrix<C64>) -> Result<Self> {
        let n = 1usize << depth;
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(BhcError::InvalidSpec(format!(
                "transfer matrix for depth {depth} must be {n}x{n}"
            )));
        }
        Ok(TransferMatrix { depth, matrix })
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn detector_count(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn signal_coefficient(&self, detector: usize) -> C64 {
        self.matrix[(detector, 0)]
    }

    pub fn lo_coefficient(&self, detector: usize) -> C64 {
        self.matrix[(detector, 1)]
    }

    /// `max |U†U - I|`.
    pub fn unitarity_defect(&self) -> f64 {
        let g = self.matrix.adjoint() * &self.matrix;
        let n = g.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - C64::new(target, 0.0)).norm());
            }
        }
        worst
    }
}

pub fn build_transfer(device: &DeviceSpec) -> Result<TransferMatrix> {
    device.validate()?;
    let lay = layout(device);
    let n = lay.rails;
    // rows[r] = current mode operator on rail r in terms of inputs
    let mut rows = DMatrix::<C64>::identity(n, n);
    for s in &lay.splitters {
        let c = rows.row(s.carrier).clone_owned();
        let a = rows.row(s.ancilla).clone_owned();
        let m = s.matrix;
        rows.set_row(s.carrier, &(c.clone() * m[0][0] + a.clone() * m[0][1]));
        rows.set_row(s.ancilla, &(c * m[1][0] + a * m[1][1]));
    }
    let matrix = DMatrix::from_fn(n, n, |j, col| {
        rows[(lay.detector_rails[j], col)] * C64::from_polar(1.0, lay.detector_phases[j])
    });
    Ok(TransferMatrix {
        depth: device.depth,
        matrix,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortReport {
    pub residuals: Vec<f64>,
    pub max_residual: f64,
}

/// Checks that every detector sees `e^{iΦ}(a ± i a_LO)/√(2^d)` plus vacuum,
/// with `+` on the first half of the detectors and the phase accumulated
/// from branch phases along the detector's path and its path phase.
pub fn verify_port_structure(t: &TransferMatrix, device: &DeviceSpec) -> Result<PortReport> {
    if t.depth() != device.depth {
        return Err(BhcError::StructureViolation {
            row: 0,
            reason: format!(
                "matrix depth {} but device depth {}",
                t.depth(),
                device.depth
            ),
        });
    }
    let d = device.depth;
    let magnitude = 2f64.powf(-(d as f64) / 2.0);
    let half = device.capacity();
    let mut residuals = Vec::with_capacity(t.detector_count());
    for j in 0..t.detector_count() {
        let mut phase = device.path_phase(j);
        for level in (0..d).rev() {
            phase += if (j >> level) & 1 == 0 {
                device.phi_plus()
            } else {
                device.phi_minus()
            };
        }
        let expect_signal = C64::from_polar(magnitude, phase);
        let sign = if j < half { 1.0 } else { -1.0 };
        let expect_lo = expect_signal * C64::new(0.0, sign);
        let s = t.signal_coefficient(j);
        let lo = t.lo_coefficient(j);
        let r = (s.norm() - magnitude)
            .abs()
            .max((s - expect_signal).norm())
            .max((lo - expect_lo).norm());
        if r > STRUCTURE_TOL {
            return Err(BhcError::StructureViolation {
                row: j,
                reason: format!(
                    "signal {s:.6}, LO {lo:.6}; expected {expect_signal:.6}, {expect_lo:.6}"
                ),
            });
        }
        residuals.push(r);
    }
    let max_residual = residuals.iter().cloned().fold(0.0, f64::max);
    Ok(PortReport {
        residuals,
        max_residual,
    })
}

/// Smallest depth `d` with `n + m ≤ 2^{d-1}`, i.e. `⌈log₂(n+m)⌉ + 1`.
pub fn min_depth(n: usize, m: usize) -> Result<u32> {
    let total = n + m;
    if total == 0 {
        return Err(BhcError::EmptyOrder);
    }
    Ok(total.next_power_of_two().trailing_zeros() + 1)
}

/// A space-time point. Two points are equal when both tags agree; the label
/// is only used for naming and ordering.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceTimePoint {
    pub label: String,
    pub position: String,
    pub time: String,
}

impl SpaceTimePoint {
    pub fn new(label: &str, position: &str, time: &str) -> Self {
        SpaceTimePoint {
            label: label.into(),
            position: position.into(),
            time: time.into(),
        }
    }
}

impl PartialEq for SpaceTimePoint {
    fn eq(&self, other: &Self) -> bool {
        self.position == other.position && self.time == other.time
    }
}

impl Eq for SpaceTimePoint {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupedEntry {
    pub point: SpaceTimePoint,
    pub n: usize,
    pub m: usize,
}

/// `⟨∘∘ ∏ᵢ E⁽⁻⁾^{nᵢ}(xᵢ) E⁽⁺⁾^{mᵢ}(xᵢ) ∘∘⟩` over distinct points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupedRequest {
    entries: Vec<GroupedEntry>,
}

impl GroupedRequest {
    pub fn new(entries: Vec<GroupedEntry>) -> Result<Self> {
        for (i, a) in entries.iter().enumerate() {
            if entries[..i].iter().any(|b| b.point == a.point) {
                return Err(BhcError::InvalidSpec(format!(
                    "point '{}' appears twice in a grouped request",
                    a.point.label
                )));
            }
        }
        if !entries.iter().any(|e| e.n + e.m > 0) {
            return Err(BhcError::EmptyOrder);
        }
        Ok(GroupedRequest { entries })
    }

    pub fn entries(&self) -> &[GroupedEntry] {
        &self.entries
    }

    pub fn orders(&self) -> Vec<(usize, usize)> {
        self.entries.iter().map(|e| (e.n, e.m)).collect()
    }
}

/// Groups field operators by point: `daggered[i]` marks `E⁽⁻⁾` (creation).
/// Points are returned sorted by label; merged points keep the smallest one.
pub fn canonicalize_request(
    points: &[SpaceTimePoint],
    daggered: &[bool],
) -> Result<GroupedRequest> {
    if points.is_empty() {
        return Err(BhcError::EmptyOrder);
    }
    if points.len() != daggered.len() {
        return Err(BhcError::InvalidSpec(format!(
            "{} points but {} dagger flags",
            points.len(),
            daggered.len()
        )));
    }
    let mut entries: Vec<GroupedEntry> = Vec::new();
    for (p, &dag) in points.iter().zip(daggered) {
        let slot = match entries.iter().position(|e| &e.point == p) {
            Some(i) => i,
            None => {
                entries.push(GroupedEntry {
                    point: p.clone(),
                    n: 0,
                    m: 0,
                });
                entries.len() - 1
            }
        };
        let e = &mut entries[slot];
        if p.label < e.point.label {
            e.point.label = p.label.clone();
        }
        if dag {
            e.n += 1;
        } else {
            e.m += 1;
        }
    }
    entries.sort_by(|a, b| a.point.label.cmp(&b.point.label));
    GroupedRequest::new(entries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Channel {
    pub point: SpaceTimePoint,
    pub n: usize,
    pub m: usize,
    pub device: DeviceSpec,
}

/// Channels sharing a spatial position, split in front of their devices by a
/// tree of `split_depth` beamsplitter levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialGroup {
    pub position: String,
    pub channels: Vec<usize>,
    pub split_depth: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelScheme {
    pub channels: Vec<Channel>,
    #[serde(default)]
    pub spatial_groups: Vec<SpatialGroup>,
}

impl ChannelScheme {
    /// Scheme of independent devices without point metadata; channel `i`
    /// reads mode `i`.
    pub fn from_devices(devices: Vec<DeviceSpec>) -> Result<Self> {
        let channels = devices
            .into_iter()
            .enumerate()
            .map(|(i, device)| {
                device.validate()?;
                let label = format!("x{i}");
                Ok(Channel {
                    point: SpaceTimePoint::new(&label, &label, "t0"),
                    n: 0,
                    m: 0,
                    device,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let spatial_groups = group_positions(&channels);
        Ok(ChannelScheme {
            channels,
            spatial_groups,
        })
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn devices(&self) -> impl Iterator<Item = &DeviceSpec> {
        self.channels.iter().map(|c| &c.device)
    }

    /// Index of the first detector of each channel in the concatenated
    /// detector list.
    pub fn detector_offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.channels
            .iter()
            .map(|c| {
                let o = acc;
                acc += c.device.detector_count();
                o
            })
            .collect()
    }

    pub fn total_detectors(&self) -> usize {
        self.devices().map(DeviceSpec::detector_count).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() {
            return Err(BhcError::InvalidSpec("scheme has no channels".into()));
        }
        for (i, c) in self.channels.iter().enumerate() {
            c.device.validate()?;
            if c.n + c.m > c.device.capacity() {
                return Err(BhcError::CapacityExceeded {
                    channel: i,
                    needed: c.n + c.m,
                    depth: c.device.depth,
                    capacity: c.device.capacity(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DepthPolicy {
    Minimal,
    /// The same depth for every channel.
    Override(u32),
    PerChannel(Vec<u32>),
}

/// One channel per requested point. `template` supplies the LO amplitude,
/// efficiency and phases; its depth is replaced per channel.
pub fn assemble_scheme(
    req: &GroupedRequest,
    template: &DeviceSpec,
    policy: &DepthPolicy,
) -> Result<ChannelScheme> {
    let mut channels = Vec::with_capacity(req.entries().len());
    for (i, e) in req.entries().iter().enumerate() {
        let depth = match policy {
            DepthPolicy::Minimal => {
                if e.n + e.m == 0 {
                    1
                } else {
                    min_depth(e.n, e.m)?
                }
            }
            DepthPolicy::Override(d) => *d,
            DepthPolicy::PerChannel(ds) => *ds.get(i).ok_or_else(|| {
                BhcError::ChannelMismatch(format!(
                    "{} depths for {} channels",
                    ds.len(),
                    req.entries().len()
                ))
            })?,
        };
        let mut device = template.clone();
        device.depth = depth;
        if device.path_phases.len() != device.detector_count() {
            device.path_phases.clear();
        }
        device.validate()?;
        if e.n + e.m > device.capacity() {
            return Err(BhcError::CapacityExceeded {
                channel: i,
                needed: e.n + e.m,
                depth,
                capacity: device.capacity(),
            });
        }
        channels.push(Channel {
            point: e.point.clone(),
            n: e.n,
            m: e.m,
            device,
        });
    }
    let spatial_groups = group_positions(&channels);
    Ok(ChannelScheme {
        channels,
        spatial_groups,
    })
}

fn group_positions(channels: &[Channel]) -> Vec<SpatialGroup> {
    let mut by_pos: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, c) in channels.iter().enumerate() {
        by_pos.entry(c.point.position.as_str()).or_default().push(i);
    }
    by_pos
        .into_iter()
        .map(|(pos, chans)| SpatialGroup {
            position: pos.to_string(),
            split_depth: chans.len().next_power_of_two().trailing_zeros(),
            channels: chans,
        })
        .collect()
}
