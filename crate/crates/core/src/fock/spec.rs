//! Declarative description of test states and its JSON form.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{BhcError, Result};

/// Largest squeezing parameter accepted by the Fock-basis builder.
pub const MAX_SQUEEZING: f64 = 2.0;

/// Constructor descriptor for a (possibly multimode) bosonic state.
#[derive(Debug, Clone, PartialEq)]
pub enum StateSpec {
    Vacuum,
    Coherent { amplitude: C64 },
    Thermal { nbar: f64 },
    /// Thermal state displaced by `amplitude`; has a Gaussian P function.
    DisplacedThermal { amplitude: C64, nbar: f64 },
    /// `S(ξ)|0⟩` with `ξ = r e^{iθ}`, giving `⟨a²⟩ = -e^{iθ} sinh r cosh r`.
    SqueezedVacuum { r: f64, theta: f64 },
    Fock { n: usize },
    /// `(1/cosh r) Σ (e^{iθ} tanh r)^n |n,n⟩`, giving `⟨a₁a₂⟩ = e^{iθ} sinh r cosh r`.
    TwoModeSqueezed { r: f64, theta: f64 },
    Product(Vec<StateSpec>),
    Mixture(Vec<(f64, StateSpec)>),
}

impl StateSpec {
    pub fn coherent(re: f64, im: f64) -> Self {
        StateSpec::Coherent {
            amplitude: C64::new(re, im),
        }
    }

    pub fn thermal(nbar: f64) -> Self {
        StateSpec::Thermal { nbar }
    }

    pub fn squeezed(r: f64, theta: f64) -> Self {
        StateSpec::SqueezedVacuum { r, theta }
    }

    pub fn fock(n: usize) -> Self {
        StateSpec::Fock { n }
    }

    pub fn mode_count(&self) -> usize {
        match self {
            StateSpec::TwoModeSqueezed { .. } => 2,
            StateSpec::Product(parts) => parts.iter().map(StateSpec::mode_count).sum(),
            StateSpec::Mixture(parts) => parts.first().map_or(0, |(_, s)| s.mode_count()),
            _ => 1,
        }
    }

    /// Checks parameter ranges, mixture weights and mode-count consistency.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(BhcError::InvalidSpec(msg));
        match self {
            StateSpec::Vacuum | StateSpec::Fock { .. } => Ok(()),
            StateSpec::Coherent { amplitude } => {
                if amplitude.re.is_finite() && amplitude.im.is_finite() {
                    Ok(())
                } else {
                    bad("coherent amplitude must be finite".into())
                }
            }
            StateSpec::Thermal { nbar } => check_nbar(*nbar),
            StateSpec::DisplacedThermal { amplitude, nbar } => {
                if !(amplitude.re.is_finite() && amplitude.im.is_finite()) {
                    return bad("displacement must be finite".into());
                }
                check_nbar(*nbar)
            }
            StateSpec::SqueezedVacuum { r, theta } | StateSpec::TwoModeSqueezed { r, theta } => {
                if !(r.is_finite() && *r >= 0.0) {
                    return bad(format!("squeezing r = {r} must be finite and nonnegative"));
                }
                if *r > MAX_SQUEEZING {
                    return bad(format!("squeezing r = {r} exceeds {MAX_SQUEEZING}"));
                }
                if !theta.is_finite() {
                    return bad("theta must be finite".into());
                }
                Ok(())
            }
            StateSpec::Product(parts) => {
                if parts.is_empty() {
                    return bad("product needs at least one factor".into());
                }
                parts.iter().try_for_each(StateSpec::validate)
            }
            StateSpec::Mixture(parts) => {
                if parts.is_empty() {
                    return bad("mixture needs at least one component".into());
                }
                let modes = parts[0].1.mode_count();
                let mut total = 0.0;
                for (w, s) in parts {
                    if !(w.is_finite() && *w >= 0.0) {
                        return bad(format!("mixture weight {w} must be nonnegative"));
                    }
                    if s.mode_count() != modes {
                        return bad("mixture components differ in mode count".into());
                    }
                    s.validate()?;
                    total += w;
                }
                if (total - 1.0).abs() > 1e-12 {
                    return bad(format!("mixture weights sum to {total}, expected 1"));
                }
                Ok(())
            }
        }
    }

    /// True when the state has a nonnegative, samplable P function
    /// (coherent, thermal, displaced thermal and products/mixtures thereof).
    pub fn is_p_representable(&self) -> bool {
        match self {
            StateSpec::Vacuum
            | StateSpec::Coherent { .. }
            | StateSpec::Thermal { .. }
            | StateSpec::DisplacedThermal { .. } => true,
            StateSpec::Product(parts) => parts.iter().all(StateSpec::is_p_representable),
            StateSpec::Mixture(parts) => parts.iter().all(|(_, s)| s.is_p_representable()),
            _ => false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawSpec = serde_json::from_str(text)?;
        let spec = raw.into_spec()?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&RawSpec::from_spec(self, None))
            .expect("state spec serialization cannot fail")
    }
}

fn check_nbar(nbar: f64) -> Result<()> {
    if nbar.is_finite() && nbar >= 0.0 {
        Ok(())
    } else {
        Err(BhcError::InvalidSpec(format!(
            "mean photon number {nbar} must be finite and nonnegative"
        )))
    }
}

/// Flat wire form. Mixture components are carried in `modes`, each with its
/// own `weight`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RawSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude_re: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude_im: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nbar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<RawSpec>>,
}

impl RawSpec {
    fn bare(kind: &str) -> Self {
        RawSpec {
            kind: kind.to_string(),
            amplitude_re: None,
            amplitude_im: None,
            nbar: None,
            r: None,
            theta: None,
            n: None,
            weight: None,
            modes: None,
        }
    }

    pub fn from_spec(spec: &StateSpec, weight: Option<f64>) -> Self {
        let mut raw = match spec {
            StateSpec::Vacuum => RawSpec::bare("vacuum"),
            StateSpec::Coherent { amplitude } => RawSpec {
                amplitude_re: Some(amplitude.re),
                amplitude_im: Some(amplitude.im),
                ..RawSpec::bare("coherent")
            },
            StateSpec::Thermal { nbar } => RawSpec {
                nbar: Some(*nbar),
                ..RawSpec::bare("thermal")
            },
            StateSpec::DisplacedThermal { amplitude, nbar } => RawSpec {
                amplitude_re: Some(amplitude.re),
                amplitude_im: Some(amplitude.im),
                nbar: Some(*nbar),
                ..RawSpec::bare("displaced_thermal")
            },
            StateSpec::SqueezedVacuum { r, theta } => RawSpec {
                r: Some(*r),
                theta: Some(*theta),
                ..RawSpec::bare("squeezed_vacuum")
            },
            StateSpec::Fock { n } => RawSpec {
                n: Some(*n),
                ..RawSpec::bare("fock")
            },
            StateSpec::TwoModeSqueezed { r, theta } => RawSpec {
                r: Some(*r),
                theta: Some(*theta),
                ..RawSpec::bare("two_mode_squeezed_vacuum")
            },
            StateSpec::Product(parts) => RawSpec {
                modes: Some(parts.iter().map(|p| RawSpec::from_spec(p, None)).collect()),
                ..RawSpec::bare("product")
            },
            StateSpec::Mixture(parts) => RawSpec {
                modes: Some(
                    parts
                        .iter()
                        .map(|(w, p)| RawSpec::from_spec(p, Some(*w)))
                        .collect(),
                ),
                ..RawSpec::bare("mixture")
            },
        };
        raw.weight = weight;
        raw
    }

    pub fn into_spec(self) -> Result<StateSpec> {
        let missing = |field: &str, kind: &str| {
            BhcError::InvalidSpec(format!("state kind '{kind}' requires field '{field}'"))
        };
        let kind = self.kind.as_str();
        let amplitude = || {
            C64::new(
                self.amplitude_re.unwrap_or(0.0),
                self.amplitude_im.unwrap_or(0.0),
            )
        };
        let spec = match kind {
            "vacuum" => StateSpec::Vacuum,
            "coherent" => StateSpec::Coherent {
                amplitude: amplitude(),
            },
            "thermal" => StateSpec::Thermal {
                nbar: self.nbar.ok_or_else(|| missing("nbar", kind))?,
            },
            "displaced_thermal" => StateSpec::DisplacedThermal {
                amplitude: amplitude(),
                nbar: self.nbar.ok_or_else(|| missing("nbar", kind))?,
            },
            "squeezed_vacuum" => StateSpec::SqueezedVacuum {
                r: self.r.ok_or_else(|| missing("r", kind))?,
                theta: self.theta.unwrap_or(0.0),
            },
            "fock" => StateSpec::Fock {
                n: self.n.ok_or_else(|| missing("n", kind))?,
            },
            "two_mode_squeezed_vacuum" => StateSpec::TwoModeSqueezed {
                r: self.r.ok_or_else(|| missing("r", kind))?,
                theta: self.theta.unwrap_or(0.0),
            },
            "product" => {
                let parts = self.modes.ok_or_else(|| missing("modes", kind))?;
                StateSpec::Product(
                    parts
                        .into_iter()
                        .map(RawSpec::into_spec)
                        .collect::<Result<_>>()?,
                )
            }
            "mixture" => {
                let parts = self.modes.ok_or_else(|| missing("modes", kind))?;
                let mut out = Vec::with_capacity(parts.len());
                for p in parts {
                    let w = p
                        .weight
                        .ok_or_else(|| missing("weight", "mixture component"))?;
                    out.push((w, p.into_spec()?));
                }
                StateSpec::Mixture(out)
            }
            other => {
                return Err(BhcError::InvalidSpec(format!("unknown state kind '{other}'")));
            }
        };
        Ok(spec)
    }
}

impl Serialize for StateSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawSpec::from_spec(self, None).serialize(s)
    }
}

impl<'de> Deserialize<'de> for StateSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawSpec::deserialize(d)?;
        let spec = raw.into_spec().map_err(serde::de::Error::custom)?;
        spec.validate().map_err(serde::de::Error::custom)?;
        Ok(spec)
    }
}
