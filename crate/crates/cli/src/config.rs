//! The JSON run configuration.

use std::path::Path;

use bhc_core::fock::RawSpec;
use bhc_core::network::{assemble_scheme, canonicalize_request, DepthPolicy, SpaceTimePoint};
use bhc_core::sampler::{Backend, ExactOptions, ExperimentSpec};
use bhc_core::{BhcError, ChannelScheme, DeviceSpec, StateSpec};
use serde::Deserialize;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Analytic,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    #[default]
    Auto,
    Exact,
    Classical,
}

/// All moments with `nᵢ + mᵢ = kᵢ` on channel `i`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrdersRequest {
    pub k: Vec<usize>,
}

/// Field operators at space-time points, `daggered[i]` marking `E⁽⁻⁾`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointsRequest {
    pub points: Vec<SpaceTimePoint>,
    pub daggered: Vec<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Request {
    Orders(OrdersRequest),
    Points(PointsRequest),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSection {
    /// Points of the `F(φ)` series over `[0, 2π)`.
    #[serde(default = "default_report_points")]
    pub phase_points: usize,
    /// LO amplitudes for a stderr-versus-`E` scan (sampled runs only).
    #[serde(default)]
    pub lo_amplitudes: Vec<f64>,
}

fn default_report_points() -> usize {
    64
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub schema_version: u32,
    pub state: RawSpec,
    pub cutoffs: Vec<usize>,
    /// Template device; its depth is used for every channel of an `Orders`
    /// request and replaced by the minimal depth for a `Points` request.
    pub device: DeviceSpec,
    /// Explicit per-channel devices, overriding `device`.
    #[serde(default)]
    pub channels: Option<Vec<DeviceSpec>>,
    pub request: Request,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default)]
    pub experiment: Option<ExperimentSpec>,
    #[serde(default)]
    pub backend: BackendChoice,
    /// Efficiency assumed when dividing out `η`; defaults to the device
    /// value.
    #[serde(default)]
    pub inversion_eta: Option<f64>,
    #[serde(default)]
    pub report: Option<ReportSection>,
}

fn default_mode() -> Mode {
    Mode::Analytic
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub state: StateSpec,
    pub cutoffs: Vec<usize>,
    /// Scheme the data is generated with.
    pub scheme: ChannelScheme,
    /// Same scheme with the efficiency assumed at inversion.
    pub inversion: ChannelScheme,
    pub ks: Vec<usize>,
    pub mode: Mode,
    pub experiment: Option<ExperimentSpec>,
    pub backend: BackendChoice,
    pub report: ReportSection,
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let raw: RawConfig = serde_json::from_str(text).map_err(config_err)?;
        Self::from_raw(raw)
    }

    pub fn from_raw(raw: RawConfig) -> Result<Self, CliError> {
        if raw.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                raw.schema_version
            )));
        }
        let state = raw.state.into_spec().map_err(config_err)?;
        state.validate().map_err(config_err)?;
        if raw.cutoffs.len() != state.mode_count() {
            return Err(CliError::Config(format!(
                "{} cutoffs for a {}-mode state",
                raw.cutoffs.len(),
                state.mode_count()
            )));
        }
        raw.device.validate().map_err(config_err)?;
        let (scheme, ks) = match &raw.request {
            Request::Orders(OrdersRequest { k }) => {
                let devices = match &raw.channels {
                    Some(ds) => ds.clone(),
                    None => vec![raw.device.clone(); k.len()],
                };
                if devices.len() != k.len() {
                    return Err(CliError::Config(format!(
                        "{} channels for {} orders",
                        devices.len(),
                        k.len()
                    )));
                }
                if k.iter().all(|&x| x == 0) {
                    return Err(config_err(BhcError::EmptyOrder));
                }
                let scheme = ChannelScheme::from_devices(devices).map_err(config_err)?;
                for (i, (d, &kk)) in scheme.devices().zip(k).enumerate() {
                    if kk > d.capacity() {
                        return Err(config_err(BhcError::CapacityExceeded {
                            channel: i,
                            needed: kk,
                            depth: d.depth,
                            capacity: d.capacity(),
                        }));
                    }
                }
                (scheme, k.clone())
            }
            Request::Points(PointsRequest { points, daggered }) => {
                if raw.channels.is_some() {
                    return Err(CliError::Config(
                        "a points request derives its channels; drop 'channels'".into(),
                    ));
                }
                let req = canonicalize_request(points, daggered).map_err(config_err)?;
                let scheme = assemble_scheme(&req, &raw.device, &DepthPolicy::Minimal)
                    .map_err(config_err)?;
                let ks = req.orders().iter().map(|(n, m)| n + m).collect();
                (scheme, ks)
            }
        };
        if scheme.len() != state.mode_count() {
            return Err(CliError::Config(format!(
                "request has {} channels but the state has {} modes",
                scheme.len(),
                state.mode_count()
            )));
        }
        let mut inversion = scheme.clone();
        if let Some(eta) = raw.inversion_eta {
            for c in &mut inversion.channels {
                c.device.eta = eta;
                c.device.validate().map_err(config_err)?;
            }
        }
        let mode = raw.mode;
        if let Some(e) = &raw.experiment {
            e.validate().map_err(config_err)?;
        }
        let report = raw.report.unwrap_or(ReportSection {
            phase_points: default_report_points(),
            lo_amplitudes: Vec::new(),
        });
        if report.phase_points == 0 {
            return Err(CliError::Config("report.phase_points must be positive".into()));
        }
        Ok(RunConfig {
            state,
            cutoffs: raw.cutoffs,
            scheme,
            inversion,
            ks,
            mode,
            experiment: raw.experiment,
            backend: raw.backend,
            report,
        })
    }

    /// Applies the command-line overrides and checks that sampled runs have
    /// an experiment.
    pub fn with_overrides(mut self, seed: Option<u64>, mode: Option<Mode>) -> Result<Self, CliError> {
        if let Some(m) = mode {
            self.mode = m;
        }
        if let Some(s) = seed {
            if let Some(e) = &mut self.experiment {
                e.seed = s;
            }
        }
        if self.mode == Mode::Sampled && self.experiment.is_none() {
            return Err(CliError::Config(
                "sampled mode needs an 'experiment' section".into(),
            ));
        }
        Ok(self)
    }

    pub fn sampler_backend(&self) -> Backend {
        match self.backend {
            BackendChoice::Auto => Backend::auto(&self.state),
            BackendChoice::Exact => Backend::Exact(ExactOptions::default()),
            BackendChoice::Classical => Backend::Classical,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "schema_version": 1,
        "state": {"kind": "coherent", "amplitude_re": 0.5},
        "cutoffs": [16],
        "device": {"depth": 2, "lo_amplitude": 1.0, "eta": 1.0},
        "request": {"k": [2]}
    }"#;

    #[test]
    fn parses_minimal_config() {
        let c = RunConfig::parse(BASE).unwrap();
        assert_eq!(c.ks, vec![2]);
        assert_eq!(c.mode, Mode::Analytic);
    }

    #[test]
    fn rejects_unknown_keys_and_versions() {
        let bad = BASE.replace("\"cutoffs\"", "\"colour\": 1, \"cutoffs\"");
        assert!(matches!(RunConfig::parse(&bad), Err(CliError::Config(_))));
        let bad = BASE.replace("\"schema_version\": 1", "\"schema_version\": 7");
        assert!(matches!(RunConfig::parse(&bad), Err(CliError::Config(_))));
    }

    #[test]
    fn capacity_is_checked() {
        let bad = BASE.replace("[2]}", "[3]}");
        assert!(matches!(RunConfig::parse(&bad), Err(CliError::Config(_))));
    }

    #[test]
    fn points_request_builds_minimal_depths() {
        let text = r#"{
            "schema_version": 1,
            "state": {"kind": "two_mode_squeezed_vacuum", "r": 0.5},
            "cutoffs": [20, 20],
            "device": {"depth": 1, "lo_amplitude": 1.0, "eta": 1.0},
            "request": {
                "points": [
                    {"label": "x1", "position": "a", "time": "t"},
                    {"label": "x2", "position": "b", "time": "t"}
                ],
                "daggered": [false, false]
            }
        }"#;
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.ks, vec![1, 1]);
        assert!(c.scheme.devices().all(|d| d.depth == 1));
    }

    #[test]
    fn sampled_needs_experiment() {
        let c = RunConfig::parse(BASE).unwrap();
        assert!(c.with_overrides(None, Some(Mode::Sampled)).is_err());
    }
}
