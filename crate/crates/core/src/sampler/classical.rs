//! Semiclassical sampling for states with a nonnegative P function.

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

use super::{shot_rng, CountRecord, CountRecords, ExperimentSpec};
use crate::error::{BhcError, Result};
use crate::fock::StateSpec;
use crate::network::{build_transfer, ChannelScheme};

/// Appends one draw of the coherent amplitudes of every mode of `spec`.
fn draw_amplitudes(spec: &StateSpec, rng: &mut ChaCha8Rng, out: &mut Vec<C64>) {
    match spec {
        StateSpec::Vacuum => out.push(C64::new(0.0, 0.0)),
        StateSpec::Coherent { amplitude } => out.push(*amplitude),
        StateSpec::Thermal { nbar } => out.push(gaussian(*nbar, rng)),
        StateSpec::DisplacedThermal { amplitude, nbar } => {
            out.push(amplitude + gaussian(*nbar, rng))
        }
        StateSpec::Product(parts) => {
            for p in parts {
                draw_amplitudes(p, rng, out);
            }
        }
        StateSpec::Mixture(parts) => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut chosen = &parts[parts.len() - 1].1;
            for (w, s) in parts {
                acc += w;
                if u < acc {
                    chosen = s;
                    break;
                }
            }
            draw_amplitudes(chosen, rng, out);
        }
        _ => unreachable!("checked by is_p_representable"),
    }
}

/// Circular complex Gaussian with `E|α|² = nbar`.
fn gaussian(nbar: f64, rng: &mut ChaCha8Rng) -> C64 {
    if nbar == 0.0 {
        return C64::new(0.0, 0.0);
    }
    let s = (nbar / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}

fn poisson(mean: f64, rng: &mut ChaCha8Rng) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng) as u64
}

/// Counts for every setting in `settings` (one quadrature phase per channel).
/// Channel `i` reads mode `i` of `pspec`; detectors are concatenated in
/// channel order.
pub fn sample_classical(
    pspec: &StateSpec,
    scheme: &ChannelScheme,
    spec: &ExperimentSpec,
    settings: &[Vec<f64>],
) -> Result<CountRecords> {
    spec.validate()?;
    pspec.validate()?;
    scheme.validate()?;
    if !pspec.is_p_representable() {
        return Err(BhcError::NotPRepresentable(format!(
            "the classical backend needs a coherent, thermal or displaced thermal state (or mixtures/products), got {}",
            kind_name(pspec)
        )));
    }
    if pspec.mode_count() != scheme.len() {
        return Err(BhcError::ChannelMismatch(format!(
            "state has {} modes but the scheme has {} channels",
            pspec.mode_count(),
            scheme.len()
        )));
    }
    let mut records = Vec::with_capacity(settings.len() * spec.shots);
    for (setting, phases) in settings.iter().enumerate() {
        if phases.len() != scheme.len() {
            return Err(BhcError::ChannelMismatch(format!(
                "setting {setting} has {} phases for {} channels",
                phases.len(),
                scheme.len()
            )));
        }
        // per channel: (signal coefficients, LO contribution, η)
        let mut optics = Vec::with_capacity(scheme.len());
        for (dev, &phi) in scheme.devices().zip(phases) {
            let dev = dev.at_quadrature_phase(phi);
            let t = build_transfer(&dev)?;
            let lo = dev.lo_field();
            let rows: Vec<(C64, C64)> = (0..t.detector_count())
                .map(|j| (t.signal_coefficient(j), t.lo_coefficient(j) * lo))
                .collect();
            optics.push((rows, dev.eta));
        }
        let batch: Vec<CountRecord> = (0..spec.shots)
            .into_par_iter()
            .map(|shot| {
                let mut rng = shot_rng(spec.seed, setting, shot);
                let mut alphas = Vec::with_capacity(scheme.len());
                draw_amplitudes(pspec, &mut rng, &mut alphas);
                let mut counts = Vec::with_capacity(scheme.total_detectors());
                for ((rows, eta), alpha) in optics.iter().zip(&alphas) {
                    for (s, l) in rows {
                        let field = s * alpha + l;
                        counts.push(poisson(eta * field.norm_sqr(), &mut rng));
                    }
                }
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
        detectors: scheme.total_detectors(),
        settings: settings.to_vec(),
        shots: spec.shots,
        records,
    })
}

fn kind_name(spec: &StateSpec) -> &'static str {
    match spec {
        StateSpec::Vacuum => "vacuum",
        StateSpec::Coherent { .. } => "coherent",
        StateSpec::Thermal { .. } => "thermal",
        StateSpec::DisplacedThermal { .. } => "displaced thermal",
        StateSpec::SqueezedVacuum { .. } => "squeezed vacuum",
        StateSpec::Fock { .. } => "Fock",
        StateSpec::TwoModeSqueezed { .. } => "two-mode squeezed vacuum",
        StateSpec::Product(_) => "product with a nonclassical factor",
        StateSpec::Mixture(_) => "mixture with a nonclassical component",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::DeviceSpec;

    fn one(d: u32, e: f64) -> ChannelScheme {
        ChannelScheme::from_devices(vec![DeviceSpec::new(d, e, 1.0).unwrap()]).unwrap()
    }

    #[test]
    fn nonclassical_states_are_rejected() {
        let spec = ExperimentSpec::new(10, 0);
        for s in [
            StateSpec::squeezed(0.3, 0.0),
            StateSpec::fock(1),
            StateSpec::Mixture(vec![(0.5, StateSpec::Vacuum), (0.5, StateSpec::fock(1))]),
        ] {
            let err = sample_classical(&s, &one(1, 1.0), &spec, &[vec![0.0]]);
            assert!(matches!(err, Err(BhcError::NotPRepresentable(_))), "{s:?}");
        }
    }

    #[test]
    fn coherent_port_means() {
        // β = 1 with no LO at d = 1: each port carries |β|²/2
        let spec = ExperimentSpec::new(20_000, 5);
        let rec = sample_classical(&StateSpec::coherent(1.0, 0.0), &one(1, 0.0), &spec, &[vec![0.0]])
            .unwrap();
        for j in 0..2 {
            let mean = rec.records.iter().map(|r| r.counts[j] as f64).sum::<f64>() / 20_000.0;
            assert!((mean - 0.5).abs() < 5.0 * (0.5f64 / 20_000.0).sqrt(), "{mean}");
        }
    }

    #[test]
    fn thermal_amplitude_variance() {
        let mut rng = shot_rng(1, 0, 0);
        let n = 50_000;
        let mean: f64 = (0..n)
            .map(|_| gaussian(2.0, &mut rng).norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((mean - 2.0).abs() < 0.05, "{mean}");
    }
}
