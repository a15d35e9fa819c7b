//! Monte Carlo photocount records of the measurement and the estimators
//! built on them.
//!
//! Two backends produce [`CountRecords`]:
//!
//! * [`sample_exact`] propagates signal ⊗ coherent LO ⊗ vacuum through the
//!   device in the Fock basis and samples joint photon numbers, then thins
//!   each detector binomially with probability `η`. Single mode, `d ≤ 2`.
//! * [`sample_classical`] draws coherent amplitudes from a nonnegative P
//!   function, propagates them as c-numbers and draws Poisson counts with
//!   mean `η|field|²`. Any depth, classical states only.
//!
//! Shot `s` at setting `j` always uses the ChaCha8 stream `(j << 32) | s` of
//! the run seed, so records do not depend on thread scheduling.

mod classical;
mod estimate;
mod exact;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use classical::sample_classical;
pub use estimate::{
    batch_estimate, estimate_g2, estimate_gamma, estimate_product, run_pipeline_sampled,
    selection_detectors, snr_scan, Backend, SampledRun, SnrReport, SnrRow, Trend,
};
pub use exact::{lo_cutoff_for, sample_exact, sample_exact_with, ExactOptions};

use crate::error::{BhcError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Shots per phase setting.
    pub shots: usize,
    pub seed: u64,
    #[serde(default = "default_batches")]
    pub batches: usize,
}

fn default_batches() -> usize {
    10
}

impl ExperimentSpec {
    pub fn new(shots: usize, seed: u64) -> Self {
        ExperimentSpec {
            shots,
            seed,
            batches: default_batches(),
        }
    }

    pub fn with_batches(mut self, batches: usize) -> Self {
        self.batches = batches;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.batches < 2 {
            return Err(BhcError::InvalidSpec(format!(
                "need at least 2 batches, got {}",
                self.batches
            )));
        }
        if self.shots < self.batches {
            return Err(BhcError::InvalidSpec(format!(
                "{} shots cannot fill {} batches",
                self.shots, self.batches
            )));
        }
        Ok(())
    }
}

/// Counts of every detector of the scheme in one shot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRecord {
    pub setting: usize,
    pub shot: usize,
    pub counts: Vec<u64>,
}

/// Records ordered by setting, then shot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRecords {
    pub detectors: usize,
    /// Quadrature phases of each setting, one per channel.
    pub settings: Vec<Vec<f64>>,
    pub shots: usize,
    pub records: Vec<CountRecord>,
}

impl CountRecords {
    pub fn for_setting(&self, setting: usize) -> &[CountRecord] {
        let start = setting * self.shots;
        &self.records[start..start + self.shots]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub shots: usize,
}

pub(crate) fn shot_rng(seed: u64, setting: usize, shot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((setting as u64) << 32) | shot as u64);
    rng
}
