//! Subcommands. Each one loads the configuration, runs the pipeline and
//! writes its files into `--out`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use bhc_core::io::{
    counts_to_tsv, detector_labels, fmt_f64, read_text, table_from_json, table_from_tsv,
    table_to_json, table_to_tsv, write_text,
};
use bhc_core::pipeline::{oracle_table, synthesize_f, FSource};
use bhc_core::reconstruct::{design_tensor_grid, f_from_table, invert_multi, invert_multi_sampled};
use bhc_core::sampler::{run_pipeline_sampled, snr_scan, CountRecords};
use bhc_core::{build_state, MomentOrder, MomentTable, C64};
use clap::{Args, Subcommand};

use crate::config::{Mode, RunConfig};
use crate::{stage, CliError};

/// Relative error gate for analytic comparisons.
pub const ANALYTIC_TOLERANCE: f64 = 1e-8;
/// Allowed deviation of a sampled moment, in standard errors.
pub const SAMPLED_SIGMAS: f64 = 5.0;
/// Below this magnitude an oracle value is compared absolutely.
const ORACLE_FLOOR: f64 = 1e-12;

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Overrides the experiment seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the configured mode.
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Moment table (`.json` or `.tsv`) to turn into an `F(φ)` series.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Recover the requested moments and write moments.json / moments.tsv.
    Reconstruct(RunArgs),
    /// Reconstruct, check against the oracle and write report.tsv.
    Compare(RunArgs),
    /// Plot data: F(φ) from a moment table and an optional stderr scan.
    Report(ReportArgs),
    /// Sampled reconstruction that also writes the raw counts.
    Sample(RunArgs),
}

fn load(args: &RunArgs, mode: Option<Mode>) -> Result<RunConfig, CliError> {
    let cfg = RunConfig::load(&args.config)?.with_overrides(args.seed, mode.or(args.mode))?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.out.display())))?;
    Ok(cfg)
}

struct Outcome {
    table: MomentTable,
    records: Option<CountRecords>,
}

fn execute(cfg: &RunConfig) -> Result<Outcome, CliError> {
    match cfg.mode {
        Mode::Analytic => {
            let st = build_state(&cfg.state, &cfg.cutoffs).map_err(stage("build_state"))?;
            let grid = design_tensor_grid(&cfg.ks);
            let samples = synthesize_f(&st, &cfg.scheme, &grid, FSource::Correlations)
                .map_err(stage("correlate"))?;
            let table = invert_multi(&samples, &grid, &cfg.inversion).map_err(stage("invert"))?;
            Ok(Outcome {
                table,
                records: None,
            })
        }
        Mode::Sampled => {
            let spec = cfg.experiment.as_ref().expect("checked by with_overrides");
            let run = run_pipeline_sampled(
                &cfg.state,
                &cfg.cutoffs,
                &cfg.scheme,
                &cfg.ks,
                spec,
                &cfg.sampler_backend(),
            )
            .map_err(stage("sample"))?;
            let table = if cfg.inversion == cfg.scheme {
                run.table
            } else {
                let means: Vec<C64> = run.f.iter().map(|e| C64::new(e.mean, 0.0)).collect();
                let se: Vec<f64> = run.f.iter().map(|e| e.stderr).collect();
                invert_multi_sampled(&means, &se, &run.grid, &cfg.inversion)
                    .map_err(stage("invert"))?
            };
            Ok(Outcome {
                table,
                records: Some(run.records),
            })
        }
    }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    write_text(&dir.join(name), text).map_err(stage("write"))
}

fn write_tables(dir: &Path, table: &MomentTable) -> Result<(), CliError> {
    write(dir, "moments.json", &table_to_json(table))?;
    write(dir, "moments.tsv", &table_to_tsv(table))
}

fn order_label(o: &MomentOrder) -> String {
    o.pairs()
        .iter()
        .map(|(n, m)| format!("{n},{m}"))
        .collect::<Vec<_>>()
        .join(";")
}

fn summarize(table: &MomentTable) {
    for (o, e) in &table.entries {
        match e.stderr {
            Some(s) => println!(
                "({})  {:+.6e} {:+.6e}i  ± {:.3e}",
                order_label(o),
                e.value.re,
                e.value.im,
                s
            ),
            None => println!("({})  {:+.6e} {:+.6e}i", order_label(o), e.value.re, e.value.im),
        }
    }
}

pub fn reconstruct(args: &RunArgs) -> Result<(), CliError> {
    let cfg = load(args, None)?;
    let out = execute(&cfg)?;
    write_tables(&args.out, &out.table)?;
    if !args.quiet {
        summarize(&out.table);
    }
    Ok(())
}

pub fn sample(args: &RunArgs) -> Result<(), CliError> {
    let cfg = load(args, Some(Mode::Sampled))?;
    let out = execute(&cfg)?;
    let records = out.records.as_ref().expect("sampled mode keeps records");
    let counts = counts_to_tsv(records, &detector_labels(&cfg.scheme)).map_err(stage("write"))?;
    write(&args.out, "counts.tsv", &counts)?;
    write_tables(&args.out, &out.table)?;
    if !args.quiet {
        println!(
            "{} settings × {} shots on {} detectors",
            records.settings.len(),
            records.shots,
            records.detectors
        );
        summarize(&out.table);
    }
    Ok(())
}

/// One row of a comparison against the oracle.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub order: MomentOrder,
    pub recovered: C64,
    pub oracle: C64,
    pub stderr: Option<f64>,
    /// Relative error, or absolute when the oracle is ~0.
    pub error: f64,
    pub pass: bool,
}

pub fn compare_tables(recovered: &MomentTable, oracle: &MomentTable) -> Vec<Comparison> {
    recovered
        .entries
        .iter()
        .filter_map(|(o, e)| {
            let v = oracle.value(o)?;
            let delta = (e.value - v).norm();
            let error = if v.norm() > ORACLE_FLOOR {
                delta / v.norm()
            } else {
                delta
            };
            let pass = match e.stderr {
                Some(s) => delta <= SAMPLED_SIGMAS * s || error < ANALYTIC_TOLERANCE,
                None => error < ANALYTIC_TOLERANCE,
            };
            Some(Comparison {
                order: o.clone(),
                recovered: e.value,
                oracle: v,
                stderr: e.stderr,
                error,
                pass,
            })
        })
        .collect()
}

fn comparison_tsv(rows: &[Comparison], modes: usize) -> String {
    let mut s = String::new();
    for i in 1..=modes {
        let _ = write!(s, "n_{i}\tm_{i}\t");
    }
    s.push_str("recovered_re\trecovered_im\toracle_re\toracle_im\terror\tstderr\tpass\n");
    for r in rows {
        for (n, m) in r.order.pairs() {
            let _ = write!(s, "{n}\t{m}\t");
        }
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            fmt_f64(r.recovered.re),
            fmt_f64(r.recovered.im),
            fmt_f64(r.oracle.re),
            fmt_f64(r.oracle.im),
            fmt_f64(r.error),
            r.stderr.map_or_else(|| "NA".to_string(), fmt_f64),
            r.pass
        );
    }
    s
}

pub fn compare(args: &RunArgs) -> Result<(), CliError> {
    let cfg = load(args, None)?;
    let out = execute(&cfg)?;
    let st = build_state(&cfg.state, &cfg.cutoffs).map_err(stage("oracle"))?;
    let oracle = oracle_table(&st, &cfg.ks).map_err(stage("oracle"))?;
    let rows = compare_tables(&out.table, &oracle);
    write_tables(&args.out, &out.table)?;
    write(&args.out, "report.tsv", &comparison_tsv(&rows, cfg.ks.len()))?;
    if !args.quiet {
        for r in &rows {
            println!(
                "({})  error {:.3e}  {}",
                order_label(&r.order),
                r.error,
                if r.pass { "ok" } else { "FAIL" }
            );
        }
    }
    let failed: Vec<String> = rows
        .iter()
        .filter(|r| !r.pass)
        .map(|r| format!("({}) error {:.3e}", order_label(&r.order), r.error))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Tolerance(format!(
            "{} of {} moments outside tolerance: {}",
            failed.len(),
            rows.len(),
            failed.join(", ")
        )))
    }
}

fn load_table(path: &Path) -> Result<MomentTable, CliError> {
    let text = read_text(path).map_err(|e| CliError::Config(e.to_string()))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        table_from_json(&text)
    } else {
        table_from_tsv(&text)
    };
    let table = parsed.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if table.is_empty() {
        return Err(CliError::Config(format!("{}: no moments", path.display())));
    }
    Ok(table)
}

/// Long-format plot data: `series x value_re value_im stderr`.
pub fn report(args: &ReportArgs) -> Result<(), CliError> {
    let run = &args.run;
    let cfg = load(run, None)?;
    let table = args.input.as_deref().map(load_table).transpose()?;
    if table.is_none() && cfg.report.lo_amplitudes.is_empty() {
        return Err(CliError::Config(
            "nothing to report: pass --input or set report.lo_amplitudes".into(),
        ));
    }
    let mut s = String::from("series\tx\tvalue_re\tvalue_im\tstderr\n");
    if let Some(t) = &table {
        if t.mode_count() != cfg.scheme.len() {
            return Err(CliError::Config(format!(
                "{}-mode table for {} channels",
                t.mode_count(),
                cfg.scheme.len()
            )));
        }
        let p = cfg.report.phase_points;
        for j in 0..p {
            let phi = 2.0 * PI * j as f64 / p as f64;
            let f = f_from_table(t, &cfg.scheme, &vec![phi; cfg.scheme.len()])
                .map_err(stage("report"))?;
            let _ = writeln!(s, "F\t{}\t{}\t{}\tNA", fmt_f64(phi), fmt_f64(f.re), fmt_f64(f.im));
        }
    }
    if !cfg.report.lo_amplitudes.is_empty() {
        let spec = cfg.experiment.as_ref().ok_or_else(|| {
            CliError::Config("a stderr scan needs an 'experiment' section".into())
        })?;
        let scan = snr_scan(
            &cfg.state,
            &cfg.cutoffs,
            &cfg.scheme,
            &cfg.ks,
            &cfg.report.lo_amplitudes,
            spec,
            &cfg.sampler_backend(),
        )
        .map_err(stage("snr_scan"))?;
        for r in &scan.rows {
            let _ = writeln!(
                s,
                "moment({})\t{}\t{}\t{}\t{}",
                order_label(&r.order),
                fmt_f64(r.lo_amplitude),
                fmt_f64(r.value.re),
                fmt_f64(r.value.im),
                fmt_f64(r.stderr)
            );
        }
        if !run.quiet {
            for (o, t) in &scan.trends {
                println!("({}) stderr vs E: {t:?}", order_label(o));
            }
        }
    }
    write(&run.out, "report.tsv", &s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use bhc_core::reconstruct::{MomentEntry, Provenance};

    fn table(v: C64, stderr: Option<f64>) -> MomentTable {
        let mut t = MomentTable::default();
        t.insert(
            MomentOrder::single(1, 0),
            MomentEntry {
                value: v,
                stderr,
                provenance: Provenance::Analytic,
            },
        );
        t
    }

    #[test]
    fn analytic_gate_is_relative() {
        let oracle = table(C64::new(2.0, 0.0), None);
        let ok = compare_tables(&table(C64::new(2.0 + 1e-9, 0.0), None), &oracle);
        assert!(ok[0].pass);
        let bad = compare_tables(&table(C64::new(2.0 + 1e-7, 0.0), None), &oracle);
        assert!(!bad[0].pass);
    }

    #[test]
    fn zero_oracle_is_absolute() {
        let oracle = table(C64::new(0.0, 0.0), None);
        let r = compare_tables(&table(C64::new(3e-9, 0.0), None), &oracle);
        assert!((r[0].error - 3e-9).abs() < 1e-20);
        assert!(r[0].pass);
    }

    #[test]
    fn sampled_gate_counts_sigmas() {
        let oracle = table(C64::new(1.0, 0.0), None);
        assert!(compare_tables(&table(C64::new(1.04, 0.0), Some(0.01)), &oracle)[0].pass);
        assert!(!compare_tables(&table(C64::new(1.06, 0.0), Some(0.01)), &oracle)[0].pass);
    }
}
