//! Text forms of moment tables and count records.
//!
//! Tabular files are tab separated with a header row; every float is written
//! as `{:.16e}` so that a value survives a round trip bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{BhcError, Result};
use crate::fock::MomentOrder;
use crate::network::ChannelScheme;
use crate::reconstruct::{MomentEntry, MomentTable, Provenance};
use crate::sampler::CountRecords;

pub const TABLE_SCHEMA: u32 = 1;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableDoc {
    schema: u32,
    modes: usize,
    entries: Vec<EntryDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryDoc {
    order: MomentOrder,
    value_re: String,
    value_im: String,
    stderr: Option<String>,
    provenance: Provenance,
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| BhcError::Parse(format!("not a number: '{s}'")))
}

pub fn table_to_json(table: &MomentTable) -> String {
    let doc = TableDoc {
        schema: TABLE_SCHEMA,
        modes: table.mode_count(),
        entries: table
            .entries
            .iter()
            .map(|(o, e)| EntryDoc {
                order: o.clone(),
                value_re: fmt_f64(e.value.re),
                value_im: fmt_f64(e.value.im),
                stderr: e.stderr.map(fmt_f64),
                provenance: e.provenance,
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("table serialization cannot fail");
    s.push('\n');
    s
}

pub fn table_from_json(text: &str) -> Result<MomentTable> {
    let doc: TableDoc = serde_json::from_str(text)?;
    if doc.schema != TABLE_SCHEMA {
        return Err(BhcError::Parse(format!(
            "unsupported table schema {} (expected {TABLE_SCHEMA})",
            doc.schema
        )));
    }
    let mut table = MomentTable::default();
    for e in doc.entries {
        if e.order.mode_count() != doc.modes {
            return Err(BhcError::Parse(format!(
                "entry with {} modes in a {}-mode table",
                e.order.mode_count(),
                doc.modes
            )));
        }
        let value = C64::new(parse_f64(&e.value_re)?, parse_f64(&e.value_im)?);
        let stderr = e.stderr.as_deref().map(parse_f64).transpose()?;
        table.insert(
            e.order,
            MomentEntry {
                value,
                stderr,
                provenance: e.provenance,
            },
        );
    }
    Ok(table)
}

/// Columns `n_1 m_1 … n_N m_N value_re value_im stderr provenance`; a missing
/// stderr is written as `NA`.
pub fn table_to_tsv(table: &MomentTable) -> String {
    let modes = table.mode_count();
    let mut out = String::new();
    for i in 1..=modes {
        let _ = write!(out, "n_{i}\tm_{i}\t");
    }
    out.push_str("value_re\tvalue_im\tstderr\tprovenance\n");
    for (o, e) in &table.entries {
        for (n, m) in o.pairs() {
            let _ = write!(out, "{n}\t{m}\t");
        }
        let se = e.stderr.map_or_else(|| "NA".to_string(), fmt_f64);
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            fmt_f64(e.value.re),
            fmt_f64(e.value.im),
            se,
            e.provenance.as_str()
        );
    }
    out
}

pub fn table_from_tsv(text: &str) -> Result<MomentTable> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| BhcError::Parse("empty moment table".into()))?;
    let cols: Vec<&str> = header.split('\t').collect();
    if cols.len() < 6 || !(cols.len() - 4).is_multiple_of(2) {
        return Err(BhcError::Parse(format!("bad moment table header '{header}'")));
    }
    let modes = (cols.len() - 4) / 2;
    let mut table = MomentTable::default();
    for (lineno, line) in lines.enumerate() {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != cols.len() {
            return Err(BhcError::Parse(format!(
                "row {}: {} fields, expected {}",
                lineno + 1,
                f.len(),
                cols.len()
            )));
        }
        let int = |s: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| BhcError::Parse(format!("row {}: bad order '{s}'", lineno + 1)))
        };
        let pairs = (0..modes)
            .map(|i| Ok((int(f[2 * i])?, int(f[2 * i + 1])?)))
            .collect::<Result<Vec<_>>>()?;
        let b = 2 * modes;
        let stderr = if f[b + 2] == "NA" {
            None
        } else {
            Some(parse_f64(f[b + 2])?)
        };
        let provenance = match f[b + 3] {
            "analytic" => Provenance::Analytic,
            "sampled" => Provenance::Sampled,
            other => return Err(BhcError::Parse(format!("unknown provenance '{other}'"))),
        };
        table.insert(
            MomentOrder::new(pairs)?,
            MomentEntry {
                value: C64::new(parse_f64(f[b])?, parse_f64(f[b + 1])?),
                stderr,
                provenance,
            },
        );
    }
    Ok(table)
}

/// Column names `ch{i}_d{j}` for the detectors of a scheme.
pub fn detector_labels(scheme: &ChannelScheme) -> Vec<String> {
    scheme
        .devices()
        .enumerate()
        .flat_map(|(i, d)| (0..d.detector_count()).map(move |j| format!("ch{i}_d{j}")))
        .collect()
}

pub fn counts_to_tsv(records: &CountRecords, labels: &[String]) -> Result<String> {
    if labels.len() != records.detectors {
        return Err(BhcError::ChannelMismatch(format!(
            "{} labels for {} detectors",
            labels.len(),
            records.detectors
        )));
    }
    let mut out = String::from("setting_index\tshot_index");
    for l in labels {
        out.push('\t');
        out.push_str(l);
    }
    out.push('\n');
    for r in &records.records {
        let _ = write!(out, "{}\t{}", r.setting, r.shot);
        for c in &r.counts {
            let _ = write!(out, "\t{c}");
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| BhcError::Io(format!("{}: {e}", path.display())))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| BhcError::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::CountRecord;

    fn sample_table() -> MomentTable {
        let mut t = MomentTable::default();
        t.insert(
            MomentOrder::new(vec![(1, 0), (0, 1)]).unwrap(),
            MomentEntry {
                value: C64::new(0.1 + 0.2, -1.0 / 3.0),
                stderr: Some(1e-17),
                provenance: Provenance::Sampled,
            },
        );
        t.insert(
            MomentOrder::new(vec![(0, 1), (1, 0)]).unwrap(),
            MomentEntry {
                value: C64::new(std::f64::consts::PI, 0.0),
                stderr: None,
                provenance: Provenance::Analytic,
            },
        );
        t
    }

    #[test]
    fn json_round_trip_is_exact() {
        let t = sample_table();
        assert_eq!(table_from_json(&table_to_json(&t)).unwrap(), t);
    }

    #[test]
    fn tsv_round_trip_is_exact() {
        let t = sample_table();
        let s = table_to_tsv(&t);
        assert!(s.starts_with("n_1\tm_1\tn_2\tm_2\tvalue_re"));
        assert_eq!(table_from_tsv(&s).unwrap(), t);
    }

    #[test]
    fn empty_tsv_is_an_error() {
        assert!(matches!(table_from_tsv(""), Err(BhcError::Parse(_))));
    }

    #[test]
    fn counts_layout() {
        let rec = CountRecords {
            detectors: 2,
            settings: vec![vec![0.0]],
            shots: 2,
            records: vec![
                CountRecord {
                    setting: 0,
                    shot: 0,
                    counts: vec![1, 0],
                },
                CountRecord {
                    setting: 0,
                    shot: 1,
                    counts: vec![3, 2],
                },
            ],
        };
        let s = counts_to_tsv(&rec, &["a".into(), "b".into()]).unwrap();
        assert_eq!(s, "setting_index\tshot_index\ta\tb\n0\t0\t1\t0\n0\t1\t3\t2\n");
    }
}
