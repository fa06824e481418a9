//! JSON, CSV and DOT output for equilibrium searches.
//!
//! Output depends only on the reports, never on timing or thread count, so
//! identical runs write byte-identical files. Rationals are written `p/q`.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::enumeration::{EquilibriumEntry, EquilibriumReport};
use crate::metrics::{quality_summary, QualityReport};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Formats {
    pub json: bool,
    pub csv: bool,
    pub dot: bool,
}

impl Default for Formats {
    fn default() -> Self {
        Self { json: true, csv: true, dot: true }
    }
}

impl FromStr for Formats {
    type Err = Error;

    /// Comma-separated subset of `json`, `csv`, `dot`.
    fn from_str(s: &str) -> Result<Self> {
        let mut f = Self { json: false, csv: false, dot: false };
        let mut pos = 0;
        for part in s.split(',') {
            match part.trim() {
                "json" => f.json = true,
                "csv" => f.csv = true,
                "dot" => f.dot = true,
                other => return Err(Error::Parse { position: pos, message: format!("unknown format {other:?}") }),
            }
            pos += part.len() + 1;
        }
        Ok(f)
    }
}

#[derive(Serialize)]
struct RunDocument<'a> {
    reports: &'a [EquilibriumReport],
    quality: Vec<QualityReport>,
}

pub fn report_json(reports: &[EquilibriumReport]) -> String {
    let doc = RunDocument { reports, quality: reports.iter().map(quality_summary).collect() };
    let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
    text.push('\n');
    text
}

const CSV_HEADER: [&str; 11] = [
    "n",
    "trees_scanned",
    "count",
    "social_costs",
    "best_sc",
    "worst_sc",
    "pos_ratio",
    "poa_ratio",
    "max_agent_cost",
    "fr_values",
    "fr_opt",
];

/// One row per report; metric cells stay empty when no equilibrium exists.
pub fn quality_csv(reports: &[EquilibriumReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    let opt = |v: Option<String>| v.unwrap_or_default();
    let join = |items: Vec<String>| items.join(";");
    for r in reports {
        let q = quality_summary(r);
        w.write_record([
            r.n.to_string(),
            r.trees_scanned.to_string(),
            r.count().to_string(),
            join(r.social_costs.iter().map(u128::to_string).collect()),
            opt(q.best_sc.map(|v| v.to_string())),
            opt(q.worst_sc.map(|v| v.to_string())),
            opt(q.pos_ratio.map(|v| v.to_string())),
            opt(q.poa_ratio.map(|v| v.to_string())),
            opt(q.max_agent_cost.map(|v| v.to_string())),
            join(r.fr_values.iter().map(|v| v.to_string()).collect()),
            q.fr_opt.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ASCII output")
}

pub fn entry_stem(n: usize, index: usize) -> String {
    format!("n{n:03}_eq{index}")
}

pub fn equilibrium_dot(n: usize, index: usize, entry: &EquilibriumEntry) -> String {
    entry.profile.to_dot(&format!("{} sc={}", entry_stem(n, index), entry.social_cost))
}

fn write(path: PathBuf, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.display().to_string(), message: e.to_string() })?;
    }
    fs::write(&path, text).map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })?;
    written.push(path);
    Ok(())
}

/// Writes `report.json`, `report.csv`, and per equilibrium a DOT drawing
/// plus the profile JSON that `verify` reads back. Returns the paths written.
pub fn emit_report(reports: &[EquilibriumReport], dir: &Path, formats: &Formats) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if formats.json {
        write(dir.join("report.json"), &report_json(reports), &mut written)?;
    }
    if formats.csv {
        write(dir.join("report.csv"), &quality_csv(reports), &mut written)?;
    }
    for r in reports {
        for (k, e) in r.equilibria.iter().enumerate() {
            let stem = entry_stem(r.n, k);
            if formats.dot {
                write(dir.join("dot").join(format!("{stem}.dot")), &equilibrium_dot(r.n, k, e), &mut written)?;
            }
            if formats.json {
                write(dir.join("profiles").join(format!("{stem}.json")), &format!("{}\n", e.profile.to_json()), &mut written)?;
            }
        }
    }
    Ok(written)
}
