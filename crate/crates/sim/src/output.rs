//! CSV and JSON result files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::config_file::ConfigEcho;
use crate::experiment::RateReport;
use crate::scenario::ScenarioEcho;
use crate::stats::{format_number, to_db, Summary};

pub const SCHEMA_VERSION: u32 = 1;
pub const CSV_HEADER: &str = "drop,cell,user,sinr_db,rate_bpshz,q_mw";
pub const DIAGNOSTICS_HEADER: &str = "drop,cell,user,sinr_limit_db";

/// Per-user results, one row per (drop, cell, user) in that order.
pub fn rates_csv(report: &RateReport) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (d, drop) in report.drops.iter().enumerate() {
        for l in 0..drop.sinr.cells() {
            for k in 0..drop.sinr.users() {
                writeln!(
                    out,
                    "{d},{l},{k},{},{},{}",
                    format_number(to_db(drop.sinr[(k, l)])),
                    format_number(drop.rate[(k, l)]),
                    format_number(drop.q[(k, l)])
                )
                .expect("writing to a String");
            }
        }
    }
    out
}

/// Infinite-antenna single-cell SINR at the same powers, same row order.
pub fn diagnostics_csv(report: &RateReport) -> String {
    let mut out = String::new();
    out.push_str(DIAGNOSTICS_HEADER);
    out.push('\n');
    for (d, drop) in report.drops.iter().enumerate() {
        for l in 0..drop.sinr_limit.cells() {
            for k in 0..drop.sinr_limit.users() {
                writeln!(out, "{d},{l},{k},{}", format_number(to_db(drop.sinr_limit[(k, l)]))).expect("writing to a String");
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonSummary {
    pub schema_version: u32,
    pub version: String,
    pub config: ConfigEcho,
    pub scenario: ScenarioEcho,
    pub seed: u64,
    pub drops: usize,
    #[serde(flatten)]
    pub summary: Summary,
}

impl JsonSummary {
    pub fn new(report: &RateReport) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            version: report.version.clone(),
            config: ConfigEcho::from(&report.scenario.config),
            scenario: ScenarioEcho::from(&report.scenario),
            seed: report.seed(),
            drops: report.drops.len(),
            summary: report.summary,
        }
    }
}

pub fn summary_json(report: &RateReport) -> String {
    let mut s = serde_json::to_string_pretty(&JsonSummary::new(report)).expect("summary serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputPaths {
    pub rates: PathBuf,
    pub diagnostics: PathBuf,
    pub summary: PathBuf,
}

impl OutputPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self { rates: dir.join("rates.csv"), diagnostics: dir.join("diagnostics.csv"), summary: dir.join("summary.json") }
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn emit_results(report: &RateReport, dir: &Path) -> Result<OutputPaths> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let paths = OutputPaths::in_dir(dir);
    write(&paths.rates, &rates_csv(report))?;
    write(&paths.diagnostics, &diagnostics_csv(report))?;
    write(&paths.summary, &summary_json(report))?;
    Ok(paths)
}

/// Reads the rate column back from a rates CSV, in file order.
pub fn parse_rates_csv(text: &str) -> Result<Vec<f64>> {
    let mut lines = text.lines();
    anyhow::ensure!(lines.next() == Some(CSV_HEADER), "missing or wrong CSV header");
    lines
        .enumerate()
        .map(|(i, line)| {
            let field = line.split(',').nth(4).with_context(|| format!("row {}: too few columns", i + 1))?;
            field.parse::<f64>().with_context(|| format!("row {}: bad rate {field:?}", i + 1))
        })
        .collect()
}
