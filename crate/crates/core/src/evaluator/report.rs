use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::Deserialize;
use thiserror::Error;

use super::{EvalReport, RateRow, Tally};
use crate::agents::Mode;
use crate::dataset::ScenarioType;
use crate::interaction::Violation;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// Markdown table.
    Table,
    /// JSON that [`parse_report`] reads back.
    Machine,
}

impl FromStr for ReportFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "md" | "markdown" | "table" => Ok(ReportFormat::Table),
            "machine" | "json" => Ok(ReportFormat::Machine),
            _ => Err(ReportError::Format(s.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("unknown report format `{0}` (expected md or machine)")]
    Format(String),
    #[error("malformed report: {0}")]
    Malformed(#[from] serde_json::Error),
}

pub fn render_report(r: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Machine => {
            let mut text = serde_json::to_string_pretty(r).expect("report serializes");
            text.push('\n');
            text
        }
        ReportFormat::Table => table(r),
    }
}

pub fn parse_report(text: &str) -> Result<EvalReport, ReportError> {
    Ok(serde_json::from_str(text)?)
}

fn table(r: &EvalReport) -> String {
    let rows: Vec<(&str, Tally)> = ScenarioType::ALL
        .iter()
        .map(|s| (s.abbrev(), r.class(*s).tally()))
        .chain([("Total", r.total.tally()), ("SJA", r.sja.tally())])
        .collect();
    let mut out = String::new();
    let _ = writeln!(out, "| | {} |", rows.iter().map(|(h, _)| *h).collect::<Vec<_>>().join(" | "));
    let _ = writeln!(out, "|---|{}", "---:|".repeat(rows.len()));
    let _ = writeln!(out, "| Rate (%) | {} |", rows.iter().map(|(_, t)| t.display()).collect::<Vec<_>>().join(" | "));
    let _ = writeln!(
        out,
        "| Correct/Total | {} |",
        rows.iter().map(|(_, t)| format!("{}/{}", t.correct, t.total)).collect::<Vec<_>>().join(" | ")
    );
    out.push('\n');
    let backend = if r.backend.is_empty() { "-" } else { &r.backend };
    let seed = r.seed.map_or_else(|| "-".to_string(), |s| s.to_string());
    let _ = writeln!(out, "backend: {backend}; mode: {}; seed: {seed}", r.mode);
    let violations: Vec<String> = r.violations.iter().map(|(v, n)| format!("{v}={n}")).collect();
    let _ = writeln!(
        out,
        "asked: {}; backend errors: {}; violations: {}",
        r.asked,
        r.backend_errors,
        violations.join(", ")
    );
    out
}

/// Unvalidated wire form; [`EvalReport`] deserializes through it.
#[derive(Deserialize)]
pub(super) struct RawReport {
    classes: BTreeMap<ScenarioType, RateRow>,
    total: RateRow,
    sja: RateRow,
    #[serde(default)]
    violations: BTreeMap<Violation, u64>,
    #[serde(default)]
    asked: u64,
    #[serde(default)]
    backend_errors: u64,
    #[serde(default)]
    backend: String,
    #[serde(default)]
    mode: Mode,
    #[serde(default)]
    seed: Option<u64>,
}

fn check_row(name: &str, row: &RateRow) -> Result<(), String> {
    if row.correct > row.total {
        return Err(format!("{name}: correct {} exceeds total {}", row.correct, row.total));
    }
    if row.rate != row.tally().percent() {
        return Err(format!("{name}: rate {:?} does not match {}/{}", row.rate, row.correct, row.total));
    }
    Ok(())
}

impl TryFrom<RawReport> for EvalReport {
    type Error = String;

    fn try_from(raw: RawReport) -> Result<Self, Self::Error> {
        for s in ScenarioType::ALL {
            let row = raw.classes.get(&s).ok_or_else(|| format!("missing class {s}"))?;
            check_row(s.label(), row)?;
        }
        check_row("total", &raw.total)?;
        check_row("sja", &raw.sja)?;
        let sum = raw.classes.values().fold(Tally::default(), |acc, row| acc + row.tally());
        if sum != raw.total.tally() {
            return Err(format!(
                "total {}/{} is not the class sum {}/{}",
                raw.total.correct, raw.total.total, sum.correct, sum.total
            ));
        }
        let mut violations: BTreeMap<Violation, u64> = Violation::ALL.into_iter().map(|v| (v, 0)).collect();
        violations.extend(raw.violations);
        Ok(EvalReport {
            classes: raw.classes,
            total: raw.total,
            sja: raw.sja,
            violations,
            asked: raw.asked,
            backend_errors: raw.backend_errors,
            backend: raw.backend,
            mode: raw.mode,
            seed: raw.seed,
        })
    }
}
