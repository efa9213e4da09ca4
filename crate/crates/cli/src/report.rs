// SPDX-License-Identifier: Apache-2.0

//! Renders a selection trace as a time-composition report.

use std::fmt::Write as _;

use anyhow::{bail, Context};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use poco_core::ledger::{composition, CategoryCosts, Composition, CATEGORY_NAMES};
use poco_core::metrics::fresh_seed_ratio;
use poco_core::select::RoundRecord;
use poco_core::SCHEMA_VERSION;

use crate::config::Clock;

/// One line of `trace.jsonl`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceLine {
    pub schema_version: u32,
    #[serde(flatten)]
    pub round: RoundRecord,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub clock: Clock,
    pub rounds: usize,
    pub composition: Composition,
    /// Fresh-seed ratio after each round.
    pub fresh_seed_ratio: Vec<Option<f64>>,
}

pub fn render_trace(rounds: &[RoundRecord]) -> String {
    let mut out = String::new();
    for r in rounds {
        let line = TraceLine {
            schema_version: SCHEMA_VERSION,
            round: r.clone(),
        };
        out.push_str(&serde_json::to_string(&line).expect("trace serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_trace(text: &str) -> anyhow::Result<Vec<RoundRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let t: TraceLine = serde_json::from_str(l).with_context(|| format!("trace line {}", i + 1))?;
            if t.schema_version != SCHEMA_VERSION {
                bail!(
                    "trace line {}: schema version {} (expected {SCHEMA_VERSION})",
                    i + 1,
                    t.schema_version
                );
            }
            Ok(t.round)
        })
        .collect()
}

pub fn build(rounds: &[RoundRecord], clock: Clock) -> anyhow::Result<Report> {
    let costs: Vec<(u64, CategoryCosts)> = rounds
        .iter()
        .map(|r| match clock {
            Clock::Work => Ok((r.round, r.work)),
            Clock::Wall => r
                .wall_ns
                .map(|w| (r.round, w))
                .with_context(|| format!("round {} has no wall-clock times; rerun with --clock wall", r.round)),
        })
        .collect::<anyhow::Result<_>>()?;
    let selections: Vec<Vec<&str>> = rounds
        .iter()
        .map(|r| r.selected.iter().map(String::as_str).collect())
        .collect();
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        clock,
        rounds: rounds.len(),
        composition: composition(costs.iter().map(|(r, c)| (*r, c))),
        fresh_seed_ratio: fresh_seed_ratio(&selections),
    })
}

pub fn render(report: &Report, format: Format) -> anyhow::Result<String> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(report)? + "\n"),
        Format::Csv => render_csv(report),
        Format::Text => Ok(render_text(report)),
    }
}

fn render_csv(report: &Report) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["round".to_string()];
    header.extend(CATEGORY_NAMES.iter().map(|s| s.to_string()));
    header.extend(["crashing-probe".into(), "fresh-seed-ratio".into()]);
    w.write_record(&header)?;
    let comp = &report.composition;
    for (row, ratio) in comp.rows.iter().zip(&report.fresh_seed_ratio) {
        let mut rec = vec![row.round.to_string()];
        rec.extend(row.costs.categories().iter().map(u64::to_string));
        rec.push(row.costs.crashing_probe.to_string());
        rec.push(ratio.map(|r| format!("{r:.6}")).unwrap_or_default());
        w.write_record(&rec)?;
    }
    let mut total = vec!["total".to_string()];
    total.extend(comp.totals.categories().iter().map(u64::to_string));
    total.push(comp.totals.crashing_probe.to_string());
    total.push(String::new());
    w.write_record(&total)?;
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn render_text(report: &Report) -> String {
    let comp = &report.composition;
    let unit = match report.clock {
        Clock::Work => "work units",
        Clock::Wall => "ns",
    };
    let mut s = String::new();
    let _ = writeln!(s, "rounds: {}  ({unit})", report.rounds);
    for ((name, v), p) in CATEGORY_NAMES
        .iter()
        .zip(comp.totals.categories())
        .zip(comp.percentages)
    {
        let _ = writeln!(s, "{name:>20}  {v:>14}  {p:>6.2}%");
    }
    let _ = writeln!(s, "{:>20}  {:>14}", "total", comp.totals.total());
    match comp.probe_share {
        Some(p) => {
            let _ = writeln!(s, "probe share of crashing-reckless: {:.2}%", p * 100.0);
        }
        None => {
            let _ = writeln!(s, "probe share of crashing-reckless: n/a");
        }
    }
    if let Some(Some(r)) = report.fresh_seed_ratio.last() {
        let _ = writeln!(s, "fresh-seed ratio: {r:.4}");
    }
    s
}
