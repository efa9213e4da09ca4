// SPDX-License-Identifier: Apache-2.0

//! Time composition of a selection run.
//!
//! Five categories: base minimizer, crashing-reckless handling (with probe
//! executions tracked separately as a sub-account), converging-reckless
//! handling, hierarchy traversal, and guard operations. Guard operations are
//! measured as the remainder of the round, so categories always add up to the
//! round total.
//!
//! Costs come in two clocks. Work units are deterministic: interpreter steps
//! for executions, one unit per visited hierarchy node, one per guard
//! bookkeeping action. Wall time is nanoseconds and only recorded on request.

use serde::{Deserialize, Serialize};

pub const CATEGORY_NAMES: [&str; 5] = [
    "base-cmin",
    "crashing-reckless",
    "converging-reckless",
    "hierarchy",
    "guard-ops",
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCosts {
    pub base_cmin: u64,
    pub crashing: u64,
    /// Part of `crashing` spent executing probes.
    pub crashing_probe: u64,
    pub converging: u64,
    pub hierarchy: u64,
    pub guard_ops: u64,
}

impl CategoryCosts {
    pub fn categories(&self) -> [u64; 5] {
        [
            self.base_cmin,
            self.crashing,
            self.converging,
            self.hierarchy,
            self.guard_ops,
        ]
    }

    pub fn total(&self) -> u64 {
        self.categories().iter().sum()
    }

    pub fn add(&mut self, o: &CategoryCosts) {
        self.base_cmin += o.base_cmin;
        self.crashing += o.crashing;
        self.crashing_probe += o.crashing_probe;
        self.converging += o.converging;
        self.hierarchy += o.hierarchy;
        self.guard_ops += o.guard_ops;
    }

    /// Shares in percent; all zero when the total is zero.
    pub fn percentages(&self) -> [f64; 5] {
        let total = self.total();
        let mut out = [0.0; 5];
        if total > 0 {
            for (o, v) in out.iter_mut().zip(self.categories()) {
                *o = v as f64 * 100.0 / total as f64;
            }
        }
        out
    }

    /// Fraction of the crashing-reckless category spent in probes.
    pub fn probe_share(&self) -> Option<f64> {
        (self.crashing > 0).then(|| self.crashing_probe as f64 / self.crashing as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositionRow {
    pub round: u64,
    pub costs: CategoryCosts,
    pub percentages: [f64; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Composition {
    pub categories: [&'static str; 5],
    pub rows: Vec<CompositionRow>,
    pub totals: CategoryCosts,
    pub percentages: [f64; 5],
    pub probe_share: Option<f64>,
}

/// Builds the report from per-round costs `(round, costs)`.
pub fn composition<'a>(rounds: impl IntoIterator<Item = (u64, &'a CategoryCosts)>) -> Composition {
    let mut totals = CategoryCosts::default();
    let rows: Vec<CompositionRow> = rounds
        .into_iter()
        .map(|(round, c)| {
            totals.add(c);
            CompositionRow {
                round,
                costs: *c,
                percentages: c.percentages(),
            }
        })
        .collect();
    Composition {
        categories: CATEGORY_NAMES,
        rows,
        totals,
        percentages: totals.percentages(),
        probe_share: totals.probe_share(),
    }
}
