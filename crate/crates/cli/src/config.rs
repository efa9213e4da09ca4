// SPDX-License-Identifier: Apache-2.0

//! Effective configuration: defaults, overlaid by an optional TOML file,
//! overlaid by command-line flags.

use std::path::Path;
use std::time::Duration;

use anyhow::Context;
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use poco_core::fuzz::FuzzConfig;
use poco_core::runtime::{DEFAULT_BUDGET, PROBE_FACTOR};
use poco_core::select::SelectConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Clock {
    /// Deterministic work units (interpreter steps and bookkeeping operations).
    Work,
    /// Wall-clock time; makes traces and reports machine dependent.
    Wall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Interpreter steps per seed execution.
    pub budget: u64,
    /// Probe budget multiplier for reckless detection.
    pub probe_factor: u64,
    pub max_rounds: u64,
    pub wall_budget_secs: u64,
    /// Make `while` guards toggleable too.
    pub toggle_loops: bool,
    pub clock: Clock,
    /// Fuzzer executions per campaign.
    pub executions: u64,
    pub rng_seed: u64,
    /// Campaigns per seed set in `eval`.
    pub trials: u64,
    pub energy: u32,
    pub max_input_len: usize,
}

impl Default for Config {
    fn default() -> Self {
        let s = SelectConfig::default();
        let f = FuzzConfig::default();
        Config {
            budget: DEFAULT_BUDGET,
            probe_factor: PROBE_FACTOR,
            max_rounds: s.max_rounds,
            wall_budget_secs: s.wall_budget.as_secs(),
            toggle_loops: false,
            clock: Clock::Work,
            executions: f.executions,
            rng_seed: f.rng_seed,
            trials: 10,
            energy: f.energy,
            max_input_len: f.max_input_len,
        }
    }
}

/// Flags that override the file and the defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML file with any subset of the configuration keys
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<std::path::PathBuf>,
    #[arg(long, global = true)]
    pub budget: Option<u64>,
    #[arg(long, global = true)]
    pub probe_factor: Option<u64>,
    #[arg(long, global = true)]
    pub max_rounds: Option<u64>,
    #[arg(long, global = true)]
    pub wall_budget_secs: Option<u64>,
    #[arg(long, global = true)]
    pub toggle_loops: bool,
    #[arg(long, global = true, value_enum)]
    pub clock: Option<Clock>,
    #[arg(long, global = true)]
    pub executions: Option<u64>,
    #[arg(long, global = true)]
    pub rng_seed: Option<u64>,
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    #[arg(long, global = true)]
    pub energy: Option<u32>,
    #[arg(long, global = true)]
    pub max_input_len: Option<usize>,
}

impl Config {
    pub fn load(o: &Overrides) -> anyhow::Result<Config> {
        let mut c = match &o.config {
            Some(p) => Self::from_file(p)?,
            None => Config::default(),
        };
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = o.$f { c.$f = v; } )* };
        }
        take!(
            budget,
            probe_factor,
            max_rounds,
            wall_budget_secs,
            clock,
            executions,
            rng_seed,
            trials,
            energy,
            max_input_len
        );
        if o.toggle_loops {
            c.toggle_loops = true;
        }
        Ok(c)
    }

    fn from_file(path: &Path) -> anyhow::Result<Config> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("malformed config {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn select(&self) -> SelectConfig {
        SelectConfig {
            budget: self.budget,
            probe_factor: self.probe_factor,
            max_rounds: self.max_rounds,
            wall_budget: Duration::from_secs(self.wall_budget_secs),
            record_wall: self.clock == Clock::Wall,
        }
    }

    pub fn fuzz(&self) -> FuzzConfig {
        FuzzConfig {
            executions: self.executions,
            rng_seed: self.rng_seed,
            step_budget: self.budget,
            energy: self.energy,
            max_input_len: self.max_input_len,
            stop_on_first_crash: false,
            record_wall: self.clock == Clock::Wall,
        }
    }

    pub fn rng_seeds(&self) -> Vec<u64> {
        (0..self.trials).map(|i| self.rng_seed.wrapping_add(i)).collect()
    }
}
