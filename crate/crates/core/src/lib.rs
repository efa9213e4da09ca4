// SPDX-License-Identifier: Apache-2.0

//! Guard-toggling iterative seed selection.
//!
//! The pipeline: parse a GuardLang program ([`guardlang`]), insert a runtime
//! toggle in front of every guard ([`instrument`]), execute seeds under a
//! toggle vector ([`runtime`]), minimize a corpus by edge coverage
//! ([`minimize`]), and iterate the minimizer while disabling obstacle guards
//! and recovering reckless ones ([`select`]). [`fuzz`] and [`metrics`] measure
//! whether the extra seeds help a downstream fuzzer.

pub mod bits;
pub mod corpus;
pub mod fuzz;
pub mod guardlang;
pub mod hierarchy;
pub mod instrument;
pub mod ledger;
pub mod metrics;
pub mod minimize;
pub mod oracle;
pub mod reckless;
pub mod runtime;
pub mod select;

/// Version tag written into every JSON artifact.
pub const SCHEMA_VERSION: u32 = 1;

pub use bits::BitSet;
pub use guardlang::{parse, GuardId, Program};
pub use instrument::{insert_toggles, GuardHierarchy, InstrumentedProgram, ToggleVector};
pub use runtime::{ExecOutcome, Seed, Verdict};
