// SPDX-License-Identifier: Apache-2.0
#![allow(dead_code)]

use poco_core::guardlang::parse;
use poco_core::{insert_toggles, InstrumentedProgram, Seed};

pub const FOO: &str = include_str!("../../../../targets/foo.gl");
pub const BOO: &str = include_str!("../../../../targets/boo.gl");
pub const XMLENTRY: &str = include_str!("../../../../targets/xmlentry.gl");
pub const LOOPFAULT: &str = include_str!("../../../../targets/loopfault.gl");

pub fn ip(src: &str) -> InstrumentedProgram {
    insert_toggles(&parse(src).unwrap(), false)
}

pub fn foo_corpus() -> Vec<Seed> {
    vec![Seed::new("s1", "abcde"), Seed::new("s2", "jello"), Seed::new("s3", "")]
}
