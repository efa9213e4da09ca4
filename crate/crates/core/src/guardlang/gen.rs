// SPDX-License-Identifier: Apache-2.0

//! Random GuardLang programs and matching corpora for property tests, sweeps
//! and benchmarks. Generated programs always parse.

use std::fmt::Write;

use rand::seq::IndexedRandom;
use rand::Rng;

use super::{parse, Program};
use crate::runtime::Seed;

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub max_depth: u32,
    /// Statements per body, upper bound.
    pub max_stmts: usize,
    pub max_guards: usize,
    pub allow_else: bool,
    pub allow_while: bool,
    /// Array stores and divisions whose operands depend on the input.
    pub allow_faults: bool,
    pub allow_crash: bool,
    pub allow_return: bool,
    pub allow_calls: bool,
    /// Highest input index read by conditions.
    pub input_span: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_depth: 4,
            max_stmts: 4,
            max_guards: 12,
            allow_else: true,
            allow_while: true,
            allow_faults: true,
            allow_crash: true,
            allow_return: true,
            allow_calls: true,
            input_span: 6,
        }
    }
}

impl GenConfig {
    /// Straight `if` nests without loops, else-branches, early exits or faults.
    pub fn plain() -> Self {
        GenConfig {
            allow_else: false,
            allow_while: false,
            allow_faults: false,
            allow_crash: false,
            allow_return: false,
            allow_calls: false,
            ..GenConfig::default()
        }
    }
}

/// Byte values the generated conditions compare against.
pub const MAGIC: [u8; 8] = [b'a', b'e', b'h', b'l', b'o', b'x', 0, 7];

struct Gen<'r, R: Rng> {
    rng: &'r mut R,
    cfg: &'r GenConfig,
    out: String,
    guards: usize,
    next_var: usize,
    labels: usize,
}

/// Generates the source text of a random program.
pub fn random_source<R: Rng>(rng: &mut R, cfg: &GenConfig) -> String {
    let mut g = Gen {
        rng,
        cfg,
        out: String::new(),
        guards: 0,
        next_var: 0,
        labels: 0,
    };
    if cfg.allow_calls {
        g.helper();
    }
    g.out.push_str("fn main(input) {\n");
    let first = g.fresh();
    let k = g.rng.random_range(0..=cfg.input_span);
    let _ = writeln!(g.out, "    let {first} = input[{k}];");
    let mut scope = vec![first];
    g.body(1, &mut scope, true);
    g.out.push_str("}\n");
    g.out
}

pub fn random_program<R: Rng>(rng: &mut R, cfg: &GenConfig) -> Program {
    let src = random_source(rng, cfg);
    match parse(&src) {
        Ok(p) => p,
        Err(d) => panic!("generator produced an invalid program: {d}\n{src}"),
    }
}

/// A corpus of `n` seeds whose bytes lean towards the generator's constants,
/// so some guards are passable. Ids are `s000`, `s001`, ...
pub fn random_corpus<R: Rng>(rng: &mut R, n: usize, max_len: usize) -> Vec<Seed> {
    (0..n)
        .map(|i| {
            let len = rng.random_range(0..=max_len);
            let bytes: Vec<u8> = (0..len)
                .map(|_| {
                    if rng.random_bool(0.6) {
                        *MAGIC.choose(rng).expect("non-empty")
                    } else {
                        rng.random()
                    }
                })
                .collect();
            Seed::new(format!("s{i:03}"), bytes)
        })
        .collect()
}

impl<R: Rng> Gen<'_, R> {
    fn fresh(&mut self) -> String {
        let v = format!("v{}", self.next_var);
        self.next_var += 1;
        v
    }

    fn indent(&mut self, depth: u32) {
        for _ in 0..depth {
            self.out.push_str("    ");
        }
    }

    fn helper(&mut self) {
        let c = self.rng.random_range(1..5);
        let _ = write!(
            self.out,
            "fn helper(a, b) {{\n    if (a > b) {{\n        return a - b;\n    }}\n    return b * {c};\n}}\n\n"
        );
        self.guards += 1;
    }

    fn magic(&mut self) -> i64 {
        i64::from(*MAGIC.choose(self.rng).expect("non-empty"))
    }

    fn atom(&mut self, scope: &[String]) -> String {
        match self.rng.random_range(0..4) {
            0 => self.magic().to_string(),
            1 | 2 if !scope.is_empty() => scope.choose(self.rng).expect("non-empty").clone(),
            _ => format!("input[{}]", self.rng.random_range(0..=self.cfg.input_span)),
        }
    }

    fn int_expr(&mut self, scope: &[String]) -> String {
        match self.rng.random_range(0..5) {
            0 => format!("{} + {}", self.atom(scope), self.atom(scope)),
            1 => format!("{} - {}", self.atom(scope), self.rng.random_range(0..4)),
            2 => "len(input)".to_string(),
            _ => self.atom(scope),
        }
    }

    fn cond(&mut self, scope: &[String]) -> String {
        let base = |g: &mut Self| {
            let k = g.rng.random_range(0..=g.cfg.input_span);
            match g.rng.random_range(0..6) {
                0 | 1 => format!("input[{k}] == {}", g.magic()),
                2 => format!("input[{k}] > {}", g.magic()),
                3 => format!("len(input) > {}", g.rng.random_range(0..=g.cfg.input_span)),
                4 if !scope.is_empty() => {
                    let v = scope.choose(g.rng).expect("non-empty").clone();
                    format!("{v} != {}", g.magic())
                }
                _ => format!("input[{k}] < {}", g.magic()),
            }
        };
        match self.rng.random_range(0..8) {
            0 => format!("{} && {}", base(self), base(self)),
            1 => format!("{} || {}", base(self), base(self)),
            2 => format!("!({})", base(self)),
            _ => base(self),
        }
    }

    fn body(&mut self, depth: u32, scope: &mut Vec<String>, top: bool) {
        let n = self.rng.random_range(1..=self.cfg.max_stmts);
        let mark = scope.len();
        for i in 0..n {
            let last = i + 1 == n;
            self.stmt(depth, scope, top && last);
        }
        scope.truncate(mark);
    }

    fn stmt(&mut self, depth: u32, scope: &mut Vec<String>, may_return: bool) {
        let can_nest = depth <= self.cfg.max_depth && self.guards < self.cfg.max_guards;
        let roll = self.rng.random_range(0..100);
        match roll {
            0..=44 if can_nest => self.if_stmt(depth, scope),
            45..=54 if can_nest && self.cfg.allow_while => self.while_stmt(depth, scope),
            55..=59 if self.cfg.allow_crash => {
                self.indent(depth);
                let _ = writeln!(self.out, "crash(\"bug{}\");", self.labels);
                self.labels += 1;
            }
            60..=64 if self.cfg.allow_faults => {
                let arr = self.fresh();
                let size = self.rng.random_range(2..6);
                let k = self.rng.random_range(0..=self.cfg.input_span);
                self.indent(depth);
                let _ = writeln!(self.out, "let {arr} = [0; {size}];");
                self.indent(depth);
                let _ = writeln!(self.out, "{arr}[input[{k}] % {}] = 1;", size + 2);
            }
            65..=67 if self.cfg.allow_faults => {
                let v = self.fresh();
                let k = self.rng.random_range(0..=self.cfg.input_span);
                let m = self.magic();
                self.indent(depth);
                let _ = writeln!(self.out, "let {v} = 100 / (input[{k}] - {m});");
                scope.push(v);
            }
            68..=70 if self.cfg.allow_calls => {
                let v = self.fresh();
                let a = self.atom(scope);
                let b = self.atom(scope);
                self.indent(depth);
                let _ = writeln!(self.out, "let {v} = helper({a}, {b});");
                scope.push(v);
            }
            71..=73 if self.cfg.allow_return && may_return => {
                self.indent(depth);
                self.out.push_str("return;\n");
            }
            74..=84 if !scope.is_empty() => {
                let v = scope.choose(self.rng).expect("non-empty").clone();
                let e = self.int_expr(scope);
                self.indent(depth);
                let _ = writeln!(self.out, "{v} = {e};");
            }
            _ => {
                let v = self.fresh();
                let e = self.int_expr(scope);
                self.indent(depth);
                let _ = writeln!(self.out, "let {v} = {e};");
                scope.push(v);
            }
        }
    }

    fn if_stmt(&mut self, depth: u32, scope: &mut Vec<String>) {
        self.guards += 1;
        let c = self.cond(scope);
        self.indent(depth);
        let _ = writeln!(self.out, "if ({c}) {{");
        self.body(depth + 1, scope, false);
        self.indent(depth);
        if self.cfg.allow_else && self.rng.random_bool(0.3) {
            self.out.push_str("} else {\n");
            self.body(depth + 1, scope, false);
            self.indent(depth);
        }
        self.out.push_str("}\n");
    }

    fn while_stmt(&mut self, depth: u32, scope: &mut Vec<String>) {
        self.guards += 1;
        // the counter stays out of `scope` so the body never reassigns it
        let counter = self.fresh();
        let bound = self.rng.random_range(1..4);
        self.indent(depth);
        let _ = writeln!(self.out, "let {counter} = 0;");
        self.indent(depth);
        let _ = writeln!(self.out, "while ({counter} < {bound}) {{");
        self.body(depth + 1, scope, false);
        self.indent(depth + 1);
        let _ = writeln!(self.out, "{counter} = {counter} + 1;");
        self.indent(depth);
        self.out.push_str("}\n");
    }
}
