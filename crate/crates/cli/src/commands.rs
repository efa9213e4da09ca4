// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use serde::{Deserialize, Serialize};

use poco_core::corpus::{ingest_corpus, read_manifest, write_manifest, write_seeds};
use poco_core::fuzz::{evaluate, fuzz, FuzzError};
use poco_core::guardlang::{build_cfg, Edge, GuardKind};
use poco_core::instrument::extract_hierarchy;
use poco_core::minimize::cmin_with;
use poco_core::runtime::{Executor, RuntimeError};
use poco_core::select::{select, SelectError};
use poco_core::SCHEMA_VERSION;
use poco_core::{insert_toggles, parse, GuardId, InstrumentedProgram, Program, Seed, ToggleVector, Verdict};

use crate::config::Config;
use crate::report::{self, Format};

/// The input was fine but a precondition of the requested operation does not
/// hold. Mapped to its own exit code.
#[derive(Debug)]
pub struct Precondition(pub String);

impl std::fmt::Display for Precondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Precondition {}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> anyhow::Result<()> {
    match out {
        Some(p) => write_json(p, value),
        None => print_stdout(&(serde_json::to_string_pretty(value)? + "\n")),
    }
}

/// Writes to stdout; a closed pipe downstream is not an error.
fn print_stdout(text: &str) -> anyhow::Result<()> {
    use std::io::Write;
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

pub fn load_program(path: &Path) -> anyhow::Result<Program> {
    let src = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse(&src).map_err(|d| anyhow!("{}", d.render(&path.display().to_string())))
}

fn load_instrumented(path: &Path, cfg: &Config) -> anyhow::Result<InstrumentedProgram> {
    Ok(insert_toggles(&load_program(path)?, cfg.toggle_loops))
}

/// A single seed file or a corpus directory.
fn load_seeds(path: &Path) -> anyhow::Result<Vec<Seed>> {
    if path.is_dir() {
        return Ok(ingest_corpus(path)?);
    }
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| anyhow!("bad seed file name {}", path.display()))?;
    Ok(vec![Seed::new(id, bytes)])
}

/// Corpus, optionally restricted to the seeds of a manifest.
fn load_set(corpus: &Path, manifest: Option<&Path>) -> anyhow::Result<Vec<Seed>> {
    let seeds = load_seeds(corpus)?;
    match manifest {
        None => Ok(seeds),
        Some(m) => read_manifest(m)?
            .resolve(&seeds)
            .map_err(|e| anyhow!("{}: {e}", m.display())),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ToggleFile {
    pub schema_version: u32,
    /// Guards whose toggle is on.
    pub disabled: Vec<GuardId>,
}

fn load_toggles(ip: &InstrumentedProgram, path: Option<&Path>) -> anyhow::Result<ToggleVector> {
    let Some(path) = path else {
        return Ok(ToggleVector::all_off(ip));
    };
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let tf: ToggleFile =
        serde_json::from_str(&text).with_context(|| format!("malformed toggle vector {}", path.display()))?;
    ToggleVector::with_disabled(ip, &tf.disabled).map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn runtime_err(e: RuntimeError) -> anyhow::Error {
    anyhow!(e)
}

#[derive(Serialize)]
struct GuardRow {
    id: GuardId,
    line: u32,
    col: u32,
    kind: GuardKind,
    function: String,
    toggleable: bool,
}

fn guard_table(ip: &InstrumentedProgram) -> Vec<GuardRow> {
    ip.guards()
        .iter()
        .map(|g| GuardRow {
            id: g.id,
            line: g.span.line,
            col: g.span.col,
            kind: g.kind,
            function: ip.base.functions[g.function].name.clone(),
            toggleable: ip.is_toggleable(g.id),
        })
        .collect()
}

pub fn cmd_parse(program: &Path, cfg: &Config) -> anyhow::Result<()> {
    #[derive(Serialize)]
    struct Summary {
        schema_version: u32,
        entry: String,
        functions: Vec<String>,
        blocks: usize,
        edges: usize,
        guards: Vec<GuardRow>,
    }
    let p = load_program(program)?;
    let c = build_cfg(&p);
    let ip = insert_toggles(&p, cfg.toggle_loops);
    emit_json(
        None,
        &Summary {
            schema_version: SCHEMA_VERSION,
            entry: p.entry_function().name.clone(),
            functions: p.functions.iter().map(|f| f.name.clone()).collect(),
            blocks: c.blocks.len(),
            edges: c.edges.len(),
            guards: guard_table(&ip),
        },
    )
}

pub fn cmd_instrument(program: &Path, out: &Path, cfg: &Config) -> anyhow::Result<()> {
    #[derive(Serialize)]
    struct Guards {
        schema_version: u32,
        guards: Vec<GuardRow>,
    }
    #[derive(Serialize)]
    struct Hierarchy {
        schema_version: u32,
        root_children: Vec<GuardId>,
        edges: Vec<(GuardId, GuardId)>,
    }
    let ip = load_instrumented(program, cfg)?;
    create_dir(out)?;
    fs::write(out.join("instrumented.gl"), ip.render())?;
    write_json(
        &out.join("guards.json"),
        &Guards {
            schema_version: SCHEMA_VERSION,
            guards: guard_table(&ip),
        },
    )?;
    let h = extract_hierarchy(&ip);
    write_json(
        &out.join("hierarchy.json"),
        &Hierarchy {
            schema_version: SCHEMA_VERSION,
            root_children: h.root_children().to_vec(),
            edges: h.edges(),
        },
    )
}

pub fn cmd_run(
    program: &Path,
    seeds: &Path,
    toggles: Option<&Path>,
    out: Option<&Path>,
    cfg: &Config,
) -> anyhow::Result<()> {
    #[derive(Serialize)]
    struct Outcome {
        id: String,
        #[serde(flatten)]
        verdict: Verdict,
        steps: u64,
        /// Covered edges of the uninstrumented program, sorted.
        edges: Vec<Edge>,
        edge_bitmap: String,
        cond_sat: String,
        branch_entered: String,
    }
    #[derive(Serialize)]
    struct RunReport {
        schema_version: u32,
        budget: u64,
        disabled: Vec<GuardId>,
        outcomes: Vec<Outcome>,
    }
    let ip = load_instrumented(program, cfg)?;
    let tv = load_toggles(&ip, toggles)?;
    let corpus = load_seeds(seeds)?;
    let ex = Executor::new(&ip, cfg.budget).uncached();
    let run = ex.run_default(&tv, &corpus).map_err(runtime_err)?;
    let outcomes = corpus
        .iter()
        .zip(&run.outcomes)
        .map(|(s, o)| Outcome {
            id: s.id.clone(),
            verdict: o.verdict.clone(),
            steps: o.steps,
            edges: ip.project_edges(&o.edges),
            edge_bitmap: o.edges.to_hex(),
            cond_sat: o.cond_sat.to_hex(),
            branch_entered: o.branch_entered.to_hex(),
        })
        .collect();
    emit_json(
        out,
        &RunReport {
            schema_version: SCHEMA_VERSION,
            budget: cfg.budget,
            disabled: tv.disabled(),
            outcomes,
        },
    )
}

pub fn cmd_cmin(program: &Path, corpus: &Path, toggles: Option<&Path>, out: &Path, cfg: &Config) -> anyhow::Result<()> {
    let ip = load_instrumented(program, cfg)?;
    let tv = load_toggles(&ip, toggles)?;
    let seeds = load_seeds(corpus)?;
    let ex = Executor::new(&ip, cfg.budget).uncached();
    let r = cmin_with(&ex, &tv, &seeds).map_err(runtime_err)?;
    let chosen = r.selected_seeds(&seeds);
    create_dir(out)?;
    write_manifest(chosen.iter().copied(), &out.join("manifest.json"))?;
    write_seeds(chosen.iter().copied(), &out.join("seeds"))?;
    log::info!(
        "selected {} of {} seeds; aggregate verdict {}",
        chosen.len(),
        seeds.len(),
        r.result
    );
    Ok(())
}

pub fn cmd_poco(program: &Path, corpus: &Path, out: &Path, cfg: &Config) -> anyhow::Result<()> {
    #[derive(Serialize)]
    struct Summary<'a> {
        schema_version: u32,
        termination: poco_core::select::Termination,
        rounds: usize,
        baseline: Vec<&'a str>,
        selected: Vec<&'a str>,
        delta: Vec<&'a str>,
        disabled: Vec<GuardId>,
        reckless: Vec<GuardId>,
    }
    let ip = load_instrumented(program, cfg)?;
    let seeds = load_seeds(corpus)?;
    let sel = match select(&ip, &seeds, &cfg.select()) {
        Ok(s) => s,
        Err(e @ SelectError::Baseline(_)) => return Err(Precondition(e.to_string()).into()),
        Err(e) => bail!(e),
    };
    let pick = |ix: &[usize]| -> Vec<&Seed> { ix.iter().map(|i| &seeds[*i]).collect() };
    create_dir(out)?;
    write_manifest(pick(&sel.selected), &out.join("selected.json"))?;
    write_manifest(pick(&sel.baseline), &out.join("baseline.json"))?;
    write_manifest(pick(&sel.delta), &out.join("delta.json"))?;
    fs::write(out.join("trace.jsonl"), report::render_trace(&sel.trace))?;
    write_json(
        &out.join("toggles.json"),
        &ToggleFile {
            schema_version: SCHEMA_VERSION,
            disabled: sel.disabled.clone(),
        },
    )?;
    let ids = |ix: &[usize]| ix.iter().map(|i| seeds[*i].id.as_str()).collect();
    write_json(
        &out.join("summary.json"),
        &Summary {
            schema_version: SCHEMA_VERSION,
            termination: sel.termination,
            rounds: sel.trace.len(),
            baseline: ids(&sel.baseline),
            selected: ids(&sel.selected),
            delta: ids(&sel.delta),
            disabled: sel.disabled.clone(),
            reckless: sel.reckless.clone(),
        },
    )?;
    log::info!(
        "{:?} after {} rounds: {} selected, {} beyond the baseline",
        sel.termination,
        sel.trace.len(),
        sel.selected.len(),
        sel.delta.len()
    );
    Ok(())
}

/// Crash file name: the label restricted to a portable alphabet, then the
/// discovery index.
pub fn crash_file_name(label: &str, exec_index: u64) -> String {
    let clean: String = label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{clean}_{exec_index}")
}

fn fuzz_err(e: FuzzError) -> anyhow::Error {
    match e {
        FuzzError::CandidateInBase(_) => Precondition(e.to_string()).into(),
        FuzzError::NoSeeds => anyhow!(e),
    }
}

pub fn cmd_fuzz(
    program: &Path,
    corpus: &Path,
    manifest: Option<&Path>,
    out: &Path,
    cfg: &Config,
) -> anyhow::Result<()> {
    let ip = load_instrumented(program, cfg)?;
    let seeds = load_set(corpus, manifest)?;
    let report = fuzz(&ip, &seeds, &cfg.fuzz()).map_err(fuzz_err)?;
    create_dir(out)?;
    write_json(&out.join("report.json"), &report)?;
    let dir = out.join("crashes");
    create_dir(&dir)?;
    for c in &report.crashes {
        fs::write(dir.join(crash_file_name(&c.label, c.exec_index)), &c.input)?;
    }
    log::info!(
        "{} executions, {} queue entries, bugs: {:?}",
        report.executions,
        report.queue.len(),
        report.crash_labels()
    );
    Ok(())
}

/// `name=manifest.json`
pub fn parse_set(s: &str) -> Result<(String, PathBuf), String> {
    let (name, path) = s.split_once('=').ok_or("expected NAME=MANIFEST")?;
    if name.is_empty() {
        return Err("empty set name".into());
    }
    Ok((name.to_string(), PathBuf::from(path)))
}

pub fn cmd_eval(
    program: &Path,
    corpus: &Path,
    sets: &[(String, PathBuf)],
    out: Option<&Path>,
    cfg: &Config,
) -> anyhow::Result<()> {
    let ip = load_instrumented(program, cfg)?;
    let mut named = BTreeSet::new();
    let mut resolved = Vec::with_capacity(sets.len());
    for (name, m) in sets {
        if !named.insert(name) {
            bail!("duplicate set name `{name}`");
        }
        resolved.push((name.clone(), load_set(corpus, Some(m))?));
    }
    if resolved.is_empty() {
        bail!("no seed sets given (use --set NAME=MANIFEST)");
    }
    let report = evaluate(&ip, &resolved, &cfg.fuzz(), &cfg.rng_seeds()).map_err(fuzz_err)?;
    emit_json(out, &report)
}

pub fn cmd_report(trace: &Path, format: Format, out: Option<&Path>, cfg: &Config) -> anyhow::Result<()> {
    let text = fs::read_to_string(trace).with_context(|| format!("cannot read {}", trace.display()))?;
    let rounds = report::parse_trace(&text).with_context(|| format!("malformed trace {}", trace.display()))?;
    let r = report::build(&rounds, cfg.clock)?;
    let rendered = report::render(&r, format)?;
    match out {
        Some(p) => fs::write(p, rendered).with_context(|| format!("cannot write {}", p.display())),
        None => print_stdout(&rendered),
    }
}
