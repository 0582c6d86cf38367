//! The `nanoop` command line.
//!
//! Exit codes: 0 success, 1 a check failed (verification, generation or
//! compilation of the given input), 2 usage or configuration error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use nanoop_core::dfg::Op;
use nanoop_core::dse::{area_efficiency, auto_config, pareto_front, DesignPoint, DseOptions, Measured, Workload};
use nanoop_core::isa::{isa_simulate, Isa, Termination};
use nanoop_core::llm::{build_prompt, nop_reference, pass_at_1};
use nanoop_core::nop::NopRegistry;
use nanoop_core::rtl::{emit_fused_op, file_stem, module_name, EmitError, EmitOptions};
use nanoop_core::timing::{collect_patterns, cycle_delay, DelayScope, DEFAULT_MAX_PATTERN_SIZE};
use nanoop_core::uarch::{simulate, SimOptions, SimStatus};
use nanoop_core::verify::{run_graph_case, CaseResult, Report};
use serde_json::{json, Value as Json};

use crate::formats::{self, config_record, history_jsonl, pareto_csv, point_record};
use crate::parallel::{self, ParallelWorkload};
use crate::project::{assemble_file, Project};
use crate::transport::AnyTransport;

#[derive(Debug, Parser)]
#[command(name = "nanoop", version, about = "Define instructions with nOPs, fuse them, simulate and tune processors")]
pub struct Cli {
    /// Project manifest.
    #[arg(long, global = true, default_value = "nanoop.toml")]
    pub project: PathBuf,
    /// Print one JSON document instead of tables.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VerifyLevel {
    Instruction,
    Isa,
    Processor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimLevel {
    Isa,
    Uarch,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse every referenced project file.
    Check,
    /// Compile nOP function files and report their graphs.
    Compile {
        files: Vec<PathBuf>,
        /// Operand width, `name=bits`; instructions of the project ISA
        /// take their widths from the encoding.
        #[arg(long = "width", value_parser = parse_width)]
        widths: Vec<(String, u32)>,
    },
    /// Run the project's test cases.
    Verify {
        #[arg(long, value_enum)]
        level: VerifyLevel,
        /// Processor configurations for the processor level (default: all presets).
        #[arg(long)]
        config: Vec<String>,
        /// Use the ISA without fusion.
        #[arg(long)]
        no_fuse: bool,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Simulate programs.
    Sim {
        #[arg(long, value_enum)]
        level: SimLevel,
        #[arg(long, default_value = "small")]
        config: String,
        /// Programs to run (default: the project's programs).
        #[arg(long)]
        program: Vec<PathBuf>,
        #[arg(long)]
        no_fuse: bool,
        #[arg(long, default_value_t = 10_000_000)]
        max_instructions: u64,
        #[arg(long, default_value_t = 50_000_000)]
        max_cycles: u64,
    },
    /// Collect fusion patterns at a gain threshold and fuse the ISA.
    Fuse {
        #[arg(long)]
        gain: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_PATTERN_SIZE)]
        max_size: usize,
    },
    /// Search processor configurations for the best cycles x area.
    Tune {
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Directory for history.jsonl and pareto.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate an nOP function for an instruction from its description.
    Gen {
        #[arg(long)]
        target: String,
        /// `http`, `http://...`, `https://...` or `mock:<dir>`.
        #[arg(long)]
        transport: String,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Write one Verilog module per fused op of the project ISA.
    EmitRtl {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        gain: Option<f64>,
        #[arg(long, default_value_t = 2)]
        max_inputs: usize,
    },
    /// Summarize a search history file.
    Report {
        /// Print the Pareto front of this history.jsonl file.
        #[arg(long)]
        pareto: PathBuf,
        #[arg(long)]
        csv: bool,
    },
}

fn parse_width(s: &str) -> Result<(String, u32), String> {
    let (n, w) = s.split_once('=').ok_or("expected name=bits")?;
    let w: u32 = w.parse().map_err(|_| format!("`{w}` is not a width"))?;
    if w == 0 || w > 128 {
        return Err(format!("width {w} is outside 1..=128"));
    }
    Ok((n.trim().to_string(), w))
}

/// Runs the command line and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind::*;
            return match e.kind() {
                DisplayHelp | DisplayVersion | DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let _ = write!(err, "{e}");
                    2
                }
            };
        }
    };
    let mut o = Output { json: cli.json, text: String::new(), doc: Json::Null };
    let code = match execute(&cli, &mut o) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            return 2;
        }
    };
    if cli.json {
        let _ = writeln!(out, "{}", serde_json::to_string_pretty(&o.doc).expect("json"));
    } else {
        let _ = out.write_all(o.text.as_bytes());
    }
    code
}

struct Output {
    json: bool,
    text: String,
    doc: Json,
}

impl Output {
    fn line(&mut self, s: impl AsRef<str>) {
        if !self.json {
            self.text.push_str(s.as_ref());
            self.text.push('\n');
        }
    }
}

fn open(cli: &Cli) -> anyhow::Result<Project> {
    Project::open(&cli.project).with_context(|| format!("opening project {}", cli.project.display()))
}

fn execute(cli: &Cli, o: &mut Output) -> anyhow::Result<i32> {
    match &cli.command {
        Command::Check => {
            let p = open(cli)?;
            p.check()?;
            o.line(format!("{}: ok", p.path.display()));
            o.doc = json!({"project": p.path.display().to_string(), "ok": true});
            Ok(0)
        }
        Command::Compile { files, widths } => compile(cli, o, files, widths),
        Command::Verify { level, config, no_fuse, jobs } => verify(cli, o, *level, config, *no_fuse, *jobs),
        Command::Sim { level, config, program, no_fuse, max_instructions, max_cycles } => {
            sim(cli, o, *level, config, program, *no_fuse, *max_instructions, *max_cycles)
        }
        Command::Fuse { gain, max_size } => fuse(cli, o, *gain, *max_size),
        Command::Tune { budget, seed, jobs, out } => tune(cli, o, *budget, *seed, *jobs, out.as_deref()),
        Command::Gen { target, transport, samples, rounds, seed, jobs } => {
            gen(cli, o, target, transport, *samples, *rounds, *seed, *jobs)
        }
        Command::EmitRtl { out, gain, max_inputs } => emit_rtl(cli, o, out, *gain, *max_inputs),
        Command::Report { pareto, csv } => report(o, pareto, *csv),
    }
}

fn project_isa(p: &Project, no_fuse: bool) -> anyhow::Result<(Isa, formats::Timing)> {
    let m = p.isa()?;
    let t = p.timing()?;
    let isa = if no_fuse { m.isa.clone() } else { p.fused_isa(&m, &t, None)? };
    Ok((isa, t))
}

fn compile(cli: &Cli, o: &mut Output, files: &[PathBuf], widths: &[(String, u32)]) -> anyhow::Result<i32> {
    if files.is_empty() {
        bail!("compile: no input files");
    }
    // The project is optional here: it only supplies widths and timing.
    let project = if cli.project.is_file() { Some(open(cli)?) } else { None };
    let (isa, timing) = match &project {
        Some(p) => (Some(p.isa()?.isa), p.timing()?),
        None => (None, crate::data::timing()),
    };
    let registry = NopRegistry::new();
    let mut failed = false;
    let mut docs = Vec::new();
    for f in files {
        let src = formats::read(f)?;
        let name = nanoop_core::dsl::parse(&src).map(|a| a.name).unwrap_or_default();
        let mut w: BTreeMap<String, u32> = BTreeMap::new();
        if let Some(ins) = isa.as_ref().and_then(|i| i.by_name(&name).map(|id| i.instruction(id))) {
            w.extend(ins.encoding.operands.iter().map(|op| (op.name.clone(), op.width())));
        } else {
            for r in ["rd", "rs1", "rs2"] {
                w.insert(r.into(), 5);
            }
        }
        w.extend(widths.iter().cloned());
        match nanoop_core::dsl::compile_source(&src, &w, &registry) {
            Ok(c) => {
                let mut kinds: BTreeMap<String, usize> = BTreeMap::new();
                for n in c.graph.nodes() {
                    if let Op::Nop(k) = &n.op {
                        *kinds.entry(k.name().to_string()).or_default() += 1;
                    }
                }
                let delay = cycle_delay(&c.graph, &timing.table, DelayScope::Arithmetic).ok();
                o.line(format!("{}: {} compiled, {} nodes, arithmetic delay {}", f.display(), name, c.graph.len(), delay.map_or("?".into(), |d| d.to_string())));
                for (k, n) in &kinds {
                    o.line(format!("  {k:<14} {n}"));
                }
                for d in &c.warnings {
                    o.line(format!("  {d}"));
                }
                docs.push(json!({
                    "file": f.display().to_string(), "name": name, "ok": true, "nodes": c.graph.len(),
                    "nops": kinds, "arithmetic_cycles": delay,
                    "warnings": c.warnings.iter().map(|d| d.to_string()).collect::<Vec<_>>(),
                }));
            }
            Err(diags) => {
                failed = true;
                o.line(format!("{}: failed", f.display()));
                for d in &diags {
                    o.line(format!("  {d}"));
                }
                docs.push(json!({
                    "file": f.display().to_string(), "name": name, "ok": false,
                    "diagnostics": diags.iter().map(|d| d.to_string()).collect::<Vec<_>>(),
                }));
            }
        }
    }
    o.doc = json!({ "files": docs });
    Ok(failed as i32)
}

fn case_json(c: &CaseResult) -> Json {
    json!({
        "name": c.name, "passed": c.passed(), "error": c.error, "cycles": c.cycles,
        "mismatches": c.mismatches.iter().map(|m| json!({"field": m.field, "expected": m.expected, "actual": m.actual})).collect::<Vec<_>>(),
    })
}

fn print_cases(o: &mut Output, prefix: &str, cases: &[CaseResult]) {
    for c in cases {
        let cycles = c.cycles.map_or(String::new(), |n| format!(" ({n} cycles)"));
        o.line(format!("{prefix}{:<36} {}{cycles}", c.name, if c.passed() { "pass" } else { "FAIL" }));
        if let Some(e) = &c.error {
            o.line(format!("    error: {e}"));
        }
        for m in &c.mismatches {
            o.line(format!("    {}: expected {}, got {}", m.field, m.expected, m.actual));
        }
    }
}

fn verify(cli: &Cli, o: &mut Output, level: VerifyLevel, configs: &[String], no_fuse: bool, jobs: usize) -> anyhow::Result<i32> {
    let p = open(cli)?;
    let (isa, timing) = project_isa(&p, no_fuse)?;
    let tests = p.tests()?;
    let mut ok = true;
    match level {
        VerifyLevel::Instruction => {
            let mut results = Vec::new();
            for (name, case) in &tests.instruction {
                let id = isa.by_name(name).ok_or_else(|| anyhow!("test `{}` names unknown instruction `{name}`", case.name))?;
                let r = run_graph_case(&isa.instruction(id).graph, case);
                ok &= r.passed();
                results.push((name.clone(), r));
            }
            for (name, r) in &results {
                print_cases(o, &format!("{name:<12} "), std::slice::from_ref(r));
            }
            o.doc = json!({"level": "instruction", "passed": ok, "cases": results.iter().map(|(n, r)| {
                let mut j = case_json(r);
                j["instruction"] = n.clone().into();
                j
            }).collect::<Vec<_>>()});
        }
        VerifyLevel::Isa => {
            let report = parallel::verify_isa(&isa, &tests.program, jobs);
            ok = report.passed();
            print_cases(o, "", &report.cases);
            o.doc = json!({"level": "isa", "passed": ok, "cases": report.cases.iter().map(case_json).collect::<Vec<_>>()});
        }
        VerifyLevel::Processor => {
            let names: Vec<String> =
                if configs.is_empty() { ["small", "large", "giga"].map(String::from).to_vec() } else { configs.to_vec() };
            let mut docs = Vec::new();
            for n in &names {
                let cfg = p.config(n)?;
                let report: Report =
                    parallel::verify_processor(&isa, &cfg, &timing.table, &SimOptions::default(), &tests.program, jobs)?;
                ok &= report.passed();
                o.line(format!("[{n}]"));
                print_cases(o, "  ", &report.cases);
                docs.push(json!({"config": n, "cases": report.cases.iter().map(case_json).collect::<Vec<_>>()}));
            }
            o.doc = json!({"level": "processor", "passed": ok, "configs": docs});
        }
    }
    o.line(if ok { "all cases passed" } else { "some cases failed" });
    Ok(if ok { 0 } else { 1 })
}

#[allow(clippy::too_many_arguments)]
fn sim(
    cli: &Cli,
    o: &mut Output,
    level: SimLevel,
    config: &str,
    programs: &[PathBuf],
    no_fuse: bool,
    max_instructions: u64,
    max_cycles: u64,
) -> anyhow::Result<i32> {
    let p = open(cli)?;
    let (isa, timing) = project_isa(&p, no_fuse)?;
    let paths = if programs.is_empty() { p.program_paths() } else { programs.to_vec() };
    let cfg = p.config(config)?;
    let mut docs = Vec::new();
    let mut code = 0;
    for path in &paths {
        let prog = assemble_file(path, &isa)?;
        let shown = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        match level {
            SimLevel::Isa => {
                let r = isa_simulate(&isa, &prog, max_instructions, false).map_err(|e| anyhow!("{shown}: {e}"))?;
                let halted = r.termination == Termination::Halted;
                if !halted {
                    code = 1;
                }
                o.line(format!("{shown}: {} instructions{}", r.executed, if halted { "" } else { " (budget exhausted)" }));
                for (name, n) in &r.counts {
                    o.line(format!("  {name:<12} {n}"));
                }
                docs.push(json!({"program": shown, "executed": r.executed, "halted": halted, "counts": r.counts}));
            }
            SimLevel::Uarch => {
                let opts = SimOptions { max_cycles, seed: 0 };
                let r = simulate(&isa, &prog, &cfg, &timing.table, &opts).map_err(|e| anyhow!("{shown}: {e}"))?;
                let halted = r.status == SimStatus::Halted;
                if !halted {
                    code = 1;
                }
                o.line(format!(
                    "{shown}: {} cycles, {} retired, IPC {:.3}, {} mispredictions{}",
                    r.cycles,
                    r.retired,
                    r.ipc(),
                    r.mispredictions,
                    if halted { "" } else { " (cycle budget exhausted)" }
                ));
                for (lvl, s) in ["L1", "L2", "L3"].iter().zip(&r.cache) {
                    o.line(format!("  {lvl}: {} hits, {} misses, {} writebacks", s.hits, s.misses, s.writebacks));
                }
                let caches: Vec<Json> =
                    r.cache.iter().map(|s| json!({"hits": s.hits, "misses": s.misses, "writebacks": s.writebacks})).collect();
                docs.push(json!({
                    "program": shown, "cycles": r.cycles, "retired": r.retired, "retired_nops": r.retired_nops,
                    "mispredictions": r.mispredictions, "halted": halted, "caches": caches,
                    "dram_accesses": r.dram_accesses, "counts": r.counts,
                }));
            }
        }
    }
    let level = match level {
        SimLevel::Isa => "isa",
        SimLevel::Uarch => "uarch",
    };
    o.doc = json!({"level": level, "config": config_record(&cfg), "programs": docs});
    Ok(code)
}

fn fuse(cli: &Cli, o: &mut Output, gain: f64, max_size: usize) -> anyhow::Result<i32> {
    if !(0.0..=1.0).contains(&gain) {
        bail!("--gain must lie in [0, 1], got {gain}");
    }
    let p = open(cli)?;
    let m = p.isa()?;
    let t = p.timing()?;
    let collected = collect_patterns(m.isa.instructions().iter().map(|i| &i.graph), gain, &t.table, max_size)?;
    o.line(format!("{} patterns with gain >= {gain}", collected.len()));
    let mut pats = Vec::new();
    for c in &collected {
        let d = c.delay;
        o.line(format!(
            "  {:<10} size {}  {} -> {} cycles  gain {:.3}  {}",
            c.pattern.name,
            c.pattern.size(),
            d.init_cycles,
            d.opt_cycles,
            c.gain(),
            c.pattern.key
        ));
        pats.push(json!({"name": c.pattern.name, "key": c.pattern.key, "size": c.pattern.size(),
            "init_cycles": d.init_cycles, "opt_cycles": d.opt_cycles, "gain": c.gain()}));
    }
    let fused = nanoop_core::isa::auto_fuse(&m.isa, gain, &t.table, max_size)?;
    let mut changed = Vec::new();
    for (a, b) in m.isa.instructions().iter().zip(fused.instructions()) {
        if !b.is_fused() {
            continue;
        }
        let before = cycle_delay(&a.graph, &t.table, DelayScope::Arithmetic)?;
        let after = cycle_delay(&b.graph, &t.table, DelayScope::Arithmetic)?;
        let ops: Vec<String> = b
            .graph
            .nodes()
            .iter()
            .filter_map(|n| match &n.op {
                Op::Fused(f) => Some(f.pattern.name.clone()),
                _ => None,
            })
            .collect();
        o.line(format!("  {:<12} {before} -> {after} cycles  [{}]", b.name, ops.join(", ")));
        changed.push(json!({"instruction": b.name, "before": before, "after": after, "fused_ops": ops}));
    }
    o.doc = json!({"gain": gain, "max_size": max_size, "patterns": pats, "fused_instructions": changed});
    Ok(0)
}

fn tune(cli: &Cli, o: &mut Output, budget: Option<usize>, seed: Option<u64>, jobs: usize, out: Option<&Path>) -> anyhow::Result<i32> {
    let p = open(cli)?;
    let (isa, timing) = project_isa(&p, false)?;
    let run = p.dse()?;
    if run.benchmarks.is_empty() {
        bail!("the search settings list no benchmarks");
    }
    let programs =
        run.benchmarks.iter().map(|b| assemble_file(&b.program, &isa)).collect::<Result<Vec<_>, _>>()?;
    let (area, power) = p.ppa()?;
    let d = DseOptions::default();
    let opts = DseOptions {
        budget: budget.or(run.budget).unwrap_or(d.budget),
        parallelism: run.parallelism.unwrap_or(d.parallelism),
        seed: seed.or(run.seed).unwrap_or(d.seed),
        initial: run.initial.unwrap_or(d.initial),
        pool: run.pool.unwrap_or(d.pool),
        forest: d.forest,
    };
    let workload = Workload {
        isa: &isa,
        programs: &programs,
        weights: run.benchmarks.iter().map(|b| b.weight).collect(),
        table: &timing.table,
        area,
        power,
        sim: SimOptions { max_cycles: run.max_cycles.unwrap_or(SimOptions::default().max_cycles), seed: 0 },
    };
    let eval = ParallelWorkload::new(workload, jobs);
    let cost = |m: &Measured| area_efficiency(m);
    let res = auto_config(&run.space, &eval, &cost, &opts)?;
    let b = &res.best;
    o.line(format!("space {} points, {} evaluated", run.space.size(), res.history.len()));
    o.line(format!("best: cycles {} area {:.1} cost {:.6e}", b.cycles(), b.area(), b.cost));
    o.line(format!("  {}", b.cfg.describe()));
    o.line(format!("pareto front: {} points", res.pareto.len()));
    for q in &res.pareto {
        o.line(format!("  cycles {:<10} area {:<14.1} {}", q.cycles(), q.area(), q.cfg.describe()));
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        std::fs::write(dir.join("history.jsonl"), history_jsonl(&res.history))?;
        std::fs::write(dir.join("pareto.csv"), pareto_csv(&res.pareto))?;
        o.line(format!("wrote {} and {}", dir.join("history.jsonl").display(), dir.join("pareto.csv").display()));
    }
    o.doc = json!({
        "space_size": run.space.size(), "evaluated": res.history.len(), "seed": opts.seed, "budget": opts.budget,
        "best": point_record(b), "pareto": res.pareto.iter().map(point_record).collect::<Vec<_>>(),
    });
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn gen(
    cli: &Cli,
    o: &mut Output,
    target: &str,
    transport: &str,
    samples: Option<usize>,
    rounds: Option<usize>,
    seed: Option<u64>,
    jobs: usize,
) -> anyhow::Result<i32> {
    let p = open(cli)?;
    let m = p.isa()?;
    let custom = m
        .custom
        .iter()
        .find(|c| c.name == target)
        .ok_or_else(|| anyhow!("`{target}` is not an instruction declared in the ISA manifest"))?;
    if custom.description.trim().is_empty() {
        bail!("instruction `{target}` has no description to generate from");
    }
    let (mut cfg, default_seed) = p.generation_config();
    if let Some(s) = samples {
        cfg.samples = s;
    }
    if let Some(r) = rounds {
        cfg.max_feedback_rounds = r;
    }
    let seed = seed.unwrap_or(default_seed);
    let parts = p.prompt_parts()?;
    let shots = &parts.shots[..cfg.shots.min(parts.shots.len())];
    let prompt = build_prompt(&parts.template, &nop_reference(), &parts.regulations, shots, &custom.description);
    let widths: BTreeMap<String, u32> = custom.encoding.operands.iter().map(|op| (op.name.clone(), op.width())).collect();
    let tests = p.tests()?.for_instruction(target);
    let t = AnyTransport::parse(transport, &p.root).map_err(|e| anyhow!(e))?;
    let sel = parallel::sample_cluster_select(&cfg, &t, &prompt, &widths, &NopRegistry::new(), seed, Some(&tests), jobs)?;
    let cluster_of: BTreeMap<usize, usize> =
        sel.clusters.iter().enumerate().flat_map(|(k, c)| c.iter().map(move |&i| (i, k))).collect();
    let passes = |i: usize| -> Option<bool> {
        let g = sel.candidates[i].graph.as_ref()?;
        Some(!tests.is_empty() && tests.iter().all(|c| run_graph_case(g, c).passed()))
    };
    let mut rows = Vec::new();
    for (i, c) in sel.candidates.iter().enumerate() {
        let cl = cluster_of.get(&i).copied();
        let pass = passes(i);
        o.line(format!(
            "sample {:<2} calls {}  {:<9} cluster {:<3} tests {}",
            c.sample,
            c.calls,
            if c.compiled() { "compiled" } else { "failed" },
            cl.map_or("-".into(), |k| k.to_string()),
            match pass {
                Some(true) => "pass",
                Some(false) => "fail",
                None => "-",
            }
        ));
        rows.push(json!({"sample": c.sample, "calls": c.calls, "compiled": c.compiled(), "cluster": cl, "passes_tests": pass}));
    }
    let sizes: Vec<usize> = sel.clusters.iter().map(Vec::len).collect();
    o.line(format!("clusters: {sizes:?}"));
    let correct = (0..sel.candidates.len()).filter(|&i| passes(i) == Some(true)).count() as u32;
    let p1 = if tests.is_empty() { None } else { pass_at_1(&[(correct, cfg.samples as u32)]).ok() };
    if let Some(v) = p1 {
        o.line(format!("pass@1 over {} samples: {v:.4}", cfg.samples));
    }
    let chosen = sel.selected();
    let (code, selected_pass) = match chosen {
        None => {
            o.line("no sample compiled");
            (1, None)
        }
        Some(c) => {
            let i = sel.selected.expect("selected index");
            let pass = passes(i);
            o.line(format!("selected sample {}:", c.sample));
            o.line(c.source.trim_end());
            let ok = tests.is_empty() || pass == Some(true);
            o.line(if tests.is_empty() {
                "no test cases for this instruction"
            } else if ok {
                "selected function passes every test case"
            } else {
                "selected function FAILS its test cases"
            });
            (if ok { 0 } else { 1 }, pass)
        }
    };
    o.doc = json!({
        "target": target, "samples": rows, "clusters": sel.clusters, "cluster_sizes": sizes,
        "selected": chosen.map(|c| c.sample), "source": chosen.map(|c| c.source.clone()),
        "selected_passes_tests": selected_pass, "pass_at_1": p1, "test_cases": tests.len(),
    });
    Ok(code)
}

fn emit_rtl(cli: &Cli, o: &mut Output, out: &Path, gain: Option<f64>, max_inputs: usize) -> anyhow::Result<i32> {
    let p = open(cli)?;
    let m = p.isa()?;
    let t = p.timing()?;
    let isa = p.fused_isa(&m, &t, gain)?;
    let ops = isa.used_patterns();
    if ops.is_empty() {
        o.line("no fused ops in the ISA (set [fusion] in the ISA manifest or pass --gain)");
    }
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let opts = EmitOptions { max_data_inputs: max_inputs, params: None };
    let (mut written, mut skipped) = (Vec::new(), Vec::new());
    for op in &ops {
        match emit_fused_op(op, &opts) {
            Ok(text) => {
                let file = out.join(format!("{}.v", file_stem(&op.pattern.key)));
                std::fs::write(&file, text).with_context(|| format!("writing {}", file.display()))?;
                o.line(format!("wrote {} ({})", file.display(), module_name(&op.pattern)));
                written.push(json!({"pattern": op.pattern.name, "key": op.pattern.key, "module": module_name(&op.pattern),
                    "file": file.display().to_string()}));
            }
            Err(e @ EmitError::TooManyInputs { .. }) => {
                o.line(format!("skipped {}: {e}", op.pattern.name));
                skipped.push(json!({"pattern": op.pattern.name, "key": op.pattern.key, "reason": e.to_string()}));
            }
            Err(e) => return Err(anyhow!("{}: {e}", op.pattern.key)),
        }
    }
    o.doc = json!({"written": written, "skipped": skipped});
    Ok(0)
}

fn point_from_record(v: &Json) -> anyhow::Result<DesignPoint> {
    let num = |k: &str| v.get(k).and_then(Json::as_f64);
    let int = |k: &str| v.get(k).and_then(Json::as_u64).ok_or_else(|| anyhow!("record lacks `{k}`"));
    let cfg_json = v.get("config").and_then(Json::as_object).ok_or_else(|| anyhow!("record lacks `config`"))?;
    let mut table = toml::Table::new();
    for (k, x) in cfg_json {
        let tv = match x {
            Json::String(s) => toml::Value::String(s.clone()),
            Json::Number(n) => toml::Value::Integer(n.as_i64().ok_or_else(|| anyhow!("config field `{k}`"))?),
            _ => bail!("config field `{k}` has an unsupported value"),
        };
        table.insert(k.clone(), tv);
    }
    let cfg = formats::config_from_table(&table, Path::new("<history record>"))?;
    let measured = match (num("cycles"), num("area")) {
        (Some(cycles), Some(area)) => Some(Measured {
            per_benchmark: v
                .get("per_benchmark")
                .and_then(Json::as_array)
                .map(|a| a.iter().filter_map(Json::as_u64).collect())
                .unwrap_or_default(),
            cycles,
            area,
            power: num("power").unwrap_or(f64::NAN),
        }),
        _ => None,
    };
    Ok(DesignPoint {
        seq: int("seq")? as usize,
        round: int("round")? as usize,
        index: int("index")?,
        cfg,
        measured,
        error: v.get("error").and_then(Json::as_str).map(String::from),
        cost: num("cost").unwrap_or(f64::INFINITY),
    })
}

fn report(o: &mut Output, path: &Path, csv: bool) -> anyhow::Result<i32> {
    let text = formats::read(path)?;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let v: Json = serde_json::from_str(line).with_context(|| format!("{}:{}", path.display(), i + 1))?;
        points.push(point_from_record(&v).with_context(|| format!("{}:{}", path.display(), i + 1))?);
    }
    let front = pareto_front(&points);
    if csv {
        o.text.push_str(&pareto_csv(&front));
    } else {
        o.line(format!("{} points, {} on the Pareto front", points.len(), front.len()));
        for q in &front {
            o.line(format!("  cycles {:<10} area {:<14.1} cost {:<12.6e} {}", q.cycles(), q.area(), q.cost, q.cfg.describe()));
        }
    }
    o.doc = json!({"points": points.len(), "pareto": front.iter().map(point_record).collect::<Vec<_>>()});
    Ok(0)
}
