//! TOML inputs (timing tables, coefficients, processor configs, ISA
//! manifests, test cases, search settings) and the JSON-lines and CSV
//! outputs of a search.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nanoop_core::dse::{DesignPoint, Field, Space, Value, POLICY_FIELD};
use nanoop_core::isa::{rv64, Encoding, FixedField, Instruction, Isa, OperandField};
use nanoop_core::nop::NopRegistry;
use nanoop_core::ppa::Coefficients;
use nanoop_core::timing::{FixedLatency, TimingEntry, TimingTable};
use nanoop_core::uarch::{MemLatency, ProcessorConfig, Replacement};
use nanoop_core::verify::{Assertion, Expect, InstructionTestCase, ProgramTestCase};
use nanoop_core::MachineState;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Toml { path: PathBuf, source: toml::de::Error },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

impl FormatError {
    pub fn invalid(path: &Path, message: impl Into<String>) -> Self {
        FormatError::Invalid { path: path.to_path_buf(), message: message.into() }
    }
}

pub fn read(path: &Path) -> Result<String, FormatError> {
    std::fs::read_to_string(path).map_err(|source| FormatError::Io { path: path.to_path_buf(), source })
}

pub fn parse_toml<T: serde::de::DeserializeOwned>(text: &str, path: &Path) -> Result<T, FormatError> {
    toml::from_str(text).map_err(|source| FormatError::Toml { path: path.to_path_buf(), source })
}

/// A 64-bit value written as a TOML integer or as a `0x`/`0b`/decimal string,
/// since TOML integers stop at 2^63 - 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Int(i64),
    Text(#[serde(deserialize_with = "de_u64_text")] u64),
}

impl Num {
    pub fn get(self) -> u64 {
        match self {
            Num::Int(v) => v as u64,
            Num::Text(v) => v,
        }
    }
}

pub fn parse_u64(s: &str) -> Option<u64> {
    let s = s.trim().replace('_', "");
    if let Some(h) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        u64::from_str_radix(h, 16).ok()
    } else if let Some(b) = s.strip_prefix("0b") {
        u64::from_str_radix(b, 2).ok()
    } else if let Some(d) = s.strip_prefix('-') {
        d.parse::<u64>().ok().map(|v| v.wrapping_neg())
    } else {
        s.parse().ok()
    }
}

fn de_u64_text<'de, D: serde::Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
    let s = String::deserialize(d)?;
    parse_u64(&s).ok_or_else(|| serde::de::Error::custom(format!("`{s}` is not a 64-bit value")))
}

fn register_index(name: &str) -> Option<usize> {
    name.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()).filter(|r| *r < 32)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemBlock {
    pub addr: Num,
    /// Hex bytes in address order.
    pub bytes: String,
}

impl MemBlock {
    fn decode(&self, path: &Path) -> Result<(u64, Vec<u8>), FormatError> {
        let clean: String = self.bytes.chars().filter(|c| !c.is_whitespace() && *c != '_').collect();
        let bytes = hex::decode(&clean).map_err(|e| FormatError::invalid(path, format!("bytes `{}`: {e}", self.bytes)))?;
        Ok((self.addr.get(), bytes))
    }
}

fn regs(map: &BTreeMap<String, Num>, path: &Path) -> Result<Vec<(usize, u64)>, FormatError> {
    map.iter()
        .map(|(k, v)| {
            register_index(k)
                .map(|i| (i, v.get()))
                .ok_or_else(|| FormatError::invalid(path, format!("`{k}` is not a register name (x0..x31)")))
        })
        .collect()
}

// ---------------------------------------------------------------- timing

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowSource {
    Measured,
    Calibration,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimingRow {
    delay_ns: f64,
    area_um2: f64,
    source: RowSource,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct FixedRow {
    reg_read: u32,
    reg_write: u32,
    mem: u32,
    pc: u32,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimingFile {
    clock_ns: f64,
    fixed: Option<FixedRow>,
    nop: BTreeMap<String, TimingRow>,
}

/// A timing table plus the provenance of each row.
#[derive(Debug, Clone)]
pub struct Timing {
    pub table: TimingTable,
    pub sources: BTreeMap<String, RowSource>,
}

pub fn parse_timing(text: &str, path: &Path) -> Result<Timing, FormatError> {
    let f: TimingFile = parse_toml(text, path)?;
    if !(f.clock_ns.is_finite() && f.clock_ns > 0.0) {
        return Err(FormatError::invalid(path, "clock_ns must be positive"));
    }
    let mut table = TimingTable::new(f.clock_ns);
    if let Some(x) = f.fixed {
        table.fixed = FixedLatency { reg_read: x.reg_read, reg_write: x.reg_write, mem: x.mem, pc: x.pc };
    }
    let mut sources = BTreeMap::new();
    for (name, row) in f.nop {
        if !(row.delay_ns.is_finite() && row.delay_ns > 0.0 && row.area_um2.is_finite() && row.area_um2 >= 0.0) {
            return Err(FormatError::invalid(path, format!("`{name}`: delay must be positive and area non-negative")));
        }
        table.insert(name.clone(), TimingEntry::new(row.delay_ns, row.area_um2));
        sources.insert(name, row.source);
    }
    Ok(Timing { table, sources })
}

// ---------------------------------------------------------------- ppa

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PpaFile {
    area: BTreeMap<String, f64>,
    power: BTreeMap<String, f64>,
}

fn coefficients(map: &BTreeMap<String, f64>, what: &str, path: &Path) -> Result<Coefficients, FormatError> {
    let mut c = Coefficients::default();
    for (k, v) in map {
        if !c.set(k, *v) {
            return Err(FormatError::invalid(path, format!("[{what}]: unknown coefficient `{k}`")));
        }
    }
    if let Some((name, _)) = c.fields().into_iter().find(|(n, _)| !map.contains_key(*n)) {
        return Err(FormatError::invalid(path, format!("[{what}]: missing coefficient `{name}`")));
    }
    c.validate().map_err(|n| FormatError::invalid(path, format!("[{what}]: `{n}` must be finite and non-negative")))?;
    Ok(c)
}

/// Area and power coefficients.
pub fn parse_ppa(text: &str, path: &Path) -> Result<(Coefficients, Coefficients), FormatError> {
    let f: PpaFile = parse_toml(text, path)?;
    Ok((coefficients(&f.area, "area", path)?, coefficients(&f.power, "power", path)?))
}

// ---------------------------------------------------------------- processor configs

/// A preset name, or a TOML table with an optional `preset` base and field
/// overrides.
pub fn parse_config(text: &str, path: &Path) -> Result<ProcessorConfig, FormatError> {
    let table: toml::Table = parse_toml(text, path)?;
    config_from_table(&table, path)
}

pub fn config_from_table(table: &toml::Table, path: &Path) -> Result<ProcessorConfig, FormatError> {
    let bad = |m: String| FormatError::invalid(path, m);
    let mut cfg = match table.get("preset") {
        None => ProcessorConfig::small(),
        Some(toml::Value::String(p)) => ProcessorConfig::preset(p).ok_or_else(|| bad(format!("unknown preset `{p}`")))?,
        Some(_) => return Err(bad("`preset` must be a string".into())),
    };
    let int = |k: &str, v: &toml::Value| -> Result<u32, FormatError> {
        v.as_integer().and_then(|i| u32::try_from(i).ok()).ok_or_else(|| bad(format!("`{k}` must be a non-negative integer")))
    };
    for (k, v) in table {
        match k.as_str() {
            "preset" => {}
            POLICY_FIELD => {
                let s = v.as_str().ok_or_else(|| bad(format!("`{k}` must be a string")))?;
                cfg.btb_replace = Replacement::from_name(s).ok_or_else(|| bad(format!("unknown replacement policy `{s}`")))?;
            }
            "redirect_penalty" => cfg.redirect_penalty = int(k, v)?,
            "forward_latency" => cfg.forward_latency = int(k, v)?,
            "mem_latency" => {
                let t = v.as_table().ok_or_else(|| bad("`mem_latency` must be a table".into()))?;
                let mut m = cfg.mem_latency;
                for (lk, lv) in t {
                    let slot = match lk.as_str() {
                        "l1" => &mut m.l1,
                        "l2" => &mut m.l2,
                        "l3" => &mut m.l3,
                        "dram" => &mut m.dram,
                        _ => return Err(bad(format!("unknown latency `{lk}`"))),
                    };
                    *slot = int(lk, lv)?;
                }
                cfg.mem_latency = m;
            }
            _ => {
                let n = int(k, v)? as usize;
                if !cfg.set_numeric(k, n) {
                    return Err(bad(format!("unknown configuration field `{k}`")));
                }
            }
        }
    }
    cfg.validate().map_err(|e| bad(e.to_string()))?;
    Ok(cfg)
}

/// Every field of `cfg` as a flat map, in a fixed order.
pub fn config_record(cfg: &ProcessorConfig) -> serde_json::Map<String, serde_json::Value> {
    let mut m = serde_json::Map::new();
    m.insert(POLICY_FIELD.into(), cfg.btb_replace.name().into());
    for (name, v, _) in cfg.numeric_fields() {
        m.insert(name.into(), v.into());
    }
    m
}

/// TOML text that [`parse_config`] reads back to `cfg`.
pub fn config_to_toml(cfg: &ProcessorConfig) -> String {
    let mut s = format!("{POLICY_FIELD} = \"{}\"\n", cfg.btb_replace.name());
    for (name, v, _) in cfg.numeric_fields() {
        s.push_str(&format!("{name} = {v}\n"));
    }
    s.push_str(&format!("redirect_penalty = {}\nforward_latency = {}\n", cfg.redirect_penalty, cfg.forward_latency));
    let MemLatency { l1, l2, l3, dram } = cfg.mem_latency;
    s.push_str(&format!("\n[mem_latency]\nl1 = {l1}\nl2 = {l2}\nl3 = {l3}\ndram = {dram}\n"));
    s
}

// ---------------------------------------------------------------- ISA manifest

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct OperandRow {
    name: String,
    /// `[hi, lo]` segments, most significant first.
    bits: Vec<(u32, u32)>,
    #[serde(default)]
    signed: bool,
    #[serde(default)]
    scale: u32,
    #[serde(default)]
    pcrel: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstructionRow {
    source: PathBuf,
    syntax: Option<String>,
    #[serde(default)]
    description: String,
    /// `[hi, lo, value]` fixed bit fields.
    fixed: Vec<(u32, u32, Num)>,
    #[serde(default)]
    operand: Vec<OperandRow>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionRow {
    pub gain: f64,
    pub max_pattern_size: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct IsaFile {
    extensions: Vec<String>,
    #[serde(default)]
    instruction: Vec<InstructionRow>,
    fusion: Option<FusionRow>,
}

/// An instruction declared in a manifest rather than built in.
#[derive(Debug, Clone)]
pub struct CustomInstruction {
    pub name: String,
    pub description: String,
    pub source_path: PathBuf,
    pub encoding: Encoding,
    pub syntax: Option<String>,
}

/// An unfused instruction set and the fusion settings to apply to it.
#[derive(Debug, Clone)]
pub struct IsaManifest {
    pub isa: Isa,
    pub custom: Vec<CustomInstruction>,
    pub fusion: Option<FusionRow>,
}

/// Reads an ISA manifest; instruction sources are relative to its directory.
pub fn load_isa(path: &Path) -> Result<IsaManifest, FormatError> {
    let f: IsaFile = parse_toml(&read(path)?, path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut instrs: Vec<Instruction> = Vec::new();
    for ext in &f.extensions {
        match ext.as_str() {
            "rv64i" => instrs.extend(rv64::base_instructions()),
            "zknh" => instrs.extend(rv64::zknh_instructions()),
            other => return Err(FormatError::invalid(path, format!("unknown extension `{other}` (rv64i, zknh)"))),
        }
    }
    let registry = NopRegistry::new();
    let mut custom = Vec::new();
    for row in f.instruction {
        let source_path = dir.join(&row.source);
        let source = read(&source_path)?;
        let fixed = row.fixed.iter().map(|(hi, lo, v)| FixedField { hi: *hi, lo: *lo, value: v.get() as u32 }).collect();
        let operands = row
            .operand
            .iter()
            .map(|o| {
                let mut f = OperandField::new(o.name.clone(), o.bits.clone());
                if o.signed {
                    f = f.signed();
                }
                if o.scale > 0 {
                    f = f.scaled(o.scale);
                }
                if o.pcrel {
                    f = f.pcrel();
                }
                f
            })
            .collect();
        let encoding = Encoding::new(fixed, operands).map_err(|e| FormatError::invalid(&source_path, e.to_string()))?;
        let ins = nanoop_core::isa::instantiate_instruction(&source, encoding.clone(), row.syntax.clone(), &registry)
            .map_err(|e| FormatError::invalid(&source_path, e.to_string()))?;
        custom.push(CustomInstruction {
            name: ins.name.clone(),
            description: row.description,
            source_path,
            encoding,
            syntax: row.syntax,
        });
        instrs.push(ins);
    }
    let isa = Isa::new(instrs).map_err(|e| FormatError::invalid(path, e.to_string()))?;
    if let Some(fu) = &f.fusion {
        if !(0.0..=1.0).contains(&fu.gain) {
            return Err(FormatError::invalid(path, "fusion gain must lie in [0, 1]"));
        }
    }
    Ok(IsaManifest { isa, custom, fusion: f.fusion })
}

// ---------------------------------------------------------------- test cases

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Expected {
    #[serde(default)]
    regs: BTreeMap<String, Num>,
    #[serde(default)]
    memory: Vec<MemBlock>,
    pc: Option<Num>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseRow {
    instruction: String,
    name: String,
    #[serde(default)]
    operands: BTreeMap<String, Num>,
    pc: Option<Num>,
    #[serde(default)]
    regs: BTreeMap<String, Num>,
    #[serde(default)]
    memory: Vec<MemBlock>,
    #[serde(default)]
    expect: Expected,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProgramRow {
    name: String,
    source: PathBuf,
    #[serde(default = "default_max_instructions")]
    max_instructions: u64,
    #[serde(default)]
    data: Vec<MemBlock>,
    #[serde(default)]
    expect: Expected,
}

fn default_max_instructions() -> u64 {
    1_000_000
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TestFile {
    #[serde(default)]
    case: Vec<CaseRow>,
    #[serde(default)]
    program: Vec<ProgramRow>,
}

/// Instruction-level cases keyed by instruction name, and program cases.
#[derive(Debug, Clone, Default)]
pub struct TestSuite {
    pub instruction: Vec<(String, InstructionTestCase)>,
    pub program: Vec<ProgramTestCase>,
}

impl TestSuite {
    pub fn for_instruction(&self, name: &str) -> Vec<InstructionTestCase> {
        self.instruction.iter().filter(|(n, _)| n == name).map(|(_, c)| c.clone()).collect()
    }

    pub fn extend(&mut self, other: TestSuite) {
        self.instruction.extend(other.instruction);
        self.program.extend(other.program);
    }
}

/// Reads a test-case file; program sources are relative to its directory.
pub fn load_tests(path: &Path) -> Result<TestSuite, FormatError> {
    let f: TestFile = parse_toml(&read(path)?, path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut out = TestSuite::default();
    for c in f.case {
        let mut initial = MachineState::new(c.pc.map_or(0x1000, Num::get));
        for (i, v) in regs(&c.regs, path)? {
            initial.set_reg(i, v);
        }
        for m in &c.memory {
            let (addr, bytes) = m.decode(path)?;
            for (k, b) in bytes.into_iter().enumerate() {
                initial.write_byte(addr + k as u64, b);
            }
        }
        let mut expect: Vec<Expect> =
            regs(&c.expect.regs, path)?.into_iter().map(|(index, value)| Expect::Reg { index, value }).collect();
        for m in &c.expect.memory {
            let (addr, bytes) = m.decode(path)?;
            expect.push(Expect::Mem { addr, bytes });
        }
        if let Some(pc) = c.expect.pc {
            expect.push(Expect::Pc(pc.get()));
        }
        let operands = c.operands.into_iter().map(|(k, v)| (k, v.get())).collect();
        out.instruction.push((c.instruction, InstructionTestCase { name: c.name, initial, operands, expect }));
    }
    for p in f.program {
        let source = read(&dir.join(&p.source))?;
        let data = p.data.iter().map(|m| m.decode(path)).collect::<Result<_, _>>()?;
        let mut assertions: Vec<Assertion> =
            regs(&p.expect.regs, path)?.into_iter().map(|(index, value)| Assertion::Reg { index, value }).collect();
        for m in &p.expect.memory {
            let (addr, bytes) = m.decode(path)?;
            assertions.push(Assertion::Mem { addr, bytes });
        }
        if p.expect.pc.is_some() {
            return Err(FormatError::invalid(path, format!("program `{}`: pc expectations are not supported", p.name)));
        }
        out.program.push(ProgramTestCase { name: p.name, source, data, assertions, max_instructions: p.max_instructions });
    }
    Ok(out)
}

// ---------------------------------------------------------------- search settings

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Benchmark {
    pub program: PathBuf,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct DseFile {
    #[serde(default = "default_base")]
    base: String,
    budget: Option<usize>,
    parallelism: Option<usize>,
    seed: Option<u64>,
    initial: Option<usize>,
    pool: Option<usize>,
    max_cycles: Option<u64>,
    /// Restricted candidate sets; absent means every tunable field.
    space: Option<toml::Table>,
    #[serde(default)]
    benchmark: Vec<Benchmark>,
}

fn default_base() -> String {
    "small".into()
}

#[derive(Debug, Clone)]
pub struct DseRun {
    pub space: Space,
    pub budget: Option<usize>,
    pub parallelism: Option<usize>,
    pub seed: Option<u64>,
    pub initial: Option<usize>,
    pub pool: Option<usize>,
    pub max_cycles: Option<u64>,
    /// Benchmark paths, relative to the settings file.
    pub benchmarks: Vec<Benchmark>,
}

pub fn load_dse(path: &Path) -> Result<DseRun, FormatError> {
    let f: DseFile = parse_toml(&read(path)?, path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let bad = |m: String| FormatError::invalid(path, m);
    let base = ProcessorConfig::preset(&f.base).ok_or_else(|| bad(format!("unknown preset `{}`", f.base)))?;
    let space = match &f.space {
        None => Space::full(base),
        Some(t) => {
            let mut fields = Vec::new();
            for (name, v) in t {
                let arr = v.as_array().ok_or_else(|| bad(format!("space.{name} must be a list")))?;
                let values = arr
                    .iter()
                    .map(|x| match x {
                        toml::Value::Integer(i) if *i >= 0 => Ok(Value::Num(*i as usize)),
                        toml::Value::String(s) => {
                            Replacement::from_name(s).map(Value::Policy).ok_or_else(|| bad(format!("space.{name}: `{s}`")))
                        }
                        other => Err(bad(format!("space.{name}: unsupported value {other}"))),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                fields.push(Field { name: name.clone(), values });
            }
            Space::new(base, fields).map_err(|e| bad(e.to_string()))?
        }
    };
    let benchmarks =
        f.benchmark.into_iter().map(|b| Benchmark { program: dir.join(b.program), weight: b.weight }).collect();
    Ok(DseRun {
        space,
        budget: f.budget,
        parallelism: f.parallelism,
        seed: f.seed,
        initial: f.initial,
        pool: f.pool,
        max_cycles: f.max_cycles,
        benchmarks,
    })
}

// ---------------------------------------------------------------- search output

fn finite(v: f64) -> serde_json::Value {
    if v.is_finite() {
        v.into()
    } else {
        serde_json::Value::Null
    }
}

/// One design point as a JSON object. Non-finite numbers become `null`.
pub fn point_record(p: &DesignPoint) -> serde_json::Value {
    let mut m = serde_json::Map::new();
    m.insert("seq".into(), p.seq.into());
    m.insert("round".into(), p.round.into());
    m.insert("index".into(), p.index.into());
    m.insert("config".into(), config_record(&p.cfg).into());
    match &p.measured {
        Some(x) => {
            m.insert("cycles".into(), finite(x.cycles));
            m.insert("per_benchmark".into(), x.per_benchmark.clone().into());
            m.insert("area".into(), finite(x.area));
            m.insert("power".into(), finite(x.power));
        }
        None => {
            m.insert("error".into(), p.error.clone().unwrap_or_default().into());
        }
    }
    m.insert("cost".into(), finite(p.cost));
    m.into()
}

/// Search history as JSON lines, one point per line in evaluation order.
pub fn history_jsonl(points: &[DesignPoint]) -> String {
    let mut s = String::new();
    for p in points {
        s.push_str(&point_record(p).to_string());
        s.push('\n');
    }
    s
}

/// Pareto points as CSV: scores first, then every configuration field.
pub fn pareto_csv(points: &[DesignPoint]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["index".to_string(), "cycles".into(), "area".into(), "power".into(), "cost".into()];
    header.push(POLICY_FIELD.into());
    header.extend(ProcessorConfig::small().numeric_fields().iter().map(|(n, _, _)| n.to_string()));
    w.write_record(&header).expect("in-memory write");
    for p in points {
        let m = p.measured.as_ref();
        let mut row = vec![
            p.index.to_string(),
            m.map_or(String::new(), |x| x.cycles.to_string()),
            m.map_or(String::new(), |x| x.area.to_string()),
            m.map_or(String::new(), |x| x.power.to_string()),
            p.cost.to_string(),
            p.cfg.btb_replace.name().to_string(),
        ];
        row.extend(p.cfg.numeric_fields().iter().map(|(_, v, _)| v.to_string()));
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}
