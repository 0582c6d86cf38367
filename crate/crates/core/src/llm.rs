//! Generating nOP functions with a language model.
//!
//! A prompt (nOP reference, writing rules, worked examples, target prose) is
//! sent through a [`Transport`]. Replies that fail to compile are sent back
//! with the compiler diagnostics for a bounded number of rounds. Several
//! independent samples are then run on shared random machine states and
//! grouped by identical behaviour; the largest group wins.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::bitvec::BitVec;
use crate::dfg::Graph;
use crate::dsl::{compile_source, render, Diagnostic};
use crate::nop::{NopKind, NopRegistry};
use crate::state::{MachineState, StateDelta};
use crate::verify::{run_graph_case, InstructionTestCase};

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationConfig {
    pub model: String,
    pub shots: usize,
    pub temperature: f64,
    pub max_feedback_rounds: usize,
    pub samples: usize,
    /// Machine states each compiled sample is run on for clustering.
    pub random_states: usize,
    /// Extra attempts after a transport error, per call.
    pub retries: usize,
    /// Drop samples that fail the available test cases before clustering.
    pub prefilter: bool,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            model: String::new(),
            shots: 3,
            temperature: 0.3,
            max_feedback_rounds: 3,
            samples: 9,
            random_states: 16,
            retries: 2,
            prefilter: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

/// One completion request. `sample` and `attempt` identify the call within
/// a run; network transports ignore them, replay transports key on them.
#[derive(Debug, Clone, Copy)]
pub struct Request<'a> {
    pub model: &'a str,
    pub temperature: f64,
    pub messages: &'a [Message],
    pub sample: usize,
    pub attempt: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("transport: {0}")]
pub struct TransportError(pub String);

/// Text-in, text-out completion service.
pub trait Transport {
    fn complete(&self, req: &Request<'_>) -> Result<String, TransportError>;
}

impl<F: Fn(&Request<'_>) -> Result<String, TransportError>> Transport for F {
    fn complete(&self, req: &Request<'_>) -> Result<String, TransportError> {
        self(req)
    }
}

/// A worked example for the prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shot {
    pub prose: String,
    pub source: String,
}

/// Fills `{NOP_SPEC}`, `{REGULATIONS}`, `{EXAMPLES}` and `{TARGET}` in one
/// pass; placeholder-like text inside the inserted blocks is left alone.
/// With no shots the examples block is empty.
pub fn build_prompt(template: &str, nop_spec: &str, regulations: &str, shots: &[Shot], target: &str) -> String {
    let mut examples = String::new();
    if !shots.is_empty() {
        examples.push_str("Examples:\n\n");
        for (i, s) in shots.iter().enumerate() {
            examples.push_str(&alloc::format!(
                "Example {}\nSpecification:\n{}\nnOP function:\n```python\n{}\n```\n\n",
                i + 1,
                s.prose.trim_end(),
                s.source.trim_end()
            ));
        }
    }
    let mut out = String::with_capacity(template.len() + nop_spec.len() + target.len() + examples.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open..];
        let value = [
            ("{NOP_SPEC}", nop_spec),
            ("{REGULATIONS}", regulations),
            ("{EXAMPLES}", examples.as_str()),
            ("{TARGET}", target),
        ]
        .into_iter()
        .find(|(k, _)| after.starts_with(k));
        match value {
            Some((k, v)) => {
                out.push_str(v);
                rest = &after[k.len()..];
            }
            None => {
                out.push('{');
                rest = &after[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

/// Reference text for every built-in nOP, one per line.
pub fn nop_reference() -> String {
    let mut s = String::new();
    for k in NopKind::ALL {
        let (args, what) = describe(*k);
        s.push_str(&alloc::format!("{}({}): {}\n", k.name(), args, what));
    }
    s
}

fn describe(k: NopKind) -> (&'static str, &'static str) {
    use NopKind::*;
    match k {
        RegRead => ("X", "value of register X"),
        RegWrite => ("X, Y", "write Y to register X"),
        MemRead => ("X, Y", "read Y bytes at address X, little-endian"),
        MemWrite => ("X, Y, Z", "write the low Y bytes of Z at address X"),
        IncPc => ("PC", "advance the PC to the next instruction (PC + 4)"),
        UpdatePc => ("X", "set the PC to X"),
        CondUpdatePc => ("C, X, PC", "set the PC to X if C is 1, else PC + 4"),
        And => ("X, Y", "bitwise and"),
        Or => ("X, Y", "bitwise or"),
        Xor => ("X, Y", "bitwise exclusive or"),
        Not => ("X", "bitwise complement"),
        Add => ("X, Y", "X + Y, wrapping at the operand width"),
        Sub => ("X, Y", "X - Y, wrapping at the operand width"),
        SignedMul => ("X, Y", "signed product, as wide as both operands together"),
        Sll => ("X, Y", "X shifted left by Y"),
        Srl => ("X, Y", "X shifted right by Y, filling zeros"),
        Sra => ("X, Y", "X shifted right by Y, filling the sign bit"),
        Slice => ("X, Y, Z", "bits Y down to Z of X"),
        Concat => ("X, Y, Z, W", "the Y-bit X above the W-bit Z"),
        SignExtend => ("X, Y, Z", "the Y-bit X sign-extended to Z bits"),
        UnsignExtend => ("X, Y, Z", "the Y-bit X zero-extended to Z bits"),
        CmpGeS => ("X, Y", "1 if X >= Y as signed numbers, else 0"),
        CmpGeU => ("X, Y", "1 if X >= Y as unsigned numbers, else 0"),
        CmpGtS => ("X, Y", "1 if X > Y as signed numbers, else 0"),
        CmpGtU => ("X, Y", "1 if X > Y as unsigned numbers, else 0"),
        CmpLtS => ("X, Y", "1 if X < Y as signed numbers, else 0"),
        CmpLtU => ("X, Y", "1 if X < Y as unsigned numbers, else 0"),
        CmpLeS => ("X, Y", "1 if X <= Y as signed numbers, else 0"),
        CmpLeU => ("X, Y", "1 if X <= Y as unsigned numbers, else 0"),
        CmpNe => ("X, Y", "1 if X != Y, else 0"),
        CmpEq => ("X, Y", "1 if X == Y, else 0"),
        CondAssign => ("C, X, Y", "X if C is 1, else Y"),
    }
}

/// The code in a reply: the first fenced block if there is one, else the
/// whole reply.
pub fn extract_code(reply: &str) -> String {
    if let Some(start) = reply.find("```") {
        let body = &reply[start + 3..];
        let body = body.split_once('\n').map_or("", |(_, rest)| rest);
        let end = body.find("```").unwrap_or(body.len());
        return body[..end].trim_end().to_string() + "\n";
    }
    reply.trim().to_string() + "\n"
}

/// Observable result of running a sample on one state.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Behavior {
    Delta(StateDelta),
    Fault(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    /// Index of the sample that produced it.
    pub sample: usize,
    pub source: String,
    /// Transport calls spent.
    pub calls: usize,
    /// The compiled graph, when the source compiles.
    pub graph: Option<Graph>,
    /// Diagnostics of the last compile.
    pub diagnostics: Vec<Diagnostic>,
    /// Behaviour on the shared probe states, set during clustering for
    /// compiled candidates only.
    pub signature: Option<Vec<Behavior>>,
}

impl Candidate {
    pub fn compiled(&self) -> bool {
        self.graph.is_some()
    }
}

fn call(
    cfg: &GenerationConfig,
    transport: &dyn Transport,
    messages: &[Message],
    sample: usize,
    attempt: usize,
) -> Result<String, TransportError> {
    let req = Request { model: &cfg.model, temperature: cfg.temperature, messages, sample, attempt };
    let mut last = None;
    for _ in 0..=cfg.retries {
        match transport.complete(&req) {
            Ok(r) => return Ok(r),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// The message sent back after a failed compile.
pub fn feedback_message(diags: &[Diagnostic]) -> String {
    alloc::format!(
        "The nOP function above does not pass the syntax check:\n{}Fix it and reply with the corrected nOP function only.",
        render(diags)
    )
}

/// Asks for one nOP function, feeding compiler diagnostics back up to
/// `max_feedback_rounds` times. Returns the last reply either way.
pub fn generate_one(
    cfg: &GenerationConfig,
    transport: &dyn Transport,
    prompt: &str,
    widths: &BTreeMap<String, u32>,
    registry: &NopRegistry,
    sample: usize,
) -> Result<Candidate, TransportError> {
    let mut messages = alloc::vec![Message { role: Role::User, content: prompt.to_string() }];
    let mut attempt = 0;
    loop {
        let reply = call(cfg, transport, &messages, sample, attempt)?;
        let source = extract_code(&reply);
        let calls = attempt + 1;
        match compile_source(&source, widths, registry) {
            Ok(c) => {
                return Ok(Candidate {
                    sample,
                    source,
                    calls,
                    graph: Some(c.graph),
                    diagnostics: c.warnings,
                    signature: None,
                })
            }
            Err(diags) => {
                if attempt >= cfg.max_feedback_rounds {
                    return Ok(Candidate { sample, source, calls, graph: None, diagnostics: diags, signature: None });
                }
                messages.push(Message { role: Role::Assistant, content: reply });
                messages.push(Message { role: Role::User, content: feedback_message(&diags) });
                attempt += 1;
            }
        }
    }
}

/// Base address of the memory words placed in every probe state.
pub const PROBE_MEMORY_BASE: u64 = 0x1_0000;
pub const PROBE_MEMORY_WORDS: u64 = 16;

/// Shared random inputs: machine states and operand values.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub cases: Vec<(MachineState, Vec<(String, u64)>)>,
}

impl Probe {
    /// Registers are uniform 64-bit values except that odd registers point
    /// into a block of 16 random memory words; operands are uniform over
    /// their field widths; the PC is a random word-aligned address.
    pub fn new(widths: &BTreeMap<String, u32>, count: usize, seed: u64) -> Probe {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cases = (0..count)
            .map(|_| {
                let mut s = MachineState::new(rng.next_u64() & !3 & 0xffff_ffff);
                for w in 0..PROBE_MEMORY_WORDS {
                    s.write_le(PROBE_MEMORY_BASE + 8 * w, 8, rng.next_u64() as u128);
                }
                for r in 1..32 {
                    let v = if r % 2 == 1 {
                        PROBE_MEMORY_BASE + 8 * (rng.next_u64() % PROBE_MEMORY_WORDS)
                    } else {
                        rng.next_u64()
                    };
                    s.set_reg(r, v);
                }
                let ops = widths
                    .iter()
                    .map(|(n, w)| {
                        let v = rng.next_u64();
                        (n.clone(), if *w >= 64 { v } else { v & ((1u64 << w) - 1) })
                    })
                    .collect();
                (s, ops)
            })
            .collect();
        Probe { cases }
    }

    /// Behaviour of `graph` on every probe state.
    pub fn run(&self, graph: &Graph) -> Vec<Behavior> {
        self.cases
            .iter()
            .map(|(state, ops)| {
                let mut args = Vec::new();
                for (name, width) in graph.operands() {
                    let v = ops.iter().find(|(n, _)| *n == name).map_or(0, |(_, v)| *v);
                    args.push(BitVec::from_u64(v, width));
                }
                match graph.eval(&args, state) {
                    Ok(d) => Behavior::Delta(d),
                    Err(e) => Behavior::Fault(e.to_string()),
                }
            })
            .collect()
    }
}

/// Groups candidates with a signature by identical signature. Clusters
/// come largest first, equal sizes ordered by their earliest member;
/// members are in candidate order.
pub fn cluster(candidates: &[Candidate]) -> Vec<Vec<usize>> {
    let mut groups: BTreeMap<&Vec<Behavior>, Vec<usize>> = BTreeMap::new();
    for (i, c) in candidates.iter().enumerate() {
        if let Some(sig) = &c.signature {
            groups.entry(sig).or_default().push(i);
        }
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub candidates: Vec<Candidate>,
    /// Indices into `candidates`.
    pub clusters: Vec<Vec<usize>>,
    /// Earliest member of the first cluster.
    pub selected: Option<usize>,
}

impl Selection {
    pub fn selected(&self) -> Option<&Candidate> {
        self.selected.map(|i| &self.candidates[i])
    }
}

/// Signs compiled candidates on a probe, optionally drops those failing
/// `tests`, and clusters the rest.
pub fn select(mut candidates: Vec<Candidate>, probe: &Probe, tests: Option<&[InstructionTestCase]>) -> Selection {
    for c in &mut candidates {
        let Some(g) = &c.graph else { continue };
        let keep = tests.is_none_or(|ts| ts.iter().all(|t| run_graph_case(g, t).passed()));
        if keep {
            c.signature = Some(probe.run(g));
        }
    }
    let clusters = cluster(&candidates);
    let selected = clusters.first().map(|c| c[0]);
    Selection { candidates, clusters, selected }
}

/// Draws `cfg.samples` candidates and picks one from the largest
/// behavioural cluster. `tests` are used only when `cfg.prefilter` is set.
pub fn sample_cluster_select(
    cfg: &GenerationConfig,
    transport: &dyn Transport,
    prompt: &str,
    widths: &BTreeMap<String, u32>,
    registry: &NopRegistry,
    seed: u64,
    tests: Option<&[InstructionTestCase]>,
) -> Result<Selection, TransportError> {
    let candidates = (0..cfg.samples)
        .map(|i| generate_one(cfg, transport, prompt, widths, registry, i))
        .collect::<Result<Vec<_>, _>>()?;
    let probe = Probe::new(widths, cfg.random_states, seed);
    Ok(select(candidates, &probe, if cfg.prefilter { tests } else { None }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum PassAtOneError {
    #[error("no problems given")]
    Empty,
    #[error("problem {0} has no samples")]
    NoSamples(usize),
    #[error("problem {0} has more correct samples than samples")]
    TooManyCorrect(usize),
}

/// Mean over problems of the fraction of correct samples.
pub fn pass_at_1(results: &[(u32, u32)]) -> Result<f64, PassAtOneError> {
    if results.is_empty() {
        return Err(PassAtOneError::Empty);
    }
    let mut sum = 0.0;
    for (i, &(c, n)) in results.iter().enumerate() {
        if n == 0 {
            return Err(PassAtOneError::NoSamples(i));
        }
        if c > n {
            return Err(PassAtOneError::TooManyCorrect(i));
        }
        sum += c as f64 / n as f64;
    }
    Ok(sum / results.len() as f64)
}
