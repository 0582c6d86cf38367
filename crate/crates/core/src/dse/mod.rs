//! Design-space search over processor configurations.
//!
//! The search is batch-synchronous: a stratified initial sample is
//! evaluated, then each round fits a tree-ensemble surrogate on log cost and
//! proposes the `parallelism` unevaluated points with the highest expected
//! improvement. Proposals depend only on the seed and on earlier results, so
//! serial and parallel evaluators see the same batches.

mod forest;
mod space;

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub use forest::{expected_improvement, Forest, ForestOptions};
pub use space::{Field, Space, SpaceError, Value, POLICY_FIELD};

use crate::isa::{Isa, Program};
use crate::ppa::{self, Coefficients};
use crate::timing::TimingTable;
use crate::uarch::{simulate, ProcessorConfig, SimOptions, SimStatus};

/// What one evaluation measured.
#[derive(Debug, Clone, PartialEq)]
pub struct Measured {
    /// Cycles of each benchmark.
    pub per_benchmark: Vec<u64>,
    /// Weighted sum of `per_benchmark`.
    pub cycles: f64,
    pub area: f64,
    pub power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("cost inputs must be positive (cycles {cycles}, area {area})")]
pub struct DomainError {
    pub cycles: f64,
    pub area: f64,
}

/// Area efficiency: cycles times area, lower is better.
pub fn cost_area_efficiency(cycles: f64, area: f64) -> Result<f64, DomainError> {
    if cycles > 0.0 && area > 0.0 && cycles.is_finite() && area.is_finite() {
        Ok(cycles * area)
    } else {
        Err(DomainError { cycles, area })
    }
}

/// Default cost; measurements outside the domain cost infinity.
pub fn area_efficiency(m: &Measured) -> f64 {
    cost_area_efficiency(m.cycles, m.area).unwrap_or(f64::INFINITY)
}

/// One evaluated (or failed) configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignPoint {
    /// Evaluation order, used as the record's timestamp.
    pub seq: usize,
    /// Search round; the initial sample is round 0.
    pub round: usize,
    /// Index in the space.
    pub index: u64,
    pub cfg: ProcessorConfig,
    pub measured: Option<Measured>,
    pub error: Option<String>,
    pub cost: f64,
}

impl DesignPoint {
    pub fn cycles(&self) -> f64 {
        self.measured.as_ref().map_or(f64::INFINITY, |m| m.cycles)
    }

    pub fn area(&self) -> f64 {
        self.measured.as_ref().map_or(f64::INFINITY, |m| m.area)
    }

    /// Lower cost first, then fewer cycles, then lower index.
    pub fn rank_cmp(&self, other: &DesignPoint) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then(self.cycles().total_cmp(&other.cycles()))
            .then(self.index.cmp(&other.index))
    }
}

/// Measures a batch of configurations. Results come back in batch order.
pub trait Evaluator {
    fn evaluate(&self, batch: &[ProcessorConfig]) -> Vec<Result<Measured, String>>;
}

impl<F: Fn(&ProcessorConfig) -> Result<Measured, String>> Evaluator for F {
    fn evaluate(&self, batch: &[ProcessorConfig]) -> Vec<Result<Measured, String>> {
        batch.iter().map(self).collect()
    }
}

/// Simulates every benchmark on the configuration and prices it.
#[derive(Clone)]
pub struct Workload<'a> {
    pub isa: &'a Isa,
    pub programs: &'a [Program],
    /// One weight per program; empty means all ones.
    pub weights: Vec<f64>,
    pub table: &'a TimingTable,
    pub area: Coefficients,
    pub power: Coefficients,
    pub sim: SimOptions,
}

impl Workload<'_> {
    pub fn measure(&self, cfg: &ProcessorConfig) -> Result<Measured, String> {
        let mut per_benchmark = Vec::with_capacity(self.programs.len());
        let mut cycles = 0.0;
        for (i, p) in self.programs.iter().enumerate() {
            let r = simulate(self.isa, p, cfg, self.table, &self.sim).map_err(|e| alloc::format!("program {i}: {e}"))?;
            if r.status != SimStatus::Halted {
                return Err(alloc::format!("program {i}: cycle budget exceeded"));
            }
            per_benchmark.push(r.cycles);
            cycles += self.weights.get(i).copied().unwrap_or(1.0) * r.cycles as f64;
        }
        let area = ppa::area(cfg, self.isa, &self.area, self.table).map_err(|e| alloc::format!("{e}"))?;
        Ok(Measured { per_benchmark, cycles, area, power: ppa::power(cfg, &self.power) })
    }
}

impl Evaluator for Workload<'_> {
    fn evaluate(&self, batch: &[ProcessorConfig]) -> Vec<Result<Measured, String>> {
        batch.iter().map(|c| self.measure(c)).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DseOptions {
    /// Maximum number of evaluations.
    pub budget: usize,
    /// Points proposed per round.
    pub parallelism: usize,
    pub seed: u64,
    /// Size of the stratified initial sample, capped by the space size.
    pub initial: usize,
    pub forest: ForestOptions,
    /// Spaces up to this size are scored exhaustively each round; larger
    /// ones score this many random points plus neighbours of the best.
    pub pool: usize,
}

impl Default for DseOptions {
    fn default() -> Self {
        DseOptions { budget: 64, parallelism: 4, seed: 0, initial: 16, forest: ForestOptions::default(), pool: 4096 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DseError {
    #[error("budget {budget} is below the initial sample size {initial}")]
    Budget { budget: usize, initial: usize },
    #[error("parallelism must be at least 1")]
    Parallelism,
    #[error("no configuration evaluated successfully")]
    AllFailed,
}

#[derive(Debug, Clone)]
pub struct DseResult {
    pub best: DesignPoint,
    pub pareto: Vec<DesignPoint>,
    pub history: Vec<DesignPoint>,
}

struct Search<'a> {
    space: &'a Space,
    evaluator: &'a dyn Evaluator,
    cost: &'a dyn Fn(&Measured) -> f64,
    history: Vec<DesignPoint>,
    seen: BTreeSet<u64>,
}

impl Search<'_> {
    fn run_batch(&mut self, indices: &[u64], round: usize) {
        let cfgs: Vec<ProcessorConfig> = indices.iter().map(|i| self.space.config(*i)).collect();
        let results = self.evaluator.evaluate(&cfgs);
        assert_eq!(results.len(), cfgs.len(), "evaluator returned the wrong number of results");
        for ((index, cfg), res) in indices.iter().zip(cfgs).zip(results) {
            self.seen.insert(*index);
            let (measured, error, cost) = match res {
                Ok(m) => {
                    let c = (self.cost)(&m);
                    let c = if c.is_nan() { f64::INFINITY } else { c };
                    (Some(m), None, c)
                }
                Err(e) => (None, Some(e), f64::INFINITY),
            };
            let seq = self.history.len();
            self.history.push(DesignPoint { seq, round, index: *index, cfg, measured, error, cost });
        }
    }
}

fn below(rng: &mut ChaCha8Rng, n: u64) -> u64 {
    rng.next_u64() % n
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

/// Stratified sample: each field's values are spread evenly over the sample
/// and the columns are shuffled independently. Collisions are replaced by
/// uniform draws.
fn latin_sample(space: &Space, n: usize, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut cols: Vec<Vec<usize>> = Vec::new();
    for f in &space.fields {
        let l = f.values.len();
        let mut col: Vec<usize> = (0..n).map(|i| (((i as f64 + unit(rng)) * l as f64 / n as f64) as usize).min(l - 1)).collect();
        for i in (1..n).rev() {
            let j = below(rng, i as u64 + 1) as usize;
            col.swap(i, j);
        }
        cols.push(col);
    }
    let mut out = Vec::with_capacity(n);
    let mut taken = BTreeSet::new();
    for i in 0..n {
        let choice: Vec<usize> = cols.iter().map(|c| c[i]).collect();
        let mut idx = space.index_of(&choice);
        while taken.contains(&idx) {
            idx = below(rng, space.size());
        }
        taken.insert(idx);
        out.push(idx);
    }
    out
}

/// Searches `space` for the configuration of least `cost`.
pub fn auto_config(
    space: &Space,
    evaluator: &dyn Evaluator,
    cost: &dyn Fn(&Measured) -> f64,
    opts: &DseOptions,
) -> Result<DseResult, DseError> {
    if opts.parallelism == 0 {
        return Err(DseError::Parallelism);
    }
    let size = space.size();
    let initial = (opts.initial.max(1) as u64).min(size) as usize;
    if opts.budget < initial {
        return Err(DseError::Budget { budget: opts.budget, initial });
    }
    let budget = (opts.budget as u64).min(size) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut s = Search { space, evaluator, cost, history: Vec::new(), seen: BTreeSet::new() };
    let first = latin_sample(space, initial, &mut rng);
    s.run_batch(&first, 0);

    let mut round = 1;
    while s.history.len() < budget {
        let k = opts.parallelism.min(budget - s.history.len());
        let batch = propose(&s, k, opts, round, &mut rng);
        if batch.is_empty() {
            break;
        }
        s.run_batch(&batch, round);
        round += 1;
    }
    finish(s.history)
}

fn finish(history: Vec<DesignPoint>) -> Result<DseResult, DseError> {
    let best = history.iter().min_by(|a, b| a.rank_cmp(b)).cloned().ok_or(DseError::AllFailed)?;
    if !best.cost.is_finite() {
        return Err(DseError::AllFailed);
    }
    Ok(DseResult { best, pareto: pareto_front(&history), history })
}

fn propose(s: &Search<'_>, k: usize, opts: &DseOptions, round: usize, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let space = s.space;
    let pool = candidate_pool(s, opts, rng);
    if pool.is_empty() {
        return pool;
    }
    let finite: Vec<f64> = s.history.iter().filter(|p| p.cost.is_finite()).map(|p| libm::log(p.cost)).collect();
    if finite.is_empty() {
        return pool.into_iter().take(k).collect();
    }
    let worst = finite.iter().copied().fold(f64::MIN, f64::max);
    let best = finite.iter().copied().fold(f64::MAX, f64::min);
    let xs: Vec<Vec<f64>> = s.history.iter().map(|p| space.features(p.index)).collect();
    let ys: Vec<f64> =
        s.history.iter().map(|p| if p.cost.is_finite() { libm::log(p.cost) } else { worst + 1.0 }).collect();
    let forest = Forest::fit(&xs, &ys, opts.forest, opts.seed ^ (round as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let mut scored: Vec<(f64, f64, u64)> = pool
        .into_iter()
        .map(|i| {
            let (m, sd) = forest.predict(&space.features(i));
            (expected_improvement(m, sd, best), m, i)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    scored.into_iter().take(k).map(|(_, _, i)| i).collect()
}

/// Unevaluated points to score, deduplicated and in ascending order.
fn candidate_pool(s: &Search<'_>, opts: &DseOptions, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let size = s.space.size();
    if size <= opts.pool as u64 {
        return (0..size).filter(|i| !s.seen.contains(i)).collect();
    }
    let mut pool = BTreeSet::new();
    let mut ranked: Vec<&DesignPoint> = s.history.iter().collect();
    ranked.sort_by(|a, b| a.rank_cmp(b));
    for p in ranked.iter().take(8) {
        let choice = s.space.choices(p.index);
        for (f, field) in s.space.fields.iter().enumerate() {
            for v in 0..field.values.len() {
                let mut c = choice.clone();
                c[f] = v;
                let idx = s.space.index_of(&c);
                if !s.seen.contains(&idx) {
                    pool.insert(idx);
                }
            }
        }
    }
    let mut tries = 0;
    while pool.len() < opts.pool && tries < 4 * opts.pool {
        let idx = below(rng, size);
        if !s.seen.contains(&idx) {
            pool.insert(idx);
        }
        tries += 1;
    }
    pool.into_iter().collect()
}

/// Evaluates every point of `space`, in index order, `batch` at a time.
pub fn exhaustive(
    space: &Space,
    evaluator: &dyn Evaluator,
    cost: &dyn Fn(&Measured) -> f64,
    batch: usize,
) -> Result<DseResult, DseError> {
    let mut s = Search { space, evaluator, cost, history: Vec::new(), seen: BTreeSet::new() };
    let all: Vec<u64> = (0..space.size()).collect();
    for chunk in all.chunks(batch.max(1)) {
        s.run_batch(chunk, 0);
    }
    finish(s.history)
}

/// Indices of the points not dominated on (cycles, area), both minimized.
/// Equal points do not dominate each other.
pub fn pareto_indices(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].0.total_cmp(&points[b].0).then(points[a].1.total_cmp(&points[b].1)));
    let mut keep = Vec::new();
    let mut best_area = f64::INFINITY;
    let mut i = 0;
    while i < order.len() {
        let c = points[order[i]].0;
        let mut j = i;
        while j < order.len() && points[order[j]].0 == c {
            j += 1;
        }
        let group_min = points[order[i]].1;
        if group_min < best_area {
            keep.extend(order[i..j].iter().copied().filter(|&k| points[k].1 == group_min));
            best_area = group_min;
        }
        i = j;
    }
    keep.sort_unstable();
    keep
}

/// Successfully measured points not dominated by another on (cycles, area).
pub fn pareto_front(points: &[DesignPoint]) -> Vec<DesignPoint> {
    let ok: Vec<&DesignPoint> = points.iter().filter(|p| p.measured.is_some()).collect();
    let xy: Vec<(f64, f64)> = ok.iter().map(|p| (p.cycles(), p.area())).collect();
    pareto_indices(&xy).into_iter().map(|i| ok[i].clone()).collect()
}
