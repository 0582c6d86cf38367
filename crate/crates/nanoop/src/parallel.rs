//! Thread-pool versions of the batch operations in `nanoop-core`.

use std::collections::BTreeMap;

use nanoop_core::dse::{Evaluator, Measured, Workload};
use nanoop_core::isa::Isa;
use nanoop_core::llm::{generate_one, GenerationConfig, Probe, Selection, Transport, TransportError};
use nanoop_core::nop::NopRegistry;
use nanoop_core::timing::TimingTable;
use nanoop_core::uarch::{ProcessorConfig, SimOptions};
use nanoop_core::verify::{run_isa_case, run_processor_case, InstructionTestCase, ProgramTestCase, Report};
use rayon::prelude::*;

fn pool(jobs: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().expect("thread pool")
}

/// Measures each batch on up to `jobs` threads. Results keep batch order,
/// so a search is identical for any job count.
pub struct ParallelWorkload<'a> {
    pub workload: Workload<'a>,
    pool: rayon::ThreadPool,
}

impl<'a> ParallelWorkload<'a> {
    pub fn new(workload: Workload<'a>, jobs: usize) -> Self {
        ParallelWorkload { workload, pool: pool(jobs) }
    }
}

impl Evaluator for ParallelWorkload<'_> {
    fn evaluate(&self, batch: &[ProcessorConfig]) -> Vec<Result<Measured, String>> {
        self.pool.install(|| batch.par_iter().map(|c| self.workload.measure(c)).collect())
    }
}

pub fn verify_isa(isa: &Isa, cases: &[ProgramTestCase], jobs: usize) -> Report {
    let cases = pool(jobs).install(|| cases.par_iter().map(|c| run_isa_case(isa, c)).collect());
    Report { cases }
}

pub fn verify_processor(
    isa: &Isa,
    cfg: &ProcessorConfig,
    table: &TimingTable,
    opts: &SimOptions,
    cases: &[ProgramTestCase],
    jobs: usize,
) -> Result<Report, nanoop_core::uarch::ConfigError> {
    cfg.validate()?;
    let cases = pool(jobs).install(|| cases.par_iter().map(|c| run_processor_case(isa, cfg, table, opts, c)).collect());
    Ok(Report { cases })
}

/// Draws the samples concurrently, then clusters serially; the result is
/// the same as the serial pipeline.
#[allow(clippy::too_many_arguments)]
pub fn sample_cluster_select<T: Transport + Sync>(
    cfg: &GenerationConfig,
    transport: &T,
    prompt: &str,
    widths: &BTreeMap<String, u32>,
    registry: &NopRegistry,
    seed: u64,
    tests: Option<&[InstructionTestCase]>,
    jobs: usize,
) -> Result<Selection, TransportError> {
    let candidates = pool(jobs).install(|| {
        (0..cfg.samples)
            .into_par_iter()
            .map(|i| generate_one(cfg, transport, prompt, widths, registry, i))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let probe = Probe::new(widths, cfg.random_states, seed);
    Ok(nanoop_core::llm::select(candidates, &probe, if cfg.prefilter { tests } else { None }))
}
