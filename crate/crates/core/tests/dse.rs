mod common;

use common::{coeffs, table};
use nanoop_core::dse::{
    area_efficiency, auto_config, cost_area_efficiency, pareto_indices, DseError, DseOptions, Field, Measured, Space,
    Value, Workload,
};
use nanoop_core::isa::rv64::base_isa;
use nanoop_core::isa::{assemble, Isa, Program};
use nanoop_core::progen::{random_program, GenOptions};
use nanoop_core::uarch::{ProcessorConfig, SimOptions};
use proptest::prelude::*;

fn benchmarks(isa: &Isa) -> Vec<Program> {
    (0..3).map(|s| assemble(&random_program(isa, 40 + s, &GenOptions::default()), isa).unwrap()).collect()
}

fn field(name: &str) -> Field {
    Space::numeric(name).unwrap()
}

fn workload<'a>(isa: &'a Isa, programs: &'a [Program], t: &'a nanoop_core::timing::TimingTable) -> Workload<'a> {
    Workload {
        isa,
        programs,
        weights: vec![],
        table: t,
        area: coeffs(),
        power: coeffs(),
        sim: SimOptions { max_cycles: 1_000_000, seed: 1 },
    }
}

/// Costs of every point, by direct measurement, sorted best first with the
/// documented tie rule.
fn oracle_ranking(space: &Space, w: &Workload) -> Vec<(f64, f64, u64)> {
    let mut all: Vec<(f64, f64, u64)> = (0..space.size())
        .map(|i| {
            let m = w.measure(&space.config(i)).unwrap();
            (m.cycles * m.area, m.cycles, i)
        })
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    all
}

#[test]
fn full_budget_finds_the_exhaustive_optimum() {
    let isa = base_isa();
    let progs = benchmarks(&isa);
    let t = table();
    let w = workload(&isa, &progs, &t);
    let space = Space::new(ProcessorConfig::small(), vec![field("decode_width"), field("alu")]).unwrap();
    assert_eq!(space.size(), 20);
    let want = oracle_ranking(&space, &w)[0];
    for seed in 0..3 {
        let opts = DseOptions { budget: 20, parallelism: 3, seed, ..Default::default() };
        let r = auto_config(&space, &w, &area_efficiency, &opts).unwrap();
        assert_eq!(r.history.len(), 20);
        assert_eq!(r.best.index, want.2);
        assert_eq!(r.best.cost, want.0);
    }
}

#[test]
fn small_budget_lands_in_the_top_five_percent() {
    let isa = base_isa();
    let progs = benchmarks(&isa);
    let t = table();
    let w = workload(&isa, &progs, &t);
    let space =
        Space::new(ProcessorConfig::small(), vec![field("decode_width"), field("alu"), field("lq_entries")]).unwrap();
    assert_eq!(space.size(), 60);
    let ranking = oracle_ranking(&space, &w);
    let top = (ranking.len() as f64 * 0.05).ceil() as usize;
    let mut hits = 0;
    for seed in 0..5 {
        let opts = DseOptions { budget: 25, parallelism: 3, seed, ..Default::default() };
        let r = auto_config(&space, &w, &area_efficiency, &opts).unwrap();
        assert!(r.history.len() <= 25);
        let rank = ranking.iter().position(|x| x.2 == r.best.index).unwrap();
        if rank < top {
            hits += 1;
        }
    }
    assert!(hits >= 4, "only {hits}/5 seeds reached the top {top}");
}

#[test]
fn search_invariants() {
    let isa = base_isa();
    let progs = benchmarks(&isa);
    let t = table();
    let w = workload(&isa, &progs, &t);
    let space = Space::new(
        ProcessorConfig::small(),
        vec![field("decode_width"), field("rob_entries"), field("l1d_kb"), field("alu")],
    )
    .unwrap();
    let opts = DseOptions { budget: 30, parallelism: 4, seed: 9, ..Default::default() };
    let a = auto_config(&space, &w, &area_efficiency, &opts).unwrap();
    let b = auto_config(&space, &w, &area_efficiency, &opts).unwrap();
    assert_eq!(a.history, b.history);
    assert!(a.history.iter().all(|p| a.best.cost <= p.cost));
    let mut idx: Vec<u64> = a.history.iter().map(|p| p.index).collect();
    idx.sort_unstable();
    idx.dedup();
    assert_eq!(idx.len(), a.history.len(), "a point was evaluated twice");
    for p in &a.history {
        assert_eq!(p.cost, area_efficiency(p.measured.as_ref().unwrap()));
    }
    // Rounds after the first hold `parallelism` points, except possibly the last.
    let rounds = a.history.iter().map(|p| p.round).max().unwrap();
    for r in 1..rounds {
        assert_eq!(a.history.iter().filter(|p| p.round == r).count(), 4);
    }
}

#[test]
fn single_point_space_needs_one_evaluation() {
    let space = Space::new(ProcessorConfig::small(), vec![]).unwrap();
    let calls = std::cell::Cell::new(0);
    let eval = |_: &ProcessorConfig| {
        calls.set(calls.get() + 1);
        Ok(Measured { per_benchmark: vec![10], cycles: 10.0, area: 2.0, power: 0.0 })
    };
    let r = auto_config(&space, &eval, &area_efficiency, &DseOptions::default()).unwrap();
    assert_eq!(calls.get(), 1);
    assert_eq!(r.best.cost, 20.0);
}

#[test]
fn failures_cost_infinity_and_are_logged() {
    let space = Space::new(ProcessorConfig::small(), vec![field("alu"), field("decode_width")]).unwrap();
    let eval = |c: &ProcessorConfig| {
        if c.alu == 2 {
            Err("boom".to_string())
        } else {
            Ok(Measured { per_benchmark: vec![], cycles: 100.0 / c.decode_width as f64, area: c.alu as f64, power: 0.0 })
        }
    };
    let opts = DseOptions { budget: 20, parallelism: 2, seed: 3, ..Default::default() };
    let r = auto_config(&space, &eval, &area_efficiency, &opts).unwrap();
    let failed: Vec<_> = r.history.iter().filter(|p| p.error.is_some()).collect();
    assert_eq!(failed.len(), 5);
    assert!(failed.iter().all(|p| p.cost == f64::INFINITY));
    assert_eq!((r.best.cfg.alu, r.best.cfg.decode_width), (1, 5));
    assert!(r.pareto.iter().all(|p| p.error.is_none()));
}

#[test]
fn budget_below_initial_sample_is_rejected() {
    let space = Space::full(ProcessorConfig::small());
    let eval = |_: &ProcessorConfig| Err::<Measured, _>("unused".to_string());
    let e = auto_config(&space, &eval, &area_efficiency, &DseOptions { budget: 4, ..Default::default() }).unwrap_err();
    assert_eq!(e, DseError::Budget { budget: 4, initial: 16 });
}

#[test]
fn full_space_search_stays_in_bounds() {
    let space = Space::full(ProcessorConfig::small());
    assert!(space.size() > 100_000_000);
    let eval = |c: &ProcessorConfig| {
        c.validate().map_err(|e| e.to_string())?;
        Ok(Measured {
            per_benchmark: vec![],
            cycles: 1e4 / (c.decode_width * c.alu) as f64 + c.rob_entries as f64,
            area: (c.decode_width + c.alu + c.l1d_kb) as f64,
            power: 0.0,
        })
    };
    let opts = DseOptions { budget: 40, parallelism: 8, seed: 1, pool: 512, ..Default::default() };
    let r = auto_config(&space, &eval, &area_efficiency, &opts).unwrap();
    assert_eq!(r.history.len(), 40);
    assert!(r.history.iter().all(|p| p.error.is_none()));
}

#[test]
fn policy_field_is_categorical() {
    let f = Field { name: "btb_replace".into(), values: nanoop_core::uarch::Replacement::ALL.map(Value::Policy).to_vec() };
    let space = Space::new(ProcessorConfig::small(), vec![f, field("alu")]).unwrap();
    assert_eq!(space.size(), 16);
    assert_eq!(space.features(0).len(), 5);
    for i in 0..16 {
        assert_eq!(space.index_of(&space.choices(i)), i);
    }
    assert!(Space::new(ProcessorConfig::small(), vec![Field { name: "alu".into(), values: vec![Value::Num(7)] }])
        .is_err());
}

#[test]
fn cost_ordering_example() {
    let a = cost_area_efficiency(900.0, 2.2e6).unwrap();
    let b = cost_area_efficiency(1000.0, 1.9e6).unwrap();
    assert_eq!(a, 1.98e9);
    assert_eq!(b, 1.9e9);
    assert!(a > b);
}

proptest! {
    #[test]
    fn pareto_matches_quadratic_filter(pts in prop::collection::vec((0u8..20, 0u8..20), 0..100)) {
        let xy: Vec<(f64, f64)> = pts.iter().map(|(a, b)| (*a as f64, *b as f64)).collect();
        let dominated = |i: usize| xy.iter().any(|q| q.0 <= xy[i].0 && q.1 <= xy[i].1 && (q.0 < xy[i].0 || q.1 < xy[i].1));
        let want: Vec<usize> = (0..xy.len()).filter(|&i| !dominated(i)).collect();
        prop_assert_eq!(pareto_indices(&xy), want);
    }
}
