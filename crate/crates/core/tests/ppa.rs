mod common;

use common::{coeffs, table};
use nanoop_core::isa::auto_fuse;
use nanoop_core::isa::rv64::{base_isa, zknh_isa};
use nanoop_core::ppa::{area, power, Coefficients, UnitAreas};
use nanoop_core::timing::DEFAULT_MAX_PATTERN_SIZE;
use nanoop_core::uarch::ProcessorConfig;
use proptest::prelude::*;

#[test]
fn one_more_alu_adds_one_alu_cost() {
    let isa = base_isa();
    let c = coeffs();
    let mut cfg = ProcessorConfig::small();
    cfg.alu = 1;
    let a1 = area(&cfg, &isa, &c, &table()).unwrap();
    cfg.alu = 2;
    let a2 = area(&cfg, &isa, &c, &table()).unwrap();
    let units = UnitAreas::of(&isa, &table()).unwrap();
    // Independent sum over the kinds the base ISA uses.
    let mut kinds: Vec<&str> = Vec::new();
    for ins in isa.instructions() {
        for n in ins.graph.nodes() {
            if n.op.is_fusable() && !kinds.contains(&n.op.name()) {
                kinds.push(n.op.name());
            }
        }
    }
    let datapath: f64 = kinds.iter().map(|k| table().get(k).unwrap().area).sum();
    assert_eq!(units.alu_kinds.len(), kinds.len());
    assert!(((a2 - a1) - (c.alu + datapath)).abs() < 1e-6);
}

#[test]
fn fusion_does_not_shrink_area() {
    let isa = zknh_isa();
    let c = coeffs();
    let cfg = ProcessorConfig::large();
    let plain = area(&cfg, &isa, &c, &table()).unwrap();
    let fused = auto_fuse(&isa, 0.0, &table(), DEFAULT_MAX_PATTERN_SIZE).unwrap();
    assert!(area(&cfg, &fused, &c, &table()).unwrap() >= plain);
}

#[test]
fn ext_term_grows_as_threshold_drops() {
    let isa = zknh_isa();
    let mut prev = 0.0;
    for theta in [1.0, 0.75, 0.5, 0.25, 0.0] {
        let fused = auto_fuse(&isa, theta, &table(), DEFAULT_MAX_PATTERN_SIZE).unwrap();
        let ext = UnitAreas::of(&fused, &table()).unwrap().ext();
        assert!(ext >= prev, "theta {theta}: {ext} < {prev}");
        prev = ext;
    }
    assert!(prev > 0.0);
}

#[test]
fn zero_coefficients_and_no_units_cost_nothing() {
    let mut cfg = ProcessorConfig::small();
    cfg.alu = 0;
    cfg.ext = 0;
    assert_eq!(area(&cfg, &base_isa(), &Coefficients::default(), &table()).unwrap(), 0.0);
}

#[test]
fn unpriced_kind_is_an_error() {
    let mut t = nanoop_core::timing::TimingTable::new(0.5);
    t.insert("ADD", nanoop_core::timing::TimingEntry::new(0.1, 1.0));
    let e = area(&ProcessorConfig::small(), &base_isa(), &coeffs(), &t).unwrap_err();
    assert_ne!(e.0, "ADD");
}

#[test]
fn power_is_positive_along_every_field_sweep() {
    let c = coeffs();
    for base in [ProcessorConfig::small(), ProcessorConfig::large(), ProcessorConfig::giga()] {
        for (name, _, allowed) in base.numeric_fields() {
            for &v in allowed {
                let mut cfg = base.clone();
                cfg.set_numeric(name, v);
                assert!(power(&cfg, &c) > 0.0);
            }
        }
    }
}

fn arb_config() -> impl Strategy<Value = ProcessorConfig> {
    let fields = ProcessorConfig::small().numeric_fields();
    let picks: Vec<_> = fields.iter().map(|(_, _, a)| 0..a.len()).collect();
    picks.prop_map(move |idx| {
        let mut c = ProcessorConfig::small();
        for ((name, _, allowed), i) in fields.iter().zip(idx) {
            c.set_numeric(name, allowed[i]);
        }
        c
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn area_strictly_increases_in_every_field(cfg in arb_config()) {
        let isa = base_isa();
        let c = coeffs();
        let t = table();
        let a = area(&cfg, &isa, &c, &t).unwrap();
        for (name, value, allowed) in cfg.numeric_fields() {
            if let Some(&next) = allowed.iter().find(|v| **v > value) {
                let mut up = cfg.clone();
                up.set_numeric(name, next);
                prop_assert!(area(&up, &isa, &c, &t).unwrap() > a, "{}", name);
            }
        }
    }
}
