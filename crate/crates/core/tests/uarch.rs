mod common;

use common::table;
use nanoop_core::isa::rv64::{base_isa, zknh_isa};
use nanoop_core::isa::{assemble, auto_fuse, isa_simulate, Isa, Program, Termination};
use nanoop_core::progen::{random_program, GenOptions};
use nanoop_core::timing::DEFAULT_MAX_PATTERN_SIZE;
use nanoop_core::uarch::{simulate, ProcessorConfig, Replacement, SimOptions, SimReport, SimStatus};

fn run(isa: &Isa, p: &Program, cfg: &ProcessorConfig) -> SimReport {
    let r = simulate(isa, p, cfg, &table(), &SimOptions { max_cycles: 2_000_000, seed: 5 }).unwrap();
    assert_eq!(r.status, SimStatus::Halted);
    r
}

fn configs() -> Vec<ProcessorConfig> {
    let mut v = vec![ProcessorConfig::small(), ProcessorConfig::large(), ProcessorConfig::giga()];
    for (i, p) in Replacement::ALL.into_iter().enumerate() {
        let mut c = ProcessorConfig::small();
        c.btb_replace = p;
        c.decode_width = 2 + i % 3;
        c.rob_entries = [32, 64, 128, 256][i];
        v.push(c);
        let mut c = ProcessorConfig::giga();
        c.btb_replace = p;
        c.l1d_kb = 8;
        c.block_bytes = 32;
        v.push(c);
    }
    v
}

#[test]
fn cosimulation_matches_isa_level() {
    let base = zknh_isa();
    let fused = auto_fuse(&base, 0.25, &table(), DEFAULT_MAX_PATTERN_SIZE).unwrap();
    for seed in 0..12 {
        let isa = if seed % 2 == 0 { &base } else { &fused };
        let src = random_program(isa, seed, &GenOptions::default());
        let p = assemble(&src, isa).unwrap();
        let want = isa_simulate(isa, &p, 1_000_000, false).unwrap();
        assert_eq!(want.termination, Termination::Halted);
        for cfg in configs() {
            let got = run(isa, &p, &cfg);
            assert!(got.state.same_architectural(&want.state), "seed {seed} cfg {}\n{src}", cfg.describe());
            assert_eq!(got.retired, want.executed);
            assert_eq!(got.counts, want.counts);
            assert!(got.cycles * cfg.decode_width as u64 >= got.retired);
        }
    }
}

#[test]
fn wider_machine_is_faster_on_independent_work() {
    let isa = base_isa();
    let src: String = (1..=8).map(|i| format!("addi x{i}, x0, {i}\n")).collect::<String>() + "halt\n";
    let p = assemble(&src, &isa).unwrap();
    let mut narrow = ProcessorConfig::small();
    narrow.decode_width = 1;
    narrow.alu = 1;
    let mut wide = narrow.clone();
    wide.decode_width = 4;
    wide.alu = 4;
    assert!(run(&isa, &p, &wide).cycles < run(&isa, &p, &narrow).cycles);
}

#[test]
fn branch_free_programs_never_mispredict() {
    let isa = base_isa();
    for seed in 0..5 {
        let src = random_program(&isa, seed, &GenOptions { branches: false, ..Default::default() });
        let p = assemble(&src, &isa).unwrap();
        for cfg in configs() {
            assert_eq!(run(&isa, &p, &cfg).mispredictions, 0);
        }
    }
}

/// Walks a pointer chain through `n` nodes spaced one block apart, twice.
fn pointer_chase(n: u64, block: u64) -> String {
    let mut s = String::from("_start:\n    lui x10, 0x100\n    addi x2, x0, 2\nouter:\n    addi x1, x10, 0\n");
    s += &format!("    addi x3, x0, {}\n", n.min(2047));
    if n > 2047 {
        s += &format!("    lui x4, {}\n    addi x3, x4, {}\n", n >> 12, n & 0xfff);
    }
    s += "inner:\n    ld x1, 0(x1)\n    addi x3, x3, -1\n    bne x3, x0, inner\n    addi x2, x2, -1\n    bne x2, x0, outer\n    halt\n";
    let _ = block;
    s
}

fn chase_program(isa: &Isa, n: u64, block: u64) -> Program {
    let mut p = assemble(&pointer_chase(n, block), isa).unwrap();
    let base = 0x100000u64;
    for i in 0..n {
        let next = base + ((i + 1) % n) * block;
        for b in 0..8 {
            p.data.insert(base + i * block + b, (next >> (8 * b)) as u8);
        }
    }
    p
}

#[test]
fn thrashing_l1_costs_cycles() {
    let isa = base_isa();
    let mut cfg = ProcessorConfig::small();
    cfg.l1d_kb = 8;
    cfg.block_bytes = 64;
    let lines = (cfg.l1d_kb * 1024 / cfg.block_bytes) as u64;
    let fits = run(&isa, &chase_program(&isa, lines / 2, 64), &cfg);
    let thrash = run(&isa, &chase_program(&isa, lines * 2, 64), &cfg);
    // Same number of loads per node; compare cycles per retired instruction.
    let cpi = |r: &SimReport| r.cycles as f64 / r.retired as f64;
    assert!(cpi(&thrash) > cpi(&fits));
    assert!(thrash.cache[0].misses > fits.cache[0].misses);
}

#[test]
fn simulation_is_deterministic() {
    let isa = base_isa();
    let p = assemble(&random_program(&isa, 99, &GenOptions::default()), &isa).unwrap();
    let mut cfg = ProcessorConfig::large();
    cfg.btb_replace = Replacement::Random;
    let a = run(&isa, &p, &cfg);
    let b = run(&isa, &p, &cfg);
    assert_eq!((a.cycles, a.mispredictions, a.cache), (b.cycles, b.mispredictions, b.cache));
}

#[test]
fn cycle_budget_is_a_status() {
    let isa = base_isa();
    let p = assemble("l: j l\n", &isa).unwrap();
    let r = simulate(&isa, &p, &ProcessorConfig::small(), &table(), &SimOptions { max_cycles: 500, seed: 0 }).unwrap();
    assert_eq!(r.status, SimStatus::CycleBudgetExceeded);
    assert_eq!(r.cycles, 500);
}

#[test]
fn illegal_instruction_on_the_correct_path_errors() {
    let isa = base_isa();
    let p = assemble("addi x1, x0, 1\n.word 0\n", &isa).unwrap();
    let e = simulate(&isa, &p, &ProcessorConfig::small(), &table(), &SimOptions::default()).unwrap_err();
    assert!(matches!(e, nanoop_core::uarch::UarchError::Illegal { pc: 4, .. }), "{e:?}");
}

#[test]
fn enlarging_a_resource_never_adds_cycles() {
    let isa = zknh_isa();
    let fields = ["rob_entries", "lq_entries", "sq_entries", "bju", "agu", "alu", "ext", "l1d_kb", "l2d_kb", "l3d_mb"];
    let mut programs: Vec<Program> =
        (0..6).map(|s| assemble(&random_program(&isa, 1000 + s, &GenOptions::default()), &isa).unwrap()).collect();
    programs.push(chase_program(&isa, 300, 64));
    for base in [ProcessorConfig::small(), ProcessorConfig::large()] {
        for p in &programs {
            for f in fields {
                let allowed = base.numeric_fields().iter().find(|(n, _, _)| *n == f).unwrap().2;
                let mut prev: Option<u64> = None;
                for &v in allowed {
                    let mut c = base.clone();
                    c.set_numeric(f, v);
                    let cycles = run(&isa, p, &c).cycles;
                    if let Some(pc) = prev {
                        assert!(cycles <= pc, "{f}={v}: {cycles} > {pc} on base {}", base.describe());
                    }
                    prev = Some(cycles);
                }
            }
        }
    }
}
