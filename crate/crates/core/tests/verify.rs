mod common;

use common::table;
use nanoop_core::isa::rv64::{base_isa, zknh_isa};
use nanoop_core::uarch::{ProcessorConfig, Replacement, SimOptions};
use nanoop_core::verify::*;
use nanoop_core::MachineState;

fn state_with(regs: &[(usize, u64)]) -> MachineState {
    let mut s = MachineState::new(0x100);
    for &(r, v) in regs {
        s.set_reg(r, v);
    }
    s
}

#[test]
fn addi_case_passes() {
    let isa = base_isa();
    let addi = isa.instruction(isa.by_name("addi").unwrap());
    let case = InstructionTestCase {
        name: "addi".into(),
        initial: state_with(&[(2, 7)]),
        operands: vec![("rd".into(), 1), ("rs1".into(), 2), ("imm".into(), 5)],
        expect: vec![Expect::Reg { index: 1, value: 12 }, Expect::Pc(0x104)],
    };
    assert!(verify_instruction(addi, &[case]).passed());
}

/// Rotation form of the SHA-256 Σ functions, sign-extended to 64 bits.
fn sigma(x: u32, r: [u32; 3]) -> u64 {
    (x.rotate_right(r[0]) ^ x.rotate_right(r[1]) ^ x.rotate_right(r[2])) as i32 as i64 as u64
}

#[test]
fn sha256_sigma_reference_vectors() {
    let isa = zknh_isa();
    // Σ0 and Σ1 of the first SHA-256 round, applied to the initial hash words.
    assert_eq!(sigma(0x6a09_e667, [2, 13, 22]), 0xffff_ffff_ce20_b47e);
    assert_eq!(sigma(0x510e_527f, [6, 11, 25]), 0x3587_272b);
    for (name, x, r) in [("sha256sum0", 0x6a09_e667u32, [2, 13, 22]), ("sha256sum1", 0x510e_527f, [6, 11, 25])] {
        let ins = isa.instruction(isa.by_name(name).unwrap());
        let case = InstructionTestCase {
            name: name.into(),
            initial: state_with(&[(5, x as u64 | 0xdead_0000_0000_0000)]),
            operands: vec![("rd".into(), 6), ("rs1".into(), 5)],
            expect: vec![Expect::Reg { index: 6, value: sigma(x, r) }, Expect::Pc(0x104)],
        };
        let rep = verify_instruction(ins, &[case]);
        assert!(rep.passed(), "{name}: {:?}", rep.cases[0]);
    }
}

#[test]
fn wrong_expectation_names_the_field() {
    let isa = base_isa();
    let addi = isa.instruction(isa.by_name("addi").unwrap());
    let case = InstructionTestCase {
        name: "bad".into(),
        initial: state_with(&[(2, 7)]),
        operands: vec![("rd".into(), 1), ("rs1".into(), 2), ("imm".into(), 5)],
        expect: vec![Expect::Reg { index: 1, value: 13 }],
    };
    let rep = verify_instruction(addi, &[case]);
    assert!(!rep.passed());
    let m = &rep.cases[0].mismatches;
    assert_eq!(m.len(), 1);
    assert_eq!((m[0].field.as_str(), m[0].expected.as_str(), m[0].actual.as_str()), ("x1", "0xd", "0xc"));
}

#[test]
fn unexpected_writes_and_unbound_operands_fail() {
    let isa = base_isa();
    let sd = isa.instruction(isa.by_name("sd").unwrap());
    let case = InstructionTestCase {
        name: "sd".into(),
        initial: state_with(&[(2, 0x1000), (3, 0x1122_3344_5566_7788)]),
        operands: vec![("rs1".into(), 2), ("rs2".into(), 3), ("imm".into(), 8)],
        expect: vec![Expect::Mem { addr: 0x1008, bytes: vec![0x88, 0x77, 0x66, 0x55] }],
    };
    let rep = verify_instruction(sd, std::slice::from_ref(&case));
    let fields: Vec<_> = rep.cases[0].mismatches.iter().map(|m| m.field.clone()).collect();
    assert_eq!(fields, ["mem[0x100c]", "mem[0x100d]", "mem[0x100e]", "mem[0x100f]"]);
    let mut unbound = case;
    unbound.operands.pop();
    assert!(verify_instruction(sd, &[unbound]).cases[0].error.as_deref().unwrap().contains("imm"));
}

const VECTOR_SUM: &str = "
_start:
    lui  x10, 0x2          # x10 = 0x2000, array base
    addi x11, x0, 16       # element count
    addi x12, x0, 0        # accumulator
loop:
    ld   x13, 0(x10)
    add  x12, x12, x13
    addi x10, x10, 8
    addi x11, x11, -1
    bne  x11, x0, loop
    sd   x12, 0(x10)       # store the sum after the array
    halt
";

fn vector_sum_case() -> ProgramTestCase {
    let values: Vec<u64> = (1..=16).map(|i| i * i + 3).collect();
    let data = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    let sum: u64 = values.iter().sum();
    ProgramTestCase {
        name: "vector-sum".into(),
        source: VECTOR_SUM.into(),
        data: vec![(0x2000, data)],
        assertions: vec![
            Assertion::Reg { index: 12, value: sum },
            Assertion::Mem { addr: 0x2080, bytes: sum.to_le_bytes().to_vec() },
        ],
        max_instructions: 10_000,
    }
}

/// Stores followed closely by overlapping loads of every width.
const FORWARDING: &str = "
_start:
    lui  x10, 0x3
    addi x1, x0, -3
    addi x5, x0, 20
loop:
    sd   x1, 0(x10)
    lw   x2, 4(x10)
    lbu  x3, 7(x10)
    sb   x5, 1(x10)
    ld   x4, 0(x10)
    sh   x4, 2(x10)
    lhu  x6, 2(x10)
    add  x1, x1, x4
    addi x10, x10, 8
    addi x5, x5, -1
    bne  x5, x0, loop
    halt
";

fn forwarding_case(isa: &nanoop_core::isa::Isa) -> ProgramTestCase {
    let p = nanoop_core::isa::assemble(FORWARDING, isa).unwrap();
    let want = nanoop_core::isa::isa_simulate(isa, &p, 10_000, false).unwrap().state;
    ProgramTestCase {
        name: "forwarding".into(),
        source: FORWARDING.into(),
        data: vec![],
        assertions: (1..7).map(|r| Assertion::Reg { index: r, value: want.regs()[r] }).collect(),
        max_instructions: 10_000,
    }
}

#[test]
fn isa_level_programs() {
    let isa = base_isa();
    let mut wrong = vector_sum_case();
    wrong.name = "wrong".into();
    wrong.assertions = vec![Assertion::Reg { index: 20, value: 1 }];
    let mut bad_reg = vector_sum_case();
    bad_reg.assertions = vec![Assertion::Reg { index: 40, value: 0 }];
    let mut bad_src = vector_sum_case();
    bad_src.source = "frob x1\n".into();
    let rep = verify_isa(&isa, &[vector_sum_case(), wrong, bad_reg, bad_src]);
    let verdicts: Vec<bool> = rep.cases.iter().map(|c| c.passed()).collect();
    assert_eq!(verdicts, [true, false, false, false]);
    assert_eq!(rep.cases[1].mismatches[0].field, "x20");
    assert!(rep.cases[2].error.is_some() && rep.cases[3].error.is_some());
}

#[test]
fn processor_level_agrees_with_isa_level() {
    let isa = base_isa();
    let mut wrong = vector_sum_case();
    wrong.assertions.push(Assertion::Reg { index: 12, value: 0 });
    let cases = vec![vector_sum_case(), wrong, forwarding_case(&isa)];
    let isa_rep = verify_isa(&isa, &cases);
    for policy in Replacement::ALL {
        for mut cfg in [ProcessorConfig::small(), ProcessorConfig::giga()] {
            cfg.btb_replace = policy;
            let rep = verify_processor(&isa, &cfg, &table(), &SimOptions::default(), &cases).unwrap();
            for (a, b) in isa_rep.cases.iter().zip(&rep.cases) {
                assert_eq!(a.passed(), b.passed(), "{}", a.name);
                assert!(b.mismatches.iter().all(|m| !m.field.starts_with("cosim")), "{:?}", b.mismatches);
                assert!(b.cycles.unwrap() > 0);
            }
        }
    }
}

#[test]
fn verdicts_do_not_depend_on_order() {
    let isa = base_isa();
    let mut wrong = vector_sum_case();
    wrong.name = "wrong".into();
    wrong.assertions = vec![Assertion::Reg { index: 3, value: 9 }];
    let a = verify_isa(&isa, &[vector_sum_case(), wrong.clone(), forwarding_case(&isa)]);
    let b = verify_isa(&isa, &[forwarding_case(&isa), wrong, vector_sum_case()]);
    assert_eq!(a.cases[0], b.cases[2]);
    assert_eq!(a.cases[1], b.cases[1]);
    assert_eq!(a.cases[2], b.cases[0]);
}

#[test]
fn invalid_config_is_rejected() {
    let mut cfg = ProcessorConfig::small();
    cfg.rob_entries = 33;
    assert!(verify_processor(&base_isa(), &cfg, &table(), &SimOptions::default(), &[]).is_err());
}

#[test]
fn state_diff_lists_each_difference() {
    let a = state_with(&[(1, 1)]);
    let mut b = state_with(&[(1, 2)]);
    b.write_byte(0x40, 7);
    b.write_byte(0x41, 0);
    let d = state_diff(&a, &b);
    let f: Vec<_> = d.iter().map(|m| m.field.as_str()).collect();
    assert_eq!(f, ["x1", "mem[0x40]"]);
}
