mod common;

use common::{rng, table};
use nanoop_core::bitvec::BitVec;
use nanoop_core::dfg::{FusedOp, PatOp};
use nanoop_core::isa::rv64::{base_isa, zknh_isa};
use nanoop_core::nop::Category;
use nanoop_core::rtl::{emit_fused_op, file_stem, parse_module, EmitError, EmitOptions, MAX_FILE_STEM};
use nanoop_core::timing::{collect_patterns, fused_op};
use rand_core::RngCore;

fn sha512sum0_op(name: &str, size: usize) -> FusedOp {
    let isa = zknh_isa();
    let g = &isa.instruction(isa.by_name("sha512sum0").unwrap()).graph;
    let t = table();
    let c = collect_patterns([g], 0.0, &t, 3).unwrap();
    let c = c.iter().find(|c| c.pattern.name == name && c.pattern.size() == size).unwrap();
    fused_op(&c.pattern, &t).unwrap()
}

/// Every arithmetic/logic pattern of up to four nodes in RV64I + Zknh.
fn all_patterns() -> Vec<FusedOp> {
    let t = table();
    let (base, zk) = (base_isa(), zknh_isa());
    let graphs = base.instructions().iter().chain(zk.instructions()).map(|i| &i.graph);
    collect_patterns(graphs, f64::NEG_INFINITY, &t, 4)
        .unwrap()
        .into_iter()
        .filter(|c| c.pattern.nodes.iter().all(|n| matches!(n.op, PatOp::Nop(k) if k.category() == Category::Al)))
        .map(|c| fused_op(&c.pattern, &t).unwrap())
        .collect()
}

fn random_value(r: &mut rand_chacha::ChaCha8Rng, w: u32) -> BitVec {
    let v = ((r.next_u64() as u128) << 64) | r.next_u64() as u128;
    // Small values hit the interesting shift amounts and comparison edges.
    let v = if r.next_u32().is_multiple_of(4) { v % 80 } else { v };
    BitVec::from_u128(v, w)
}

#[test]
fn golden_rotate_and_xor3() {
    let ror = sha512sum0_op("ror", 3);
    let opts = EmitOptions { max_data_inputs: 2, params: Some(vec![28, 36]) };
    let text = emit_fused_op(&ror, &opts).unwrap();
    assert_eq!(text, include_str!("fixtures/ror.v"), "{text}");

    let xor3 = sha512sum0_op("xor3", 2);
    let text = emit_fused_op(&xor3, &EmitOptions { max_data_inputs: 3, params: None }).unwrap();
    assert_eq!(text, include_str!("fixtures/xor3.v"), "{text}");
}

#[test]
fn three_input_unit_is_rejected_by_default() {
    let xor3 = sha512sum0_op("xor3", 2);
    match emit_fused_op(&xor3, &EmitOptions::default()) {
        Err(EmitError::TooManyInputs { inputs: 3, max: 2, .. }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn parameter_count_must_match() {
    let ror = sha512sum0_op("ror", 3);
    let e = emit_fused_op(&ror, &EmitOptions { max_data_inputs: 2, params: Some(vec![1]) }).unwrap_err();
    assert_eq!(e, EmitError::Params { expected: 2, got: 1 });
}

#[test]
fn rotate_module_rotates() {
    let ror = sha512sum0_op("ror", 3);
    let opts = EmitOptions { max_data_inputs: 2, params: Some(vec![28, 36]) };
    let m = parse_module(&emit_fused_op(&ror, &opts).unwrap()).unwrap();
    let x = 0x0123_4567_89ab_cdefu64;
    let out = m.eval(&[BitVec::from_u64(x, 64)], None).unwrap();
    assert_eq!(out[0].as_u64(), x.rotate_right(36));
}

#[test]
fn emitted_modules_match_pattern_semantics() {
    let ops = all_patterns();
    assert!(ops.len() >= 20, "only {} patterns", ops.len());
    let mut r = rng(7);
    let opts = EmitOptions { max_data_inputs: usize::MAX, params: None };
    for op in &ops {
        let p = &op.pattern;
        let m = parse_module(&emit_fused_op(op, &opts).unwrap()).unwrap();
        for _ in 0..1000 {
            let inputs: Vec<BitVec> = p.inputs.iter().map(|w| random_value(&mut r, *w)).collect();
            let params: Vec<BitVec> = p.params.iter().map(|w| random_value(&mut r, *w)).collect();
            let all: Vec<BitVec> = inputs.iter().chain(&params).copied().collect();
            let want = p.eval(&all);
            let got = m.eval(&inputs, Some(&params)).unwrap();
            assert_eq!(got, want, "{} inputs {inputs:?} params {params:?}", p.key);
        }
    }
}

#[test]
fn emission_is_deterministic() {
    for op in all_patterns() {
        let opts = EmitOptions { max_data_inputs: usize::MAX, params: None };
        assert_eq!(emit_fused_op(&op, &opts).unwrap(), emit_fused_op(&op, &opts).unwrap());
    }
}

#[test]
fn file_stems_are_safe_and_bounded() {
    assert_eq!(file_stem("XOR(AND(a,b),c)"), "XOR_AND_a_b__c_");
    let long = "SRL(".repeat(60);
    let s = file_stem(&long);
    assert_eq!(s.len(), MAX_FILE_STEM);
    assert_ne!(s, file_stem(&"SRL[".repeat(60)));
    assert!(s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-'));
}

#[test]
fn interpreter_rejects_malformed_text() {
    assert!(parse_module("module m (input wire [3:0] a, output wire [3:0] y);\nendmodule\n").is_err());
    assert!(parse_module("module m (input wire [3:0] a, output wire [3:0] y);\nassign y = b;\nendmodule\n").is_err());
    let loopy = "module m (input wire a, output wire y);\nwire b = y;\nassign y = b;\nendmodule\n";
    let m = parse_module(loopy).unwrap();
    assert!(m.eval(&[BitVec::bool(true)], None).is_err());
    let ok = "module m (input wire [7:0] a, output wire [7:0] y);\nassign y = $signed(a) >>> 2'd2;\nendmodule\n";
    let m = parse_module(ok).unwrap();
    assert_eq!(m.eval(&[BitVec::from_u64(0x80, 8)], None).unwrap()[0].as_u64(), 0xe0);
}

