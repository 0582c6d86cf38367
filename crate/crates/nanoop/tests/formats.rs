mod common;

use std::path::Path;

use common::demo;
use nanoop::data;
use nanoop::formats::{self, config_to_toml, parse_config, parse_ppa, parse_timing, parse_u64, FormatError, RowSource};
use nanoop_core::uarch::{ProcessorConfig, Replacement};
use proptest::prelude::*;

fn p() -> &'static Path {
    Path::new("t.toml")
}

fn message(e: FormatError) -> String {
    e.to_string()
}

#[test]
fn numbers_in_several_notations() {
    assert_eq!(parse_u64("0x10"), Some(16));
    assert_eq!(parse_u64("0b101"), Some(5));
    assert_eq!(parse_u64("1_000"), Some(1000));
    assert_eq!(parse_u64("-1"), Some(u64::MAX));
    assert_eq!(parse_u64("0xffff_ffff_ffff_ffff"), Some(u64::MAX));
    assert_eq!(parse_u64("0x1_0000_0000_0000_0000"), None);
    assert_eq!(parse_u64("ten"), None);
}

#[test]
fn builtin_tables_parse() {
    let t = data::timing();
    assert_eq!(t.table.cycle_ns(), 0.5);
    for k in ["UNSIGN_EXTEND", "COND_ASSIGN", "CONCAT", "AND", "OR", "NOT", "XOR"] {
        assert_eq!(t.sources[k], RowSource::Measured, "{k}");
    }
    assert_eq!(t.sources["ADD"], RowSource::Calibration);
    assert_eq!(t.table.get("XOR").unwrap().arrival_ps, 160);
    let (area, power) = data::ppa();
    assert!(area.fields().iter().all(|(_, v)| *v >= 0.0));
    assert!(power.fields().iter().any(|(_, v)| *v > 0.0));
    assert!(data::shots().len() >= 2);
}

#[test]
fn timing_rows_are_checked() {
    let e = parse_timing("clock_ns = 0.5\n[nop.XOR]\ndelay_ns = -1\narea_um2 = 1\nsource = \"measured\"\n", p()).unwrap_err();
    assert!(message(e).contains("XOR"));
    let e = parse_timing("clock_ns = 0\n[nop]\n", p()).unwrap_err();
    assert!(message(e).contains("clock_ns"));
    let e = parse_timing("clock_ns = 1\n[nop.XOR]\ndelay_ns = 1\narea_um2 = 1\nsource = \"guess\"\n", p()).unwrap_err();
    assert!(message(e).contains("t.toml"));
}

#[test]
fn ppa_needs_every_coefficient_and_nothing_else() {
    let full = data::PPA;
    parse_ppa(full, p()).unwrap();
    let extra = full.replacen("[area]\n", "[area]\nwarp_drive = 1.0\n", 1);
    assert!(message(parse_ppa(&extra, p()).unwrap_err()).contains("warp_drive"));
    let first = full.lines().find(|l| l.contains('=') && !l.starts_with('#')).unwrap();
    let name = first.split('=').next().unwrap().trim();
    let missing = full.replacen(first, "", 1);
    assert!(message(parse_ppa(&missing, p()).unwrap_err()).contains(name));
}

#[test]
fn config_files_override_a_preset() {
    let c = parse_config("preset = \"large\"\nalu = 1\nbtb_replace = \"lfu\"\n[mem_latency]\ndram = 250\n", p()).unwrap();
    let mut want = ProcessorConfig::large();
    want.alu = 1;
    want.btb_replace = Replacement::from_name("lfu").unwrap();
    want.mem_latency.dram = 250;
    assert_eq!(c, want);
    for (text, needle) in [
        ("preset = \"huge\"\n", "huge"),
        ("alu = -1\n", "alu"),
        ("wings = 2\n", "wings"),
        ("btb_replace = \"mru\"\n", "mru"),
        ("rob_entries = 7\n", "rob_entries"),
        ("[mem_latency]\nl4 = 3\n", "l4"),
    ] {
        let e = message(parse_config(text, p()).unwrap_err());
        assert!(e.contains(needle), "{text}: {e}");
    }
}

fn arb_config() -> impl Strategy<Value = ProcessorConfig> {
    let fields = ProcessorConfig::small().numeric_fields();
    let picks: Vec<_> = fields.iter().map(|(_, _, allowed)| 0..allowed.len()).collect();
    (picks, 0..Replacement::ALL.len(), 0u32..20, 0u32..5).prop_filter_map("invalid combination", move |(idx, pol, rp, fw)| {
        let mut c = ProcessorConfig::small();
        for ((name, _, allowed), i) in fields.iter().zip(idx) {
            c.set_numeric(name, allowed[i]);
        }
        c.btb_replace = Replacement::ALL[pol];
        c.redirect_penalty = rp;
        c.forward_latency = fw;
        c.validate().ok().map(|_| c)
    })
}

proptest! {
    #[test]
    fn config_text_round_trips(c in arb_config()) {
        let text = config_to_toml(&c);
        prop_assert_eq!(parse_config(&text, p()).unwrap(), c);
    }

    #[test]
    fn hex_and_decimal_agree(v in any::<u64>()) {
        prop_assert_eq!(parse_u64(&format!("{v:#x}")), Some(v));
        prop_assert_eq!(parse_u64(&v.to_string()), Some(v));
        prop_assert_eq!(parse_u64(&format!("{v:#b}")), Some(v));
    }
}

#[test]
fn demo_manifests_load() {
    let m = formats::load_isa(&demo().join("isa.toml")).unwrap();
    assert_eq!(m.custom.len(), 1);
    assert_eq!(m.custom[0].name, "rori");
    assert!(m.isa.by_name("rori").is_some());
    assert!(m.isa.by_name("sha256sig0").is_some());
    assert_eq!(m.fusion.as_ref().unwrap().gain, 0.5);

    let t = formats::load_tests(&demo().join("tests/programs.toml")).unwrap();
    assert_eq!(t.program.len(), 3);
    assert_eq!(t.program[1].name, "sha256-base");
    assert!(t.program[2].source.contains("sha256sig0"));
    let t = formats::load_tests(&demo().join("tests/instructions.toml")).unwrap();
    assert_eq!(t.for_instruction("rori").len(), 3);
    let sd = &t.for_instruction("sd")[0];
    assert_eq!(sd.operands.iter().find(|(n, _)| n == "imm").unwrap().1, (-8i64) as u64);

    let d = formats::load_dse(&demo().join("dse.toml")).unwrap();
    assert_eq!(d.space.size(), 4 * 3 * 3 * 2);
    assert_eq!(d.benchmarks.len(), 2);
    assert!(d.benchmarks[0].program.is_file());
}

#[test]
fn isa_manifest_errors_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let f = dir.path().join(name);
        std::fs::write(&f, text).unwrap();
        f
    };
    let e = formats::load_isa(&write("a.toml", "extensions = [\"rv32m\"]\n")).unwrap_err();
    assert!(message(e).contains("rv32m"));
    write("dup.nop", "def addi(rd, rs1, imm):\n    REG_WRITE(rd, REG_READ(rs1))\n    INC_PC(pc)\n");
    let text = "extensions = [\"rv64i\"]\n[[instruction]]\nsource = \"dup.nop\"\n\
                fixed = [[6, 0, 0x0b]]\noperand = [{ name = \"rd\", bits = [[11, 7]] }, { name = \"rs1\", bits = [[19, 15]] }, { name = \"imm\", bits = [[31, 20]] }]\n";
    let e = formats::load_isa(&write("b.toml", text)).unwrap_err();
    assert!(message(e).contains("addi"), "duplicate names are rejected");
    let e = formats::load_isa(&write("c.toml", "extensions = []\n[fusion]\ngain = 2.0\n")).unwrap_err();
    assert!(message(e).contains("gain"));
    let e = formats::load_tests(&write("d.toml", "[[case]]\ninstruction = \"add\"\nname = \"n\"\nregs = { y3 = 1 }\n")).unwrap_err();
    assert!(message(e).contains("y3"));
    let e = formats::load_tests(&write("e.toml", "[[case]]\ninstruction = \"add\"\nname = \"n\"\nmemory = [{ addr = 0, bytes = \"zz\" }]\n")).unwrap_err();
    assert!(message(e).contains("zz"));
}

#[test]
fn shots_file_needs_source_and_description() {
    let e = data::parse_shots("[[shot]]\ndescription = \"x\"\n", p()).unwrap_err();
    assert!(message(e).contains("t.toml"));
}
