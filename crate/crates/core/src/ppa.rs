//! Linear area and power estimates of a processor design point.
//!
//! Functional units are priced from the instruction set they implement: one
//! ALU carries every distinct unfused arithmetic/logic nOP kind used by the
//! ISA, one EXT unit carries every distinct fused op. Everything else is a
//! per-entry or per-byte coefficient times the configured size.

use alloc::collections::BTreeMap;
use alloc::string::String;

use crate::dfg::Op;
use crate::isa::Isa;
use crate::timing::{MissingTiming, TimingTable};
use crate::uarch::ProcessorConfig;

/// Per-structure costs. Area coefficients are in µm², power in mW; the same
/// shape serves both.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Coefficients {
    pub rob_entry: f64,
    pub lq_entry: f64,
    pub sq_entry: f64,
    pub fetch_buffer_entry: f64,
    /// Per instruction fetched per cycle.
    pub fetch_lane: f64,
    /// Per instruction decoded and retired per cycle.
    pub decode_lane: f64,
    pub btb_byte: f64,
    pub l1_kb: f64,
    pub l2_kb: f64,
    pub l3_kb: f64,
    /// Tag comparators, charged per way at every cache level.
    pub cache_way: f64,
    /// Fill and line buffers, charged per block byte at every cache level.
    pub block_byte: f64,
    pub bju: f64,
    pub agu: f64,
    /// Fixed part of one ALU, on top of its nOP datapaths.
    pub alu: f64,
    /// Fixed part of one EXT unit, on top of its fused datapaths.
    pub ext: f64,
}

impl Coefficients {
    pub fn fields(&self) -> [(&'static str, f64); 16] {
        [
            ("rob_entry", self.rob_entry),
            ("lq_entry", self.lq_entry),
            ("sq_entry", self.sq_entry),
            ("fetch_buffer_entry", self.fetch_buffer_entry),
            ("fetch_lane", self.fetch_lane),
            ("decode_lane", self.decode_lane),
            ("btb_byte", self.btb_byte),
            ("l1_kb", self.l1_kb),
            ("l2_kb", self.l2_kb),
            ("l3_kb", self.l3_kb),
            ("cache_way", self.cache_way),
            ("block_byte", self.block_byte),
            ("bju", self.bju),
            ("agu", self.agu),
            ("alu", self.alu),
            ("ext", self.ext),
        ]
    }

    pub fn set(&mut self, name: &str, v: f64) -> bool {
        let slot = match name {
            "rob_entry" => &mut self.rob_entry,
            "lq_entry" => &mut self.lq_entry,
            "sq_entry" => &mut self.sq_entry,
            "fetch_buffer_entry" => &mut self.fetch_buffer_entry,
            "fetch_lane" => &mut self.fetch_lane,
            "decode_lane" => &mut self.decode_lane,
            "btb_byte" => &mut self.btb_byte,
            "l1_kb" => &mut self.l1_kb,
            "l2_kb" => &mut self.l2_kb,
            "l3_kb" => &mut self.l3_kb,
            "cache_way" => &mut self.cache_way,
            "block_byte" => &mut self.block_byte,
            "bju" => &mut self.bju,
            "agu" => &mut self.agu,
            "alu" => &mut self.alu,
            "ext" => &mut self.ext,
            _ => return false,
        };
        *slot = v;
        true
    }

    /// Name of the first negative or non-finite coefficient.
    pub fn validate(&self) -> Result<(), &'static str> {
        match self.fields().into_iter().find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
            Some((n, _)) => Err(n),
            None => Ok(()),
        }
    }

    /// Linear structure terms, excluding functional-unit datapaths.
    fn structures(&self, cfg: &ProcessorConfig) -> f64 {
        let n = |v: usize| v as f64;
        self.rob_entry * n(cfg.rob_entries)
            + self.lq_entry * n(cfg.lq_entries)
            + self.sq_entry * n(cfg.sq_entries)
            + self.fetch_buffer_entry * n(cfg.fetch_buffer_entries)
            + self.fetch_lane * n(cfg.fetch_width)
            + self.decode_lane * n(cfg.decode_width)
            + self.btb_byte * n(cfg.btb_size_bytes)
            + self.l1_kb * n(cfg.l1d_kb)
            + self.l2_kb * n(cfg.l2d_kb)
            + self.l3_kb * n(cfg.l3d_mb * 1024)
            + 3.0 * (self.cache_way * n(cfg.cache_ways) + self.block_byte * n(cfg.block_bytes))
            + self.bju * n(cfg.bju)
            + self.agu * n(cfg.agu)
            + self.alu * n(cfg.alu)
            + self.ext * n(cfg.ext)
    }
}

/// Datapath area of one ALU and one EXT unit for `isa`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitAreas {
    /// Area of each distinct unfused AL kind, by name.
    pub alu_kinds: BTreeMap<String, f64>,
    /// Area of each distinct fused op, by pattern key.
    pub ext_ops: BTreeMap<String, f64>,
}

impl UnitAreas {
    pub fn of(isa: &Isa, table: &TimingTable) -> Result<UnitAreas, MissingTiming> {
        let mut alu_kinds = BTreeMap::new();
        let mut ext_ops = BTreeMap::new();
        for ins in isa.instructions() {
            for node in ins.graph.nodes() {
                match &node.op {
                    op if op.is_fusable() => {
                        let name = op.name();
                        if !alu_kinds.contains_key(name) {
                            alu_kinds.insert(String::from(name), table.get(name)?.area);
                        }
                    }
                    Op::Fused(f) => {
                        if !f.area.is_finite() {
                            return Err(MissingTiming(f.pattern.name.clone()));
                        }
                        ext_ops.entry(f.pattern.key.clone()).or_insert(f.area);
                    }
                    _ => {}
                }
            }
        }
        Ok(UnitAreas { alu_kinds, ext_ops })
    }

    pub fn alu(&self) -> f64 {
        self.alu_kinds.values().sum()
    }

    pub fn ext(&self) -> f64 {
        self.ext_ops.values().sum()
    }
}

/// Estimated core area in µm².
pub fn area(cfg: &ProcessorConfig, isa: &Isa, coeffs: &Coefficients, table: &TimingTable) -> Result<f64, MissingTiming> {
    let units = UnitAreas::of(isa, table)?;
    Ok(coeffs.structures(cfg) + units.alu() * cfg.alu as f64 + units.ext() * cfg.ext as f64)
}

/// Linear power proxy in mW. Functional units are charged only their fixed
/// per-unit coefficients.
pub fn power(cfg: &ProcessorConfig, coeffs: &Coefficients) -> f64 {
    coeffs.structures(cfg)
}
