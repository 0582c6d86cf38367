//! Processor design points.

use alloc::string::String;
use alloc::vec::Vec;

use super::btb::Replacement;
use super::cache::{Geometry, MemLatency};

/// One point of the tunable design space, plus fixed pipeline latencies.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProcessorConfig {
    pub btb_size_bytes: usize,
    pub btb_replace: Replacement,
    pub fetch_width: usize,
    pub fetch_buffer_entries: usize,
    pub decode_width: usize,
    pub rob_entries: usize,
    pub lq_entries: usize,
    pub sq_entries: usize,
    pub bju: usize,
    pub agu: usize,
    pub alu: usize,
    pub ext: usize,
    pub cache_ways: usize,
    pub block_bytes: usize,
    pub l1d_kb: usize,
    pub l2d_kb: usize,
    pub l3d_mb: usize,
    pub mem_latency: MemLatency,
    /// Cycles between a mispredicted branch resolving and fetch restarting.
    pub redirect_penalty: u32,
    /// Latency of a load served from an older in-flight store.
    pub forward_latency: u32,
}

/// Candidate values of every tunable field.
pub mod candidates {
    pub const BTB_SIZE_BYTES: &[usize] = &[128, 256, 512];
    pub const FETCH_WIDTH: &[usize] = &[4, 6, 8];
    pub const FETCH_BUFFER_ENTRIES: &[usize] = &[16, 32, 48];
    pub const DECODE_WIDTH: &[usize] = &[1, 2, 3, 4, 5];
    pub const ROB_ENTRIES: &[usize] = &[32, 64, 128, 256];
    pub const LQ_ENTRIES: &[usize] = &[8, 16, 32];
    pub const SQ_ENTRIES: &[usize] = &[8, 16, 32];
    pub const BJU: &[usize] = &[1, 2];
    pub const AGU: &[usize] = &[1, 2];
    pub const ALU: &[usize] = &[1, 2, 3, 4];
    pub const EXT: &[usize] = &[1, 2, 3, 4];
    pub const CACHE_WAYS: &[usize] = &[4, 8];
    pub const BLOCK_BYTES: &[usize] = &[32, 64];
    pub const L1D_KB: &[usize] = &[8, 16, 32];
    pub const L2D_KB: &[usize] = &[128, 256, 512];
    pub const L3D_MB: &[usize] = &[1, 2, 4, 8];
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("field `{field}` = {value} is not one of {allowed:?}")]
pub struct ConfigError {
    pub field: &'static str,
    pub value: usize,
    pub allowed: &'static [usize],
}

impl ProcessorConfig {
    /// Field name, current value and candidate set for every numeric field.
    pub fn numeric_fields(&self) -> [(&'static str, usize, &'static [usize]); 16] {
        use candidates::*;
        [
            ("btb_size_bytes", self.btb_size_bytes, BTB_SIZE_BYTES),
            ("fetch_width", self.fetch_width, FETCH_WIDTH),
            ("fetch_buffer_entries", self.fetch_buffer_entries, FETCH_BUFFER_ENTRIES),
            ("decode_width", self.decode_width, DECODE_WIDTH),
            ("rob_entries", self.rob_entries, ROB_ENTRIES),
            ("lq_entries", self.lq_entries, LQ_ENTRIES),
            ("sq_entries", self.sq_entries, SQ_ENTRIES),
            ("bju", self.bju, BJU),
            ("agu", self.agu, AGU),
            ("alu", self.alu, ALU),
            ("ext", self.ext, EXT),
            ("cache_ways", self.cache_ways, CACHE_WAYS),
            ("block_bytes", self.block_bytes, BLOCK_BYTES),
            ("l1d_kb", self.l1d_kb, L1D_KB),
            ("l2d_kb", self.l2d_kb, L2D_KB),
            ("l3d_mb", self.l3d_mb, L3D_MB),
        ]
    }

    /// Sets a numeric field by name; returns false for unknown names.
    pub fn set_numeric(&mut self, field: &str, value: usize) -> bool {
        let slot = match field {
            "btb_size_bytes" => &mut self.btb_size_bytes,
            "fetch_width" => &mut self.fetch_width,
            "fetch_buffer_entries" => &mut self.fetch_buffer_entries,
            "decode_width" => &mut self.decode_width,
            "rob_entries" => &mut self.rob_entries,
            "lq_entries" => &mut self.lq_entries,
            "sq_entries" => &mut self.sq_entries,
            "bju" => &mut self.bju,
            "agu" => &mut self.agu,
            "alu" => &mut self.alu,
            "ext" => &mut self.ext,
            "cache_ways" => &mut self.cache_ways,
            "block_bytes" => &mut self.block_bytes,
            "l1d_kb" => &mut self.l1d_kb,
            "l2d_kb" => &mut self.l2d_kb,
            "l3d_mb" => &mut self.l3d_mb,
            _ => return false,
        };
        *slot = value;
        true
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (field, value, allowed) in self.numeric_fields() {
            if !allowed.contains(&value) {
                return Err(ConfigError { field, value, allowed });
            }
        }
        Ok(())
    }

    pub fn l1(&self) -> Geometry {
        Geometry { size_bytes: self.l1d_kb << 10, ways: self.cache_ways, block_bytes: self.block_bytes }
    }

    pub fn l2(&self) -> Geometry {
        Geometry { size_bytes: self.l2d_kb << 10, ways: self.cache_ways, block_bytes: self.block_bytes }
    }

    pub fn l3(&self) -> Geometry {
        Geometry { size_bytes: self.l3d_mb << 20, ways: self.cache_ways, block_bytes: self.block_bytes }
    }

    /// Short single-line description, `field=value` pairs.
    pub fn describe(&self) -> String {
        let mut parts: Vec<String> = Vec::new();
        parts.push(alloc::format!("btb_replace={}", self.btb_replace.name()));
        for (f, v, _) in self.numeric_fields() {
            parts.push(alloc::format!("{f}={v}"));
        }
        parts.join(" ")
    }

    /// Approximation of a small BOOM core on the tunable fields.
    pub fn small() -> Self {
        ProcessorConfig {
            btb_size_bytes: 128,
            btb_replace: Replacement::Lru,
            fetch_width: 4,
            fetch_buffer_entries: 16,
            decode_width: 1,
            rob_entries: 32,
            lq_entries: 8,
            sq_entries: 8,
            bju: 1,
            agu: 1,
            alu: 1,
            ext: 1,
            cache_ways: 4,
            block_bytes: 64,
            l1d_kb: 16,
            l2d_kb: 256,
            l3d_mb: 1,
            mem_latency: MemLatency::default(),
            redirect_penalty: 3,
            forward_latency: 1,
        }
    }

    /// Approximation of a large BOOM core.
    pub fn large() -> Self {
        ProcessorConfig {
            btb_size_bytes: 256,
            fetch_width: 8,
            fetch_buffer_entries: 32,
            decode_width: 3,
            rob_entries: 128,
            lq_entries: 16,
            sq_entries: 16,
            alu: 3,
            cache_ways: 8,
            l1d_kb: 32,
            l2d_kb: 512,
            l3d_mb: 2,
            ..Self::small()
        }
    }

    /// Approximation of a giga BOOM core.
    pub fn giga() -> Self {
        ProcessorConfig {
            btb_size_bytes: 512,
            fetch_width: 8,
            fetch_buffer_entries: 48,
            decode_width: 5,
            rob_entries: 256,
            lq_entries: 32,
            sq_entries: 32,
            bju: 2,
            agu: 2,
            alu: 4,
            ext: 2,
            l3d_mb: 4,
            ..Self::large()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "small" => Some(Self::small()),
            "large" => Some(Self::large()),
            "giga" => Some(Self::giga()),
            _ => None,
        }
    }
}

impl Default for ProcessorConfig {
    fn default() -> Self {
        Self::small()
    }
}
