//! Set-associative write-back, write-allocate data caches with LRU
//! replacement, chained into a hierarchy ending in DRAM.

use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Geometry {
    pub size_bytes: usize,
    pub ways: usize,
    pub block_bytes: usize,
}

impl Geometry {
    pub fn sets(&self) -> usize {
        self.size_bytes / (self.ways * self.block_bytes)
    }

    pub fn is_valid(&self) -> bool {
        self.ways > 0
            && self.block_bytes.is_power_of_two()
            && self.size_bytes.is_multiple_of(self.ways * self.block_bytes)
            && self.sets() > 0
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Line {
    block: u64,
    dirty: bool,
    used: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub writebacks: u64,
}

#[derive(Debug, Clone)]
pub struct Cache {
    geo: Geometry,
    sets: Vec<Vec<Line>>,
    clock: u64,
    pub stats: CacheStats,
}

impl Cache {
    pub fn new(geo: Geometry) -> Self {
        assert!(geo.is_valid(), "invalid cache geometry {geo:?}");
        Cache { geo, sets: alloc::vec![Vec::new(); geo.sets()], clock: 0, stats: CacheStats::default() }
    }

    pub fn geometry(&self) -> Geometry {
        self.geo
    }

    pub fn block_of(&self, addr: u64) -> u64 {
        addr / self.geo.block_bytes as u64
    }

    fn set_of(&self, block: u64) -> usize {
        (block % self.sets.len() as u64) as usize
    }

    /// Looks up `block`; on a miss, allocates it. Returns whether it hit and
    /// the dirty block evicted to make room, if any.
    pub fn access_block(&mut self, block: u64, write: bool) -> (bool, Option<u64>) {
        self.clock += 1;
        let clock = self.clock;
        let s = self.set_of(block);
        let ways = self.geo.ways;
        let set = &mut self.sets[s];
        if let Some(l) = set.iter_mut().find(|l| l.block == block) {
            l.used = clock;
            l.dirty |= write;
            self.stats.hits += 1;
            return (true, None);
        }
        self.stats.misses += 1;
        let fresh = Line { block, dirty: write, used: clock };
        if set.len() < ways {
            set.push(fresh);
            return (false, None);
        }
        let victim = (0..set.len()).min_by_key(|&i| set[i].used).unwrap();
        let old = set[victim];
        set[victim] = fresh;
        if old.dirty {
            self.stats.writebacks += 1;
            (false, Some(old.block))
        } else {
            (false, None)
        }
    }

    pub fn contains(&self, addr: u64) -> bool {
        let b = self.block_of(addr);
        self.sets[self.set_of(b)].iter().any(|l| l.block == b)
    }

    /// Marks a present block dirty; returns false when absent.
    fn absorb_writeback(&mut self, block: u64) -> bool {
        let s = self.set_of(block);
        match self.sets[s].iter_mut().find(|l| l.block == block) {
            Some(l) => {
                l.dirty = true;
                true
            }
            None => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MemLatency {
    pub l1: u32,
    pub l2: u32,
    pub l3: u32,
    pub dram: u32,
}

impl Default for MemLatency {
    fn default() -> Self {
        MemLatency { l1: 2, l2: 12, l3: 30, dram: 100 }
    }
}

/// L1, L2 and L3 data caches in front of DRAM.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    pub levels: [Cache; 3],
    pub latency: MemLatency,
    pub dram_accesses: u64,
}

impl Hierarchy {
    pub fn new(l1: Geometry, l2: Geometry, l3: Geometry, latency: MemLatency) -> Self {
        Hierarchy { levels: [Cache::new(l1), Cache::new(l2), Cache::new(l3)], latency, dram_accesses: 0 }
    }

    /// Accesses `addr`, filling every level that missed. Returns the
    /// latency: the sum of level latencies down to the level that hit.
    pub fn access(&mut self, addr: u64, write: bool) -> u32 {
        let lat = [self.latency.l1, self.latency.l2, self.latency.l3];
        let mut total = 0;
        for (i, &l) in lat.iter().enumerate() {
            total += l;
            let block = addr / self.levels[i].geo.block_bytes as u64;
            let (hit, evicted) = self.levels[i].access_block(block, write && i == 0);
            if let Some(b) = evicted {
                self.write_back(i + 1, b * self.levels[i].geo.block_bytes as u64);
            }
            if hit {
                return total;
            }
        }
        self.dram_accesses += 1;
        total + self.latency.dram
    }

    fn write_back(&mut self, from: usize, addr: u64) {
        for i in from..3 {
            let b = addr / self.levels[i].geo.block_bytes as u64;
            if self.levels[i].absorb_writeback(b) {
                return;
            }
        }
    }

    pub fn stats(&self) -> [CacheStats; 3] {
        [self.levels[0].stats, self.levels[1].stats, self.levels[2].stats]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geo(size: usize, ways: usize, block: usize) -> Geometry {
        Geometry { size_bytes: size, ways, block_bytes: block }
    }

    #[test]
    fn repeated_access_hits() {
        let mut c = Cache::new(geo(1024, 4, 32));
        assert!(!c.access_block(5, false).0);
        assert!(c.access_block(5, false).0);
        assert_eq!(c.stats, CacheStats { hits: 1, misses: 1, writebacks: 0 });
    }

    #[test]
    fn same_block_hits() {
        let mut h = Hierarchy::new(geo(8192, 4, 64), geo(131072, 4, 64), geo(1 << 20, 4, 64), MemLatency::default());
        assert_eq!(h.access(0x1000, false), 2 + 12 + 30 + 100);
        assert_eq!(h.access(0x103f, false), 2);
        assert_eq!(h.access(0x1040, false), 144);
    }

    #[test]
    fn conflict_misses_cycle() {
        // 4 ways x 8 sets x 32 bytes: blocks with stride sets*block share a set.
        let g = geo(1024, 4, 32);
        let mut c = Cache::new(g);
        let stride = (g.sets() * g.block_bytes) as u64;
        for _ in 0..3 {
            for k in 0..5u64 {
                c.access_block(c.block_of(k * stride), false);
            }
        }
        // Five blocks cycling through a 4-way LRU set never hit.
        assert_eq!(c.stats.hits, 0);
        assert_eq!(c.stats.misses, 15);
    }

    #[test]
    fn dirty_eviction_writes_back() {
        let mut c = Cache::new(geo(64, 1, 32));
        c.access_block(0, true);
        let (_, ev) = c.access_block(2, false);
        assert_eq!(ev, Some(0));
        assert_eq!(c.stats.writebacks, 1);
    }
}
