//! Branch target buffer: set-associative, keyed by fetch PC.

use alloc::vec::Vec;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Bytes per BTB entry (tag plus target).
pub const BTB_ENTRY_BYTES: usize = 8;
pub const BTB_WAYS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Replacement {
    Lfu,
    Fifo,
    Random,
    Lru,
}

impl Replacement {
    pub const ALL: [Replacement; 4] = [Replacement::Lfu, Replacement::Fifo, Replacement::Random, Replacement::Lru];

    pub fn name(self) -> &'static str {
        match self {
            Replacement::Lfu => "lfu",
            Replacement::Fifo => "fifo",
            Replacement::Random => "random",
            Replacement::Lru => "lru",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Replacement::ALL.into_iter().find(|r| r.name() == s)
    }
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    pc: u64,
    target: u64,
    inserted: u64,
    used: u64,
    hits: u64,
}

#[derive(Debug, Clone)]
pub struct Btb {
    sets: Vec<Vec<Entry>>,
    ways: usize,
    policy: Replacement,
    clock: u64,
    rng: ChaCha8Rng,
}

impl Btb {
    /// A BTB of `bytes` capacity in sets of [`BTB_WAYS`] entries.
    pub fn new(bytes: usize, policy: Replacement, seed: u64) -> Self {
        let entries = (bytes / BTB_ENTRY_BYTES).max(1);
        let ways = BTB_WAYS.min(entries);
        Btb::with_geometry(entries / ways, ways, policy, seed)
    }

    pub fn with_geometry(sets: usize, ways: usize, policy: Replacement, seed: u64) -> Self {
        assert!(sets > 0 && ways > 0);
        Btb { sets: alloc::vec![Vec::new(); sets], ways, policy, clock: 0, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn capacity(&self) -> usize {
        self.sets.len() * self.ways
    }

    fn set_of(&self, pc: u64) -> usize {
        ((pc >> 2) % self.sets.len() as u64) as usize
    }

    /// Predicted target for a fetch at `pc`; a hit counts as a use.
    pub fn lookup(&mut self, pc: u64) -> Option<u64> {
        self.clock += 1;
        let clock = self.clock;
        let s = self.set_of(pc);
        let e = self.sets[s].iter_mut().find(|e| e.pc == pc)?;
        e.used = clock;
        e.hits += 1;
        Some(e.target)
    }

    /// Records a taken control transfer from `pc` to `target`.
    pub fn update(&mut self, pc: u64, target: u64) {
        self.clock += 1;
        let clock = self.clock;
        let s = self.set_of(pc);
        if let Some(e) = self.sets[s].iter_mut().find(|e| e.pc == pc) {
            e.target = target;
            e.used = clock;
            e.hits += 1;
            return;
        }
        let fresh = Entry { pc, target, inserted: clock, used: clock, hits: 1 };
        if self.sets[s].len() < self.ways {
            self.sets[s].push(fresh);
            return;
        }
        let set = &self.sets[s];
        let victim = match self.policy {
            Replacement::Lru => argmin(set, |e| (e.used, 0)),
            Replacement::Fifo => argmin(set, |e| (e.inserted, 0)),
            Replacement::Lfu => argmin(set, |e| (e.hits, e.inserted)),
            Replacement::Random => (self.rng.next_u64() % set.len() as u64) as usize,
        };
        self.sets[s][victim] = fresh;
    }

    pub fn contains(&self, pc: u64) -> bool {
        self.sets[self.set_of(pc)].iter().any(|e| e.pc == pc)
    }
}

fn argmin(set: &[Entry], key: impl Fn(&Entry) -> (u64, u64)) -> usize {
    let mut best = 0;
    for i in 1..set.len() {
        if key(&set[i]) < key(&set[best]) {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    // A, B and C all map to the single set.
    const A: u64 = 0x100;
    const B: u64 = 0x200;
    const C: u64 = 0x300;

    fn two_way(policy: Replacement) -> Btb {
        let mut b = Btb::with_geometry(1, 2, policy, 1);
        b.update(A, 1);
        b.update(B, 2);
        b
    }

    #[test]
    fn lru_evicts_least_recent() {
        let mut b = two_way(Replacement::Lru);
        b.lookup(A);
        b.update(C, 3);
        assert!(b.contains(A) && !b.contains(B) && b.contains(C));
    }

    #[test]
    fn fifo_evicts_oldest_insert() {
        let mut b = two_way(Replacement::Fifo);
        b.lookup(A);
        b.update(C, 3);
        assert!(!b.contains(A) && b.contains(B));
    }

    #[test]
    fn lfu_evicts_least_used() {
        let mut b = two_way(Replacement::Lfu);
        b.lookup(A);
        b.lookup(A);
        b.update(C, 3);
        assert!(b.contains(A) && !b.contains(B));
    }

    #[test]
    fn random_is_seeded() {
        let run = |seed| {
            let mut b = Btb::with_geometry(1, 2, Replacement::Random, seed);
            for pc in 0..50u64 {
                b.update(pc * 4, pc);
            }
            (0..50u64).filter(|pc| b.contains(pc * 4)).collect::<Vec<_>>()
        };
        assert_eq!(run(9), run(9));
        assert_eq!(run(9).len(), 2);
    }

    #[test]
    fn capacity_from_bytes() {
        assert_eq!(Btb::new(128, Replacement::Lru, 0).capacity(), 16);
        assert_eq!(Btb::new(512, Replacement::Lru, 0).capacity(), 64);
    }
}
