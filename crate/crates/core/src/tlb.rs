//! L1 DTLB and the set-associative L2 TLB holding both 4KB and 64KB entries.
//!
//! The L2 is indexed by VPN partitioning: the low four VPN bits (the NAPOT
//! offset) are dropped and the next log2(sets) bits select the set. All 16
//! pages of a 64KB group therefore land in the same set, whatever the size of
//! the entry that ends up describing them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sv39::{napot_frame, PageTableEntry, Perms, VirtAddr, NAPOT_64K_ENCODING, NAPOT_MASK, NAPOT_SHIFT, VPN_MASK};

pub const L1_ENTRIES: usize = 32;
pub const L2_ENTRIES: usize = 1024;

/// Set index of `vpn` in an L2 with `sets` sets.
#[inline]
pub fn l2_index(vpn: u64, sets: usize) -> usize {
    debug_assert!(sets.is_power_of_two());
    ((vpn >> NAPOT_SHIFT) as usize) & (sets - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TlbHit {
    /// Final 4KB frame for the looked-up VPN.
    pub ppn: u64,
    pub perms: Perms,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct L2TlbEntry {
    pub valid: bool,
    /// Full VPN of the fill; only bits 26:4 take part in matching when `n_bit` is set.
    pub tag: u64,
    pub ppn: u64,
    pub n_bit: bool,
    pub perms: Perms,
}

impl L2TlbEntry {
    #[inline]
    pub fn matches(&self, vpn: u64) -> bool {
        self.valid
            && if self.n_bit {
                self.tag >> NAPOT_SHIFT == vpn >> NAPOT_SHIFT
            } else {
                self.tag == vpn
            }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplacementKind {
    #[default]
    Lru,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Replacement {
    Lru,
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct L2TlbConfig {
    pub total_entries: usize,
    pub ways: usize,
    pub replacement: Replacement,
}

impl L2TlbConfig {
    pub fn new(ways: usize) -> Self {
        Self {
            total_entries: L2_ENTRIES,
            ways,
            replacement: Replacement::Lru,
        }
    }

    pub fn sets(&self) -> usize {
        self.total_entries / self.ways.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ways == 0 || self.total_entries == 0 || !self.total_entries.is_multiple_of(self.ways) {
            return Err(Error::TlbConfig(format!(
                "{} entries cannot be split into {}-way sets",
                self.total_entries, self.ways
            )));
        }
        if !self.sets().is_power_of_two() {
            return Err(Error::TlbConfig(format!(
                "{} sets is not a power of two",
                self.sets()
            )));
        }
        Ok(())
    }
}

/// Lookup/fill counters kept by the L2 itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct L2Counters {
    pub hits: u64,
    pub misses: u64,
    pub fills: u64,
    pub evictions: u64,
}

#[derive(Debug, Clone)]
pub struct L2Tlb {
    config: L2TlbConfig,
    sets: usize,
    entries: Vec<L2TlbEntry>,
    last_use: Vec<u64>,
    clock: u64,
    rng: Option<ChaCha8Rng>,
    counters: L2Counters,
}

impl L2Tlb {
    pub fn new(config: L2TlbConfig) -> Result<Self> {
        config.validate()?;
        let rng = match config.replacement {
            Replacement::Lru => None,
            Replacement::Random { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        };
        Ok(Self {
            config,
            sets: config.sets(),
            entries: vec![L2TlbEntry::default(); config.total_entries],
            last_use: vec![0; config.total_entries],
            clock: 0,
            rng,
            counters: L2Counters::default(),
        })
    }

    pub fn config(&self) -> &L2TlbConfig {
        &self.config
    }

    pub fn sets(&self) -> usize {
        self.sets
    }

    pub fn ways(&self) -> usize {
        self.config.ways
    }

    pub fn counters(&self) -> L2Counters {
        self.counters
    }

    pub fn index(&self, vpn: u64) -> usize {
        l2_index(vpn, self.sets)
    }

    pub fn set(&self, index: usize) -> &[L2TlbEntry] {
        let ways = self.config.ways;
        &self.entries[index * ways..(index + 1) * ways]
    }

    pub fn valid_entries(&self) -> usize {
        self.entries.iter().filter(|e| e.valid).count()
    }

    fn set_range(&self, vpn: u64) -> std::ops::Range<usize> {
        let start = self.index(vpn) * self.config.ways;
        start..start + self.config.ways
    }

    fn touch(&mut self, slot: usize) {
        self.clock += 1;
        self.last_use[slot] = self.clock;
    }

    pub fn lookup(&mut self, vpn: u64) -> Option<TlbHit> {
        let vpn = vpn & VPN_MASK;
        let range = self.set_range(vpn);
        let found = range.clone().find(|&slot| self.entries[slot].matches(vpn));
        match found {
            Some(slot) => {
                self.touch(slot);
                self.counters.hits += 1;
                let e = self.entries[slot];
                let ppn = if e.n_bit { napot_frame(e.ppn, vpn) } else { e.ppn };
                Some(TlbHit { ppn, perms: e.perms })
            }
            None => {
                self.counters.misses += 1;
                None
            }
        }
    }

    /// Fills the entry for `vpn` from a level-0 leaf, carrying over its N bit.
    pub fn insert(&mut self, vpn: u64, pte: &PageTableEntry) -> Result<()> {
        if !pte.is_leaf() || pte.level != 0 {
            return Err(Error::NotALeaf);
        }
        if pte.n_bit && pte.ppn & NAPOT_MASK != NAPOT_64K_ENCODING {
            return Err(Error::MalformedNapot { ppn: pte.ppn });
        }
        let vpn = vpn & VPN_MASK;
        let range = self.set_range(vpn);
        let slot = if let Some(slot) = range.clone().find(|&s| self.entries[s].matches(vpn)) {
            slot
        } else if let Some(slot) = range.clone().find(|&s| !self.entries[s].valid) {
            slot
        } else {
            self.counters.evictions += 1;
            match self.rng.as_mut() {
                Some(rng) => range.start + rng.gen_range(0..self.config.ways),
                None => range
                    .min_by_key(|&s| self.last_use[s])
                    .expect("sets have at least one way"),
            }
        };
        self.entries[slot] = L2TlbEntry {
            valid: true,
            tag: vpn,
            ppn: pte.ppn,
            n_bit: pte.n_bit,
            perms: pte.perms,
        };
        self.counters.fills += 1;
        self.touch(slot);
        Ok(())
    }

    /// Invalidates the whole set `va` indexes into.
    pub fn flush(&mut self, va: VirtAddr) {
        for slot in self.set_range(va.vpn()) {
            self.entries[slot].valid = false;
        }
    }

    pub fn flush_all(&mut self) {
        for e in &mut self.entries {
            e.valid = false;
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct L1Entry {
    valid: bool,
    vpn: u64,
    ppn: u64,
    perms: Perms,
    last_use: u64,
}

/// Fully associative, true-LRU DTLB holding single 4KB translations.
#[derive(Debug, Clone)]
pub struct L1Dtlb {
    entries: [L1Entry; L1_ENTRIES],
    clock: u64,
}

impl Default for L1Dtlb {
    fn default() -> Self {
        Self::new()
    }
}

impl L1Dtlb {
    pub fn new() -> Self {
        Self {
            entries: [L1Entry::default(); L1_ENTRIES],
            clock: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        L1_ENTRIES
    }

    pub fn len(&self) -> usize {
        self.entries.iter().filter(|e| e.valid).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lookup(&mut self, vpn: u64) -> Option<TlbHit> {
        let e = self.entries.iter_mut().find(|e| e.valid && e.vpn == vpn)?;
        self.clock += 1;
        e.last_use = self.clock;
        Some(TlbHit {
            ppn: e.ppn,
            perms: e.perms,
        })
    }

    pub fn insert(&mut self, vpn: u64, ppn: u64, perms: Perms) {
        self.clock += 1;
        let entry = L1Entry {
            valid: true,
            vpn,
            ppn,
            perms,
            last_use: self.clock,
        };
        let slot = match self.entries.iter().position(|e| e.valid && e.vpn == vpn) {
            Some(i) => i,
            None => match self.entries.iter().position(|e| !e.valid) {
                Some(i) => i,
                None => self
                    .entries
                    .iter()
                    .enumerate()
                    .min_by_key(|(_, e)| e.last_use)
                    .map(|(i, _)| i)
                    .expect("L1 is never empty"),
            },
        };
        self.entries[slot] = entry;
    }

    pub fn flush_all(&mut self) {
        for e in &mut self.entries {
            e.valid = false;
        }
    }
}
