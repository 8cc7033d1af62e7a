//! Synthetic sv39 radix page tables and the page-table walker.
//!
//! Tables live in a sparse simulated physical memory. Table frames are handed
//! out by a bump allocator that starts above every region's frames.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sv39::{
    decode_pte_at, encode_pte, is_canonical, PageSize, PageTableEntry, Perms, VirtAddr, LEVELS,
    PAGE_SHIFT, PAGE_SIZE, PPN_MASK, PTE_BYTES,
};

/// A virtual memory region backed by physically contiguous frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub base_va: u64,
    pub length: u64,
    pub page_size: PageSize,
    pub base_ppn: u64,
}

impl RegionSpec {
    pub fn end_va(&self) -> u64 {
        self.base_va.wrapping_add(self.length)
    }

    pub fn frames(&self) -> u64 {
        self.length / PAGE_SIZE
    }

    pub fn contains(&self, va: u64) -> bool {
        va.wrapping_sub(self.base_va) < self.length
    }

    /// Closed-form translation: base_ppn + (va - base_va) / 4KB.
    pub fn translate(&self, va: u64) -> Option<u64> {
        self.contains(va)
            .then(|| self.base_ppn + (va - self.base_va) / PAGE_SIZE)
    }

    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::EmptyRegion {
                base_va: self.base_va,
            });
        }
        let align = self.page_size.bytes();
        if !self.base_va.is_multiple_of(align) {
            return Err(Error::Alignment {
                what: "region base_va",
                value: self.base_va,
                align,
            });
        }
        if !self.length.is_multiple_of(align) {
            return Err(Error::Alignment {
                what: "region length",
                value: self.length,
                align,
            });
        }
        let frames = self.page_size.frames();
        if !self.base_ppn.is_multiple_of(frames) {
            return Err(Error::Alignment {
                what: "region base_ppn",
                value: self.base_ppn,
                align: frames,
            });
        }
        let last = self.base_va.wrapping_add(self.length - 1);
        let same_half = (self.base_va >> 38) & 1 == (last >> 38) & 1;
        if !is_canonical(self.base_va)
            || !is_canonical(last)
            || last < self.base_va
            || !same_half
            || self.base_ppn.checked_add(self.frames()).is_none_or(|end| end > PPN_MASK + 1)
        {
            return Err(Error::RegionOutOfRange {
                base_va: self.base_va,
            });
        }
        Ok(())
    }
}

pub fn check_disjoint(regions: &[RegionSpec]) -> Result<()> {
    let mut sorted: Vec<&RegionSpec> = regions.iter().collect();
    sorted.sort_by_key(|r| r.base_va);
    for pair in sorted.windows(2) {
        if pair[1].base_va < pair[0].end_va() {
            return Err(Error::RegionOverlap {
                first: pair[0].base_va,
                second: pair[1].base_va,
            });
        }
    }
    Ok(())
}

/// Sparse word-addressed physical memory holding page-table pages.
#[derive(Debug, Clone, Default)]
pub struct SimPhysMem {
    words: HashMap<u64, u64>,
    read_count: u64,
}

impl SimPhysMem {
    pub fn new() -> Self {
        Self::default()
    }

    /// A counted read, as performed by the walker.
    pub fn read(&mut self, pa: u64) -> u64 {
        self.read_count += 1;
        self.peek(pa)
    }

    /// Uncounted read; unwritten words read as zero.
    pub fn peek(&self, pa: u64) -> u64 {
        self.words.get(&pa).copied().unwrap_or(0)
    }

    pub fn write(&mut self, pa: u64, word: u64) {
        self.words.insert(pa, word);
    }

    pub fn read_count(&self) -> u64 {
        self.read_count
    }
}

/// A built radix tree and the memory holding it.
#[derive(Debug, Clone)]
pub struct PageTable {
    pub mem: SimPhysMem,
    pub root_ppn: u64,
    table_pages: usize,
}

impl PageTable {
    /// Number of 4KB table pages allocated, root included.
    pub fn table_pages(&self) -> usize {
        self.table_pages
    }

    /// Physical address of the PTE slot for `va` in the table at `table_ppn`.
    pub fn slot_addr(table_ppn: u64, va: VirtAddr, level: usize) -> u64 {
        (table_ppn << PAGE_SHIFT) + va.vpn_level(level) * PTE_BYTES
    }

    /// Uncounted walk returning the raw level-0 slot address for `va`, if the path exists.
    pub fn leaf_slot(&self, va: VirtAddr) -> Option<u64> {
        let mut table = self.root_ppn;
        for level in (1..LEVELS).rev() {
            let pte = decode_pte_at(self.mem.peek(Self::slot_addr(table, va, level)), level as u8).ok()?;
            if !pte.valid || pte.is_leaf() {
                return None;
            }
            table = pte.ppn;
        }
        Some(Self::slot_addr(table, va, 0))
    }
}

struct FrameAllocator {
    next: u64,
}

impl FrameAllocator {
    fn alloc(&mut self) -> u64 {
        let frame = self.next;
        self.next += 1;
        frame
    }
}

/// Builds a 3-level sv39 tree mapping every region at 4KB leaf granularity.
///
/// A 64KB region gets 16 identical NAPOT leaves per 64KB page.
pub fn build_page_tables(regions: &[RegionSpec]) -> Result<PageTable> {
    for r in regions {
        r.validate()?;
    }
    check_disjoint(regions)?;

    let first_free = regions
        .iter()
        .map(|r| r.base_ppn + r.frames())
        .max()
        .unwrap_or(0);
    let mut frames = FrameAllocator { next: first_free };
    let mut mem = SimPhysMem::new();
    let root_ppn = frames.alloc();
    let mut table_pages = 1;

    for region in regions {
        for frame in 0..region.frames() {
            let va = VirtAddr::new(region.base_va + frame * PAGE_SIZE)?;
            let mut table = root_ppn;
            for level in (1..LEVELS).rev() {
                let slot = PageTable::slot_addr(table, va, level);
                let existing = decode_pte_at(mem.peek(slot), level as u8)?;
                table = if existing.valid {
                    existing.ppn
                } else {
                    let next = frames.alloc();
                    table_pages += 1;
                    mem.write(slot, encode_pte(&PageTableEntry::pointer(next)));
                    next
                };
            }
            let leaf = match region.page_size {
                PageSize::Page4K => PageTableEntry::leaf_4k(region.base_ppn + frame, Perms::RW),
                PageSize::Page64K => PageTableEntry::leaf_64k(region.base_ppn + (frame & !0xF), Perms::RW)?,
            };
            mem.write(PageTable::slot_addr(table, va, 0), encode_pte(&leaf));
        }
    }

    Ok(PageTable {
        mem,
        root_ppn,
        table_pages,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PtwCacheKey {
    /// 2 for root entries, 1 for level-1 entries.
    pub level: u8,
    pub prefix: u64,
}

impl PtwCacheKey {
    /// Key of the non-leaf PTE fetched at `level` while walking `va`.
    pub fn for_va(level: u8, va: VirtAddr) -> Self {
        debug_assert!(level == 1 || level == 2);
        let prefix = va.vpn() >> (9 * level as u32);
        Self { level, prefix }
    }
}

#[derive(Debug, Clone, Copy)]
struct PtwCacheSlot {
    key: PtwCacheKey,
    pte: PageTableEntry,
    last_use: u64,
}

/// Fully associative true-LRU cache of non-leaf PTEs.
#[derive(Debug, Clone)]
pub struct PtwCache {
    slots: Vec<PtwCacheSlot>,
    capacity: usize,
    clock: u64,
}

impl Default for PtwCache {
    fn default() -> Self {
        Self::new(Self::DEFAULT_CAPACITY)
    }
}

impl PtwCache {
    pub const DEFAULT_CAPACITY: usize = 8;

    pub fn new(capacity: usize) -> Self {
        Self {
            slots: Vec::with_capacity(capacity),
            capacity,
            clock: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn contains(&self, key: PtwCacheKey) -> bool {
        self.slots.iter().any(|s| s.key == key)
    }

    pub fn lookup(&mut self, key: PtwCacheKey) -> Option<PageTableEntry> {
        self.clock += 1;
        let clock = self.clock;
        self.slots.iter_mut().find(|s| s.key == key).map(|s| {
            s.last_use = clock;
            s.pte
        })
    }

    /// Caches a non-leaf PTE; leaves are ignored.
    pub fn insert(&mut self, key: PtwCacheKey, pte: PageTableEntry) {
        if !pte.valid || pte.is_leaf() || self.capacity == 0 {
            return;
        }
        self.clock += 1;
        let slot = PtwCacheSlot {
            key,
            pte,
            last_use: self.clock,
        };
        if let Some(existing) = self.slots.iter_mut().find(|s| s.key == key) {
            *existing = slot;
        } else if self.slots.len() < self.capacity {
            self.slots.push(slot);
        } else if let Some(victim) = self.slots.iter_mut().min_by_key(|s| s.last_use) {
            *victim = slot;
        }
    }

    pub fn flush(&mut self) {
        self.slots.clear();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WalkResult {
    pub pte: PageTableEntry,
    pub memory_reads: u32,
    /// Non-leaf levels whose fetch was skipped thanks to the PTW cache.
    pub cache_levels_served: u32,
    pub faulted: bool,
}

/// Walks the tree for `va`, consulting the PTW cache for the deepest cached non-leaf PTE first.
pub fn walk(tables: &mut PageTable, cache: &mut PtwCache, va: VirtAddr) -> Result<WalkResult> {
    let (mut level, mut table, served) = if let Some(pte) = cache.lookup(PtwCacheKey::for_va(1, va)) {
        (0usize, pte.ppn, 2)
    } else if let Some(pte) = cache.lookup(PtwCacheKey::for_va(2, va)) {
        (1, pte.ppn, 1)
    } else {
        (2, tables.root_ppn, 0)
    };

    let mut reads = 0;
    loop {
        let raw = tables.mem.read(PageTable::slot_addr(table, va, level));
        reads += 1;
        let pte = decode_pte_at(raw, level as u8)?;
        let fault = WalkResult {
            pte,
            memory_reads: reads,
            cache_levels_served: served,
            faulted: true,
        };
        if !pte.valid {
            return Ok(fault);
        }
        if pte.is_leaf() {
            if level != 0 {
                return Err(Error::UnsupportedSuperpage {
                    level: level as u8,
                    va: va.value(),
                });
            }
            return Ok(WalkResult {
                faulted: false,
                ..fault
            });
        }
        if level == 0 {
            return Ok(fault);
        }
        cache.insert(PtwCacheKey::for_va(level as u8, va), pte);
        table = pte.ppn;
        level -= 1;
    }
}
