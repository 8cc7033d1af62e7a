//! Full translation per access: L1 DTLB, then L2 TLB, then a page-table walk,
//! with refills and an additive in-order cycle model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::page_table::{build_page_tables, walk, PageTable, PtwCache, RegionSpec};
use crate::sv39::{PhysAddr, VirtAddr};
use crate::tlb::{L1Dtlb, L2Tlb, L2TlbConfig};
use crate::workload::AccessTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencyModel {
    /// Charged on every access for the L1 probe.
    pub l1_hit_cycles: u64,
    /// Charged on every L2 probe, hit or miss.
    pub l2_lookup_cycles: u64,
    /// Charged per PTE fetched from memory during a walk.
    pub mem_read_cycles: u64,
}

impl Default for LatencyModel {
    fn default() -> Self {
        Self {
            l1_hit_cycles: 1,
            l2_lookup_cycles: 3,
            mem_read_cycles: 30,
        }
    }
}

impl LatencyModel {
    pub fn walk_cycles(&self, memory_reads: u32) -> u64 {
        self.l1_hit_cycles + self.l2_lookup_cycles + self.mem_read_cycles * memory_reads as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Warmup,
    Measurement,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Warmup => "warmup",
            Phase::Measurement => "measurement",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct PhaseStats {
    pub accesses: u64,
    pub l1_hits: u64,
    pub l1_misses: u64,
    pub l2_hits: u64,
    pub l2_misses: u64,
    pub walks: u64,
    pub walk_memory_reads: u64,
    pub total_cycles: u64,
}

impl PhaseStats {
    /// Conservation checks that hold for any fault-free run.
    pub fn is_consistent(&self) -> bool {
        self.l1_hits + self.l1_misses == self.accesses
            && self.l2_hits + self.l2_misses == self.l1_misses
            && self.walks == self.l2_misses
            && self.walk_memory_reads >= self.walks
            && self.walk_memory_reads <= 3 * self.walks
    }

    fn record(&mut self, outcome: &TranslationOutcome) {
        self.accesses += 1;
        self.total_cycles += outcome.cycles;
        match outcome.path {
            TranslationPath::L1Hit => self.l1_hits += 1,
            TranslationPath::L2Hit => {
                self.l1_misses += 1;
                self.l2_hits += 1;
            }
            TranslationPath::Walk { memory_reads } => {
                self.l1_misses += 1;
                self.l2_misses += 1;
                self.walks += 1;
                self.walk_memory_reads += memory_reads as u64;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SimStats {
    pub warmup: PhaseStats,
    pub measurement: PhaseStats,
}

impl SimStats {
    pub fn phase(&self, phase: Phase) -> &PhaseStats {
        match phase {
            Phase::Warmup => &self.warmup,
            Phase::Measurement => &self.measurement,
        }
    }

    fn phase_mut(&mut self, phase: Phase) -> &mut PhaseStats {
        match phase {
            Phase::Warmup => &mut self.warmup,
            Phase::Measurement => &mut self.measurement,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TranslationPath {
    L1Hit,
    L2Hit,
    Walk { memory_reads: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TranslationOutcome {
    pub pa: PhysAddr,
    pub path: TranslationPath,
    pub cycles: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub l2: L2TlbConfig,
    pub latency: LatencyModel,
    pub ptw_cache_entries: usize,
    /// Flush the PTW cache when switching from warm-up to measurement.
    pub flush_ptw_between_phases: bool,
}

impl SimConfig {
    pub fn new(l2_ways: usize) -> Self {
        Self {
            l2: L2TlbConfig::new(l2_ways),
            latency: LatencyModel::default(),
            ptw_cache_entries: PtwCache::DEFAULT_CAPACITY,
            flush_ptw_between_phases: false,
        }
    }
}

/// One translation hierarchy over one set of page tables.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: SimConfig,
    tables: PageTable,
    ptw_cache: PtwCache,
    l1: L1Dtlb,
    l2: L2Tlb,
    phase: Phase,
    stats: SimStats,
}

impl Simulator {
    pub fn new(config: SimConfig, regions: &[RegionSpec]) -> Result<Self> {
        Self::with_tables(config, build_page_tables(regions)?)
    }

    pub fn with_tables(config: SimConfig, tables: PageTable) -> Result<Self> {
        Ok(Self {
            l2: L2Tlb::new(config.l2)?,
            ptw_cache: PtwCache::new(config.ptw_cache_entries),
            l1: L1Dtlb::new(),
            config,
            tables,
            phase: Phase::Measurement,
            stats: SimStats::default(),
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn stats(&self) -> &SimStats {
        &self.stats
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn set_phase(&mut self, phase: Phase) {
        if self.phase == Phase::Warmup && phase == Phase::Measurement && self.config.flush_ptw_between_phases {
            self.ptw_cache.flush();
        }
        self.phase = phase;
    }

    pub fn l1(&self) -> &L1Dtlb {
        &self.l1
    }

    pub fn l2(&self) -> &L2Tlb {
        &self.l2
    }

    pub fn l2_mut(&mut self) -> &mut L2Tlb {
        &mut self.l2
    }

    pub fn ptw_cache(&self) -> &PtwCache {
        &self.ptw_cache
    }

    pub fn page_table(&self) -> &PageTable {
        &self.tables
    }

    /// Invalidates both TLBs and the PTW cache; counters are kept.
    pub fn flush_all(&mut self) {
        self.l1.flush_all();
        self.l2.flush_all();
        self.ptw_cache.flush();
    }

    pub fn translate(&mut self, va: VirtAddr) -> Result<TranslationOutcome> {
        let latency = self.config.latency;
        let vpn = va.vpn();
        let (ppn, path, cycles) = if let Some(hit) = self.l1.lookup(vpn) {
            (hit.ppn, TranslationPath::L1Hit, latency.l1_hit_cycles)
        } else if let Some(hit) = self.l2.lookup(vpn) {
            self.l1.insert(vpn, hit.ppn, hit.perms);
            (
                hit.ppn,
                TranslationPath::L2Hit,
                latency.l1_hit_cycles + latency.l2_lookup_cycles,
            )
        } else {
            let res = walk(&mut self.tables, &mut self.ptw_cache, va)?;
            if res.faulted {
                return Err(Error::UnmappedAccess { va: va.value() });
            }
            self.l2.insert(vpn, &res.pte)?;
            let ppn = res.pte.frame_for(vpn);
            self.l1.insert(vpn, ppn, res.pte.perms);
            (
                ppn,
                TranslationPath::Walk {
                    memory_reads: res.memory_reads,
                },
                latency.walk_cycles(res.memory_reads),
            )
        };
        let outcome = TranslationOutcome {
            pa: PhysAddr::from_parts(ppn, va.page_offset()),
            path,
            cycles,
        };
        self.stats.phase_mut(self.phase).record(&outcome);
        Ok(outcome)
    }

    /// Replays the warm-up accesses, then the measured ones, and returns the
    /// accumulated statistics of both phases.
    pub fn run_trace(&mut self, trace: &AccessTrace) -> Result<SimStats> {
        self.set_phase(Phase::Warmup);
        for &va in &trace.warmup {
            self.translate(va)?;
        }
        self.set_phase(Phase::Measurement);
        for &va in &trace.measurement {
            self.translate(va)?;
        }
        Ok(self.stats)
    }
}
