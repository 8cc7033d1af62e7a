//! Experiment configuration, the configuration × pattern × chunk sweep, and
//! its CSV / plot-data outputs.
//!
//! The config file is TOML. Every key is optional; omitted keys take the
//! defaults of [`ExperimentConfig::default`]:
//!
//! ```toml
//! seed = 42
//! measured_accesses = 1000000
//! min_chunk_bytes = 4096
//! max_chunk_bytes = 268435456
//! l2_entries = 1024
//! replacement = "lru"              # or "random" (seeded from `seed`)
//! flush_ptw_between_phases = false
//! include_warmup = false
//! output = "results.csv"
//!
//! [latency]
//! l1_hit_cycles = 1
//! l2_lookup_cycles = 3
//! mem_read_cycles = 30
//!
//! [[configs]]
//! id = 1
//! ways = 4
//! page_size = "4K"
//! patterns = ["linear"]
//! ```

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{LatencyModel, Phase, PhaseStats, SimConfig, Simulator};
use crate::error::{Error, Result};
use crate::page_table::PtwCache;
use crate::sv39::{PageSize, VirtAddr};
use crate::tlb::{L2TlbConfig, Replacement, ReplacementKind, L2_ENTRIES};
use crate::workload::{
    chunk_sizes, make_regions, Pattern, PatternKind, WorkloadSpec, DEFAULT_BASE_PPN, DEFAULT_BASE_VA,
    DEFAULT_MEASURED_ACCESSES, MAX_CHUNK_BYTES, MIN_CHUNK_BYTES,
};

pub const CSV_HEADER: [&str; 12] = [
    "config_id",
    "pattern",
    "chunk_bytes",
    "phase",
    "accesses",
    "l1_hits",
    "l1_misses",
    "l2_hits",
    "l2_misses",
    "walks",
    "walk_memory_reads",
    "total_cycles",
];

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TlbConfigSpec {
    pub id: u32,
    pub ways: usize,
    pub page_size: PageSize,
    #[serde(default = "default_patterns")]
    pub patterns: Vec<PatternKind>,
}

fn default_patterns() -> Vec<PatternKind> {
    vec![PatternKind::Linear]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub measured_accesses: usize,
    pub min_chunk_bytes: u64,
    pub max_chunk_bytes: u64,
    pub l2_entries: usize,
    pub replacement: ReplacementKind,
    pub flush_ptw_between_phases: bool,
    pub include_warmup: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub latency: LatencyModel,
    pub configs: Vec<TlbConfigSpec>,
}

impl Default for ExperimentConfig {
    /// The four evaluated configurations: {4,16}-way × {4KB,64KB}, random
    /// pattern on the 16-way pair only.
    fn default() -> Self {
        let row = |id, ways, page_size, patterns: &[PatternKind]| TlbConfigSpec {
            id,
            ways,
            page_size,
            patterns: patterns.to_vec(),
        };
        use PatternKind::{Linear, Random};
        Self {
            seed: DEFAULT_SEED,
            measured_accesses: DEFAULT_MEASURED_ACCESSES,
            min_chunk_bytes: MIN_CHUNK_BYTES,
            max_chunk_bytes: MAX_CHUNK_BYTES,
            l2_entries: L2_ENTRIES,
            replacement: ReplacementKind::Lru,
            flush_ptw_between_phases: false,
            include_warmup: false,
            output: None,
            latency: LatencyModel::default(),
            configs: vec![
                row(1, 4, PageSize::Page4K, &[Linear]),
                row(2, 16, PageSize::Page4K, &[Linear, Random]),
                row(3, 4, PageSize::Page64K, &[Linear]),
                row(4, 16, PageSize::Page64K, &[Linear, Random]),
            ],
        }
    }
}

/// One simulated run of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cell {
    pub config_id: u32,
    pub ways: usize,
    pub page_size: PageSize,
    pub pattern: PatternKind,
    pub chunk_bytes: u64,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        if self.configs.is_empty() {
            return Err(Error::Config("`configs` must list at least one TLB configuration".into()));
        }
        let mut ids = BTreeSet::new();
        for c in &self.configs {
            if !ids.insert(c.id) {
                return Err(Error::Config(format!("config id {} appears more than once", c.id)));
            }
            if c.ways != 4 && c.ways != 16 {
                return Err(Error::Config(format!(
                    "config {}: ways = {} is not supported (use 4 or 16)",
                    c.id, c.ways
                )));
            }
            if c.patterns.is_empty() {
                return Err(Error::Config(format!("config {}: `patterns` is empty", c.id)));
            }
            let l2 = L2TlbConfig {
                total_entries: self.l2_entries,
                ways: c.ways,
                replacement: Replacement::Lru,
            };
            l2.validate()
                .map_err(|e| Error::Config(format!("config {}: {e}", c.id)))?;
        }
        for (name, v) in [("min_chunk_bytes", self.min_chunk_bytes), ("max_chunk_bytes", self.max_chunk_bytes)] {
            if !v.is_power_of_two() || !(MIN_CHUNK_BYTES..=MAX_CHUNK_BYTES).contains(&v) {
                return Err(Error::Config(format!(
                    "{name} = {v} must be a power of two between {MIN_CHUNK_BYTES} and {MAX_CHUNK_BYTES}"
                )));
            }
        }
        if self.min_chunk_bytes > self.max_chunk_bytes {
            return Err(Error::Config(format!(
                "min_chunk_bytes ({}) exceeds max_chunk_bytes ({})",
                self.min_chunk_bytes, self.max_chunk_bytes
            )));
        }
        if self.measured_accesses == 0 {
            return Err(Error::Config("measured_accesses must be positive".into()));
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<Cell> {
        let sizes = chunk_sizes(self.min_chunk_bytes, self.max_chunk_bytes);
        let mut cells = Vec::new();
        for c in &self.configs {
            let patterns: BTreeSet<PatternKind> = c.patterns.iter().copied().collect();
            for &pattern in &patterns {
                for &chunk_bytes in &sizes {
                    cells.push(Cell {
                        config_id: c.id,
                        ways: c.ways,
                        page_size: c.page_size,
                        pattern,
                        chunk_bytes,
                    });
                }
            }
        }
        cells
    }

    /// Rows a sweep of this config produces.
    pub fn expected_rows(&self) -> usize {
        self.cells().len() * if self.include_warmup { 2 } else { 1 }
    }

    fn sim_config(&self, ways: usize) -> SimConfig {
        let replacement = match self.replacement {
            ReplacementKind::Lru => Replacement::Lru,
            ReplacementKind::Random => Replacement::Random { seed: self.seed },
        };
        SimConfig {
            l2: L2TlbConfig {
                total_entries: self.l2_entries,
                ways,
                replacement,
            },
            latency: self.latency,
            ptw_cache_entries: PtwCache::DEFAULT_CAPACITY,
            flush_ptw_between_phases: self.flush_ptw_between_phases,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ResultRow {
    pub config_id: u32,
    pub pattern: PatternKind,
    pub chunk_bytes: u64,
    pub phase: Phase,
    pub stats: PhaseStats,
}

impl ResultRow {
    fn sort_key(&self) -> (u32, PatternKind, u64, Phase) {
        (self.config_id, self.pattern, self.chunk_bytes, self.phase)
    }

    fn record(&self) -> [String; 12] {
        let s = &self.stats;
        [
            self.config_id.to_string(),
            self.pattern.to_string(),
            self.chunk_bytes.to_string(),
            self.phase.as_str().to_string(),
            s.accesses.to_string(),
            s.l1_hits.to_string(),
            s.l1_misses.to_string(),
            s.l2_hits.to_string(),
            s.l2_misses.to_string(),
            s.walks.to_string(),
            s.walk_memory_reads.to_string(),
            s.total_cycles.to_string(),
        ]
    }
}

/// Simulates one cell on fresh page tables, TLBs and PTW cache.
pub fn run_cell(config: &ExperimentConfig, cell: &Cell) -> Result<[ResultRow; 2]> {
    let pattern = match cell.pattern {
        PatternKind::Linear => Pattern::Linear,
        PatternKind::Random => Pattern::Random { seed: config.seed },
    };
    let spec = WorkloadSpec {
        chunk_bytes: cell.chunk_bytes,
        pattern,
        measured_accesses: config.measured_accesses,
        page_size: cell.page_size,
    };
    let base_va = VirtAddr::new(DEFAULT_BASE_VA)?;
    let regions = make_regions(&spec, base_va, DEFAULT_BASE_PPN)?;
    let mut sim = Simulator::new(config.sim_config(cell.ways), &regions)?;
    let trace = spec.trace(base_va)?;
    let stats = sim.run_trace(&trace)?;
    let row = |phase| ResultRow {
        config_id: cell.config_id,
        pattern: cell.pattern,
        chunk_bytes: cell.chunk_bytes,
        phase,
        stats: *stats.phase(phase),
    };
    Ok([row(Phase::Warmup), row(Phase::Measurement)])
}

/// Runs every cell on up to `jobs` threads and returns the rows sorted by
/// (config, pattern, chunk, phase).
pub fn run_sweep(config: &ExperimentConfig, jobs: usize) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let cells = config.cells();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} worker threads: {e}")))?;
    let results: Vec<[ResultRow; 2]> =
        pool.install(|| cells.par_iter().map(|cell| run_cell(config, cell)).collect::<Result<_>>())?;
    let mut rows: Vec<ResultRow> = results
        .into_iter()
        .flatten()
        .filter(|r| config.include_warmup || r.phase == Phase::Measurement)
        .collect();
    rows.sort_by_key(ResultRow::sort_key);
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut sorted = rows.to_vec();
    sorted.sort_by_key(ResultRow::sort_key);
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(CSV_HEADER)?;
    for row in &sorted {
        writer.write_record(row.record())?;
    }
    writer.flush()?;
    Ok(())
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    write_csv(rows, BufWriter::new(File::create(path)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    /// log2 of the chunk size in KB.
    pub x: f64,
    pub chunk_bytes: u64,
    pub accesses: u64,
    pub l1_misses: u64,
    pub l2_misses: u64,
    pub walks: u64,
    pub total_cycles: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub config_id: u32,
    pub pattern: PatternKind,
    pub phase: Phase,
    pub points: Vec<PlotPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub x_label: String,
    pub series: Vec<PlotSeries>,
}

/// Groups rows into one series per (config, pattern, phase), ordered by chunk size.
pub fn plot_data(rows: &[ResultRow]) -> PlotData {
    let mut sorted = rows.to_vec();
    sorted.sort_by_key(ResultRow::sort_key);
    let mut series: Vec<PlotSeries> = Vec::new();
    let mut by_key: std::collections::BTreeMap<(u32, PatternKind, Phase), Vec<PlotPoint>> = Default::default();
    for r in &sorted {
        by_key.entry((r.config_id, r.pattern, r.phase)).or_default().push(PlotPoint {
            x: ((r.chunk_bytes as f64) / 1024.0).log2(),
            chunk_bytes: r.chunk_bytes,
            accesses: r.stats.accesses,
            l1_misses: r.stats.l1_misses,
            l2_misses: r.stats.l2_misses,
            walks: r.stats.walks,
            total_cycles: r.stats.total_cycles,
        });
    }
    for ((config_id, pattern, phase), points) in by_key {
        series.push(PlotSeries {
            config_id,
            pattern,
            phase,
            points,
        });
    }
    PlotData {
        x_label: "log2(memory size KB)".into(),
        series,
    }
}

pub fn emit_plotdata(rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, &plot_data(rows))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}
