//! TLB-stress access traces: a linear page stride and uniform-random page
//! accesses over a power-of-two chunk, each preceded by one linear warm-up pass.
//!
//! Random traces come from `ChaCha8Rng` seeded with `seed_from_u64(seed)`; a
//! page index is drawn per access with `gen_range(0..pages)`.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::page_table::RegionSpec;
use crate::sv39::{PageSize, VirtAddr, PAGE_SIZE};

pub const STEP_BYTES: u64 = PAGE_SIZE;
pub const MIN_CHUNK_BYTES: u64 = 4 << 10;
pub const MAX_CHUNK_BYTES: u64 = 256 << 20;
pub const DEFAULT_MEASURED_ACCESSES: usize = 1_000_000;

/// Base of the simulated chunk; aligned well beyond the largest chunk.
pub const DEFAULT_BASE_VA: u64 = 0x4000_0000;
pub const DEFAULT_BASE_PPN: u64 = 0x8_0000;

/// Every chunk size of the sweep, 4KB to 256MB.
pub fn chunk_sizes(min: u64, max: u64) -> Vec<u64> {
    std::iter::successors(Some(min.max(1)), |c| c.checked_mul(2))
        .take_while(|&c| c <= max)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternKind {
    Linear,
    Random,
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PatternKind::Linear => "linear",
            PatternKind::Random => "random",
        })
    }
}

impl FromStr for PatternKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "linear" => Ok(PatternKind::Linear),
            "random" => Ok(PatternKind::Random),
            other => Err(format!("unknown pattern `{other}` (expected linear or random)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pattern {
    Linear,
    Random { seed: u64 },
}

impl Pattern {
    pub fn kind(self) -> PatternKind {
        match self {
            Pattern::Linear => PatternKind::Linear,
            Pattern::Random { .. } => PatternKind::Random,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorkloadSpec {
    pub chunk_bytes: u64,
    pub pattern: Pattern,
    pub measured_accesses: usize,
    pub page_size: PageSize,
}

impl WorkloadSpec {
    pub fn new(chunk_bytes: u64, pattern: Pattern, page_size: PageSize) -> Self {
        Self {
            chunk_bytes,
            pattern,
            measured_accesses: DEFAULT_MEASURED_ACCESSES,
            page_size,
        }
    }

    pub fn pages(&self) -> u64 {
        self.chunk_bytes / STEP_BYTES
    }

    pub fn validate(&self) -> Result<()> {
        if !self.chunk_bytes.is_power_of_two()
            || !(MIN_CHUNK_BYTES..=MAX_CHUNK_BYTES).contains(&self.chunk_bytes)
        {
            return Err(Error::Workload(format!(
                "chunk of {} bytes is not a power of two between 4KB and 256MB",
                self.chunk_bytes
            )));
        }
        Ok(())
    }

    /// Bytes mapped for this workload: the chunk rounded up to whole pages.
    pub fn mapped_bytes(&self) -> u64 {
        self.chunk_bytes.next_multiple_of(self.page_size.bytes())
    }

    pub fn trace(&self, base_va: VirtAddr) -> Result<AccessTrace> {
        match self.pattern {
            Pattern::Linear => gen_linear(self, base_va),
            Pattern::Random { seed } => gen_random(self, base_va, seed),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AccessTrace {
    pub warmup: Vec<VirtAddr>,
    pub measurement: Vec<VirtAddr>,
}

impl AccessTrace {
    pub fn len(&self) -> usize {
        self.warmup.len() + self.measurement.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes one hex address per line, each phase introduced by a `# phase: <name>` line.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        for (name, vas) in [("warmup", &self.warmup), ("measurement", &self.measurement)] {
            writeln!(out, "# phase: {name}")?;
            for va in vas {
                writeln!(out, "{:#x}", va.value())?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut trace = AccessTrace::default();
        let mut phase: Option<bool> = None;
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            let err = |msg: String| Error::TraceParse { line: i + 1, msg };
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(name) = rest.trim().strip_prefix("phase:") {
                    phase = Some(match name.trim() {
                        "warmup" => false,
                        "measurement" => true,
                        other => return Err(err(format!("unknown phase `{other}`"))),
                    });
                }
                continue;
            }
            let digits = line.strip_prefix("0x").or_else(|| line.strip_prefix("0X")).unwrap_or(line);
            let value = u64::from_str_radix(digits, 16).map_err(|e| err(format!("`{line}`: {e}")))?;
            let va = VirtAddr::new(value).map_err(|e| err(e.to_string()))?;
            match phase {
                Some(false) => trace.warmup.push(va),
                Some(true) => trace.measurement.push(va),
                None => return Err(err("address before any `# phase:` line".into())),
            }
        }
        Ok(trace)
    }
}

fn warmup_pass(spec: &WorkloadSpec, base: u64) -> Vec<VirtAddr> {
    (0..spec.pages())
        .map(|p| VirtAddr::from_vpn((base >> 12) + p, 0))
        .collect()
}

fn checked_base(spec: &WorkloadSpec, base_va: VirtAddr) -> Result<u64> {
    spec.validate()?;
    let base = base_va.value();
    if !base.is_multiple_of(STEP_BYTES) {
        return Err(Error::Alignment {
            what: "trace base_va",
            value: base,
            align: STEP_BYTES,
        });
    }
    Ok(base)
}

/// One linear pass for warm-up; the measured accesses stride 4KB and wrap at the chunk end.
pub fn gen_linear(spec: &WorkloadSpec, base_va: VirtAddr) -> Result<AccessTrace> {
    let base = checked_base(spec, base_va)?;
    let warmup = warmup_pass(spec, base);
    let measurement = warmup.iter().copied().cycle().take(spec.measured_accesses).collect();
    Ok(AccessTrace { warmup, measurement })
}

/// One linear pass for warm-up; the measured accesses pick pages uniformly at random.
pub fn gen_random(spec: &WorkloadSpec, base_va: VirtAddr, seed: u64) -> Result<AccessTrace> {
    let base = checked_base(spec, base_va)?;
    let warmup = warmup_pass(spec, base);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pages = spec.pages();
    let measurement = (0..spec.measured_accesses)
        .map(|_| warmup[rng.gen_range(0..pages) as usize])
        .collect();
    Ok(AccessTrace { warmup, measurement })
}

/// The single region backing a workload's chunk.
///
/// A chunk smaller than the page size is backed by one whole page, the way an
/// allocation rounded up to the huge-page granule would be.
pub fn make_regions(spec: &WorkloadSpec, base_va: VirtAddr, base_ppn: u64) -> Result<Vec<RegionSpec>> {
    spec.validate()?;
    let region = RegionSpec {
        base_va: base_va.value(),
        length: spec.mapped_bytes(),
        page_size: spec.page_size,
        base_ppn,
    };
    region.validate()?;
    Ok(vec![region])
}
