//! C ABI over `svnapot-sim`.
//!
//! Every fallible call returns an [`SvnStatus`]; on failure the message is
//! available from [`svn_last_error_message`] on the same thread. Simulators
//! are opaque handles created with [`svn_simulator_new`] and released with
//! [`svn_simulator_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use svnapot_sim::experiment::{emit_csv, run_sweep};
use svnapot_sim::{
    Error, ExperimentConfig, L2TlbConfig, LatencyModel, PageSize, PageTableEntry, Perms, Phase,
    PhaseStats, RegionSpec, Replacement, SimConfig, Simulator, TranslationPath, VirtAddr,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvnStatus {
    Ok = 0,
    NullPointer = 1,
    NonCanonical = 2,
    MalformedNapot = 3,
    InvalidArgument = 4,
    RegionOverlap = 5,
    Unmapped = 6,
    Config = 7,
    Io = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvnPageSize {
    Kb4 = 0,
    Kb64 = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvnPhase {
    Warmup = 0,
    Measurement = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvnPath {
    L1Hit = 0,
    L2Hit = 1,
    Walk = 2,
}

/// Decoded page-table entry.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SvnPte {
    pub valid: bool,
    pub readable: bool,
    pub writable: bool,
    pub executable: bool,
    pub n_bit: bool,
    pub level: u8,
    pub ppn: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SvnRegion {
    pub base_va: u64,
    pub length: u64,
    pub page_size: SvnPageSize,
    pub base_ppn: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SvnSimConfig {
    pub l2_entries: u32,
    pub l2_ways: u32,
    /// Seeded random replacement in the L2 instead of LRU.
    pub random_replacement: bool,
    pub replacement_seed: u64,
    pub l1_hit_cycles: u64,
    pub l2_lookup_cycles: u64,
    pub mem_read_cycles: u64,
    pub ptw_cache_entries: u32,
    pub flush_ptw_between_phases: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SvnPhaseStats {
    pub accesses: u64,
    pub l1_hits: u64,
    pub l1_misses: u64,
    pub l2_hits: u64,
    pub l2_misses: u64,
    pub walks: u64,
    pub walk_memory_reads: u64,
    pub total_cycles: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SvnOutcome {
    pub pa: u64,
    pub path: SvnPath,
    /// PTEs read from memory; zero unless `path` is a walk.
    pub memory_reads: u32,
    pub cycles: u64,
}

/// Opaque simulator handle.
pub struct SvnSimulator(Simulator);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg).unwrap_or_else(|e| {
        let mut bytes = e.into_vec();
        bytes.retain(|&b| b != 0);
        CString::new(bytes).unwrap()
    });
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> SvnStatus {
    match err {
        Error::NonCanonical { .. } => SvnStatus::NonCanonical,
        Error::MalformedNapot { .. } => SvnStatus::MalformedNapot,
        Error::RegionOverlap { .. } => SvnStatus::RegionOverlap,
        Error::UnmappedAccess { .. } => SvnStatus::Unmapped,
        Error::TlbConfig(_)
        | Error::Workload(_)
        | Error::Config(_)
        | Error::TraceParse { .. }
        | Error::Toml(_)
        | Error::Json(_) => SvnStatus::Config,
        Error::Io(_) | Error::Csv(_) => SvnStatus::Io,
        _ => SvnStatus::InvalidArgument,
    }
}

fn fail(status: SvnStatus, msg: impl Into<String>) -> SvnStatus {
    set_last_error(msg.into());
    status
}

/// Runs `f`, mapping library errors and panics to status codes.
fn guard(f: impl FnOnce() -> Result<(), SvnStatus>) -> SvnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SvnStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(SvnStatus::Panic, "internal panic"),
    }
}

fn check<T>(res: svnapot_sim::Result<T>) -> Result<T, SvnStatus> {
    res.map_err(|e| fail(status_of(&e), e.to_string()))
}

fn non_null<'a, T>(p: *const T, what: &str) -> Result<&'a T, SvnStatus> {
    // SAFETY: callers pass pointers that are either null or valid for reads.
    unsafe { p.as_ref() }.ok_or_else(|| fail(SvnStatus::NullPointer, format!("{what} is null")))
}

fn non_null_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, SvnStatus> {
    // SAFETY: callers pass pointers that are either null or valid for writes.
    unsafe { p.as_mut() }.ok_or_else(|| fail(SvnStatus::NullPointer, format!("{what} is null")))
}

fn c_path<'a>(p: *const c_char, what: &str) -> Result<&'a Path, SvnStatus> {
    // SAFETY: non-null paths must be NUL-terminated strings.
    let s = unsafe { CStr::from_ptr(p) };
    s.to_str()
        .map(Path::new)
        .map_err(|_| fail(SvnStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

impl From<Phase> for SvnPhase {
    fn from(p: Phase) -> Self {
        match p {
            Phase::Warmup => SvnPhase::Warmup,
            Phase::Measurement => SvnPhase::Measurement,
        }
    }
}

impl From<SvnPhase> for Phase {
    fn from(p: SvnPhase) -> Self {
        match p {
            SvnPhase::Warmup => Phase::Warmup,
            SvnPhase::Measurement => Phase::Measurement,
        }
    }
}

impl From<&PageTableEntry> for SvnPte {
    fn from(p: &PageTableEntry) -> Self {
        Self {
            valid: p.valid,
            readable: p.perms.readable,
            writable: p.perms.writable,
            executable: p.perms.executable,
            n_bit: p.n_bit,
            level: p.level,
            ppn: p.ppn,
        }
    }
}

impl From<&SvnPte> for PageTableEntry {
    fn from(p: &SvnPte) -> Self {
        Self {
            valid: p.valid,
            perms: Perms {
                readable: p.readable,
                writable: p.writable,
                executable: p.executable,
            },
            ppn: p.ppn,
            n_bit: p.n_bit,
            level: p.level,
        }
    }
}

impl From<&PhaseStats> for SvnPhaseStats {
    fn from(s: &PhaseStats) -> Self {
        Self {
            accesses: s.accesses,
            l1_hits: s.l1_hits,
            l1_misses: s.l1_misses,
            l2_hits: s.l2_hits,
            l2_misses: s.l2_misses,
            walks: s.walks,
            walk_memory_reads: s.walk_memory_reads,
            total_cycles: s.total_cycles,
        }
    }
}

impl From<&SvnRegion> for RegionSpec {
    fn from(r: &SvnRegion) -> Self {
        Self {
            base_va: r.base_va,
            length: r.length,
            page_size: match r.page_size {
                SvnPageSize::Kb4 => PageSize::Page4K,
                SvnPageSize::Kb64 => PageSize::Page64K,
            },
            base_ppn: r.base_ppn,
        }
    }
}

impl From<&SvnSimConfig> for SimConfig {
    fn from(c: &SvnSimConfig) -> Self {
        Self {
            l2: L2TlbConfig {
                total_entries: c.l2_entries as usize,
                ways: c.l2_ways as usize,
                replacement: if c.random_replacement {
                    Replacement::Random { seed: c.replacement_seed }
                } else {
                    Replacement::Lru
                },
            },
            latency: LatencyModel {
                l1_hit_cycles: c.l1_hit_cycles,
                l2_lookup_cycles: c.l2_lookup_cycles,
                mem_read_cycles: c.mem_read_cycles,
            },
            ptw_cache_entries: c.ptw_cache_entries as usize,
            flush_ptw_between_phases: c.flush_ptw_between_phases,
        }
    }
}

/// Message for the most recent failure on this thread, or null if none.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn svn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Default configuration: 1024-entry LRU L2 with `l2_ways` ways, 8-entry PTW
/// cache, 1/3/30 cycle latencies.
#[no_mangle]
pub extern "C" fn svn_sim_config_default(l2_ways: u32) -> SvnSimConfig {
    let c = SimConfig::new(l2_ways as usize);
    SvnSimConfig {
        l2_entries: c.l2.total_entries as u32,
        l2_ways,
        random_replacement: false,
        replacement_seed: 0,
        l1_hit_cycles: c.latency.l1_hit_cycles,
        l2_lookup_cycles: c.latency.l2_lookup_cycles,
        mem_read_cycles: c.latency.mem_read_cycles,
        ptw_cache_entries: c.ptw_cache_entries as u32,
        flush_ptw_between_phases: c.flush_ptw_between_phases,
    }
}

/// Physical page of `napot_offset` within the 64KB page whose PTE holds
/// `entry_ppn`.
///
/// # Safety
/// `out_ppn` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn svn_napot_translate(entry_ppn: u64, napot_offset: u64, out_ppn: *mut u64) -> SvnStatus {
    guard(|| {
        let out = non_null_mut(out_ppn, "out_ppn")?;
        *out = check(svnapot_sim::napot_translate(entry_ppn, napot_offset))?;
        Ok(())
    })
}

/// L2 set index of `vpn` for a TLB with `sets` sets.
///
/// # Safety
/// `out_index` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn svn_l2_index(vpn: u64, sets: u32, out_index: *mut u32) -> SvnStatus {
    guard(|| {
        let out = non_null_mut(out_index, "out_index")?;
        if !sets.is_power_of_two() {
            return Err(fail(SvnStatus::InvalidArgument, format!("set count {sets} is not a power of two")));
        }
        *out = svnapot_sim::l2_index(vpn, sets as usize) as u32;
        Ok(())
    })
}

/// # Safety
/// `out_pte` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn svn_decode_pte(raw: u64, out_pte: *mut SvnPte) -> SvnStatus {
    guard(|| {
        let out = non_null_mut(out_pte, "out_pte")?;
        *out = SvnPte::from(&check(svnapot_sim::decode_pte(raw))?);
        Ok(())
    })
}

/// # Safety
/// `pte` must be null or valid for reads; `out_raw` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn svn_encode_pte(pte: *const SvnPte, out_raw: *mut u64) -> SvnStatus {
    guard(|| {
        let pte = non_null(pte, "pte")?;
        let out = non_null_mut(out_raw, "out_raw")?;
        *out = svnapot_sim::encode_pte(&PageTableEntry::from(pte));
        Ok(())
    })
}

/// Builds page tables for `regions` and a simulator over them.
///
/// # Safety
/// `config` must be valid for reads, `regions` valid for `region_count`
/// elements (or null when the count is zero), and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn svn_simulator_new(
    config: *const SvnSimConfig,
    regions: *const SvnRegion,
    region_count: usize,
    out: *mut *mut SvnSimulator,
) -> SvnStatus {
    guard(|| {
        let out = non_null_mut(out, "out")?;
        *out = ptr::null_mut();
        let config = SimConfig::from(non_null(config, "config")?);
        let regions: Vec<RegionSpec> = if region_count == 0 {
            Vec::new()
        } else {
            non_null(regions, "regions")?;
            // SAFETY: checked non-null; the caller guarantees the length.
            unsafe { std::slice::from_raw_parts(regions, region_count) }
                .iter()
                .map(RegionSpec::from)
                .collect()
        };
        let sim = check(Simulator::new(config, &regions))?;
        *out = Box::into_raw(Box::new(SvnSimulator(sim)));
        Ok(())
    })
}

/// # Safety
/// `sim` must be null or a handle from [`svn_simulator_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn svn_simulator_free(sim: *mut SvnSimulator) {
    if !sim.is_null() {
        // SAFETY: the handle came from Box::into_raw in svn_simulator_new.
        drop(unsafe { Box::from_raw(sim) });
    }
}

/// Translates one access and charges it to the current phase.
///
/// # Safety
/// `sim` must be a live handle; `out` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn svn_simulator_translate(sim: *mut SvnSimulator, va: u64, out: *mut SvnOutcome) -> SvnStatus {
    guard(|| {
        let sim = non_null_mut(sim, "sim")?;
        let out = non_null_mut(out, "out")?;
        let va = check(VirtAddr::new(va))?;
        let outcome = check(sim.0.translate(va))?;
        let (path, memory_reads) = match outcome.path {
            TranslationPath::L1Hit => (SvnPath::L1Hit, 0),
            TranslationPath::L2Hit => (SvnPath::L2Hit, 0),
            TranslationPath::Walk { memory_reads } => (SvnPath::Walk, memory_reads),
        };
        *out = SvnOutcome {
            pa: outcome.pa.value(),
            path,
            memory_reads,
            cycles: outcome.cycles,
        };
        Ok(())
    })
}

/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn svn_simulator_set_phase(sim: *mut SvnSimulator, phase: SvnPhase) -> SvnStatus {
    guard(|| {
        non_null_mut(sim, "sim")?.0.set_phase(phase.into());
        Ok(())
    })
}

/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn svn_simulator_phase(sim: *const SvnSimulator, out: *mut SvnPhase) -> SvnStatus {
    guard(|| {
        let sim = non_null(sim, "sim")?;
        *non_null_mut(out, "out")? = sim.0.phase().into();
        Ok(())
    })
}

/// # Safety
/// `sim` must be a live handle; `out` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn svn_simulator_stats(
    sim: *const SvnSimulator,
    phase: SvnPhase,
    out: *mut SvnPhaseStats,
) -> SvnStatus {
    guard(|| {
        let sim = non_null(sim, "sim")?;
        *non_null_mut(out, "out")? = SvnPhaseStats::from(sim.0.stats().phase(phase.into()));
        Ok(())
    })
}

/// Drops every cached translation; counters are kept.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn svn_simulator_flush(sim: *mut SvnSimulator) -> SvnStatus {
    guard(|| {
        non_null_mut(sim, "sim")?.0.flush_all();
        Ok(())
    })
}

/// Runs the TLB-stress sweep and writes the result CSV to `csv_path`.
///
/// `config_path` names a TOML experiment file; null selects the built-in
/// four-configuration sweep. `jobs` of zero means one worker per CPU.
///
/// # Safety
/// `config_path` must be null or a NUL-terminated string; `csv_path` must be
/// a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn svn_run_sweep_csv(config_path: *const c_char, csv_path: *const c_char, jobs: u32) -> SvnStatus {
    guard(|| {
        non_null(csv_path, "csv_path")?;
        let out = c_path(csv_path, "csv_path")?;
        let config = if config_path.is_null() {
            ExperimentConfig::default()
        } else {
            check(ExperimentConfig::load(c_path(config_path, "config_path")?))?
        };
        let jobs = match jobs {
            0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
            n => n as usize,
        };
        let rows = check(run_sweep(&config, jobs))?;
        check(emit_csv(&rows, out))
    })
}
