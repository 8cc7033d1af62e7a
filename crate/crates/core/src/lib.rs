//! Trace-driven simulator of an sv39 address-translation hierarchy with
//! SVNAPOT 64KB pages.
//!
//! The L2 TLB keeps 4KB and 64KB entries side by side and indexes both with
//! the VPN bits above the 64KB group offset. [`engine::Simulator`] drives
//! every access through the L1 DTLB, the L2 TLB and the page-table walker;
//! [`experiment::run_sweep`] replays the TLB-stress grid over the four
//! evaluated L2 configurations.

pub mod engine;
pub mod error;
pub mod experiment;
pub mod page_table;
pub mod sv39;
pub mod tlb;
pub mod workload;

pub use engine::{LatencyModel, Phase, PhaseStats, SimConfig, SimStats, Simulator, TranslationOutcome, TranslationPath};
pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, ResultRow};
pub use page_table::{build_page_tables, walk, PageTable, PtwCache, RegionSpec, SimPhysMem, WalkResult};
pub use sv39::{decode_pte, encode_pte, napot_translate, split_va, PageSize, PageTableEntry, Perms, PhysAddr, VirtAddr};
pub use tlb::{l2_index, L1Dtlb, L2Tlb, L2TlbConfig, L2TlbEntry, Replacement};
pub use workload::{gen_linear, gen_random, make_regions, AccessTrace, Pattern, PatternKind, WorkloadSpec};
