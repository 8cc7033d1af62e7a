use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("virtual address {va:#x} is not canonical for sv39 (bits 63:39 must equal bit 38)")]
    NonCanonical { va: u64 },

    #[error("malformed NAPOT PTE: ppn {ppn:#x} must end in 0b1000 for a 64KB page")]
    MalformedNapot { ppn: u64 },

    #[error("NAPOT offset {offset:#x} does not fit in 4 bits")]
    NapotOffsetRange { offset: u64 },

    #[error("superpage leaf at level {level} for va {va:#x} is not supported")]
    UnsupportedSuperpage { level: u8, va: u64 },

    #[error("TLB fill requires a valid level-0 leaf PTE")]
    NotALeaf,

    #[error("{what} {value:#x} is not aligned to {align:#x}")]
    Alignment {
        what: &'static str,
        value: u64,
        align: u64,
    },

    #[error("region at {base_va:#x} has zero length")]
    EmptyRegion { base_va: u64 },

    #[error("region at {base_va:#x} does not fit in the sv39 or physical address space")]
    RegionOutOfRange { base_va: u64 },

    #[error("regions at {first:#x} and {second:#x} overlap")]
    RegionOverlap { first: u64, second: u64 },

    #[error("access to unmapped virtual address {va:#x}")]
    UnmappedAccess { va: u64 },

    #[error("invalid TLB configuration: {0}")]
    TlbConfig(String),

    #[error("invalid workload: {0}")]
    Workload(String),

    #[error("invalid experiment config: {0}")]
    Config(String),

    #[error("trace parse error on line {line}: {msg}")]
    TraceParse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
