//! sv39 address arithmetic and PTE encoding, including the SVNAPOT 64KB leaf form.
//!
//! A 64KB NAPOT leaf is a level-0 PTE with bit 63 (N) set whose PPN ends in
//! `0b1000`. The low four VPN bits of the virtual address (the NAPOT offset)
//! select the 4KB frame inside the naturally aligned 16-frame group.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAGE_SHIFT: u32 = 12;
pub const PAGE_SIZE: u64 = 1 << PAGE_SHIFT;
pub const VPN_BITS: u32 = 27;
pub const VPN_MASK: u64 = (1 << VPN_BITS) - 1;
pub const PPN_BITS: u32 = 44;
pub const PPN_MASK: u64 = (1 << PPN_BITS) - 1;
pub const LEVELS: usize = 3;
pub const LEVEL_BITS: u32 = 9;
pub const LEVEL_MASK: u64 = (1 << LEVEL_BITS) - 1;
pub const PTE_BYTES: u64 = 8;

/// VPN bits covered by one 64KB NAPOT group.
pub const NAPOT_SHIFT: u32 = 4;
pub const NAPOT_MASK: u64 = (1 << NAPOT_SHIFT) - 1;
/// Low PPN nibble of a 64KB NAPOT leaf.
pub const NAPOT_64K_ENCODING: u64 = 0b1000;

const PTE_V: u64 = 1 << 0;
const PTE_R: u64 = 1 << 1;
const PTE_W: u64 = 1 << 2;
const PTE_X: u64 = 1 << 3;
const PTE_PPN_SHIFT: u32 = 10;
const PTE_N: u64 = 1 << 63;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct VirtAddr(u64);

impl VirtAddr {
    pub fn new(value: u64) -> Result<Self> {
        if is_canonical(value) {
            Ok(Self(value))
        } else {
            Err(Error::NonCanonical { va: value })
        }
    }

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn vpn(self) -> u64 {
        (self.0 >> PAGE_SHIFT) & VPN_MASK
    }

    /// 9-bit index into the table at `level` (2 = root).
    pub fn vpn_level(self, level: usize) -> u64 {
        debug_assert!(level < LEVELS);
        (self.vpn() >> (LEVEL_BITS * level as u32)) & LEVEL_MASK
    }

    pub fn page_offset(self) -> u64 {
        self.0 & (PAGE_SIZE - 1)
    }

    pub fn napot_offset(self) -> u64 {
        self.vpn() & NAPOT_MASK
    }

    pub fn napot_vpn(self) -> u64 {
        self.vpn() >> NAPOT_SHIFT
    }

    /// Builds a canonical address from a 27-bit VPN and a page offset,
    /// sign-extending bit 38.
    pub fn from_vpn(vpn: u64, offset: u64) -> Self {
        let low = ((vpn & VPN_MASK) << PAGE_SHIFT) | (offset & (PAGE_SIZE - 1));
        Self(sign_extend_39(low))
    }
}

impl fmt::Debug for VirtAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VirtAddr({:#x})", self.0)
    }
}

impl fmt::Display for VirtAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.0)
    }
}

impl TryFrom<u64> for VirtAddr {
    type Error = Error;

    fn try_from(value: u64) -> Result<Self> {
        Self::new(value)
    }
}

fn sign_extend_39(value: u64) -> u64 {
    (((value << 25) as i64) >> 25) as u64
}

pub fn is_canonical(value: u64) -> bool {
    sign_extend_39(value) == value
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct PhysAddr(u64);

impl PhysAddr {
    pub const BITS: u32 = 56;

    pub fn from_parts(ppn: u64, page_offset: u64) -> Self {
        Self(((ppn & PPN_MASK) << PAGE_SHIFT) | (page_offset & (PAGE_SIZE - 1)))
    }

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn ppn(self) -> u64 {
        self.0 >> PAGE_SHIFT
    }

    pub fn page_offset(self) -> u64 {
        self.0 & (PAGE_SIZE - 1)
    }
}

impl fmt::Debug for PhysAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PhysAddr({:#x})", self.0)
    }
}

/// Every derived view of a virtual address.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VaParts {
    pub vpn: u64,
    /// Indexed by level: `levels[2]` selects the root entry.
    pub levels: [u64; LEVELS],
    pub page_offset: u64,
    pub napot_offset: u64,
}

pub fn split_va(va: u64) -> Result<VaParts> {
    let va = VirtAddr::new(va)?;
    Ok(VaParts {
        vpn: va.vpn(),
        levels: [va.vpn_level(0), va.vpn_level(1), va.vpn_level(2)],
        page_offset: va.page_offset(),
        napot_offset: va.napot_offset(),
    })
}

/// Resolves the 4KB frame selected by `napot_offset` inside the 64KB group
/// described by a NAPOT-encoded `entry_ppn`.
///
/// The encoding nibble of the stored PPN is replaced by the offset, i.e.
/// frame = (entry_ppn >> 4) * 16 + napot_offset.
pub fn napot_translate(entry_ppn: u64, napot_offset: u64) -> Result<u64> {
    if entry_ppn & NAPOT_MASK != NAPOT_64K_ENCODING || entry_ppn > PPN_MASK {
        return Err(Error::MalformedNapot { ppn: entry_ppn });
    }
    if napot_offset > NAPOT_MASK {
        return Err(Error::NapotOffsetRange {
            offset: napot_offset,
        });
    }
    Ok(napot_frame(entry_ppn, napot_offset))
}

/// [`napot_translate`] without the precondition checks, for entries already validated on fill.
#[inline]
pub(crate) fn napot_frame(entry_ppn: u64, napot_offset: u64) -> u64 {
    ((entry_ppn >> NAPOT_SHIFT) << NAPOT_SHIFT) | (napot_offset & NAPOT_MASK)
}

/// Encodes a 64KB-aligned base frame in the NAPOT leaf form.
pub fn napot_encode(base_ppn: u64) -> Result<u64> {
    if base_ppn & NAPOT_MASK != 0 {
        return Err(Error::Alignment {
            what: "NAPOT base ppn",
            value: base_ppn,
            align: 1 << NAPOT_SHIFT,
        });
    }
    Ok(base_ppn | NAPOT_64K_ENCODING)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Perms {
    pub readable: bool,
    pub writable: bool,
    pub executable: bool,
}

impl Perms {
    pub const RW: Perms = Perms {
        readable: true,
        writable: true,
        executable: false,
    };

    pub fn any(self) -> bool {
        self.readable || self.writable || self.executable
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct PageTableEntry {
    pub valid: bool,
    pub perms: Perms,
    pub ppn: u64,
    pub n_bit: bool,
    /// Level at which the entry was found; not part of the encoding.
    pub level: u8,
}

impl PageTableEntry {
    pub fn leaf_4k(ppn: u64, perms: Perms) -> Self {
        Self {
            valid: true,
            perms,
            ppn,
            n_bit: false,
            level: 0,
        }
    }

    pub fn leaf_64k(base_ppn: u64, perms: Perms) -> Result<Self> {
        Ok(Self {
            valid: true,
            perms,
            ppn: napot_encode(base_ppn)?,
            n_bit: true,
            level: 0,
        })
    }

    pub fn pointer(table_ppn: u64) -> Self {
        Self {
            valid: true,
            perms: Perms::default(),
            ppn: table_ppn,
            n_bit: false,
            level: 0,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.valid && self.perms.any()
    }

    pub fn page_size(&self) -> PageSize {
        if self.n_bit {
            PageSize::Page64K
        } else {
            PageSize::Page4K
        }
    }

    /// PPN of the 4KB frame backing `vpn` under this leaf.
    pub fn frame_for(&self, vpn: u64) -> u64 {
        if self.n_bit {
            napot_frame(self.ppn, vpn)
        } else {
            self.ppn
        }
    }
}

pub fn encode_pte(pte: &PageTableEntry) -> u64 {
    let mut raw = (pte.ppn & PPN_MASK) << PTE_PPN_SHIFT;
    if pte.valid {
        raw |= PTE_V;
    }
    if pte.perms.readable {
        raw |= PTE_R;
    }
    if pte.perms.writable {
        raw |= PTE_W;
    }
    if pte.perms.executable {
        raw |= PTE_X;
    }
    if pte.n_bit {
        raw |= PTE_N;
    }
    raw
}

pub fn decode_pte(raw: u64) -> Result<PageTableEntry> {
    decode_pte_at(raw, 0)
}

/// Decodes a PTE read from a table at `level`.
///
/// Invalid entries decode without further checks; the walker turns them into faults.
pub fn decode_pte_at(raw: u64, level: u8) -> Result<PageTableEntry> {
    let pte = PageTableEntry {
        valid: raw & PTE_V != 0,
        perms: Perms {
            readable: raw & PTE_R != 0,
            writable: raw & PTE_W != 0,
            executable: raw & PTE_X != 0,
        },
        ppn: (raw >> PTE_PPN_SHIFT) & PPN_MASK,
        n_bit: raw & PTE_N != 0,
        level,
    };
    if pte.valid && pte.n_bit {
        // N is reserved on non-leaf entries and on superpage leaves.
        if !pte.perms.any() || level != 0 || pte.ppn & NAPOT_MASK != NAPOT_64K_ENCODING {
            return Err(Error::MalformedNapot { ppn: pte.ppn });
        }
    }
    Ok(pte)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PageSize {
    #[serde(rename = "4K")]
    Page4K,
    #[serde(rename = "64K")]
    Page64K,
}

impl PageSize {
    pub fn bytes(self) -> u64 {
        match self {
            PageSize::Page4K => PAGE_SIZE,
            PageSize::Page64K => PAGE_SIZE << NAPOT_SHIFT,
        }
    }

    /// Number of 4KB frames spanned.
    pub fn frames(self) -> u64 {
        self.bytes() / PAGE_SIZE
    }
}

impl fmt::Display for PageSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PageSize::Page4K => "4K",
            PageSize::Page64K => "64K",
        })
    }
}

impl FromStr for PageSize {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "4K" | "4KB" | "4096" => Ok(PageSize::Page4K),
            "64K" | "64KB" | "65536" => Ok(PageSize::Page64K),
            other => Err(format!("unsupported page size `{other}` (expected 4K or 64K)")),
        }
    }
}
