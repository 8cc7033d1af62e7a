//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use svnapot_sim::engine::{Phase, PhaseStats, SimConfig, Simulator, TranslationPath};
use svnapot_sim::experiment::{run_sweep, write_csv, ExperimentConfig, ResultRow};
use svnapot_sim::page_table::RegionSpec;
use svnapot_sim::sv39::{PageSize, PageTableEntry, Perms, VirtAddr};
use svnapot_sim::tlb::{L2Tlb, L2TlbConfig, Replacement};
use svnapot_sim::workload::{chunk_sizes, PatternKind, DEFAULT_BASE_PPN, DEFAULT_BASE_VA};

const KB: u64 = 1 << 10;
const MB: u64 = 1 << 20;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Sweep {
    rows: Vec<ResultRow>,
    csv: Vec<u8>,
}

impl Sweep {
    fn run() -> Self {
        let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
        let rows = run_sweep(&ExperimentConfig::default(), jobs).expect("default sweep runs");
        let mut csv = Vec::new();
        write_csv(&rows, &mut csv).expect("csv");
        Sweep { rows, csv }
    }

    fn stats(&self, config_id: u32, pattern: PatternKind, chunk: u64) -> PhaseStats {
        self.rows
            .iter()
            .find(|r| {
                r.config_id == config_id
                    && r.pattern == pattern
                    && r.chunk_bytes == chunk
                    && r.phase == Phase::Measurement
            })
            .unwrap_or_else(|| panic!("missing row {config_id}/{pattern}/{chunk}"))
            .stats
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn sizes() -> Vec<u64> {
    chunk_sizes(4 * KB, 256 * MB)
}

fn c1_l1_reach(sweep: &Sweep) -> Outcome {
    for chunk in sizes().into_iter().filter(|&c| c <= 128 * KB) {
        let s = sweep.stats(2, PatternKind::Linear, chunk);
        ensure(s.l1_hits == s.accesses && s.accesses == 1_000_000, || {
            format!("{} KB: {} of {} accesses hit L1", chunk / KB, s.l1_hits, s.accesses)
        })?;
    }
    let past = sweep.stats(2, PatternKind::Linear, 256 * KB);
    Ok(format!(
        "config 2 linear: 100% L1 hits for 4KB..128KB; 256KB drops to {} L1 hits",
        past.l1_hits
    ))
}

/// Largest chunk with zero measured L2 misses, and the first chunk with misses.
fn reach(sweep: &Sweep, config_id: u32, pattern: PatternKind) -> (u64, u64) {
    let all = sizes();
    let first_miss = all
        .iter()
        .copied()
        .find(|&c| sweep.stats(config_id, pattern, c).l2_misses > 0)
        .unwrap_or(u64::MAX);
    let last_zero = all.iter().copied().filter(|&c| c < first_miss).max().unwrap_or(0);
    (last_zero, first_miss)
}

fn check_reach(sweep: &Sweep, config_id: u32, pattern: PatternKind, limit: u64) -> Result<(), String> {
    for chunk in sizes() {
        let misses = sweep.stats(config_id, pattern, chunk).l2_misses;
        if chunk <= limit {
            ensure(misses == 0, || {
                format!("config {config_id} {pattern}: {misses} L2 misses at {} KB", chunk / KB)
            })?;
        }
    }
    let beyond = sweep.stats(config_id, pattern, limit * 2).l2_misses;
    ensure(beyond > 0, || {
        format!("config {config_id} {pattern}: no L2 misses at {} KB", limit * 2 / KB)
    })
}

fn c2_16way_4k_reach(sweep: &Sweep) -> Outcome {
    check_reach(sweep, 2, PatternKind::Linear, 4 * MB)?;
    check_reach(sweep, 2, PatternKind::Random, 4 * MB)?;
    Ok(format!(
        "config 2: zero L2 misses up to 4MB; 8MB misses linear={} random={}",
        sweep.stats(2, PatternKind::Linear, 8 * MB).l2_misses,
        sweep.stats(2, PatternKind::Random, 8 * MB).l2_misses
    ))
}

fn c3_64k_reach(sweep: &Sweep) -> Outcome {
    check_reach(sweep, 4, PatternKind::Random, 64 * MB)?;
    let (reach2, _) = reach(sweep, 2, PatternKind::Random);
    let (reach4, _) = reach(sweep, 4, PatternKind::Random);
    ensure(reach4 == 16 * reach2, || {
        format!("reach ratio {}:{} is not 16", reach4, reach2)
    })?;
    Ok(format!(
        "config 4 random: zero L2 misses up to 64MB, {} at 128MB; reach 4:2 = {}MB:{}MB = 16",
        sweep.stats(4, PatternKind::Random, 128 * MB).l2_misses,
        reach4 / MB,
        reach2 / MB
    ))
}

/// Replays two linear passes over `pages` pages straight into an L2 and
/// returns (hits, misses) of the second pass.
fn l2_only_second_pass(ways: usize, pages: u64) -> (u64, u64) {
    let mut tlb = L2Tlb::new(L2TlbConfig::new(ways)).unwrap();
    let base = DEFAULT_BASE_VA >> 12;
    let mut second = (0, 0);
    for pass in 0..2 {
        for p in 0..pages {
            let vpn = base + p;
            let hit = tlb.lookup(vpn).is_some();
            if !hit {
                tlb.insert(vpn, &PageTableEntry::leaf_4k(DEFAULT_BASE_PPN + p, Perms::RW)).unwrap();
            }
            if pass == 1 {
                if hit {
                    second.0 += 1;
                } else {
                    second.1 += 1;
                }
            }
        }
    }
    second
}

fn c4_4way_thrashing(sweep: &Sweep) -> Outcome {
    // Every chunk past the 64KB group boundary: no measured L2 hit at all in config 1.
    for chunk in sizes().into_iter().filter(|&c| c >= 128 * KB) {
        let s1 = sweep.stats(1, PatternKind::Linear, chunk);
        ensure(s1.l2_hits == 0, || {
            format!("config 1 linear {} KB: {} L2 hits", chunk / KB, s1.l2_hits)
        })?;
        let s2 = sweep.stats(2, PatternKind::Linear, chunk);
        ensure(s1.l2_misses >= s2.l2_misses, || {
            format!("config 1 has fewer misses than config 2 at {} KB", chunk / KB)
        })?;
    }

    // 128KB is shielded by the L1 in the full hierarchy; the L2 alone shows the conflict.
    let (hits4, misses4) = l2_only_second_pass(4, 32);
    let (hits16, misses16) = l2_only_second_pass(16, 32);
    ensure(hits4 == 0 && misses4 == 32, || {
        format!("4-way L2, 128KB second pass: {hits4} hits / {misses4} misses")
    })?;
    ensure(hits16 == 32 && misses16 == 0, || {
        format!("16-way L2, 128KB second pass: {hits16} hits / {misses16} misses")
    })?;

    // The cliff: within config 2's 4MB reach, config 1 misses at least 100x more.
    let mut min_ratio = f64::INFINITY;
    for chunk in sizes().into_iter().filter(|&c| (256 * KB..=4 * MB).contains(&c)) {
        let m1 = sweep.stats(1, PatternKind::Linear, chunk).l2_misses;
        let m2 = sweep.stats(2, PatternKind::Linear, chunk).l2_misses;
        ensure(m1 > 0 && m1 >= 100 * m2, || {
            format!("{} KB: config 1 misses {m1} vs config 2 {m2}", chunk / KB)
        })?;
        min_ratio = min_ratio.min(m1 as f64 / m2.max(1) as f64);
    }
    Ok(format!(
        "config 1 L2 hit rate 0 for all chunks >= 128KB; L2-only 128KB second pass 4-way {hits4}/32 hits vs 16-way {hits16}/32; \
         256KB..4MB misses config1/config2 >= {min_ratio:.0}x"
    ))
}

fn cold_pass_walks(page_size: PageSize, ways: usize, chunk: u64) -> u64 {
    let region = RegionSpec {
        base_va: DEFAULT_BASE_VA,
        length: chunk.max(page_size.bytes()),
        page_size,
        base_ppn: DEFAULT_BASE_PPN,
    };
    let mut sim = Simulator::new(SimConfig::new(ways), &[region]).unwrap();
    for p in 0..chunk / 4096 {
        sim.translate(VirtAddr::new(DEFAULT_BASE_VA + p * 4096).unwrap()).unwrap();
    }
    sim.stats().measurement.walks
}

fn c5_ptw_savings() -> Outcome {
    let mut checked = 0;
    for ways in [4, 16] {
        for chunk in sizes() {
            let small = cold_pass_walks(PageSize::Page4K, ways, chunk);
            let big = cold_pass_walks(PageSize::Page64K, ways, chunk);
            ensure(small == chunk / 4096, || format!("{} KB: {small} 4KB walks", chunk / KB))?;
            // Below one 64KB page the saving is capped by the pages touched.
            let expected = (chunk / 4096).min(16);
            ensure(small == expected * big, || {
                format!("{ways}-way {} KB: walks 4KB/64KB = {small}/{big}, expected ratio {expected}", chunk / KB)
            })?;
            checked += 1;
        }
    }
    Ok(format!(
        "{checked} cold first passes: walks(4KB)/walks(64KB) == 16 for every chunk >= 64KB (4KB..256MB, 4- and 16-way)"
    ))
}

fn c6_cycle_ordering(sweep: &Sweep) -> Outcome {
    let mut best = 0.0f64;
    for pattern in [PatternKind::Linear, PatternKind::Random] {
        for chunk in sizes() {
            let c2 = sweep.stats(2, pattern, chunk).total_cycles;
            let c4 = sweep.stats(4, pattern, chunk).total_cycles;
            ensure(c4 <= c2, || format!("{pattern} {} KB: config 4 {c4} > config 2 {c2} cycles", chunk / KB))?;
            if chunk > 4 * MB {
                ensure(c4 < c2, || format!("{pattern} {} KB: config 4 not faster ({c4} vs {c2})", chunk / KB))?;
            }
            best = best.max(c2 as f64 / c4 as f64);
        }
    }
    Ok(format!(
        "config 4 <= config 2 cycles at every chunk (linear and random), strictly below past 4MB; max speedup {best:.2}x"
    ))
}

fn c7_oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0007);
    let mut draws = 0u64;
    let mut paths: HashMap<(PageSize, u8), u64> = HashMap::new();
    while draws < 10_000 {
        let n_regions = rng.gen_range(1..=4);
        let mut slots: Vec<u64> = Vec::new();
        while slots.len() < n_regions {
            let s = rng.gen_range(0..256u64);
            if !slots.contains(&s) {
                slots.push(s);
            }
        }
        let regions: Vec<RegionSpec> = slots
            .iter()
            .enumerate()
            .map(|(i, &slot)| {
                let page_size = if rng.gen_bool(0.5) { PageSize::Page64K } else { PageSize::Page4K };
                let pages = rng.gen_range(1..=if page_size == PageSize::Page64K { 8 } else { 96 });
                RegionSpec {
                    base_va: slot << 28,
                    length: pages * page_size.bytes(),
                    page_size,
                    base_ppn: ((i as u64 + 1) << 20) + rng.gen_range(0..4096u64) * 16,
                }
            })
            .collect();
        let ways = if rng.gen_bool(0.5) { 4 } else { 16 };
        let replacement = if rng.gen_bool(0.5) {
            Replacement::Lru
        } else {
            Replacement::Random { seed: rng.gen() }
        };
        let config = SimConfig {
            l2: L2TlbConfig {
                replacement,
                ..L2TlbConfig::new(ways)
            },
            ..SimConfig::new(ways)
        };
        let mut sim = Simulator::new(config, &regions).map_err(|e| e.to_string())?;
        let mut recent: Vec<(u64, usize)> = Vec::new();
        for _ in 0..200 {
            let (va, idx) = if !recent.is_empty() && rng.gen_bool(0.3) {
                recent[rng.gen_range(0..recent.len())]
            } else {
                let idx = rng.gen_range(0..regions.len());
                (regions[idx].base_va + rng.gen_range(0..regions[idx].length), idx)
            };
            recent.push((va, idx));
            let out = sim.translate(VirtAddr::new(va).unwrap()).map_err(|e| e.to_string())?;
            let region = &regions[idx];
            let expected = (region.translate(va).unwrap() << 12) | (va & 0xFFF);
            ensure(out.pa.value() == expected, || {
                format!("va {va:#x}: simulator {:#x}, oracle {expected:#x}", out.pa.value())
            })?;
            let path = match out.path {
                TranslationPath::L1Hit => 0,
                TranslationPath::L2Hit => 1,
                TranslationPath::Walk { .. } => 2,
            };
            *paths.entry((region.page_size, path)).or_default() += 1;
            draws += 1;
        }
    }
    for page_size in [PageSize::Page4K, PageSize::Page64K] {
        for path in 0..3u8 {
            ensure(paths.get(&(page_size, path)).copied().unwrap_or(0) > 0, || {
                format!("path {path} never exercised for {page_size} pages")
            })?;
        }
    }
    let count = |ps, p| paths.get(&(ps, p)).copied().unwrap_or(0);
    Ok(format!(
        "{draws}/{draws} PAs match; 4K paths L1/L2/walk = {}/{}/{}, 64K = {}/{}/{}",
        count(PageSize::Page4K, 0),
        count(PageSize::Page4K, 1),
        count(PageSize::Page4K, 2),
        count(PageSize::Page64K, 0),
        count(PageSize::Page64K, 1),
        count(PageSize::Page64K, 2)
    ))
}

fn c8_napot_differential() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0008);
    for _ in 0..1000 {
        let frame = rng.gen_range(0..(1u64 << 30)) << 4;
        let group = rng.gen_range(0..(1u64 << 23));
        let ways = if rng.gen_bool(0.5) { 4 } else { 16 };

        // One NAPOT L2 entry against 16 discrete 4KB entries.
        let mut napot = L2Tlb::new(L2TlbConfig::new(ways)).unwrap();
        napot
            .insert(group << 4, &PageTableEntry::leaf_64k(frame, Perms::RW).unwrap())
            .unwrap();
        for k in 0..16 {
            let vpn = (group << 4) | k;
            let mut discrete = L2Tlb::new(L2TlbConfig::new(ways)).unwrap();
            discrete.insert(vpn, &PageTableEntry::leaf_4k(frame + k, Perms::RW)).unwrap();
            let a = napot.lookup(vpn).map(|h| h.ppn);
            let b = discrete.lookup(vpn).map(|h| h.ppn);
            ensure(a.is_some() && a == b, || format!("frame {frame:#x} offset {k}: {a:?} vs {b:?}"))?;
        }

        // Same check through the whole hierarchy: 64KB-backed vs 4KB-backed tables.
        let va_base = VirtAddr::from_vpn(group << 4, 0).value();
        let region = |page_size| RegionSpec {
            base_va: va_base,
            length: 64 * KB,
            page_size,
            base_ppn: frame,
        };
        let mut big = Simulator::new(SimConfig::new(ways), &[region(PageSize::Page64K)]).unwrap();
        let mut small = Simulator::new(SimConfig::new(ways), &[region(PageSize::Page4K)]).unwrap();
        for k in 0..16 {
            let va = VirtAddr::new(va_base + k * 4096 + rng.gen_range(0..4096)).unwrap();
            let a = big.translate(va).map_err(|e| e.to_string())?.pa;
            let b = small.translate(va).map_err(|e| e.to_string())?.pa;
            ensure(a == b, || format!("va {va}: NAPOT {a:?} vs 4KB {b:?}"))?;
        }
        ensure(big.stats().measurement.walks == 1 && small.stats().measurement.walks == 16, || {
            "unexpected walk counts".into()
        })?;
    }
    Ok("1000 frames x 16 offsets: one NAPOT entry == 16 discrete 4KB mappings (L2 and full hierarchy)".into())
}

fn set_hash(tlb: &L2Tlb, index: usize) -> u64 {
    let mut h = DefaultHasher::new();
    tlb.set(index).hash(&mut h);
    h.finish()
}

fn c9_flush_semantics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0009);
    for state in 0..1000 {
        let ways = if rng.gen_bool(0.5) { 4 } else { 16 };
        let mut tlb = L2Tlb::new(L2TlbConfig::new(ways)).unwrap();
        // Small VPN space so sets collide and fill up.
        let span = rng.gen_range(64..(1u64 << 16));
        let mut inserted = Vec::new();
        for _ in 0..rng.gen_range(0..1500) {
            let vpn = rng.gen_range(0..span);
            let pte = if rng.gen_bool(0.3) {
                PageTableEntry::leaf_64k(rng.gen_range(0..(1u64 << 20)) << 4, Perms::RW).unwrap()
            } else {
                PageTableEntry::leaf_4k(rng.gen_range(0..(1u64 << 24)), Perms::RW)
            };
            tlb.insert(vpn, &pte).unwrap();
            inserted.push(vpn);
        }
        let vpn = if !inserted.is_empty() && rng.gen_bool(0.8) {
            inserted[rng.gen_range(0..inserted.len())]
        } else {
            rng.gen_range(0..span)
        };
        let va = VirtAddr::from_vpn(vpn, rng.gen_range(0..4096));
        let target = tlb.index(vpn);
        let before: Vec<u64> = (0..tlb.sets()).map(|i| set_hash(&tlb, i)).collect();
        tlb.flush(va);
        for k in 0..16 {
            let group_vpn = (vpn & !0xF) | k;
            ensure(tlb.lookup(group_vpn).is_none(), || {
                format!("state {state}: vpn {group_vpn:#x} still hits after flush")
            })?;
        }
        ensure(tlb.set(target).iter().all(|e| !e.valid), || format!("state {state}: set not cleared"))?;
        for i in (0..tlb.sets()).filter(|&i| i != target) {
            ensure(set_hash(&tlb, i) == before[i], || format!("state {state}: set {i} changed"))?;
        }
    }
    Ok("1000 random L2 states: flushed group misses on all 16 VPNs, every other set hash unchanged".into())
}

fn c10_determinism(first: &Sweep) -> Outcome {
    let second = Sweep::run();
    ensure(first.csv == second.csv, || "default sweep CSVs differ".into())?;
    let mut h = DefaultHasher::new();
    first.csv.hash(&mut h);
    Ok(format!(
        "two default sweeps: {} rows, {} CSV bytes, identical (hash {:016x})",
        first.rows.len(),
        first.csv.len(),
        h.finish()
    ))
}

fn main() {
    let sweep = Sweep::run();
    let criteria: Vec<Criterion> = vec![
        ("C1 L1 reach", Box::new(|| c1_l1_reach(&sweep))),
        ("C2 16-way 4KB reach", Box::new(|| c2_16way_4k_reach(&sweep))),
        ("C3 64KB-page reach", Box::new(|| c3_64k_reach(&sweep))),
        ("C4 4-way thrashing", Box::new(|| c4_4way_thrashing(&sweep))),
        ("C5 PTW savings", Box::new(c5_ptw_savings)),
        ("C6 cycle ordering", Box::new(|| c6_cycle_ordering(&sweep))),
        ("C7 oracle equivalence", Box::new(c7_oracle_equivalence)),
        ("C8 NAPOT differential", Box::new(c8_napot_differential)),
        ("C9 flush semantics", Box::new(c9_flush_semantics)),
        ("C10 determinism", Box::new(|| c10_determinism(&sweep))),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
