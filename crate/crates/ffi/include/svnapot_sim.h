/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef SVNAPOT_SIM_H
#define SVNAPOT_SIM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SvnStatus {
  SVN_STATUS_OK = 0,
  SVN_STATUS_NULL_POINTER = 1,
  SVN_STATUS_NON_CANONICAL = 2,
  SVN_STATUS_MALFORMED_NAPOT = 3,
  SVN_STATUS_INVALID_ARGUMENT = 4,
  SVN_STATUS_REGION_OVERLAP = 5,
  SVN_STATUS_UNMAPPED = 6,
  SVN_STATUS_CONFIG = 7,
  SVN_STATUS_IO = 8,
  SVN_STATUS_PANIC = 9,
} SvnStatus;

typedef enum SvnPageSize {
  SVN_PAGE_SIZE_KB4 = 0,
  SVN_PAGE_SIZE_KB64 = 1,
} SvnPageSize;

typedef enum SvnPath {
  SVN_PATH_L1_HIT = 0,
  SVN_PATH_L2_HIT = 1,
  SVN_PATH_WALK = 2,
} SvnPath;

typedef enum SvnPhase {
  SVN_PHASE_WARMUP = 0,
  SVN_PHASE_MEASUREMENT = 1,
} SvnPhase;

/**
 * Opaque simulator handle.
 */
typedef struct SvnSimulator SvnSimulator;

typedef struct SvnSimConfig {
  uint32_t l2_entries;
  uint32_t l2_ways;
  /**
   * Seeded random replacement in the L2 instead of LRU.
   */
  bool random_replacement;
  uint64_t replacement_seed;
  uint64_t l1_hit_cycles;
  uint64_t l2_lookup_cycles;
  uint64_t mem_read_cycles;
  uint32_t ptw_cache_entries;
  bool flush_ptw_between_phases;
} SvnSimConfig;

/**
 * Decoded page-table entry.
 */
typedef struct SvnPte {
  bool valid;
  bool readable;
  bool writable;
  bool executable;
  bool n_bit;
  uint8_t level;
  uint64_t ppn;
} SvnPte;

typedef struct SvnRegion {
  uint64_t base_va;
  uint64_t length;
  enum SvnPageSize page_size;
  uint64_t base_ppn;
} SvnRegion;

typedef struct SvnOutcome {
  uint64_t pa;
  enum SvnPath path;
  /**
   * PTEs read from memory; zero unless `path` is a walk.
   */
  uint32_t memory_reads;
  uint64_t cycles;
} SvnOutcome;

typedef struct SvnPhaseStats {
  uint64_t accesses;
  uint64_t l1_hits;
  uint64_t l1_misses;
  uint64_t l2_hits;
  uint64_t l2_misses;
  uint64_t walks;
  uint64_t walk_memory_reads;
  uint64_t total_cycles;
} SvnPhaseStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null if none.
 *
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *svn_last_error_message(void);

/**
 * Default configuration: 1024-entry LRU L2 with `l2_ways` ways, 8-entry PTW
 * cache, 1/3/30 cycle latencies.
 */
struct SvnSimConfig svn_sim_config_default(uint32_t l2_ways);

/**
 * Physical page of `napot_offset` within the 64KB page whose PTE holds
 * `entry_ppn`.
 *
 * # Safety
 * `out_ppn` must be null or valid for writes.
 */
enum SvnStatus svn_napot_translate(uint64_t entry_ppn, uint64_t napot_offset, uint64_t *out_ppn);

/**
 * L2 set index of `vpn` for a TLB with `sets` sets.
 *
 * # Safety
 * `out_index` must be null or valid for writes.
 */
enum SvnStatus svn_l2_index(uint64_t vpn, uint32_t sets, uint32_t *out_index);

/**
 * # Safety
 * `out_pte` must be null or valid for writes.
 */
enum SvnStatus svn_decode_pte(uint64_t raw, struct SvnPte *out_pte);

/**
 * # Safety
 * `pte` must be null or valid for reads; `out_raw` null or valid for writes.
 */
enum SvnStatus svn_encode_pte(const struct SvnPte *pte, uint64_t *out_raw);

/**
 * Builds page tables for `regions` and a simulator over them.
 *
 * # Safety
 * `config` must be valid for reads, `regions` valid for `region_count`
 * elements (or null when the count is zero), and `out` valid for writes.
 */
enum SvnStatus svn_simulator_new(const struct SvnSimConfig *config,
                                 const struct SvnRegion *regions,
                                 size_t region_count,
                                 struct SvnSimulator **out);

/**
 * # Safety
 * `sim` must be null or a handle from [`svn_simulator_new`] not yet freed.
 */
void svn_simulator_free(struct SvnSimulator *sim);

/**
 * Translates one access and charges it to the current phase.
 *
 * # Safety
 * `sim` must be a live handle; `out` null or valid for writes.
 */
enum SvnStatus svn_simulator_translate(struct SvnSimulator *sim,
                                       uint64_t va,
                                       struct SvnOutcome *out);

/**
 * # Safety
 * `sim` must be a live handle.
 */
enum SvnStatus svn_simulator_set_phase(struct SvnSimulator *sim, enum SvnPhase phase);

/**
 * # Safety
 * `sim` must be a live handle.
 */
enum SvnStatus svn_simulator_phase(const struct SvnSimulator *sim, enum SvnPhase *out);

/**
 * # Safety
 * `sim` must be a live handle; `out` null or valid for writes.
 */
enum SvnStatus svn_simulator_stats(const struct SvnSimulator *sim,
                                   enum SvnPhase phase,
                                   struct SvnPhaseStats *out);

/**
 * Drops every cached translation; counters are kept.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum SvnStatus svn_simulator_flush(struct SvnSimulator *sim);

/**
 * Runs the TLB-stress sweep and writes the result CSV to `csv_path`.
 *
 * `config_path` names a TOML experiment file; null selects the built-in
 * four-configuration sweep. `jobs` of zero means one worker per CPU.
 *
 * # Safety
 * `config_path` must be null or a NUL-terminated string; `csv_path` must be
 * a NUL-terminated string.
 */
enum SvnStatus svn_run_sweep_csv(const char *config_path, const char *csv_path, uint32_t jobs);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SVNAPOT_SIM_H */
