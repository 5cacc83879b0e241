#ifndef SORAM_H
#define SORAM_H

/* Generated by cbindgen from soram-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  SORAM_CONSTRUCTION_PATH = 0,
  SORAM_CONSTRUCTION_SUCCINCT_ONE = 1,
  SORAM_CONSTRUCTION_SUCCINCT_TWO = 2,
} SoramConstruction;

/**
 * Status codes returned by every fallible call.
 */
typedef enum {
  SORAM_STATUS_OK = 0,
  SORAM_STATUS_ERR_INVALID_ARGUMENT = 1,
  SORAM_STATUS_ERR_INTEGRITY = 2,
  SORAM_STATUS_ERR_BUFFER_TOO_SMALL = 3,
  SORAM_STATUS_ERR_PANIC = 4,
} SoramStatus;

typedef enum {
  SORAM_TABLE_MODE_MEMORY = 0,
  SORAM_TABLE_MODE_OUTSOURCED = 1,
} SoramTableMode;

/**
 * Opaque handle: one simulated server plus one ORAM instance on it.
 */
typedef struct SoramInstance SoramInstance;

/**
 * Instance configuration. Zero means "use the default/derived value" for
 * `z`, `height`, `leaf_cap` and `f`; explicit `height` and `leaf_cap` must
 * be given together and then take precedence over the `f`/`g`/`eps`
 * derivation.
 */
typedef struct {
  SoramConstruction construction;
  uint64_t n_blocks;
  uint32_t block_bits;
  uint32_t z;
  uint32_t height;
  uint32_t leaf_cap;
  uint64_t f;
  double g;
  double eps;
  SoramTableMode table_mode;
  uint64_t seed;
} SoramConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent error on this thread. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *soram_last_error_message(void);

/**
 * Creates an instance. On success `*out` owns the handle; free it with
 * `soram_instance_destroy`.
 *
 * # Safety
 * `cfg` and `out` must be valid pointers.
 */
SoramStatus soram_instance_create(const SoramConfig *cfg, SoramInstance **out);

/**
 * # Safety
 * `inst` must come from `soram_instance_create` and not be freed twice.
 */
void soram_instance_destroy(SoramInstance *inst);

/**
 * Loads every block with a default payload stamping its address.
 *
 * # Safety
 * `inst` must be a valid handle.
 */
SoramStatus soram_instance_init_default(SoramInstance *inst);

/**
 * Loads all blocks from `payloads`: `n_blocks * block_bytes` contiguous
 * bytes, one block after another.
 *
 * # Safety
 * `inst` must be a valid handle; `payloads` must point to `len` bytes.
 */
SoramStatus soram_instance_init_from_bytes(SoramInstance *inst,
                                           const uint8_t *payloads,
                                           size_t len);

/**
 * One logical access. For writes, `val` supplies the new block; the
 * pre-update value is copied to `out` when it is non-null. Both buffers are
 * `ceil(block_bits/8)` bytes.
 *
 * # Safety
 * `inst` must be a valid initialized handle; buffers must match the block
 * size when non-null.
 */
SoramStatus soram_access(SoramInstance *inst,
                         uint64_t addr,
                         int32_t is_write,
                         const uint8_t *val,
                         uint8_t *out);

/**
 * Current stash occupancy in blocks.
 *
 * # Safety
 * `inst` and `out` must be valid pointers.
 */
SoramStatus soram_stash_size(const SoramInstance *inst, uint64_t *out);

/**
 * Physical transfer counters since initialization: total reads, total
 * writes and the data-block transfers against the top tree (the bandwidth
 * figure). Null outputs are skipped.
 *
 * # Safety
 * `inst` must be a valid handle.
 */
SoramStatus soram_counters(const SoramInstance *inst,
                           uint64_t *reads,
                           uint64_t *writes,
                           uint64_t *top_data);

/**
 * Data-block transfers per logical access for the handle's parameters
 * (closed form, constant per configuration).
 *
 * # Safety
 * `inst` and `out` must be valid pointers.
 */
SoramStatus soram_bandwidth_blocks(const SoramInstance *inst, uint64_t *out);

/**
 * Space report for the handle's parameters as a JSON document.
 * `mode` 0 reports the comparison-table figure (data tree only), 1 the
 * full accounting with metadata and outsourced tables. On
 * `SORAM_ERR_BUFFER_TOO_SMALL`, `*written` holds the required size.
 *
 * # Safety
 * Pointers must be valid; `buf` must hold `buf_len` bytes when non-null.
 */
SoramStatus soram_space_report_json(const SoramInstance *inst,
                                    int32_t mode,
                                    char *buf,
                                    size_t buf_len,
                                    size_t *written);

/**
 * The closed-form comparison-table reproduction as a JSON array.
 *
 * # Safety
 * `buf` must hold `buf_len` bytes when non-null; `written` may be null.
 */
SoramStatus soram_table2_json(uint64_t n_blocks,
                              uint32_t block_bits,
                              char *buf,
                              size_t buf_len,
                              size_t *written);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SORAM_H */
