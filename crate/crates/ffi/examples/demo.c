/* Minimal C client: create a succinct instance, write and read one block,
 * print the bandwidth figure and the comparison-table JSON.
 *
 * Build (from the workspace root, after `cargo build --release -p soram-ffi`):
 *   cc crates/ffi/examples/demo.c -Icrates/ffi/include \
 *      -Ltarget/release -lsoram_ffi -lm -o demo
 */
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "soram.h"

static void check(SoramStatus s, const char *what) {
    if (s != SORAM_STATUS_OK) {
        fprintf(stderr, "%s failed (%d): %s\n", what, (int)s, soram_last_error_message());
        exit(1);
    }
}

int main(void) {
    SoramConfig cfg = {0};
    cfg.construction = SORAM_CONSTRUCTION_SUCCINCT_TWO;
    cfg.n_blocks = 1 << 12;
    cfg.block_bits = 1 << 10;
    cfg.f = 16;
    cfg.eps = 1.0;
    cfg.table_mode = SORAM_TABLE_MODE_MEMORY;
    cfg.seed = 42;

    SoramInstance *inst = NULL;
    check(soram_instance_create(&cfg, &inst), "create");
    check(soram_instance_init_default(inst), "init");

    size_t block_bytes = cfg.block_bits / 8;
    unsigned char *val = malloc(block_bytes);
    unsigned char *out = malloc(block_bytes);
    memset(val, 0x5a, block_bytes);

    check(soram_access(inst, 7, 1, val, out), "write");
    check(soram_access(inst, 7, 0, NULL, out), "read");
    if (memcmp(val, out, block_bytes) != 0) {
        fprintf(stderr, "read back a different block\n");
        return 1;
    }

    uint64_t bw = 0, stash = 0;
    check(soram_bandwidth_blocks(inst, &bw), "bandwidth");
    check(soram_stash_size(inst, &stash), "stash");
    printf("round trip ok; bandwidth %llu data blocks/access, stash %llu\n",
           (unsigned long long)bw, (unsigned long long)stash);

    size_t needed = 0;
    soram_table2_json(1ULL << 20, 1 << 10, NULL, 0, &needed);
    char *json = malloc(needed);
    check(soram_table2_json(1ULL << 20, 1 << 10, json, needed, &needed), "table2");
    printf("table2[0..60]: %.60s...\n", json);

    free(json);
    free(val);
    free(out);
    soram_instance_destroy(inst);
    return 0;
}
