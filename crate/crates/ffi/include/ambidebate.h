#ifndef AMBIDEBATE_H
#define AMBIDEBATE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AmbidebateStatus {
  AMBIDEBATE_STATUS_OK = 0,
  AMBIDEBATE_STATUS_NULL_ARGUMENT = 1,
  AMBIDEBATE_STATUS_INVALID_UTF8 = 2,
  AMBIDEBATE_STATUS_DATASET = 3,
  AMBIDEBATE_STATUS_CONFIG = 4,
  AMBIDEBATE_STATUS_ENGINE = 5,
  AMBIDEBATE_STATUS_REPORT = 6,
  AMBIDEBATE_STATUS_IO = 7,
  AMBIDEBATE_STATUS_PANIC = 8,
} AmbidebateStatus;

/**
 * Opaque dataset handle.
 */
typedef struct AmbidebateDataset AmbidebateDataset;

/**
 * Opaque experiment runner built from a run config file.
 */
typedef struct AmbidebateRunner AmbidebateRunner;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The caller frees
 * the result with `ambidebate_string_free`.
 */
char *ambidebate_last_error(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library and not yet freed.
 */
void ambidebate_string_free(char *s);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ambidebate_version(void);

/**
 * Generates a dataset with the bundled vocabulary and tabletop scenario.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum AmbidebateStatus ambidebate_dataset_generate(uint64_t seed,
                                                  size_t numerical,
                                                  size_t attribute,
                                                  size_t spatial,
                                                  struct AmbidebateDataset **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` as for `ambidebate_dataset_generate`.
 */
enum AmbidebateStatus ambidebate_dataset_load(const char *path, struct AmbidebateDataset **out);

/**
 * # Safety
 * `dataset` must be a live handle and `path` a NUL-terminated string.
 */
enum AmbidebateStatus ambidebate_dataset_save(const struct AmbidebateDataset *dataset,
                                              const char *path);

/**
 * Number of entries, or 0 for a NULL handle.
 *
 * # Safety
 * `dataset` must be NULL or a live handle.
 */
size_t ambidebate_dataset_len(const struct AmbidebateDataset *dataset);

/**
 * Serializes the dataset to JSON into `*out`.
 *
 * # Safety
 * `dataset` must be a live handle and `out` writable.
 */
enum AmbidebateStatus ambidebate_dataset_to_json(const struct AmbidebateDataset *dataset,
                                                 char **out);

/**
 * # Safety
 * `dataset` must be NULL or a handle not yet freed.
 */
void ambidebate_dataset_free(struct AmbidebateDataset *dataset);

/**
 * Builds a runner from a TOML run config. Backends are instantiated but not
 * probed.
 *
 * # Safety
 * `config_path` must be a NUL-terminated string and `out` writable.
 */
enum AmbidebateStatus ambidebate_runner_new(const char *config_path, struct AmbidebateRunner **out);

/**
 * Runs every baseline and debate over `dataset`, writing the JSONL record
 * files into `out_dir`. A run summary in JSON goes to `*summary_json` when
 * that pointer is not NULL.
 *
 * # Safety
 * Handles must be live, `out_dir` a NUL-terminated string, and
 * `summary_json` NULL or writable.
 */
enum AmbidebateStatus ambidebate_runner_run(const struct AmbidebateRunner *runner,
                                            const struct AmbidebateDataset *dataset,
                                            const char *out_dir,
                                            char **summary_json);

/**
 * # Safety
 * `runner` must be NULL or a handle not yet freed.
 */
void ambidebate_runner_free(struct AmbidebateRunner *runner);

/**
 * Computes metrics for the records in `run_dir`, writes the report files
 * into `out_dir`, and stores the report JSON in `*report_json` when that
 * pointer is not NULL.
 *
 * # Safety
 * `dataset` must be a live handle, the paths NUL-terminated strings, and
 * `report_json` NULL or writable.
 */
enum AmbidebateStatus ambidebate_report(const struct AmbidebateDataset *dataset,
                                        const char *run_dir,
                                        const char *out_dir,
                                        bool strict,
                                        char **report_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AMBIDEBATE_H */
