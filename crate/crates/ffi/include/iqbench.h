#ifndef IQBENCH_H
#define IQBENCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of a fallible call.
typedef enum IqStatus {
  IQ_STATUS_OK = 0,
  IQ_STATUS_NULL_POINTER = 1,
  IQ_STATUS_INVALID_ARGUMENT = 2,
  IQ_STATUS_IO = 3,
  IQ_STATUS_RUNTIME = 4,
  IQ_STATUS_PANIC = 5,
} IqStatus;

// The result of one IQ estimate.
typedef struct IqReport IqReport;

// A test-world suite.
typedef struct IqSuite IqSuite;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, a static NUL-terminated string.
const char *iq_version(void);

// Message of the last failed call on this thread, or null. Valid until the
// next call on this thread.
const char *iq_last_error(void);

// Generates a suite with the default generator parameters. A paired suite
// holds `count / 2` machines and their Win/Loss swaps; `count` must be even.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum IqStatus iq_suite_generate(size_t n_states,
                                size_t count,
                                uint64_t master_seed,
                                bool paired,
                                struct IqSuite **out);

// Reads a `suite/1` file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` as for [`iq_suite_generate`].
enum IqStatus iq_suite_read(const char *path, struct IqSuite **out);

// Writes a suite in `suite/1` form.
//
// # Safety
// `suite` must be a live handle; `path` a NUL-terminated string.
enum IqStatus iq_suite_write(const struct IqSuite *suite, const char *path);

// Number of machines; 0 for a null handle.
//
// # Safety
// `suite` must be null or a live handle.
size_t iq_suite_len(const struct IqSuite *suite);

// # Safety
// `suite` must be null or a handle not yet freed.
void iq_suite_free(struct IqSuite *suite);

// Estimates the IQ of the agent described by `agent_spec` (e.g. `random`,
// `freq:k=2`) on `suite`.
//
// # Safety
// `suite` must be a live handle, `agent_spec` a NUL-terminated string and
// `out` valid for one handle.
enum IqStatus iq_estimate(const struct IqSuite *suite,
                          const char *agent_spec,
                          uint32_t games,
                          uint32_t max_steps_per_game,
                          uint64_t master_seed,
                          struct IqReport **out);

// Mean Success over the suite; NaN for a null handle.
//
// # Safety
// `report` must be null or a live handle.
double iq_report_estimate(const struct IqReport *report);

// Standard error of the estimate; NaN for a null handle.
//
// # Safety
// `report` must be null or a live handle.
double iq_report_stderr(const struct IqReport *report);

// 95% confidence interval, clamped to [0, 1].
//
// # Safety
// `report` must be a live handle; `low` and `high` valid for one double.
enum IqStatus iq_report_ci95(const struct IqReport *report, double *low, double *high);

// Number of per-world results; 0 for a null handle.
//
// # Safety
// `report` must be null or a live handle.
size_t iq_report_world_count(const struct IqReport *report);

// Success of the life lived in world `index`.
//
// # Safety
// `report` must be a live handle; `success` valid for one double.
enum IqStatus iq_report_world_success(const struct IqReport *report, size_t index, double *success);

// True when the estimate is strictly above `threshold`.
//
// # Safety
// `report` must be null or a live handle.
bool iq_report_qualifies(const struct IqReport *report, double threshold);

// The report in `iqreport/1` CSV form; null on failure. Release with
// [`iq_string_free`].
//
// # Safety
// `report` must be null or a live handle.
char *iq_report_csv(const struct IqReport *report, double threshold);

// # Safety
// `s` must be null or a string returned by this library and not yet freed.
void iq_string_free(char *s);

// # Safety
// `report` must be null or a handle not yet freed.
void iq_report_free(struct IqReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IQBENCH_H */
