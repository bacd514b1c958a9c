#ifndef WALL_H
#define WALL_H

/* Generated by cbindgen. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum WallStatus {
  WALL_STATUS_OK = 0,
  WALL_STATUS_NULL_POINTER = 1,
  WALL_STATUS_INVALID_UTF8 = 2,
  WALL_STATUS_PARSE_ERROR = 3,
  WALL_STATUS_INVALID_ARGUMENT = 4,
  WALL_STATUS_CONSISTENCY_ERROR = 5,
  /**
   * Result undefined, e.g. a rate over zero issues.
   */
  WALL_STATUS_UNDEFINED = 6,
  WALL_STATUS_INTERNAL = 99,
} WallStatus;

typedef enum WallDiffFormat {
  WALL_DIFF_FORMAT_TERMINAL = 0,
  WALL_DIFF_FORMAT_TERMINAL_COLOR = 1,
  WALL_DIFF_FORMAT_HTML = 2,
  WALL_DIFF_FORMAT_STRUCTURED = 3,
} WallDiffFormat;

typedef enum WallIssueType {
  WALL_ISSUE_TYPE_BUG = 0,
  WALL_ISSUE_TYPE_VULNERABILITY = 1,
  WALL_ISSUE_TYPE_CODE_SMELL = 2,
} WallIssueType;

typedef enum WallReportFormat {
  WALL_REPORT_FORMAT_TEXT = 0,
  WALL_REPORT_FORMAT_STRUCTURED = 1,
  WALL_REPORT_FORMAT_HTML = 2,
} WallReportFormat;

typedef struct WallDiff WallDiff;

typedef struct WallIssues WallIssues;

typedef struct WallLedger WallLedger;

typedef struct WallDiffMetrics {
  size_t matched;
  size_t removed;
  size_t added;
  double precision;
  double recall;
  double f1;
} WallDiffMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error on this thread, or NULL. Free with [`wall_string_free`].
 */
char *wall_last_error(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void wall_string_free(char *s);

/**
 * Static version string; do not free.
 */
const char *wall_version(void);

/**
 * Line diff of two texts.
 *
 * # Safety
 * `original` and `revised` must be valid NUL-terminated strings; `out` must
 * be writable.
 */
enum WallStatus wall_diff_new(const char *original,
                              const char *revised,
                              bool ignore_trailing_whitespace,
                              struct WallDiff **out);

/**
 * # Safety
 * `diff` must be NULL or a live handle from [`wall_diff_new`].
 */
void wall_diff_free(struct WallDiff *diff);

/**
 * # Safety
 * `diff` must be a live handle; `out` must be writable.
 */
enum WallStatus wall_diff_metrics(const struct WallDiff *diff, struct WallDiffMetrics *out);

/**
 * Number of diff rows.
 *
 * # Safety
 * `diff` must be NULL or a live handle.
 */
size_t wall_diff_len(const struct WallDiff *diff);

/**
 * # Safety
 * `diff` must be a live handle; `out` must be writable.
 */
enum WallStatus wall_diff_render(const struct WallDiff *diff,
                                 enum WallDiffFormat format,
                                 char **out);

/**
 * Parses issue CSV text. On a bad row the error message names the row.
 *
 * # Safety
 * `csv` must be a valid NUL-terminated string; `out` must be writable.
 */
enum WallStatus wall_issues_parse(const char *csv, struct WallIssues **out);

/**
 * # Safety
 * `issues` must be NULL or a live handle.
 */
void wall_issues_free(struct WallIssues *issues);

/**
 * # Safety
 * `issues` must be NULL or a live handle.
 */
size_t wall_issues_len(const struct WallIssues *issues);

/**
 * # Safety
 * `issues` must be NULL or a live handle.
 */
size_t wall_issues_count(const struct WallIssues *issues, enum WallIssueType issue_type);

/**
 * Serializes back to CSV.
 *
 * # Safety
 * `issues` must be a live handle; `out` must be writable.
 */
enum WallStatus wall_issues_to_csv(const struct WallIssues *issues, char **out);

/**
 * Success rate in percent, truncated to one decimal.
 * Returns `WALL_STATUS_UNDEFINED` when `total` is zero.
 *
 * # Safety
 * `out_percent` must be writable.
 */
enum WallStatus wall_success_rate(uint64_t resolved, uint64_t total, double *out_percent);

/**
 * Cost of one call in USD as a decimal string rounded to four places.
 * Prices are decimal strings per 1,000 tokens.
 *
 * # Safety
 * Price pointers must be valid NUL-terminated strings; `out` must be writable.
 */
enum WallStatus wall_compute_cost(uint64_t prompt_tokens,
                                  uint64_t completion_tokens,
                                  const char *input_price_per_1k,
                                  const char *output_price_per_1k,
                                  char **out);

/**
 * Parses and validates a ledger CSV.
 *
 * # Safety
 * `csv` must be a valid NUL-terminated string; `out` must be writable.
 */
enum WallStatus wall_ledger_parse(const char *csv, struct WallLedger **out);

/**
 * # Safety
 * `ledger` must be NULL or a live handle.
 */
void wall_ledger_free(struct WallLedger *ledger);

/**
 * # Safety
 * `ledger` must be a live handle; `out` must be writable.
 */
enum WallStatus wall_ledger_report(const struct WallLedger *ledger,
                                   enum WallReportFormat format,
                                   char **out);

/**
 * Hybrid savings over advanced-only, in percent rounded to one decimal.
 *
 * # Safety
 * `ledger` must be a live handle; `out_percent` must be writable.
 */
enum WallStatus wall_ledger_savings(const struct WallLedger *ledger, double *out_percent);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WALL_H */
