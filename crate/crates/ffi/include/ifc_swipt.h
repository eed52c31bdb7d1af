#ifndef IFC_SWIPT_H
#define IFC_SWIPT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Bytes needed for a channel digest: 64 hex digits and a terminating NUL.
 */
#define IFC_DIGEST_LEN 65

typedef enum IfcStatus {
  IFC_STATUS_OK = 0,
  IFC_STATUS_NULL_POINTER = 1,
  IFC_STATUS_INVALID_INPUT = 2,
  IFC_STATUS_RANK_DEFICIENT = 3,
  IFC_STATUS_SINGULAR = 4,
  IFC_STATUS_DEGENERATE_CHANNEL = 5,
  IFC_STATUS_INFEASIBLE = 6,
  IFC_STATUS_DUAL_INFEASIBLE = 7,
  IFC_STATUS_VALIDATION = 8,
  IFC_STATUS_PARSE = 9,
  IFC_STATUS_IO = 10,
  IFC_STATUS_SOLVER = 11,
  IFC_STATUS_BUFFER_TOO_SMALL = 12,
  IFC_STATUS_OUT_OF_RANGE = 13,
  IFC_STATUS_PANIC = 99,
} IfcStatus;

typedef enum IfcBranch {
  IFC_BRANCH_WF = 0,
  IFC_BRANCH_DUAL = 1,
  IFC_BRANCH_NO_TX = 2,
} IfcBranch;

typedef enum IfcMode {
  IFC_MODE_ID_ID = 0,
  IFC_MODE_EH_EH = 1,
  IFC_MODE_EH1_ID2 = 2,
  IFC_MODE_ID1_EH2 = 3,
} IfcMode;

/**
 * Transmit strategy for the first (energy-serving) transmitter. Passed as
 * `uint32_t` so that out-of-range values are rejected rather than undefined.
 */
typedef enum IfcStrategy {
  IFC_STRATEGY_MEB = 0,
  IFC_STRATEGY_MLB = 1,
  IFC_STRATEGY_SLER = 2,
  IFC_STRATEGY_SLNR = 3,
  IFC_STRATEGY_MEB_RANK2 = 4,
} IfcStrategy;

/**
 * Opaque swept boundary.
 */
typedef struct IfcBoundary IfcBoundary;

/**
 * Opaque channel realization.
 */
typedef struct IfcChannelSet IfcChannelSet;

/**
 * One rate-energy operating point. `lambda` and `mu` are NaN when the
 * branch has no multiplier.
 */
typedef struct IfcPoint {
  double e_bar;
  double rate_bits;
  double energy;
  double p1;
  double lambda;
  double mu;
  uint64_t iterations;
  enum IfcBranch branch;
  bool clamped;
} IfcPoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ifc_version(void);

/**
 * Static name of a status code.
 */
const char *ifc_status_name(enum IfcStatus status);

/**
 * Message of the last failure on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *ifc_last_error(void);

/**
 * Draws a seeded channel realization. `alpha` points to four coefficients
 * in row-major order: a11, a12, a21, a22.
 *
 * # Safety
 * `alpha` must point to four readable doubles and `out` must be writable.
 */
enum IfcStatus ifc_channel_draw(size_t m_t,
                                size_t m_r,
                                const double *alpha,
                                uint64_t seed,
                                struct IfcChannelSet **out);

/**
 * Builds a channel set from explicit matrices. `data` holds H11, H12, H21,
 * H22 in that order, each `m_r x m_t` row-major with interleaved real and
 * imaginary parts, so `len` must equal `8 * m_r * m_t`. The Frobenius
 * normalization against `alpha` is validated.
 *
 * # Safety
 * `data` must point to `len` readable doubles, `alpha` to four, and `out`
 * must be writable.
 */
enum IfcStatus ifc_channel_from_links(size_t m_t,
                                      size_t m_r,
                                      const double *data,
                                      size_t len,
                                      const double *alpha,
                                      struct IfcChannelSet **out);

/**
 * Loads a channel set from its JSON file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` must be writable.
 */
enum IfcStatus ifc_channel_load(const char *path, struct IfcChannelSet **out);

/**
 * Saves a channel set as JSON.
 *
 * # Safety
 * `cs` must be a live handle and `path` a NUL-terminated string.
 */
enum IfcStatus ifc_channel_save(const struct IfcChannelSet *cs, const char *path);

/**
 * Antenna counts of a channel set.
 *
 * # Safety
 * `cs` must be a live handle; `m_t` and `m_r` must be writable.
 */
enum IfcStatus ifc_channel_dims(const struct IfcChannelSet *cs, size_t *m_t, size_t *m_r);

/**
 * Writes the SHA-256 digest of the channel matrices as lowercase hex plus
 * NUL. `len` must be at least `IFC_DIGEST_LEN`.
 *
 * # Safety
 * `cs` must be a live handle and `buf` must have `len` writable bytes.
 */
enum IfcStatus ifc_channel_digest(const struct IfcChannelSet *cs, char *buf, size_t len);

/**
 * Releases a channel set. NULL is ignored.
 *
 * # Safety
 * `cs` must be NULL or a handle not yet freed.
 */
void ifc_channel_free(struct IfcChannelSet *cs);

/**
 * Largest energy the strategy can deliver to the first receiver at `power`.
 *
 * # Safety
 * `cs` must be a live handle and `out` writable.
 */
enum IfcStatus ifc_emax(const struct IfcChannelSet *cs,
                        uint32_t strategy,
                        double power,
                        double *out);

/**
 * Solves a single boundary point for the energy target `e_bar`.
 *
 * # Safety
 * `cs` must be a live handle and `out` writable.
 */
enum IfcStatus ifc_point(const struct IfcChannelSet *cs,
                         uint32_t strategy,
                         double power,
                         double e_bar,
                         struct IfcPoint *out);

/**
 * Sweeps `n` targets spaced uniformly on `[0, E_max]` of the strategy.
 *
 * # Safety
 * `cs` must be a live handle and `out` writable.
 */
enum IfcStatus ifc_sweep(const struct IfcChannelSet *cs,
                         uint32_t strategy,
                         double power,
                         size_t n,
                         struct IfcBoundary **out);

/**
 * Sweeps an explicit ascending grid of `n` targets.
 *
 * # Safety
 * `cs` must be a live handle, `grid` must point to `n` readable doubles and
 * `out` must be writable.
 */
enum IfcStatus ifc_sweep_grid(const struct IfcChannelSet *cs,
                              uint32_t strategy,
                              double power,
                              const double *grid,
                              size_t n,
                              struct IfcBoundary **out);

/**
 * Number of solved points in a boundary.
 *
 * # Safety
 * `b` must be NULL or a live handle.
 */
size_t ifc_boundary_len(const struct IfcBoundary *b);

/**
 * Number of grid targets the solver could not produce.
 *
 * # Safety
 * `b` must be NULL or a live handle.
 */
size_t ifc_boundary_gap_count(const struct IfcBoundary *b);

/**
 * Point `index` of a boundary, ascending in `e_bar`.
 *
 * # Safety
 * `b` must be a live handle and `out` writable.
 */
enum IfcStatus ifc_boundary_point(const struct IfcBoundary *b, size_t index, struct IfcPoint *out);

/**
 * Energy target of gap `index`.
 *
 * # Safety
 * `b` must be a live handle and `e_bar` writable.
 */
enum IfcStatus ifc_boundary_gap(const struct IfcBoundary *b, size_t index, double *e_bar);

/**
 * Trapezoidal area under the rate-energy curve, gaps counted as zero rate.
 *
 * # Safety
 * `b` must be a live handle and `out` writable.
 */
enum IfcStatus ifc_boundary_area(const struct IfcBoundary *b, double *out);

/**
 * Releases a boundary. NULL is ignored.
 *
 * # Safety
 * `b` must be NULL or a handle not yet freed.
 */
void ifc_boundary_free(struct IfcBoundary *b);

/**
 * Chooses which receiver harvests for the energy target `e_bar`.
 *
 * # Safety
 * `cs` must be a live handle and `out` writable.
 */
enum IfcStatus ifc_select_mode(const struct IfcChannelSet *cs,
                               double e_bar,
                               double power,
                               enum IfcMode *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IFC_SWIPT_H */
