#ifndef LATCHSIM_H
#define LATCHSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LatchsimFreeParam {
  LATCHSIM_FREE_PARAM_R1 = 0,
  LATCHSIM_FREE_PARAM_C1 = 1,
  LATCHSIM_FREE_PARAM_R2 = 2,
  LATCHSIM_FREE_PARAM_C2 = 3,
} LatchsimFreeParam;

// Result codes. The non-zero values match the command-line exit codes.
typedef enum LatchsimStatus {
  LATCHSIM_STATUS_OK = 0,
  // Null pointer, bad string, unknown name or invalid option.
  LATCHSIM_STATUS_INVALID_ARGUMENT = 1,
  LATCHSIM_STATUS_PARSE = 2,
  LATCHSIM_STATUS_CONVERGENCE = 3,
  LATCHSIM_STATUS_DOMAIN = 4,
  LATCHSIM_STATUS_IO = 5,
  // A Rust panic was caught at the boundary.
  LATCHSIM_STATUS_PANIC = 6,
} LatchsimStatus;

// Parsed and elaborated netlist.
typedef struct LatchsimCircuit LatchsimCircuit;

// Simulation result: a time column plus one column per signal.
typedef struct LatchsimWaveforms LatchsimWaveforms;

typedef struct LatchsimOffTimeParams {
  double r1;
  double c1;
  // Peak voltage delivered to C1.
  double v_o;
  double vt_q3;
  double r2;
  double c2;
  double vdd;
  double vref2;
} LatchsimOffTimeParams;

typedef struct LatchsimOffTime {
  double t1;
  double t2;
  double total;
} LatchsimOffTime;

typedef struct LatchsimMosfet {
  double k_gain;
  double vt0;
  double vt_tempco;
  double lambda;
} LatchsimMosfet;

typedef struct LatchsimSafetySpec {
  double i_op;
  double i_max;
  double t_min;
  double t_max;
} LatchsimSafetySpec;

typedef struct LatchsimVgsWindow {
  double lo;
  double hi;
  bool feasible;
  double vt_max;
  double vt_min;
  // NaN when infeasible.
  double guarded_lo;
  double guarded_hi;
  double shortfall;
  double i_max_needed;
  double vt_spread_allowed;
} LatchsimVgsWindow;

typedef struct LatchsimSquareLawFit {
  double k_gain;
  double vt0;
  double rms_residual;
} LatchsimSquareLawFit;

typedef struct LatchsimSelMeasurements {
  double fire_time;
  double i_op;
  double i_peak;
  double i_limited;
  double t_detect;
  double t_power_off;
  double t_off;
  double t_restart;
  double v_o;
  double v_c2_min;
  double i_final;
  double predicted_limit;
  bool choreography_in_order;
} LatchsimSelMeasurements;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *latchsim_last_error(void);

// Library version as a static string.
const char *latchsim_version(void);

// Parses and elaborates netlist text. `keys`/`values` hold `n_params`
// `.param` overrides and may be null when `n_params` is 0.
//
// # Safety
// `netlist` must be a NUL-terminated string; `keys` and `values` must
// point to `n_params` elements; `out` must be writable.
enum LatchsimStatus latchsim_circuit_parse(const char *netlist,
                                           const char *const *keys,
                                           const double *values,
                                           size_t n_params,
                                           struct LatchsimCircuit **out_circuit);

// # Safety
// `circuit` must come from [`latchsim_circuit_parse`] or be null.
void latchsim_circuit_free(struct LatchsimCircuit *circuit);

// Non-ground node count, 0 for null.
//
// # Safety
// `circuit` must be a live handle or null.
size_t latchsim_circuit_node_count(const struct LatchsimCircuit *circuit);

// Runs a transient to `t_stop` seconds. `t_stop` 0 computes the DC
// operating point only; a negative `t_stop` uses the netlist `.tran`.
// `h_max` ≤ 0 keeps the netlist or default step ceiling.
//
// # Safety
// `circuit` must be a live handle; `out_waveforms` must be writable.
enum LatchsimStatus latchsim_simulate(const struct LatchsimCircuit *circuit,
                                      double t_stop,
                                      double h_max,
                                      struct LatchsimWaveforms **out_waveforms);

// # Safety
// `waveforms` must come from this library or be null.
void latchsim_waveforms_free(struct LatchsimWaveforms *waveforms);

// Number of time points, 0 for null.
//
// # Safety
// `waveforms` must be a live handle or null.
size_t latchsim_waveforms_len(const struct LatchsimWaveforms *waveforms);

// # Safety
// `waveforms` must be a live handle or null.
size_t latchsim_waveforms_signal_count(const struct LatchsimWaveforms *waveforms);

// Name of signal `index`, owned by the handle; null if out of range.
//
// # Safety
// `waveforms` must be a live handle or null.
const char *latchsim_waveforms_signal_name(const struct LatchsimWaveforms *waveforms, size_t index);

// Time column of `latchsim_waveforms_len` values, owned by the handle.
//
// # Safety
// `waveforms` must be a live handle or null.
const double *latchsim_waveforms_time(const struct LatchsimWaveforms *waveforms);

// Column of signal `name` (e.g. `v(out)`, `i(v1)`), owned by the handle.
//
// # Safety
// `waveforms` must be a live handle; `name` NUL-terminated; `out_data`
// writable.
enum LatchsimStatus latchsim_waveforms_signal(const struct LatchsimWaveforms *waveforms,
                                              const char *name,
                                              const double **out_data);

// Writes the waveforms as CSV with `digits` significant digits (1..=17).
//
// # Safety
// `waveforms` must be a live handle; `path` NUL-terminated.
enum LatchsimStatus latchsim_waveforms_write_csv(const struct LatchsimWaveforms *waveforms,
                                                 const char *path,
                                                 uint32_t digits);

// Off-time of the power-cycling timer.
//
// # Safety
// `params` readable, `out_off_time` writable.
enum LatchsimStatus latchsim_off_time(const struct LatchsimOffTimeParams *params,
                                      struct LatchsimOffTime *out_off_time);

// Value of the `free` timer component that yields `target` seconds; the
// matching field of `params` is ignored.
//
// # Safety
// `params` readable, `out_value` writable.
enum LatchsimStatus latchsim_solve_off_time(double target,
                                            const struct LatchsimOffTimeParams *params,
                                            enum LatchsimFreeParam free,
                                            double *out_value);

// Gate-drive window, shrunk by `guard_fraction` of its width for the
// guarded bounds.
//
// # Safety
// `model` and `spec` readable, `out_window` writable.
enum LatchsimStatus latchsim_vgs_window(const struct LatchsimMosfet *model,
                                        const struct LatchsimSafetySpec *spec,
                                        double guard_fraction,
                                        struct LatchsimVgsWindow *out_window);

// Least-squares square-law fit to `n` (vgs, current) pairs.
//
// # Safety
// `vgs` and `current` must hold `n` values; `out_fit` writable.
enum LatchsimStatus latchsim_fit_square_law(const double *vgs,
                                            const double *current,
                                            size_t n,
                                            struct LatchsimSquareLawFit *out_fit);

// Runs one bench scenario. `preset` is `vgs5`, `vgs4`, `vgs3`, `vgs2p5`
// or `unprotected`; `keys`/`values` override bench parameters by name;
// `fire_times` lists SEL events. `out_waveforms` may be null when the
// waveforms are not wanted.
//
// # Safety
// Strings NUL-terminated; arrays sized as given; `out_measurements`
// writable.
enum LatchsimStatus latchsim_sel_run(const char *preset,
                                     const char *const *keys,
                                     const double *values,
                                     size_t n_params,
                                     const double *fire_times,
                                     size_t n_fires,
                                     double t_stop,
                                     struct LatchsimSelMeasurements *out_measurements,
                                     struct LatchsimWaveforms **out_waveforms);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LATCHSIM_H */
