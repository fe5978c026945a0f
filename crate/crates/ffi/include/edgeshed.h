#ifndef EDGESHED_H
#define EDGESHED_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EsStatus {
  ES_STATUS_OK = 0,
  ES_STATUS_NULL_POINTER = 1,
  ES_STATUS_INVALID_INPUT = 2,
  ES_STATUS_UNSUPPORTED = 3,
  ES_STATUS_NUMERICAL = 4,
  ES_STATUS_PARSE = 5,
  ES_STATUS_NO_BUNDLE = 6,
  ES_STATUS_OUT_OF_ORDER = 7,
  ES_STATUS_CONFIG = 8,
  ES_STATUS_IO = 9,
  // The requested value is not available yet.
  ES_STATUS_NOT_READY = 10,
  ES_STATUS_PANIC = 11,
} EsStatus;

// What the outlet should do with its switch after a call.
typedef enum EsAction {
  ES_ACTION_NONE = 0,
  ES_ACTION_SWITCH_OFF = 1,
  ES_ACTION_SWITCH_ON = 2,
} EsAction;

typedef enum EsPhase {
  ES_PHASE_IDLE = 0,
  ES_PHASE_EVENT_DETECTED = 1,
  ES_PHASE_ESTIMATING = 2,
  ES_PHASE_SHED_DECIDED = 3,
  ES_PHASE_OFF = 4,
} EsPhase;

// Opaque outlet agent.
typedef struct EsAgent EsAgent;

// Opaque scenario.
typedef struct EsScenario EsScenario;

// Opaque system model.
typedef struct EsSystem EsSystem;

// Physical parameters of the frequency-response model.
typedef struct EsSystemParams {
  double h;
  double d;
  double r;
  double km;
  double fh;
  double tr;
  double s_base_mva;
  double f_nominal_hz;
  double p_load_total_mw;
} EsSystemParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *es_version(void);

// Message of the last failed call on this thread; empty after a success.
// Valid until the next call into the library on the same thread.
const char *es_last_error_message(void);

// Builds a system model. Fails with `UNSUPPORTED` for an overdamped set.
//
// # Safety
// `params` must be readable and `out` writable.
enum EsStatus es_system_new(const struct EsSystemParams *params, struct EsSystem **out_system);

// Releases a system; null is ignored.
//
// # Safety
// `system` must be null or a handle from this library not yet freed.
void es_system_free(struct EsSystem *system);

// Frequency deviation (p.u.) at `t_s` after a step loss `delta_p_pu` at 0.
//
// # Safety
// `system` must be a live handle and `out_pu` writable.
enum EsStatus es_system_delta_f(const struct EsSystem *system,
                                double delta_p_pu,
                                double t_s,
                                double *out_pu);

// Rate of change of frequency (Hz/s) at `t_s` after a step loss at 0.
//
// # Safety
// `system` must be a live handle and `out_hz_per_s` writable.
enum EsStatus es_system_rocof(const struct EsSystem *system,
                              double delta_p_pu,
                              double t_s,
                              double *out_hz_per_s);

// Time of the frequency minimum after a step loss (s).
//
// # Safety
// `system` must be a live handle and `out_s` writable.
enum EsStatus es_system_t_nadir(const struct EsSystem *system, double *out_s);

// Loss (MW) whose frequency minimum is exactly `f_s_hz`.
//
// # Safety
// `system` must be a live handle and `out_mw` writable.
enum EsStatus es_system_threshold_loss_mw(const struct EsSystem *system,
                                          double f_s_hz,
                                          double *out_mw);

// Copies the parameters the system was built from.
//
// # Safety
// `system` must be a live handle and `out_params` writable.
enum EsStatus es_system_params(const struct EsSystem *system, struct EsSystemParams *out_params);

// The built-in IEEE 24-bus scenario.
//
// # Safety
// `out_scenario` must be writable.
enum EsStatus es_scenario_ieee24(struct EsScenario **out_scenario);

// Parses a scenario from NUL-terminated TOML text.
//
// # Safety
// `toml` must be a valid C string and `out_scenario` writable.
enum EsStatus es_scenario_from_toml(const char *toml, struct EsScenario **out_scenario);

// Releases a scenario; null is ignored.
//
// # Safety
// `scenario` must be null or a handle from this library not yet freed.
void es_scenario_free(struct EsScenario *scenario);

// System model of a scenario; free it separately.
//
// # Safety
// `scenario` must be a live handle and `out_system` writable.
enum EsStatus es_scenario_system(const struct EsScenario *scenario, struct EsSystem **out_system);

// Protection objective of a scenario (Hz).
//
// # Safety
// `scenario` must be a live handle and `out_hz` writable.
enum EsStatus es_scenario_f_s(const struct EsScenario *scenario, double *out_hz);

// Creates an agent holding the parameters of one load block.
//
// `noise_std_hz` sets the filter's measurement variance.
//
// # Safety
// `system` must be a live handle and `out_agent` writable.
enum EsStatus es_agent_new(const struct EsSystem *system,
                           uint32_t outlet_id,
                           double f_s_hz,
                           double accumulated_power_mw,
                           double switch_off_freq_hz,
                           double noise_std_hz,
                           struct EsAgent **out_agent);

// Releases an agent; null is ignored.
//
// # Safety
// `agent` must be null or a handle from this library not yet freed.
void es_agent_free(struct EsAgent *agent);

// Feeds one frequency sample; samples must arrive in time order.
//
// # Safety
// `agent` must be a live handle and `out_action` writable.
enum EsStatus es_agent_ingest(struct EsAgent *agent,
                              double t_s,
                              double f_hz,
                              enum EsAction *out_action);

// Applies a direct command from the control center (`switch_on` nonzero for on).
//
// # Safety
// `agent` must be a live handle and `out_action` writable.
enum EsStatus es_agent_command(struct EsAgent *agent,
                               double t_s,
                               int32_t switch_on,
                               enum EsAction *out_action);

// Current phase of the agent.
//
// # Safety
// `agent` must be a live handle and `out_phase` writable.
enum EsStatus es_agent_phase(const struct EsAgent *agent, enum EsPhase *out_phase);

// Latest loss estimate in MW: the filter's once finished, else the
// least-squares one. `NOT_READY` before either exists.
//
// # Safety
// `agent` must be a live handle and `out_mw` writable.
enum EsStatus es_agent_estimate_mw(const struct EsAgent *agent, double *out_mw);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EDGESHED_H */
