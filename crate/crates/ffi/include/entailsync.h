/* SPDX-License-Identifier: Apache-2.0 */

#ifndef ENTAILSYNC_H
#define ENTAILSYNC_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum {
  ES_STATUS_OK = 0,
  ES_STATUS_NULL_ARGUMENT = 1,
  ES_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed JSON, ids or scenario.
   */
  ES_STATUS_PARSE = 3,
  /**
   * A plan or action was refused; nothing changed.
   */
  ES_STATUS_REJECTED = 4,
  /**
   * No pending conflict matches the request.
   */
  ES_STATUS_NO_CONFLICT = 5,
  /**
   * Unknown replica, operation or register.
   */
  ES_STATUS_NOT_FOUND = 6,
  /**
   * The scenario has no events left.
   */
  ES_STATUS_FINISHED = 7,
  /**
   * Any other engine error.
   */
  ES_STATUS_FAILED = 8,
  /**
   * A panic was caught at the boundary.
   */
  ES_STATUS_PANICKED = 9,
} EsStatus;

/**
 * A standalone replica.
 */
typedef struct EsReplica EsReplica;

/**
 * A scenario session.
 */
typedef struct EsSession EsSession;

/**
 * Message for the last failed call on this thread, or null.
 *
 * The pointer stays valid until the next entailsync call on this thread.
 */
const char *es_last_error(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be null or a pointer obtained from an `out` parameter of this
 * library that has not been freed yet.
 */
void es_string_free(char *s);

/**
 * Loads a scenario from JSON text.
 *
 * `seed` overrides the scenario seed when `use_seed` is true. With
 * `interactive`, conflicts wait for [`es_session_submit_plan`].
 *
 * # Safety
 * `scenario_json` must be a valid C string and `out` a valid pointer.
 */
EsStatus es_session_new(const char *scenario_json,
                        uint64_t seed,
                        bool use_seed,
                        bool interactive,
                        EsSession **out);

/**
 * # Safety
 * `s` must be null or a handle from [`es_session_new`] not freed yet.
 */
void es_session_free(EsSession *s);

/**
 * Executes the next event and writes its outcome as JSON.
 * Returns `Finished` when no events are left.
 *
 * # Safety
 * `s` must be a live handle and `out` a valid pointer.
 */
EsStatus es_session_step(EsSession *s, char **out);

/**
 * Executes every remaining event.
 *
 * # Safety
 * `s` must be a live handle.
 */
EsStatus es_session_run(EsSession *s);

/**
 * Writes the convergence report as JSON.
 *
 * # Safety
 * `s` must be a live handle and `out` a valid pointer.
 */
EsStatus es_session_report(EsSession *s, char **out);

/**
 * Writes the pending conflict groups of every replica as JSON.
 *
 * # Safety
 * `s` must be a live handle and `out` a valid pointer.
 */
EsStatus es_session_conflicts(EsSession *s, char **out);

/**
 * Applies a merge plan (`trigger`, `keep`, `cancel`, `merged`) and writes
 * the resulting resolutions as JSON. `replica` may be null, in which case
 * the replica holding the trigger is used.
 *
 * # Safety
 * `s` must be a live handle, `plan_json` a valid C string, `replica` null
 * or a valid C string, and `out` a valid pointer.
 */
EsStatus es_session_submit_plan(EsSession *s,
                                const char *replica,
                                const char *plan_json,
                                char **out);

/**
 * Writes one replica's graph in DOT syntax.
 *
 * # Safety
 * `s` must be a live handle, `replica` a valid C string and `out` a valid
 * pointer.
 */
EsStatus es_session_dot(EsSession *s, const char *replica, char **out);

/**
 * Creates a replica named `name` over registers declared as in scenarios,
 * e.g. `[{"kind": "arith"}, {"kind": "lww", "policy": "strict"}]`.
 *
 * # Safety
 * `name` and `registers_json` must be valid C strings and `out` a valid
 * pointer.
 */
EsStatus es_replica_new(const char *name, const char *registers_json, EsReplica **out);

/**
 * # Safety
 * `r` must be null or a handle from [`es_replica_new`] not freed yet.
 */
void es_replica_free(EsReplica *r);

/**
 * Issues a local operation from a JSON array of actions and writes its id
 * (for example `a:3`).
 *
 * # Safety
 * `r` must be a live handle, `actions_json` a valid C string and `out` a
 * valid pointer.
 */
EsStatus es_replica_issue(EsReplica *r, const char *actions_json, char **out);

/**
 * Writes a snapshot of the replica's graph in wire JSON, ready to be
 * passed to another replica's [`es_replica_sync`].
 *
 * # Safety
 * `r` must be a live handle and `out` a valid pointer.
 */
EsStatus es_replica_publish(EsReplica *r, char **out);

/**
 * Integrates a published graph. `reconciler` is `replay-all`, `lww-auto`
 * or `manual`; null means `replay-all`. Writes the sync report as JSON.
 *
 * # Safety
 * `r` must be a live handle, `remote_json` a valid C string, `reconciler`
 * null or a valid C string, and `out` a valid pointer.
 */
EsStatus es_replica_sync(EsReplica *r, const char *remote_json, const char *reconciler, char **out);

/**
 * Writes the register values as a JSON object keyed by register name.
 *
 * # Safety
 * `r` must be a live handle and `out` a valid pointer.
 */
EsStatus es_replica_vals(EsReplica *r, char **out);

/**
 * Writes this replica's pending conflict groups as JSON.
 *
 * # Safety
 * `r` must be a live handle and `out` a valid pointer.
 */
EsStatus es_replica_conflicts(EsReplica *r, char **out);

/**
 * Resolves the pending conflict named by the plan's `trigger` and writes
 * the resolutions as JSON.
 *
 * # Safety
 * `r` must be a live handle, `plan_json` a valid C string and `out` a
 * valid pointer.
 */
EsStatus es_replica_resolve(EsReplica *r, const char *plan_json, char **out);

#endif  /* ENTAILSYNC_H */
