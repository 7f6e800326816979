#ifndef HOPM_H
#define HOPM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HopmStatus {
  HOPM_STATUS_OK = 0,
  HOPM_STATUS_NULL_ARGUMENT = 1,
  HOPM_STATUS_INVALID_UTF8 = 2,
  HOPM_STATUS_PARSE = 3,
  HOPM_STATUS_VALIDATION = 4,
  HOPM_STATUS_NOT_FOUND = 5,
  HOPM_STATUS_WRONG_STATE = 6,
  HOPM_STATUS_REJECTED = 7,
  HOPM_STATUS_RUNTIME = 8,
  HOPM_STATUS_PANIC = 9,
} HopmStatus;

// A loaded, validated graph library.
typedef struct HopmLibrary HopmLibrary;

// One run, using the bundled stub activities.
typedef struct HopmRun HopmRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Loads a library from a JSON file or a directory of JSON files.
//
// # Safety
// `path` must be a valid C string; `out` must be writable.
enum HopmStatus hopm_library_load(const char *path, struct HopmLibrary **out);

// Loads a library from a JSON document held in memory.
//
// # Safety
// `json_text` must be a valid C string; `out` must be writable.
enum HopmStatus hopm_library_from_json(const char *json_text, struct HopmLibrary **out);

// The bundled conference-management example library.
//
// # Safety
// `out` must be writable.
enum HopmStatus hopm_library_example(struct HopmLibrary **out);

// # Safety
// `lib` must come from a `hopm_library_*` constructor and not be freed twice.
void hopm_library_free(struct HopmLibrary *lib);

// Type-checks the library. `out_json` receives a JSON array of diagnostics;
// the status is `VALIDATION` when it is nonempty.
//
// # Safety
// `lib` must be a live handle; `out_json` must be writable.
enum HopmStatus hopm_library_check(const struct HopmLibrary *lib, char **out_json);

// DOT rendering of one service graph.
//
// # Safety
// `lib` must be a live handle, `graph_id` a valid C string, `out_dot` writable.
enum HopmStatus hopm_graph_dot(const struct HopmLibrary *lib, const char *graph_id, char **out_dot);

// Starts a run of `graph_id`. `inputs_json` is a JSON array of input values;
// `fixtures_json` may be null for the bundled fixture data.
//
// # Safety
// String arguments must be valid C strings (`fixtures_json` may be null);
// `lib` must be live; `out` must be writable. The run keeps its own
// reference to the library.
enum HopmStatus hopm_run_start(const struct HopmLibrary *lib,
                               const char *graph_id,
                               const char *inputs_json,
                               const char *fixtures_json,
                               struct HopmRun **out);

// # Safety
// `run` must come from `hopm_run_start` and not be freed twice.
void hopm_run_free(struct HopmRun *run);

// Produces up to `max_events` events, stopping early at a pause or the end.
// `out_events` receives the new events as a JSON array.
//
// # Safety
// `run` must be live; `out_events` must be writable.
enum HopmStatus hopm_run_step(struct HopmRun *run, uint32_t max_events, char **out_events);

// The run status as JSON, e.g. `{"state":"paused","nodeId":...,"reason":{...}}`.
//
// # Safety
// `run` must be live; `out_json` must be writable.
enum HopmStatus hopm_run_status(struct HopmRun *run, char **out_json);

// Events with `seq > since` as a JSON array.
//
// # Safety
// `run` must be live; `out_json` must be writable.
enum HopmStatus hopm_run_trace(struct HopmRun *run, uint64_t since, char **out_json);

// Applies a steering command given as JSON. On acceptance `out_json`
// receives the resulting event; on rejection it receives the rejection
// (kind, reason, diagnostics) and the status is `WRONG_STATE` or `REJECTED`.
//
// # Safety
// `run` must be live, `command_json` a valid C string, `out_json` writable.
enum HopmStatus hopm_run_command(struct HopmRun *run, const char *command_json, char **out_json);

// Solves a synthesis spec and materializes the first solution against `lib`
// (or the bundled example library when `lib` is null). `out_json` receives
// `{"solution":..., "graph":...}`.
//
// # Safety
// `spec_json` and `graph_id` must be valid C strings; `lib` may be null;
// `out_json` must be writable.
enum HopmStatus hopm_synthesize(const struct HopmLibrary *lib,
                                const char *spec_json,
                                const char *graph_id,
                                char **out_json);

// Releases a string returned through an out-parameter.
//
// # Safety
// `s` must come from this library and not be freed twice; null is ignored.
void hopm_string_free(char *s);

// Message of the last failed call on this thread, or null after a success.
// The pointer stays valid until the next call on this thread.
const char *hopm_last_error(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HOPM_H */
