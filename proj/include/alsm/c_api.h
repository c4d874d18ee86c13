/* C interface to the alsm key-value engine.
 *
 * All handles are opaque. Functions returning int return an alsm_code; on
 * failure alsm_last_error() describes the cause for the calling thread.
 * Strings returned as char* are heap-allocated and must be released with
 * alsm_free(). Keys and values are arbitrary bytes with explicit lengths.
 */
#ifndef ALSM_C_API_H_
#define ALSM_C_API_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define ALSM_EXPORT __attribute__((visibility("default")))
#else
#define ALSM_EXPORT
#endif

typedef enum alsm_code {
  ALSM_OK = 0,
  ALSM_NOT_FOUND = 1,
  ALSM_CORRUPTION = 2,
  ALSM_IO_ERROR = 3,
  ALSM_INVALID_ARGUMENT = 4,
  ALSM_BUSY = 5,
  ALSM_CLOSED = 6,
  ALSM_TIMED_OUT = 7,
  ALSM_ABORTED = 8
} alsm_code;

typedef struct alsm_options alsm_options;
typedef struct alsm_db alsm_db;
typedef struct alsm_iterator alsm_iterator;

ALSM_EXPORT const char* alsm_code_name(int code);
ALSM_EXPORT const char* alsm_last_error(void);
ALSM_EXPORT void alsm_free(void* p);

/* Options: the same keys as the key=value config file. */
ALSM_EXPORT alsm_options* alsm_options_create(void);
ALSM_EXPORT void alsm_options_destroy(alsm_options* opts);
ALSM_EXPORT int alsm_options_set(alsm_options* opts, const char* key, const char* value);
ALSM_EXPORT int alsm_options_load_file(alsm_options* opts, const char* path);
ALSM_EXPORT char* alsm_options_to_text(const alsm_options* opts);

/* Opens (creating or recovering) the engine in `dir`. */
ALSM_EXPORT int alsm_open(const alsm_options* opts, const char* dir, alsm_db** out);
/* Clean shutdown; the handle is released even when an error is returned. */
ALSM_EXPORT int alsm_close(alsm_db* db);

ALSM_EXPORT int alsm_put(alsm_db* db, const char* key, size_t key_len, const char* value,
                         size_t value_len);
ALSM_EXPORT int alsm_delete(alsm_db* db, const char* key, size_t key_len);
/* On ALSM_OK *value holds a heap copy of the value (free with alsm_free). */
ALSM_EXPORT int alsm_get(alsm_db* db, const char* key, size_t key_len, char** value,
                         size_t* value_len);

ALSM_EXPORT int alsm_flush(alsm_db* db);
ALSM_EXPORT int alsm_wait_idle(alsm_db* db);
ALSM_EXPORT uint64_t alsm_last_seqno(alsm_db* db);

/* Retires ledger entries older than max_age_ms; *retired gets the count. */
ALSM_EXPORT int alsm_ledger_sweep(alsm_db* db, uint64_t max_age_ms, uint64_t* retired);
/* JSON array describing every open ledger entry. */
ALSM_EXPORT char* alsm_ledger_dump(alsm_db* db);
/* Reads the MANIFEST in `dir` without opening the engine and returns a JSON
 * array of the ledger entries it leaves open, or NULL on error. */
ALSM_EXPORT char* alsm_inspect_ledger(const char* dir);
/* JSON document with engine counters and timings. */
ALSM_EXPORT char* alsm_metrics(alsm_db* db);
/* Named property (see README), or NULL if the name is unknown. */
ALSM_EXPORT char* alsm_property(alsm_db* db, const char* name);
/* Newline-separated names of every crash point, in pipeline order. A point
 * is armed in a process by AISLSM_CRASH_POINT=name[:k] before alsm_open. */
ALSM_EXPORT char* alsm_crash_points(void);
/* Makes the next n fsync operations fail, for fault-injection tests. */
ALSM_EXPORT void alsm_inject_fsync_failures(alsm_db* db, uint32_t n);

/* Iteration over live keys as of creation time. */
ALSM_EXPORT alsm_iterator* alsm_iterator_create(alsm_db* db);
ALSM_EXPORT void alsm_iterator_destroy(alsm_iterator* it);
ALSM_EXPORT void alsm_iterator_seek_to_first(alsm_iterator* it);
ALSM_EXPORT void alsm_iterator_seek(alsm_iterator* it, const char* key, size_t key_len);
ALSM_EXPORT int alsm_iterator_valid(const alsm_iterator* it);
ALSM_EXPORT void alsm_iterator_next(alsm_iterator* it);
/* Pointers stay valid until the iterator moves. */
ALSM_EXPORT const char* alsm_iterator_key(const alsm_iterator* it, size_t* len);
ALSM_EXPORT const char* alsm_iterator_value(const alsm_iterator* it, size_t* len);
ALSM_EXPORT int alsm_iterator_status(const alsm_iterator* it);

#ifdef __cplusplus
}
#endif

#endif /* ALSM_C_API_H_ */
