#ifndef CIE_H
#define CIE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum CieStatus {
  CIE_STATUS_OK = 0,
  // A required pointer argument was null.
  CIE_STATUS_NULL_POINTER = 1,
  // A string argument was not valid UTF-8.
  CIE_STATUS_INVALID_UTF8 = 2,
  // A file could not be read or written.
  CIE_STATUS_IO = 3,
  // Input text (JSON, JSONL, TSV) was malformed.
  CIE_STATUS_PARSE = 4,
  // A parameter was out of range.
  CIE_STATUS_CONFIG = 5,
  // Inputs were well formed but inconsistent (duplicate or missing ids,
  // unknown classes, empty data).
  CIE_STATUS_DATA = 6,
  // The library panicked; this is a bug.
  CIE_STATUS_PANIC = 7,
} CieStatus;

// Maps surface text to concept identifiers.
typedef struct CieLexicon CieLexicon;

// Reference Naive Bayes classifier.
typedef struct CieModel CieModel;

// Mined confident itemsets for every class.
typedef struct CieStore CieStore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failed call on this thread, or null if the
// last call succeeded. The pointer stays valid until the next call into the
// library on the same thread; do not free it.
const char *cie_last_error(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must be null or a pointer previously returned by this library and not
// yet freed.
void cie_string_free(char *s);

// Loads a three-column TSV lexicon.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum CieStatus cie_lexicon_load(const char *path, struct CieLexicon **out);

// # Safety
// `lexicon` must be null or a live handle from [`cie_lexicon_load`].
void cie_lexicon_free(struct CieLexicon *lexicon);

// Maps `text` to its concept identifiers, written to `out_json` as a sorted
// JSON array of strings.
//
// # Safety
// `lexicon` must be a live handle, `text` a NUL-terminated string, and
// `out_json` writable.
enum CieStatus cie_lexicon_map(const struct CieLexicon *lexicon, const char *text, char **out_json);

// Mines confident itemsets from a concept-instance JSONL file and a
// predictions JSONL file. `measure` is 0 for rule confidence, 1 for lift.
//
// # Safety
// Path arguments must be NUL-terminated strings; `out` must be writable.
enum CieStatus cie_store_mine(const char *instances_path,
                              const char *predictions_path,
                              double min_conf,
                              size_t max_k,
                              uint32_t measure,
                              size_t min_global_count,
                              struct CieStore **out);

// Loads a store written by [`cie_store_save`] or the command-line tool.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum CieStatus cie_store_load(const char *path, struct CieStore **out);

// # Safety
// `store` must be a live handle; `path` a NUL-terminated string.
enum CieStatus cie_store_save(const struct CieStore *store, const char *path);

// Total number of itemsets across all classes; 0 for a null handle.
//
// # Safety
// `store` must be null or a live handle.
size_t cie_store_len(const struct CieStore *store);

// # Safety
// `store` must be null or a live handle not yet freed.
void cie_store_free(struct CieStore *store);

// Explains one instance. `concepts_json` is a JSON array of concept ids; the
// explanation (matched itemsets, class scores, assigned label) is written to
// `out_json` as a JSON object.
//
// # Safety
// `store` must be a live handle, the string arguments NUL-terminated, and
// `out_json` writable.
enum CieStatus cie_explain(const struct CieStore *store,
                           const char *instance_id,
                           const char *concepts_json,
                           char **out_json);

// Loads a reference classifier written by the command-line tool.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum CieStatus cie_model_load(const char *path, struct CieModel **out);

// Predicts the label of a concept set given as a JSON array; the label is
// written to `out_label`.
//
// # Safety
// `model` must be a live handle, `concepts_json` NUL-terminated, and
// `out_label` writable.
enum CieStatus cie_model_predict(const struct CieModel *model,
                                 const char *concepts_json,
                                 char **out_label);

// # Safety
// `model` must be null or a live handle not yet freed.
void cie_model_free(struct CieModel *model);

// Fidelity between an explanations JSONL file and a predictions JSONL file
// covering the same ids.
//
// # Safety
// Path arguments must be NUL-terminated strings; `out_fidelity` writable.
enum CieStatus cie_fidelity_files(const char *explanations_path,
                                  const char *predictions_path,
                                  double *out_fidelity);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CIE_H */
