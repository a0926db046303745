#ifndef SELSHOT_H
#define SELSHOT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum SelshotStatus {
  SELSHOT_STATUS_OK = 0,
  // Null pointer, invalid UTF-8 or an out-of-range parameter.
  SELSHOT_STATUS_INVALID_ARGUMENT = 1,
  // A file could not be read.
  SELSHOT_STATUS_IO = 2,
  // Input data was rejected (malformed corpus, empty reference, ...).
  SELSHOT_STATUS_VALIDATION = 3,
  // A remote endpoint failed.
  SELSHOT_STATUS_UPSTREAM = 4,
  // A sample, entity set or embedding was not found.
  SELSHOT_STATUS_NOT_FOUND = 5,
  // A panic was caught at the boundary.
  SELSHOT_STATUS_INTERNAL = 99,
} SelshotStatus;

// Opaque corpus handle.
typedef struct SelshotCorpus SelshotCorpus;

// Opaque selector handle. Owns its corpus copy and features so that it
// outlives the corpus handle it was built from.
typedef struct SelshotSelector SelshotSelector;

// Scores of one prediction against its reference.
typedef struct SelshotScores {
  double bleu;
  double rouge_l;
  double meteor;
} SelshotScores;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null if none. Valid
// until the next failing call on the same thread; do not free.
const char *selshot_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *selshot_version(void);

// Releases a string returned through an `out_json` parameter. Null is a no-op.
//
// # Safety
// `s` must come from this library and not have been freed already.
void selshot_string_free(char *s);

// Loads a JSONL corpus.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum SelshotStatus selshot_corpus_load(const char *path, struct SelshotCorpus **out);

// Number of samples, all splits included. 0 for a null handle.
//
// # Safety
// `corpus` must be null or a live handle.
size_t selshot_corpus_len(const struct SelshotCorpus *corpus);

// # Safety
// `corpus` must be null or a handle from [`selshot_corpus_load`] not yet freed.
void selshot_corpus_free(struct SelshotCorpus *corpus);

// Extracts entities with the local lexical extractor. `language` is
// `"python"` or `"java"`. Writes a JSON object mapping entity type to a
// sorted list of surface forms.
//
// # Safety
// String arguments must be NUL-terminated; `out_json` must be writable.
enum SelshotStatus selshot_extract_entities(const char *code,
                                            const char *language,
                                            char **out_json);

// Token-Jaccard similarity of two snippets.
//
// # Safety
// String arguments must be NUL-terminated; `out` must be writable.
enum SelshotStatus selshot_score_token(const char *a,
                                       const char *b,
                                       const char *language,
                                       double *out);

// BLEU, ROUGE-L and METEOR of `prediction` against `reference`.
//
// # Safety
// String arguments must be NUL-terminated; `out` must be writable.
enum SelshotStatus selshot_metric_scores(const char *prediction,
                                         const char *reference,
                                         struct SelshotScores *out);

// Builds a selector over the train split of `corpus`.
//
// `strategy` is `"token"`, `"semantic"` or `"ner"`. Entity sets for `ner`
// come from the local lexical extractor. `semantic` needs
// `embeddings_path`, a JSONL file of `{"id", "values"}` lines covering
// every train sample; it is ignored by the other strategies and may be
// null. The selector copies what it needs, so `corpus` may be freed first.
//
// # Safety
// `corpus` must be a live handle, strings NUL-terminated or null where
// allowed, `out` writable.
enum SelshotStatus selshot_selector_new(const struct SelshotCorpus *corpus,
                                        const char *strategy,
                                        size_t k,
                                        const char *embeddings_path,
                                        struct SelshotSelector **out);

// Ranks train samples against a query given as code.
//
// Candidates whose id equals `query_id` are skipped; pass null when the
// query is not part of the corpus. For the `semantic` strategy the query
// embedding is looked up by `query_id` in the selector's embeddings, so
// `query_id` is required there (or use [`selshot_selector_rank_vector`]).
// Writes a JSON array of `{rank, id, score, code, explanation}`.
//
// # Safety
// `selector` must be a live handle, strings NUL-terminated or null where
// allowed, `out_json` writable.
enum SelshotStatus selshot_selector_rank(const struct SelshotSelector *selector,
                                         const char *query_code,
                                         const char *query_id,
                                         char **out_json);

// Ranks train samples against an explicit query embedding. Only valid for
// the `semantic` strategy.
//
// # Safety
// `selector` must be a live handle, `values` must point to `len` floats,
// `out_json` writable.
enum SelshotStatus selshot_selector_rank_vector(const struct SelshotSelector *selector,
                                                const float *values,
                                                size_t len,
                                                char **out_json);

// # Safety
// `selector` must be null or a handle from [`selshot_selector_new`] not yet freed.
void selshot_selector_free(struct SelshotSelector *selector);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SELSHOT_H */
