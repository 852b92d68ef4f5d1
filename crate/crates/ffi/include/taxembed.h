#ifndef TAXEMBED_H
#define TAXEMBED_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TxStatus {
  TX_STATUS_OK = 0,
  TX_STATUS_NULL_ARGUMENT = 1,
  TX_STATUS_INVALID_UTF8 = 2,
  TX_STATUS_IO = 3,
  TX_STATUS_PARSE = 4,
  TX_STATUS_UNKNOWN_NODE = 5,
  TX_STATUS_INVALID_GRAPH = 6,
  TX_STATUS_CONFIG = 7,
  TX_STATUS_VALIDATION = 8,
  TX_STATUS_NUMERIC = 9,
  TX_STATUS_BUFFER_SIZE = 10,
  /**
   * The pair has no similarity (different components).
   */
  TX_STATUS_NO_VALUE = 11,
  TX_STATUS_PANIC = 12,
} TxStatus;

typedef enum TxMeasure {
  TX_MEASURE_SHP = 0,
  TX_MEASURE_LCH = 1,
  TX_MEASURE_WUP = 2,
  TX_MEASURE_JCN = 3,
} TxMeasure;

typedef enum TxScoreMode {
  TX_SCORE_MODE_DOT = 0,
  TX_SCORE_MODE_COSINE = 1,
} TxScoreMode;

/**
 * Opaque embedding-matrix handle.
 */
typedef struct TxEmbeddings TxEmbeddings;

/**
 * Opaque taxonomy handle.
 */
typedef struct TxGraph TxGraph;

/**
 * Opaque similarity-measure handle, bound to the graph it was built from.
 */
typedef struct TxSimilarity TxSimilarity;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread. Valid until the next
 * failing call on the same thread; never null.
 */
const char *tx_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *tx_version(void);

/**
 * Loads a `child<TAB>parent` edge list, optionally joining all roots
 * under a new node named `virtual_root`.
 *
 * # Safety
 * `path` must be a NUL-terminated string, `virtual_root` null or
 * NUL-terminated, and `out` a valid pointer.
 */
enum TxStatus tx_graph_load(const char *path, const char *virtual_root, struct TxGraph **out);

/**
 * # Safety
 * `g` must be null or a handle from [`tx_graph_load`] not yet freed.
 */
void tx_graph_free(struct TxGraph *g);

/**
 * Node count, or 0 for a null handle.
 *
 * # Safety
 * `g` must be null or a live graph handle.
 */
size_t tx_graph_node_count(const struct TxGraph *g);

/**
 * # Safety
 * `g` must be a live graph handle, `id` NUL-terminated, `out` valid.
 */
enum TxStatus tx_graph_node_index(const struct TxGraph *g, const char *id, size_t *out);

/**
 * Prepares `measure` on `g`. `counts_path` (raw `node<TAB>count` lines)
 * is required for JCN and ignored otherwise; pass null to omit it.
 *
 * # Safety
 * `g` must be a live graph handle, `counts_path` null or NUL-terminated,
 * `out` valid.
 */
enum TxStatus tx_similarity_new(const struct TxGraph *g,
                                enum TxMeasure measure,
                                const char *counts_path,
                                struct TxSimilarity **out);

/**
 * # Safety
 * `s` must be null or a live similarity handle.
 */
void tx_similarity_free(struct TxSimilarity *s);

/**
 * Similarity of nodes `u` and `v`. Returns [`TxStatus::NoValue`] and
 * writes NaN when they are not connected.
 *
 * # Safety
 * `g` and `s` must be live handles with `s` built from `g`; `u`, `v`
 * NUL-terminated; `out` valid.
 */
enum TxStatus tx_similarity(const struct TxGraph *g,
                            const struct TxSimilarity *s,
                            const char *u,
                            const char *v,
                            double *out);

/**
 * Similarity of `u` to every node, in graph index order; unconnected
 * nodes get 0. `len` must equal the node count.
 *
 * # Safety
 * `g` and `s` must be live handles with `s` built from `g`; `u`
 * NUL-terminated; `out` must hold `len` doubles.
 */
enum TxStatus tx_similarity_one_vs_all(const struct TxGraph *g,
                                       const struct TxSimilarity *s,
                                       const char *u,
                                       double *out,
                                       size_t len);

/**
 * Loads embeddings in text or binary format.
 *
 * # Safety
 * `path` must be NUL-terminated and `out` valid.
 */
enum TxStatus tx_embeddings_load(const char *path, struct TxEmbeddings **out);

/**
 * # Safety
 * `m` must be null or a live embeddings handle.
 */
void tx_embeddings_free(struct TxEmbeddings *m);

/**
 * Row count, or 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live embeddings handle.
 */
size_t tx_embeddings_len(const struct TxEmbeddings *m);

/**
 * Dimensionality, or 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live embeddings handle.
 */
size_t tx_embeddings_dim(const struct TxEmbeddings *m);

/**
 * Row id at `index`, borrowed from the handle; null when out of range.
 *
 * # Safety
 * `m` must be null or a live embeddings handle. The returned pointer is
 * not NUL-terminated; its length is written to `len`.
 */
const char *tx_embeddings_id(const struct TxEmbeddings *m, size_t index, size_t *len);

/**
 * Model score of nodes `u` and `v`.
 *
 * # Safety
 * `m` must be a live handle, `u`, `v` NUL-terminated, `out` valid.
 */
enum TxStatus tx_embeddings_score(const struct TxEmbeddings *m,
                                  const char *u,
                                  const char *v,
                                  enum TxScoreMode mode,
                                  float *out);

/**
 * Dot product of row `u` with every row, in row order. `len` must equal
 * the row count.
 *
 * # Safety
 * `m` must be a live handle, `u` NUL-terminated, `out` must hold `len`
 * floats.
 */
enum TxStatus tx_embeddings_one_vs_all(const struct TxEmbeddings *m,
                                       const char *u,
                                       float *out,
                                       size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TAXEMBED_H */
