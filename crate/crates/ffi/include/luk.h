#ifndef LUK_H
#define LUK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>

// Extraction flavor.
typedef enum LukFlavor {
  LUK_FLAVOR_INTEGER = 0,
  LUK_FLAVOR_RATIONAL = 1,
  LUK_FLAVOR_REAL = 2,
} LukFlavor;

// Result code of every fallible call.
typedef enum LukStatus {
  LUK_STATUS_OK = 0,
  LUK_STATUS_NULL_POINTER = 1,
  LUK_STATUS_INVALID_UTF8 = 2,
  // malformed JSON, formula or rational
  LUK_STATUS_PARSE = 3,
  // input outside the domain: wrong arity or a value outside [0, 1]
  LUK_STATUS_DOMAIN = 4,
  // network fails the non-degeneracy or shape requirements of extraction
  LUK_STATUS_DEGENERATE = 5,
  // graph is not in normal form
  LUK_STATUS_NOT_NORMAL = 6,
  // branch and bound exceeded `LUK_NODE_BUDGET`
  LUK_STATUS_BUDGET = 7,
  // a panic was caught at the boundary
  LUK_STATUS_INTERNAL = 8,
} LukStatus;

// Opaque formula handle.
typedef struct LukFormula LukFormula;

// Opaque substitution graph handle.
typedef struct LukGraph LukGraph;

// Opaque network handle.
typedef struct LukNetwork LukNetwork;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread; empty if none. The pointer
// stays valid until the next failing call on the same thread.
const char *luk_last_error_message(void);

// Release a string returned by this library.
//
// # Safety
// `s` must come from this library and not be freed twice; null is ignored.
void luk_string_free(char *s);

// # Safety
// `json` is a NUL-terminated string; `out` is writable.
enum LukStatus luk_network_from_json(const char *json, struct LukNetwork **out);

// # Safety
// `net` is a live handle; `out` is writable. Free the result with [`luk_string_free`].
enum LukStatus luk_network_to_json(const struct LukNetwork *net, char **out);

// Input dimension, or 0 for a null handle.
//
// # Safety
// `net` is a live handle or null.
size_t luk_network_input_dim(const struct LukNetwork *net);

// # Safety
// `net` comes from this library and is not used afterwards; null is ignored.
void luk_network_free(struct LukNetwork *net);

// Exact output at a point given as `len` rational strings.
//
// # Safety
// `values` holds `len` NUL-terminated strings; `out` is writable.
enum LukStatus luk_network_eval(const struct LukNetwork *net,
                                const char *const *values,
                                size_t len,
                                char **out);

// # Safety
// `json` is a NUL-terminated string; `out` is writable.
enum LukStatus luk_graph_from_json(const char *json, struct LukGraph **out);

// # Safety
// `graph` is a live handle; `out` is writable.
enum LukStatus luk_graph_to_json(const struct LukGraph *graph, char **out);

// # Safety
// `graph` comes from this library and is not used afterwards; null is ignored.
void luk_graph_free(struct LukGraph *graph);

// The single formula the graph stands for.
//
// # Safety
// `graph` is a live handle; `out` is writable.
enum LukStatus luk_graph_represented_formula(const struct LukGraph *graph, struct LukFormula **out);

// Extract a substitution graph. Honors `LUK_NODE_BUDGET`.
//
// # Safety
// `net` is a live handle; `out` is writable.
enum LukStatus luk_extract(const struct LukNetwork *net,
                           enum LukFlavor flavor,
                           struct LukGraph **out);

// Build a ReLU network from a normal graph. Honors `LUK_NODE_BUDGET`.
//
// # Safety
// `graph` is a live handle; `out` is writable.
enum LukStatus luk_construct(const struct LukGraph *graph, struct LukNetwork **out);

// Extract then construct; `*identical` tells whether the network came back unchanged.
//
// # Safety
// `net` is a live handle; `identical` is writable.
enum LukStatus luk_roundtrip(const struct LukNetwork *net, bool *identical);

// Parse the s-expression syntax, e.g. `(oplus x1 (not x2))`.
//
// # Safety
// `text` is a NUL-terminated string; `out` is writable.
enum LukStatus luk_formula_parse(const char *text, struct LukFormula **out);

// # Safety
// `f` is a live handle; `out` is writable.
enum LukStatus luk_formula_to_string(const struct LukFormula *f, char **out);

// Truth value at a point given as `len` rational strings.
//
// # Safety
// `values` holds `len` NUL-terminated strings; `out` is writable.
enum LukStatus luk_formula_eval(const struct LukFormula *f,
                                const char *const *values,
                                size_t len,
                                char **out);

// # Safety
// `f` comes from this library and is not used afterwards; null is ignored.
void luk_formula_free(struct LukFormula *f);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LUK_H */
