/* C interface to the samswin library: opaque context handle, status codes,
 * and one entry point per pipeline command. All heap-allocated strings
 * returned through out-parameters must be released with ss_string_free.
 *
 * Thread safety: a context carries only the last error message; use one
 * context per thread. Commands targeting distinct output directories may run
 * concurrently in separate processes.
 */
#ifndef SAMSWIN_SAMSWIN_H
#define SAMSWIN_SAMSWIN_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct ss_context ss_context;

typedef enum ss_status {
  SS_OK = 0,
  SS_ERR_INVALID_ARGUMENT = 1, /* bad flag/config value (message names the field) */
  SS_ERR_IO = 2,               /* unreadable/unwritable files */
  SS_ERR_STATE = 3,            /* missing checkpoint, empty split, mismatched sizes */
  SS_ERR_INTERNAL = 4
} ss_status;

const char* ss_version(void);

ss_status ss_context_create(ss_context** out_ctx);
void ss_context_destroy(ss_context* ctx);

/* Message for the most recent failing call on this context; owned by the
 * context, valid until the next call. */
const char* ss_last_error(const ss_context* ctx);

void ss_string_free(char* s);

/* Generates the synthetic dataset under out_dir and returns the manifest
 * path. val_fraction 0 keeps everything in the train split. */
ss_status ss_generate_data(ss_context* ctx, const char* out_dir, int per_class, int image_size,
                           uint64_t seed, double val_fraction, char** out_manifest_path);

/* Localization report over a manifest split. segmenter: oracle | precomputed
 * | center (mask_dir required for precomputed, else NULL). */
ss_status ss_segment_report(ss_context* ctx, const char* manifest_path, const char* split,
                            const char* segmenter, const char* mask_dir, int report_iou,
                            const char* out_root, char** out_run_dir);

/* One training stage for a variant (M1..M5). config_json may be NULL or "{}"
 * for defaults; stage 2 requires the stage-one checkpoint. Returns the run
 * directory (best.ckpt, last.ckpt, train_log.jsonl inside). */
ss_status ss_train(ss_context* ctx, const char* config_json, const char* manifest_path,
                   const char* variant, int stage, const char* init_checkpoint,
                   const char* out_root, char** out_run_dir);

/* Evaluates a checkpoint on a split; writes metrics.{json,txt} and the
 * confusion figure into the run directory. */
ss_status ss_evaluate(ss_context* ctx, const char* checkpoint_path, const char* manifest_path,
                      const char* split, const char* out_root, char** out_run_dir);

/* Full M1..M5 protocol plus the Table-5-shaped table (ablation.{tsv,txt,jsonl}). */
ss_status ss_ablate(ss_context* ctx, const char* config_json, const char* manifest_path,
                    const char* out_root, char** out_run_dir);

/* what: "laem" (n = 0..4) or "alpha" ({1e-1,1e-2,1e-3,1e-4}). */
ss_status ss_sweep(ss_context* ctx, const char* what, const char* config_json,
                   const char* manifest_path, const char* out_root, char** out_run_dir);

/* what: "gradcam" | "tsne" | "attention". options_json (nullable) keys:
 * split, tap, count, sample, query, perplexity, iters. */
ss_status ss_visualize(ss_context* ctx, const char* what, const char* checkpoint_path,
                       const char* manifest_path, const char* options_json, const char* out_root,
                       char** out_run_dir);

#ifdef __cplusplus
}
#endif

#endif /* SAMSWIN_SAMSWIN_H */
